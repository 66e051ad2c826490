//! Skin-effect observables and (N, delta_t) scans.
//!
//! The skin factor `|z|` is the decay ratio shared by every eigenstate. The
//! inverse participation ratio is an extra localization diagnostic:
//! 1 for a state on a single site, `1/N` for a uniform state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{skin_factor, LatticeSpec};
use crate::dense::C64;
use crate::eigen::{eig, SolverConfig, Spectrum};
use crate::error::{Error, Result};
use crate::format::sig12;
use crate::laplacian::{assemble_shifted, FrequencySpec};
use crate::netlist::{build_chain, ChainParams};

pub fn ipr(state: &[C64]) -> Result<f64> {
    let p2: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    if p2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let p4: f64 = state.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum();
    Ok(p4 / (p2 * p2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkinFit {
    pub z: f64,
    /// Some component vanishes exactly, as at the open-boundary point.
    pub open_boundary: bool,
}

/// Least-squares slope of `ln|psi_n|` against `n`, exponentiated.
///
/// A single-site state has no slope and reports 1.
pub fn fit_skin_factor(state: &[C64]) -> Result<SkinFit> {
    if state.is_empty() || state.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::ZeroVector);
    }
    if state.iter().any(|z| z.norm() == 0.0) {
        return Ok(SkinFit {
            z: 0.0,
            open_boundary: true,
        });
    }
    let n = state.len();
    if n == 1 {
        return Ok(SkinFit {
            z: 1.0,
            open_boundary: false,
        });
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ys: Vec<f64> = state.iter().map(|z| z.norm().ln()).collect();
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(SkinFit {
        z: (sxy / sxx).exp(),
        open_boundary: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProfile {
    /// 1-based mode label.
    pub mode: usize,
    pub eigenvalue: C64,
    /// `|psi_n|` scaled so the largest is exactly 1; node `n` is at `n-1`.
    pub magnitudes: Vec<f64>,
}

impl StateProfile {
    pub fn from_state(mode: usize, eigenvalue: C64, state: &[C64]) -> Result<Self> {
        let mags: Vec<f64> = state.iter().map(|z| z.norm()).collect();
        let max = mags.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut magnitudes: Vec<f64> = mags.iter().map(|m| m / max).collect();
        if let Some(top) = mags.iter().position(|&m| m == max) {
            magnitudes[top] = 1.0;
        }
        Ok(Self {
            mode,
            eigenvalue,
            magnitudes,
        })
    }
}

/// One profile per mode, except that modes whose eigenvalue lies within
/// `merge_tol` of an already listed mode are dropped. At an exceptional
/// point all modes share one eigenvector, so a single profile remains.
pub fn state_profiles(spectrum: &Spectrum, merge_tol: f64) -> Result<Vec<StateProfile>> {
    let mut out: Vec<StateProfile> = Vec::new();
    for k in 0..spectrum.len() {
        let lambda = spectrum.eigenvalues[k];
        if out
            .iter()
            .any(|p| (p.eigenvalue - lambda).norm() <= merge_tol)
        {
            continue;
        }
        out.push(StateProfile::from_state(
            k + 1,
            lambda,
            &spectrum.eigenvector(k),
        )?);
    }
    Ok(out)
}

pub fn write_profiles_csv<W: Write>(mut w: W, profiles: &[StateProfile]) -> Result<()> {
    writeln!(w, "mode,node,abs_psi")?;
    for p in profiles {
        for (i, m) in p.magnitudes.iter().enumerate() {
            writeln!(w, "{},{},{}", p.mode, i + 1, sig12(*m))?;
        }
    }
    Ok(())
}

/// Values shared by every chain in a scan; `C2` and `C3` follow from
/// `delta_t` with the balance `C2 + C3 = C0 + C1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainTemplate {
    pub c0: f64,
    pub c1: f64,
    pub l: f64,
}

impl ChainTemplate {
    pub fn chain(&self, n: usize, delta_t: f64) -> Result<ChainParams> {
        ChainParams::balanced(n, self.c0, self.c1, self.l, delta_t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub delta_t: f64,
    pub z_analytic: f64,
    /// Mean fitted skin factor over all numerical eigenvectors.
    pub z_fitted: f64,
    pub ipr_mean: f64,
    /// Largest eigenvalue modulus of `J~`, siemens.
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub n: usize,
    pub delta_t: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub failures: Vec<ScanFailure>,
}

impl ScanTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "N,delta_t,z_analytic,z_fitted,ipr_mean,spectral_radius_S"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.n,
                sig12(r.delta_t),
                sig12(r.z_analytic),
                sig12(r.z_fitted),
                sig12(r.ipr_mean),
                sig12(r.spectral_radius)
            )?;
        }
        Ok(())
    }

    pub fn get(&self, n: usize, delta_t: f64) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.n == n && r.delta_t == delta_t)
    }
}

/// Skin factor, IPR and spectral radius of one numerical spectrum.
pub fn spectrum_metrics(spectrum: &Spectrum) -> Result<(f64, f64)> {
    let n = spectrum.len();
    let mut z_sum = 0.0;
    let mut ipr_sum = 0.0;
    for k in 0..n {
        let v = spectrum.eigenvector(k);
        z_sum += fit_skin_factor(&v)?.z;
        ipr_sum += ipr(&v)?;
    }
    Ok((z_sum / n as f64, ipr_sum / n as f64))
}

pub fn scan_point(
    n: usize,
    delta_t: f64,
    template: &ChainTemplate,
    freq: &FrequencySpec,
    cfg: &SolverConfig,
) -> Result<ScanRow> {
    let params = template.chain(n, delta_t)?;
    let jt = assemble_shifted(&build_chain(&params)?, freq)?;
    let spectrum = eig(&jt.entries, cfg)?;
    let (z_fitted, ipr_mean) = spectrum_metrics(&spectrum)?;
    let spec = LatticeSpec::real(n, params.c1, params.delta_t())?;
    Ok(ScanRow {
        n,
        delta_t,
        z_analytic: skin_factor(&spec),
        z_fitted,
        ipr_mean,
        spectral_radius: spectrum.spectral_radius(),
    })
}

/// Evaluates every `(N, delta_t)` pair in grid order (N outer). Infeasible
/// points land in `failures` instead of aborting the scan.
pub fn scan(
    n_list: &[usize],
    delta_list: &[f64],
    template: &ChainTemplate,
    freq: &FrequencySpec,
    cfg: &SolverConfig,
) -> ScanTable {
    let mut table = ScanTable::default();
    for &n in n_list {
        for &delta_t in delta_list {
            match scan_point(n, delta_t, template, freq, cfg) {
                Ok(row) => table.rows.push(row),
                Err(e) => table.failures.push(ScanFailure {
                    n,
                    delta_t,
                    message: e.to_string(),
                }),
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn ipr_edges() {
        let mut local = vec![c(0.0); 10];
        local[0] = c(1.0);
        assert_eq!(ipr(&local).unwrap(), 1.0);
        let uniform = vec![C64::new(0.3, 0.4); 8];
        assert!((ipr(&uniform).unwrap() - 0.125).abs() < 1e-15);
        assert!(matches!(ipr(&[c(0.0); 3]), Err(Error::ZeroVector)));
    }

    #[test]
    fn skin_fit_edges() {
        let extended: Vec<C64> = (0..10)
            .map(|k| C64::from_polar(1.0, 0.628 * k as f64))
            .collect();
        assert!((fit_skin_factor(&extended).unwrap().z - 1.0).abs() < 1e-14);
        let mut ep = vec![c(0.0); 10];
        ep[0] = c(1.0);
        assert_eq!(
            fit_skin_factor(&ep).unwrap(),
            SkinFit {
                z: 0.0,
                open_boundary: true
            }
        );
        assert!(fit_skin_factor(&[]).is_err());
    }

    #[test]
    fn geometric_fit_is_exact() {
        let z = C64::from_polar(0.734104239094, 1.1);
        let state: Vec<C64> = (0..10).map(|k| z.powu(k)).collect();
        assert!((fit_skin_factor(&state).unwrap().z - 0.734104239094).abs() < 1e-12);
    }

    #[test]
    fn profile_normalization() {
        let p =
            StateProfile::from_state(3, c(0.0), &[c(0.0), C64::new(0.0, -2.0), c(1.0)]).unwrap();
        assert_eq!(p.magnitudes, vec![0.0, 1.0, 0.5]);
        assert!(StateProfile::from_state(1, c(0.0), &[c(0.0)]).is_err());
    }

    #[test]
    fn infeasible_points_are_recorded() {
        let template = ChainTemplate {
            c0: 10e-9,
            c1: 220e-9,
            l: 220e-6,
        };
        let f = FrequencySpec::from_hz(100e3).unwrap();
        let t = scan(&[4], &[0.5, 2.0], &template, &f, &SolverConfig::default());
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.failures.len(), 1);
        assert_eq!(t.failures[0].delta_t, 2.0);
    }
}
