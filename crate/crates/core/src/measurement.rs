//! Emulation of the impedance-matrix measurement and the uniform
//! device-error correction fitted afterwards.
//!
//! A run perturbs the nominal components once (bias, then a Gaussian
//! tolerance draw), drives each node in turn, records the node voltages
//! with optional additive noise, and assembles `G[m, n] = V_m / I_n`.
//! Inverting `G` gives back `J`; the shift to `J~` uses the nominal `mu`,
//! as an experimenter only knows nominal values.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analytic::{solve_analytic, LatticeSpec};
use crate::csvio::write_matrix_csv;
use crate::dense::{CMatrix, C64};
use crate::eigen::phase;
use crate::error::{Error, Result};
use crate::laplacian::{assemble, mu_of, FrequencySpec};
use crate::netlist::{chain_meta, ChainParams, Component, Netlist};
use crate::rng::{column_stream, substream, COMPONENT_STREAM};

/// Condition estimate above which the realized Laplacian counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveMode {
    #[default]
    IdealCurrent,
    /// Voltage source behind a series resistor.
    SeriesResistor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub mode: DriveMode,
    /// Amperes for an ideal current drive, volts for the series source.
    pub amplitude: f64,
    pub series_resistance: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            mode: DriveMode::IdealCurrent,
            amplitude: 1.0,
            series_resistance: 2000.0,
        }
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "drive amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.mode == DriveMode::SeriesResistor
            && !(self.series_resistance.is_finite() && self.series_resistance > 0.0)
        {
            return Err(Error::InvalidSpec(format!(
                "series resistance must be positive, got {}",
                self.series_resistance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative standard deviation of each capacitor, drawn once per run.
    pub cap_tolerance: f64,
    pub ind_tolerance: f64,
    /// Uniform relative offset applied to every capacitor.
    pub cap_bias: f64,
    pub ind_bias: f64,
    /// Voltage SNR in dB against the rms reading of each drive column;
    /// `None` means noiseless readings.
    pub voltage_snr_db: Option<f64>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.cap_tolerance) || !ok(self.ind_tolerance) {
            return Err(Error::InvalidSpec("tolerances must be non-negative".into()));
        }
        if !(self.cap_bias > -1.0 && self.ind_bias > -1.0)
            || !self.cap_bias.is_finite()
            || !self.ind_bias.is_finite()
        {
            return Err(Error::InvalidSpec(
                "biases must be finite and above -1".into(),
            ));
        }
        if let Some(snr) = self.voltage_snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidSpec("SNR must be finite".into()));
            }
        }
        Ok(())
    }

    /// Relative amplitude of additive voltage noise.
    pub fn noise_ratio(&self) -> Option<f64> {
        self.voltage_snr_db.map(|db| 10f64.powf(-db / 20.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRun {
    pub omega: f64,
    /// Impedance matrix in ohms.
    pub g: CMatrix,
    pub realized_netlist: Netlist,
    pub j_recovered: CMatrix,
    /// `None` when the nominal netlist is not a chain (no nominal `mu`).
    pub jtilde_recovered: Option<CMatrix>,
    pub drive: DriveConfig,
    pub noise: NoiseModel,
}

impl MeasurementRun {
    pub fn write_g_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(w, &self.g, ["re_ohm", "im_ohm"])
    }

    /// Sidecar describing how `G` was produced.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            omega: f64,
            freq_hz: f64,
            drive: &'a DriveConfig,
            seed: u64,
            noise: &'a NoiseModel,
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            omega: self.omega,
            freq_hz: self.omega / std::f64::consts::TAU,
            drive: &self.drive,
            seed: self.noise.seed,
            noise: &self.noise,
        })?)
    }
}

/// Draws the realized component values: `value * (1 + bias) * (1 + tol * g)`
/// with one standard normal `g` per component in canonical order.
pub fn realize(net: &Netlist, noise: &NoiseModel) -> Result<Netlist> {
    noise.validate()?;
    let mut rng = substream(noise.seed, COMPONENT_STREAM);
    let mut draw = |v: f64, bias: f64, tol: f64| -> Result<f64> {
        let g: f64 = rng.sample(StandardNormal);
        let out = v * (1.0 + bias) * (1.0 + tol * g);
        if out > 0.0 {
            Ok(out)
        } else {
            Err(Error::InvalidComponent(format!(
                "tolerance draw produced non-positive value {out:e}"
            )))
        }
    };
    let mut comps = Vec::with_capacity(net.components().len());
    for c in net.components() {
        comps.push(match *c {
            Component::GroundCap { node, capacitance } => Component::GroundCap {
                node,
                capacitance: draw(capacitance, noise.cap_bias, noise.cap_tolerance)?,
            },
            Component::GroundInd { node, inductance } => Component::GroundInd {
                node,
                inductance: draw(inductance, noise.ind_bias, noise.ind_tolerance)?,
            },
            Component::DirectedCoupling {
                input,
                driven,
                capacitance,
            } => Component::DirectedCoupling {
                input,
                driven,
                capacitance: draw(capacitance, noise.cap_bias, noise.cap_tolerance)?,
            },
        });
    }
    Netlist::new(net.num_nodes(), comps, net.label())
}

/// Column-sum norm of the Laplacian assembled from stamp magnitudes. Unlike
/// `||J||_1` it does not shrink when capacitive and inductive stamps cancel,
/// so `stamp_norm * ||J^-1||_1` sees a resonance even for a single node.
fn stamp_norm(net: &Netlist, freq: &FrequencySpec) -> f64 {
    let w = freq.omega;
    let mut cols = vec![0.0; net.num_nodes()];
    for c in net.components() {
        match *c {
            Component::GroundCap { node, capacitance } => {
                cols[node.zero_based()] += w * capacitance
            }
            Component::GroundInd { node, inductance } => {
                cols[node.zero_based()] += 1.0 / (w * inductance)
            }
            Component::DirectedCoupling {
                input,
                driven,
                capacitance,
            } => {
                cols[driven.zero_based()] += w * capacitance;
                cols[input.zero_based()] += w * capacitance;
            }
        }
    }
    cols.into_iter().fold(0.0, f64::max)
}

pub fn measure(
    net: &Netlist,
    freq: &FrequencySpec,
    drive: &DriveConfig,
    noise: &NoiseModel,
) -> Result<MeasurementRun> {
    drive.validate()?;
    let realized = realize(net, noise)?;
    let n = net.num_nodes();
    let j = assemble(&realized, freq).entries;

    let singular = |condition: f64| Error::Singular {
        freq_hz: freq.f,
        condition,
    };
    let lu = j.lu()?;
    if lu.is_singular() {
        return Err(singular(f64::INFINITY));
    }
    let cond = stamp_norm(&realized, freq) * lu.inverse()?.norm_1();
    if !(cond <= MAX_CONDITION) {
        return Err(singular(cond));
    }

    let mut g = CMatrix::zeros(n, n);
    for col in 0..n {
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        let (mut v, current) = match drive.mode {
            DriveMode::IdealCurrent => {
                rhs[col] = C64::new(drive.amplitude, 0.0);
                (lu.solve(&rhs)?, C64::new(drive.amplitude, 0.0))
            }
            DriveMode::SeriesResistor => {
                // source V behind R: grounded conductance 1/R plus V/R injected
                let r = drive.series_resistance;
                let mut driven = j.clone();
                driven[(col, col)] += C64::new(1.0 / r, 0.0);
                rhs[col] = C64::new(drive.amplitude / r, 0.0);
                let v = driven.lu()?.solve(&rhs)?;
                let current = (C64::new(drive.amplitude, 0.0) - v[col]) / r;
                (v, current)
            }
        };
        if let Some(ratio) = noise.noise_ratio() {
            let rms = (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt();
            let sigma = rms * ratio * FRAC_1_SQRT_2;
            let mut rng = substream(noise.seed, column_stream(col));
            for z in v.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += C64::new(re, im) * sigma;
            }
        }
        let column: Vec<C64> = v.iter().map(|z| z / current).collect();
        g.set_column(col, &column);
    }

    let g_lu = g.lu()?;
    if g_lu.is_singular() {
        return Err(singular(f64::INFINITY));
    }
    let j_recovered = g_lu.inverse()?;
    let jtilde_recovered = chain_meta(net).ok().map(|meta| {
        j_recovered.add_diagonal(C64::new(0.0, freq.omega * mu_of(&meta.params, freq)))
    });

    Ok(MeasurementRun {
        omega: freq.omega,
        g,
        realized_netlist: realized,
        j_recovered,
        jtilde_recovered,
        drive: *drive,
        noise: *noise,
    })
}

/// Grid step of the coarse calibration search.
pub const FIT_GRID_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFit {
    /// Relative inductance correction, `L -> L (1 + lambda_l)`.
    pub lambda_l: f64,
    /// Relative capacitance correction, applied to every capacitor.
    pub lambda_c: f64,
    /// Sum of squared eigenvalue mismatches at the optimum, in S^2.
    pub objective: f64,
    pub bound: f64,
}

/// Model spectrum of `J~` for a balanced chain whose capacitors and
/// inductors carry uniform relative errors, shifted with the nominal `mu`.
pub struct CorrectionModel {
    nominal: ChainParams,
    freq: FrequencySpec,
    mu_nominal: f64,
    /// `delta^(1/N) e^(i theta_m)`
    roots: Vec<C64>,
}

impl CorrectionModel {
    pub fn new(nominal: &ChainParams, freq: &FrequencySpec) -> Result<Self> {
        nominal.validate()?;
        if !nominal.is_balanced(1e-9) {
            return Err(Error::Calibration(format!(
                "nominal chain is unbalanced by {:e} F",
                nominal.balance_residual()
            )));
        }
        let spec = LatticeSpec::real(nominal.n, 1.0, nominal.delta_t())?;
        let roots = solve_analytic(&spec)?.into_iter().map(|m| m.z).collect();
        Ok(Self {
            nominal: *nominal,
            freq: *freq,
            mu_nominal: mu_of(nominal, freq),
            roots,
        })
    }

    pub fn eigenvalues(&self, lambda_l: f64, lambda_c: f64) -> Vec<C64> {
        let p = self.nominal.scaled(lambda_l, lambda_c);
        let offset = mu_of(&p, &self.freq) - self.mu_nominal;
        let minus_i_omega = C64::new(0.0, -self.freq.omega);
        self.roots
            .iter()
            .map(|z| minus_i_omega * (C64::new(offset, 0.0) + z * p.c1))
            .collect()
    }
}

fn sorted_by_phase(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| {
        phase(*a)
            .total_cmp(&phase(*b))
            .then(a.norm().total_cmp(&b.norm()))
    });
    v
}

/// Pairs two phase-sorted lists and returns the smallest sum of squared
/// distances over cyclic rotations, so a mode crossing the `+-pi` cut does
/// not break the pairing.
fn paired_distance(measured: &[C64], model: &[C64]) -> f64 {
    let n = measured.len();
    let mut best = f64::INFINITY;
    for rot in 0..n {
        let (head, tail) = model.split_at(rot);
        let mut sum = 0.0;
        for (m, y) in measured.iter().zip(tail.iter().chain(head)) {
            sum += (m - y).norm_sqr();
        }
        best = best.min(sum);
    }
    best
}

/// Reusable buffers for evaluating the objective many times.
struct Scratch {
    keyed: Vec<(f64, f64, C64)>,
    values: Vec<C64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            keyed: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
        }
    }

    fn objective(
        &mut self,
        model: &CorrectionModel,
        measured_sorted: &[C64],
        lambda_l: f64,
        lambda_c: f64,
    ) -> f64 {
        self.keyed.clear();
        self.keyed.extend(
            model
                .eigenvalues(lambda_l, lambda_c)
                .into_iter()
                .map(|z| (phase(z), z.norm(), z)),
        );
        self.keyed
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        self.values.clear();
        self.values.extend(self.keyed.iter().map(|k| k.2));
        paired_distance(measured_sorted, &self.values)
    }
}

/// Mismatch between a measured `J~` spectrum and the correction model.
pub fn correction_objective(
    model: &CorrectionModel,
    measured_sorted: &[C64],
    lambda_l: f64,
    lambda_c: f64,
) -> f64 {
    paired_distance(
        measured_sorted,
        &sorted_by_phase(model.eigenvalues(lambda_l, lambda_c)),
    )
}

/// Finds uniform relative corrections `(lambda_l, lambda_c)` within
/// `+-bound` that best explain a measured `J~` spectrum.
///
/// Coarse grid at [`FIT_GRID_STEP`], a finer grid (step/10) around the
/// best point, then a quadratic fit on the 3x3 neighbourhood.
pub fn fit_uniform_correction(
    measured: &[C64],
    nominal: &ChainParams,
    freq: &FrequencySpec,
    bound: f64,
) -> Result<CorrectionFit> {
    if measured.is_empty() {
        return Err(Error::Calibration("empty measured spectrum".into()));
    }
    if measured.len() != nominal.n {
        return Err(Error::Calibration(format!(
            "cannot pair {} measured eigenvalues with {} model modes",
            measured.len(),
            nominal.n
        )));
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::Calibration(format!(
            "bound must be positive, got {bound}"
        )));
    }
    let model = CorrectionModel::new(nominal, freq)?;
    let measured = sorted_by_phase(measured.to_vec());
    let scratch = std::cell::RefCell::new(Scratch::new(measured.len()));
    let objective = |l: f64, c: f64| scratch.borrow_mut().objective(&model, &measured, l, c);

    let steps = (2.0 * bound / FIT_GRID_STEP).round() as i64;
    let coord = |k: i64| (-bound + k as f64 * FIT_GRID_STEP).clamp(-bound, bound);
    let mut best = (0.0, 0.0, f64::INFINITY);
    for a in 0..=steps {
        for b in 0..=steps {
            let (l, c) = (coord(a), coord(b));
            let f = objective(l, c);
            if f < best.2 {
                best = (l, c, f);
            }
        }
    }

    let fine = FIT_GRID_STEP / 10.0;
    let centre = (best.0, best.1);
    for a in -10..=10 {
        for b in -10..=10 {
            let l = (centre.0 + a as f64 * fine).clamp(-bound, bound);
            let c = (centre.1 + b as f64 * fine).clamp(-bound, bound);
            let f = objective(l, c);
            if f < best.2 {
                best = (l, c, f);
            }
        }
    }

    if let Some((l, c)) = quadratic_step(&objective, best.0, best.1, fine) {
        if l.abs() <= bound && c.abs() <= bound {
            let f = objective(l, c);
            if f < best.2 {
                best = (l, c, f);
            }
        }
    }

    Ok(CorrectionFit {
        lambda_l: best.0,
        lambda_c: best.1,
        objective: best.2,
        bound,
    })
}

/// Stationary point of the quadratic through the 3x3 stencil around
/// `(x, y)`, if it is a minimum within one step of the centre.
fn quadratic_step(f: &impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> Option<(f64, f64)> {
    let v = |i: f64, j: f64| f(x + i * h, y + j * h);
    let f0 = v(0.0, 0.0);
    let gx = (v(1.0, 0.0) - v(-1.0, 0.0)) / (2.0 * h);
    let gy = (v(0.0, 1.0) - v(0.0, -1.0)) / (2.0 * h);
    let hxx = (v(1.0, 0.0) - 2.0 * f0 + v(-1.0, 0.0)) / (h * h);
    let hyy = (v(0.0, 1.0) - 2.0 * f0 + v(0.0, -1.0)) / (h * h);
    let hxy = (v(1.0, 1.0) - v(1.0, -1.0) - v(-1.0, 1.0) + v(-1.0, -1.0)) / (4.0 * h * h);
    let det = hxx * hyy - hxy * hxy;
    if !(hxx > 0.0 && det > 0.0) {
        return None;
    }
    let dx = -(hyy * gx - hxy * gy) / det;
    let dy = -(hxx * gy - hxy * gx) / det;
    if dx.abs() > h || dy.abs() > h {
        return None;
    }
    Some((x + dx, y + dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::build_chain;

    fn reference_chain(c2: f64, c3: f64) -> ChainParams {
        ChainParams {
            n: 10,
            c0: 10e-9,
            c1: 220e-9,
            c2,
            c3,
            l: 220e-6,
        }
    }

    fn f100k() -> FrequencySpec {
        FrequencySpec::from_hz(100e3).unwrap()
    }

    #[test]
    fn invalid_drive_and_noise() {
        let d = DriveConfig {
            amplitude: 0.0,
            ..DriveConfig::default()
        };
        assert!(d.validate().is_err());
        let d = DriveConfig {
            mode: DriveMode::SeriesResistor,
            series_resistance: -1.0,
            ..DriveConfig::default()
        };
        assert!(d.validate().is_err());
        let n = NoiseModel {
            cap_tolerance: -0.1,
            ..NoiseModel::default()
        };
        assert!(n.validate().is_err());
    }

    #[test]
    fn resonance_is_reported() {
        // single LC tank driven at its resonance
        let l: f64 = 1e-3;
        let c = 1e-6;
        let f0 = 1.0 / (std::f64::consts::TAU * (l * c).sqrt());
        let net =
            crate::netlist::parse_netlist(&format!("nodes 1\nindg 1 {l:e}\ncapg 1 {c:e}")).unwrap();
        let err = measure(
            &net,
            &FrequencySpec::from_hz(f0).unwrap(),
            &DriveConfig::default(),
            &NoiseModel::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err:?}");
        assert!(err.to_string().contains("resonance"));
    }

    #[test]
    fn biases_scale_components() {
        let net = build_chain(&reference_chain(10e-9, 220e-9)).unwrap();
        let noise = NoiseModel {
            cap_bias: -0.015,
            ind_bias: 0.0054,
            ..NoiseModel::default()
        };
        let realized = realize(&net, &noise).unwrap();
        for (a, b) in net.components().iter().zip(realized.components()) {
            match (a, b) {
                (
                    Component::GroundInd { inductance: x, .. },
                    Component::GroundInd { inductance: y, .. },
                ) => {
                    assert!((y / x - 1.0054).abs() < 1e-15)
                }
                (
                    Component::GroundCap { capacitance: x, .. },
                    Component::GroundCap { capacitance: y, .. },
                )
                | (
                    Component::DirectedCoupling { capacitance: x, .. },
                    Component::DirectedCoupling { capacitance: y, .. },
                ) => assert!((y / x - 0.985).abs() < 1e-15),
                _ => panic!("component order changed"),
            }
        }
    }

    #[test]
    fn fit_errors() {
        let p = reference_chain(10e-9, 220e-9);
        let f = f100k();
        assert!(fit_uniform_correction(&[], &p, &f, 0.02).is_err());
        let three = vec![C64::new(0.1, 0.0); 3];
        assert!(matches!(
            fit_uniform_correction(&three, &p, &f, 0.02),
            Err(Error::Calibration(_))
        ));
        let unbalanced = reference_chain(10e-9, 100e-9);
        let ten = vec![C64::new(0.1, 0.0); 10];
        assert!(fit_uniform_correction(&ten, &unbalanced, &f, 0.02).is_err());
    }

    #[test]
    fn fit_at_nominal_is_zero() {
        let p = reference_chain(10e-9, 220e-9);
        let f = f100k();
        let model = CorrectionModel::new(&p, &f).unwrap();
        let data = model.eigenvalues(0.0, 0.0);
        let fit = fit_uniform_correction(&data, &p, &f, 0.02).unwrap();
        assert!(
            fit.lambda_l.abs() <= 1e-4 && fit.lambda_c.abs() <= 1e-4,
            "{fit:?}"
        );
    }

    #[test]
    fn cyclic_pairing_handles_branch_cut() {
        let a = vec![C64::new(-1.0, -1e-9), C64::new(1.0, 0.0)];
        let b = sorted_by_phase(vec![C64::new(-1.0, 1e-9), C64::new(1.0, 0.0)]);
        let a = sorted_by_phase(a);
        assert!(paired_distance(&a, &b) < 1e-16);
    }
}
