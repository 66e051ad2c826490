//! Circuit Laplacian assembly.
//!
//! Sign convention: `J = -i omega M`, where for the chain `M` carries
//! `mu = 1/(omega^2 L) - (C0 + C1)` on the diagonal, `C1` on the
//! superdiagonal and `C2` in the bottom-left corner. The shifted Laplacian
//! `J~ = J + i omega mu I` then equals `-i omega` times the hopping matrix
//! with `t = C1`, `t * delta_t = C2`.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::csvio::write_matrix_csv;
use crate::dense::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::netlist::{chain_meta, ChainParams, Component, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub f: f64,
    pub omega: f64,
}

impl FrequencySpec {
    pub fn from_hz(f: f64) -> Result<Self> {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidFrequency(f));
        }
        Ok(Self { f, omega: TAU * f })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Raw,
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceMatrix {
    pub omega: f64,
    pub kind: MatrixKind,
    pub entries: CMatrix,
    pub label: String,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(w, &self.entries, ["re_S", "im_S"])
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            omega: f64,
            freq_hz: f64,
            kind: MatrixKind,
            label: &'a str,
            n: usize,
            /// Row-major `[re, im]` pairs in siemens.
            entries: Vec<[f64; 2]>,
        }
        let e = Export {
            omega: self.omega,
            freq_hz: self.omega / TAU,
            kind: self.kind,
            label: &self.label,
            n: self.n(),
            entries: self
                .entries
                .as_slice()
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&e)?)
    }
}

/// Stamps every component into `J(omega)`.
///
/// Grounded capacitor `C` at `m`: `J[m,m] += i omega C`.
/// Grounded inductor `L` at `m`: `J[m,m] += 1/(i omega L)`.
/// Coupling sensing `s`, driving `d`: `J[d,d] += i omega C`,
/// `J[d,s] -= i omega C`; row `s` is untouched since the follower input
/// draws no current.
///
/// Diagonal stamps are aggregated per node as `mu_m = 1/(omega^2 L) - sum C`
/// and written once as `-i omega mu_m`, the same expression [`mu_of`] uses,
/// so a balanced chain shifts to an exactly zero diagonal.
pub fn assemble(net: &Netlist, freq: &FrequencySpec) -> AdmittanceMatrix {
    let n = net.num_nodes();
    let w = freq.omega;
    let mut j = CMatrix::zeros(n, n);
    let mut cap_sum = vec![0.0; n];
    let mut inductance: Vec<Option<f64>> = vec![None; n];
    for c in net.components() {
        match *c {
            Component::GroundCap { node, capacitance } => cap_sum[node.zero_based()] += capacitance,
            Component::GroundInd {
                node,
                inductance: l,
            } => inductance[node.zero_based()] = Some(l),
            Component::DirectedCoupling {
                input,
                driven,
                capacitance,
            } => {
                let d = driven.zero_based();
                cap_sum[d] += capacitance;
                j[(d, input.zero_based())] += C64::new(0.0, -w * capacitance);
            }
        }
    }
    for m in 0..n {
        let inv = inductance[m].map_or(0.0, |l| 1.0 / (w * w * l));
        let mu_m = inv - cap_sum[m];
        j[(m, m)] += C64::new(0.0, -w * mu_m);
    }
    AdmittanceMatrix {
        omega: w,
        kind: MatrixKind::Raw,
        entries: j,
        label: net.label().to_string(),
    }
}

/// `mu(omega) = 1/(omega^2 L) - (C1 + C0)`.
pub fn mu_of(p: &ChainParams, freq: &FrequencySpec) -> f64 {
    let w = freq.omega;
    1.0 / (w * w * p.l) - (p.c1 + p.c0)
}

/// `J~ = J + i omega mu I`.
pub fn shift(j: &AdmittanceMatrix, mu: f64) -> Result<AdmittanceMatrix> {
    j.entries.ensure_square()?;
    Ok(AdmittanceMatrix {
        omega: j.omega,
        kind: MatrixKind::Shifted,
        entries: j.entries.add_diagonal(C64::new(0.0, j.omega * mu)),
        label: j.label.clone(),
    })
}

/// Assembles and shifts a chain netlist using its own nominal `mu`.
/// Logs a warning when the chain is unbalanced, since the shifted diagonal
/// is then not uniform.
pub fn assemble_shifted(net: &Netlist, freq: &FrequencySpec) -> Result<AdmittanceMatrix> {
    let meta = chain_meta(net)?;
    if !meta.params.is_balanced(1e-12) {
        log::warn!(
            "chain is unbalanced (|C0+C1 - C2-C3| = {:e} F); shifted diagonal is not uniform",
            meta.params.balance_residual()
        );
    }
    shift(&assemble(net, freq), mu_of(&meta.params, freq))
}
