//! Closed-form spectrum of the unidirectional hopping chain
//!
//! `H = t * sum_{n<N} |n><n+1| + t * delta * |N><1|`
//!
//! With the ansatz `psi_n = z^(n-1)` the bulk rows give `E = t z` and the
//! boundary row gives `z^N = delta`. Every other module checks itself
//! against these formulas.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dense::{CMatrix, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n: usize,
    pub t: C64,
    pub delta_t: C64,
}

impl LatticeSpec {
    pub fn new(n: usize, t: C64, delta_t: C64) -> Result<Self> {
        let spec = Self { n, t, delta_t };
        spec.validate()?;
        Ok(spec)
    }

    /// Real hopping and real boundary coupling.
    pub fn real(n: usize, t: f64, delta_t: f64) -> Result<Self> {
        Self::new(n, C64::new(t, 0.0), C64::new(delta_t, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("site count N must be at least 1".into()));
        }
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        if !finite(self.t) || !finite(self.delta_t) {
            return Err(Error::InvalidSpec("t and delta_t must be finite".into()));
        }
        Ok(())
    }

    /// Open boundary: the chain is a single Jordan block.
    pub fn is_exceptional_point(&self) -> bool {
        self.delta_t == C64::new(0.0, 0.0)
    }

    /// Dense hopping matrix `H` (0-based indices).
    pub fn hamiltonian(&self) -> CMatrix {
        let n = self.n;
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            h[(i, i + 1)] = self.t;
        }
        if n > 0 {
            h[(n - 1, 0)] += self.t * self.delta_t;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMode {
    /// Mode index `1..=N`.
    pub m: usize,
    /// `2 pi m / N`, in `(0, 2 pi]`.
    pub theta: f64,
    pub z: C64,
    pub energy: C64,
    /// `psi_n = z^(n-1)`, so `state[0] == 1`.
    pub state: Vec<C64>,
    /// Algebraic multiplicity of `energy`: 1 away from the exceptional
    /// point, `N` at `delta_t = 0`.
    pub multiplicity: usize,
}

/// All `N` modes ordered by ascending `theta`.
///
/// At `delta_t = 0` the spectrum collapses to the `N`-fold degenerate
/// `E = 0` with the single eigenvector `(1, 0, ..., 0)`; each of the `N`
/// returned entries then carries that same state and `multiplicity == N`.
pub fn solve_analytic(spec: &LatticeSpec) -> Result<Vec<AnalyticMode>> {
    spec.validate()?;
    let n = spec.n;
    if spec.is_exceptional_point() {
        let mut state = vec![C64::new(0.0, 0.0); n];
        state[0] = C64::new(1.0, 0.0);
        return Ok((1..=n)
            .map(|m| AnalyticMode {
                m,
                theta: TAU * m as f64 / n as f64,
                z: C64::new(0.0, 0.0),
                energy: C64::new(0.0, 0.0),
                state: state.clone(),
                multiplicity: n,
            })
            .collect());
    }

    // principal branch of delta^(1/N)
    let (r, phi) = spec.delta_t.to_polar();
    let root = C64::from_polar(r.powf(1.0 / n as f64), phi / n as f64);

    Ok((1..=n)
        .map(|m| {
            let theta = TAU * m as f64 / n as f64;
            let z = root * C64::from_polar(1.0, theta);
            let mut state = Vec::with_capacity(n);
            let mut psi = C64::new(1.0, 0.0);
            for _ in 0..n {
                state.push(psi);
                psi *= z;
            }
            AnalyticMode {
                m,
                theta,
                z,
                energy: spec.t * z,
                state,
                multiplicity: 1,
            }
        })
        .collect())
}

/// Common decay ratio `|psi_(n+1) / psi_n| = |delta_t|^(1/N)`.
pub fn skin_factor(spec: &LatticeSpec) -> f64 {
    let r = spec.delta_t.norm();
    if r == 0.0 {
        0.0
    } else if r == 1.0 {
        1.0
    } else {
        r.powf(1.0 / spec.n.max(1) as f64)
    }
}
