//! Iterate engines: decoupled generalized D-ADMM and its matrix form, the
//! full three-block ADMM, exact and approximated method of multipliers,
//! P-EXTRA and the general U/V variant.

mod dadmm;
mod engine;
mod full_admm;
mod general;
mod mm;
mod pextra;

pub(crate) use dadmm::AgentLocal;
pub use dadmm::{
    dadmm_init, dadmm_init_with_alpha, dadmm_matrix_step, dadmm_step, random_dual, AdmmState,
    DualInit,
};
pub use engine::{Algorithm, Engine, EngineSetup, Snapshot};
pub use full_admm::{full_admm_init, full_admm_step, FullAdmmState};
pub(crate) use general::general_local_solve;
pub use general::{general_dadmm_step, GeneralUv};
pub use mm::{mm_approx_step, mm_exact_step, mm_init, MmApprox, MmState};
pub(crate) use pextra::pextra_local_solve;
pub use pextra::{
    pextra_init, pextra_mixing, pextra_overshoot_mixing, pextra_step, PextraParams, PextraState,
};

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::netgraph::NetworkGraph;
use crate::tolerances::Tolerances;

/// Upper end of the convergent relaxation range, `(1 + √5)/2`.
pub const ETA_MAX: f64 = 1.618_033_988_749_895;

/// Penalty `ρ`, relaxation `η`, proximal weights `π_i` (`P = Π ⊗ I_p`)
/// and the local subproblem tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmParams {
    rho: f64,
    eta: f64,
    pi: Vec<f64>,
    tol: f64,
}

impl AdmmParams {
    pub fn new(rho: f64, eta: f64, pi: Vec<f64>) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid("rho", format!("must be positive, got {rho}")));
        }
        if !(eta > 0.0 && eta < ETA_MAX) {
            return Err(invalid(
                "eta",
                format!("must lie in (0, (1+√5)/2), got {eta}"),
            ));
        }
        if let Some(bad) = pi.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(
                "pi",
                format!("weights must be finite and nonnegative, got {bad}"),
            ));
        }
        Ok(Self {
            rho,
            eta,
            pi,
            tol: Tolerances::default().subproblem,
        })
    }

    /// Same `π` for all `n` agents.
    pub fn uniform(n: usize, rho: f64, eta: f64, pi: f64) -> Result<Self> {
        Self::new(rho, eta, vec![pi; n])
    }

    /// Proximal weights `π_i = 1/ξ − ρ d_i` under which D-ADMM reproduces
    /// P-EXTRA. Needs `ξρ ≤ 1/max_i d_i`.
    pub fn pextra_equivalent(graph: &NetworkGraph, xi: f64, rho: f64, eta: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(invalid("xi", format!("must be positive, got {xi}")));
        }
        let d = graph.degree_diag();
        let mut pi = Vec::with_capacity(graph.n());
        for &di in d.iter() {
            let v = 1.0 / xi - rho * di;
            if v < -1e-12 / xi {
                return Err(invalid(
                    "xi",
                    format!(
                        "xi*rho = {} exceeds 1/max d_i = {}",
                        xi * rho,
                        1.0 / d.max()
                    ),
                ));
            }
            pi.push(v.max(0.0));
        }
        Self::new(rho, eta, pi)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_penalty_free(&self) -> bool {
        self.pi.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check(&self, graph: &NetworkGraph) -> Result<()> {
        if self.pi.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: self.pi.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn block(x: &DVector<f64>, i: usize, p: usize) -> &[f64] {
    &x.as_slice()[i * p..(i + 1) * p]
}

pub(crate) fn check_len(x: &DVector<f64>, expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn stack(blocks: Vec<DVector<f64>>, p: usize) -> DVector<f64> {
    let mut out = DVector::zeros(blocks.len() * p);
    for (i, b) in blocks.iter().enumerate() {
        out.rows_mut(i * p, p).copy_from(b);
    }
    out
}

/// Per-agent arithmetic shared by the solvers and the simulated network.
/// Neighbor terms are accumulated in the order given, which callers keep
/// ascending by agent id.
pub(crate) mod kernel {
    use nalgebra::DVector;

    /// `c_i = φ_i − ρ Σ_j (x_i + x_j)`.
    pub fn dadmm_linear_term<'a>(
        phi_i: &[f64],
        x_i: &[f64],
        neighbors: impl IntoIterator<Item = &'a [f64]>,
        rho: f64,
    ) -> DVector<f64> {
        let p = x_i.len();
        let mut acc = vec![0.0; p];
        for xj in neighbors {
            for k in 0..p {
                acc[k] += x_i[k] + xj[k];
            }
        }
        DVector::from_fn(p, |k, _| phi_i[k] - rho * acc[k])
    }

    /// `φ_i + ηρ Σ_j (x_i − x_j)` with the new iterates.
    pub fn dadmm_dual_update<'a>(
        phi_i: &[f64],
        x_i: &[f64],
        neighbors: impl IntoIterator<Item = &'a [f64]>,
        eta: f64,
        rho: f64,
    ) -> DVector<f64> {
        let p = x_i.len();
        let mut acc = vec![0.0; p];
        for xj in neighbors {
            for k in 0..p {
                acc[k] += x_i[k] - xj[k];
            }
        }
        DVector::from_fn(p, |k, _| phi_i[k] + eta * rho * acc[k])
    }

    /// `base + scale · Σ_j w_j x_j` over a closed neighborhood.
    pub fn weighted_update<'a>(
        base: &[f64],
        scale: f64,
        terms: impl IntoIterator<Item = (f64, &'a [f64])>,
    ) -> DVector<f64> {
        let p = base.len();
        let mut acc = vec![0.0; p];
        for (w, xj) in terms {
            for k in 0..p {
                acc[k] += w * xj[k];
            }
        }
        DVector::from_fn(p, |k, _| base[k] + scale * acc[k])
    }
}

/// Ascending closed neighborhood `{i} ∪ N_i`.
pub(crate) fn closed_neighborhood(graph: &NetworkGraph, i: usize) -> Vec<usize> {
    let mut out: Vec<usize> = graph.neighbors(i).to_vec();
    let pos = out.partition_point(|&j| j < i);
    out.insert(pos, i);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::build_graph;

    #[test]
    fn params_validation() {
        assert!(AdmmParams::uniform(3, 0.0, 0.5, 0.0).is_err());
        assert!(AdmmParams::uniform(3, 1.0, 0.0, 0.0).is_err());
        assert!(AdmmParams::uniform(3, 1.0, 1.7, 0.0).is_err());
        assert!(AdmmParams::uniform(3, 1.0, 1.618, 0.0).is_ok());
        assert!(AdmmParams::new(1.0, 0.5, vec![0.1, -0.1]).is_err());
    }

    #[test]
    fn pextra_equivalent_weights() {
        let g = build_graph(3, &[(0, 1), (1, 2)], 1).unwrap();
        // d = (2, 4, 2), ξρ = 1/4
        let p = AdmmParams::pextra_equivalent(&g, 0.25, 1.0, 0.5).unwrap();
        assert_eq!(p.pi(), &[2.0, 0.0, 2.0]);
        assert!(AdmmParams::pextra_equivalent(&g, 0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn closed_neighborhood_is_sorted() {
        let g = build_graph(4, &[(0, 2), (2, 3), (1, 2)], 1).unwrap();
        assert_eq!(closed_neighborhood(&g, 2), vec![0, 1, 2, 3]);
        assert_eq!(closed_neighborhood(&g, 0), vec![0, 2]);
    }
}
