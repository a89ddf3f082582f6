use nalgebra::{DMatrix, DVector};

use super::search::maximize_bracketed;
use crate::denselin::{kron_identity, smallest_nonzero_eig, sym_eigen, SymMatrix};
use crate::error::{Error, Result};
use crate::netgraph::NetworkGraph;
use crate::objective::SumProfile;
use crate::solvers::AdmmParams;
use crate::tolerances::Tolerances;

/// Range of `log10 τ` searched for the contraction parameter.
pub const LOG_TAU_RANGE: (f64, f64) = (-12.0, 12.0);
/// Coarse samples taken before golden-section refinement.
pub const SEARCH_GRID: usize = 481;

/// Auxiliary `γ` of the restricted strong convexity bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Fixed(f64),
    Optimize,
}

/// The two lower bounds on `μ_g` at a given `γ`:
/// `μ_f̄/n − 2Lγ` and `λ̃ ρ(1−η) / (2(1 + 1/γ²))`.
pub fn mu_g_branches(
    profile: &SumProfile,
    lambda_tilde: f64,
    rho: f64,
    eta: f64,
    gamma: f64,
) -> (f64, f64) {
    let first = profile.mu_sum / profile.n as f64 - 2.0 * profile.lipschitz * gamma;
    let g2 = gamma * gamma;
    let second = lambda_tilde * rho * (1.0 - eta) * g2 / (2.0 * (g2 + 1.0));
    (first, second)
}

/// Upper end of the admissible `γ` interval, `(μ_f̄/n)/(2L)`.
pub fn gamma_upper(profile: &SumProfile) -> f64 {
    profile.mu_sum / profile.n as f64 / (2.0 * profile.lipschitz)
}

/// Restricted strong convexity constant of `g` with respect to the
/// consensual optimum, and the `γ` that produced it.
pub fn mu_g(
    profile: &SumProfile,
    graph: &NetworkGraph,
    rho: f64,
    eta: f64,
    gamma: GammaChoice,
) -> Result<(f64, f64)> {
    let tol = Tolerances::default();
    let lt = smallest_nonzero_eig(&graph.laplacian(), None, tol.jacobi)?;
    mu_g_with_spectrum(profile, lt, rho, eta, gamma, tol.search)
}

pub(crate) fn mu_g_with_spectrum(
    profile: &SumProfile,
    lambda_tilde: f64,
    rho: f64,
    eta: f64,
    gamma: GammaChoice,
    search_tol: f64,
) -> Result<(f64, f64)> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::EtaOutOfRange(eta));
    }
    let upper = gamma_upper(profile);
    let eval = |g: f64| {
        let (a, b) = mu_g_branches(profile, lambda_tilde, rho, eta, g);
        a.min(b)
    };
    match gamma {
        GammaChoice::Fixed(g) => {
            if !(g > 0.0 && g < upper) {
                return Err(Error::GammaOutOfRange { gamma: g, upper });
            }
            Ok((eval(g), g))
        }
        GammaChoice::Optimize => {
            let (g, v) =
                maximize_bracketed(eval, 0.0, upper, SEARCH_GRID, search_tol * upper.max(1.0));
            Ok((v, g))
        }
    }
}

/// Contraction constants for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub rho: f64,
    pub eta: f64,
    /// Block dimension the semi-norm matrices are lifted to.
    pub p: usize,
    pub mu_g: f64,
    pub gamma_star: f64,
    pub l_g: f64,
    /// Smallest nonzero eigenvalue of `E_oᵀE_o`.
    pub lambda_tilde_min: f64,
    pub lambda_max_laplacian: f64,
    pub lambda_max_unoriented: f64,
    pub lambda_max_m: f64,
    pub delta: f64,
    pub tau_star: f64,
    /// Present when `P = 0`.
    pub delta_admm: Option<f64>,
    pub tau_admm: Option<f64>,
    /// Graph-level `M = ρD + Π − (ρ/2)L_G`; the lifted version is `M ⊗ I_p`.
    pub m_graph: SymMatrix,
    /// Graph-level `E_uᵀE_u`.
    pub unoriented_gram: SymMatrix,
}

impl RateCertificate {
    /// Contraction factor `1/(1+δ)` in the H semi-norm.
    pub fn bound(&self) -> f64 {
        1.0 / (1.0 + self.delta)
    }

    /// Contraction factor `1/(1+δ_ADMM)` in the G norm, when available.
    pub fn bound_admm(&self) -> Option<f64> {
        self.delta_admm.map(|d| 1.0 / (1.0 + d))
    }

    /// `M ⊗ I_p`.
    pub fn m(&self) -> SymMatrix {
        self.m_graph.kron_identity(self.p)
    }

    /// `H = diag((2/ρη) I_mp, M ⊗ I_p)` for `m` arcs.
    pub fn h(&self, arcs: usize) -> SymMatrix {
        let m = self.m();
        let mp = arcs * self.p;
        let np = m.order();
        let mut h = DMatrix::zeros(mp + np, mp + np);
        h.view_mut((0, 0), (mp, mp))
            .fill_diagonal(2.0 / (self.rho * self.eta));
        h.view_mut((mp, mp), (np, np)).copy_from(m.as_matrix());
        SymMatrix::symmetrize(h)
    }

    /// `G = diag((1/ρη) I_mp, ρ I_mp)` acting on `(α, z)`.
    pub fn g(&self, arcs: usize) -> SymMatrix {
        let mp = arcs * self.p;
        let mut d = DVector::from_element(2 * mp, self.rho);
        d.rows_mut(0, mp).fill(1.0 / (self.rho * self.eta));
        SymMatrix::from_diagonal(&d)
    }

    /// `‖(Δα, Δx)‖²_H` without forming `H`.
    pub fn h_dist_sq(&self, d_alpha: &DVector<f64>, d_x: &DVector<f64>) -> Result<f64> {
        let mx = crate::netgraph::apply_blocks(self.m_graph.as_matrix(), self.p, d_x)?;
        let v = 2.0 / (self.rho * self.eta) * d_alpha.norm_squared() + d_x.dot(&mx);
        Ok(v.max(0.0))
    }

    /// `‖(Δα, ½E_u Δx)‖²_G` without forming `G`.
    pub fn g_dist_sq(&self, d_alpha: &DVector<f64>, d_x: &DVector<f64>) -> Result<f64> {
        let ux = crate::netgraph::apply_blocks(self.unoriented_gram.as_matrix(), self.p, d_x)?;
        let v = d_alpha.norm_squared() / (self.rho * self.eta) + self.rho / 4.0 * d_x.dot(&ux);
        Ok(v.max(0.0))
    }
}

/// `min` of the two branches bounding `δ` at a given `τ`.
pub fn delta_branches(
    rho: f64,
    eta: f64,
    mu_g: f64,
    l_g: f64,
    lambda_tilde: f64,
    lambda_max_m: f64,
    tau: f64,
) -> (f64, f64) {
    let first = rho * eta * lambda_tilde / (2.0 * (1.0 + 1.0 / tau) * lambda_max_m);
    let second = rho * eta * mu_g * lambda_tilde
        / ((1.0 + tau) * l_g * l_g + rho * eta * lambda_max_m * lambda_tilde);
    (first, second)
}

/// Branches of the `P = 0` bound measured in the G norm.
pub fn delta_admm_branches(
    rho: f64,
    eta: f64,
    mu_g: f64,
    l_g: f64,
    lambda_tilde: f64,
    lambda_max_u: f64,
    tau: f64,
) -> (f64, f64) {
    let first = eta * lambda_tilde / ((1.0 + 1.0 / tau) * lambda_max_u);
    let second = 2.0 * rho * eta * mu_g * lambda_tilde
        / (rho * rho * eta * lambda_max_u * lambda_tilde + (1.0 + tau) * l_g * l_g);
    (first, second)
}

/// Maximizes `min(branches(τ))` over `log10 τ`; returns `(τ⋆, value)`.
pub fn maximize_over_tau(branches: impl Fn(f64) -> (f64, f64), tol: f64) -> (f64, f64) {
    let (lo, hi) = LOG_TAU_RANGE;
    let (t, v) = maximize_bracketed(
        |lt| {
            let (a, b) = branches(10f64.powf(lt));
            a.min(b)
        },
        lo,
        hi,
        SEARCH_GRID,
        tol,
    );
    (10f64.powf(t), v)
}

/// Contraction certificate in the H semi-norm (and in the G norm when `P = 0`).
pub fn rate_certificate(
    graph: &NetworkGraph,
    profile: &SumProfile,
    params: &AdmmParams,
) -> Result<RateCertificate> {
    rate_certificate_with(graph, profile, params, &Tolerances::default())
}

pub fn rate_certificate_with(
    graph: &NetworkGraph,
    profile: &SumProfile,
    params: &AdmmParams,
    tol: &Tolerances,
) -> Result<RateCertificate> {
    let (rho, eta) = (params.rho(), params.eta());
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::EtaOutOfRange(eta));
    }
    if params.pi().len() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: params.pi().len(),
        });
    }
    let unavailable = |e: Error| Error::CertificateUnavailable(e.to_string());
    let lap = graph.laplacian();
    let lap_eig = sym_eigen(&lap, tol.jacobi).map_err(unavailable)?;
    let lambda_max_laplacian = lap_eig.max();
    let lambda_tilde = smallest_nonzero_eig(&lap, None, tol.jacobi).map_err(unavailable)?;

    let (mu_g, gamma_star) = mu_g_with_spectrum(
        profile,
        lambda_tilde,
        rho,
        eta,
        GammaChoice::Optimize,
        tol.search,
    )?;
    if !(mu_g > 0.0) {
        return Err(Error::CertificateUnavailable(format!(
            "mu_g = {mu_g} is not positive"
        )));
    }
    let l_g = profile.lipschitz + (1.0 - eta) * rho / 2.0 * lambda_max_laplacian;

    let ugram = graph.unoriented_gram();
    let pi = DVector::from_column_slice(params.pi());
    let m_graph =
        SymMatrix::symmetrize(ugram.as_matrix() * (rho / 2.0) + DMatrix::from_diagonal(&pi));
    let m_eig = sym_eigen(&m_graph, tol.jacobi).map_err(unavailable)?;
    if m_eig.min() < -tol.spectral * m_eig.max().max(1.0) {
        return Err(Error::CertificateUnavailable(format!(
            "M has negative eigenvalue {}",
            m_eig.min()
        )));
    }
    let lambda_max_m = m_eig.max();
    let lambda_max_unoriented = sym_eigen(&ugram, tol.jacobi).map_err(unavailable)?.max();

    let (tau_star, delta) = maximize_over_tau(
        |t| delta_branches(rho, eta, mu_g, l_g, lambda_tilde, lambda_max_m, t),
        tol.search,
    );
    if !(delta > 0.0) {
        return Err(Error::CertificateUnavailable(format!(
            "delta = {delta} is not positive"
        )));
    }
    let (tau_admm, delta_admm) = if params.is_penalty_free() {
        let (t, d) = maximize_over_tau(
            |t| delta_admm_branches(rho, eta, mu_g, l_g, lambda_tilde, lambda_max_unoriented, t),
            tol.search,
        );
        (Some(t), Some(d))
    } else {
        (None, None)
    };

    Ok(RateCertificate {
        rho,
        eta,
        p: graph.p(),
        mu_g,
        gamma_star,
        l_g,
        lambda_tilde_min: lambda_tilde,
        lambda_max_laplacian,
        lambda_max_unoriented,
        lambda_max_m,
        delta,
        tau_star,
        delta_admm,
        tau_admm,
        m_graph,
        unoriented_gram: ugram,
    })
}

/// Certificate for `P = 0`, including the G-norm parameter `δ_ADMM`.
pub fn rate_certificate_admm(
    graph: &NetworkGraph,
    profile: &SumProfile,
    rho: f64,
    eta: f64,
) -> Result<RateCertificate> {
    let params = AdmmParams::uniform(graph.n(), rho, eta, 0.0).map_err(|e| match e {
        Error::InvalidParameter { name: "eta", .. } => Error::EtaOutOfRange(eta),
        other => other,
    })?;
    rate_certificate(graph, profile, &params)
}

/// `uᵀ·mat·u`, clamped at zero.
pub fn seminorm(u: &DVector<f64>, mat: &SymMatrix) -> Result<f64> {
    if u.len() != mat.order() {
        return Err(Error::DimensionMismatch {
            expected: mat.order(),
            got: u.len(),
        });
    }
    Ok(mat.quad_form(u).max(0.0))
}

/// `M ⊗ I_p` assembled from a graph-level matrix; exposed for tests comparing lifted spectra.
pub fn lift(m: &SymMatrix, p: usize) -> SymMatrix {
    SymMatrix::symmetrize(kron_identity(m.as_matrix(), p))
}
