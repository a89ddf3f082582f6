use nalgebra::{DMatrix, DVector};

use crate::denselin::{solve_spd, sym_eigen, MinNormSolver, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::netgraph::{incidence_operators, BlockOperator, NetworkGraph};
use crate::objective::{
    check_graph, damped_newton, grad_f, ObjectiveComponent, STRONG_CONVEXITY_FLOOR,
};
use crate::tolerances::Tolerances;

/// Stationarity tolerance for the centralized solve of the sum problem.
pub const REFERENCE_TOL: f64 = 1e-12;

/// Consensual optimum and its unique multiplier in `range(E_o)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    /// Minimizer of `Σ f_i`, length `p`.
    pub x_bar: DVector<f64>,
    /// `x_bar` replicated to every agent.
    pub x_star: DVector<f64>,
    /// Minimum-norm solution of `E_oᵀα = −∇f(x⋆)`.
    pub alpha_star: DVector<f64>,
    /// `α⋆/√η`, the fixed point of the method of multipliers.
    pub nu_star: DVector<f64>,
    pub objective_value: f64,
}

impl ReferenceSolution {
    /// `φ⋆ = E_oᵀα⋆ = −∇f(x⋆)`.
    pub fn phi_star(&self, graph: &NetworkGraph) -> Result<DVector<f64>> {
        incidence_operators(graph)
            .oriented
            .apply_transpose(&self.alpha_star)
    }
}

/// Minimizer of `f̄ = Σ f_i` on `ℝ^p`: closed form for quadratic kinds,
/// damped Newton otherwise.
pub fn minimize_sum(components: &[ObjectiveComponent], p: usize) -> Result<DVector<f64>> {
    if components.iter().all(|c| c.is_quadratic()) {
        let mut q = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        for c in components {
            let (qi, bi) = c.quadratic_parts().expect("quadratic kind");
            q += qi;
            b += bi;
        }
        let q = SymMatrix::symmetrize(q);
        let mu = sym_eigen(&q, 1e-12)?.min();
        if mu <= STRONG_CONVEXITY_FLOOR {
            return Err(Error::NotStronglyConvex(mu));
        }
        return solve_spd(&q, &b).map_err(|_| Error::NotStronglyConvex(mu));
    }
    let value = |x: &DVector<f64>| components.iter().map(|c| c.value(x)).sum::<f64>();
    let grad = |x: &DVector<f64>| {
        components.iter().fold(DVector::zeros(p), |acc, c| {
            acc + c
                .grad(x)
                .unwrap_or_else(|_| DVector::from_element(p, f64::NAN))
        })
    };
    let hess = |x: &DVector<f64>| {
        components
            .iter()
            .fold(DMatrix::zeros(p, p), |acc, c| acc + c.hessian(x))
    };
    damped_newton(value, grad, hess, DVector::zeros(p), REFERENCE_TOL, 200)
        .map(|(x, _)| x)
        .map_err(|e| match e {
            Error::NoUniqueMinimizer => Error::NotStronglyConvex(0.0),
            other => other,
        })
}

/// Solves the consensus problem centrally and recovers `α⋆`.
pub fn reference_solution(
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    eta: f64,
) -> Result<ReferenceSolution> {
    check_graph(components, graph)?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid("eta", format!("must be positive, got {eta}")));
    }
    let (n, p) = (graph.n(), graph.p());
    let x_bar = minimize_sum(components, p)?;
    let x_star = DVector::from_fn(n * p, |r, _| x_bar[r % p]);
    let grad = grad_f(components, &x_star)?;
    let tol = Tolerances::default();
    let solver = MinNormSolver::new(
        incidence_operators(graph).oriented.lifted(),
        tol.jacobi,
        tol.consistency,
    )?;
    let alpha_star = solver.solve(&(-grad))?;
    let nu_star = &alpha_star / eta.sqrt();
    let objective_value = components.iter().map(|c| c.value(&x_bar)).sum();
    Ok(ReferenceSolution {
        x_bar,
        x_star,
        alpha_star,
        nu_star,
        objective_value,
    })
}

/// Recovers `α ∈ range(E_o)` from `φ = E_oᵀα` as `α = E_o (L_G⁺ ⊗ I_p) φ`,
/// using a pseudo-inverse formed once at graph level.
#[derive(Debug, Clone)]
pub struct DualRecovery {
    oriented: BlockOperator,
    lap_pinv: DMatrix<f64>,
    consistency: f64,
}

impl DualRecovery {
    pub fn new(graph: &NetworkGraph, tol: &Tolerances) -> Result<Self> {
        let lap = graph.laplacian();
        let eig = sym_eigen(&lap, tol.jacobi)?;
        let threshold = tol.zero_eig * eig.max();
        let n = graph.n();
        let mut pinv = DMatrix::zeros(n, n);
        for (k, &l) in eig.values.iter().enumerate() {
            if l > threshold {
                let col = eig.vectors.column(k);
                pinv += (col * col.transpose()) / l;
            }
        }
        Ok(Self {
            oriented: incidence_operators(graph).oriented,
            lap_pinv: pinv,
            consistency: tol.consistency,
        })
    }

    pub fn alpha_from_phi(&self, phi: &DVector<f64>) -> Result<DVector<f64>> {
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let y = crate::netgraph::apply_blocks(&self.lap_pinv, self.oriented.block_dim(), phi)?;
        let alpha = self.oriented.apply(&y)?;
        let residual = (self.oriented.apply_transpose(&alpha)? - phi).norm();
        if residual > (self.consistency * phi.norm()).max(1e-12) {
            return Err(Error::Inconsistent(residual));
        }
        Ok(alpha)
    }
}
