use nalgebra::{DMatrix, DVector};

use super::{block, check_len, stack, AdmmParams};
use crate::denselin::{sym_eigen, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::netgraph::{incidence_operators, NetworkGraph};
use crate::objective::{check_graph, local_subproblem, minimize_stacked, ObjectiveComponent};

/// Method-of-multipliers iterate: primal `x` and scaled multiplier `ν` (`m·p`).
#[derive(Debug, Clone, PartialEq)]
pub struct MmState {
    pub x: DVector<f64>,
    pub nu: DVector<f64>,
    pub k: usize,
}

pub fn mm_init(
    graph: &NetworkGraph,
    x0: DVector<f64>,
    nu0: Option<&DVector<f64>>,
) -> Result<MmState> {
    check_len(&x0, graph.n() * graph.p())?;
    let mp = graph.m() * graph.p();
    let nu = match nu0 {
        Some(v) => {
            check_len(v, mp)?;
            v.clone()
        }
        None => DVector::zeros(mp),
    };
    Ok(MmState { x: x0, nu, k: 0 })
}

fn check_state(
    state: &MmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<()> {
    check_graph(components, graph)?;
    params.check(graph)?;
    check_len(&state.x, graph.n() * graph.p())?;
    check_len(&state.nu, graph.m() * graph.p())
}

/// Exact step: `x⁺ = argmin f(x) + (√η ν)ᵀE_o x + (ρ/4)‖E_o x‖²` solved
/// centrally, then `ν⁺ = ν + √η (ρ/2) E_o x⁺`. Not distributable.
pub fn mm_exact_step(
    state: &MmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<MmState> {
    check_state(state, graph, components, params)?;
    let eta = params.eta();
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::EtaOutOfRange(eta));
    }
    let rho = params.rho();
    let ops = incidence_operators(graph);
    let sq = eta.sqrt();
    let c = ops.oriented.apply_transpose(&state.nu)? * sq;
    let k = ops.laplacian.lifted() * (rho / 2.0);
    let x = minimize_stacked(components, &c, &k, &state.x, params.tol())?;
    let nu = &state.nu + ops.oriented.apply(&x)? * (sq * rho / 2.0);
    Ok(MmState {
        x,
        nu,
        k: state.k + 1,
    })
}

/// Linearized method of multipliers with majorizer `Γ = 2D + 2εP`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmApprox {
    eps: f64,
    /// Graph-level diagonal of `Γ`.
    gamma: DVector<f64>,
}

impl MmApprox {
    /// Checks `Γ ⪰ E_oᵀE_o` through the smallest eigenvalue of the gap.
    pub fn new(graph: &NetworkGraph, params: &AdmmParams, eps: f64) -> Result<Self> {
        params.check(graph)?;
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(invalid(
                "epsilon",
                format!("must be finite and nonnegative, got {eps}"),
            ));
        }
        let d = graph.degree_diag();
        let gamma = DVector::from_fn(graph.n(), |i, _| 2.0 * d[i] + 2.0 * eps * params.pi()[i]);
        let gap =
            SymMatrix::symmetrize(DMatrix::from_diagonal(&gamma) - graph.laplacian().as_matrix());
        let low = sym_eigen(&gap, 1e-12)?.min();
        if low < -1e-9 {
            return Err(Error::GammaTooSmall(low));
        }
        Ok(Self { eps, gamma })
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    /// Graph-level diagonal of `Γ`.
    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    /// Per agent: `x_i⁺ = argmin f_i + c_iᵀx + (ρΓ_ii/4)‖x‖²` with
    /// `c = √η E_oᵀν + (ρ/2)(E_oᵀE_o)x^k − (ρ/2)(Γ ⊗ I)x^k`; then the exact-MM dual step.
    pub fn step(
        &self,
        state: &MmState,
        graph: &NetworkGraph,
        components: &[ObjectiveComponent],
        params: &AdmmParams,
    ) -> Result<MmState> {
        check_state(state, graph, components, params)?;
        if self.gamma.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: self.gamma.len(),
            });
        }
        let (rho, eta) = (params.rho(), params.eta());
        let p = graph.p();
        let ops = incidence_operators(graph);
        let sq = eta.sqrt();
        let psi = ops.oriented.apply_transpose(&state.nu)? * sq;
        let lx = ops.laplacian.apply(&state.x)?;
        let x_new = (0..graph.n())
            .map(|i| {
                let half_gamma = 0.5 * self.gamma[i];
                let x_i = block(&state.x, i, p);
                let c = DVector::from_fn(p, |r, _| {
                    psi[i * p + r] + 0.5 * rho * lx[i * p + r] - rho * half_gamma * x_i[r]
                });
                let prev = DVector::from_column_slice(x_i);
                local_subproblem(
                    &components[i],
                    &c,
                    rho * half_gamma,
                    0.0,
                    &prev,
                    params.tol(),
                )
                .map(|s| s.x)
            })
            .collect::<Result<Vec<_>>>()?;
        let x = stack(x_new, p);
        let nu = &state.nu + ops.oriented.apply(&x)? * (sq * rho / 2.0);
        Ok(MmState {
            x,
            nu,
            k: state.k + 1,
        })
    }
}

/// Convenience wrapper that validates `Γ` and takes one approximated step.
pub fn mm_approx_step(
    state: &MmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
    eps: f64,
) -> Result<MmState> {
    MmApprox::new(graph, params, eps)?.step(state, graph, components, params)
}
