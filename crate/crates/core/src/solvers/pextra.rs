use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{block, check_len, closed_neighborhood, kernel, stack, AdmmState};
use crate::denselin::SymMatrix;
use crate::error::{invalid, Error, Result};
use crate::netgraph::NetworkGraph;
use crate::objective::{check_graph, local_subproblem, LocalSolution, ObjectiveComponent};
use crate::tolerances::Tolerances;

/// `W = I − (ξρ/2)L_G` and `W̃ = I − (ξρ/2)(1−η)L_G`.
pub fn pextra_mixing(
    graph: &NetworkGraph,
    xi: f64,
    rho: f64,
    eta: f64,
) -> Result<(SymMatrix, SymMatrix)> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid("xi", format!("must be positive, got {xi}")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    if !eta.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = graph.n();
    let lap = graph.laplacian().into_matrix();
    let eye = DMatrix::<f64>::identity(n, n);
    let w = &eye - &lap * (xi * rho / 2.0);
    let wt = &eye - &lap * (xi * rho / 2.0 * (1.0 - eta));
    Ok((SymMatrix::symmetrize(w), SymMatrix::symmetrize(wt)))
}

/// Overshooting pair `W̃ = I − (1−ω)(ξρ/2)L_G`, the mixing that corresponds
/// to relaxation `η = ω` in D-ADMM. `ω = ½` gives `W̃ = (I+W)/2`; larger
/// values break `(I+W)/2 ⪰ W̃`.
pub fn pextra_overshoot_mixing(
    graph: &NetworkGraph,
    xi: f64,
    rho: f64,
    omega: f64,
) -> Result<(SymMatrix, SymMatrix)> {
    if !(0.5..1.0).contains(&omega) {
        return Err(Error::OmegaOutOfRange(omega));
    }
    pextra_mixing(graph, xi, rho, omega)
}

/// Step size `ξ` and a mixing pair respecting the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PextraParams {
    xi: f64,
    w: SymMatrix,
    w_tilde: SymMatrix,
    diff: DMatrix<f64>,
    tol: f64,
}

impl PextraParams {
    pub fn new(graph: &NetworkGraph, xi: f64, rho: f64, eta: f64) -> Result<Self> {
        let (w, wt) = pextra_mixing(graph, xi, rho, eta)?;
        Self::from_mixing(graph, xi, w, wt)
    }

    pub fn overshoot(graph: &NetworkGraph, xi: f64, rho: f64, omega: f64) -> Result<Self> {
        let (w, wt) = pextra_overshoot_mixing(graph, xi, rho, omega)?;
        Self::from_mixing(graph, xi, w, wt)
    }

    /// Arbitrary symmetric mixing pair; entries between non-adjacent agents must vanish.
    pub fn from_mixing(
        graph: &NetworkGraph,
        xi: f64,
        w: SymMatrix,
        w_tilde: SymMatrix,
    ) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(invalid("xi", format!("must be positive, got {xi}")));
        }
        let n = graph.n();
        for m in [&w, &w_tilde] {
            if m.order() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.order(),
                });
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && !graph.is_adjacent(i, j) && m.as_matrix()[(i, j)] != 0.0 {
                        return Err(Error::ConditionViolation(format!(
                            "mixing entry ({i}, {j}) couples non-adjacent agents"
                        )));
                    }
                }
            }
        }
        let diff = w.as_matrix() - w_tilde.as_matrix();
        Ok(Self {
            xi,
            w,
            w_tilde,
            diff,
            tol: Tolerances::default().subproblem,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn w(&self) -> &SymMatrix {
        &self.w
    }

    pub fn w_tilde(&self) -> &SymMatrix {
        &self.w_tilde
    }

    /// `W − W̃`.
    pub fn difference(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

/// P-EXTRA iterate with the running sum `s^k = Σ_{t≤k} (W−W̃) x^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PextraState {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub k: usize,
}

impl PextraState {
    /// State matching a D-ADMM iterate run with the equivalent proximal
    /// weights: `s = −ξφ`.
    pub fn from_admm(state: &AdmmState, xi: f64) -> Self {
        Self {
            x: state.x.clone(),
            s: &state.phi * -xi,
            k: state.k,
        }
    }

    /// The D-ADMM dual this state corresponds to, `φ = −s/ξ`.
    pub fn equivalent_dual(&self, xi: f64) -> DVector<f64> {
        &self.s / -xi
    }
}

/// Starts the recursion with `s⁰ = (W−W̃)x⁰`.
pub fn pextra_init(
    graph: &NetworkGraph,
    params: &PextraParams,
    x0: DVector<f64>,
) -> Result<PextraState> {
    check_len(&x0, graph.n() * graph.p())?;
    let s = crate::netgraph::apply_blocks(params.difference(), graph.p(), &x0)?;
    Ok(PextraState { x: x0, s, k: 0 })
}

/// Agent `i`'s proximal step `argmin ξf_i(x) + ½‖x − v_i‖²` with
/// `v_i = Σ_j W_ij x_j + s_i` over the closed neighborhood.
pub(crate) fn pextra_local_solve<'a>(
    component: &ObjectiveComponent,
    s_i: &[f64],
    x_i: &[f64],
    w_terms: impl IntoIterator<Item = (f64, &'a [f64])>,
    xi: f64,
    tol: f64,
) -> Result<LocalSolution> {
    let v = kernel::weighted_update(s_i, 1.0, w_terms);
    let c = v / -xi;
    let prev = DVector::from_column_slice(x_i);
    local_subproblem(component, &c, 1.0 / xi, 0.0, &prev, tol)
}

pub fn pextra_step(
    state: &PextraState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &PextraParams,
) -> Result<PextraState> {
    check_graph(components, graph)?;
    let p = graph.p();
    check_len(&state.x, graph.n() * p)?;
    check_len(&state.s, graph.n() * p)?;
    if params.w.order() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: params.w.order(),
        });
    }
    let w = params.w.as_matrix();
    let x_new = (0..graph.n())
        .into_par_iter()
        .map(|i| {
            let hood = closed_neighborhood(graph, i);
            let terms = hood.iter().map(|&j| (w[(i, j)], block(&state.x, j, p)));
            pextra_local_solve(
                &components[i],
                block(&state.s, i, p),
                block(&state.x, i, p),
                terms,
                params.xi,
                params.tol,
            )
            .map(|s| s.x)
        })
        .collect::<Result<Vec<_>>>()?;
    let x = stack(x_new, p);
    let s_new = (0..graph.n())
        .map(|i| {
            let hood = closed_neighborhood(graph, i);
            let terms = hood.iter().map(|&j| (params.diff[(i, j)], block(&x, j, p)));
            kernel::weighted_update(block(&state.s, i, p), 1.0, terms)
        })
        .collect();
    Ok(PextraState {
        x,
        s: stack(s_new, p),
        k: state.k + 1,
    })
}
