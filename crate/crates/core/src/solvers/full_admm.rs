use nalgebra::DVector;

use super::{block, check_len, stack, AdmmParams};
use crate::error::Result;
use crate::netgraph::{arc_matrices, NetworkGraph};
use crate::objective::{check_graph, local_subproblem, ObjectiveComponent};

/// Three-block ADMM iterate with `λ = [α; β]` and edge variables `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullAdmmState {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub k: usize,
}

impl FullAdmmState {
    /// Multiplier on `A_s x − z`.
    pub fn alpha(&self) -> DVector<f64> {
        let half = self.lambda.len() / 2;
        self.lambda.rows(0, half).into_owned()
    }

    /// Multiplier on `A_d x − z`.
    pub fn beta(&self) -> DVector<f64> {
        let half = self.lambda.len() / 2;
        self.lambda.rows(half, half).into_owned()
    }
}

/// `λ⁰ = [α⁰; −α⁰]`, `z⁰ = ½E_u x⁰`; `alpha0 = None` means `α⁰ = 0`.
pub fn full_admm_init(
    graph: &NetworkGraph,
    x0: DVector<f64>,
    alpha0: Option<&DVector<f64>>,
) -> Result<FullAdmmState> {
    let p = graph.p();
    let mp = graph.m() * p;
    check_len(&x0, graph.n() * p)?;
    let alpha = match alpha0 {
        Some(a) => {
            check_len(a, mp)?;
            a.clone()
        }
        None => DVector::zeros(mp),
    };
    let (a_s, a_d) = arc_matrices(graph);
    let z = (a_s.apply(&x0)? + a_d.apply(&x0)?) * 0.5;
    let mut lambda = DVector::zeros(2 * mp);
    lambda.rows_mut(0, mp).copy_from(&alpha);
    lambda.rows_mut(mp, mp).copy_from(&(-alpha));
    Ok(FullAdmmState {
        x: x0,
        z,
        lambda,
        k: 0,
    })
}

/// One round of generalized ADMM on `min f(x)` s.t. `A_s x = z`, `A_d x = z`,
/// with proximal term `½‖x − x^k‖²_P` on the x-block and none on z.
pub fn full_admm_step(
    state: &FullAdmmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<FullAdmmState> {
    check_graph(components, graph)?;
    params.check(graph)?;
    let p = graph.p();
    let mp = graph.m() * p;
    check_len(&state.x, graph.n() * p)?;
    check_len(&state.z, mp)?;
    check_len(&state.lambda, 2 * mp)?;
    let (rho, eta) = (params.rho(), params.eta());
    let (a_s, a_d) = arc_matrices(graph);
    let alpha = state.alpha();
    let beta = state.beta();
    let d = graph.degree_diag();

    // x-step: f_i(x_i) + ((Aᵀλ)_i − ρ(E_uᵀz)_i)ᵀx_i + (ρd_i/2)‖x_i‖² + (π_i/2)‖x_i − x_i^k‖²
    let lin = a_s.apply_transpose(&alpha)? + a_d.apply_transpose(&beta)?
        - (a_s.apply_transpose(&state.z)? + a_d.apply_transpose(&state.z)?) * rho;
    let x_new = (0..graph.n())
        .map(|i| {
            let c = DVector::from_column_slice(block(&lin, i, p));
            let prev = DVector::from_column_slice(block(&state.x, i, p));
            local_subproblem(
                &components[i],
                &c,
                rho * d[i],
                params.pi()[i],
                &prev,
                params.tol(),
            )
            .map(|s| s.x)
        })
        .collect::<Result<Vec<_>>>()?;
    let x = stack(x_new, p);

    let sx = a_s.apply(&x)?;
    let dx = a_d.apply(&x)?;
    let z = (&sx + &dx) * 0.5 + (&alpha + &beta) / (2.0 * rho);
    let alpha = alpha + (&sx - &z) * (eta * rho);
    let beta = beta + (&dx - &z) * (eta * rho);
    let mut lambda = DVector::zeros(2 * mp);
    lambda.rows_mut(0, mp).copy_from(&alpha);
    lambda.rows_mut(mp, mp).copy_from(&beta);
    Ok(FullAdmmState {
        x,
        z,
        lambda,
        k: state.k + 1,
    })
}
