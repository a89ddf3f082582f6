use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{block, check_len, closed_neighborhood, kernel, stack, AdmmParams, AdmmState};
use crate::analysis::check_uv_conditions;
use crate::error::{Error, Result};
use crate::netgraph::NetworkGraph;
use crate::objective::{check_graph, local_subproblem, LocalSolution, ObjectiveComponent};

/// Graph-level matrices `U`, `V` and the diagonal of `D̄` for the general
/// D-ADMM form. Construction enforces the null-space, complementarity and
/// sparsity conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralUv {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    dbar: DVector<f64>,
}

impl GeneralUv {
    pub fn new(
        graph: &NetworkGraph,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        dbar: DVector<f64>,
    ) -> Result<Self> {
        let report = check_uv_conditions(&u, &v, &dbar, graph);
        if !report.passed() {
            return Err(Error::ConditionViolation(report.failures().join("; ")));
        }
        Ok(Self { u, v, dbar })
    }

    /// `V = L_G`, `U = E_uᵀE_u`, `D̄ = D_G`: the usual incidence-based choice.
    pub fn classical(graph: &NetworkGraph) -> Result<Self> {
        Self::new(
            graph,
            graph.unoriented_gram().into_matrix(),
            graph.laplacian().into_matrix(),
            graph.degree_diag(),
        )
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn dbar(&self) -> &DVector<f64> {
        &self.dbar
    }
}

/// Agent `i`'s x-update with `c_i = φ_i − (ρ/2) Σ_j U_ij x_j` over the closed neighborhood.
#[allow(clippy::too_many_arguments)]
pub(crate) fn general_local_solve<'a>(
    component: &ObjectiveComponent,
    phi_i: &[f64],
    x_i: &[f64],
    u_terms: impl IntoIterator<Item = (f64, &'a [f64])>,
    rho: f64,
    dbar_i: f64,
    pi_i: f64,
    tol: f64,
) -> Result<LocalSolution> {
    let c = kernel::weighted_update(phi_i, -rho / 2.0, u_terms);
    let prev = DVector::from_column_slice(x_i);
    local_subproblem(component, &c, rho * dbar_i, pi_i, &prev, tol)
}

/// `x⁺ = argmin f(x) + (φ − (ρ/2)(U⊗I)x^k)ᵀx + (ρ/2)‖x‖²_{D̄⊗I} + ½‖x − x^k‖²_P`,
/// `φ⁺ = φ + (ηρ/2)(V⊗I)x⁺`, evaluated agent by agent.
pub fn general_dadmm_step(
    state: &AdmmState,
    graph: &NetworkGraph,
    uv: &GeneralUv,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<AdmmState> {
    check_graph(components, graph)?;
    params.check(graph)?;
    let p = graph.p();
    check_len(&state.x, graph.n() * p)?;
    check_len(&state.phi, graph.n() * p)?;
    check_len(&uv.dbar, graph.n())?;
    let (rho, eta) = (params.rho(), params.eta());

    let x_new = (0..graph.n())
        .into_par_iter()
        .map(|i| {
            let hood = closed_neighborhood(graph, i);
            let terms = hood.iter().map(|&j| (uv.u[(i, j)], block(&state.x, j, p)));
            general_local_solve(
                &components[i],
                block(&state.phi, i, p),
                block(&state.x, i, p),
                terms,
                rho,
                uv.dbar[i],
                params.pi()[i],
                params.tol(),
            )
            .map(|s| s.x)
        })
        .collect::<Result<Vec<_>>>()?;
    let x = stack(x_new, p);
    let phi_new = (0..graph.n())
        .map(|i| {
            let hood = closed_neighborhood(graph, i);
            let terms = hood.iter().map(|&j| (uv.v[(i, j)], block(&x, j, p)));
            kernel::weighted_update(block(&state.phi, i, p), eta * rho / 2.0, terms)
        })
        .collect();
    Ok(AdmmState {
        x,
        phi: stack(phi_new, p),
        k: state.k + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_graph, topology};
    use crate::solvers::{dadmm_init, dadmm_matrix_step, DualInit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn classical_assignment_matches_matrix_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, p) = (6, 3);
        let g = build_graph(n, &topology::random_connected(n, 0.4, &mut rng), p).unwrap();
        let comps: Vec<_> = (0..n)
            .map(|_| {
                let h = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
                ObjectiveComponent::rank_one(h, StandardNormal.sample(&mut rng)).unwrap()
            })
            .collect();
        let params = AdmmParams::new(
            1.5,
            0.7,
            (0..n).map(|_| rng.random_range(0.0..0.4)).collect(),
        )
        .unwrap();
        let uv = GeneralUv::classical(&g).unwrap();
        let mut a = dadmm_init(
            &g,
            DVector::zeros(n * p),
            DualInit::RandomInColspace { seed: 2 },
        )
        .unwrap();
        let mut b = a.clone();
        for _ in 0..100 {
            a = general_dadmm_step(&a, &g, &uv, &comps, &params).unwrap();
            b = dadmm_matrix_step(&b, &g, &comps, &params).unwrap();
            assert!((&a.x - &b.x).amax() <= 1e-10);
        }
    }

    #[test]
    fn rejects_violating_assignments() {
        let g = build_graph(3, &[(0, 1), (1, 2)], 1).unwrap();
        let zero = DMatrix::zeros(3, 3);
        let r = GeneralUv::new(
            &g,
            g.unoriented_gram().into_matrix() * 2.0,
            zero,
            g.degree_diag(),
        );
        assert!(matches!(r, Err(Error::ConditionViolation(_))));
    }
}
