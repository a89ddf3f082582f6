use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{block, check_len, kernel, stack, AdmmParams};
use crate::denselin::{kron_identity, min_norm_solve};
use crate::error::Result;
use crate::netgraph::{incidence_operators, NetworkGraph};
use crate::objective::{
    check_graph, local_subproblem, minimize_stacked, LocalSolution, ObjectiveComponent,
};

/// D-ADMM iterate: stacked primal `x` and dual `φ = E_oᵀα`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: DVector<f64>,
    pub phi: DVector<f64>,
    pub k: usize,
}

/// Initial multiplier `α⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualInit {
    #[default]
    Zero,
    /// Standard normal vector projected onto `range(E_o)`.
    RandomInColspace { seed: u64 },
}

/// A reproducible random multiplier in `range(E_o)`, of length `m·p`.
pub fn random_dual(graph: &NetworkGraph, seed: u64) -> Result<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mp = graph.m() * graph.p();
    let raw = DVector::from_fn(mp, |_, _| StandardNormal.sample(&mut rng));
    let eo: DMatrix<f64> = kron_identity(incidence_operators(graph).oriented.base(), graph.p());
    // the min-norm solution of E_oᵀa = E_oᵀraw is the projection of raw onto range(E_o)
    min_norm_solve(&eo, &(eo.transpose() * raw))
}

pub fn dadmm_init(graph: &NetworkGraph, x0: DVector<f64>, init: DualInit) -> Result<AdmmState> {
    match init {
        DualInit::Zero => {
            check_len(&x0, graph.n() * graph.p())?;
            let len = x0.len();
            Ok(AdmmState {
                x: x0,
                phi: DVector::zeros(len),
                k: 0,
            })
        }
        DualInit::RandomInColspace { seed } => {
            let alpha = random_dual(graph, seed)?;
            dadmm_init_with_alpha(graph, x0, &alpha)
        }
    }
}

/// Initial state with `φ⁰ = E_oᵀα⁰`.
pub fn dadmm_init_with_alpha(
    graph: &NetworkGraph,
    x0: DVector<f64>,
    alpha0: &DVector<f64>,
) -> Result<AdmmState> {
    check_len(&x0, graph.n() * graph.p())?;
    let phi = incidence_operators(graph)
        .oriented
        .apply_transpose(alpha0)?;
    Ok(AdmmState { x: x0, phi, k: 0 })
}

/// Everything agent `i` owns for its x-update.
pub(crate) struct AgentLocal<'a> {
    pub component: &'a ObjectiveComponent,
    pub x_i: &'a [f64],
    pub phi_i: &'a [f64],
    pub d_i: f64,
    pub pi_i: f64,
}

impl AgentLocal<'_> {
    pub fn solve<'b>(
        &self,
        neighbors: impl IntoIterator<Item = &'b [f64]>,
        rho: f64,
        tol: f64,
    ) -> Result<LocalSolution> {
        let c = kernel::dadmm_linear_term(self.phi_i, self.x_i, neighbors, rho);
        let prev = DVector::from_column_slice(self.x_i);
        local_subproblem(self.component, &c, rho * self.d_i, self.pi_i, &prev, tol)
    }
}

fn check_state(
    state: &AdmmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<()> {
    check_graph(components, graph)?;
    params.check(graph)?;
    check_len(&state.x, graph.n() * graph.p())?;
    check_len(&state.phi, graph.n() * graph.p())
}

/// One decoupled D-ADMM round: every agent solves its local subproblem
/// with `c_i = φ_i − ρ Σ_j (x_i + x_j)` and `a = ρ d_i`, then updates
/// `φ_i += ηρ Σ_j (x_i − x_j)` with the new iterates.
pub fn dadmm_step(
    state: &AdmmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<AdmmState> {
    check_state(state, graph, components, params)?;
    let p = graph.p();
    let (rho, eta) = (params.rho(), params.eta());
    let d = graph.degree_diag();

    let x_new: Vec<DVector<f64>> = (0..graph.n())
        .into_par_iter()
        .map(|i| {
            let nbrs = graph.neighbors(i).iter().map(|&j| block(&state.x, j, p));
            let local = AgentLocal {
                component: &components[i],
                x_i: block(&state.x, i, p),
                phi_i: block(&state.phi, i, p),
                d_i: d[i],
                pi_i: params.pi()[i],
            };
            local.solve(nbrs, rho, params.tol()).map(|s| s.x)
        })
        .collect::<Result<_>>()?;
    let x = stack(x_new, p);

    let phi_new: Vec<DVector<f64>> = (0..graph.n())
        .map(|i| {
            let nbrs = graph.neighbors(i).iter().map(|&j| block(&x, j, p));
            kernel::dadmm_dual_update(block(&state.phi, i, p), block(&x, i, p), nbrs, eta, rho)
        })
        .collect();
    Ok(AdmmState {
        x,
        phi: stack(phi_new, p),
        k: state.k + 1,
    })
}

/// The same round computed centrally from the block operators:
/// `x⁺ = argmin f(x) + (φ − (ρ/2)(E_uᵀE_u ⊗ I)x^k)ᵀx + (ρ/2)‖x‖²_D + ½‖x − x^k‖²_P`,
/// `φ⁺ = φ + (ηρ/2)(E_oᵀE_o) x⁺`.
pub fn dadmm_matrix_step(
    state: &AdmmState,
    graph: &NetworkGraph,
    components: &[ObjectiveComponent],
    params: &AdmmParams,
) -> Result<AdmmState> {
    check_state(state, graph, components, params)?;
    let ops = incidence_operators(graph);
    let p = graph.p();
    let (rho, eta) = (params.rho(), params.eta());
    let eu = ops.unoriented.lifted();
    let eo = ops.oriented.lifted();
    let pen = DVector::from_fn(graph.n() * p, |r, _| params.pi()[r / p]);

    let c = &state.phi
        - (eu.transpose() * (&eu * &state.x)) * (rho / 2.0)
        - pen.component_mul(&state.x);
    let k = ops.degree.lifted() * rho + DMatrix::from_diagonal(&pen);
    let x = minimize_stacked(components, &c, &k, &state.x, params.tol())?;
    let phi = &state.phi + eo.transpose() * (&eo * &x) * (eta * rho / 2.0);
    Ok(AdmmState {
        x,
        phi,
        k: state.k + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denselin::SymMatrix;
    use crate::netgraph::{build_graph, topology};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn block_sum(phi: &DVector<f64>, n: usize, p: usize) -> DVector<f64> {
        (0..n).fold(DVector::zeros(p), |acc, i| acc + phi.rows(i * p, p))
    }

    fn random_instance(seed: u64) -> (NetworkGraph, Vec<ObjectiveComponent>, AdmmParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..8);
        let p = rng.random_range(1..4);
        let g = build_graph(n, &topology::random_connected(n, 0.3, &mut rng), p).unwrap();
        let comps = (0..n)
            .map(|_| {
                let h = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
                ObjectiveComponent::rank_one(h, StandardNormal.sample(&mut rng)).unwrap()
            })
            .collect();
        let rho = rng.random_range(0.3..3.0);
        let eta = rng.random_range(0.1..1.5);
        let pi = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        (g, comps, AdmmParams::new(rho, eta, pi).unwrap())
    }

    #[test]
    fn zero_init_has_zero_dual() {
        let g = build_graph(3, &[(0, 1), (1, 2)], 2).unwrap();
        let s = dadmm_init(&g, DVector::zeros(6), DualInit::Zero).unwrap();
        assert_eq!(s.phi, DVector::zeros(6));
    }

    #[test]
    fn random_dual_is_reproducible_and_balanced() {
        let g = build_graph(4, &topology::ring(4), 2).unwrap();
        let a = dadmm_init(
            &g,
            DVector::zeros(8),
            DualInit::RandomInColspace { seed: 42 },
        )
        .unwrap();
        let b = dadmm_init(
            &g,
            DVector::zeros(8),
            DualInit::RandomInColspace { seed: 42 },
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.phi.norm() > 0.1);
        assert!(block_sum(&a.phi, 4, 2).norm() < 1e-12);
    }

    #[test]
    fn single_edge_first_step_by_hand() {
        // f1 = ½x², f2 = ½(x−2)², ρ=1, η=½, π=0, x⁰=φ⁰=0, d = (2, 2)
        // agent 1: x + 2x = 0 → 0; agent 2: (x−2) + 2x = 0 → 2/3
        let g = build_graph(2, &[(0, 1)], 1).unwrap();
        let comps = vec![
            ObjectiveComponent::quadratic(SymMatrix::identity(1), v(&[0.0])).unwrap(),
            ObjectiveComponent::quadratic(SymMatrix::identity(1), v(&[2.0])).unwrap(),
        ];
        let params = AdmmParams::uniform(2, 1.0, 0.5, 0.0).unwrap();
        let s0 = dadmm_init(&g, DVector::zeros(2), DualInit::Zero).unwrap();
        let s1 = dadmm_step(&s0, &g, &comps, &params).unwrap();
        assert_relative_eq!(s1.x, v(&[0.0, 2.0 / 3.0]), epsilon = 1e-15);
        // φ₁ = ½(0 − 2/3), φ₂ = ½(2/3 − 0)
        assert_relative_eq!(s1.phi, v(&[-1.0 / 3.0, 1.0 / 3.0]), epsilon = 1e-15);
        let m1 = dadmm_matrix_step(&s0, &g, &comps, &params).unwrap();
        assert_relative_eq!(m1.x, s1.x, epsilon = 1e-14);
        assert_relative_eq!(m1.phi, s1.phi, epsilon = 1e-14);
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let g = build_graph(2, &[(0, 1)], 1).unwrap();
        let comps = vec![
            ObjectiveComponent::quadratic(SymMatrix::identity(1), v(&[0.0])).unwrap(),
            ObjectiveComponent::quadratic(SymMatrix::identity(1), v(&[2.0])).unwrap(),
        ];
        let params = AdmmParams::uniform(2, 1.3, 0.7, 0.2).unwrap();
        // x⋆ = 1, φ⋆ = −∇f(x⋆) = (−1, 1)
        let s = AdmmState {
            x: v(&[1.0, 1.0]),
            phi: v(&[-1.0, 1.0]),
            k: 0,
        };
        let s1 = dadmm_step(&s, &g, &comps, &params).unwrap();
        assert_relative_eq!(s1.x, s.x, epsilon = 1e-12);
        assert_relative_eq!(s1.phi, s.phi, epsilon = 1e-12);
    }

    #[test]
    fn matrix_form_agrees_with_decoupled_form() {
        for seed in 0..50 {
            let (g, comps, params) = random_instance(seed);
            let np = g.n() * g.p();
            let mut a =
                dadmm_init(&g, DVector::zeros(np), DualInit::RandomInColspace { seed }).unwrap();
            let mut b = a.clone();
            for _ in 0..100 {
                a = dadmm_step(&a, &g, &comps, &params).unwrap();
                b = dadmm_matrix_step(&b, &g, &comps, &params).unwrap();
                assert!((&a.x - &b.x).amax() <= 1e-10, "seed {seed} k {}", a.k);
                assert!(block_sum(&a.phi, g.n(), g.p()).amax() <= 1e-9);
            }
        }
    }

    #[test]
    fn agent_order_does_not_matter() {
        // relabel vertices in reverse; the iterates permute accordingly
        let (g, comps, params) = random_instance(3);
        let n = g.n();
        let p = g.p();
        let rev: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .map(|&(a, b)| (n - 1 - a, n - 1 - b))
            .collect();
        let gr = build_graph(n, &rev, p).unwrap();
        let comps_r: Vec<_> = comps.iter().rev().cloned().collect();
        let params_r = AdmmParams::new(
            params.rho(),
            params.eta(),
            params.pi().iter().rev().copied().collect(),
        )
        .unwrap();
        let mut a = dadmm_init(&g, DVector::zeros(n * p), DualInit::Zero).unwrap();
        let mut b = dadmm_init(&gr, DVector::zeros(n * p), DualInit::Zero).unwrap();
        for _ in 0..30 {
            a = dadmm_step(&a, &g, &comps, &params).unwrap();
            b = dadmm_step(&b, &gr, &comps_r, &params_r).unwrap();
        }
        for i in 0..n {
            let ai = a.x.rows(i * p, p);
            let bi = b.x.rows((n - 1 - i) * p, p);
            assert!((ai - bi).amax() < 1e-12);
        }
    }
}
