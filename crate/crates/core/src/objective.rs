//! Per-agent objective components `f_i`, their sums, the penalized
//! function `g`, and the local proximal subproblems solved by each agent.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::denselin::{solve_spd, sym_eigen, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::netgraph::{consensuality_residual, NetworkGraph};

/// Newton iteration cap for callback subproblems.
pub const NEWTON_MAX_ITER: usize = 200;
/// Armijo sufficient-decrease constant used by the damped Newton method.
pub const ARMIJO: f64 = 1e-4;

/// A user-supplied smooth convex function with gradient and Hessian.
pub trait SmoothConvex: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone)]
enum Kind {
    /// `½ xᵀQx − bᵀx`
    Quadratic {
        q: SymMatrix,
        b: DVector<f64>,
    },
    /// `½ (hᵀx − y)²`
    RankOne {
        h: DVector<f64>,
        y: f64,
    },
    Callback(Arc<dyn SmoothConvex>),
}

/// One agent's convex component `f_i : ℝ^p → ℝ` with its gradient Lipschitz modulus.
#[derive(Debug, Clone)]
pub struct ObjectiveComponent {
    kind: Kind,
    lipschitz: f64,
}

impl ObjectiveComponent {
    /// `f(x) = ½ xᵀQx − bᵀx` for PSD `Q`.
    pub fn quadratic(q: SymMatrix, b: DVector<f64>) -> Result<Self> {
        if b.len() != q.order() {
            return Err(Error::DimensionMismatch {
                expected: q.order(),
                got: b.len(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let eig = sym_eigen(&q, 1e-12)?;
        let scale = eig.max().abs().max(1.0);
        if eig.min() < -1e-10 * scale {
            return Err(Error::IndefiniteInput(eig.min()));
        }
        let lipschitz = eig.max().max(0.0);
        Ok(Self {
            kind: Kind::Quadratic { q, b },
            lipschitz,
        })
    }

    /// `f(x) = ½ (hᵀx − y)²`, the distributed least-squares term.
    pub fn rank_one(h: DVector<f64>, y: f64) -> Result<Self> {
        if h.is_empty() {
            return Err(invalid("h", "must be nonempty"));
        }
        if !y.is_finite() || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let lipschitz = h.norm_squared();
        Ok(Self {
            kind: Kind::RankOne { h, y },
            lipschitz,
        })
    }

    /// Wraps a callback; its gradient Lipschitz modulus must be supplied.
    pub fn callback(f: Arc<dyn SmoothConvex>, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(invalid("lipschitz", "must be finite and nonnegative"));
        }
        Ok(Self {
            kind: Kind::Callback(f),
            lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Quadratic { b, .. } => b.len(),
            Kind::RankOne { h, .. } => h.len(),
            Kind::Callback(f) => f.dim(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `(Q, b)` such that `f(x) = ½ xᵀQx − bᵀx + const`, for closed-form kinds.
    pub fn quadratic_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match &self.kind {
            Kind::Quadratic { q, b } => Some((q.as_matrix().clone(), b.clone())),
            Kind::RankOne { h, y } => Some((h * h.transpose(), h * *y)),
            Kind::Callback(_) => None,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        !matches!(self.kind, Kind::Callback(_))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            Kind::Quadratic { q, b } => 0.5 * q.quad_form(x) - b.dot(x),
            Kind::RankOne { h, y } => {
                let r = h.dot(x) - y;
                0.5 * r * r
            }
            Kind::Callback(f) => f.value(x),
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        Ok(self.grad_unchecked(x))
    }

    fn grad_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            Kind::Quadratic { q, b } => q.mul_vec(x) - b,
            Kind::RankOne { h, y } => h * (h.dot(x) - y),
            Kind::Callback(f) => f.gradient(x),
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            Kind::Quadratic { q, .. } => q.as_matrix().clone(),
            Kind::RankOne { h, .. } => h * h.transpose(),
            Kind::Callback(f) => f.hessian(x),
        }
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

/// Solution of a local subproblem and the work it took.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub x: DVector<f64>,
    /// 1 for closed-form solves, Newton iterations otherwise.
    pub iterations: usize,
}

/// `argmin_x f(x) + cᵀx + (a/2)‖x‖² + (π/2)‖x − x_prev‖²`.
///
/// Quadratic kinds are solved in closed form; callbacks by damped Newton
/// started at `x_prev` until the stationarity residual is at most `tol`.
pub fn local_subproblem(
    comp: &ObjectiveComponent,
    c: &DVector<f64>,
    a: f64,
    pi: f64,
    x_prev: &DVector<f64>,
    tol: f64,
) -> Result<LocalSolution> {
    let p = comp.dim();
    for v in [c, x_prev] {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: v.len(),
            });
        }
        if v.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    if !(a >= 0.0 && pi >= 0.0 && a.is_finite() && pi.is_finite()) {
        return Err(invalid("a, pi", "must be finite and nonnegative"));
    }
    let shift = a + pi;

    if let Some((q, b)) = comp.quadratic_parts() {
        let k = SymMatrix::symmetrize(q + DMatrix::identity(p, p) * shift);
        let rhs = b - c + x_prev * pi;
        let x = solve_spd(&k, &rhs).map_err(|e| match e {
            Error::NotPositiveDefinite => Error::NoUniqueMinimizer,
            other => other,
        })?;
        return Ok(LocalSolution { x, iterations: 1 });
    }

    let value = |x: &DVector<f64>| {
        comp.value(x)
            + c.dot(x)
            + 0.5 * a * x.norm_squared()
            + 0.5 * pi * (x - x_prev).norm_squared()
    };
    let grad = |x: &DVector<f64>| comp.grad_unchecked(x) + c + x * a + (x - x_prev) * pi;
    let hess = |x: &DVector<f64>| comp.hessian(x) + DMatrix::identity(p, p) * shift;
    let (x, iterations) = damped_newton(value, grad, hess, x_prev.clone(), tol, NEWTON_MAX_ITER)?;
    Ok(LocalSolution { x, iterations })
}

/// Damped Newton with halving backtracking and Armijo constant [`ARMIJO`].
pub(crate) fn damped_newton(
    value: impl Fn(&DVector<f64>) -> f64,
    grad: impl Fn(&DVector<f64>) -> DVector<f64>,
    hess: impl Fn(&DVector<f64>) -> DMatrix<f64>,
    mut x: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let mut g = grad(&x);
    for iter in 0..=max_iter {
        let gnorm = g.norm();
        if !gnorm.is_finite() {
            return Err(Error::NonFinite);
        }
        if gnorm <= tol {
            return Ok((x, iter));
        }
        if iter == max_iter {
            return Err(Error::NewtonStall {
                iterations: iter,
                grad_norm: gnorm,
            });
        }
        let h = SymMatrix::symmetrize(hess(&x));
        let d = -solve_spd(&h, &g).map_err(|e| match e {
            Error::NotPositiveDefinite => Error::NoUniqueMinimizer,
            other => other,
        })?;
        let f0 = value(&x);
        let slope = g.dot(&d);
        if -slope <= 1e-10 * (1.0 + f0.abs()) {
            // predicted decrease is at rounding level: take the pure Newton step
            x += d;
            g = grad(&x);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial = &x + &d * t;
            if value(&trial) <= f0 + ARMIJO * t * slope {
                x = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // value differences are below rounding; fall back on the gradient
            let trial = &x + &d;
            let g_trial = grad(&trial);
            if g_trial.norm() < gnorm {
                x = trial;
                g = g_trial;
                continue;
            }
            return Err(Error::NewtonStall {
                iterations: iter,
                grad_norm: gnorm,
            });
        }
        g = grad(&x);
    }
    unreachable!("loop returns on its last iteration")
}

/// Checks that `x` stacks one block per component.
pub(crate) fn check_stacked(components: &[ObjectiveComponent], x: &DVector<f64>) -> Result<usize> {
    let p = components.first().map(|c| c.dim()).unwrap_or(0);
    let expected = components.len() * p;
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(p)
}

/// Stacked sum `f(x) = Σ_i f_i(x_i)`.
pub fn eval_f(components: &[ObjectiveComponent], x: &DVector<f64>) -> Result<f64> {
    let p = check_stacked(components, x)?;
    Ok(components
        .iter()
        .enumerate()
        .map(|(i, c)| c.value(&x.rows(i * p, p).into_owned()))
        .sum())
}

/// Stacked gradient `∇f(x) = [∇f_1(x_1); …; ∇f_n(x_n)]`.
pub fn grad_f(components: &[ObjectiveComponent], x: &DVector<f64>) -> Result<DVector<f64>> {
    let p = check_stacked(components, x)?;
    let mut out = DVector::zeros(x.len());
    for (i, c) in components.iter().enumerate() {
        out.rows_mut(i * p, p)
            .copy_from(&c.grad(&x.rows(i * p, p).into_owned())?);
    }
    Ok(out)
}

/// Block-diagonal stacked Hessian of `f`.
pub(crate) fn hessian_f(components: &[ObjectiveComponent], x: &DVector<f64>) -> DMatrix<f64> {
    let p = components.first().map(|c| c.dim()).unwrap_or(0);
    let np = components.len() * p;
    let mut h = DMatrix::zeros(np, np);
    for (i, c) in components.iter().enumerate() {
        h.view_mut((i * p, i * p), (p, p))
            .copy_from(&c.hessian(&x.rows(i * p, p).into_owned()));
    }
    h
}

/// `argmin_x f(x) + cᵀx + ½ xᵀKx` over the stacked variable, for PSD `K`.
/// Closed form when every component is quadratic, damped Newton from `x0` otherwise.
pub(crate) fn minimize_stacked(
    components: &[ObjectiveComponent],
    c: &DVector<f64>,
    k: &DMatrix<f64>,
    x0: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let p = check_stacked(components, x0)?;
    let np = x0.len();
    if components.iter().all(|comp| comp.is_quadratic()) {
        let mut h = k.clone();
        let mut rhs = -c;
        for (i, comp) in components.iter().enumerate() {
            let (q, b) = comp.quadratic_parts().expect("quadratic kind");
            let mut view = h.view_mut((i * p, i * p), (p, p));
            view += q;
            let mut r = rhs.rows_mut(i * p, p);
            r += b;
        }
        return solve_spd(&SymMatrix::symmetrize(h), &rhs).map_err(|e| match e {
            Error::NotPositiveDefinite => Error::NoUniqueMinimizer,
            other => other,
        });
    }
    let value = |x: &DVector<f64>| {
        eval_f(components, x).unwrap_or(f64::NAN) + c.dot(x) + 0.5 * x.dot(&(k * x))
    };
    let grad = |x: &DVector<f64>| {
        let mut g = DVector::zeros(np);
        for (i, comp) in components.iter().enumerate() {
            g.rows_mut(i * p, p)
                .copy_from(&comp.grad_unchecked(&x.rows(i * p, p).into_owned()));
        }
        g + c + k * x
    };
    let hess = |x: &DVector<f64>| hessian_f(components, x) + k;
    damped_newton(value, grad, hess, x0.clone(), tol, NEWTON_MAX_ITER).map(|(x, _)| x)
}

pub(crate) fn check_graph(components: &[ObjectiveComponent], graph: &NetworkGraph) -> Result<()> {
    if components.len() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: components.len(),
        });
    }
    if let Some(c) = components.iter().find(|c| c.dim() != graph.p()) {
        return Err(Error::DimensionMismatch {
            expected: graph.p(),
            got: c.dim(),
        });
    }
    Ok(())
}

/// `g(x) = f(x) + (ρ(1−η)/4)‖E_o x‖²`.
pub fn eval_g(
    components: &[ObjectiveComponent],
    graph: &NetworkGraph,
    rho: f64,
    eta: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    check_graph(components, graph)?;
    let r = consensuality_residual(graph, x)?;
    Ok(eval_f(components, x)? + rho * (1.0 - eta) / 4.0 * r * r)
}

/// `∇g(x) = ∇f(x) + (ρ(1−η)/2)(L ⊗ I_p) x`.
pub fn grad_g(
    components: &[ObjectiveComponent],
    graph: &NetworkGraph,
    rho: f64,
    eta: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_graph(components, graph)?;
    let lx = crate::netgraph::apply_blocks(graph.laplacian().as_matrix(), graph.p(), x)?;
    Ok(grad_f(components, x)? + lx * (rho * (1.0 - eta) / 2.0))
}

/// Curvature constants of the sum objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumProfile {
    /// Strong convexity constant of `f̄ = Σ f_i`.
    pub mu_sum: f64,
    /// `L = max_i L_i`.
    pub lipschitz: f64,
    pub n: usize,
    pub p: usize,
}

/// Threshold below which the sum counts as not strongly convex.
pub const STRONG_CONVEXITY_FLOOR: f64 = 1e-12;

/// Exact profile for closed-form components: `μ = λ_min(Σ Q_i)`.
pub fn sum_profile(components: &[ObjectiveComponent], graph: &NetworkGraph) -> Result<SumProfile> {
    check_graph(components, graph)?;
    let p = graph.p();
    let mut sum = DMatrix::zeros(p, p);
    for c in components {
        let (q, _) = c.quadratic_parts().ok_or_else(|| {
            invalid(
                "mu_sum",
                "callback components need a user-supplied strong convexity constant",
            )
        })?;
        sum += q;
    }
    let mu = sym_eigen(&SymMatrix::symmetrize(sum), 1e-12)?.min();
    sum_profile_with_mu(components, graph, mu)
}

/// Profile with a user-supplied strong convexity constant.
pub fn sum_profile_with_mu(
    components: &[ObjectiveComponent],
    graph: &NetworkGraph,
    mu_sum: f64,
) -> Result<SumProfile> {
    check_graph(components, graph)?;
    if !(mu_sum > STRONG_CONVEXITY_FLOOR) {
        return Err(Error::NotStronglyConvex(mu_sum));
    }
    let lipschitz = components.iter().map(|c| c.lipschitz()).fold(0.0, f64::max);
    Ok(SumProfile {
        mu_sum,
        lipschitz,
        n: graph.n(),
        p: graph.p(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_graph, topology};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    /// `log(1 + exp(aᵀx)) + ½ (wᵀx)²`: smooth, convex, not strongly convex for p > 2.
    #[derive(Debug)]
    struct SoftplusPlusSquare {
        a: DVector<f64>,
        w: DVector<f64>,
    }

    impl SmoothConvex for SoftplusPlusSquare {
        fn dim(&self) -> usize {
            self.a.len()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            let s = self.a.dot(x);
            let sp = if s > 0.0 {
                s + (-s).exp().ln_1p()
            } else {
                s.exp().ln_1p()
            };
            sp + 0.5 * self.w.dot(x).powi(2)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            let sig = 1.0 / (1.0 + (-self.a.dot(x)).exp());
            &self.a * sig + &self.w * self.w.dot(x)
        }
        fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            let sig = 1.0 / (1.0 + (-self.a.dot(x)).exp());
            &self.a * self.a.transpose() * (sig * (1.0 - sig)) + &self.w * self.w.transpose()
        }
    }

    fn softplus_component() -> ObjectiveComponent {
        let f = SoftplusPlusSquare {
            a: v(&[1.0, -0.5]),
            w: v(&[0.3, 0.7]),
        };
        let l = 0.25 * f.a.norm_squared() + f.w.norm_squared();
        ObjectiveComponent::callback(Arc::new(f), l).unwrap()
    }

    fn sample_components() -> Vec<ObjectiveComponent> {
        let q = SymMatrix::symmetrize(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        vec![
            ObjectiveComponent::rank_one(v(&[1.0, -2.0]), 0.5).unwrap(),
            ObjectiveComponent::quadratic(q, v(&[1.0, -1.0])).unwrap(),
            softplus_component(),
        ]
    }

    #[test]
    fn rank_one_gradient_by_hand() {
        let c = ObjectiveComponent::rank_one(v(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(c.grad(&v(&[2.0, 3.0])).unwrap(), v(&[2.0, 0.0]));
    }

    #[test]
    fn identity_quadratic_gradient_is_x() {
        let c = ObjectiveComponent::quadratic(SymMatrix::identity(3), DVector::zeros(3)).unwrap();
        let x = v(&[1.0, -2.0, 0.5]);
        assert_eq!(c.grad(&x).unwrap(), x);
    }

    #[test]
    fn gradient_vanishes_at_minimizers() {
        // rank-one minimizer: any x with hᵀx = y
        let r = ObjectiveComponent::rank_one(v(&[2.0, 1.0]), 3.0).unwrap();
        assert!(r.grad(&v(&[1.0, 1.0])).unwrap().norm() < 1e-10);
        let q = SymMatrix::symmetrize(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let qc = ObjectiveComponent::quadratic(q.clone(), v(&[1.0, -1.0])).unwrap();
        let xs = solve_spd(&q, &v(&[1.0, -1.0])).unwrap();
        assert!(qc.grad(&xs).unwrap().norm() < 1e-10);
    }

    #[test]
    fn gradient_errors() {
        let c = ObjectiveComponent::rank_one(v(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(c.grad(&v(&[f64::NAN, 0.0])), Err(Error::NonFinite));
        assert!(matches!(
            c.grad(&v(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        let indefinite = SymMatrix::from_diagonal(&v(&[1.0, -1.0]));
        assert!(matches!(
            ObjectiveComponent::quadratic(indefinite, DVector::zeros(2)),
            Err(Error::IndefiniteInput(_))
        ));
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for comp in sample_components() {
            for _ in 0..20 {
                let x = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                let g = comp.grad(&x).unwrap();
                let h = 1e-6;
                let fd = DVector::from_fn(2, |k, _| {
                    let mut e = DVector::zeros(2);
                    e[k] = h;
                    (comp.value(&(&x + &e)) - comp.value(&(&x - &e))) / (2.0 * h)
                });
                assert!((&fd - &g).norm() <= 1e-5 * g.norm().max(1.0), "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn lipschitz_and_convexity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for comp in sample_components() {
            for _ in 0..200 {
                let a = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
                let b = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
                let dg = comp.grad(&a).unwrap() - comp.grad(&b).unwrap();
                assert!(dg.norm() <= comp.lipschitz() * (&a - &b).norm() * (1.0 + 1e-8));
                assert!(dg.dot(&(&a - &b)) >= -1e-10);
            }
        }
    }

    #[test]
    fn scalar_rank_one_subproblem() {
        let c = ObjectiveComponent::rank_one(v(&[1.0]), 2.0).unwrap();
        let s = local_subproblem(&c, &v(&[0.0]), 1.0, 0.0, &v(&[0.0]), 1e-11).unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_function_subproblems() {
        let zero = ObjectiveComponent::quadratic(SymMatrix::zeros(2), DVector::zeros(2)).unwrap();
        let target = v(&[0.3, -4.0]);
        let s = local_subproblem(&zero, &DVector::zeros(2), 0.0, 1.0, &target, 1e-11).unwrap();
        assert_relative_eq!(s.x, target, epsilon = 1e-15);
        let s = local_subproblem(&zero, &(-&target), 1.0, 0.0, &DVector::zeros(2), 1e-11).unwrap();
        assert_relative_eq!(s.x, target, epsilon = 1e-15);
        assert_eq!(
            local_subproblem(
                &zero,
                &DVector::zeros(2),
                0.0,
                0.0,
                &DVector::zeros(2),
                1e-11
            ),
            Err(Error::NoUniqueMinimizer)
        );
    }

    #[test]
    fn subproblem_stationarity_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tol = 1e-11;
        for comp in sample_components() {
            for _ in 0..30 {
                let c = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
                let x_prev = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
                let a = rng.random_range(0.1..4.0);
                let pi = rng.random_range(0.0..2.0);
                let s = local_subproblem(&comp, &c, a, pi, &x_prev, tol).unwrap();
                let z = &s.x;
                let resid = comp.grad(z).unwrap() + &c + z * a + (z - &x_prev) * pi;
                assert!(resid.norm() <= tol, "residual {}", resid.norm());
            }
        }
    }

    #[test]
    fn g_penalty_examples() {
        let g3 = build_graph(3, &[(0, 1), (1, 2)], 1).unwrap();
        let zeros: Vec<_> = (0..3)
            .map(|_| ObjectiveComponent::quadratic(SymMatrix::zeros(1), DVector::zeros(1)).unwrap())
            .collect();
        let val = eval_g(&zeros, &g3, 2.0, 0.5, &v(&[1.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(val, 0.5, epsilon = 1e-15);

        let comps: Vec<_> = (0..3)
            .map(|i| ObjectiveComponent::rank_one(v(&[1.0 + i as f64]), 0.5).unwrap())
            .collect();
        let consensual = v(&[0.7, 0.7, 0.7]);
        assert_eq!(
            eval_g(&comps, &g3, 3.0, 0.2, &consensual).unwrap(),
            eval_f(&comps, &consensual).unwrap()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            assert!(eval_g(&comps, &g3, 3.0, 0.2, &x).unwrap() >= eval_f(&comps, &x).unwrap());
        }
    }

    #[test]
    fn profile_examples() {
        let g2 = build_graph(2, &[(0, 1)], 1).unwrap();
        let comps = vec![
            ObjectiveComponent::rank_one(v(&[1.0]), 3.0).unwrap(),
            ObjectiveComponent::rank_one(v(&[1.0]), -1.0).unwrap(),
        ];
        let prof = sum_profile(&comps, &g2).unwrap();
        assert_relative_eq!(prof.mu_sum, 2.0, epsilon = 1e-14);
        assert_eq!(prof.lipschitz, 1.0);

        let g2p = g2.with_block_dim(2).unwrap();
        let comps = vec![
            ObjectiveComponent::rank_one(v(&[1.0, 0.0]), 0.0).unwrap(),
            ObjectiveComponent::rank_one(v(&[0.0, 1.0]), 0.0).unwrap(),
        ];
        let prof = sum_profile(&comps, &g2p).unwrap();
        assert_relative_eq!(prof.mu_sum, 1.0, epsilon = 1e-14);
        for c in &comps {
            let (q, _) = c.quadratic_parts().unwrap();
            assert!(
                sym_eigen(&SymMatrix::symmetrize(q), 1e-12)
                    .unwrap()
                    .min()
                    .abs()
                    < 1e-15
            );
        }

        let comps = vec![
            ObjectiveComponent::rank_one(v(&[1.0, 0.0]), 0.0).unwrap(),
            ObjectiveComponent::rank_one(v(&[1.0, 0.0]), 1.0).unwrap(),
        ];
        assert!(matches!(
            sum_profile(&comps, &g2p),
            Err(Error::NotStronglyConvex(_))
        ));
    }

    #[test]
    fn callback_profile_needs_supplied_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = build_graph(3, &topology::ring(3), 2).unwrap();
        let comps: Vec<_> = (0..3).map(|_| softplus_component()).collect();
        assert!(sum_profile(&comps, &g).is_err());
        let prof = sum_profile_with_mu(&comps, &g, 0.1).unwrap();
        assert_eq!(prof.lipschitz, comps[0].lipschitz());
        let _ = rng.random::<u8>();
    }
}
