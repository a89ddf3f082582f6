//! Small dense linear algebra: symmetric matrices, a cyclic Jacobi
//! eigensolver, SPD solves and minimum-norm solves of transposed systems.
//!
//! Everything here targets matrices of order at most a few hundred.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Maximum number of full Jacobi sweeps before giving up on further accuracy.
const MAX_SWEEPS: usize = 100;

/// A dense symmetric matrix. Construction checks symmetry and then
/// symmetrizes, so downstream code may rely on exact symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: DMatrix<f64>,
}

impl SymMatrix {
    /// Accepts `m` if it is square, finite, and its largest absolute
    /// asymmetry is at most `asym_tol`.
    pub fn new(m: DMatrix<f64>, asym_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = m.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if worst > asym_tol {
            return Err(Error::NotSymmetric(worst));
        }
        Ok(Self::symmetrize(m))
    }

    /// Returns `(m + m^T) / 2` without any check.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self {
            entries: (m + t) * 0.5,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(d: &DVector<f64>) -> Self {
        Self {
            entries: DMatrix::from_diagonal(d),
        }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }

    /// `u^T A u`.
    pub fn quad_form(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.entries * u))
    }

    /// Kronecker lift `A ⊗ I_p`.
    pub fn kron_identity(&self, p: usize) -> Self {
        Self {
            entries: kron_identity(&self.entries, p),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }
}

impl std::ops::Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl std::ops::Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            entries: &self.entries - &rhs.entries,
        }
    }
}

impl std::ops::Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix {
            entries: &self.entries * rhs,
        }
    }
}

/// `base ⊗ I_p`, materialized.
pub fn kron_identity(base: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    if p == 1 {
        return base.clone();
    }
    let mut out = DMatrix::zeros(base.nrows() * p, base.ncols() * p);
    for c in 0..base.ncols() {
        for r in 0..base.nrows() {
            let v = base[(r, c)];
            if v != 0.0 {
                for k in 0..p {
                    out[(r * p + k, c * p + k)] = v;
                }
            }
        }
    }
    out
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: DMatrix<f64>,
    /// Number of Jacobi sweeps performed.
    pub sweeps: usize,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cyclic Jacobi eigensolver. Sweeps until the off-diagonal Frobenius norm is
/// at most `rel_tol * ‖A‖_F`.
pub fn sym_eigen(a: &SymMatrix, rel_tol: f64) -> Result<SymEigen> {
    let n = a.order();
    let mut m = a.as_matrix().clone();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = rel_tol * m.norm();
    let mut sweeps = 0;

    while off_diagonal_norm(&m) > target && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate_columns(&mut m, p, q, c, s);
                rotate_rows(&mut m, p, q, c, s);
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                rotate_columns(&mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok(SymEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.nrows() {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
}

fn rotate_rows(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.ncols() {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
}

/// Smallest eigenvalue strictly above the zero threshold.
///
/// The threshold defaults to `1e-9 * λ_max` when `zero_tol` is `None`.
/// Eigenvalues below `-threshold` mean the input is not PSD.
pub fn smallest_nonzero_eig(a: &SymMatrix, zero_tol: Option<f64>, jacobi_tol: f64) -> Result<f64> {
    let eig = sym_eigen(a, jacobi_tol)?;
    let lmax = eig.max().max(0.0);
    let threshold = zero_tol.unwrap_or(1e-9 * lmax);
    let lmin = eig.min();
    if lmin < -threshold.max(1e-12 * lmax) {
        return Err(Error::IndefiniteInput(lmin));
    }
    eig.values
        .iter()
        .copied()
        .find(|&l| l > threshold)
        .ok_or(Error::AllZero)
}

/// Cholesky solve of `A x = b` for positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.order() {
        return Err(Error::DimensionMismatch {
            expected: a.order(),
            got: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let chol = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Minimum-norm solutions of `Bᵀ α = c` for a fixed `B` (m × q).
///
/// The pseudo-inverse of `BᵀB` is formed once from its eigen-decomposition,
/// so repeated solves are cheap. Solutions lie in the column space of `B`.
#[derive(Debug, Clone)]
pub struct MinNormSolver {
    b: DMatrix<f64>,
    gram_pinv: DMatrix<f64>,
    consistency: f64,
}

impl MinNormSolver {
    pub fn new(b: DMatrix<f64>, jacobi_tol: f64, consistency: f64) -> Result<Self> {
        let gram = SymMatrix::symmetrize(b.transpose() * &b);
        let eig = sym_eigen(&gram, jacobi_tol)?;
        let lmax = eig.max().max(0.0);
        let threshold = 1e-9 * lmax;
        let q = gram.order();
        let mut pinv = DMatrix::zeros(q, q);
        for (k, &l) in eig.values.iter().enumerate() {
            if l > threshold {
                let col = eig.vectors.column(k);
                pinv += (col * col.transpose()) / l;
            }
        }
        Ok(Self {
            b,
            gram_pinv: pinv,
            consistency,
        })
    }

    /// Length of the solution vector α.
    pub fn solution_len(&self) -> usize {
        self.b.nrows()
    }

    pub fn solve(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        if c.len() != self.b.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.b.ncols(),
                got: c.len(),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let alpha = &self.b * (&self.gram_pinv * c);
        let residual = (self.b.transpose() * &alpha - c).norm();
        if residual > (self.consistency * c.norm()).max(1e-12) {
            return Err(Error::Inconsistent(residual));
        }
        Ok(alpha)
    }
}

/// One-shot minimum-norm solve of `Bᵀ α = c`.
pub fn min_norm_solve(b: &DMatrix<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    MinNormSolver::new(b.clone(), 1e-12, 1e-8)?.solve(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const JT: f64 = 1e-12;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        let n = rows.len();
        SymMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]), 1e-12).unwrap()
    }

    fn fig1_laplacian() -> SymMatrix {
        sym(&[&[2.0, -2.0, 0.0], &[-2.0, 4.0, -2.0], &[0.0, -2.0, 2.0]])
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrize(m)
    }

    /// Roots of det(λI − A) for a 3×3 matrix by sign-change scan plus bisection.
    fn char_poly_roots_3x3(a: &DMatrix<f64>, lo: f64, hi: f64) -> Vec<f64> {
        let det = |l: f64| (DMatrix::identity(3, 3) * l - a).determinant();
        let steps = 20_000;
        let mut roots = Vec::new();
        let h = (hi - lo) / steps as f64;
        for s in 0..steps {
            let (mut x0, mut x1) = (lo + s as f64 * h, lo + (s + 1) as f64 * h);
            let (f0, f1) = (det(x0), det(x1));
            if f0 == 0.0 {
                roots.push(x0);
                continue;
            }
            if f0 * f1 < 0.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (x0 + x1);
                    if det(x0) * det(mid) <= 0.0 {
                        x1 = mid;
                    } else {
                        x0 = mid;
                    }
                }
                roots.push(0.5 * (x0 + x1));
            }
        }
        roots
    }

    #[test]
    fn diagonal_eigenvalues_are_sorted() {
        let a = SymMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eigen(&a, JT).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eigen(&SymMatrix::identity(4), JT).unwrap();
        assert!(e.values.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn fig1_laplacian_spectrum_matches_characteristic_polynomial() {
        let l = fig1_laplacian();
        let oracle = char_poly_roots_3x3(l.as_matrix(), -1.0 - 1e-7, 10.0);
        assert_eq!(oracle.len(), 3);
        let e = sym_eigen(&l, JT).unwrap();
        for (got, want) in e.values.iter().zip(oracle.iter()) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert_relative_eq!(e.values[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[2], 6.0, epsilon = 1e-12);
        assert!(e.values[0].abs() < 1e-12);
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 12] {
            let a = random_symmetric(&mut rng, n);
            let e = sym_eigen(&a, JT).unwrap();
            let scale = a.frobenius_norm().max(1.0);
            for k in 0..n {
                let v = e.vectors.column(k).into_owned();
                let r = a.mul_vec(&v) - &v * e.values[k];
                assert!(r.norm() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn reconstruction_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=30);
            let a = random_symmetric(&mut rng, n);
            let e = sym_eigen(&a, JT).unwrap();
            let recon = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
            let err = (recon - a.as_matrix()).norm();
            assert!(
                err <= 1e-9 * a.frobenius_norm().max(1e-300),
                "n={n} err={err}"
            );
            let orth = e.vectors.transpose() * &e.vectors - DMatrix::identity(n, n);
            assert!(orth.norm() < 1e-10);
        }
    }

    #[test]
    fn agrees_with_nalgebra_symmetric_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(2..=15);
            let a = random_symmetric(&mut rng, n);
            let ours = sym_eigen(&a, JT).unwrap();
            let mut theirs: Vec<f64> = a
                .as_matrix()
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            theirs.sort_by(f64::total_cmp);
            for (x, y) in ours.values.iter().zip(theirs.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(
            SymMatrix::new(m, 1e-12),
            Err(Error::NotSymmetric(_))
        ));
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert_eq!(SymMatrix::new(m, 1e-12), Err(Error::NonFinite));
    }

    #[test]
    fn smallest_nonzero_eigenvalue_cases() {
        assert_relative_eq!(
            smallest_nonzero_eig(&fig1_laplacian(), None, JT).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            smallest_nonzero_eig(&SymMatrix::identity(3), None, JT).unwrap(),
            1.0
        );
        assert_eq!(
            smallest_nonzero_eig(&SymMatrix::zeros(2), None, JT),
            Err(Error::AllZero)
        );
        let indefinite = SymMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        assert!(matches!(
            smallest_nonzero_eig(&indefinite, None, JT),
            Err(Error::IndefiniteInput(_))
        ));
    }

    #[test]
    fn spd_solves() {
        let b = DVector::from_vec(vec![3.0, -1.0]);
        assert_eq!(solve_spd(&SymMatrix::identity(2), &b).unwrap(), b);
        let a = SymMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let x = solve_spd(&a, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn spd_solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let a = SymMatrix::symmetrize(&g * g.transpose() + DMatrix::identity(5, 5) * 0.5);
            let x = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
            let b = a.mul_vec(&x);
            let got = solve_spd(&a, &b).unwrap();
            assert!((&got - &x).norm() <= 1e-9);
            let resid = (a.mul_vec(&got) - &b).norm();
            assert!(resid <= 1e-10 * (a.frobenius_norm() * got.norm() + b.norm()));
        }
    }

    #[test]
    fn spd_solve_rejects_singular() {
        let a = SymMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(
            solve_spd(&a, &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::NotPositiveDefinite)
        );
    }

    fn single_edge_eo() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
    }

    #[test]
    fn min_norm_zero_rhs() {
        let a = min_norm_solve(&single_edge_eo(), &DVector::zeros(2)).unwrap();
        assert_eq!(a, DVector::zeros(2));
    }

    #[test]
    fn min_norm_single_edge_matches_svd_pseudo_inverse() {
        let b = single_edge_eo();
        let c = DVector::from_vec(vec![1.0, -1.0]);
        let ours = min_norm_solve(&b, &c).unwrap();
        // independent route: pseudo-inverse of Bᵀ via SVD
        let oracle = b.transpose().pseudo_inverse(1e-12).unwrap() * &c;
        assert_relative_eq!(ours, oracle, epsilon = 1e-12);
        assert_relative_eq!(ours, DVector::from_vec(vec![0.5, -0.5]), epsilon = 1e-12);
    }

    #[test]
    fn min_norm_rejects_consensual_direction() {
        let c = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            min_norm_solve(&single_edge_eo(), &c),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn min_norm_solution_is_orthogonal_to_left_null_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // path graph on 4 vertices, 6 arcs
        let arcs = [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)];
        let eo = DMatrix::from_fn(6, 4, |a, i| {
            let (s, d) = arcs[a];
            (s == i) as i32 as f64 - (d == i) as i32 as f64
        });
        let solver = MinNormSolver::new(eo.clone(), 1e-12, 1e-8).unwrap();
        // projector onto range(E_o) from an SVD, independent of the Jacobi path
        let svd = eo.clone().svd(true, false);
        let u = svd.u.unwrap();
        let rank_cols: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > 1e-10)
            .collect();
        let ur = u.select_columns(rank_cols.iter());
        for _ in 0..20 {
            let w = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let c = eo.transpose() * &w;
            let alpha = solver.solve(&c).unwrap();
            assert!((eo.transpose() * &alpha - &c).norm() < 1e-10);
            let off_range = &alpha - &ur * (ur.transpose() * &alpha);
            assert!(off_range.norm() < 1e-10);
        }
    }
}
