use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::denselin::{sym_eigen, SymMatrix};
use crate::netgraph::NetworkGraph;

/// Eigenvalue tolerance of the condition checks.
pub const CONDITION_TOL: f64 = 1e-9;

/// Outcome of one named condition with a human-readable witness.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub witness: String,
}

impl ConditionCheck {
    fn new(name: &'static str, passed: bool, witness: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            witness: witness.into(),
        }
    }
}

impl fmt::Display for ConditionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{}: {} ({})", self.name, status, self.witness)
    }
}

fn failures_of(checks: &[&ConditionCheck]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.to_string())
        .collect()
}

/// Conditions on a P-EXTRA mixing pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    /// A1: entries vanish between non-adjacent agents.
    pub decentralized: ConditionCheck,
    /// A2: `W` and `W̃` symmetric.
    pub symmetric: ConditionCheck,
    /// A3: `null(W − W̃) = span(1)` and `(I − W̃)1 = 0`.
    pub null_space: ConditionCheck,
    /// A4: `W̃ ≻ 0`.
    pub positive: ConditionCheck,
    /// A4: `(I + W)/2 ⪰ W̃`.
    pub upper: ConditionCheck,
    /// A4: `W̃ ⪰ W`.
    pub lower: ConditionCheck,
}

impl MixingReport {
    fn all(&self) -> [&ConditionCheck; 6] {
        [
            &self.decentralized,
            &self.symmetric,
            &self.null_space,
            &self.positive,
            &self.upper,
            &self.lower,
        ]
    }

    pub fn spectral(&self) -> bool {
        self.positive.passed && self.upper.passed && self.lower.passed
    }

    pub fn passed(&self) -> bool {
        self.all().iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        failures_of(&self.all())
    }
}

/// Conditions on a general U/V assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct UvReport {
    /// C1: `V ⪰ 0` with `null(V) = span(1)`.
    pub null_space: ConditionCheck,
    /// C2: `V + U = 2D̄` with `D̄` diagonal positive.
    pub complementarity: ConditionCheck,
    /// C3: `U` and `V` only couple neighbors.
    pub distributable: ConditionCheck,
}

impl UvReport {
    fn all(&self) -> [&ConditionCheck; 3] {
        [&self.null_space, &self.complementarity, &self.distributable]
    }

    pub fn passed(&self) -> bool {
        self.all().iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        failures_of(&self.all())
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn sparsity_witness(graph: &NetworkGraph, mats: &[(&str, &DMatrix<f64>)]) -> Option<String> {
    let n = graph.n();
    for (name, m) in mats {
        for i in 0..n {
            for j in 0..n {
                if i != j && !graph.is_adjacent(i, j) && m[(i, j)] != 0.0 {
                    return Some(format!(
                        "{name}[{i},{j}] = {} between non-neighbors",
                        m[(i, j)]
                    ));
                }
            }
        }
    }
    None
}

fn eigenvalues(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    sym_eigen(&SymMatrix::symmetrize(m.clone()), 1e-13)
        .ok()
        .map(|e| e.values)
}

/// Checks `null(A) = span(1)`: `A·1 = 0` and exactly one near-zero eigenvalue.
fn consensus_null_space(a: &DMatrix<f64>, name: &str) -> (bool, String) {
    let n = a.nrows();
    let ones = DVector::from_element(n, 1.0);
    let image = (a * &ones).amax();
    let scale = a.amax().max(1.0);
    let Some(vals) = eigenvalues(a) else {
        return (false, format!("eigen-decomposition of {name} failed"));
    };
    let zeros = vals
        .iter()
        .filter(|l| l.abs() <= CONDITION_TOL * scale)
        .count();
    let ok = image <= CONDITION_TOL * scale && zeros == 1;
    (
        ok,
        format!("|{name}·1|_max = {image:.3e}, {zeros} near-zero eigenvalue(s)"),
    )
}

fn square_report(
    name: &'static str,
    n: usize,
    shapes: &[(usize, usize)],
) -> Option<ConditionCheck> {
    shapes
        .iter()
        .find(|&&(r, c)| r != n || c != n)
        .map(|&(r, c)| ConditionCheck::new(name, false, format!("expected {n}x{n}, got {r}x{c}")))
}

/// Checks a mixing pair `(W, W̃)` against the decentralization, symmetry,
/// null-space and spectral requirements of P-EXTRA.
pub fn check_mixing(
    w: &DMatrix<f64>,
    w_tilde: &DMatrix<f64>,
    graph: &NetworkGraph,
) -> MixingReport {
    let n = graph.n();
    if let Some(bad) = square_report("shape", n, &[w.shape(), w_tilde.shape()]) {
        return MixingReport {
            decentralized: bad.clone(),
            symmetric: bad.clone(),
            null_space: bad.clone(),
            positive: bad.clone(),
            upper: bad.clone(),
            lower: bad,
        };
    }
    let decentralized = match sparsity_witness(graph, &[("W", w), ("W~", w_tilde)]) {
        None => ConditionCheck::new("A1 decentralized", true, "entries respect the graph"),
        Some(wit) => ConditionCheck::new("A1 decentralized", false, wit),
    };
    let asym = max_asymmetry(w).max(max_asymmetry(w_tilde));
    let symmetric = ConditionCheck::new(
        "A2 symmetric",
        asym <= 1e-12,
        format!("max asymmetry {asym:.3e}"),
    );

    let eye = DMatrix::<f64>::identity(n, n);
    let (ok_diff, wit_diff) = consensus_null_space(&(w - w_tilde), "W-W~");
    let ident_image = ((&eye - w_tilde) * DVector::from_element(n, 1.0)).amax();
    let null_space = ConditionCheck::new(
        "A3 null space",
        ok_diff && ident_image <= CONDITION_TOL,
        format!("{wit_diff}; |(I-W~)·1|_max = {ident_image:.3e}"),
    );

    let min_eig = |m: &DMatrix<f64>| eigenvalues(m).map(|v| v.min()).unwrap_or(f64::NAN);
    let pos = min_eig(w_tilde);
    let positive = ConditionCheck::new(
        "A4 W~ > 0",
        pos > CONDITION_TOL,
        format!("lambda_min(W~) = {pos:.6e}"),
    );
    let up = min_eig(&((&eye + w) * 0.5 - w_tilde));
    let upper = ConditionCheck::new(
        "A4 (I+W)/2 >= W~",
        up >= -CONDITION_TOL,
        format!("lambda_min((I+W)/2 - W~) = {up:.6e}"),
    );
    let low = min_eig(&(w_tilde - w));
    let lower = ConditionCheck::new(
        "A4 W~ >= W",
        low >= -CONDITION_TOL,
        format!("lambda_min(W~ - W) = {low:.6e}"),
    );
    MixingReport {
        decentralized,
        symmetric,
        null_space,
        positive,
        upper,
        lower,
    }
}

/// Checks a general assignment `(U, V, D̄)` for the null-space,
/// complementarity and distributability conditions.
pub fn check_uv_conditions(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    dbar: &DVector<f64>,
    graph: &NetworkGraph,
) -> UvReport {
    let n = graph.n();
    let shapes = [u.shape(), v.shape(), (dbar.len(), n)];
    if let Some(bad) = square_report("shape", n, &shapes) {
        return UvReport {
            null_space: bad.clone(),
            complementarity: bad.clone(),
            distributable: bad,
        };
    }
    let (ok_null, wit_null) = consensus_null_space(v, "V");
    let v_min = eigenvalues(v).map(|e| e.min()).unwrap_or(f64::NAN);
    let scale = v.amax().max(1.0);
    let v_sym = max_asymmetry(v) <= 1e-12 * scale;
    let null_space = ConditionCheck::new(
        "C1 null space",
        ok_null && v_sym && v_min >= -CONDITION_TOL * scale,
        format!("{wit_null}; lambda_min(V) = {v_min:.3e}"),
    );

    let gap = (v + u - DMatrix::from_diagonal(dbar) * 2.0).amax();
    let d_min = dbar.min();
    let complementarity = ConditionCheck::new(
        "C2 complementarity",
        gap <= CONDITION_TOL * scale && d_min > 0.0 && dbar.iter().all(|d| d.is_finite()),
        format!("|V + U - 2D|_max = {gap:.3e}, min D = {d_min:.3e}"),
    );
    let distributable = match sparsity_witness(graph, &[("U", u), ("V", v)]) {
        None => ConditionCheck::new("C3 distributable", true, "entries respect the graph"),
        Some(wit) => ConditionCheck::new("C3 distributable", false, wit),
    };
    UvReport {
        null_space,
        complementarity,
        distributable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::build_graph;
    use crate::solvers::{pextra_mixing, pextra_overshoot_mixing};

    fn fig1() -> NetworkGraph {
        build_graph(3, &[(0, 1), (1, 2)], 1).unwrap()
    }

    #[test]
    fn standard_mixing_passes() {
        let g = fig1();
        for eta in [0.1, 0.3, 0.5] {
            let (w, wt) = pextra_mixing(&g, 0.2, 1.0, eta).unwrap();
            let r = check_mixing(w.as_matrix(), wt.as_matrix(), &g);
            assert!(r.passed(), "{:?}", r.failures());
        }
    }

    #[test]
    fn overshoot_fails_only_the_upper_bound() {
        let g = fig1();
        let (w, wt) = pextra_overshoot_mixing(&g, 0.2, 1.0, 0.75).unwrap();
        let r = check_mixing(w.as_matrix(), wt.as_matrix(), &g);
        assert!(!r.upper.passed);
        assert!(
            r.decentralized.passed
                && r.symmetric.passed
                && r.null_space.passed
                && r.positive.passed
                && r.lower.passed
        );
    }

    #[test]
    fn uv_examples() {
        let g = fig1();
        let u = g.unoriented_gram().into_matrix();
        let v = g.laplacian().into_matrix();
        let d = g.degree_diag();
        assert!(check_uv_conditions(&u, &v, &d, &g).passed());
        let r = check_uv_conditions(&u, &DMatrix::zeros(3, 3), &d, &g);
        assert!(!r.null_space.passed);
        let mut d0 = d.clone();
        d0[1] = 0.0;
        assert!(!check_uv_conditions(&u, &v, &d0, &g).complementarity.passed);
        let mut far = u.clone();
        far[(0, 2)] = 1.0;
        far[(2, 0)] = 1.0;
        assert!(!check_uv_conditions(&far, &v, &d, &g).distributable.passed);
    }

    #[test]
    fn wrong_shapes_fail_every_check() {
        let g = fig1();
        let r = check_mixing(&DMatrix::identity(2, 2), &DMatrix::identity(3, 3), &g);
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 6);
    }
}
