//! Numerical tolerances shared by every module.
//!
//! Defaults can be overridden from an experiment config or from the
//! `DECON_OPT_TOL` environment variable (see [`Tolerances::apply_overrides`]).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Name of the environment variable holding tolerance overrides.
pub const TOLERANCE_ENV: &str = "DECON_OPT_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Jacobi sweeps stop once the off-diagonal Frobenius norm drops below
    /// this fraction of the matrix Frobenius norm.
    pub jacobi: f64,
    /// Eigenvalues at or below `zero_eig * lambda_max` count as zero.
    pub zero_eig: f64,
    /// Largest absolute asymmetry accepted when building a [`SymMatrix`](crate::denselin::SymMatrix).
    pub symmetry: f64,
    /// Stationarity tolerance for local and centralized subproblems.
    pub subproblem: f64,
    /// Relative residual allowed for a minimum-norm solve to count as consistent.
    pub consistency: f64,
    /// Slack on spectral (PSD ordering) checks.
    pub spectral: f64,
    /// Relative slack budget in contraction verification.
    pub contraction_slack: f64,
    /// Interval tolerance of the golden-section searches.
    pub search: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jacobi: 1e-12,
            zero_eig: 1e-9,
            symmetry: 1e-12,
            subproblem: 1e-11,
            consistency: 1e-8,
            spectral: 1e-9,
            contraction_slack: 1e-7,
            search: 1e-10,
        }
    }
}

impl Tolerances {
    /// Applies overrides written as `key=value` pairs separated by commas or
    /// whitespace. A bare number overrides the subproblem tolerance.
    ///
    /// ```
    /// use decon_core::Tolerances;
    /// let mut t = Tolerances::default();
    /// t.apply_overrides("subproblem=1e-12, contraction_slack=1e-6").unwrap();
    /// assert_eq!(t.subproblem, 1e-12);
    /// t.apply_overrides("3e-12").unwrap();
    /// assert_eq!(t.subproblem, 3e-12);
    /// ```
    pub fn apply_overrides(&mut self, spec: &str) -> Result<()> {
        let items: Vec<&str> = spec
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let mut next = *self;
        if items.len() == 1 && !items[0].contains('=') {
            next.subproblem = parse_positive("subproblem", items[0])?;
            *self = next;
            return Ok(());
        }
        for item in items {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| invalid("tolerance", format!("expected key=value, got {item:?}")))?;
            let slot = match key.trim() {
                "jacobi" => &mut next.jacobi,
                "zero_eig" => &mut next.zero_eig,
                "symmetry" => &mut next.symmetry,
                "subproblem" => &mut next.subproblem,
                "consistency" => &mut next.consistency,
                "spectral" => &mut next.spectral,
                "contraction_slack" => &mut next.contraction_slack,
                "search" => &mut next.search,
                other => return Err(invalid("tolerance", format!("unknown key {other:?}"))),
            };
            *slot = parse_positive("tolerance", value)?;
        }
        *self = next;
        Ok(())
    }

    /// Defaults with the `DECON_OPT_TOL` overrides applied, when the variable is set.
    pub fn from_env() -> Result<Self> {
        let mut tol = Self::default();
        if let Ok(spec) = std::env::var(TOLERANCE_ENV) {
            tol.apply_overrides(&spec)?;
        }
        Ok(tol)
    }
}

fn parse_positive(name: &'static str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| invalid(name, format!("not a number: {s:?}")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(v)
}
