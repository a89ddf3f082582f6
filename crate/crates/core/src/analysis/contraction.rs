use std::fmt;

use nalgebra::DVector;

use super::certificate::RateCertificate;
use super::reference::{DualRecovery, ReferenceSolution};
use crate::error::{Error, Result};
use crate::netgraph::NetworkGraph;
use crate::solvers::Snapshot;
use crate::tolerances::Tolerances;

/// Which distance the contraction is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceNorm {
    #[default]
    /// `u = (α, x)` in the H semi-norm, factor `1/(1+δ)`.
    H,
    /// `v = (α, ½E_u x)` in the G norm, factor `1/(1+δ_ADMM)`; `P = 0` only.
    G,
}

impl fmt::Display for DistanceNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceNorm::H => "H",
            DistanceNorm::G => "G",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub k: usize,
    pub ratio: f64,
    pub distance: f64,
    pub allowed: f64,
}

/// Outcome of checking `d_{k+1} ≤ d_k/(1+δ) + slack` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub norm: DistanceNorm,
    pub bound: f64,
    pub slack: f64,
    /// Squared distances to the optimum, one per iterate.
    pub distances: Vec<f64>,
    /// Largest `d_{k+1}/d_k` over steps with `d_k` above the slack.
    pub worst_ratio: f64,
    pub violations: Vec<Violation>,
}

impl ContractionReport {
    pub fn is_contracting(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }

    pub fn ensure_contracting(&self) -> Result<()> {
        match self.first_violation() {
            None => Ok(()),
            Some(v) => Err(Error::ContractionViolated {
                k: v.k,
                ratio: v.ratio,
                bound: self.bound,
            }),
        }
    }
}

/// Incremental contraction checker fed one snapshot at a time.
#[derive(Debug, Clone)]
pub struct ContractionMonitor<'a> {
    recovery: DualRecovery,
    reference: &'a ReferenceSolution,
    cert: &'a RateCertificate,
    norm: DistanceNorm,
    bound: f64,
    slack_rel: f64,
    slack: Option<f64>,
    distances: Vec<f64>,
    worst_ratio: f64,
    violations: Vec<Violation>,
}

impl<'a> ContractionMonitor<'a> {
    pub fn new(
        graph: &NetworkGraph,
        reference: &'a ReferenceSolution,
        cert: &'a RateCertificate,
        norm: DistanceNorm,
        tol: &Tolerances,
    ) -> Result<Self> {
        let bound = match norm {
            DistanceNorm::H => cert.bound(),
            DistanceNorm::G => cert
                .bound_admm()
                .ok_or_else(|| Error::CertificateUnavailable("G-norm bound needs P = 0".into()))?,
        };
        Ok(Self {
            recovery: DualRecovery::new(graph, tol)?,
            reference,
            cert,
            norm,
            bound,
            slack_rel: tol.contraction_slack,
            slack: None,
            distances: Vec::new(),
            worst_ratio: 0.0,
            violations: Vec::new(),
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Squared distance of `(x, φ)` to the optimum in the chosen norm.
    pub fn distance(&self, x: &DVector<f64>, phi: &DVector<f64>) -> Result<f64> {
        let alpha = self.recovery.alpha_from_phi(phi)?;
        let da = alpha - &self.reference.alpha_star;
        let dx = x - &self.reference.x_star;
        match self.norm {
            DistanceNorm::H => self.cert.h_dist_sq(&da, &dx),
            DistanceNorm::G => self.cert.g_dist_sq(&da, &dx),
        }
    }

    /// Records the next iterate; returns its squared distance and the ratio to
    /// the previous one (`None` for the first iterate or a zero predecessor).
    pub fn push(
        &mut self,
        k: usize,
        x: &DVector<f64>,
        phi: &DVector<f64>,
    ) -> Result<(f64, Option<f64>)> {
        let d = self.distance(x, phi)?;
        let slack = *self.slack.get_or_insert(self.slack_rel * (1.0 + d));
        let ratio = match self.distances.last() {
            None => None,
            Some(&prev) => {
                let ratio = if prev > 0.0 { Some(d / prev) } else { None };
                if prev > slack {
                    if let Some(r) = ratio {
                        self.worst_ratio = self.worst_ratio.max(r);
                    }
                }
                let allowed = self.bound * prev + slack;
                if d > allowed {
                    self.violations.push(Violation {
                        k,
                        ratio: ratio.unwrap_or(f64::INFINITY),
                        distance: d,
                        allowed,
                    });
                }
                ratio
            }
        };
        self.distances.push(d);
        Ok((d, ratio))
    }

    pub fn report(&self) -> ContractionReport {
        ContractionReport {
            norm: self.norm,
            bound: self.bound,
            slack: self.slack.unwrap_or(self.slack_rel),
            distances: self.distances.clone(),
            worst_ratio: self.worst_ratio,
            violations: self.violations.clone(),
        }
    }
}

/// Checks the contraction inequality along a recorded trajectory.
pub fn verify_contraction(
    graph: &NetworkGraph,
    trace: &[Snapshot],
    reference: &ReferenceSolution,
    cert: &RateCertificate,
    norm: DistanceNorm,
    tol: &Tolerances,
) -> Result<ContractionReport> {
    let mut mon = ContractionMonitor::new(graph, reference, cert, norm, tol)?;
    for s in trace {
        mon.push(s.k, &s.x, &s.phi)?;
    }
    Ok(mon.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{rate_certificate, reference_solution};
    use crate::netgraph::{build_graph, topology};
    use crate::objective::{sum_profile, ObjectiveComponent};
    use crate::solvers::{AdmmParams, Algorithm, Engine, EngineSetup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn least_squares(n: usize, p: usize, seed: u64) -> (NetworkGraph, Vec<ObjectiveComponent>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = build_graph(n, &topology::ring(n), p).unwrap();
        let comps = (0..n)
            .map(|_| {
                let h = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
                ObjectiveComponent::rank_one(h, StandardNormal.sample(&mut rng)).unwrap()
            })
            .collect();
        (g, comps)
    }

    #[test]
    fn ring_run_contracts_in_both_norms() {
        let (g, comps) = least_squares(5, 2, 1);
        let prof = sum_profile(&comps, &g).unwrap();
        let tol = Tolerances::default();
        for (pi, norm) in [
            (0.1, DistanceNorm::H),
            (0.0, DistanceNorm::G),
            (0.0, DistanceNorm::H),
        ] {
            let params = AdmmParams::uniform(5, 1.0, 0.5, pi).unwrap();
            let cert = rate_certificate(&g, &prof, &params).unwrap();
            let reference = reference_solution(&g, &comps, 0.5).unwrap();
            let mut e =
                Engine::new(Algorithm::Dadmm, &g, &comps, params, EngineSetup::zero(&g)).unwrap();
            let mut trace = vec![e.snapshot().unwrap()];
            for _ in 0..300 {
                e.step().unwrap();
                trace.push(e.snapshot().unwrap());
            }
            let rep = verify_contraction(&g, &trace, &reference, &cert, norm, &tol).unwrap();
            assert!(rep.is_contracting(), "{norm}: {:?}", rep.first_violation());
            assert!(rep.worst_ratio < rep.bound);
        }
    }

    #[test]
    fn starting_at_the_optimum_stays_within_slack() {
        let (g, comps) = least_squares(4, 1, 2);
        let prof = sum_profile(&comps, &g).unwrap();
        let params = AdmmParams::uniform(4, 2.0, 0.3, 0.0).unwrap();
        let cert = rate_certificate(&g, &prof, &params).unwrap();
        let reference = reference_solution(&g, &comps, 0.3).unwrap();
        let setup = EngineSetup {
            x0: reference.x_star.clone(),
            alpha0: reference.alpha_star.clone(),
            ..EngineSetup::zero(&g)
        };
        let mut e = Engine::new(Algorithm::Dadmm, &g, &comps, params, setup).unwrap();
        let mut trace = vec![e.snapshot().unwrap()];
        for _ in 0..20 {
            e.step().unwrap();
            trace.push(e.snapshot().unwrap());
        }
        let rep = verify_contraction(
            &g,
            &trace,
            &reference,
            &cert,
            DistanceNorm::H,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(rep.distances.iter().all(|&d| d <= rep.slack));
        assert!(rep.ensure_contracting().is_ok());
    }
}
