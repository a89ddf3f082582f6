use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    dadmm_init_with_alpha, dadmm_matrix_step, dadmm_step, full_admm_init, full_admm_step,
    general_dadmm_step, mm_exact_step, mm_init, pextra_step, AdmmParams, AdmmState, FullAdmmState,
    GeneralUv, MmApprox, MmState, PextraParams, PextraState,
};
use crate::error::{invalid, Error, Result};
use crate::netgraph::{incidence_operators, NetworkGraph};
use crate::objective::ObjectiveComponent;

/// Selectable iterate engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dadmm,
    DadmmMatrix,
    FullAdmm,
    MmExact,
    MmApprox,
    Pextra,
    General,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Dadmm,
        Algorithm::DadmmMatrix,
        Algorithm::FullAdmm,
        Algorithm::MmExact,
        Algorithm::MmApprox,
        Algorithm::Pextra,
        Algorithm::General,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dadmm => "dadmm",
            Algorithm::DadmmMatrix => "dadmm-matrix",
            Algorithm::FullAdmm => "full-admm",
            Algorithm::MmExact => "mm-exact",
            Algorithm::MmApprox => "mm-approx",
            Algorithm::Pextra => "pextra",
            Algorithm::General => "general",
        }
    }

    /// Whether every update only uses data from the agent and its neighbors.
    pub fn is_distributed(self) -> bool {
        !matches!(self, Algorithm::DadmmMatrix | Algorithm::MmExact)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| invalid("algorithm", format!("unknown algorithm {s:?}")))
    }
}

/// Iterate in D-ADMM coordinates: primal `x` and the dual `φ` every engine
/// maps onto (`E_oᵀα`, `√η E_oᵀν`, or `−s/ξ` for P-EXTRA).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub x: DVector<f64>,
    pub phi: DVector<f64>,
}

/// Starting point and algorithm-specific settings.
#[derive(Debug, Clone)]
pub struct EngineSetup {
    pub x0: DVector<f64>,
    /// `α⁰ ∈ range(E_o)`, length `m·p`.
    pub alpha0: DVector<f64>,
    /// P-EXTRA step size.
    pub xi: Option<f64>,
    /// Majorizer weight of the approximated method of multipliers; `1/ρ` if unset.
    pub epsilon: Option<f64>,
    /// U/V assignment of the general form; classical if unset.
    pub uv: Option<GeneralUv>,
}

impl EngineSetup {
    /// `x⁰ = 0`, `α⁰ = 0`.
    pub fn zero(graph: &NetworkGraph) -> Self {
        Self {
            x0: DVector::zeros(graph.n() * graph.p()),
            alpha0: DVector::zeros(graph.m() * graph.p()),
            xi: None,
            epsilon: None,
            uv: None,
        }
    }
}

#[derive(Debug, Clone)]
enum State {
    Dadmm(AdmmState),
    Matrix(AdmmState),
    Full(FullAdmmState),
    Exact(MmState),
    Approx(MmState, MmApprox),
    Pextra(PextraState, PextraParams),
    General(AdmmState, GeneralUv),
}

/// Uniform `init / step / snapshot` interface over the engines.
///
/// All engines start from the same `(x⁰, α⁰)`, so runs with matching
/// parameters produce the same x-sequence.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    algorithm: Algorithm,
    graph: &'a NetworkGraph,
    components: &'a [ObjectiveComponent],
    params: AdmmParams,
    state: State,
}

impl<'a> Engine<'a> {
    pub fn new(
        algorithm: Algorithm,
        graph: &'a NetworkGraph,
        components: &'a [ObjectiveComponent],
        params: AdmmParams,
        setup: EngineSetup,
    ) -> Result<Self> {
        params.check(graph)?;
        let eta = params.eta();
        let admm = dadmm_init_with_alpha(graph, setup.x0.clone(), &setup.alpha0)?;
        let state = match algorithm {
            Algorithm::Dadmm => State::Dadmm(admm),
            Algorithm::DadmmMatrix => State::Matrix(admm),
            Algorithm::FullAdmm => {
                State::Full(full_admm_init(graph, setup.x0, Some(&setup.alpha0))?)
            }
            Algorithm::MmExact => {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(Error::EtaOutOfRange(eta));
                }
                State::Exact(mm_init(
                    graph,
                    setup.x0,
                    Some(&(&setup.alpha0 / eta.sqrt())),
                )?)
            }
            Algorithm::MmApprox => {
                let eps = setup.epsilon.unwrap_or(1.0 / params.rho());
                let approx = MmApprox::new(graph, &params, eps)?;
                State::Approx(
                    mm_init(graph, setup.x0, Some(&(&setup.alpha0 / eta.sqrt())))?,
                    approx,
                )
            }
            Algorithm::Pextra => {
                let xi = setup
                    .xi
                    .ok_or_else(|| invalid("xi", "P-EXTRA needs a step size"))?;
                let pex = PextraParams::new(graph, xi, params.rho(), eta)?.with_tol(params.tol());
                State::Pextra(PextraState::from_admm(&admm, xi), pex)
            }
            Algorithm::General => {
                let uv = match setup.uv {
                    Some(uv) => uv,
                    None => GeneralUv::classical(graph)?,
                };
                State::General(admm, uv)
            }
        };
        Ok(Self {
            algorithm,
            graph,
            components,
            params,
            state,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn params(&self) -> &AdmmParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        match &self.state {
            State::Dadmm(s) | State::Matrix(s) | State::General(s, _) => s.k,
            State::Full(s) => s.k,
            State::Exact(s) | State::Approx(s, _) => s.k,
            State::Pextra(s, _) => s.k,
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let (g, f, prm) = (self.graph, self.components, &self.params);
        self.state = match &self.state {
            State::Dadmm(s) => State::Dadmm(dadmm_step(s, g, f, prm)?),
            State::Matrix(s) => State::Matrix(dadmm_matrix_step(s, g, f, prm)?),
            State::Full(s) => State::Full(full_admm_step(s, g, f, prm)?),
            State::Exact(s) => State::Exact(mm_exact_step(s, g, f, prm)?),
            State::Approx(s, a) => State::Approx(a.step(s, g, f, prm)?, a.clone()),
            State::Pextra(s, pp) => State::Pextra(pextra_step(s, g, f, pp)?, pp.clone()),
            State::General(s, uv) => {
                State::General(general_dadmm_step(s, g, uv, f, prm)?, uv.clone())
            }
        };
        Ok(())
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        let eo = || incidence_operators(self.graph).oriented;
        let (k, x, phi) = match &self.state {
            State::Dadmm(s) | State::Matrix(s) | State::General(s, _) => {
                (s.k, s.x.clone(), s.phi.clone())
            }
            State::Full(s) => (s.k, s.x.clone(), eo().apply_transpose(&s.alpha())?),
            State::Exact(s) | State::Approx(s, _) => (
                s.k,
                s.x.clone(),
                eo().apply_transpose(&s.nu)? * self.params.eta().sqrt(),
            ),
            State::Pextra(s, pp) => (s.k, s.x.clone(), s.equivalent_dual(pp.xi())),
        };
        Ok(Snapshot { k, x, phi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_graph, topology};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("admm".parse::<Algorithm>().is_err());
    }

    #[test]
    fn all_engines_share_the_x_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (n, p) = (5, 2);
        let g = build_graph(n, &topology::ring_with_chords(n, 1, &mut rng), p).unwrap();
        let comps: Vec<_> = (0..n)
            .map(|_| {
                let h = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
                ObjectiveComponent::rank_one(h, StandardNormal.sample(&mut rng)).unwrap()
            })
            .collect();
        let rho = 1.0;
        let xi = 1.0 / (rho * g.degree_diag().max());
        let params = AdmmParams::pextra_equivalent(&g, xi, rho, 0.6).unwrap();
        let mut setup = EngineSetup::zero(&g);
        setup.xi = Some(xi);
        setup.alpha0 = crate::solvers::random_dual(&g, 5).unwrap();
        let mut engines: Vec<Engine> = [
            Algorithm::Dadmm,
            Algorithm::DadmmMatrix,
            Algorithm::FullAdmm,
            Algorithm::MmApprox,
            Algorithm::Pextra,
            Algorithm::General,
        ]
        .into_iter()
        .map(|a| Engine::new(a, &g, &comps, params.clone(), setup.clone()).unwrap())
        .collect();
        for _ in 0..50 {
            for e in engines.iter_mut() {
                e.step().unwrap();
            }
            let base = engines[0].snapshot().unwrap();
            for e in &engines[1..] {
                let s = e.snapshot().unwrap();
                assert!((&s.x - &base.x).amax() <= 1e-9, "{}", e.algorithm());
                assert!((&s.phi - &base.phi).amax() <= 1e-8, "{}", e.algorithm());
            }
        }
    }
}
