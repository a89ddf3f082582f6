//! Synchronous simulated network. Each agent owns its component, its
//! local iterates and an inbox of the latest neighbor messages; rounds run
//! local solves, a broadcast along every arc, and the dual updates, with a
//! barrier between phases.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::denselin::{sym_eigen, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::netgraph::topology::Topology;
use crate::netgraph::{build_graph, NetworkGraph};
use crate::objective::{check_graph, ObjectiveComponent};
use crate::solvers::{
    closed_neighborhood, general_local_solve, kernel, pextra_local_solve, AdmmParams, AdmmState,
    AgentLocal, GeneralUv, PextraParams, PextraState,
};

/// Which update rule the agents run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Dadmm,
    Pextra,
    General,
}

/// Per-agent constants of the update rule. Rows hold `(neighbor id, weight)`
/// over the closed neighborhood, ascending.
#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Dadmm {
        rho: f64,
        eta: f64,
        d: f64,
        pi: f64,
    },
    Pextra {
        xi: f64,
        w_row: Vec<(usize, f64)>,
        diff_row: Vec<(usize, f64)>,
    },
    General {
        rho: f64,
        eta: f64,
        dbar: f64,
        pi: f64,
        u_row: Vec<(usize, f64)>,
        v_row: Vec<(usize, f64)>,
    },
}

/// One agent's private view: its component, its iterates and the latest
/// `x_j` received from each neighbor. It holds no reference to other
/// agents or to global vectors.
#[derive(Debug, Clone)]
pub struct AgentBox {
    id: usize,
    component: ObjectiveComponent,
    x: DVector<f64>,
    /// `φ_i` for D-ADMM and the general form, the running-sum block `s_i` for P-EXTRA.
    dual: DVector<f64>,
    rule: Rule,
    tol: f64,
    inbox: BTreeMap<usize, DVector<f64>>,
    pending: Option<DVector<f64>>,
}

impl AgentBox {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    /// `φ_i`, or `s_i` under P-EXTRA.
    pub fn dual(&self) -> &DVector<f64> {
        &self.dual
    }

    pub fn inbox(&self) -> &BTreeMap<usize, DVector<f64>> {
        &self.inbox
    }

    /// Overwrites the local iterates (fault injection in tests).
    pub fn set_state(&mut self, x: DVector<f64>, dual: DVector<f64>) -> Result<()> {
        if x.len() != self.x.len() || dual.len() != self.dual.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                got: x.len(),
            });
        }
        self.x = x;
        self.dual = dual;
        Ok(())
    }

    /// `x_j` for `j` in the closed neighborhood, own value included.
    fn closed_value<'a>(&'a self, j: usize, own: &'a DVector<f64>) -> &'a [f64] {
        if j == self.id {
            own.as_slice()
        } else {
            self.inbox[&j].as_slice()
        }
    }

    /// Phase 1: local subproblem from own data and the inbox.
    fn solve(&self) -> Result<(DVector<f64>, usize)> {
        let sol = match &self.rule {
            Rule::Dadmm { rho, d, pi, .. } => {
                let local = AgentLocal {
                    component: &self.component,
                    x_i: self.x.as_slice(),
                    phi_i: self.dual.as_slice(),
                    d_i: *d,
                    pi_i: *pi,
                };
                local.solve(self.inbox.values().map(|v| v.as_slice()), *rho, self.tol)?
            }
            Rule::Pextra { xi, w_row, .. } => {
                let terms = w_row
                    .iter()
                    .map(|&(j, w)| (w, self.closed_value(j, &self.x)));
                pextra_local_solve(
                    &self.component,
                    self.dual.as_slice(),
                    self.x.as_slice(),
                    terms,
                    *xi,
                    self.tol,
                )?
            }
            Rule::General {
                rho,
                dbar,
                pi,
                u_row,
                ..
            } => {
                let terms = u_row
                    .iter()
                    .map(|&(j, w)| (w, self.closed_value(j, &self.x)));
                general_local_solve(
                    &self.component,
                    self.dual.as_slice(),
                    self.x.as_slice(),
                    terms,
                    *rho,
                    *dbar,
                    *pi,
                    self.tol,
                )?
            }
        };
        Ok((sol.x, sol.iterations))
    }

    /// Phase 3: dual or running-sum update from the new iterate and the refreshed inbox.
    fn update_dual(&mut self) {
        let x_new = self.pending.take().expect("phase 1 ran");
        let dual = match &self.rule {
            Rule::Dadmm { rho, eta, .. } => kernel::dadmm_dual_update(
                self.dual.as_slice(),
                x_new.as_slice(),
                self.inbox.values().map(|v| v.as_slice()),
                *eta,
                *rho,
            ),
            Rule::Pextra { diff_row, .. } => {
                let terms = diff_row
                    .iter()
                    .map(|&(j, w)| (w, self.closed_value(j, &x_new)));
                kernel::weighted_update(self.dual.as_slice(), 1.0, terms)
            }
            Rule::General {
                rho, eta, v_row, ..
            } => {
                let terms = v_row
                    .iter()
                    .map(|&(j, w)| (w, self.closed_value(j, &x_new)));
                kernel::weighted_update(self.dual.as_slice(), eta * rho / 2.0, terms)
            }
        };
        self.x = x_new;
        self.dual = dual;
    }
}

/// Bookkeeping of one synchronous round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    /// Index of the iterate produced by the round (1 for the first round).
    pub round: usize,
    pub messages: usize,
    /// Total scalars sent, `messages · p`.
    pub payload_scalars: usize,
    pub subproblem_iterations: Vec<usize>,
    pub wall_time: Duration,
}

impl RoundLog {
    /// Equality of everything except the wall time.
    pub fn same_work(&self, other: &RoundLog) -> bool {
        self.round == other.round
            && self.messages == other.messages
            && self.payload_scalars == other.payload_scalars
            && self.subproblem_iterations == other.subproblem_iterations
    }
}

/// What the observer sees after each round (and once for the initial state).
#[derive(Debug)]
pub struct Observation<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    /// Dual in D-ADMM coordinates; `−s/ξ` under P-EXTRA.
    pub phi: &'a DVector<f64>,
    /// `None` for the initial state.
    pub log: Option<&'a RoundLog>,
}

/// A set of agents wired along a graph.
#[derive(Debug, Clone)]
pub struct Network {
    graph: NetworkGraph,
    protocol: Protocol,
    agents: Vec<AgentBox>,
    k: usize,
    pextra_xi: Option<f64>,
}

fn row(m: &DMatrix<f64>, graph: &NetworkGraph, i: usize) -> Vec<(usize, f64)> {
    closed_neighborhood(graph, i)
        .into_iter()
        .map(|j| (j, m[(i, j)]))
        .collect()
}

fn block(x: &DVector<f64>, i: usize, p: usize) -> DVector<f64> {
    x.rows(i * p, p).into_owned()
}

impl Network {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        graph: &NetworkGraph,
        components: &[ObjectiveComponent],
        protocol: Protocol,
        x0: &DVector<f64>,
        dual0: &DVector<f64>,
        tol: f64,
        rules: Vec<Rule>,
        pextra_xi: Option<f64>,
    ) -> Result<Self> {
        check_graph(components, graph)?;
        let p = graph.p();
        for v in [x0, dual0] {
            if v.len() != graph.n() * p {
                return Err(Error::DimensionMismatch {
                    expected: graph.n() * p,
                    got: v.len(),
                });
            }
        }
        let agents = rules
            .into_iter()
            .enumerate()
            .map(|(i, rule)| AgentBox {
                id: i,
                component: components[i].clone(),
                x: block(x0, i, p),
                dual: block(dual0, i, p),
                rule,
                tol,
                inbox: BTreeMap::new(),
                pending: None,
            })
            .collect();
        let mut net = Self {
            graph: graph.clone(),
            protocol,
            agents,
            k: 0,
            pextra_xi,
        };
        // initial exchange so every inbox holds x_j⁰
        net.broadcast(|a| a.x.clone());
        Ok(net)
    }

    /// D-ADMM agents starting from `(x, φ)`.
    pub fn dadmm(
        graph: &NetworkGraph,
        components: &[ObjectiveComponent],
        params: &AdmmParams,
        start: &AdmmState,
    ) -> Result<Self> {
        check_params(graph, params)?;
        let d = graph.degree_diag();
        let rules = (0..graph.n())
            .map(|i| Rule::Dadmm {
                rho: params.rho(),
                eta: params.eta(),
                d: d[i],
                pi: params.pi()[i],
            })
            .collect();
        let mut net = Self::assemble(
            graph,
            components,
            Protocol::Dadmm,
            &start.x,
            &start.phi,
            params.tol(),
            rules,
            None,
        )?;
        net.k = start.k;
        Ok(net)
    }

    /// P-EXTRA agents starting from `(x, s)`.
    pub fn pextra(
        graph: &NetworkGraph,
        components: &[ObjectiveComponent],
        params: &PextraParams,
        start: &PextraState,
    ) -> Result<Self> {
        if params.w().order() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: params.w().order(),
            });
        }
        let rules = (0..graph.n())
            .map(|i| Rule::Pextra {
                xi: params.xi(),
                w_row: row(params.w().as_matrix(), graph, i),
                diff_row: row(params.difference(), graph, i),
            })
            .collect();
        let mut net = Self::assemble(
            graph,
            components,
            Protocol::Pextra,
            &start.x,
            &start.s,
            params.tol(),
            rules,
            Some(params.xi()),
        )?;
        net.k = start.k;
        Ok(net)
    }

    /// General U/V agents starting from `(x, φ)`.
    pub fn general(
        graph: &NetworkGraph,
        components: &[ObjectiveComponent],
        uv: &GeneralUv,
        params: &AdmmParams,
        start: &AdmmState,
    ) -> Result<Self> {
        check_params(graph, params)?;
        let rules = (0..graph.n())
            .map(|i| Rule::General {
                rho: params.rho(),
                eta: params.eta(),
                dbar: uv.dbar()[i],
                pi: params.pi()[i],
                u_row: row(uv.u(), graph, i),
                v_row: row(uv.v(), graph, i),
            })
            .collect();
        let mut net = Self::assemble(
            graph,
            components,
            Protocol::General,
            &start.x,
            &start.phi,
            params.tol(),
            rules,
            None,
        )?;
        net.k = start.k;
        Ok(net)
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn round(&self) -> usize {
        self.k
    }

    pub fn agents(&self) -> &[AgentBox] {
        &self.agents
    }

    pub fn agent_mut(&mut self, i: usize) -> &mut AgentBox {
        &mut self.agents[i]
    }

    pub fn stacked_x(&self) -> DVector<f64> {
        stack(self.agents.iter().map(|a| &a.x), self.graph.p())
    }

    /// Local duals as stored (`φ` or `s`).
    pub fn stacked_dual(&self) -> DVector<f64> {
        stack(self.agents.iter().map(|a| &a.dual), self.graph.p())
    }

    /// Dual in D-ADMM coordinates.
    pub fn stacked_phi(&self) -> DVector<f64> {
        let dual = self.stacked_dual();
        match self.pextra_xi {
            Some(xi) => dual / -xi,
            None => dual,
        }
    }

    /// Delivers one message per arc: the sender's value lands in the
    /// receiver's inbox. Returns the message count.
    fn broadcast(&mut self, value: impl Fn(&AgentBox) -> DVector<f64>) -> usize {
        let outgoing: Vec<DVector<f64>> = self.agents.iter().map(&value).collect();
        let mut count = 0;
        for arc in self.graph.arcs() {
            self.agents[arc.dest]
                .inbox
                .insert(arc.source, outgoing[arc.source].clone());
            count += 1;
        }
        count
    }

    /// Runs one synchronous round.
    pub fn step(&mut self) -> Result<RoundLog> {
        let start = Instant::now();
        let round = self.k + 1;
        let solved: Vec<(DVector<f64>, usize)> = self
            .agents
            .par_iter()
            .map(|a| {
                a.solve().map_err(|e| Error::AgentFailure {
                    round,
                    agent: a.id,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        let mut iterations = Vec::with_capacity(solved.len());
        for (agent, (x, it)) in self.agents.iter_mut().zip(solved) {
            agent.pending = Some(x);
            iterations.push(it);
        }
        let messages = self.broadcast(|a| a.pending.clone().expect("phase 1 ran"));
        self.agents.par_iter_mut().for_each(|a| a.update_dual());
        self.k = round;
        Ok(RoundLog {
            round,
            messages,
            payload_scalars: messages * self.graph.p(),
            subproblem_iterations: iterations,
            wall_time: start.elapsed(),
        })
    }

    /// Runs `rounds` rounds, calling `observer` on the initial state and after every round.
    pub fn run_rounds(
        &mut self,
        rounds: usize,
        mut observer: impl FnMut(&Observation<'_>) -> Result<()>,
    ) -> Result<Vec<RoundLog>> {
        let (x, phi) = (self.stacked_x(), self.stacked_phi());
        observer(&Observation {
            k: self.k,
            x: &x,
            phi: &phi,
            log: None,
        })?;
        let mut logs = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let log = self.step()?;
            let (x, phi) = (self.stacked_x(), self.stacked_phi());
            observer(&Observation {
                k: self.k,
                x: &x,
                phi: &phi,
                log: Some(&log),
            })?;
            logs.push(log);
        }
        Ok(logs)
    }
}

/// Runs `rounds` synchronous rounds on `network`; see [`Network::run_rounds`].
pub fn run_rounds(
    network: &mut Network,
    rounds: usize,
    observer: impl FnMut(&Observation<'_>) -> Result<()>,
) -> Result<Vec<RoundLog>> {
    network.run_rounds(rounds, observer)
}

fn check_params(graph: &NetworkGraph, params: &AdmmParams) -> Result<()> {
    if params.pi().len() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: params.pi().len(),
        });
    }
    Ok(())
}

fn stack<'a>(blocks: impl Iterator<Item = &'a DVector<f64>>, p: usize) -> DVector<f64> {
    let blocks: Vec<&DVector<f64>> = blocks.collect();
    let mut out = DVector::zeros(blocks.len() * p);
    for (i, b) in blocks.iter().enumerate() {
        out.rows_mut(i * p, p).copy_from(*b);
    }
    out
}

/// Distributed least-squares instance: agent `i` holds `½(h_iᵀx − y_i)²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub graph: NetworkGraph,
    pub components: Vec<ObjectiveComponent>,
    /// Rows `h_iᵀ`.
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Smallest eigenvalue accepted for `Σ h_i h_iᵀ`.
pub const MIN_SUM_CURVATURE: f64 = 0.1;

/// Least-squares preset on a ring with `n/3` random chords.
pub fn scenario_least_squares(n: usize, p: usize, seed: u64) -> Result<LeastSquares> {
    least_squares_on(Topology::RingWithChords { chords: n / 3 }, n, p, seed)
}

/// Least-squares instance on a chosen topology. `h_i` and `y_i` are
/// standard normal; `H` is redrawn until `λ_min(HᵀH) ≥ 0.1`.
pub fn least_squares_on(topology: Topology, n: usize, p: usize, seed: u64) -> Result<LeastSquares> {
    if n < 2 {
        return Err(invalid("n", "need at least two agents"));
    }
    if p == 0 {
        return Err(Error::ZeroBlockDim);
    }
    if n < p {
        return Err(invalid(
            "n",
            format!("n = {n} < p = {p}: the sum cannot be strongly convex"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = build_graph(n, &topology.edges(n, &mut rng), p)?;
    let h = loop {
        let h = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let lmin = sym_eigen(&SymMatrix::symmetrize(h.transpose() * &h), 1e-12)?.min();
        if lmin >= MIN_SUM_CURVATURE {
            break h;
        }
    };
    let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let components = (0..n)
        .map(|i| ObjectiveComponent::rank_one(h.row(i).transpose(), y[i]))
        .collect::<Result<_>>()?;
    Ok(LeastSquares {
        graph,
        components,
        h,
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::sum_profile;
    use crate::solvers::{
        dadmm_init, dadmm_step, general_dadmm_step, pextra_init, pextra_step, DualInit,
    };

    #[test]
    fn dadmm_rounds_match_solver_bit_for_bit() {
        let ls = scenario_least_squares(7, 2, 3).unwrap();
        let params = AdmmParams::uniform(7, 1.1, 0.7, 0.05).unwrap();
        let start = dadmm_init(
            &ls.graph,
            DVector::zeros(14),
            DualInit::RandomInColspace { seed: 1 },
        )
        .unwrap();
        let mut net = Network::dadmm(&ls.graph, &ls.components, &params, &start).unwrap();
        let mut state = start;
        let mut rounds = 0;
        net.run_rounds(40, |obs| {
            assert_eq!(obs.k, state.k);
            assert_eq!(obs.x, &state.x);
            assert_eq!(obs.phi, &state.phi);
            state = dadmm_step(&state, &ls.graph, &ls.components, &params)?;
            rounds += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(rounds, 41);
    }

    #[test]
    fn pextra_and_general_match_solvers_bit_for_bit() {
        let ls = scenario_least_squares(6, 2, 4).unwrap();
        let pex = PextraParams::new(&ls.graph, 0.05, 1.0, 0.6).unwrap();
        let mut ps = pextra_init(&ls.graph, &pex, DVector::from_element(12, 0.3)).unwrap();
        let mut net = Network::pextra(&ls.graph, &ls.components, &pex, &ps).unwrap();
        for _ in 0..30 {
            net.step().unwrap();
            ps = pextra_step(&ps, &ls.graph, &ls.components, &pex).unwrap();
            assert_eq!(net.stacked_x(), ps.x);
            assert_eq!(net.stacked_dual(), ps.s);
        }

        let uv = GeneralUv::classical(&ls.graph).unwrap();
        let params = AdmmParams::uniform(6, 0.8, 0.9, 0.0).unwrap();
        let mut gs = dadmm_init(&ls.graph, DVector::zeros(12), DualInit::Zero).unwrap();
        let mut net = Network::general(&ls.graph, &ls.components, &uv, &params, &gs).unwrap();
        for _ in 0..30 {
            net.step().unwrap();
            gs = general_dadmm_step(&gs, &ls.graph, &uv, &ls.components, &params).unwrap();
            assert_eq!(net.stacked_x(), gs.x);
            assert_eq!(net.stacked_phi(), gs.phi);
        }
    }

    #[test]
    fn one_message_per_arc() {
        let g = build_graph(3, &[(0, 1), (1, 2)], 2).unwrap();
        let comps: Vec<_> = (0..3)
            .map(|i| {
                ObjectiveComponent::rank_one(DVector::from_column_slice(&[1.0, i as f64]), 1.0)
                    .unwrap()
            })
            .collect();
        let params = AdmmParams::uniform(3, 1.0, 0.5, 0.1).unwrap();
        let start = dadmm_init(&g, DVector::zeros(6), DualInit::Zero).unwrap();
        let mut net = Network::dadmm(&g, &comps, &params, &start).unwrap();
        let log = net.step().unwrap();
        assert_eq!(log.messages, 4);
        assert_eq!(log.payload_scalars, 8);
        assert_eq!(log.subproblem_iterations, vec![1, 1, 1]);
    }

    #[test]
    fn zero_rounds_leave_state_untouched() {
        let ls = scenario_least_squares(4, 1, 5).unwrap();
        let params = AdmmParams::uniform(4, 1.0, 0.5, 0.0).unwrap();
        let start = dadmm_init(&ls.graph, DVector::from_element(4, 2.0), DualInit::Zero).unwrap();
        let mut net = Network::dadmm(&ls.graph, &ls.components, &params, &start).unwrap();
        let logs = net.run_rounds(0, |_| Ok(())).unwrap();
        assert!(logs.is_empty());
        assert_eq!(net.stacked_x(), start.x);
        assert_eq!(net.stacked_phi(), start.phi);
    }

    #[test]
    fn presets_are_reproducible_and_strongly_convex() {
        let a = scenario_least_squares(8, 3, 11).unwrap();
        let b = scenario_least_squares(8, 3, 11).unwrap();
        assert_eq!(a.h, b.h);
        assert_eq!(a.y, b.y);
        assert_eq!(a.graph, b.graph);
        assert!(sum_profile(&a.components, &a.graph).is_ok());
        for c in &a.components {
            let (q, _) = c.quadratic_parts().unwrap();
            assert!(
                sym_eigen(&SymMatrix::symmetrize(q), 1e-12)
                    .unwrap()
                    .min()
                    .abs()
                    < 1e-12
            );
        }
        assert!(scenario_least_squares(2, 3, 0).is_err());
    }

    #[test]
    fn failing_agent_reports_round_and_id() {
        let g = build_graph(2, &[(0, 1)], 1).unwrap();
        let zero = ObjectiveComponent::quadratic(SymMatrix::zeros(1), DVector::zeros(1)).unwrap();
        // π = 0 and a = ρd > 0 keep the subproblem well posed, so break it through a NaN iterate
        let params = AdmmParams::uniform(2, 1.0, 0.5, 0.0).unwrap();
        let start = dadmm_init(&g, DVector::zeros(2), DualInit::Zero).unwrap();
        let mut net = Network::dadmm(&g, &[zero.clone(), zero], &params, &start).unwrap();
        net.agent_mut(1)
            .set_state(DVector::from_element(1, f64::NAN), DVector::zeros(1))
            .unwrap();
        match net.step() {
            Err(Error::AgentFailure {
                round: 1, agent: 1, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
