//! Experiment configuration, runs and report files.
//!
//! A configuration is a TOML document with the sections `[scenario]`,
//! `[solver]`, `[analysis]`, `[tolerances]` and `[output]`; every key is
//! optional except where a solver needs it. See the repository README for
//! the full key list.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    rate_certificate_with, reference_solution, ContractionMonitor, ContractionReport, DistanceNorm,
    RateCertificate, ReferenceSolution,
};
use crate::error::Error;
use crate::harness::{least_squares_on, LeastSquares, Network};
use crate::netgraph::topology::Topology;
use crate::netgraph::{build_graph, consensuality_residual, NetworkGraph};
use crate::objective::{eval_f, sum_profile, ObjectiveComponent};
use crate::solvers::{
    dadmm_init, random_dual, AdmmParams, AdmmState, Algorithm, DualInit, Engine, EngineSetup,
    GeneralUv, PextraParams, PextraState, ETA_MAX,
};
use crate::tolerances::Tolerances;

/// Largest instance a config may request.
pub const MAX_AGENTS: usize = 500;
pub const MAX_BLOCK_DIM: usize = 50;
pub const MAX_ROUNDS: usize = 1_000_000;

/// Exact CSV header of a trace file.
pub const TRACE_HEADER: &str =
    "k,obj_err,consensus_resid,u_dist_H_sq,contraction_ratio,delta_bound,messages";
pub const COMPARE_HEADER: &str = "k,max_abs_dx";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl ExperimentError {
    /// Process exit code for a failed run.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

fn bad(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// Problem instance families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Least squares on a ring with `n/3` random chords.
    #[default]
    LsRing,
    /// Least squares on a plain cycle.
    LsCycle,
    LsPath,
    LsComplete,
    /// Least squares on a random connected graph (spanning tree plus edges with probability 0.3).
    LsRandom,
    /// Least squares on user-supplied `edges`, `h` and `y`.
    Explicit,
}

impl Preset {
    fn topology(self, n: usize) -> Option<Topology> {
        match self {
            Preset::LsRing => Some(Topology::RingWithChords { chords: n / 3 }),
            Preset::LsCycle => Some(Topology::Ring),
            Preset::LsPath => Some(Topology::Path),
            Preset::LsComplete => Some(Topology::Complete),
            Preset::LsRandom => Some(Topology::RandomConnected { extra_prob: 0.3 }),
            Preset::Explicit => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Preset,
    /// Agents; 10 for presets when unset, `h.len()` for explicit data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Block dimension; 3 for presets when unset, `h[0].len()` for explicit data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub seed: u64,
    /// Explicit preset only: undirected edges over vertices `0..n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    /// Explicit preset only: row `i` is `h_i`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<f64>>>,
    /// Explicit preset only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

/// Proximal weights `π_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PiSetting {
    Uniform(f64),
    PerAgent(Vec<f64>),
    Rule(PiRule),
}

impl Default for PiSetting {
    fn default() -> Self {
        PiSetting::Uniform(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiRule {
    /// `π_i = 1/ξ − ρ d_i`, the weights that make D-ADMM reproduce P-EXTRA.
    #[serde(rename = "theorem2")]
    PextraEquivalent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Two algorithms run side by side; overrides `algorithm`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<Vec<Algorithm>>,
    pub rounds: usize,
    pub rho: f64,
    /// Dual step factor; 0.5 when neither `eta` nor `omega` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// P-EXTRA overshoot factor, `W̃ = I − (ξρ/2)(1−ω)L`; taken as `eta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// P-EXTRA step size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    pub pi: PiSetting,
    /// Majorizer weight of `mm-approx`; `1/ρ` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Seed of a random initial dual in `range(E_oᵀ)`; zero dual when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Dadmm,
            compare: None,
            rounds: 300,
            rho: 1.0,
            eta: None,
            omega: None,
            xi: None,
            pi: PiSetting::default(),
            epsilon: None,
            dual_seed: None,
        }
    }
}

impl SolverConfig {
    pub fn algorithms(&self) -> Vec<Algorithm> {
        match &self.compare {
            Some(list) => list.clone(),
            None => vec![self.algorithm],
        }
    }

    /// Resolved dual step factor.
    pub fn eta(&self) -> f64 {
        self.omega.or(self.eta).unwrap_or(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Check the contraction inequality every round; a violation exits with code 2.
    pub verify: bool,
    /// Norm used by the verification.
    pub norm: DistanceNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trace: String,
    pub certificate: String,
    pub compare: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trace: "trace.csv".into(),
            certificate: "certificate.txt".into(),
            compare: "compare.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ExperimentError> {
        toml::to_string(self).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// `(n, p)` the scenario will have.
    pub fn dimensions(&self) -> Result<(usize, usize), ExperimentError> {
        let sc = &self.scenario;
        if sc.preset != Preset::Explicit {
            return Ok((sc.n.unwrap_or(10), sc.p.unwrap_or(3)));
        }
        let h =
            sc.h.as_ref()
                .ok_or_else(|| bad("scenario.h is required for the explicit preset"))?;
        let n = h.len();
        let p = h.first().map_or(0, Vec::len);
        if sc.n.is_some_and(|v| v != n) {
            return Err(bad(format!(
                "scenario.n = {} but h has {n} rows",
                sc.n.unwrap()
            )));
        }
        if sc.p.is_some_and(|v| v != p) {
            return Err(bad(format!(
                "scenario.p = {} but h rows have length {p}",
                sc.p.unwrap()
            )));
        }
        Ok((n, p))
    }

    /// Checks that do not need the graph.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let (n, p) = self.dimensions()?;
        let sc = &self.scenario;
        if !(2..=MAX_AGENTS).contains(&n) {
            return Err(bad(format!("scenario.n = {n} outside [2, {MAX_AGENTS}]")));
        }
        if !(1..=MAX_BLOCK_DIM).contains(&p) {
            return Err(bad(format!(
                "scenario.p = {p} outside [1, {MAX_BLOCK_DIM}]"
            )));
        }
        if n < p {
            return Err(bad(format!(
                "scenario.n = {n} < p = {p}: the sum cannot be strongly convex"
            )));
        }
        if sc.preset == Preset::Explicit {
            let h = sc.h.as_ref().expect("checked by dimensions");
            if h.iter().any(|r| r.len() != p) {
                return Err(bad("scenario.h rows must all have the same length"));
            }
            if h.iter().flatten().any(|v| !v.is_finite()) {
                return Err(bad("scenario.h must be finite"));
            }
            let y =
                sc.y.as_ref()
                    .ok_or_else(|| bad("scenario.y is required for the explicit preset"))?;
            if y.len() != n || y.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("scenario.y must hold {n} finite values")));
            }
            if sc.edges.is_none() {
                return Err(bad("scenario.edges is required for the explicit preset"));
            }
        } else if sc.edges.is_some() || sc.h.is_some() || sc.y.is_some() {
            return Err(bad(
                "scenario.edges, h and y are only read by the explicit preset",
            ));
        }

        let s = &self.solver;
        let algs = s.algorithms();
        if let Some(list) = &s.compare {
            if list.len() != 2 || list[0] == list[1] {
                return Err(bad("solver.compare needs two distinct algorithms"));
            }
        }
        if s.rounds > MAX_ROUNDS {
            return Err(bad(format!(
                "solver.rounds = {} exceeds {MAX_ROUNDS}",
                s.rounds
            )));
        }
        if !(s.rho.is_finite() && s.rho > 0.0) {
            return Err(bad(format!("solver.rho must be positive, got {}", s.rho)));
        }
        let uses_pextra = algs.contains(&Algorithm::Pextra);
        if let Some(omega) = s.omega {
            if s.eta.is_some() {
                return Err(bad("set either solver.eta or solver.omega, not both"));
            }
            if !uses_pextra {
                return Err(bad("solver.omega only applies to pextra"));
            }
            if !(0.5..1.0).contains(&omega) {
                return Err(bad(format!("solver.omega = {omega} outside [0.5, 1)")));
            }
        }
        let eta = s.eta();
        if !(eta > 0.0 && eta < ETA_MAX) {
            return Err(bad(format!("solver.eta = {eta} outside (0, (1+√5)/2)")));
        }
        let theorem2 = matches!(s.pi, PiSetting::Rule(PiRule::PextraEquivalent));
        if let Some(xi) = s.xi {
            if !(xi.is_finite() && xi > 0.0) {
                return Err(bad(format!("solver.xi must be positive, got {xi}")));
            }
        } else if uses_pextra || theorem2 {
            return Err(bad(
                "solver.xi is required by pextra and by pi = \"theorem2\"",
            ));
        }
        if uses_pextra && !theorem2 {
            return Err(bad("pextra runs need pi = \"theorem2\" (π_i = 1/ξ − ρd_i)"));
        }
        match &s.pi {
            PiSetting::Uniform(v) if !(v.is_finite() && *v >= 0.0) => {
                return Err(bad(format!("solver.pi must be nonnegative, got {v}")));
            }
            PiSetting::PerAgent(v)
                if v.len() != n || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) =>
            {
                return Err(bad(format!("solver.pi must hold {n} nonnegative values")));
            }
            _ => {}
        }
        if let Some(eps) = s.epsilon {
            if !algs.contains(&Algorithm::MmApprox) {
                return Err(bad("solver.epsilon only applies to mm-approx"));
            }
            if !(eps.is_finite() && eps > 0.0) {
                return Err(bad(format!("solver.epsilon must be positive, got {eps}")));
            }
        }
        if algs.contains(&Algorithm::MmExact) && eta >= 1.0 {
            return Err(bad(format!("mm-exact needs eta in (0, 1), got {eta}")));
        }
        if self.analysis.verify {
            if eta >= 1.0 {
                return Err(bad(format!(
                    "verification needs eta in (0, 1) for a contraction certificate, got {eta}"
                )));
            }
            if algs.contains(&Algorithm::MmExact) {
                return Err(bad("mm-exact has no contraction certificate; drop verify"));
            }
            if algs.contains(&Algorithm::MmApprox) && s.epsilon.is_some_and(|e| e != 1.0 / s.rho) {
                return Err(bad("mm-approx is only certified with epsilon = 1/rho"));
            }
        }
        let t = &self.tolerances;
        let tols = [
            t.jacobi,
            t.zero_eig,
            t.symmetry,
            t.subproblem,
            t.consistency,
            t.spectral,
            t.contraction_slack,
            t.search,
        ];
        if tols.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(bad("tolerances must be positive and finite"));
        }
        Ok(())
    }
}

/// A validated experiment with its instance, reference optimum and certificate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub instance: LeastSquares,
    pub params: AdmmParams,
    pub tolerances: Tolerances,
    pub reference: ReferenceSolution,
    /// `Err` holds the reason no certificate exists (e.g. `η ≥ 1`).
    pub certificate: Result<RateCertificate, String>,
}

/// Builds the instance for a scenario section.
pub fn build_instance(config: &ExperimentConfig) -> Result<LeastSquares, ExperimentError> {
    let (n, p) = config.dimensions()?;
    let sc = &config.scenario;
    match sc.preset.topology(n) {
        Some(topology) => Ok(least_squares_on(topology, n, p, sc.seed)?),
        None => {
            let edges: Vec<(usize, usize)> = sc
                .edges
                .as_ref()
                .expect("validated")
                .iter()
                .map(|e| (e[0], e[1]))
                .collect();
            let graph = build_graph(n, &edges, p)?;
            let rows = sc.h.as_ref().expect("validated");
            let h = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
            let y = DVector::from_column_slice(sc.y.as_ref().expect("validated"));
            let components = (0..n)
                .map(|i| ObjectiveComponent::rank_one(h.row(i).transpose(), y[i]))
                .collect::<Result<_, _>>()?;
            Ok(LeastSquares {
                graph,
                components,
                h,
                y,
            })
        }
    }
}

/// Validates the config, builds the scenario and the analysis objects.
/// Tolerances are the config values with `env_overrides` applied on top.
pub fn prepare(
    config: ExperimentConfig,
    env_overrides: Option<&str>,
) -> Result<Prepared, ExperimentError> {
    config.validate()?;
    let mut tolerances = config.tolerances;
    if let Some(spec) = env_overrides {
        tolerances.apply_overrides(spec)?;
    }
    let instance = build_instance(&config)?;
    let graph = &instance.graph;
    let s = &config.solver;
    let eta = s.eta();
    let params = match &s.pi {
        PiSetting::Uniform(v) => AdmmParams::uniform(graph.n(), s.rho, eta, *v)?,
        PiSetting::PerAgent(v) => AdmmParams::new(s.rho, eta, v.clone())?,
        PiSetting::Rule(PiRule::PextraEquivalent) => {
            AdmmParams::pextra_equivalent(graph, s.xi.expect("validated"), s.rho, eta)?
        }
    }
    .with_tol(tolerances.subproblem);
    if config.analysis.verify
        && config.analysis.norm == DistanceNorm::G
        && !params.is_penalty_free()
    {
        return Err(bad("G-norm verification needs pi = 0"));
    }
    let reference = reference_solution(graph, &instance.components, eta)?;
    let certificate = sum_profile(&instance.components, graph)
        .and_then(|profile| rate_certificate_with(graph, &profile, &params, &tolerances))
        .map_err(|e| e.to_string());
    if config.analysis.verify {
        if let Err(reason) = &certificate {
            return Err(bad(format!("verification requested but {reason}")));
        }
    }
    Ok(Prepared {
        config,
        instance,
        params,
        tolerances,
        reference,
        certificate,
    })
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// `|Σ_i f_i(x_i) − f⋆|`.
    pub obj_err: f64,
    /// Distance of `x` to the consensual subspace.
    pub consensus_resid: f64,
    /// Squared H-distance of `(α, x)` to `(α⋆, x⋆)`; absent without a certificate.
    pub u_dist_h_sq: Option<f64>,
    pub contraction_ratio: Option<f64>,
    /// `1/(1+δ)`.
    pub delta_bound: Option<f64>,
    pub messages: usize,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the header and one line per row.
pub fn emit_trace<W: Write>(rows: &[TraceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.obj_err),
            fmt_f64(r.consensus_resid),
            opt(r.u_dist_h_sq),
            opt(r.contraction_ratio),
            opt(r.delta_bound),
            r.messages
        )?;
    }
    Ok(())
}

/// Result of one algorithm's run.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub rows: Vec<TraceRow>,
    /// Primal iterates `x⁰ … x^K`.
    pub xs: Vec<DVector<f64>>,
    pub verification: Option<ContractionReport>,
}

enum Runner<'a> {
    Network(Network),
    Engine(Engine<'a>),
}

impl Runner<'_> {
    fn state(&self) -> Result<(usize, DVector<f64>, DVector<f64>), Error> {
        match self {
            Runner::Network(net) => Ok((net.round(), net.stacked_x(), net.stacked_phi())),
            Runner::Engine(e) => {
                let s = e.snapshot()?;
                Ok((s.k, s.x, s.phi))
            }
        }
    }

    fn step(&mut self, graph: &NetworkGraph) -> Result<usize, Error> {
        match self {
            Runner::Network(net) => Ok(net.step()?.messages),
            Runner::Engine(e) => {
                e.step()?;
                Ok(if e.algorithm().is_distributed() {
                    graph.m()
                } else {
                    0
                })
            }
        }
    }
}

fn initial_state(prep: &Prepared) -> Result<AdmmState, Error> {
    let graph = &prep.instance.graph;
    let init = match prep.config.solver.dual_seed {
        Some(seed) => DualInit::RandomInColspace { seed },
        None => DualInit::Zero,
    };
    dadmm_init(graph, DVector::zeros(graph.n() * graph.p()), init)
}

fn runner<'a>(prep: &'a Prepared, algorithm: Algorithm) -> Result<Runner<'a>, Error> {
    let graph = &prep.instance.graph;
    let comps = &prep.instance.components;
    let s = &prep.config.solver;
    let start = initial_state(prep)?;
    Ok(match algorithm {
        Algorithm::Dadmm => Runner::Network(Network::dadmm(graph, comps, &prep.params, &start)?),
        Algorithm::Pextra => {
            let xi = s.xi.expect("validated");
            let pex = PextraParams::new(graph, xi, s.rho, s.eta())?.with_tol(prep.params.tol());
            Runner::Network(Network::pextra(
                graph,
                comps,
                &pex,
                &PextraState::from_admm(&start, xi),
            )?)
        }
        Algorithm::General => {
            let uv = GeneralUv::classical(graph)?;
            Runner::Network(Network::general(graph, comps, &uv, &prep.params, &start)?)
        }
        other => {
            let mut setup = EngineSetup::zero(graph);
            if let Some(seed) = s.dual_seed {
                setup.alpha0 = random_dual(graph, seed)?;
            }
            setup.xi = s.xi;
            setup.epsilon = s.epsilon;
            Runner::Engine(Engine::new(
                other,
                graph,
                comps,
                prep.params.clone(),
                setup,
            )?)
        }
    })
}

/// Runs one algorithm for the configured number of rounds.
pub fn run_algorithm(prep: &Prepared, algorithm: Algorithm) -> Result<AlgorithmRun, Error> {
    let graph = &prep.instance.graph;
    let comps = &prep.instance.components;
    let f_star = prep.reference.objective_value;
    let cert = prep.certificate.as_ref().ok();
    let mut trace_monitor = match cert {
        Some(c) => Some(ContractionMonitor::new(
            graph,
            &prep.reference,
            c,
            DistanceNorm::H,
            &prep.tolerances,
        )?),
        None => None,
    };
    let verify_norm = prep.config.analysis.norm;
    let mut verify_monitor = match (prep.config.analysis.verify, cert) {
        (true, Some(c)) if verify_norm != DistanceNorm::H => Some(ContractionMonitor::new(
            graph,
            &prep.reference,
            c,
            verify_norm,
            &prep.tolerances,
        )?),
        _ => None,
    };

    let mut run = runner(prep, algorithm)?;
    let rounds = prep.config.solver.rounds;
    let mut rows = Vec::with_capacity(rounds + 1);
    let mut xs = Vec::with_capacity(rounds + 1);
    let mut messages = 0;
    for step in 0..=rounds {
        if step > 0 {
            messages = run.step(graph)?;
        }
        let (k, x, phi) = run.state()?;
        let (dist, ratio) = match trace_monitor.as_mut() {
            Some(m) => {
                let (d, r) = m.push(k, &x, &phi)?;
                (Some(d), r)
            }
            None => (None, None),
        };
        if let Some(m) = verify_monitor.as_mut() {
            m.push(k, &x, &phi)?;
        }
        rows.push(TraceRow {
            k,
            obj_err: (eval_f(comps, &x)? - f_star).abs(),
            consensus_resid: consensuality_residual(graph, &x)?,
            u_dist_h_sq: dist,
            contraction_ratio: ratio,
            delta_bound: cert.map(RateCertificate::bound),
            messages,
        });
        xs.push(x);
    }
    let verification = if prep.config.analysis.verify {
        match (verify_monitor, trace_monitor) {
            (Some(m), _) | (None, Some(m)) => Some(m.report()),
            (None, None) => None,
        }
    } else {
        None
    };
    Ok(AlgorithmRun {
        algorithm,
        rows,
        xs,
        verification,
    })
}

/// `max_i |x_a − x_b|_i` per iterate.
pub fn compare_runs(a: &AlgorithmRun, b: &AlgorithmRun) -> Vec<f64> {
    a.xs.iter()
        .zip(&b.xs)
        .map(|(x, y)| (x - y).amax())
        .collect()
}

pub fn emit_compare<W: Write>(dx: &[f64], mut out: W) -> io::Result<()> {
    writeln!(out, "{COMPARE_HEADER}")?;
    for (k, v) in dx.iter().enumerate() {
        writeln!(out, "{k},{}", fmt_f64(*v))?;
    }
    Ok(())
}

/// Human-readable certificate and verification summary.
pub fn certificate_report(prep: &Prepared, runs: &[AlgorithmRun]) -> String {
    let mut s = String::new();
    let g = &prep.instance.graph;
    let p = &prep.params;
    let _ = writeln!(
        s,
        "scenario: {:?} n={} p={} arcs={} seed={}",
        prep.config.scenario.preset,
        g.n(),
        g.p(),
        g.m(),
        prep.config.scenario.seed
    );
    let algs: Vec<&str> = runs.iter().map(|r| r.algorithm.name()).collect();
    let _ = writeln!(s, "algorithms: {}", algs.join(", "));
    let _ = writeln!(s, "rho = {}", fmt_f64(p.rho()));
    let _ = writeln!(s, "eta = {}", fmt_f64(p.eta()));
    let pi: Vec<String> = p.pi().iter().map(|v| fmt_f64(*v)).collect();
    let _ = writeln!(s, "pi = [{}]", pi.join(", "));
    let _ = writeln!(s, "f_star = {}", fmt_f64(prep.reference.objective_value));
    match &prep.certificate {
        Ok(c) => {
            let _ = writeln!(s, "mu_g = {}", fmt_f64(c.mu_g));
            let _ = writeln!(s, "gamma = {}", fmt_f64(c.gamma_star));
            let _ = writeln!(s, "L_g = {}", fmt_f64(c.l_g));
            let _ = writeln!(s, "lambda_tilde_min = {}", fmt_f64(c.lambda_tilde_min));
            let _ = writeln!(
                s,
                "lambda_max_laplacian = {}",
                fmt_f64(c.lambda_max_laplacian)
            );
            let _ = writeln!(s, "lambda_max_M = {}", fmt_f64(c.lambda_max_m));
            let _ = writeln!(s, "delta = {}", fmt_f64(c.delta));
            let _ = writeln!(s, "tau = {}", fmt_f64(c.tau_star));
            let _ = writeln!(s, "bound_H = {}", fmt_f64(c.bound()));
            if let (Some(d), Some(b)) = (c.delta_admm, c.bound_admm()) {
                let _ = writeln!(s, "delta_admm = {}", fmt_f64(d));
                let _ = writeln!(s, "bound_G = {}", fmt_f64(b));
            }
        }
        Err(reason) => {
            let _ = writeln!(s, "certificate unavailable: {reason}");
        }
    }
    for run in runs {
        match &run.verification {
            None => {
                let _ = writeln!(s, "verification[{}]: not requested", run.algorithm);
            }
            Some(rep) => {
                let status = match rep.first_violation() {
                    None => "passed".to_string(),
                    Some(v) => format!("FAILED at k = {} (ratio {})", v.k, fmt_f64(v.ratio)),
                };
                let _ = writeln!(
                    s,
                    "verification[{}]: {} norm, {} violations, worst ratio {}, slack {}: {status}",
                    run.algorithm,
                    rep.norm,
                    rep.violations.len(),
                    fmt_f64(rep.worst_ratio),
                    fmt_f64(rep.slack)
                );
            }
        }
    }
    s
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub runs: Vec<AlgorithmRun>,
    /// Largest per-iterate discrepancy in comparison mode.
    pub max_abs_dx: Option<f64>,
}

impl RunSummary {
    pub fn contraction_violated(&self) -> bool {
        self.runs
            .iter()
            .any(|r| r.verification.as_ref().is_some_and(|v| !v.is_contracting()))
    }

    /// 0 on success, 2 when a requested verification found a violation.
    pub fn exit_code(&self) -> i32 {
        if self.contraction_violated() {
            2
        } else {
            0
        }
    }
}

fn write_file(
    path: PathBuf,
    f: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
) -> Result<PathBuf, ExperimentError> {
    let io_err = |source| ExperimentError::Io {
        path: path.clone(),
        source,
    };
    let file = fs::File::create(&path).map_err(io_err)?;
    let mut w = io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
    Ok(path)
}

/// Runs a prepared experiment and writes its report files.
pub fn execute(prep: &Prepared) -> Result<RunSummary, ExperimentError> {
    let out = &prep.config.output;
    fs::create_dir_all(&out.dir).map_err(|source| ExperimentError::Io {
        path: out.dir.clone(),
        source,
    })?;
    let algs = prep.config.solver.algorithms();
    let runs = algs
        .iter()
        .map(|&a| run_algorithm(prep, a))
        .collect::<Result<Vec<_>, _>>()?;
    let mut files = Vec::new();
    let mut max_abs_dx = None;
    if runs.len() == 1 {
        files.push(write_file(out.dir.join(&out.trace), |w| {
            emit_trace(&runs[0].rows, w)
        })?);
    } else {
        let stem = out.trace.strip_suffix(".csv").unwrap_or(&out.trace);
        for run in &runs {
            let name = format!("{stem}-{}.csv", run.algorithm);
            files.push(write_file(out.dir.join(name), |w| {
                emit_trace(&run.rows, w)
            })?);
        }
        let dx = compare_runs(&runs[0], &runs[1]);
        max_abs_dx = Some(dx.iter().copied().fold(0.0, f64::max));
        files.push(write_file(out.dir.join(&out.compare), |w| {
            emit_compare(&dx, w)
        })?);
    }
    let report = certificate_report(prep, &runs);
    files.push(write_file(out.dir.join(&out.certificate), |w| {
        w.write_all(report.as_bytes())
    })?);
    Ok(RunSummary {
        files,
        runs,
        max_abs_dx,
    })
}

/// Parse, prepare and execute in one call.
pub fn run(
    config: ExperimentConfig,
    env_overrides: Option<&str>,
) -> Result<RunSummary, ExperimentError> {
    execute(&prepare(config, env_overrides)?)
}
