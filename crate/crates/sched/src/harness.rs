//! Runs configured experiments and writes their artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sched_core::analysis::{
    bound_for, residual, rounds_to_tolerance, solve_oracle, OptimalSolution, StepBound,
};
use sched_core::costs::{sample_academic_costs, sample_cpu_problem, CpuInstance, Problem};
use sched_core::graph::{generate_er, is_connected, spectral_bounds, SwitchingNetwork, Topology};
use sched_core::protocol::{Engine, Trace};

use crate::config::{ExperimentConfig, ProblemSpec, RunSpec, StepRate};
use crate::error::{Error, Result};
use crate::formats;
use crate::plot::{self, PlotSpec, Series};

/// Fresh ER seeds tried before giving up on drawing a connected graph.
const MAX_GRAPH_ATTEMPTS: u64 = 10_000;

/// A run is stopped as diverged once some `|x_i|` exceeds this multiple of
/// `1 + Σ|b_i|`.
const DIVERGENCE_FACTOR: f64 = 1e3;

/// Relative tolerance for the post-run invariant check.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Everything shared by the runs of one config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub base: Topology,
    /// Extra ER draws needed to get a connected graph (0 for edge-list files).
    pub graph_redraws: u64,
    pub optimum: OptimalSolution,
    pub runs: Vec<RunSpec>,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let seed = cfg.seeds().costs;
    match &cfg.problem {
        ProblemSpec::Academic { n } => sample_academic_costs(*n, seed),
        ProblemSpec::Cpu { n, pi_max, rho_min, rho_max, total_demand, box_fraction, sigma, alpha } => {
            let inst = CpuInstance {
                pi_max: *pi_max,
                rho_min: *rho_min,
                rho_max: *rho_max,
                total_demand: *total_demand,
                box_fraction: *box_fraction,
                sigma: *sigma,
                alpha: *alpha,
            };
            sample_cpu_problem(*n, seed, &inst)
        }
        ProblemSpec::File { path } => return formats::load_problem(path),
    }
    .map_err(|e| Error::config(format!("problem: {e}")))
}

/// The base graph: the edge-list file if given, else the first connected ER
/// draw starting from the graph seed.
pub fn build_topology(cfg: &ExperimentConfig, n: usize) -> Result<(Topology, u64)> {
    if let Some(path) = &cfg.graph.edges {
        let t = formats::load_edge_list(path)?;
        if t.n() != n {
            return Err(Error::config(format!(
                "graph.edges: {} has {} nodes but the problem has {n} agents",
                path.display(),
                t.n()
            )));
        }
        if !is_connected(&t) {
            return Err(Error::config(format!("graph.edges: {} is not connected", path.display())));
        }
        return Ok((t, 0));
    }
    let p = cfg.graph.p.expect("validated");
    let seed = cfg.seeds().graph;
    for attempt in 0..MAX_GRAPH_ATTEMPTS {
        let t = generate_er(n, p, cfg.graph.weight, seed.wrapping_add(attempt))
            .map_err(|e| Error::config(format!("graph: {e}")))?;
        if is_connected(&t) {
            return Ok((t, attempt));
        }
    }
    Err(Error::config(format!(
        "graph: no connected ER graph with n = {n}, p = {p} in {MAX_GRAPH_ATTEMPTS} draws"
    )))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let (base, graph_redraws) = build_topology(cfg, problem.n())?;
    let optimum = solve_oracle(&problem, 0.0).map_err(Error::runtime)?;
    Ok(Prepared {
        config: cfg.clone(),
        problem,
        base,
        graph_redraws,
        optimum,
        runs: cfg.runs()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSource {
    /// Union of the realizations over the first `B` rounds.
    UnionWindow,
    /// The base graph (no failures, or the union window was disconnected).
    Base,
}

impl SpectrumSource {
    fn as_str(self) -> &'static str {
        match self {
            Self::UnionWindow => "union_window",
            Self::Base => "base",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInfo {
    pub bound: StepBound,
    pub source: SpectrumSource,
}

impl Prepared {
    pub fn network(&self, spec: &RunSpec) -> SwitchingNetwork {
        if spec.failure_rate == 0.0 {
            return SwitchingNetwork::fixed(self.base.clone());
        }
        SwitchingNetwork::new(
            self.base.clone(),
            spec.failure_rate,
            self.config.seeds().failures,
            self.config.graph.window,
        )
        .expect("validated failure rate and window")
    }

    /// Step bound from the union-window spectrum; `None` for maps without a
    /// sector bound.
    pub fn step_bound(&self, spec: &RunSpec) -> Result<Option<BoundInfo>> {
        if !spec.map.is_sector_bound() {
            return Ok(None);
        }
        let net = self.network(spec);
        let union = net.union_window(0, self.config.graph.window);
        let (topo, source) = if spec.failure_rate > 0.0 && is_connected(&union) {
            (&union, SpectrumSource::UnionWindow)
        } else {
            (&self.base, SpectrumSource::Base)
        };
        let spectrum = spectral_bounds(topo).map_err(Error::runtime)?;
        let bound =
            bound_for(&self.problem, &spec.map, &spectrum, spec.tau_bar).map_err(Error::runtime)?;
        Ok(Some(BoundInfo { bound, source }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    /// Gradient dispersion fell below the configured tolerance.
    Converged { round: u64 },
    Diverged { round: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantCheck {
    /// `max_k |Σ x_i(k) − Σ b_i| / |Σ b_i|`.
    pub max_rel_feas_gap: f64,
    /// `max_k |Σ y_i(k)| / (1 + max_k ‖x(k)‖∞)`.
    pub max_rel_momentum_sum: f64,
}

impl InvariantCheck {
    pub fn of(trace: &Trace) -> Self {
        let scale = if trace.total_demand == 0.0 { 1.0 } else { trace.total_demand.abs() };
        Self {
            max_rel_feas_gap: trace.max_feas_gap() / scale,
            max_rel_momentum_sum: trace.max_momentum_sum() / (1.0 + trace.max_state_norm()),
        }
    }

    pub fn holds(&self) -> bool {
        self.max_rel_feas_gap <= INVARIANT_TOL && self.max_rel_momentum_sum <= INVARIANT_TOL
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub eta: f64,
    pub bound: Option<BoundInfo>,
    pub trace: Trace,
    pub residual: Vec<f64>,
    pub status: Status,
    pub invariants: InvariantCheck,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn final_residual(&self) -> f64 {
        *self.residual.last().expect("trace has the initial row")
    }

    pub fn rounds_to_tolerance(&self, rel_tol: f64) -> Option<usize> {
        rounds_to_tolerance(&self.residual, rel_tol)
    }
}

pub fn simulate(prepared: &Prepared, spec: &RunSpec) -> Result<RunOutcome> {
    simulate_rounds(prepared, spec, prepared.config.rounds)
}

/// Like [`simulate`] with an explicit round budget.
pub fn simulate_rounds(prepared: &Prepared, spec: &RunSpec, rounds: usize) -> Result<RunOutcome> {
    let bound = prepared.step_bound(spec)?;
    let eta = match spec.step {
        StepRate::Fixed(e) => e,
        StepRate::BoundFraction(f) => {
            f * bound.expect("validated: bound fraction needs a sector-bound map").bound.eta_tau_bar
        }
    };
    let mut warnings = Vec::new();
    match &bound {
        Some(b) if eta >= b.bound.eta_tau_bar => warnings.push(format!(
            "step rate {eta} is not below the bound {} for tau_bar = {}; convergence is not guaranteed",
            b.bound.eta_tau_bar, spec.tau_bar
        )),
        None => warnings.push(format!(
            "{} is not sector-bound; no step bound applies",
            describe_map(spec)
        )),
        _ => {}
    }

    let problem = &prepared.problem;
    let mut engine = Engine::new(
        problem.clone(),
        prepared.network(spec),
        spec.map,
        spec.delays.clone(),
        eta,
        spec.mu,
    )
    .map_err(Error::runtime)?;

    let limit = DIVERGENCE_FACTOR * (1.0 + problem.demands().iter().map(|b| b.abs()).sum::<f64>());
    let tol = prepared.config.protocol.dispersion_tol;
    let mut trace = Trace::new(problem.n(), problem.total_demand());
    trace.rows.push(engine.snapshot(0, 0));
    let mut status = Status::Completed;
    for _ in 0..rounds {
        let s = engine.step().map_err(Error::runtime)?;
        let row = engine.snapshot(s.edges, s.delivered);
        let blown = row.x.iter().any(|v| !v.is_finite() || v.abs() > limit);
        let done = tol.is_some_and(|t| row.dispersion < t);
        let k = row.k;
        trace.rows.push(row);
        if blown {
            status = Status::Diverged { round: k };
            warnings.push(format!("states left the range |x| <= {limit:e} at round {k}; run stopped"));
            break;
        }
        if done {
            status = Status::Converged { round: k };
            break;
        }
    }

    let residual = residual(&trace, &prepared.optimum).map_err(Error::runtime)?;
    let invariants = InvariantCheck::of(&trace);
    if !invariants.holds() {
        warnings.push(format!(
            "invariant check failed: relative feasibility gap {:e}, relative momentum sum {:e}",
            invariants.max_rel_feas_gap, invariants.max_rel_momentum_sum
        ));
    }
    Ok(RunOutcome { spec: spec.clone(), eta, bound, trace, residual, status, invariants, warnings })
}

/// All runs of a config, in parallel, returned in config order.
pub fn run_all(prepared: &Prepared) -> Result<Vec<RunOutcome>> {
    prepared.runs.par_iter().map(|spec| simulate(prepared, spec)).collect()
}

fn describe_map(spec: &RunSpec) -> String {
    use sched_core::nonlinearity::SectorMap;
    match spec.map {
        SectorMap::Identity => "identity".into(),
        SectorMap::LogQuantizer { rho } => format!("log_quantizer(rho={rho})"),
        SectorMap::Saturation { limit, slope_floor } => {
            format!("saturation(limit={limit}, slope_floor={slope_floor})")
        }
        SectorMap::UniformQuantizer { delta } => format!("uniform_quantizer(delta={delta})"),
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:e}"))
}

pub fn summary_text(prepared: &Prepared, out: &RunOutcome) -> String {
    let cfg = &prepared.config;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("label", out.spec.label.clone());
    kv("seed", cfg.seed.to_string());
    kv("n", prepared.problem.n().to_string());
    kv("base_edges", prepared.base.edge_count().to_string());
    kv("map", describe_map(&out.spec));
    kv("eta", format!("{:e}", out.eta));
    kv("mu", out.spec.mu.to_string());
    kv("tau_bar", out.spec.tau_bar.to_string());
    kv("failure_rate", out.spec.failure_rate.to_string());
    kv("window", cfg.graph.window.to_string());
    match &out.bound {
        Some(b) => {
            kv("spectrum", b.source.as_str().into());
            kv("lambda2", format!("{:e}", b.bound.lambda2));
            kv("lambda_n", format!("{:e}", b.bound.lambda_n));
            kv("u", format!("{:e}", b.bound.u));
            kv("kappa", format!("{:e}", b.bound.kappa));
            kv("big_k", format!("{:e}", b.bound.big_k));
            kv("eta_bar", format!("{:e}", b.bound.eta_bar));
            kv("eta_tau_bar", format!("{:e}", b.bound.eta_tau_bar));
        }
        None => {
            kv("eta_bar", "n/a".into());
            kv("eta_tau_bar", "n/a".into());
        }
    }
    kv("f_star", format!("{:e}", prepared.optimum.f_star));
    kv("lambda_star", format!("{:e}", prepared.optimum.lambda_star));
    kv(
        "status",
        match out.status {
            Status::Completed => "completed".into(),
            Status::Converged { round } => format!("converged at round {round}"),
            Status::Diverged { round } => format!("diverged at round {round}"),
        },
    );
    kv("rounds_run", (out.trace.len() - 1).to_string());
    kv("initial_residual", format!("{:e}", out.residual[0]));
    kv("final_residual", format!("{:e}", out.final_residual()));
    let tol = cfg.output.tolerance;
    kv("tolerance", format!("{tol:e}"));
    kv(
        "rounds_to_tolerance",
        out.rounds_to_tolerance(tol).map_or_else(|| "not reached".into(), |k| k.to_string()),
    );
    kv("max_feas_gap", format!("{:e}", out.trace.max_feas_gap()));
    kv("max_momentum_sum", format!("{:e}", out.trace.max_momentum_sum()));
    kv("invariants", if out.invariants.holds() { "ok" } else { "violated" }.into());
    kv("final_max_abs_y", opt_float(out.trace.last().map(|r| r.y.iter().fold(0.0, |m: f64, v| m.max(v.abs())))));
    for w in &out.warnings {
        kv("warning", w.clone());
    }
    s
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Output { path: path.to_owned(), source })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Output { path: path.to_owned(), source })
}

/// Writes `config.toml`, `graph.edges`, `problem.toml` and `summary.txt` at
/// the top level and `trace.csv`, `summary.txt` and plots per run.
pub fn write_outputs(prepared: &Prepared, outcomes: &[RunOutcome], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("config.toml"), prepared.config.to_toml())?;
    let mut edges = Vec::new();
    formats::write_edge_list(&mut edges, &prepared.base).expect("writing to memory");
    write_file(&dir.join("graph.edges"), edges)?;
    write_file(&dir.join("problem.toml"), formats::problem_to_toml(&prepared.problem))?;

    let mut index = String::new();
    for out in outcomes {
        let run_dir = dir.join(&out.spec.label);
        create_dir(&run_dir)?;
        let csv_path = run_dir.join("trace.csv");
        let f = fs::File::create(&csv_path)
            .map_err(|source| Error::Output { path: csv_path.clone(), source })?;
        formats::write_trace_csv(std::io::BufWriter::new(f), &out.trace, &out.residual)
            .map_err(|e| Error::runtime(format!("{}: {e}", csv_path.display())))?;
        write_file(&run_dir.join("summary.txt"), summary_text(prepared, out))?;
        if prepared.config.output.plots {
            let table = formats::load_trace_csv(&csv_path)?;
            for (series, log) in [(Series::Residual, true), (Series::States, false), (Series::Momenta, false)] {
                let spec = PlotSpec {
                    series,
                    log_scale: log,
                    title: format!("{}: {}", out.spec.label, series.name()),
                };
                let svg = plot::render(&table, &spec)?;
                write_file(&run_dir.join(format!("{}.svg", series.name())), svg)?;
            }
        }
        let _ = writeln!(
            index,
            "{}: eta = {:e}, final_residual = {:e}, max_feas_gap = {:e}, invariants = {}",
            out.spec.label,
            out.eta,
            out.final_residual(),
            out.trace.max_feas_gap(),
            if out.invariants.holds() { "ok" } else { "violated" },
        );
    }
    write_file(&dir.join("summary.txt"), index)
}

/// Default output directory for a config.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

/// Prepares, runs every variant and writes all artifacts under `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<(Prepared, Vec<RunOutcome>)> {
    let prepared = prepare(cfg)?;
    let outcomes = run_all(&prepared)?;
    write_outputs(&prepared, &outcomes, dir)?;
    Ok((prepared, outcomes))
}
