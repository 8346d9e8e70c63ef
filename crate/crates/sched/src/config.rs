//! Experiment configuration.
//!
//! Configs are TOML (or JSON with the same schema when the file ends in
//! `.json`). Every random choice is driven by sub-seeds derived from the
//! single master `seed`, so a config plus a seed fully determines a run.

use std::path::{Path, PathBuf};

use sched_core::costs::CpuInstance;
use sched_core::nonlinearity::{SectorMap, DEFAULT_SLOPE_FLOOR};
use sched_core::protocol::{DelayDistribution, DelayModel};
use sched_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub rounds: usize,
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    #[serde(default)]
    pub nonlinearity: MapSpec,
    #[serde(default)]
    pub delay: DelaySpec,
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, rename = "variant", skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Random quadratic costs with a hard box penalty and `b_i = 50`.
    Academic { n: usize },
    /// CPU scheduling costs with demands rescaled to `total_demand`.
    Cpu {
        n: usize,
        #[serde(default = "cpu::pi_max")]
        pi_max: f64,
        #[serde(default = "cpu::rho_min")]
        rho_min: f64,
        #[serde(default = "cpu::rho_max")]
        rho_max: f64,
        #[serde(default = "cpu::total_demand")]
        total_demand: f64,
        #[serde(default = "cpu::box_fraction")]
        box_fraction: f64,
        #[serde(default = "cpu::sigma")]
        sigma: f64,
        #[serde(default = "cpu::alpha")]
        alpha: f64,
    },
    /// Explicit per-agent costs and demands (see [`crate::formats`]).
    File { path: PathBuf },
}

mod cpu {
    use super::CpuInstance;

    pub fn pi_max() -> f64 {
        CpuInstance::default().pi_max
    }
    pub fn rho_min() -> f64 {
        CpuInstance::default().rho_min
    }
    pub fn rho_max() -> f64 {
        CpuInstance::default().rho_max
    }
    pub fn total_demand() -> f64 {
        CpuInstance::default().total_demand
    }
    pub fn box_fraction() -> f64 {
        CpuInstance::default().box_fraction
    }
    pub fn sigma() -> f64 {
        CpuInstance::default().sigma
    }
    pub fn alpha() -> f64 {
        CpuInstance::default().alpha
    }
}

impl ProblemSpec {
    pub fn cpu(n: usize) -> Self {
        let d = CpuInstance::default();
        Self::Cpu {
            n,
            pi_max: d.pi_max,
            rho_min: d.rho_min,
            rho_max: d.rho_max,
            total_demand: d.total_demand,
            box_fraction: d.box_fraction,
            sigma: d.sigma,
            alpha: d.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    /// Erdős–Rényi link probability; ignored when `edges` is given.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default = "unit")]
    pub weight: f64,
    /// Edge-list file to use instead of a random graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(default)]
    pub failure_rate: f64,
    /// Union window `B` used for the connectivity check and the step bound.
    #[serde(default = "one")]
    pub window: usize,
}

fn unit() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

/// `nonlinearity = { type = "...", param = ... }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(rename = "type")]
    pub kind: MapKind,
    /// `ρ` for the log quantizer, the limit for saturation, `Δ` for the
    /// uniform quantizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_floor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Identity,
    LogQuantizer,
    Saturation,
    UniformQuantizer,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self::identity()
    }
}

impl MapSpec {
    pub fn identity() -> Self {
        Self { kind: MapKind::Identity, param: None, slope_floor: None }
    }

    pub fn log(rho: f64) -> Self {
        Self { kind: MapKind::LogQuantizer, param: Some(rho), slope_floor: None }
    }

    pub fn uniform(delta: f64) -> Self {
        Self { kind: MapKind::UniformQuantizer, param: Some(delta), slope_floor: None }
    }

    pub fn to_map(&self) -> Result<SectorMap> {
        let param = |what: &str| {
            self.param
                .ok_or_else(|| Error::config(format!("nonlinearity: `{what}` needs `param`")))
        };
        let map = match self.kind {
            MapKind::Identity => Ok(SectorMap::Identity),
            MapKind::LogQuantizer => SectorMap::log_quantizer(param("log_quantizer")?),
            MapKind::Saturation => SectorMap::saturation(
                param("saturation")?,
                self.slope_floor.unwrap_or(DEFAULT_SLOPE_FLOOR),
            ),
            MapKind::UniformQuantizer => SectorMap::uniform_quantizer(param("uniform_quantizer")?),
        };
        map.map_err(|e| Error::config(format!("nonlinearity: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    #[serde(default)]
    pub tau_bar: usize,
    /// Uniform on `[0, τ̄]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DelayDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    /// Fixed step rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Step rate as a fraction of the computed delayed bound `η̄/(τ̄+1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_bound_fraction: Option<f64>,
    pub mu: f64,
    /// Stop early once the gradient dispersion drops below this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plots: bool,
    /// Relative residual used for `rounds_to_tolerance` in the summary.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn yes() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-3
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, plots: true, tolerance: default_tolerance() }
    }
}

/// One `[[variant]]` block: a labelled set of overrides of the base settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_bound_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_bar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<MapSpec>,
}

/// How the step rate of a run is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRate {
    Fixed(f64),
    BoundFraction(f64),
}

/// Base settings with one variant's overrides applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub step: StepRate,
    pub mu: f64,
    pub tau_bar: usize,
    pub failure_rate: f64,
    pub map: SectorMap,
    pub map_spec: MapSpec,
    pub delays: DelayModel,
}

/// Sub-seeds, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub graph: u64,
    pub costs: u64,
    pub failures: u64,
    pub delays: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            graph: derive_seed(master, "graph"),
            costs: derive_seed(master, "costs"),
            failures: derive_seed(master, "failures"),
            delays: derive_seed(master, "delays"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config, or JSON when the extension is `.json`. Relative
    /// paths inside the config are resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Input { path: path.to_owned(), source })?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let ProblemSpec::File { path } = &mut self.problem {
            fix(path);
        }
        if let Some(p) = &mut self.graph.edges {
            fix(p);
        }
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds: must be at least 1"));
        }
        match &self.problem {
            ProblemSpec::Academic { n } | ProblemSpec::Cpu { n, .. } if *n < 2 => {
                return Err(Error::config("problem.n: need at least 2 agents"));
            }
            _ => {}
        }
        if self.graph.edges.is_none() {
            match self.graph.p {
                Some(p) if p > 0.0 && p <= 1.0 => {}
                Some(_) => return Err(Error::config("graph.p: must lie in (0, 1]")),
                None => return Err(Error::config("graph: need either `p` or `edges`")),
            }
        }
        if !(self.graph.weight.is_finite() && self.graph.weight > 0.0) {
            return Err(Error::config("graph.weight: must be positive"));
        }
        if self.graph.window == 0 {
            return Err(Error::config("graph.window: must be at least 1"));
        }
        if !(self.output.tolerance > 0.0 && self.output.tolerance < 1.0) {
            return Err(Error::config("output.tolerance: must lie in (0, 1)"));
        }
        let mut labels = std::collections::BTreeSet::new();
        for v in &self.variants {
            if v.label.is_empty() || v.label.contains(['/', '\\']) || v.label.starts_with('.') {
                return Err(Error::config(format!(
                    "variant.label: `{}` is not usable as a directory name",
                    v.label
                )));
            }
            if !labels.insert(v.label.as_str()) {
                return Err(Error::config(format!("variant.label: `{}` appears twice", v.label)));
            }
        }
        self.runs().map(drop)
    }

    /// The base settings when there are no variants, otherwise one entry per
    /// `[[variant]]` in file order.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        if self.variants.is_empty() {
            return Ok(vec![self.run_spec(&VariantSpec {
                label: self.name.clone(),
                ..VariantSpec::default()
            })?]);
        }
        self.variants.iter().map(|v| self.run_spec(v)).collect()
    }

    fn run_spec(&self, v: &VariantSpec) -> Result<RunSpec> {
        let ctx = |msg: String| {
            if self.variants.is_empty() {
                Error::config(msg)
            } else {
                Error::config(format!("variant `{}`: {msg}", v.label))
            }
        };
        // a variant's step setting replaces both base keys
        let (eta, frac) = if v.eta.is_some() || v.eta_bound_fraction.is_some() {
            (v.eta, v.eta_bound_fraction)
        } else {
            (self.protocol.eta, self.protocol.eta_bound_fraction)
        };
        let step = match (eta, frac) {
            (Some(e), None) if e.is_finite() && e > 0.0 => StepRate::Fixed(e),
            (None, Some(f)) if f.is_finite() && f > 0.0 => StepRate::BoundFraction(f),
            (Some(_), None) => return Err(ctx("protocol.eta: must be positive".into())),
            (None, Some(_)) => {
                return Err(ctx("protocol.eta_bound_fraction: must be positive".into()))
            }
            (Some(_), Some(_)) => {
                return Err(ctx("protocol: set only one of `eta` and `eta_bound_fraction`".into()))
            }
            (None, None) => {
                return Err(ctx("protocol: need `eta` or `eta_bound_fraction`".into()))
            }
        };
        let mu = v.mu.unwrap_or(self.protocol.mu);
        if !(0.0..1.0).contains(&mu) {
            return Err(ctx(format!("protocol.mu: {mu} is outside [0, 1)")));
        }
        let failure_rate = v.failure_rate.unwrap_or(self.graph.failure_rate);
        if !(0.0..1.0).contains(&failure_rate) {
            return Err(ctx(format!("graph.failure_rate: {failure_rate} is outside [0, 1)")));
        }
        let tau_bar = v.tau_bar.unwrap_or(self.delay.tau_bar);
        let map_spec = v.nonlinearity.clone().unwrap_or_else(|| self.nonlinearity.clone());
        let map = map_spec.to_map().map_err(|e| ctx(e.to_string()))?;
        if matches!(step, StepRate::BoundFraction(_)) && !map.is_sector_bound() {
            return Err(ctx(
                "protocol.eta_bound_fraction: the map is not sector-bound, so there is no bound"
                    .into(),
            ));
        }
        let distribution = self.delay.distribution.clone().unwrap_or(DelayDistribution::Uniform);
        let delays = DelayModel::new(tau_bar, self.seeds().delays, distribution)
            .map_err(|e| ctx(format!("delay: {e}")))?;
        Ok(RunSpec {
            label: v.label.clone(),
            step,
            mu,
            tau_bar,
            failure_rate,
            map,
            map_spec,
            delays,
        })
    }
}
