//! Built-in experiment configs.

use crate::config::{
    DelaySpec, ExperimentConfig, GraphSpec, MapSpec, OutputSpec, ProblemSpec, ProtocolSpec,
    VariantSpec,
};
use crate::error::{Error, Result};

pub const NAMES: [&str; 5] = ["fig3_ours", "fig4", "fig5", "fig6_cpu", "fig7"];

/// Default master seed of every preset.
pub const DEFAULT_SEED: u64 = 1;

const FINE_RHO: f64 = 1.0 / 1024.0;

fn base(name: &str, rounds: usize, problem: ProblemSpec, p: f64, eta: f64, mu: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: DEFAULT_SEED,
        rounds,
        problem,
        graph: GraphSpec { p: Some(p), weight: 1.0, edges: None, failure_rate: 0.0, window: 1 },
        nonlinearity: MapSpec::log(FINE_RHO),
        delay: DelaySpec::default(),
        protocol: ProtocolSpec { eta: Some(eta), eta_bound_fraction: None, mu, dispersion_tol: None },
        output: OutputSpec::default(),
        variants: Vec::new(),
    }
}

fn variant(label: &str) -> VariantSpec {
    VariantSpec { label: label.into(), ..Default::default() }
}

fn mu_variants(values: &[(&str, f64)]) -> Vec<VariantSpec> {
    values.iter().map(|&(l, mu)| VariantSpec { mu: Some(mu), ..variant(l) }).collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let academic = ProblemSpec::Academic { n: 20 };
    let cfg = match name {
        "fig3_ours" => ExperimentConfig {
            variants: mu_variants(&[("mu_0.9", 0.9), ("mu_0", 0.0)]),
            ..base(name, 3000, academic, 0.25, 0.04, 0.9)
        },
        "fig4" => ExperimentConfig {
            variants: [("rho_2-4", 4), ("rho_2-7", 7), ("rho_2-10", 10)]
                .iter()
                .map(|&(l, e)| VariantSpec {
                    nonlinearity: Some(MapSpec::log(1.0 / f64::from(1u32 << e))),
                    ..variant(l)
                })
                .collect(),
            ..base(name, 5000, academic, 0.25, 0.04, 0.5)
        },
        "fig5" => {
            let mut cfg = ExperimentConfig {
                variants: mu_variants(&[("mu_0", 0.0), ("mu_0.5", 0.5), ("mu_0.9", 0.9), ("mu_0.95", 0.95)]),
                ..base(name, 3000, academic, 0.25, 0.1, 0.0)
            };
            cfg.graph.failure_rate = 0.8;
            cfg.graph.window = 3;
            cfg
        }
        "fig6_cpu" => ExperimentConfig {
            variants: vec![
                variant("log"),
                VariantSpec { nonlinearity: Some(MapSpec::uniform(1.0 / 16.0)), ..variant("uniform") },
            ],
            ..base(name, 10_000, ProblemSpec::cpu(100), 0.12, 0.1, 0.4)
        },
        "fig7" => ExperimentConfig {
            variants: [("tau_0", 0), ("tau_2", 2), ("tau_4", 4)]
                .iter()
                .map(|&(l, t)| VariantSpec { tau_bar: Some(t), ..variant(l) })
                .collect(),
            ..base(name, 3000, academic, 0.2, 0.2, 0.8)
        },
        _ => {
            return Err(Error::config(format!(
                "unknown preset `{name}` (expected one of {})",
                NAMES.join(", ")
            )))
        }
    };
    Ok(cfg)
}
