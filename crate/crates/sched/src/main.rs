use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sched::config::ExperimentConfig;
use sched::error::{Error, Result};
use sched::formats;
use sched::harness::{self, default_out_dir};
use sched::plot::{self, PlotSpec, Series};
use sched::presets;

#[derive(Parser)]
#[command(name = "sched", version, about = "Distributed resource allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SeedArg {
    /// Master seed; overrides the config's `seed`.
    #[arg(long, env = "SCHED_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant of a config and write traces, summaries and plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run a built-in experiment.
    Preset {
        /// One of fig3_ours, fig4, fig5, fig6_cpu, fig7.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        /// Print the preset's config as TOML instead of running it.
        #[arg(long)]
        dump: bool,
    },
    /// Print the step bound of each variant.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Print the centralized optimum.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Render one series of a trace CSV as SVG.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        /// residual, cost, feas_gap, states or momenta.
        #[arg(long)]
        series: String,
        #[arg(long)]
        log: bool,
        /// Defaults to the trace path with the series name and `.svg`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: &SeedArg) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let dir = out.unwrap_or_else(|| default_out_dir(cfg));
    let (_, outcomes) = harness::run_experiment(cfg, &dir)?;
    for o in &outcomes {
        println!(
            "label={} eta={:e} final_residual={:e} rounds_to_tolerance={} max_feas_gap={:e} invariants={}",
            o.spec.label,
            o.eta,
            o.final_residual(),
            o.rounds_to_tolerance(cfg.output.tolerance)
                .map_or_else(|| "none".to_owned(), |k| k.to_string()),
            o.trace.max_feas_gap(),
            if o.invariants.holds() { "ok" } else { "violated" },
        );
        for w in &o.warnings {
            eprintln!("warning: {}: {w}", o.spec.label);
        }
    }
    println!("out={}", dir.display());
    if outcomes.iter().any(|o| !o.invariants.holds()) {
        return Err(Error::Runtime("a trace violated the feasibility or momentum invariant".into()));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => run(&load(&config, &seed)?, out),
        Command::Preset { name, out, seed, dump } => {
            let mut cfg = presets::preset(&name)?;
            if let Some(s) = seed.seed {
                cfg.seed = s;
            }
            if dump {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            run(&cfg, out)
        }
        Command::Bound { config, seed } => {
            let prepared = harness::prepare(&load(&config, &seed)?)?;
            for spec in &prepared.runs {
                match prepared.step_bound(spec)? {
                    Some(b) => println!(
                        "label={} lambda2={:e} lambda_n={:e} u={:e} kappa={:e} big_k={:e} eta_bar={:e} tau_bar={} eta_tau_bar={:e}",
                        spec.label,
                        b.bound.lambda2,
                        b.bound.lambda_n,
                        b.bound.u,
                        b.bound.kappa,
                        b.bound.big_k,
                        b.bound.eta_bar,
                        spec.tau_bar,
                        b.bound.eta_tau_bar,
                    ),
                    None => println!("label={} eta_bar=n/a", spec.label),
                }
            }
            Ok(())
        }
        Command::Oracle { config, seed } => {
            let prepared = harness::prepare(&load(&config, &seed)?)?;
            let opt = &prepared.optimum;
            println!("f_star={}", formats::format_float(opt.f_star));
            println!("lambda_star={}", formats::format_float(opt.lambda_star));
            for (i, x) in opt.x_star.iter().enumerate() {
                println!("x_star_{i}={}", formats::format_float(*x));
            }
            Ok(())
        }
        Command::Plot { trace, series, log, out } => {
            let series: Series = series.parse()?;
            let table = formats::load_trace_csv(&trace)?;
            let title = format!("{}: {}", trace.display(), series.name());
            let svg = plot::render(&table, &PlotSpec { series, log_scale: log, title })?;
            let out = out.unwrap_or_else(|| trace.with_extension(format!("{}.svg", series.name())));
            std::fs::write(&out, svg).map_err(|source| Error::Output { path: out.clone(), source })?;
            println!("out={}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
