use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use obcouple::experiments::{self, canned_config, load_config, ExperimentConfig, ExperimentKind, RunSummary};
use obcouple::Error;

#[derive(Parser)]
#[command(name = "obcouple", version, about = "Optimization-based nonlocal/local coupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Lattice spacing (mm)
    #[arg(long)]
    h: Option<f64>,
    /// Horizon (mm)
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Linear manufactured solution on the unit cube
    PatchTest(Overrides),
    /// Refinement study with the quadratic manufactured solution
    Converge(Overrides),
    /// Notched bar with prescribed end displacements
    BarDirichlet(Overrides),
    /// Notched bar with an end traction
    BarNeumann(Overrides),
    /// Run the experiment described by a TOML file
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Finite-difference check of the reduced gradient
    CheckGradient {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Exit codes: 2 configuration, 3 geometry or discretization, 4 linear solver,
/// 5 optimizer, 6 verification, 7 i/o.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parameter(_) => 2,
        Error::Alignment { .. }
        | Error::Classification { .. }
        | Error::DegeneratePoint { .. }
        | Error::Coverage { .. }
        | Error::Assembly { .. }
        | Error::Topology(_)
        | Error::Location { .. }
        | Error::Shape { .. } => 3,
        Error::Solver(_) | Error::State { .. } => 4,
        Error::LineSearch { .. } => 5,
        Error::Validation(_) | Error::Study { .. } => 6,
        Error::Io { .. } => 7,
    }
}

fn apply(mut cfg: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig, Error> {
    if cfg.experiment == ExperimentKind::Converge && (o.h.is_some() || o.horizon.is_some()) {
        return Err(Error::Config {
            key: "h".into(),
            line: None,
            message: "set converge.h_levels and converge.delta in a config file instead".into(),
        });
    }
    if let Some(h) = o.h {
        cfg.h = h;
    }
    if let Some(d) = o.horizon {
        cfg.horizon = d;
    }
    if let Some(out) = &o.output {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate(None)?;
    Ok(cfg)
}

fn report(s: &RunSummary, dir: &Path) {
    println!("experiment      {}", s.experiment);
    println!("points / nodes  {} / {}", s.num_points, s.num_nodes);
    println!("controls        {} nonlocal, {} local", s.nonlocal_controls, s.local_controls);
    println!("objective       {:e} -> {:e}", s.initial_objective, s.objective);
    println!("gradient norm   {:e}", s.gradient_norm);
    println!("iterations      {} ({})", s.iterations, s.termination);
    println!("mismatch rms    {:e}", s.mismatch_rms);
    if let (Some(en), Some(el)) = (s.error_n, s.error_l) {
        println!("relative error  nonlocal {en:e}, local {el:e}");
    }
    if let Some(c) = &s.convergence {
        for l in &c.levels {
            println!("  h = {:.6}  error_n = {:e}  error_l = {:e}", l.h, l.error_n, l.error_l);
        }
        let fmt = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("rates           nonlocal {}, local {}", fmt(c.rate_n), fmt(c.rate_l));
    }
    for (set, r) in &s.reactions {
        println!("reaction {set:<12} [{:e}, {:e}, {:e}]", r[0], r[1], r[2]);
    }
    println!("output          {}", dir.display());
}

fn run(cli: Cli) -> Result<(), Error> {
    let (cfg, gradient) = match &cli.command {
        Command::PatchTest(o) => (apply(canned_config(ExperimentKind::PatchTest)?, o)?, false),
        Command::Converge(o) => (apply(canned_config(ExperimentKind::Converge)?, o)?, false),
        Command::BarDirichlet(o) => (apply(canned_config(ExperimentKind::BarDirichlet)?, o)?, false),
        Command::BarNeumann(o) => (apply(canned_config(ExperimentKind::BarNeumann)?, o)?, false),
        Command::Run { config, overrides } => (apply(load_config(config)?, overrides)?, false),
        Command::CheckGradient { config, overrides } => (apply(load_config(config)?, overrides)?, true),
    };
    if gradient {
        let gc = experiments::run_gradient_check(&cfg)?;
        for (k, an, fd) in &gc.entries {
            println!("component {k:>8}  analytic {an:+.12e}  difference {fd:+.12e}");
        }
        println!("max relative error {:e}", gc.max_relative_error);
        if gc.max_relative_error > 1e-6 {
            return Err(Error::Validation(format!("gradient check failed: {:e} > 1e-6", gc.max_relative_error)));
        }
        return Ok(());
    }
    let dir = PathBuf::from(&cfg.output_dir);
    let summary = experiments::run_experiment(&cfg, &dir)?;
    report(&summary, &dir);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
