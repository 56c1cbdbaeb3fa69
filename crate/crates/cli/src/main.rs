mod bench;
mod commands;
mod config;
mod error;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ProblemKind, RunConfig};
use error::CliResult;

#[derive(Parser, Debug)]
#[command(
    name = "randpgd",
    version,
    about = "Randomized a posteriori error estimation for PGD approximations"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set sketch.w=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output root (overrides the config file and RANDPGD_OUTPUT_ROOT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    problem: Option<ProblemKind>,
    /// Manifest of an exported problem; implies `--problem external`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Greedy PGD approximation of the primal problem.
    Solve {
        #[arg(long)]
        rank: Option<usize>,
        /// `min_residual` or `galerkin`.
        #[arg(long)]
        formulation: Option<String>,
    },
    /// Intertwined primal-dual construction up to a certified tolerance.
    Certify {
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        k_lag: Option<usize>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Fixed sketch size instead of the sized one.
        #[arg(short = 'K', long = "K")]
        k: Option<usize>,
        #[arg(long)]
        l_max: Option<usize>,
        /// `minus` or `plus`.
        #[arg(long)]
        increment: Option<String>,
        #[arg(long)]
        baselines: bool,
    },
    /// Randomized error estimates for a given (or freshly computed) primal tensor.
    Estimate {
        #[arg(long)]
        primal: Option<PathBuf>,
        /// Primal rank when no tensor file is given.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(short = 'K', long = "K")]
        k: Option<usize>,
        #[arg(short = 'L', long = "L")]
        l: Option<usize>,
        /// Reuse a sketch written by an earlier run.
        #[arg(long)]
        sketch: Option<PathBuf>,
        /// Compare against direct solves (effectivity report).
        #[arg(long)]
        truth: bool,
    },
    /// Benchmark tables and figure data.
    Bench {
        #[arg(value_enum)]
        target: bench::Target,
        #[arg(short = 'K', long = "K")]
        k: Option<usize>,
        #[arg(short = 'L', long = "L")]
        l: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        stag_k: Option<usize>,
        #[arg(long)]
        m_max: Option<usize>,
    },
    /// Write the problem as Matrix Market files plus a manifest, or one solution vector.
    Export {
        #[arg(long)]
        tensor: Option<PathBuf>,
        /// Grid multi-index, e.g. `3,0`.
        #[arg(long)]
        index: Option<String>,
    },
}

fn set<T: std::fmt::Display>(sets: &mut Vec<String>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        sets.push(format!("{key}={v}"));
    }
}

fn quoted(v: Option<String>) -> Option<String> {
    v.map(|s| format!("\"{s}\""))
}

fn load(global: Global, extra: Vec<String>) -> CliResult<RunConfig> {
    let mut sets = global.sets;
    sets.extend(extra);
    let mut cfg = RunConfig::load(global.config.as_deref(), &sets)?;
    if let Some(o) = global.out {
        cfg.output = o;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(m) = global.manifest {
        cfg.problem.manifest = Some(m);
        cfg.problem.kind = ProblemKind::External;
    }
    if let Some(k) = global.problem {
        cfg.problem.kind = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut extra = Vec::new();
    match cli.command {
        Command::Solve { rank, formulation } => {
            set(&mut extra, "pgd.formulation", quoted(formulation));
            let cfg = load(cli.global, extra)?;
            commands::solve(&cfg, &commands::SolveArgs { rank })
        }
        Command::Certify {
            tol,
            m_max,
            alpha,
            k_lag,
            w,
            delta,
            k,
            l_max,
            increment,
            baselines,
        } => {
            set(&mut extra, "certify.tol", tol);
            set(&mut extra, "certify.m_max", m_max);
            set(&mut extra, "certify.alpha", alpha);
            set(&mut extra, "certify.k_lag", k_lag);
            set(&mut extra, "certify.l_max", l_max);
            set(&mut extra, "certify.increment", quoted(increment));
            set(&mut extra, "sketch.w", w);
            set(&mut extra, "sketch.delta", delta);
            set(&mut extra, "sketch.k", k);
            let cfg = load(cli.global, extra)?;
            commands::certify(&cfg, &commands::CertifyArgs { baselines })
        }
        Command::Estimate {
            primal,
            rank,
            k,
            l,
            sketch,
            truth,
        } => {
            let cfg = load(cli.global, extra)?;
            commands::estimate(
                &cfg,
                &commands::EstimateArgs {
                    primal,
                    rank,
                    k,
                    l,
                    sketch,
                    truth,
                },
            )
        }
        Command::Bench {
            target,
            k,
            l,
            reps,
            bins,
            points,
            rank,
            stag_k,
            m_max,
        } => {
            let cfg = load(cli.global, extra)?;
            bench::run(
                &cfg,
                target,
                &bench::BenchArgs {
                    k,
                    l,
                    reps,
                    bins,
                    points,
                    rank,
                    stag_k,
                    m_max,
                },
            )
        }
        Command::Export { tensor, index } => {
            let cfg = load(cli.global, extra)?;
            commands::export(&cfg, &commands::ExportArgs { tensor, index })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                error::EXIT_USAGE as u8
            } else {
                error::EXIT_OK as u8
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(error::EXIT_OK as u8),
        Err(e) => {
            eprintln!("randpgd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
