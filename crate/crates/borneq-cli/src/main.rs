use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use borneq_cli::config::{parse_domain_config, parse_model, DomainConfig};
use borneq_cli::run::{
    run_ballcheck, run_equilibrium, run_radial, run_solve, run_sweep_n, BallcheckArgs,
    EquilibriumArgs, RadialArgs, RouteChoice, SolveArgs, SweepArgs,
};
use borneq_cli::{CliError, CliResult};

/// Born-Infeld electrostatics: potentials, equilibrium measures, radial
/// oracles, and the ball-characterization experiment.
#[derive(Parser)]
#[command(name = "borneq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact radial solution on a ball in any dimension N >= 3.
    Radial {
        /// Ball radius.
        #[arg(long = "R")]
        radius: f64,
        /// Space dimension.
        #[arg(long = "N", default_value_t = 3)]
        dimension: usize,
        /// Model: `bi` or `n=<order>`.
        #[arg(long, default_value = "bi")]
        model: String,
        /// Total charge on the sphere.
        #[arg(long, default_value_t = 1.0)]
        charge: f64,
        /// Profile sample count.
        #[arg(long, default_value_t = 129)]
        samples: usize,
        /// Output directory (optional; summary always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Potential of the uniform boundary measure on a domain.
    Solve {
        /// Domain config file.
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value = "bi")]
        model: String,
        /// Grid points per axis (overrides the config).
        #[arg(long)]
        grid: Option<usize>,
        /// Box half-width (overrides the config).
        #[arg(long = "box")]
        box_halfwidth: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equilibrium measure and potential by one or both routes.
    Equilibrium {
        #[arg(long)]
        domain: PathBuf,
        /// fw | bisect | both
        #[arg(long, default_value = "both")]
        route: String,
        #[arg(long, default_value = "bi")]
        model: String,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long = "box")]
        box_halfwidth: Option<f64>,
        /// Seed for the random probe measures in the diagnostics.
        #[arg(long, default_value_t = 20240801)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equilibrium-density uniformity sweep over domains and models.
    Ballcheck {
        /// Comma-separated domain config files; the first fixes the
        /// matched resolution.
        #[arg(long)]
        domains: String,
        /// Comma-separated models, e.g. `bi,n=1`.
        #[arg(long, default_value = "bi,n=1,n=3")]
        models: String,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long = "box")]
        box_halfwidth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truncation-order sweep of the equilibrium energies.
    #[command(name = "sweep-n")]
    SweepN {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long = "max-n", default_value_t = 6)]
        max_n: usize,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long = "box")]
        box_halfwidth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(
    path: &PathBuf,
    grid: Option<usize>,
    box_halfwidth: Option<f64>,
) -> CliResult<DomainConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {path:?}: {e}")))?;
    let mut cfg = parse_domain_config(&text)?;
    if let Some(m) = grid {
        cfg.grid_points = m;
        cfg.raw.insert("grid_points".into(), m.to_string());
    }
    if let Some(l) = box_halfwidth {
        cfg.box_halfwidth = l;
        cfg.raw.insert("box_halfwidth".into(), l.to_string());
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Radial {
            radius,
            dimension,
            model,
            charge,
            samples,
            out,
        } => {
            let args = RadialArgs {
                radius,
                dimension,
                model: parse_model(&model)?,
                charge,
                samples,
                out,
            };
            let summary = run_radial(&args)?;
            print!("{summary}");
            Ok(())
        }
        Command::Solve {
            domain,
            model,
            grid,
            box_halfwidth,
            tolerance,
            out,
        } => run_solve(&SolveArgs {
            config: load_config(&domain, grid, box_halfwidth)?,
            model: parse_model(&model)?,
            tolerance,
            out,
        }),
        Command::Equilibrium {
            domain,
            route,
            model,
            grid,
            box_halfwidth,
            seed,
            out,
        } => {
            let route = match route.as_str() {
                "fw" => RouteChoice::Fw,
                "bisect" => RouteChoice::Bisect,
                "both" => RouteChoice::Both,
                other => {
                    return Err(CliError::Validation(format!(
                        "unknown route {other:?} (fw | bisect | both)"
                    )))
                }
            };
            run_equilibrium(&EquilibriumArgs {
                config: load_config(&domain, grid, box_halfwidth)?,
                route,
                model: parse_model(&model)?,
                seed,
                out,
            })
        }
        Command::Ballcheck {
            domains,
            models,
            grid,
            box_halfwidth,
            out,
        } => {
            let configs = domains
                .split(',')
                .map(|p| load_config(&PathBuf::from(p), grid, box_halfwidth))
                .collect::<CliResult<Vec<_>>>()?;
            let models = models
                .split(',')
                .map(parse_model)
                .collect::<CliResult<Vec<_>>>()?;
            run_ballcheck(&BallcheckArgs {
                configs,
                models,
                out,
            })
        }
        Command::SweepN {
            domain,
            max_n,
            grid,
            box_halfwidth,
            out,
        } => run_sweep_n(&SweepArgs {
            config: load_config(&domain, grid, box_halfwidth)?,
            max_n,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("borneq-error code={} kind={} msg={:?}", e.exit_code(), e.kind(), e.to_string());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
