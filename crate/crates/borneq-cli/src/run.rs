//! Subcommand orchestration. Each runner validates everything first (no
//! files are written on validation failure), solves, then persists data
//! files plus a hashed manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use borneq_core::ballcheck::{characterization_experiment, uniformity_deviation, ExperimentConfig};
use borneq_core::equilibrium::{
    cross_validate, equilibrium_diagnostics, frank_wolfe_equilibrium,
    lambda_bisection_equilibrium, BisectionConfig, EquilibriumResult, FwConfig,
};
use borneq_core::functionals::{
    alpha_coefficients, bi_action, energy_k, energy_kn, truncated_action, ChargeSource,
};
use borneq_core::geometry::{build_boundary_mesh, build_grid, DomainSpec};
use borneq_core::measures::uniform_measure;
use borneq_core::radial::{radial_potential, RadialConfig};
use borneq_core::solver::{solve_potential, solve_potential_from, SolverConfig};
use borneq_core::{GridFunction, Model};

use crate::config::DomainConfig;
use crate::manifest::RunManifest;
use crate::output::{density_csv, fmt_full, potential_axis_csv, radial_profile_csv, OutputDir};
use crate::{CliError, CliResult};

fn model_flag(model: Model) -> String {
    model.label()
}

/// `radial` subcommand: exact radial profile and plateau value.
pub struct RadialArgs {
    pub radius: f64,
    pub dimension: usize,
    pub model: Model,
    pub charge: f64,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

pub fn run_radial(args: &RadialArgs) -> CliResult<String> {
    let cfg = RadialConfig {
        samples: args.samples,
        ..Default::default()
    };
    let profile = radial_potential(args.radius, args.dimension, args.model, args.charge, &cfg)?;
    let summary = format!(
        "{{\n  \"R\": {},\n  \"N\": {},\n  \"model\": \"{}\",\n  \"charge\": {},\n  \"lambda_star\": {}\n}}\n",
        fmt_full(args.radius),
        args.dimension,
        model_flag(args.model),
        fmt_full(args.charge),
        fmt_full(profile.lambda_star)
    );
    if let Some(dir) = &args.out {
        let start = Instant::now();
        let mut out = OutputDir::create(dir)?;
        out.write("radial_profile.csv", radial_profile_csv(&profile).as_bytes())?;
        out.write("radial_summary.json", summary.as_bytes())?;
        let mut manifest = RunManifest::new("radial", 0);
        manifest.config_kv("R", args.radius);
        manifest.config_kv("N", args.dimension);
        manifest.config_kv("model", model_flag(args.model));
        manifest.config_kv("charge", args.charge);
        manifest.timing("total", start.elapsed().as_secs_f64());
        manifest.write(out.into_files(), dir)?;
    }
    Ok(summary)
}

/// `solve` subcommand: potential of the uniform boundary measure.
pub struct SolveArgs {
    pub config: DomainConfig,
    pub model: Model,
    pub tolerance: f64,
    pub out: PathBuf,
}

pub fn run_solve(args: &SolveArgs) -> CliResult<()> {
    let cfg = &args.config;
    let grid = build_grid(&cfg.domain, cfg.box_halfwidth, cfg.grid_points)?;
    let mesh = build_boundary_mesh(&cfg.domain, cfg.boundary_points)?;
    let rho = uniform_measure(&mesh)?;
    let charge = ChargeSource::Measure {
        measure: &rho,
        mesh: &mesh,
    };
    let solver = SolverConfig {
        model: args.model,
        tolerance: args.tolerance,
        ..Default::default()
    };
    let start = Instant::now();
    let (phi, report) = solve_potential(charge, grid, &solver)?;
    if !report.converged {
        return Err(CliError::Solver(format!(
            "solver did not converge (residual {:.3e})",
            report.residual
        )));
    }
    let solve_time = start.elapsed().as_secs_f64();
    let pairing = charge.pairing(&phi);

    let mut out = OutputDir::create(&args.out)?;
    let mut measure_csv = Vec::new();
    rho.write_csv(&mesh, &mut measure_csv)?;
    out.write("measure.csv", &measure_csv)?;
    out.write("potential_axis.csv", potential_axis_csv(&phi).as_bytes())?;
    let mut snapshot = Vec::new();
    phi.write_binary(&mut snapshot)?;
    out.write("potential.bqgf", &snapshot)?;
    let report_json = format!(
        "{{\n  \"model\": \"{}\",\n  \"iterations\": {},\n  \"final_action\": {},\n  \"residual\": {},\n  \"theta\": {},\n  \"pairing\": {},\n  \"converged\": {}\n}}\n",
        model_flag(args.model),
        report.iterations,
        fmt_full(report.final_action),
        fmt_full(report.residual),
        fmt_full(report.theta),
        fmt_full(pairing),
        report.converged
    );
    out.write("report.json", report_json.as_bytes())?;

    let mut manifest = RunManifest::new("solve", 0);
    for (k, v) in &cfg.raw {
        manifest.config_kv(k, v);
    }
    manifest.config_kv("model", model_flag(args.model));
    manifest.config_kv("tolerance", args.tolerance);
    manifest.timing("solve", solve_time);
    manifest.write(out.into_files(), &args.out)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteChoice {
    Fw,
    Bisect,
    Both,
}

/// `equilibrium` subcommand.
pub struct EquilibriumArgs {
    pub config: DomainConfig,
    pub route: RouteChoice,
    pub model: Model,
    pub seed: u64,
    pub out: PathBuf,
}

fn equilibrium_summary_json(
    eq: &EquilibriumResult,
    diag: &borneq_core::equilibrium::DiagnosticsReport,
) -> String {
    format!(
        "{{\n  \"route\": \"{}\",\n  \"model\": \"{}\",\n  \"lambda_star\": {},\n  \"gap\": {},\n  \"theta\": {},\n  \"iterations\": {},\n  \"plateau_spread\": {},\n  \"probe_max_deviation\": {},\n  \"probe_seed\": {},\n  \"timings\": {{ \"total_ms\": {:.3} }}\n}}\n",
        eq.route.label(),
        model_flag(eq.model),
        fmt_full(eq.lambda_star),
        fmt_full(eq.gap),
        fmt_full(eq.theta),
        eq.iterations,
        fmt_full(diag.plateau_spread),
        fmt_full(diag.probe_max_deviation),
        diag.seed,
        eq.wall_time_s * 1000.0,
    )
}

pub fn run_equilibrium(args: &EquilibriumArgs) -> CliResult<()> {
    let cfg = &args.config;
    let grid = build_grid(&cfg.domain, cfg.box_halfwidth, cfg.grid_points)?;
    let mesh = build_boundary_mesh(&cfg.domain, cfg.boundary_points)?;
    let solver = SolverConfig {
        model: args.model,
        ..Default::default()
    };
    let start = Instant::now();
    let mut results: Vec<EquilibriumResult> = Vec::new();
    if matches!(args.route, RouteChoice::Fw | RouteChoice::Both) {
        let fw_cfg = FwConfig {
            solver,
            gap_tolerance: 0.02,
            ..Default::default()
        };
        results.push(frank_wolfe_equilibrium(&mesh, grid, &fw_cfg, None)?);
    }
    if matches!(args.route, RouteChoice::Bisect | RouteChoice::Both) {
        let bis_cfg = BisectionConfig {
            solver,
            ..Default::default()
        };
        results.push(lambda_bisection_equilibrium(&cfg.domain, &mesh, grid, &bis_cfg)?);
    }

    let mut out = OutputDir::create(&args.out)?;
    for eq in &results {
        let tag = eq.route.label();
        let mut measure_csv = Vec::new();
        eq.measure.write_csv(&mesh, &mut measure_csv)?;
        out.write(&format!("measure_{tag}.csv"), &measure_csv)?;
        out.write(
            &format!("potential_axis_{tag}.csv"),
            potential_axis_csv(&eq.potential).as_bytes(),
        )?;
        let diag = equilibrium_diagnostics(eq, &cfg.domain, &mesh, args.seed, 10);
        out.write(
            &format!("summary_{tag}.json"),
            equilibrium_summary_json(eq, &diag).as_bytes(),
        )?;
    }
    if results.len() == 2 {
        let cv = cross_validate(&results[0], &results[1], &cfg.domain, &mesh);
        let json = format!(
            "{{\n  \"lambda_rel_diff\": {},\n  \"potential_sup_diff\": {},\n  \"tv_distance\": {}\n}}\n",
            fmt_full(cv.lambda_rel_diff),
            fmt_full(cv.potential_sup_diff),
            fmt_full(cv.tv_distance)
        );
        out.write("cross_validation.json", json.as_bytes())?;
    }

    let mut manifest = RunManifest::new("equilibrium", args.seed);
    for (k, v) in &cfg.raw {
        manifest.config_kv(k, v);
    }
    manifest.config_kv("route", format!("{:?}", args.route).to_lowercase());
    manifest.config_kv("model", model_flag(args.model));
    manifest.timing("total", start.elapsed().as_secs_f64());
    manifest.write(out.into_files(), &args.out)?;
    Ok(())
}

/// `ballcheck` subcommand.
pub struct BallcheckArgs {
    pub configs: Vec<DomainConfig>,
    pub models: Vec<Model>,
    pub out: PathBuf,
}

pub fn run_ballcheck(args: &BallcheckArgs) -> CliResult<()> {
    let first = args
        .configs
        .first()
        .ok_or_else(|| CliError::Validation("ballcheck needs at least one domain".into()))?;
    for cfg in &args.configs {
        // Matched resolution across rows comes from the first config.
        build_grid(&cfg.domain, first.box_halfwidth, first.grid_points)?;
    }
    let domains: Vec<DomainSpec> = args.configs.iter().map(|c| c.domain).collect();
    let exp = ExperimentConfig {
        box_half_width: first.box_halfwidth,
        grid_points: first.grid_points,
        boundary_points: first.boundary_points,
        models: args.models.clone(),
        ..Default::default()
    };
    let start = Instant::now();
    let rows = characterization_experiment(&domains, &exp);

    let mut out = OutputDir::create(&args.out)?;
    let mut csv = String::from("domain,model,lambda_star,delta,error\n");
    for (i, row) in rows.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.domain_label,
            model_flag(row.model),
            row.lambda_star.map(fmt_full).unwrap_or_default(),
            row.deviation.map(fmt_full).unwrap_or_default(),
            row.error.clone().unwrap_or_default()
        ));
        if !row.densities.is_empty() {
            let mesh = build_boundary_mesh(&domains[i / args.models.len()], exp.boundary_points)?;
            out.write(
                &format!("density_{}_{}.csv", i, model_flag(row.model)),
                density_csv(&mesh, &row.densities).as_bytes(),
            )?;
        }
    }
    out.write("summary.csv", csv.as_bytes())?;
    let mut manifest = RunManifest::new("ballcheck", 0);
    manifest.config_kv("box_halfwidth", exp.box_half_width);
    manifest.config_kv("grid_points", exp.grid_points);
    manifest.config_kv("boundary_points", exp.boundary_points);
    manifest.timing("total", start.elapsed().as_secs_f64());
    manifest.write(out.into_files(), &args.out)?;
    Ok(())
}

/// `sweep-n` subcommand: truncation-order sweep of the equilibrium energies.
pub struct SweepArgs {
    pub config: DomainConfig,
    pub max_n: usize,
    pub out: PathBuf,
}

pub struct SweepRow {
    pub model: Model,
    pub k_value: f64,
    pub action: f64,
    pub lambda: f64,
}

/// Energy sweep over truncation orders 1..=max_n plus the BI limit row.
///
/// On a ball the uniform measure is the exact equilibrium measure for every
/// model, so the sweep fixes it and the strict monotonicity of the discrete
/// energies is inherited from the variational comparison at fixed charge.
/// Other domains get their per-model equilibrium measure by bisection.
pub fn sweep_rows(config: &DomainConfig, max_n: usize) -> CliResult<Vec<SweepRow>> {
    if max_n < 1 {
        return Err(CliError::Validation("max-n must be >= 1".into()));
    }
    let grid = build_grid(&config.domain, config.box_halfwidth, config.grid_points)?;
    let mesh = build_boundary_mesh(&config.domain, config.boundary_points)?;
    let mut rows = Vec::new();
    let models: Vec<Model> = (1..=max_n)
        .map(Model::Truncated)
        .chain([Model::BornInfeld])
        .collect();
    let mut warm: Option<GridFunction> = None;
    for model in models {
        let solver = SolverConfig {
            model,
            tolerance: 1e-10,
            ..Default::default()
        };
        let (phi, lambda) = if config.domain.is_ball() {
            let rho = uniform_measure(&mesh)?;
            let charge = ChargeSource::Measure {
                measure: &rho,
                mesh: &mesh,
            };
            let (phi, report) = solve_potential_from(charge, grid, &solver, warm.as_ref())?;
            if !report.converged {
                return Err(CliError::Solver(format!(
                    "sweep solve for {} did not converge (residual {:.3e})",
                    model_flag(model),
                    report.residual
                )));
            }
            let lambda = charge.pairing(&phi);
            (phi, lambda)
        } else {
            let bis = BisectionConfig {
                solver,
                ..Default::default()
            };
            let eq = lambda_bisection_equilibrium(&config.domain, &mesh, grid, &bis)?;
            (eq.potential, eq.lambda_star)
        };
        let (k_value, action) = match model {
            Model::BornInfeld => {
                let a = bi_action(
                    &phi,
                    ChargeSource::None,
                )?;
                // Pairing against the sweep's own measure closes the action.
                (energy_k(&phi)?, a.bulk - lambda)
            }
            Model::Truncated(n) => {
                let coeffs = alpha_coefficients(n)?;
                let a = truncated_action(&phi, ChargeSource::None, &coeffs);
                (energy_kn(&phi, &coeffs), a.bulk - lambda)
            }
        };
        rows.push(SweepRow {
            model,
            k_value,
            action,
            lambda,
        });
        warm = Some(phi);
    }
    Ok(rows)
}

pub fn run_sweep_n(args: &SweepArgs) -> CliResult<()> {
    let start = Instant::now();
    let rows = sweep_rows(&args.config, args.max_n)?;
    let mut out = OutputDir::create(&args.out)?;
    let mut csv = String::from("model,k_n,action_n,lambda_n\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            model_flag(row.model),
            fmt_full(row.k_value),
            fmt_full(row.action),
            fmt_full(row.lambda)
        ));
    }
    out.write("sweep.csv", csv.as_bytes())?;
    let mut manifest = RunManifest::new("sweep-n", 0);
    for (k, v) in &args.config.raw {
        manifest.config_kv(k, v);
    }
    manifest.config_kv("max_n", args.max_n);
    manifest.timing("total", start.elapsed().as_secs_f64());
    manifest.write(out.into_files(), &args.out)?;
    Ok(())
}

/// The grid-vs-oracle sweep: solve the uniform unit-sphere measure at
/// matched spacing in boxes of increasing half-width, extrapolate the
/// plateau and pointwise values, and persist everything. Returns
/// (lambda per L, probes per L) for the caller's assertions.
pub struct GridOracleLeg {
    pub half_width: f64,
    pub grid_points: usize,
    pub lambda: f64,
    pub probes: [f64; 3],
}

pub const GRID_ORACLE_PROBE_RADII: [f64; 3] = [1.5, 2.0, 3.0];

pub fn grid_oracle_sweep(
    legs: &[(f64, usize)],
    boundary_points: usize,
    out_dir: &Path,
) -> CliResult<Vec<GridOracleLeg>> {
    let dom = DomainSpec::ball(1.0);
    let mesh = build_boundary_mesh(&dom, boundary_points)?;
    let rho = uniform_measure(&mesh)?;
    let start = Instant::now();
    let mut out = OutputDir::create(out_dir)?;
    let mut results = Vec::new();
    let mut csv = String::from("L,m,lambda,phi_1_5,phi_2,phi_3\n");
    for &(half_width, grid_points) in legs {
        let grid = build_grid(&dom, half_width, grid_points)?;
        let charge = ChargeSource::Measure {
            measure: &rho,
            mesh: &mesh,
        };
        let (phi, report) = solve_potential(charge, grid, &SolverConfig::default())?;
        if !report.converged {
            return Err(CliError::Solver(format!(
                "grid-oracle leg L={half_width} did not converge (residual {:.3e})",
                report.residual
            )));
        }
        let lambda = charge.pairing(&phi);
        let probes = [
            phi.interp([GRID_ORACLE_PROBE_RADII[0], 0.0, 0.0]),
            phi.interp([GRID_ORACLE_PROBE_RADII[1], 0.0, 0.0]),
            phi.interp([GRID_ORACLE_PROBE_RADII[2], 0.0, 0.0]),
        ];
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_full(half_width),
            grid_points,
            fmt_full(lambda),
            fmt_full(probes[0]),
            fmt_full(probes[1]),
            fmt_full(probes[2])
        ));
        out.write(
            &format!("potential_axis_m{grid_points}.csv"),
            potential_axis_csv(&phi).as_bytes(),
        )?;
        results.push(GridOracleLeg {
            half_width,
            grid_points,
            lambda,
            probes,
        });
    }
    out.write("grid_oracle_sweep.csv", csv.as_bytes())?;
    let mut manifest = RunManifest::new("grid-oracle-sweep", 0);
    manifest.config_kv("boundary_points", boundary_points);
    manifest.config_kv(
        "legs",
        legs.iter()
            .map(|(l, m)| format!("{l}:{m}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.timing("total", start.elapsed().as_secs_f64());
    manifest.write(out.into_files(), out_dir)?;
    Ok(results)
}

/// Convenience wrapper for tests: uniformity deviation of an equilibrium
/// measure computed at a given resolution.
pub fn delta_of(eq: &EquilibriumResult, mesh: &borneq_core::BoundaryMesh) -> CliResult<f64> {
    Ok(uniformity_deviation(&eq.measure, mesh)?.deviation)
}
