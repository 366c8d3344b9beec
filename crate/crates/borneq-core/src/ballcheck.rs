//! Numerical test of the ball characterization: among smooth domains, only
//! the ball has an equilibrium measure that is a constant multiple of the
//! surface measure. The artifact reports a calibrated comparative
//! statistic, never an absolute verdict: the continuum theorem is exact,
//! the discretization is not.

use crate::equilibrium::{lambda_bisection_equilibrium, BisectionConfig};
use crate::error::{Error, Result};
use crate::functionals::Model;
use crate::geometry::{build_boundary_mesh, build_grid, BoundaryMesh, DomainSpec};
use crate::measures::BoundaryMeasure;
use crate::solver::SolverConfig;

/// Spread statistic of the density `d_i = q_i / w_i` against the surface
/// measure.
#[derive(Clone, Debug)]
pub struct UniformityReport {
    /// `(max d - min d) / mean d`; zero exactly for constant density.
    pub deviation: f64,
    pub densities: Vec<f64>,
    /// Quartiles (q1, median, q3) of the densities, for diagnosis.
    pub quartiles: (f64, f64, f64),
    pub mean: f64,
}

/// Density spread of a boundary measure relative to the mesh quadrature
/// weights.
pub fn uniformity_deviation(
    rho: &BoundaryMeasure,
    mesh: &BoundaryMesh,
) -> Result<UniformityReport> {
    if rho.len() != mesh.len() {
        return Err(Error::InvalidParameter(format!(
            "measure has {} weights, mesh has {} points",
            rho.len(),
            mesh.len()
        )));
    }
    if let Some(idx) = mesh.weights.iter().position(|&w| w <= 0.0) {
        return Err(Error::ZeroWeight { index: idx });
    }
    let densities: Vec<f64> = rho
        .weights()
        .iter()
        .zip(mesh.weights.iter())
        .map(|(q, w)| q / w)
        .collect();
    let mean = densities.iter().sum::<f64>() / densities.len() as f64;
    let mut sorted = densities.clone();
    sorted.sort_by(f64::total_cmp);
    let pick = |f: f64| sorted[(f * (sorted.len() - 1) as f64).round() as usize];
    let deviation = (sorted[sorted.len() - 1] - sorted[0]) / mean;
    Ok(UniformityReport {
        deviation,
        quartiles: (pick(0.25), pick(0.5), pick(0.75)),
        densities,
        mean,
    })
}

/// One row of the characterization sweep.
#[derive(Clone, Debug)]
pub struct ExperimentRow {
    pub domain_label: String,
    pub model: Model,
    pub lambda_star: Option<f64>,
    pub deviation: Option<f64>,
    pub densities: Vec<f64>,
    pub error: Option<String>,
}

/// Sweep controls: the shared (matched) resolution for every row.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub box_half_width: f64,
    pub grid_points: usize,
    pub boundary_points: usize,
    pub models: Vec<Model>,
    pub solver_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            box_half_width: 4.0,
            grid_points: 81,
            boundary_points: 1024,
            models: vec![Model::BornInfeld, Model::Truncated(1), Model::Truncated(3)],
            solver_tolerance: 1e-8,
        }
    }
}

fn domain_label(domain: &DomainSpec) -> String {
    match domain.shape {
        crate::geometry::Shape::Ball { radius } => format!("ball({radius})"),
        crate::geometry::Shape::Ellipsoid { semi_axes: a } => {
            format!("ellipsoid({},{},{})", a[0], a[1], a[2])
        }
        crate::geometry::Shape::Superellipsoid {
            semi_axes: a,
            exponent,
        } => format!("superellipsoid({},{},{};p={exponent})", a[0], a[1], a[2]),
    }
}

/// Equilibrium density-uniformity sweep over domains and models at matched
/// resolution. Failures are recorded per row; the sweep continues.
pub fn characterization_experiment(
    domains: &[DomainSpec],
    cfg: &ExperimentConfig,
) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    for domain in domains {
        for &model in &cfg.models {
            let label = domain_label(domain);
            let run = || -> Result<(f64, f64, Vec<f64>)> {
                let grid = build_grid(domain, cfg.box_half_width, cfg.grid_points)?;
                let mesh = build_boundary_mesh(domain, cfg.boundary_points)?;
                let bis = BisectionConfig {
                    solver: SolverConfig {
                        model,
                        tolerance: cfg.solver_tolerance,
                        ..Default::default()
                    },
                    ..Default::default()
                };
                let eq = lambda_bisection_equilibrium(domain, &mesh, grid, &bis)?;
                let report = uniformity_deviation(&eq.measure, &mesh)?;
                Ok((eq.lambda_star, report.deviation, report.densities))
            };
            match run() {
                Ok((lambda, deviation, densities)) => rows.push(ExperimentRow {
                    domain_label: label,
                    model,
                    lambda_star: Some(lambda),
                    deviation: Some(deviation),
                    densities,
                    error: None,
                }),
                Err(e) => rows.push(ExperimentRow {
                    domain_label: label,
                    model,
                    lambda_star: None,
                    deviation: None,
                    densities: Vec::new(),
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    rows
}
