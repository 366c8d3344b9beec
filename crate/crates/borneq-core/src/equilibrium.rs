//! Equilibrium measures and potentials by two independent routes.
//!
//! Route one is conditional gradient (Frank-Wolfe) on the energy over the
//! probability simplex of mesh weights: the linear minimization oracle is a
//! Dirac at the mesh point where the current potential is smallest, and the
//! duality gap `<rho, phi> - min phi` is a computable optimality
//! certificate. Route two solves the exterior Dirichlet problem at plateau
//! level lambda and bisects on the total normal-flux mass, which is strictly
//! increasing in lambda; the level with unit mass is the equilibrium one.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::functionals::{max_gradient, ChargeSource, Model};
use crate::geometry::{BoundaryMesh, DomainSpec, Grid, GridFunction};
use crate::measures::{uniform_measure, BoundaryMeasure};
use crate::par;
use crate::radial;
use crate::rng::SplitMix64;
use crate::solver::{
    displacement_measure, plateau_flux_mass, solve_exterior_dirichlet_warm, solve_potential_from,
    SolverConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    FrankWolfe,
    LambdaBisection,
}

impl Route {
    pub fn label(&self) -> &'static str {
        match self {
            Route::FrankWolfe => "fw",
            Route::LambdaBisection => "bisect",
        }
    }
}

/// One Frank-Wolfe iteration record.
#[derive(Clone, Copy, Debug)]
pub struct FwIterate {
    pub gap: f64,
    pub energy: f64,
    pub pairing: f64,
    /// Sup over mean of the iterate's density against the surface measure
    /// (1 for the uniform measure; large for concentrated iterates).
    pub density_sup_over_mean: f64,
}

/// Converged equilibrium data from either route.
#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    /// Equilibrium measure, normalized to total mass 1.
    pub measure: BoundaryMeasure,
    pub potential: GridFunction,
    pub lambda_star: f64,
    /// Optimality certificate: FW duality gap, or the pre-normalization
    /// mass residual |Upsilon(lambda) - 1| for the bisection route.
    pub gap: f64,
    pub route: Route,
    pub model: Model,
    pub theta: f64,
    pub iterations: usize,
    /// FW only: the gap stopped improving (discretization floor).
    pub floor_reached: bool,
    /// FW only: per-iteration history.
    pub history: Vec<FwIterate>,
    pub wall_time_s: f64,
}

/// Frank-Wolfe controls.
#[derive(Clone, Debug)]
pub struct FwConfig {
    pub solver: SolverConfig,
    pub max_iterations: usize,
    /// Stop when the gap falls below this fraction of the pairing.
    pub gap_tolerance: f64,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig {
            solver: SolverConfig::default(),
            max_iterations: 60,
            gap_tolerance: 1e-3,
        }
    }
}

/// Conditional gradient over the probability simplex on the mesh, starting
/// from the uniform measure (or `start`). Step size 2/(k+2); returns the
/// iterate with the smallest duality gap.
pub fn frank_wolfe_equilibrium(
    mesh: &BoundaryMesh,
    grid: Grid,
    cfg: &FwConfig,
    start: Option<&BoundaryMeasure>,
) -> Result<EquilibriumResult> {
    if cfg.max_iterations == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let begin = Instant::now();
    let mut rho = match start {
        Some(m) => m.normalized()?,
        None => uniform_measure(mesh)?,
    };
    let mut warm: Option<GridFunction> = None;
    let mut history: Vec<FwIterate> = Vec::new();
    let mut best: Option<(f64, BoundaryMeasure, GridFunction, f64, f64)> = None;
    let mut gap_increases = 0usize;
    let mut floor_reached = false;

    for k in 0..cfg.max_iterations {
        let charge = ChargeSource::Measure {
            measure: &rho,
            mesh,
        };
        let (phi, report) = solve_potential_from(charge, grid, &cfg.solver, warm.as_ref())?;
        if !report.converged {
            return Err(Error::NotConverged {
                max_iterations: cfg.solver.max_iterations,
                residual: report.residual,
            });
        }
        // Mesh-point potentials drive both the pairing and the oracle.
        let values: Vec<f64> = mesh.points.iter().map(|p| phi.interp(*p)).collect();
        let pairing = par::sum_indexed(values.len(), |i| rho.weights()[i] * values[i]);
        let (argmin, min_value) =
            values
                .iter()
                .enumerate()
                .fold((0usize, f64::INFINITY), |acc, (i, &v)| {
                    if v < acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                });
        let gap = pairing - min_value;
        let density_sup_over_mean = {
            let mut sup = f64::NEG_INFINITY;
            let mut mean = 0.0;
            for (q, w) in rho.weights().iter().zip(mesh.weights.iter()) {
                let d = q / w;
                sup = sup.max(d);
                mean += d;
            }
            sup / (mean / mesh.len() as f64)
        };
        history.push(FwIterate {
            gap,
            energy: -report.final_action,
            pairing,
            density_sup_over_mean,
        });
        match &best {
            Some((best_gap, ..)) if gap >= *best_gap => {
                gap_increases += 1;
                if gap_increases >= 10 {
                    floor_reached = true;
                }
            }
            _ => {
                gap_increases = 0;
                best = Some((gap, rho.clone(), phi.clone(), pairing, report.theta));
            }
        }
        if gap <= cfg.gap_tolerance * pairing.abs() || floor_reached {
            break;
        }
        let gamma = 2.0 / (k as f64 + 2.0);
        let dirac = BoundaryMeasure::dirac(mesh.len(), argmin);
        rho = rho.mix(&dirac, gamma);
        warm = Some(phi);
    }

    let (gap, measure, potential, pairing, theta) = best.expect("at least one iterate");
    Ok(EquilibriumResult {
        measure,
        potential,
        lambda_star: pairing,
        gap,
        route: Route::FrankWolfe,
        model: cfg.solver.model,
        theta,
        iterations: history.len(),
        floor_reached,
        history,
        wall_time_s: begin.elapsed().as_secs_f64(),
    })
}

/// Bisection controls.
#[derive(Clone, Debug)]
pub struct BisectionConfig {
    pub solver: SolverConfig,
    /// Terminate when |Upsilon(lambda) - 1| falls below this.
    pub mass_tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig {
            solver: SolverConfig::default(),
            mass_tolerance: 1e-3,
            max_evaluations: 60,
        }
    }
}

/// Total normal-flux mass of the exterior solve at plateau `lambda`.
pub fn upsilon(lambda: f64, domain: &DomainSpec, grid: Grid, cfg: &SolverConfig) -> Result<f64> {
    let (phi, report) = solve_exterior_dirichlet_warm(lambda, domain, grid, cfg, None, None)?;
    if !report.converged {
        return Err(Error::NotConverged {
            max_iterations: cfg.max_iterations,
            residual: report.residual,
        });
    }
    plateau_flux_mass(&phi, domain, cfg.model)
}

struct UpsilonDriver<'a> {
    domain: &'a DomainSpec,
    grid: Grid,
    solver: SolverConfig,
    warm: Option<(GridFunction, f64)>,
    scale: Option<f64>,
    samples: Vec<(f64, f64)>,
    evals: usize,
}

impl<'a> UpsilonDriver<'a> {
    fn mass(&mut self, lambda: f64) -> Result<f64> {
        self.evals += 1;
        // Rescale the previous exterior field as a warm start.
        let init = self.warm.as_ref().map(|(prev, prev_lambda)| {
            let mut f = prev.clone();
            let ratio = lambda / prev_lambda;
            for v in f.values_mut() {
                *v *= ratio;
            }
            f
        });
        let (phi, report) = solve_exterior_dirichlet_warm(
            lambda,
            self.domain,
            self.grid,
            &self.solver,
            init.as_ref(),
            self.scale,
        )?;
        if !report.converged {
            return Err(Error::NotConverged {
                max_iterations: self.solver.max_iterations,
                residual: report.residual,
            });
        }
        // Freeze the first (cold) solve's residual normalization so warm
        // starts face the same stopping test.
        self.scale.get_or_insert(report.residual_scale);
        let mass = plateau_flux_mass(&phi, self.domain, self.solver.model)?;
        self.samples.push((lambda, mass));
        self.warm = Some((phi, lambda));
        Ok(mass)
    }
}

/// Equilibrium by bisection on the plateau level: the unique lambda whose
/// normal-flux measure is a probability measure. The bracket starts from
/// the radial oracle values of the inscribed and circumscribed balls.
pub fn lambda_bisection_equilibrium(
    domain: &DomainSpec,
    mesh: &BoundaryMesh,
    grid: Grid,
    cfg: &BisectionConfig,
) -> Result<EquilibriumResult> {
    let begin = Instant::now();
    domain.validate()?;
    let radial_cfg = radial::RadialConfig::default();
    let lambda_out =
        radial::lambda_star(domain.circumradius(), 3, cfg.solver.model, 1.0, &radial_cfg)?;
    let lambda_in =
        radial::lambda_star(domain.inscribed_radius(), 3, cfg.solver.model, 1.0, &radial_cfg)?;
    // Box truncation raises the mass at fixed lambda, so the bracket is
    // biased low; geometric expansion handles the rest.
    let feasibility_cap = 0.95 * domain.boundary_to_box_distance(grid.half_width());
    let mut lo = 0.35 * lambda_out;
    let mut hi = (1.25 * lambda_in).min(feasibility_cap);

    let mut driver = UpsilonDriver {
        domain,
        grid,
        solver: cfg.solver,
        warm: None,
        scale: None,
        samples: Vec::new(),
        evals: 0,
    };

    let mut f_lo = driver.mass(lo)? - 1.0;
    let mut expansions = 0;
    while f_lo > 0.0 {
        lo *= 0.6;
        f_lo = driver.mass(lo)? - 1.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketNotFound(format!(
                "no lower plateau bracket below {lo}"
            )));
        }
    }
    let mut f_hi = driver.mass(hi)? - 1.0;
    while f_hi < 0.0 {
        let next = (hi * 1.5).min(feasibility_cap);
        if next <= hi * (1.0 + 1e-12) {
            return Err(Error::BracketNotFound(format!(
                "total mass stays below 1 up to the feasibility cap {feasibility_cap}"
            )));
        }
        hi = next;
        f_hi = driver.mass(hi)? - 1.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketNotFound(format!(
                "no upper plateau bracket below {hi}"
            )));
        }
    }

    let mut lambda = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    while driver.evals < cfg.max_evaluations {
        let width = hi - lo;
        let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        lambda = if secant > lo + 0.02 * width && secant < hi - 0.02 * width {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let f = driver.mass(lambda)? - 1.0;
        residual = f.abs();
        if residual < cfg.mass_tolerance {
            break;
        }
        if f < 0.0 {
            lo = lambda;
            f_lo = f;
        } else {
            hi = lambda;
            f_hi = f;
        }
    }
    if residual >= cfg.mass_tolerance {
        return Err(Error::NotConverged {
            max_iterations: cfg.max_evaluations,
            residual,
        });
    }

    // The sampled map must be strictly increasing; anything else signals a
    // solver bug, not a tolerance issue.
    let mut ordered = driver.samples.clone();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in ordered.windows(2) {
        if w[1].1 <= w[0].1 - 1e-9 * (1.0 + w[0].1.abs()) {
            return Err(Error::UpsilonNotMonotone {
                lambda_lo: w[0].0,
                mass_lo: w[0].1,
                lambda_hi: w[1].0,
                mass_hi: w[1].1,
            });
        }
    }

    let (phi, _) = driver.warm.take().expect("at least one evaluation");
    let raw = displacement_measure(&phi, domain, mesh, cfg.solver.model)?;
    let measure = raw.normalized()?;
    let theta = 1.0 - max_gradient(&phi);
    Ok(EquilibriumResult {
        measure,
        potential: phi,
        lambda_star: lambda,
        gap: residual,
        route: Route::LambdaBisection,
        model: cfg.solver.model,
        theta,
        iterations: driver.evals,
        floor_reached: false,
        history: Vec::new(),
        wall_time_s: begin.elapsed().as_secs_f64(),
    })
}

/// Agreement report between two equilibrium results on the same mesh/grid.
#[derive(Clone, Copy, Debug)]
pub struct CrossValidation {
    pub lambda_rel_diff: f64,
    pub potential_sup_diff: f64,
    pub tv_distance: f64,
}

/// Compare two equilibrium results: relative lambda* difference, sup-norm
/// potential difference over the probe set (mesh points and plateau nodes),
/// and total-variation distance of the measures.
pub fn cross_validate(
    a: &EquilibriumResult,
    b: &EquilibriumResult,
    domain: &DomainSpec,
    mesh: &BoundaryMesh,
) -> CrossValidation {
    let lambda_rel_diff = (a.lambda_star - b.lambda_star).abs() / a.lambda_star.abs().max(1e-300);
    let mut sup: f64 = 0.0;
    for p in &mesh.points {
        sup = sup.max((a.potential.interp(*p) - b.potential.interp(*p)).abs());
    }
    let grid = a.potential.grid();
    let inside = grid.inside_flags(domain);
    for (n, &ins) in inside.iter().enumerate() {
        if ins {
            sup = sup.max((a.potential.values()[n] - b.potential.values()[n]).abs());
        }
    }
    CrossValidation {
        lambda_rel_diff,
        potential_sup_diff: sup,
        tv_distance: a.measure.tv_distance(&b.measure),
    }
}

/// Constancy and optimality diagnostics for an equilibrium result.
#[derive(Clone, Debug)]
pub struct DiagnosticsReport {
    pub lambda_star: f64,
    /// Max minus min of the potential over the closed-domain nodes.
    pub plateau_spread: f64,
    /// Largest deviation of `<mu, phi>` from lambda* over seeded random
    /// probe measures (including a Dirac probe at one mesh point).
    pub probe_max_deviation: f64,
    /// Fraction of mesh points with nonnegative recovered flux density.
    pub nonnegative_flux_fraction: f64,
    pub theta: f64,
    pub seed: u64,
    pub probes: usize,
}

pub fn equilibrium_diagnostics(
    result: &EquilibriumResult,
    domain: &DomainSpec,
    mesh: &BoundaryMesh,
    seed: u64,
    probes: usize,
) -> DiagnosticsReport {
    let grid = result.potential.grid();
    let inside = grid.inside_flags(domain);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (n, &ins) in inside.iter().enumerate() {
        if ins {
            let v = result.potential.values()[n];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let plateau_spread = if hi >= lo { hi - lo } else { 0.0 };

    let values: Vec<f64> = mesh
        .points
        .iter()
        .map(|p| result.potential.interp(*p))
        .collect();
    let mut rng = SplitMix64::new(seed);
    let mut probe_max_deviation: f64 = 0.0;
    for _ in 0..probes {
        let mut w: Vec<f64> = (0..mesh.len()).map(|_| rng.next_f64()).collect();
        let total: f64 = w.iter().sum();
        for q in &mut w {
            *q /= total;
        }
        let pairing: f64 = w.iter().zip(values.iter()).map(|(q, v)| q * v).sum();
        probe_max_deviation = probe_max_deviation.max((pairing - result.lambda_star).abs());
    }
    if probes > 0 && !values.is_empty() {
        // Degenerate probe: a Dirac at one mesh point.
        let at = (rng.next_u64() % values.len() as u64) as usize;
        probe_max_deviation = probe_max_deviation.max((values[at] - result.lambda_star).abs());
    }

    let nonneg = result
        .measure
        .weights()
        .iter()
        .filter(|&&q| q >= 0.0)
        .count();
    DiagnosticsReport {
        lambda_star: result.lambda_star,
        plateau_spread,
        probe_max_deviation,
        nonnegative_flux_fraction: nonneg as f64 / mesh.len().max(1) as f64,
        theta: result.theta,
        seed,
        probes,
    }
}
