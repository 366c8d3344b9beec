//! Gradient-constrained potential solves.
//!
//! One monotone scheme serves both models: preconditioned descent on the
//! discrete action with the fast Poisson solve as preconditioner (the exact
//! Maxwell Hessian inverse on the box), an exact feasible-step cap along the
//! search ray for the BI gradient-ball constraint, and Armijo backtracking.
//! Every iterate is feasible and the action never increases.

pub mod poisson;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::functionals::{
    alpha_coefficients, cell_grad_sq, g_bi, w_bi, ChargeSource, Model, SeriesCoefficients,
    MAX_SOLVE_ORDER,
};
use crate::geometry::{BoundaryMesh, DomainSpec, Grid, GridFunction};
use crate::measures::BoundaryMeasure;
use crate::par;
use crate::radial::ConstitutiveModel;
use poisson::PoissonSolver;

/// Gradient magnitudes are capped strictly below 1 so the BI integrand and
/// its derivative stay finite on every iterate.
const SLOPE_CAP: f64 = 1.0 - 1e-10;

/// Solver controls.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub model: Model,
    pub max_iterations: usize,
    /// Relative tolerance for both the residual and the action decrease.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            model: Model::BornInfeld,
            max_iterations: 600,
            tolerance: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn with_model(model: Model) -> Self {
        SolverConfig {
            model,
            ..Default::default()
        }
    }
}

/// Outcome of one solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_action: f64,
    /// Relative Euler-Lagrange residual (diagnostic; nothing is asserted
    /// about it for non-equilibrium data).
    pub residual: f64,
    /// Spacelike margin `1 - max_cells |grad phi|`.
    pub theta: f64,
    /// Normalization used for the relative residual (reusable by callers
    /// chaining warm-started solves).
    pub residual_scale: f64,
    pub wall_time_s: f64,
    pub converged: bool,
    /// Action value after every accepted iteration (non-increasing).
    pub action_history: Vec<f64>,
}

enum Bulk {
    BornInfeld,
    Truncated(SeriesCoefficients),
}

impl Bulk {
    fn new(model: Model) -> Result<Self> {
        match model {
            Model::BornInfeld => Ok(Bulk::BornInfeld),
            Model::Truncated(n) => {
                if n > MAX_SOLVE_ORDER {
                    return Err(Error::InvalidParameter(format!(
                        "truncated solves support order <= {MAX_SOLVE_ORDER} (got {n})"
                    )));
                }
                Ok(Bulk::Truncated(alpha_coefficients(n)?))
            }
        }
    }

    #[inline]
    fn w(&self, s2: f64) -> f64 {
        match self {
            Bulk::BornInfeld => w_bi(s2.min(1.0)),
            Bulk::Truncated(c) => c.w_of_s2(s2),
        }
    }

    #[inline]
    fn g(&self, s2: f64) -> f64 {
        match self {
            Bulk::BornInfeld => g_bi(s2.min(SLOPE_CAP * SLOPE_CAP)),
            Bulk::Truncated(c) => c.g_of_s2(s2),
        }
    }

    fn constrained(&self) -> bool {
        matches!(self, Bulk::BornInfeld)
    }
}

/// Weighted cell fluxes `g(|grad phi|) grad phi`, one vector per cell.
fn weighted_cell_gradients(
    values: &[f64],
    grid: Grid,
    bulk: &Bulk,
    gx: &mut [f64],
    gy: &mut [f64],
    gz: &mut [f64],
) {
    let c = grid.cells_per_axis();
    let m = grid.points_per_axis();
    let inv_h = 1.0 / grid.spacing();
    let n_cells = grid.n_cells();
    let body = |ci: usize, gx: &mut f64, gy: &mut f64, gz: &mut f64| {
        let i = ci % c;
        let j = (ci / c) % c;
        let k = ci / (c * c);
        let base = i + m * (j + m * k);
        let v0 = values[base];
        let ax = (values[base + 1] - v0) * inv_h;
        let ay = (values[base + m] - v0) * inv_h;
        let az = (values[base + m * m] - v0) * inv_h;
        let w = bulk.g(ax * ax + ay * ay + az * az);
        *gx = w * ax;
        *gy = w * ay;
        *gz = w * az;
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        gx.par_chunks_mut(par::CHUNK)
            .zip(gy.par_chunks_mut(par::CHUNK))
            .zip(gz.par_chunks_mut(par::CHUNK))
            .enumerate()
            .for_each(|(chunk, ((cx, cy), cz))| {
                let base = chunk * par::CHUNK;
                for off in 0..cx.len() {
                    body(base + off, &mut cx[off], &mut cy[off], &mut cz[off]);
                }
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for ci in 0..n_cells {
            let (a, b, cc) = (&mut gx[ci], &mut gy[ci], &mut gz[ci]);
            body(ci, a, b, cc);
        }
    }
    let _ = n_cells;
}

/// Action gradient wrt nodal values: divergence of the weighted fluxes minus
/// the load, zeroed at pinned nodes.
fn assemble_gradient(
    grid: Grid,
    gx: &[f64],
    gy: &[f64],
    gz: &[f64],
    rho_vec: &[f64],
    pinned: &[bool],
    out: &mut [f64],
) {
    let m = grid.points_per_axis();
    let c = grid.cells_per_axis();
    let h2 = grid.spacing() * grid.spacing();
    par::fill_indexed(out, |n| {
        if pinned[n] {
            return 0.0;
        }
        let i = n % m;
        let j = (n / m) % m;
        let k = n / (m * m);
        // Interior nodes always have all four touching cells in range.
        let ci = i + c * (j + c * k);
        let mut acc = -(gx[ci] + gy[ci] + gz[ci]);
        acc += gx[ci - 1];
        acc += gy[ci - c];
        acc += gz[ci - c * c];
        h2 * acc - rho_vec[n]
    });
}

fn action_value(values: &[f64], grid: Grid, bulk: &Bulk, rho_vec: &[f64]) -> f64 {
    let h3 = grid.spacing().powi(3);
    h3 * par::sum_indexed(grid.n_cells(), |ci| bulk.w(cell_grad_sq(values, grid, ci)))
        - par::dot(rho_vec, values)
}

/// Largest step along `dir` keeping every cell gradient inside the cap
/// (infinite when the ray never reaches the cap).
fn feasible_step(values: &[f64], dir: &[f64], grid: Grid) -> f64 {
    let c = grid.cells_per_axis();
    let m = grid.points_per_axis();
    let inv_h = 1.0 / grid.spacing();
    let cap2 = SLOPE_CAP * SLOPE_CAP;
    let neg_min = par::max_indexed(grid.n_cells(), |ci| {
        let i = ci % c;
        let j = (ci / c) % c;
        let k = ci / (c * c);
        let base = i + m * (j + m * k);
        let v0 = values[base];
        let px = (values[base + 1] - v0) * inv_h;
        let py = (values[base + m] - v0) * inv_h;
        let pz = (values[base + m * m] - v0) * inv_h;
        let d0 = dir[base];
        let dx = (dir[base + 1] - d0) * inv_h;
        let dy = (dir[base + m] - d0) * inv_h;
        let dz = (dir[base + m * m] - d0) * inv_h;
        let a = dx * dx + dy * dy + dz * dz;
        if a == 0.0 {
            return f64::NEG_INFINITY;
        }
        let b = 2.0 * (px * dx + py * dy + pz * dz);
        let c0 = (px * px + py * py + pz * pz - cap2).min(0.0);
        let disc = (b * b - 4.0 * a * c0).max(0.0);
        let tau = (-b + disc.sqrt()) / (2.0 * a);
        -tau
    });
    if neg_min == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        -neg_min
    }
}

fn max_cell_gradient(values: &[f64], grid: Grid) -> f64 {
    par::max_indexed(grid.n_cells(), |ci| cell_grad_sq(values, grid, ci)).sqrt()
}

struct MinimizeSetup<'a> {
    grid: Grid,
    pinned: &'a [bool],
    rho_vec: &'a [f64],
    /// Residuals are reported relative to this norm.
    residual_scale: f64,
}

fn minimize(
    mut phi: GridFunction,
    setup: &MinimizeSetup,
    bulk: &Bulk,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    let start = Instant::now();
    let grid = setup.grid;
    let n_nodes = grid.n_nodes();
    let n_cells = grid.n_cells();
    let pinned = setup.pinned;
    let mut poisson = PoissonSolver::new(grid);
    let mut gx = vec![0.0; n_cells];
    let mut gy = vec![0.0; n_cells];
    let mut gz = vec![0.0; n_cells];
    let mut grad = vec![0.0; n_nodes];
    let mut grad_fd = vec![0.0; n_nodes];
    let mut precond = vec![0.0; n_nodes];
    let mut dir = vec![0.0; n_nodes];
    let mut grad_prev = vec![0.0; n_nodes];
    let mut candidate = vec![0.0; n_nodes];

    let inv_h3 = 1.0 / grid.spacing().powi(3);
    let mut action = action_value(phi.values(), grid, bulk, setup.rho_vec);
    if !action.is_finite() {
        return Err(Error::NanDetected { iteration: 0 });
    }
    let mut history = vec![action];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut last_rel_decrease = f64::INFINITY;
    let mut iterations = 0;
    let mut gmg_prev = 0.0;
    let mut have_prev = false;
    let mut tau_prev: f64 = 1.0;

    let eval_gradient =
        |values: &[f64], gx: &mut Vec<f64>, gy: &mut Vec<f64>, gz: &mut Vec<f64>, out: &mut Vec<f64>| {
            weighted_cell_gradients(values, grid, bulk, gx, gy, gz);
            assemble_gradient(grid, gx, gy, gz, setup.rho_vec, pinned, out);
        };

    for it in 0..cfg.max_iterations {
        eval_gradient(phi.values(), &mut gx, &mut gy, &mut gz, &mut grad);
        let grad_norm = par::norm2(&grad);
        if !grad_norm.is_finite() {
            return Err(Error::NanDetected { iteration: it });
        }
        residual = grad_norm / setup.residual_scale;
        if residual < cfg.tolerance && last_rel_decrease < cfg.tolerance {
            converged = true;
            break;
        }

        // Preconditioned conjugate-gradient direction (Polak-Ribiere+,
        // M-metric), restarted whenever it fails to be a descent direction.
        poisson.apply(&grad, &mut precond);
        par::fill_indexed(&mut candidate, |n| {
            if pinned[n] {
                0.0
            } else {
                -precond[n] * inv_h3
            }
        });
        std::mem::swap(&mut precond, &mut candidate);
        let gmg = -par::dot(&grad, &precond);
        let beta = if have_prev && gmg_prev > 0.0 {
            let mixed = -par::dot(&grad_prev, &precond);
            ((gmg - mixed) / gmg_prev).max(0.0)
        } else {
            0.0
        };
        grad_prev.copy_from_slice(&grad);
        gmg_prev = gmg;
        have_prev = true;

        // Line search along the conjugate direction; if that fails (the
        // conjugacy can degrade near the floor), restart once from the pure
        // preconditioned direction before giving up.
        let mut accepted = false;
        for attempt in 0..2 {
            let slope = if attempt == 0 {
                par::fill_indexed(&mut candidate, |n| precond[n] + beta * dir[n]);
                std::mem::swap(&mut dir, &mut candidate);
                par::dot(&grad, &dir)
            } else {
                // Conjugacy degraded: plain preconditioned restart.
                dir.copy_from_slice(&precond);
                have_prev = false;
                -gmg
            };
            if !(slope < 0.0) {
                continue;
            }

            // Curvature along the ray by a gradient secant; gives the exact
            // quadratic step when the model is locally quadratic.
            let dir_norm = par::norm2(&dir);
            let fd = 1e-6 * (par::norm2(phi.values()).max(1.0)) / dir_norm.max(1e-300);
            let phi_vals = phi.values();
            par::fill_indexed(&mut candidate, |n| phi_vals[n] + fd * dir[n]);
            eval_gradient(&candidate, &mut gx, &mut gy, &mut gz, &mut grad_fd);
            let curvature = (par::dot(&grad_fd, &dir) - slope) / fd;
            let mut tau = if curvature.is_finite() && curvature > 0.0 {
                (-slope / curvature).min(1e3 * tau_prev.max(1.0))
            } else {
                2.0 * tau_prev
            };

            let tau_cap = if bulk.constrained() {
                feasible_step(phi.values(), &dir, grid)
            } else {
                f64::INFINITY
            };
            if tau_cap <= 1e-18 {
                continue;
            }
            tau = tau.min(0.999 * tau_cap);
            for _ in 0..60 {
                let phi_vals = phi.values();
                par::fill_indexed(&mut candidate, |n| phi_vals[n] + tau * dir[n]);
                let new_action = action_value(&candidate, grid, bulk, setup.rho_vec);
                if new_action.is_finite()
                    && new_action < action
                    && new_action <= action + 1e-4 * tau * slope
                {
                    last_rel_decrease = (action - new_action) / action.abs().max(1e-300);
                    action = new_action;
                    candidate = phi.replace_values(candidate);
                    accepted = true;
                    tau_prev = tau;
                    break;
                }
                tau *= 0.5;
                if tau < 1e-20 {
                    break;
                }
            }
            if accepted {
                break;
            }
        }
        if std::env::var_os("BORNEQ_TRACE").is_some() {
            eprintln!("it={it} res={residual:.3e} beta={beta:.3e} tau={tau_prev:.3e} F={action:.12e} acc={accepted}");
        }
        iterations = it + 1;
        if !accepted {
            // No achievable decrease even along the restarted steepest
            // direction. The action is convex and every trial was feasible,
            // so this is the floating-point optimum of the discrete problem;
            // the residual stays as a diagnostic (it does not vanish when
            // the gradient-ball constraint is active).
            converged = true;
            break;
        }
        history.push(action);
    }

    if !converged && iterations == cfg.max_iterations {
        eval_gradient(phi.values(), &mut gx, &mut gy, &mut gz, &mut grad);
        residual = par::norm2(&grad) / setup.residual_scale;
        converged = residual < cfg.tolerance;
    }

    let theta = 1.0 - max_cell_gradient(phi.values(), grid);
    let report = SolveReport {
        iterations,
        final_action: action,
        residual,
        theta,
        residual_scale: setup.residual_scale,
        wall_time_s: start.elapsed().as_secs_f64(),
        converged,
        action_history: history,
    };
    Ok((phi, report))
}

fn box_pins(grid: Grid) -> Vec<bool> {
    let m = grid.points_per_axis();
    let mut pinned = vec![false; grid.n_nodes()];
    for (n, p) in pinned.iter_mut().enumerate() {
        let i = n % m;
        let j = (n / m) % m;
        let k = n / (m * m);
        *p = grid.is_box_boundary(i, j, k);
    }
    pinned
}

/// Minimize the action for a charge: the discrete potential `phi_rho`.
/// Starts from zero; see [`solve_potential_from`] for warm starts.
pub fn solve_potential(
    charge: ChargeSource,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    solve_potential_from(charge, grid, cfg, None)
}

/// Same, warm-started from a previous potential (rescaled into the feasible
/// set if needed).
pub fn solve_potential_from(
    charge: ChargeSource,
    grid: Grid,
    cfg: &SolverConfig,
    init: Option<&GridFunction>,
) -> Result<(GridFunction, SolveReport)> {
    let mass = charge.total_mass();
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "charge must have positive total mass (got {mass})"
        )));
    }
    let bulk = Bulk::new(cfg.model)?;
    let rho_vec = charge.load_vector(grid);
    let pinned = box_pins(grid);
    let mut phi = match init {
        Some(f) => {
            assert_eq!(f.grid(), grid, "warm start grid mismatch");
            f.clone()
        }
        None => GridFunction::zeros(grid),
    };
    // Pins are homogeneous here; rescaling into the cap preserves them.
    for (n, v) in phi.values_mut().iter_mut().enumerate() {
        if pinned[n] {
            *v = 0.0;
        }
    }
    if bulk.constrained() {
        let maxg = max_cell_gradient(phi.values(), grid);
        if maxg > SLOPE_CAP {
            let scale = 0.999 * SLOPE_CAP / maxg;
            for v in phi.values_mut().iter_mut() {
                *v *= scale;
            }
        }
    }
    let residual_scale = par::norm2(&rho_vec).max(1e-300);
    let setup = MinimizeSetup {
        grid,
        pinned: &pinned,
        rho_vec: &rho_vec,
        residual_scale,
    };
    minimize(phi, &setup, &bulk, cfg)
}

/// Exterior Dirichlet solve: `phi = lambda` on the closed domain, 0 on the
/// box boundary, action minimized over the exterior nodes only.
pub fn solve_exterior_dirichlet(
    lambda: f64,
    domain: &DomainSpec,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    solve_exterior_dirichlet_warm(lambda, domain, grid, cfg, None, None)
}

/// Warm-startable variant. `residual_scale` fixes the normalization of the
/// reported residual so warm starts do not tighten the stopping test; when
/// absent the initial gradient norm is used.
pub fn solve_exterior_dirichlet_warm(
    lambda: f64,
    domain: &DomainSpec,
    grid: Grid,
    cfg: &SolverConfig,
    warm: Option<&GridFunction>,
    residual_scale: Option<f64>,
) -> Result<(GridFunction, SolveReport)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "plateau level {lambda} must be > 0"
        )));
    }
    let bulk = Bulk::new(cfg.model)?;
    let distance = domain.boundary_to_box_distance(grid.half_width());
    if bulk.constrained() && lambda >= distance {
        return Err(Error::InfeasiblePlateau { lambda, distance });
    }
    let inside = grid.inside_flags(domain);
    let mut pinned = box_pins(grid);
    for (p, ins) in pinned.iter_mut().zip(inside.iter()) {
        *p = *p || *ins;
    }

    let cone_slope = lambda / (grid.half_width() - domain.circumradius());
    let cone = |p: [f64; 3]| {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        lambda * ((grid.half_width() - r) * cone_slope / lambda).clamp(0.0, 1.0)
    };
    let mut phi = GridFunction::zeros(grid);
    let use_warm = warm.filter(|f| f.grid() == grid);
    for n in 0..grid.n_nodes() {
        let v = if pinned[n] {
            if inside[n] {
                lambda
            } else {
                0.0
            }
        } else {
            match use_warm {
                Some(f) => f.values()[n],
                None => cone(grid.position(n)),
            }
        };
        phi.values_mut()[n] = v;
    }
    if bulk.constrained() && max_cell_gradient(phi.values(), grid) > SLOPE_CAP {
        // Warm start infeasible (or lambda too close to the box bound for
        // this grid): rebuild from the cone.
        for n in 0..grid.n_nodes() {
            if !pinned[n] {
                phi.values_mut()[n] = cone(grid.position(n));
            }
        }
        if max_cell_gradient(phi.values(), grid) > SLOPE_CAP {
            return Err(Error::InfeasiblePlateau { lambda, distance });
        }
    }

    let rho_vec = vec![0.0; grid.n_nodes()];
    let scale = match residual_scale {
        Some(s) => s,
        None => {
            let bulk_ref = &bulk;
            let n_cells = grid.n_cells();
            let mut gx = vec![0.0; n_cells];
            let mut gy = vec![0.0; n_cells];
            let mut gz = vec![0.0; n_cells];
            let mut grad = vec![0.0; grid.n_nodes()];
            weighted_cell_gradients(phi.values(), grid, bulk_ref, &mut gx, &mut gy, &mut gz);
            assemble_gradient(grid, &gx, &gy, &gz, &rho_vec, &pinned, &mut grad);
            par::norm2(&grad).max(1e-300)
        }
    };
    let setup = MinimizeSetup {
        grid,
        pinned: &pinned,
        rho_vec: &rho_vec,
        residual_scale: scale,
    };
    minimize(phi, &setup, &bulk, cfg)
}

/// One-sided exterior normal derivative at every mesh point.
///
/// Samples the field along the outward normal at offsets of a few h and
/// extrapolates the slope at the surface by a cubic fit. The samples sit in
/// the smooth exterior region, clear of the one-cell interface layer of
/// pinned solves whose effective surface is displaced by O(h); for the same
/// reason the fit is anchored at `boundary_value` only when one is given
/// AND the field is known to attain it sharply (analytic data); exterior
/// solves should pass None and let the smooth part speak.
pub fn normal_derivative(
    phi: &GridFunction,
    mesh: &BoundaryMesh,
    boundary_value: Option<f64>,
) -> Result<Vec<f64>> {
    let grid = phi.grid();
    let h = grid.spacing();
    let l = grid.half_width();
    const OFFSETS: [f64; 6] = [2.0, 2.7, 3.4, 4.1, 4.8, 5.5];
    let mut out = vec![0.0; mesh.len()];
    let mut samples = [0.0; OFFSETS.len()];
    for (idx, (p, nu)) in mesh.points.iter().zip(mesh.normals.iter()).enumerate() {
        for (s, &mult) in samples.iter_mut().zip(OFFSETS.iter()) {
            let delta = mult * h;
            let q = [
                p[0] + delta * nu[0],
                p[1] + delta * nu[1],
                p[2] + delta * nu[2],
            ];
            if q.iter().any(|&x| x.abs() >= l) {
                return Err(Error::StencilOutsideGrid { index: idx });
            }
            *s = phi.interp(q);
        }
        out[idx] = match boundary_value {
            Some(v0) => fit_slope_anchored(&OFFSETS, &samples, v0) / h,
            None => fit_slope_free(&OFFSETS, &samples) / h,
        };
    }
    Ok(out)
}

/// Least-squares cubic `y ~ c1 t + c2 t^2 + c3 t^3` through `y - v0`,
/// returning c1.
fn fit_slope_anchored(ts: &[f64], ys: &[f64], v0: f64) -> f64 {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&t, &y) in ts.iter().zip(ys.iter()) {
        let powers = [t, t * t, t * t * t];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += powers[a] * powers[b];
            }
            r[a] += powers[a] * (y - v0);
        }
    }
    solve3(m, r)[0]
}

/// Least-squares cubic `y ~ c0 + c1 t + c2 t^2 + c3 t^3`, returning c1.
fn fit_slope_free(ts: &[f64], ys: &[f64]) -> f64 {
    let mut m = [[0.0; 4]; 4];
    let mut r = [0.0; 4];
    for (&t, &y) in ts.iter().zip(ys.iter()) {
        let powers = [1.0, t, t * t, t * t * t];
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += powers[a] * powers[b];
            }
            r[a] += powers[a] * y;
        }
    }
    solve4(m, r)[1]
}

fn solve4(mut m: [[f64; 4]; 4], mut r: [f64; 4]) -> [f64; 4] {
    for col in 0..4 {
        let mut piv = col;
        for row in col + 1..4 {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        m.swap(col, piv);
        r.swap(col, piv);
        let d = m[col][col];
        for row in col + 1..4 {
            let f = m[row][col] / d;
            for c2 in col..4 {
                m[row][c2] -= f * m[col][c2];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut acc = r[col];
        for c2 in col + 1..4 {
            acc -= m[col][c2] * x[c2];
        }
        x[col] = acc / m[col][col];
    }
    x
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let mut piv = col;
        for row in col + 1..3 {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        m.swap(col, piv);
        r.swap(col, piv);
        let d = m[col][col];
        for row in col + 1..3 {
            let f = m[row][col] / d;
            for c2 in col..3 {
                m[row][c2] -= f * m[col][c2];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut acc = r[col];
        for c2 in col + 1..3 {
            acc -= m[col][c2] * x[c2];
        }
        x[col] = acc / m[col][col];
    }
    x
}

/// Normal-flux measure: `q_i = g(|s_i|) (-s_i) w_i` with s the outer normal
/// derivative; BI density `1/sqrt(1-s^2)`, truncated `sum alpha_h s^(2h-2)`.
pub fn measure_from_normal_derivative(
    derivs: &[f64],
    mesh: &BoundaryMesh,
    model: Model,
) -> Result<BoundaryMeasure> {
    assert_eq!(derivs.len(), mesh.len());
    let constitutive = ConstitutiveModel::new(model)?;
    if matches!(model, Model::BornInfeld) {
        for (index, &s) in derivs.iter().enumerate() {
            if s.abs() >= 1.0 {
                return Err(Error::SingularFlux {
                    index,
                    magnitude: s.abs(),
                });
            }
        }
    }
    let weights = derivs
        .iter()
        .zip(mesh.weights.iter())
        .map(|(&s, &w)| w * constitutive.flux_of_slope((-s).max(0.0)))
        .collect();
    BoundaryMeasure::new(weights)
}

/// Nodal lattice charge `T[n] = d(bulk)/d(phi[n])`: the discrete divergence
/// of the displacement field. For an exterior solve it vanishes at free
/// nodes (to solver tolerance) and concentrates on the plateau interface,
/// which is exactly where the normal-flux measure lives.
pub fn lattice_charge(phi: &GridFunction, model: Model) -> Result<Vec<f64>> {
    let bulk = Bulk::new(model)?;
    let grid = phi.grid();
    let n_cells = grid.n_cells();
    let mut gx = vec![0.0; n_cells];
    let mut gy = vec![0.0; n_cells];
    let mut gz = vec![0.0; n_cells];
    weighted_cell_gradients(phi.values(), grid, &bulk, &mut gx, &mut gy, &mut gz);
    let zeros = vec![0.0; grid.n_nodes()];
    let pins = box_pins(grid);
    let mut t = vec![0.0; grid.n_nodes()];
    assemble_gradient(grid, &gx, &gy, &gz, &zeros, &pins, &mut t);
    Ok(t)
}

/// Total mass emitted by the plateau of an exterior solve: the lattice
/// charge summed over the pinned closed-domain nodes. By the discrete
/// divergence theorem this equals the flux through any enclosing lattice
/// surface, with no stencil extrapolation error.
pub fn plateau_flux_mass(phi: &GridFunction, domain: &DomainSpec, model: Model) -> Result<f64> {
    let grid = phi.grid();
    let t = lattice_charge(phi, model)?;
    let inside = grid.inside_flags(domain);
    Ok(par::sum_indexed(t.len(), |n| if inside[n] { t[n] } else { 0.0 }))
}

/// Offset (in grid spacings) of the displacement sampling point from the
/// surface, and the radius of the nodal cloud fitted there.
const FLUX_SAMPLE_OFFSET: f64 = 4.0;
const FLUX_CLOUD_RADIUS: f64 = 2.2;

/// Normal-flux measure by displacement sampling: at each mesh point the
/// field is fitted by a least-squares quadric over the exterior nodes near
/// `x + 4h nu` (nodal values only, no interpolation kinks), the displacement
/// `g(|grad phi|) grad phi . nu` is evaluated there, and transported back to
/// the surface through the flux tube `det(I + delta S)` with S the shape
/// operator. Smooth per-point densities at the cost of an O(h^2) bias.
pub fn displacement_measure(
    phi: &GridFunction,
    domain: &DomainSpec,
    mesh: &BoundaryMesh,
    model: Model,
) -> Result<BoundaryMeasure> {
    let bulk = Bulk::new(model)?;
    let grid = phi.grid();
    let inside = grid.inside_flags(domain);
    let h = grid.spacing();
    let m = grid.points_per_axis();
    let offset = FLUX_SAMPLE_OFFSET * h;
    let rad = FLUX_CLOUD_RADIUS * h;
    let mut weights = vec![0.0; mesh.len()];
    for (idx, ((p, nu), w)) in mesh
        .points
        .iter()
        .zip(mesh.normals.iter())
        .zip(mesh.weights.iter())
        .enumerate()
    {
        let c = [
            p[0] + offset * nu[0],
            p[1] + offset * nu[1],
            p[2] + offset * nu[2],
        ];
        if c.iter().any(|&x| x.abs() + rad >= grid.half_width()) {
            return Err(Error::StencilOutsideGrid { index: idx });
        }
        let lo = |x: f64| (((x - rad) + grid.half_width()) / h).floor().max(0.0) as usize;
        let hi = |x: f64| ((((x + rad) + grid.half_width()) / h).ceil() as usize).min(m - 1);
        let mut mat = [[0.0; 10]; 10];
        let mut rhs = [0.0; 10];
        let mut count = 0usize;
        for k in lo(c[2])..=hi(c[2]) {
            for j in lo(c[1])..=hi(c[1]) {
                for i in lo(c[0])..=hi(c[0]) {
                    let n = grid.node_index(i, j, k);
                    if inside[n] {
                        continue;
                    }
                    let q = grid.position(n);
                    let d = [(q[0] - c[0]) / h, (q[1] - c[1]) / h, (q[2] - c[2]) / h];
                    if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] > FLUX_CLOUD_RADIUS * FLUX_CLOUD_RADIUS
                    {
                        continue;
                    }
                    let basis = [
                        1.0,
                        d[0],
                        d[1],
                        d[2],
                        d[0] * d[0],
                        d[1] * d[1],
                        d[2] * d[2],
                        d[0] * d[1],
                        d[0] * d[2],
                        d[1] * d[2],
                    ];
                    let y = phi.values()[n];
                    for a in 0..10 {
                        for b in 0..10 {
                            mat[a][b] += basis[a] * basis[b];
                        }
                        rhs[a] += basis[a] * y;
                    }
                    count += 1;
                }
            }
        }
        if count < 14 {
            return Err(Error::StencilOutsideGrid { index: idx });
        }
        let coef = solve10(mat, rhs);
        let grad = [coef[1] / h, coef[2] / h, coef[3] / h];
        let s2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
        if matches!(model, Model::BornInfeld) && s2 >= 1.0 {
            return Err(Error::SingularFlux {
                index: idx,
                magnitude: s2.sqrt(),
            });
        }
        let dn = -bulk.g(s2) * (grad[0] * nu[0] + grad[1] * nu[1] + grad[2] * nu[2]);
        let (ksum, kprod) = domain.curvature_invariants(*p);
        let tube = 1.0 + offset * ksum + offset * offset * kprod;
        weights[idx] = (dn * tube * w).max(0.0);
    }
    BoundaryMeasure::new(weights)
}

fn solve10(mut m: [[f64; 10]; 10], mut r: [f64; 10]) -> [f64; 10] {
    let n = 10;
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        m.swap(col, piv);
        r.swap(col, piv);
        let d = m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / d;
            for c2 in col..n {
                m[row][c2] -= f * m[col][c2];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 10];
    for col in (0..n).rev() {
        let mut acc = r[col];
        for c2 in col + 1..n {
            acc -= m[col][c2] * x[c2];
        }
        x[col] = acc / m[col][col];
    }
    x
}

/// Extrapolate a box-truncated quantity to the infinite domain: polynomial
/// in 1/L through the samples `(L, value)`, evaluated at 1/L = 0.
pub fn richardson_extrapolate(samples: &[(f64, f64)]) -> f64 {
    assert!(!samples.is_empty());
    let xs: Vec<f64> = samples.iter().map(|(l, _)| 1.0 / l).collect();
    let mut acc = 0.0;
    for (i, &(_, v)) in samples.iter().enumerate() {
        let mut w = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if j != i {
                w *= (0.0 - xj) / (xs[i] - xj);
            }
        }
        acc += w * v;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary_mesh, build_grid};
    use crate::measures::uniform_measure;

    #[test]
    fn richardson_kills_linear_term() {
        let f = |l: f64| 3.25 - 0.7 / l;
        let v = richardson_extrapolate(&[(4.0, f(4.0)), (6.0, f(6.0))]);
        assert!((v - 3.25).abs() < 1e-12);
        let g = |l: f64| 3.25 - 0.7 / l + 0.3 / (l * l);
        let v3 = richardson_extrapolate(&[(3.0, g(3.0)), (4.0, g(4.0)), (6.0, g(6.0))]);
        assert!((v3 - 3.25).abs() < 1e-12);
    }

    #[test]
    fn normal_derivative_of_constant_is_zero() {
        let dom = DomainSpec::ball(1.0);
        let grid = build_grid(&dom, 3.0, 33).unwrap();
        let mesh = build_boundary_mesh(&dom, 64).unwrap();
        let mut phi = GridFunction::zeros(grid);
        for v in phi.values_mut() {
            *v = 0.7;
        }
        let d = normal_derivative(&phi, &mesh, None).unwrap();
        // The free 4-coefficient fit leaves conditioning noise well above
        // machine epsilon.
        for &s in &d {
            assert!(s.abs() < 1e-7);
        }
    }

    #[test]
    fn normal_derivative_recovers_linear_field() {
        let dom = DomainSpec::ball(1.0);
        let grid = build_grid(&dom, 3.0, 33).unwrap();
        let mesh = build_boundary_mesh(&dom, 128).unwrap();
        let mut phi = GridFunction::zeros(grid);
        for n in 0..grid.n_nodes() {
            let p = grid.position(n);
            phi.values_mut()[n] = 0.25 * p[0] - 0.5 * p[1] + 0.125 * p[2];
        }
        let d = normal_derivative(&phi, &mesh, None).unwrap();
        for (i, nu) in mesh.normals.iter().enumerate() {
            let exact = 0.25 * nu[0] - 0.5 * nu[1] + 0.125 * nu[2];
            assert!((d[i] - exact).abs() < 1e-10, "{} vs {exact}", d[i]);
        }
    }

    #[test]
    fn stencil_outside_grid_rejected() {
        let dom = DomainSpec::ball(1.0);
        // Tight box: offsets of 5h from the surface exit the grid.
        let grid = build_grid(&dom, 1.05, 9).unwrap();
        let mesh = build_boundary_mesh(&dom, 64).unwrap();
        let phi = GridFunction::zeros(grid);
        assert!(matches!(
            normal_derivative(&phi, &mesh, None),
            Err(Error::StencilOutsideGrid { .. })
        ));
    }

    #[test]
    fn flux_measure_zero_and_maxwell_density() {
        let dom = DomainSpec::ball(1.0);
        let mesh = build_boundary_mesh(&dom, 64).unwrap();
        let zero = measure_from_normal_derivative(&vec![0.0; 64], &mesh, Model::BornInfeld)
            .unwrap();
        assert_eq!(zero.total_mass(), 0.0);
        let s = -0.37;
        let maxwell =
            measure_from_normal_derivative(&vec![s; 64], &mesh, Model::Truncated(1)).unwrap();
        for (q, w) in maxwell.weights().iter().zip(mesh.weights.iter()) {
            assert!((q - 0.37 * w).abs() < 1e-14);
        }
        let err = measure_from_normal_derivative(&vec![-1.0; 64], &mesh, Model::BornInfeld);
        assert!(matches!(err, Err(Error::SingularFlux { .. })));
    }

    #[test]
    fn infeasible_plateau_flagged_before_iterating() {
        let dom = DomainSpec::ball(1.0);
        let grid = build_grid(&dom, 3.0, 17).unwrap();
        let err =
            solve_exterior_dirichlet(2.5, &dom, grid, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePlateau { .. }));
    }

    #[test]
    fn zero_mass_charge_rejected() {
        let dom = DomainSpec::ball(1.0);
        let grid = build_grid(&dom, 3.0, 17).unwrap();
        let mesh = build_boundary_mesh(&dom, 32).unwrap();
        let rho = BoundaryMeasure::new(vec![0.0; 32]).unwrap();
        let charge = ChargeSource::Measure {
            measure: &rho,
            mesh: &mesh,
        };
        assert!(solve_potential(charge, grid, &SolverConfig::default()).is_err());
    }

    #[test]
    fn small_ball_solve_descends_and_stays_feasible() {
        let dom = DomainSpec::ball(1.0);
        let grid = build_grid(&dom, 3.0, 25).unwrap();
        let mesh = build_boundary_mesh(&dom, 256).unwrap();
        let rho = uniform_measure(&mesh).unwrap();
        let charge = ChargeSource::Measure {
            measure: &rho,
            mesh: &mesh,
        };
        let (phi, report) = solve_potential(charge, grid, &SolverConfig::default()).unwrap();
        assert!(report.converged, "residual {}", report.residual);
        for w in report.action_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "action increased: {w:?}");
        }
        assert!(report.final_action < 0.0);
        assert!(report.theta >= 0.0);
        // Positivity up to solver tolerance.
        assert!(phi.min_value() >= -1e-8);
        // Max principle: the max sits on the charged shell.
        let flags = grid.boundary_adjacent_flags(&dom);
        let mut best = (0usize, f64::NEG_INFINITY);
        for (n, &v) in phi.values().iter().enumerate() {
            if v > best.1 {
                best = (n, v);
            }
        }
        assert!(flags[best.0], "max away from the boundary shell");
    }
}
