//! Born-Infeld action and energy functionals on the grid, and the
//! coefficients of the truncated-series hierarchy.
//!
//! The discrete gradient is a forward difference per axis collocated at the
//! cell's base corner, one gradient vector per cell of the `(m-1)^3` cell
//! grid, so the admissibility constraint is a Euclidean ball per cell. The
//! bulk term is the midpoint rule over cells; the pairing with a boundary
//! measure uses trilinear interpolation at the (off-grid) boundary points,
//! whose adjoint is exactly the charge-spreading used by the solver.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, Grid, GridFunction};
use crate::measures::{BoundaryMeasure, MollifiedDensity};
use crate::par;

/// Electrostatic model: the full Born-Infeld bulk integrand or its degree-n
/// Taylor truncation. The field-strength parameter is fixed to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    BornInfeld,
    Truncated(usize),
}

impl Model {
    pub fn label(&self) -> String {
        match self {
            Model::BornInfeld => "bi".to_string(),
            Model::Truncated(n) => format!("n={n}"),
        }
    }
}

/// Degree cap for truncated solves: |grad phi|^(2h) stays representable for
/// transiently super-unit gradients.
pub const MAX_SOLVE_ORDER: usize = 60;

/// Coefficients `alpha_1..alpha_n` of the series
/// `1 - sqrt(1 - x^2) = sum_h alpha_h/(2h) x^(2h)`.
#[derive(Clone, Debug)]
pub struct SeriesCoefficients {
    alpha: Vec<f64>,
}

/// `alpha_1 = 1, alpha_{h+1} = alpha_h (2h-1)/(2h)`: the stable form of the
/// closed expression `1*3*5...(2h-3) / (2^(h-1) (h-1)!)`.
pub fn alpha_coefficients(n: usize) -> Result<SeriesCoefficients> {
    if !(1..=200).contains(&n) {
        return Err(Error::OrderOutOfRange(n));
    }
    let mut alpha = Vec::with_capacity(n);
    let mut a = 1.0_f64;
    alpha.push(a);
    for h in 1..n {
        a *= (2.0 * h as f64 - 1.0) / (2.0 * h as f64);
        alpha.push(a);
    }
    Ok(SeriesCoefficients { alpha })
}

impl SeriesCoefficients {
    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Partial sum `sum_h alpha_h/(2h) x^(2h)` (the truncated bulk integrand).
    pub fn series_sum(&self, x: f64) -> f64 {
        let t = x * x;
        let mut acc = 0.0;
        for (h, &a) in self.alpha.iter().enumerate().rev() {
            acc = t * (a / (2.0 * (h + 1) as f64) + acc);
        }
        acc
    }

    /// Bulk integrand `W_n(s^2)` as a function of the squared gradient.
    pub fn w_of_s2(&self, s2: f64) -> f64 {
        let mut acc = 0.0;
        for (h, &a) in self.alpha.iter().enumerate().rev() {
            acc = s2 * (a / (2.0 * (h + 1) as f64) + acc);
        }
        acc
    }

    /// Gradient weight `g_n(s) = sum_h alpha_h s^(2h-2)` as a function of s^2.
    pub fn g_of_s2(&self, s2: f64) -> f64 {
        let mut acc = 0.0;
        for &a in self.alpha.iter().rev() {
            acc = a + s2 * acc;
        }
        acc
    }

    /// Integrand of K^n: `sum_h (2h-1)/(2h) alpha_h s^(2h)` of s^2.
    pub fn k_of_s2(&self, s2: f64) -> f64 {
        let mut acc = 0.0;
        for (h, &a) in self.alpha.iter().enumerate().rev() {
            let hh = (h + 1) as f64;
            acc = s2 * (a * (2.0 * hh - 1.0) / (2.0 * hh) + acc);
        }
        acc
    }

    /// `g_n(s) s = sum_h alpha_h s^(2h-1)`: the constitutive map of the
    /// truncated model.
    pub fn flux_of_slope(&self, s: f64) -> f64 {
        s * self.g_of_s2(s * s)
    }

    /// Derivative of [`Self::flux_of_slope`].
    pub fn flux_derivative(&self, s: f64) -> f64 {
        let s2 = s * s;
        let mut acc = 0.0;
        for (h, &a) in self.alpha.iter().enumerate().rev() {
            acc = a * (2.0 * (h + 1) as f64 - 1.0) + s2 * acc;
        }
        acc
    }
}

/// Born-Infeld bulk integrand `1 - sqrt(1 - s^2)` of the squared gradient.
pub fn w_bi(s2: f64) -> f64 {
    1.0 - (1.0 - s2).max(0.0).sqrt()
}

/// Born-Infeld gradient weight `1/sqrt(1 - s^2)` of the squared gradient.
pub fn g_bi(s2: f64) -> f64 {
    1.0 / (1.0 - s2).sqrt()
}

/// Charge data accepted by actions and solvers: a boundary measure paired by
/// interpolation, or a mollified grid density paired by the midpoint rule.
#[derive(Clone, Copy)]
pub enum ChargeSource<'a> {
    Measure {
        measure: &'a BoundaryMeasure,
        mesh: &'a BoundaryMesh,
    },
    Density(&'a MollifiedDensity),
    /// No volume/boundary charge (exterior Dirichlet problems).
    None,
}

impl<'a> ChargeSource<'a> {
    pub fn total_mass(&self) -> f64 {
        match self {
            ChargeSource::Measure { measure, .. } => measure.total_mass(),
            ChargeSource::Density(f) => f.total_mass(),
            ChargeSource::None => 0.0,
        }
    }

    /// `<rho, phi>`.
    pub fn pairing(&self, phi: &GridFunction) -> f64 {
        match self {
            ChargeSource::Measure { measure, mesh } => {
                par::sum_indexed(measure.len(), |i| {
                    measure.weights()[i] * phi.interp(mesh.points[i])
                })
            }
            ChargeSource::Density(f) => {
                let h3 = f.values.grid().spacing().powi(3);
                h3 * par::dot(f.values.values(), phi.values())
            }
            ChargeSource::None => 0.0,
        }
    }

    /// Nodal load vector: the exact adjoint of the pairing,
    /// `rho_vec[n] = d<rho,phi>/d phi[n]`.
    pub fn load_vector(&self, grid: Grid) -> Vec<f64> {
        let mut rho = vec![0.0; grid.n_nodes()];
        match self {
            ChargeSource::Measure { measure, mesh } => {
                for (q, p) in measure.weights().iter().zip(mesh.points.iter()) {
                    if *q == 0.0 {
                        continue;
                    }
                    for (idx, w) in GridFunction::spread_weights(grid, *p) {
                        rho[idx] += q * w;
                    }
                }
            }
            ChargeSource::Density(f) => {
                let h3 = grid.spacing().powi(3);
                let fv = f.values.values();
                par::fill_indexed(&mut rho, |i| fv[i] * h3);
            }
            ChargeSource::None => {}
        }
        rho
    }
}

/// Squared gradient magnitude of cell `ci` (forward differences from the
/// cell's base corner).
#[inline]
pub fn cell_grad_sq(values: &[f64], grid: Grid, ci: usize) -> f64 {
    let c = grid.cells_per_axis();
    let m = grid.points_per_axis();
    let i = ci % c;
    let j = (ci / c) % c;
    let k = ci / (c * c);
    let base = i + m * (j + m * k);
    let inv_h = 1.0 / grid.spacing();
    let v0 = values[base];
    let gx = (values[base + 1] - v0) * inv_h;
    let gy = (values[base + m] - v0) * inv_h;
    let gz = (values[base + m * m] - v0) * inv_h;
    gx * gx + gy * gy + gz * gz
}

/// Maximum cell gradient magnitude of a field.
pub fn max_gradient(phi: &GridFunction) -> f64 {
    let grid = phi.grid();
    par::max_indexed(grid.n_cells(), |ci| cell_grad_sq(phi.values(), grid, ci)).sqrt()
}

/// Action, bulk term, and pairing of one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct ActionValue {
    pub action: f64,
    pub bulk: f64,
    pub pairing: f64,
}

const CONSTRAINT_SLACK: f64 = 1e-12;

fn first_violating_cell(phi: &GridFunction, limit: f64) -> Option<(usize, [usize; 3], f64)> {
    let grid = phi.grid();
    let c = grid.cells_per_axis();
    for ci in 0..grid.n_cells() {
        let s2 = cell_grad_sq(phi.values(), grid, ci);
        if s2 > limit {
            let cell = [ci % c, (ci / c) % c, ci / (c * c)];
            return Some((ci, cell, s2.sqrt()));
        }
    }
    None
}

/// Born-Infeld action `I_rho(phi) = integral(1 - sqrt(1-|grad phi|^2)) - <rho,phi>`.
/// Fails if any cell violates the gradient constraint.
pub fn bi_action(phi: &GridFunction, charge: ChargeSource) -> Result<ActionValue> {
    let grid = phi.grid();
    let max_s2 = par::max_indexed(grid.n_cells(), |ci| cell_grad_sq(phi.values(), grid, ci));
    if max_s2 > 1.0 + CONSTRAINT_SLACK {
        let (index, cell, magnitude) =
            first_violating_cell(phi, 1.0 + CONSTRAINT_SLACK).expect("violating cell");
        return Err(Error::ConstraintViolation {
            index,
            cell,
            magnitude,
        });
    }
    let h3 = grid.spacing().powi(3);
    let bulk = h3
        * par::sum_indexed(grid.n_cells(), |ci| {
            w_bi(cell_grad_sq(phi.values(), grid, ci).min(1.0))
        });
    let pairing = charge.pairing(phi);
    Ok(ActionValue {
        action: bulk - pairing,
        bulk,
        pairing,
    })
}

/// Truncated action `I^n_rho(phi) = sum_h alpha_h/(2h) ||grad phi||_{2h}^{2h} - <rho,phi>`.
/// Finite for every gradient; no constraint.
pub fn truncated_action(
    phi: &GridFunction,
    charge: ChargeSource,
    coeffs: &SeriesCoefficients,
) -> ActionValue {
    let grid = phi.grid();
    let h3 = grid.spacing().powi(3);
    let bulk = h3
        * par::sum_indexed(grid.n_cells(), |ci| {
            coeffs.w_of_s2(cell_grad_sq(phi.values(), grid, ci))
        });
    let pairing = charge.pairing(phi);
    ActionValue {
        action: bulk - pairing,
        bulk,
        pairing,
    }
}

/// `K(phi) = integral(1/sqrt(1-|grad phi|^2) - 1)`; needs |grad phi| < 1
/// strictly at every cell.
pub fn energy_k(phi: &GridFunction) -> Result<f64> {
    let grid = phi.grid();
    let max_s2 = par::max_indexed(grid.n_cells(), |ci| cell_grad_sq(phi.values(), grid, ci));
    if max_s2 >= 1.0 {
        let (index, _, magnitude) =
            first_violating_cell(phi, 1.0 - f64::EPSILON).expect("singular cell");
        return Err(Error::SingularIntegrand { index, magnitude });
    }
    let h3 = grid.spacing().powi(3);
    Ok(h3
        * par::sum_indexed(grid.n_cells(), |ci| {
            g_bi(cell_grad_sq(phi.values(), grid, ci)) - 1.0
        }))
}

/// `K^n(phi) = sum_h (2h-1)/(2h) alpha_h ||grad phi||_{2h}^{2h}`.
pub fn energy_kn(phi: &GridFunction, coeffs: &SeriesCoefficients) -> f64 {
    let grid = phi.grid();
    let h3 = grid.spacing().powi(3);
    h3 * par::sum_indexed(grid.n_cells(), |ci| {
        coeffs.k_of_s2(cell_grad_sq(phi.values(), grid, ci))
    })
}
