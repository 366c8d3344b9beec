//! Exact radial solutions on balls, for any dimension N >= 3.
//!
//! For a total charge q distributed uniformly on the sphere of radius R the
//! displacement field is fixed by flux balance alone,
//! `D(r) = q / (omega_{N-1} r^{N-1})` for `r > R` and zero inside, so the
//! slope follows from inverting the constitutive map `g(s) s = D` and the
//! potential is the tail integral of the slope. Everything else in the crate
//! is validated against this module.

pub mod quadrature;

use crate::error::{Error, Result};
use crate::functionals::{alpha_coefficients, SeriesCoefficients};
use crate::functionals::Model;
use quadrature::{adaptive_simpson, GaussRule};

/// Surface area of the unit sphere in R^N: `2 pi^(N/2) / Gamma(N/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 2, "dimension must be >= 2");
    let half = n as f64 / 2.0;
    // Gamma at integers and half-integers, exactly.
    let gamma_half_n = if n % 2 == 0 {
        let k = n / 2;
        (1..k).fold(1.0, |acc, i| acc * i as f64)
    } else {
        let k = (n - 1) / 2;
        (0..k).fold(std::f64::consts::PI.sqrt(), |acc, i| {
            acc * (i as f64 + 0.5)
        })
    };
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_n
}

/// Constitutive map of a model: flux density `g(s) s` as a function of the
/// slope, and its inverse.
#[derive(Clone, Debug)]
pub struct ConstitutiveModel {
    model: Model,
    coeffs: Option<SeriesCoefficients>,
}

impl ConstitutiveModel {
    pub fn new(model: Model) -> Result<Self> {
        let coeffs = match model {
            Model::BornInfeld => None,
            Model::Truncated(n) => Some(alpha_coefficients(n)?),
        };
        Ok(ConstitutiveModel { model, coeffs })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn coefficients(&self) -> Option<&SeriesCoefficients> {
        self.coeffs.as_ref()
    }

    /// `g(s) s`: BI `s/sqrt(1-s^2)` on [0,1), truncated `sum alpha_h s^(2h-1)`.
    pub fn flux_of_slope(&self, s: f64) -> f64 {
        match &self.coeffs {
            // (1-s)(1+s) keeps precision near the light cone: 1-s is exact
            // for s in [0.5, 1].
            None => s / ((1.0 - s) * (1.0 + s)).sqrt(),
            Some(c) => c.flux_of_slope(s),
        }
    }

    /// Inverse of [`Self::flux_of_slope`]: the slope produced by displacement
    /// `d >= 0`. Both maps are strictly increasing bijections so the inverse
    /// is well-posed; BI has the closed form `d/sqrt(1+d^2)`.
    pub fn invert_flux(&self, d: f64) -> f64 {
        debug_assert!(d >= 0.0);
        match &self.coeffs {
            None => d / (1.0 + d * d).sqrt(),
            Some(c) => {
                if d == 0.0 {
                    return 0.0;
                }
                // flux(s) >= s, so the root lies in [0, d]; the top
                // coefficient gives a tighter cap for large d.
                let mut hi = d.min(invert_upper_bound(c, d));
                while c.flux_of_slope(hi) < d {
                    hi *= 1.0 + 1e-12;
                }
                let mut lo = 0.0;
                let mut s = d / c.g_of_s2((hi * hi).min(1.0));
                if !(s > 0.0 && s <= hi) {
                    s = 0.5 * hi;
                }
                for _ in 0..200 {
                    let f = c.flux_of_slope(s) - d;
                    if f.abs() <= 1e-15 * d {
                        return s;
                    }
                    if f > 0.0 {
                        hi = s;
                    } else {
                        lo = s;
                    }
                    let df = c.flux_derivative(s);
                    let mut next = s - f / df;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - s).abs() <= f64::EPSILON * s {
                        return next;
                    }
                    s = next;
                }
                s
            }
        }
    }
}

/// Crude upper bound for the slope root of `sum alpha_h s^(2h-1) = d`.
fn invert_upper_bound(c: &SeriesCoefficients, d: f64) -> f64 {
    let n = c.order();
    let a_top = c.alpha()[n - 1];
    // Highest term alone: alpha_n s^(2n-1) <= d.
    let bound = (d / a_top).powf(1.0 / (2.0 * n as f64 - 1.0));
    bound.max(d.min(1.0)) * (1.0 + 1e-12)
}

/// Exact displacement field of a unit charge on the sphere of radius R:
/// zero inside the (constant-potential) ball.
pub fn radial_displacement(r: f64, radius: f64, dimension: usize) -> f64 {
    if r <= radius {
        0.0
    } else {
        1.0 / (unit_sphere_area(dimension) * r.powi(dimension as i32 - 1))
    }
}

/// Quadrature controls for radial profiles.
#[derive(Clone, Copy, Debug)]
pub struct RadialConfig {
    /// Absolute tolerance of the adaptive rules.
    pub tolerance: f64,
    /// The slope is integrated numerically out to `cut_factor * R`; beyond,
    /// the analytic Coulomb tail of D is used (the slope and the
    /// displacement differ by O(D^3) there).
    pub cut_factor: f64,
    /// Number of profile sample radii (log-spaced on [R, 100R]).
    pub samples: usize,
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            tolerance: 1e-12,
            cut_factor: 1e4,
            samples: 129,
        }
    }
}

/// Exact radial solution data for a ball.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub radius: f64,
    pub dimension: usize,
    pub model: Model,
    pub charge: f64,
    pub radii: Vec<f64>,
    pub displacement: Vec<f64>,
    pub slope: Vec<f64>,
    pub potential: Vec<f64>,
    pub lambda_star: f64,
}

fn check_radial_inputs(radius: f64, dimension: usize) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be > 0")));
    }
    if dimension < 3 {
        return Err(Error::InvalidParameter(format!(
            "radial solutions need dimension >= 3 (got {dimension})"
        )));
    }
    Ok(())
}

/// Analytic tail `integral_cut^inf D dr = q / (omega (N-2) cut^(N-2))`.
fn coulomb_tail(charge: f64, dimension: usize, cut: f64) -> f64 {
    charge
        / (unit_sphere_area(dimension) * (dimension as f64 - 2.0) * cut.powi(dimension as i32 - 2))
}

/// Plateau value by one quadrature rule.
///
/// The slope integral `int_R^cut s(r) dr` is computed in the variable
/// `u = 1/r`, where the integrand `s(1/u)/u^2` is smooth and bounded
/// (constant for the Maxwell model), so both rules converge with a handful
/// of panels instead of chasing a power-law tail.
fn lambda_by_rule(
    radius: f64,
    dimension: usize,
    constitutive: &ConstitutiveModel,
    charge: f64,
    cfg: &RadialConfig,
    use_simpson: bool,
) -> Result<f64> {
    let omega = unit_sphere_area(dimension);
    let n = dimension as i32;
    let integrand = move |u: f64| {
        constitutive.invert_flux(charge * u.powi(n - 1) / omega) / (u * u)
    };
    let cut = cfg.cut_factor * radius;
    let inner = if use_simpson {
        adaptive_simpson(&integrand, 1.0 / cut, 1.0 / radius, cfg.tolerance)?
    } else {
        GaussRule::default().integrate(&integrand, 1.0 / cut, 1.0 / radius, cfg.tolerance)?
    };
    Ok(inner + coulomb_tail(charge, dimension, cut))
}

/// Plateau value `lambda* = integral_R^inf s(r) dr` by both quadrature
/// rules: (adaptive Simpson, adaptive Gauss). They must agree to ~tolerance.
pub fn lambda_star_two_rules(
    radius: f64,
    dimension: usize,
    model: Model,
    charge: f64,
    cfg: &RadialConfig,
) -> Result<(f64, f64)> {
    check_radial_inputs(radius, dimension)?;
    let constitutive = ConstitutiveModel::new(model)?;
    let simpson = lambda_by_rule(radius, dimension, &constitutive, charge, cfg, true)?;
    let gauss = lambda_by_rule(radius, dimension, &constitutive, charge, cfg, false)?;
    Ok((simpson, gauss))
}

/// Full radial profile for charge `q` on the sphere of radius R.
pub fn radial_potential(
    radius: f64,
    dimension: usize,
    model: Model,
    charge: f64,
    cfg: &RadialConfig,
) -> Result<RadialProfile> {
    check_radial_inputs(radius, dimension)?;
    if !(charge.is_finite() && charge > 0.0) {
        return Err(Error::InvalidParameter(format!("charge {charge} must be > 0")));
    }
    let constitutive = ConstitutiveModel::new(model)?;
    let omega = unit_sphere_area(dimension);
    let slope_fn = |r: f64| {
        constitutive.invert_flux(charge / (omega * r.powi(dimension as i32 - 1)))
    };
    let gauss = GaussRule::default();
    let lambda_star = lambda_by_rule(radius, dimension, &constitutive, charge, cfg, false)?;

    let n_samples = cfg.samples.max(2);
    let ratio = (100.0_f64).powf(1.0 / (n_samples as f64 - 1.0));
    let mut radii = Vec::with_capacity(n_samples);
    let mut r = radius;
    for _ in 0..n_samples {
        radii.push(r);
        r *= ratio;
    }
    let mut displacement = Vec::with_capacity(n_samples);
    let mut slope = Vec::with_capacity(n_samples);
    let mut potential = Vec::with_capacity(n_samples);
    let mut phi = lambda_star;
    for (j, &rj) in radii.iter().enumerate() {
        // The sample exactly at R carries the outside limit of the field.
        let d = if rj <= radius {
            charge / (omega * radius.powi(dimension as i32 - 1))
        } else {
            charge * radial_displacement(rj, radius, dimension)
        };
        displacement.push(d);
        slope.push(constitutive.invert_flux(d));
        if j > 0 {
            phi -= gauss.integrate(&slope_fn, radii[j - 1], rj, cfg.tolerance)?;
        }
        potential.push(phi);
    }
    Ok(RadialProfile {
        radius,
        dimension,
        model,
        charge,
        radii,
        displacement,
        slope,
        potential,
        lambda_star,
    })
}

/// Plateau value only (Gauss rule).
pub fn lambda_star(
    radius: f64,
    dimension: usize,
    model: Model,
    charge: f64,
    cfg: &RadialConfig,
) -> Result<f64> {
    check_radial_inputs(radius, dimension)?;
    let constitutive = ConstitutiveModel::new(model)?;
    lambda_by_rule(radius, dimension, &constitutive, charge, cfg, false)
}

/// Total charge q(lambda) whose radial exterior solution has plateau
/// `lambda`: the radial form of the total-mass map, inverted by a monotone
/// root find (the plateau is strictly increasing in the charge).
pub fn radial_upsilon(
    lambda: f64,
    radius: f64,
    dimension: usize,
    model: Model,
    cfg: &RadialConfig,
) -> Result<f64> {
    check_radial_inputs(radius, dimension)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "plateau level {lambda} must be > 0"
        )));
    }
    let constitutive = ConstitutiveModel::new(model)?;
    let level = |q: f64| lambda_by_rule(radius, dimension, &constitutive, q, cfg, false);
    let mut lo = 0.0;
    let mut f_lo = -lambda;
    let mut hi = 1.0;
    let mut f_hi = level(hi)? - lambda;
    let mut expansions = 0;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 4.0;
        f_hi = level(hi)? - lambda;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::BracketNotFound(format!(
                "charge bracket for plateau {lambda} not found below q = {hi}"
            )));
        }
    }
    // Bisection with a secant step when it stays inside the bracket.
    let mut q = 0.5 * (lo + hi);
    for _ in 0..200 {
        let width = hi - lo;
        let secant = if (f_hi - f_lo).abs() > 0.0 {
            lo - f_lo * (hi - lo) / (f_hi - f_lo)
        } else {
            q
        };
        q = if secant > lo + 0.01 * width && secant < hi - 0.01 * width {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let f = level(q)? - lambda;
        if f.abs() <= 1e-11 * lambda || width <= 1e-12 * q.max(1e-300) {
            return Ok(q);
        }
        if f < 0.0 {
            lo = q;
            f_lo = f;
        } else {
            hi = q;
            f_hi = f;
        }
    }
    Ok(q)
}
