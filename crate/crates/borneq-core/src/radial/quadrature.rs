//! Two independent adaptive quadrature rules for the radial integrals.
//!
//! Rule A is adaptive Simpson with Richardson error control; rule B is
//! adaptive Gauss-Legendre with an embedded 7/15-point error estimate whose
//! nodes are generated by Newton iteration on the Legendre polynomials, so
//! the two rules share no machinery.

use crate::error::{Error, Result};

/// Adaptive Simpson to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = (left + right - whole) / 15.0;
        // Tolerances are floored at panel roundoff so refinement stops once
        // the estimate is dominated by noise.
        let floor = 4.0 * f64::EPSILON * (left.abs() + right.abs());
        if depth == 0 || err.abs() <= (0.2 * tol).max(floor) {
            (left + right + err, err.abs())
        } else {
            let (lv, le) = recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1);
            let (rv, re) = recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
            (lv + rv, le + re)
        }
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("non-finite quadrature bounds".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    let (value, err) = recurse(f, a, fa, b, fb, fm, whole, tol, 48);
    if err > 10.0 * tol.max(1e-15) {
        return Err(Error::QuadratureFailure {
            requested: tol,
            achieved: err,
        });
    }
    Ok(value)
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Adaptive Gauss-Legendre with embedded 7-vs-15 point error estimate.
pub struct GaussRule {
    n7: (Vec<f64>, Vec<f64>),
    n15: (Vec<f64>, Vec<f64>),
}

impl Default for GaussRule {
    fn default() -> Self {
        GaussRule {
            n7: gauss_legendre(7),
            n15: gauss_legendre(15),
        }
    }
}

impl GaussRule {
    fn panel(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let mid = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        let eval = |(nodes, weights): &(Vec<f64>, Vec<f64>)| {
            let mut acc = 0.0;
            for (x, w) in nodes.iter().zip(weights.iter()) {
                acc += w * f(mid + hw * x);
            }
            acc * hw
        };
        let lo = eval(&self.n7);
        let hi = eval(&self.n15);
        (hi, (hi - lo).abs())
    }

    pub fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        // Stack of panels to refine.
        let mut total = 0.0;
        let mut achieved = 0.0;
        let mut stack = vec![(a, b, tol, 0usize)];
        while let Some((lo, hi, t, depth)) = stack.pop() {
            let (value, err) = self.panel(f, lo, hi);
            // |G15-G7| estimates the 7-point error; the safety factor covers
            // panels where the 15-point value is itself not yet converged.
            let floor = 4.0 * f64::EPSILON * value.abs();
            if err <= (0.05 * t).max(floor) || depth >= 40 {
                total += value;
                achieved += err;
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((lo, mid, 0.5 * t, depth + 1));
                stack.push((mid, hi, 0.5 * t, depth + 1));
            }
        }
        if achieved > 10.0 * tol.max(1e-15) {
            return Err(Error::QuadratureFailure {
                requested: tol,
                achieved,
            });
        }
        Ok(total)
    }
}
