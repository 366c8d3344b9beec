//! Boundary measures and their mollification onto the grid.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, Grid, GridFunction};
use crate::par;

/// Nonnegative weights attached to the points of a [`BoundaryMesh`].
/// Probability measures have total mass 1; normal-flux measures carry
/// whatever mass the field produces.
#[derive(Clone, Debug)]
pub struct BoundaryMeasure {
    weights: Vec<f64>,
}

impl BoundaryMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((idx, &q)) = weights.iter().enumerate().find(|(_, &q)| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "measure weight {q} at point {idx} is not a finite nonnegative number"
            )));
        }
        Ok(BoundaryMeasure { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        par::sum_indexed(self.weights.len(), |i| self.weights[i])
    }

    /// Rescale to total mass 1.
    pub fn normalized(&self) -> Result<BoundaryMeasure> {
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(Error::InvalidParameter(
                "cannot normalize a zero measure".into(),
            ));
        }
        Ok(BoundaryMeasure {
            weights: self.weights.iter().map(|q| q / total).collect(),
        })
    }

    /// Dirac measure at one mesh point.
    pub fn dirac(n_points: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n_points];
        weights[at] = 1.0;
        BoundaryMeasure { weights }
    }

    /// Convex combination `(1-t) self + t other`.
    pub fn mix(&self, other: &BoundaryMeasure, t: f64) -> BoundaryMeasure {
        BoundaryMeasure {
            weights: self
                .weights
                .iter()
                .zip(other.weights.iter())
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        }
    }

    /// Total-variation distance between measures on the same mesh.
    pub fn tv_distance(&self, other: &BoundaryMeasure) -> f64 {
        0.5 * par::sum_indexed(self.weights.len(), |i| {
            (self.weights[i] - other.weights[i]).abs()
        })
    }

    /// CSV rows `x,y,z,weight` (17 significant digits).
    pub fn write_csv<W: std::io::Write>(&self, mesh: &BoundaryMesh, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,z,weight")?;
        for (p, q) in mesh.points.iter().zip(self.weights.iter()) {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2], q)?;
        }
        Ok(())
    }
}

/// Uniform probability measure: weights proportional to quadrature weights.
pub fn uniform_measure(mesh: &BoundaryMesh) -> Result<BoundaryMeasure> {
    if mesh.is_empty() {
        return Err(Error::InvalidParameter("empty boundary mesh".into()));
    }
    let total = mesh.total_weight();
    BoundaryMeasure::new(mesh.weights.iter().map(|w| w / total).collect())
}

/// Grid density obtained by mollifying a boundary measure.
#[derive(Clone, Debug)]
pub struct MollifiedDensity {
    pub values: GridFunction,
    pub epsilon: f64,
}

impl MollifiedDensity {
    /// Discrete integral `h^3 sum f`.
    pub fn total_mass(&self) -> f64 {
        let h3 = self.values.grid().spacing().powi(3);
        h3 * par::sum_indexed(self.values.values().len(), |i| self.values.values()[i])
    }
}

/// Values of f below this are snapped to zero to avoid denormals.
const SUPPORT_FLOOR: f64 = 1e-300;

/// Mollify a boundary measure onto the grid with the standard bump
/// `c exp(-1/(1-|x/eps|^2))` on `|x| < eps`.
///
/// Each source bump is normalized so that its own discrete integral equals
/// one, so the density mass matches the measure mass to rounding instead of
/// to quadrature error.
pub fn mollify(
    measure: &BoundaryMeasure,
    mesh: &BoundaryMesh,
    epsilon: f64,
    grid: Grid,
) -> Result<MollifiedDensity> {
    let h = grid.spacing();
    if !(epsilon.is_finite()) || epsilon < 2.0 * h {
        return Err(Error::UnresolvableMollifier {
            epsilon,
            min: 2.0 * h,
            h,
        });
    }
    if measure.len() != mesh.len() {
        return Err(Error::InvalidParameter(format!(
            "measure has {} weights but mesh has {} points",
            measure.len(),
            mesh.len()
        )));
    }
    let m = grid.points_per_axis();
    let l = grid.half_width();
    let h3 = h * h * h;
    let bump = |r2_over_eps2: f64| -> f64 {
        if r2_over_eps2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r2_over_eps2)).exp()
        }
    };
    let mut field = GridFunction::zeros(grid);
    let values = field.values_mut();
    // Sources are scattered sequentially; the per-bump footprint is small.
    for (src, (&q, p)) in measure.weights().iter().zip(mesh.points.iter()).enumerate() {
        let _ = src;
        if q == 0.0 {
            continue;
        }
        let lo_hi = |coord: f64| {
            let lo = (((coord - epsilon) + l) / h).floor().max(0.0) as usize;
            let hi = ((((coord + epsilon) + l) / h).ceil() as usize).min(m - 1);
            (lo, hi)
        };
        let (ilo, ihi) = lo_hi(p[0]);
        let (jlo, jhi) = lo_hi(p[1]);
        let (klo, khi) = lo_hi(p[2]);
        // First pass: bump mass on the grid, for exact discrete normalization.
        let mut local = Vec::new();
        let mut mass = 0.0;
        for k in klo..=khi {
            let dz = grid.axis_coord(k) - p[2];
            for j in jlo..=jhi {
                let dy = grid.axis_coord(j) - p[1];
                for i in ilo..=ihi {
                    let dx = grid.axis_coord(i) - p[0];
                    let b = bump((dx * dx + dy * dy + dz * dz) / (epsilon * epsilon));
                    if b > 0.0 {
                        local.push((grid.node_index(i, j, k), b));
                        mass += b * h3;
                    }
                }
            }
        }
        if mass <= 0.0 {
            return Err(Error::UnresolvableMollifier {
                epsilon,
                min: 2.0 * h,
                h,
            });
        }
        for (idx, b) in local {
            values[idx] += q * b / mass;
        }
    }
    for v in values.iter_mut() {
        if *v < SUPPORT_FLOOR {
            *v = 0.0;
        }
    }
    Ok(MollifiedDensity {
        values: field,
        epsilon,
    })
}
