//! Domains, Cartesian grids, and boundary quadrature meshes.
//!
//! The grid pipeline is three-dimensional (higher dimensions are served by
//! the radial module only). The computational box `[-L, L]^3` truncates
//! space; potentials decay like Coulomb, so the truncation error is a
//! smooth `O(1/L)` offset that callers remove by Richardson extrapolation.

use crate::error::{Error, Result};
use crate::par;

/// Supported domain shapes. Semi-axes are along the coordinate axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Ball { radius: f64 },
    Ellipsoid { semi_axes: [f64; 3] },
    Superellipsoid { semi_axes: [f64; 3], exponent: f64 },
}

/// A bounded smooth domain in R^N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub dimension: usize,
    pub center: [f64; 3],
}

impl DomainSpec {
    pub fn ball(radius: f64) -> Self {
        DomainSpec {
            shape: Shape::Ball { radius },
            dimension: 3,
            center: [0.0; 3],
        }
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        DomainSpec {
            shape: Shape::Ellipsoid { semi_axes: [a, b, c] },
            dimension: 3,
            center: [0.0; 3],
        }
    }

    pub fn superellipsoid(a: f64, b: f64, c: f64, exponent: f64) -> Self {
        DomainSpec {
            shape: Shape::Superellipsoid {
                semi_axes: [a, b, c],
                exponent,
            },
            dimension: 3,
            center: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::InvalidDomain(format!(
                "dimension {} < 3",
                self.dimension
            )));
        }
        let axes_ok = |a: &[f64]| a.iter().all(|&x| x.is_finite() && x > 0.0);
        match self.shape {
            Shape::Ball { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::InvalidDomain(format!("radius {radius} must be > 0")));
                }
            }
            Shape::Ellipsoid { semi_axes } => {
                if !axes_ok(&semi_axes) {
                    return Err(Error::InvalidDomain(format!(
                        "semi-axes {semi_axes:?} must be > 0"
                    )));
                }
            }
            Shape::Superellipsoid {
                semi_axes,
                exponent,
            } => {
                if !axes_ok(&semi_axes) {
                    return Err(Error::InvalidDomain(format!(
                        "semi-axes {semi_axes:?} must be > 0"
                    )));
                }
                if !(exponent.is_finite() && exponent >= 2.0) {
                    return Err(Error::InvalidDomain(format!(
                        "superellipsoid exponent {exponent} must be >= 2"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    /// Level function: negative inside, zero on the boundary, positive outside.
    pub fn level(&self, x: [f64; 3]) -> f64 {
        let d = [
            x[0] - self.center[0],
            x[1] - self.center[1],
            x[2] - self.center[2],
        ];
        match self.shape {
            Shape::Ball { radius } => {
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - radius
            }
            Shape::Ellipsoid { semi_axes: a } => {
                (d[0] / a[0]).powi(2) + (d[1] / a[1]).powi(2) + (d[2] / a[2]).powi(2) - 1.0
            }
            Shape::Superellipsoid {
                semi_axes: a,
                exponent: p,
            } => {
                (d[0] / a[0]).abs().powf(p)
                    + (d[1] / a[1]).abs().powf(p)
                    + (d[2] / a[2]).abs().powf(p)
                    - 1.0
            }
        }
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        self.level(x) <= 0.0
    }

    /// Outward unit normal of the level set through `x` (gradient of the
    /// level function, normalized).
    pub fn outward_normal(&self, x: [f64; 3]) -> [f64; 3] {
        let d = [
            x[0] - self.center[0],
            x[1] - self.center[1],
            x[2] - self.center[2],
        ];
        let g = match self.shape {
            Shape::Ball { .. } => d,
            Shape::Ellipsoid { semi_axes: a } => {
                [d[0] / (a[0] * a[0]), d[1] / (a[1] * a[1]), d[2] / (a[2] * a[2])]
            }
            Shape::Superellipsoid {
                semi_axes: a,
                exponent: p,
            } => {
                let comp = |v: f64, ax: f64| {
                    let t = (v / ax).abs();
                    if t == 0.0 {
                        0.0
                    } else {
                        t.powf(p - 1.0) * v.signum() / ax
                    }
                };
                [comp(d[0], a[0]), comp(d[1], a[1]), comp(d[2], a[2])]
            }
        };
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        [g[0] / n, g[1] / n, g[2] / n]
    }

    /// Sum and product of the principal curvatures of the boundary at a
    /// surface point, from the analytic gradient and Hessian of the level
    /// function (shape operator restricted to the tangent plane).
    pub fn curvature_invariants(&self, x: [f64; 3]) -> (f64, f64) {
        let d = [
            x[0] - self.center[0],
            x[1] - self.center[1],
            x[2] - self.center[2],
        ];
        let (grad, hess) = match self.shape {
            Shape::Ball { .. } => {
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                let mut h = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        h[a][b] = (if a == b { 1.0 } else { 0.0 }) / r - d[a] * d[b] / (r * r * r);
                    }
                }
                ([d[0] / r, d[1] / r, d[2] / r], h)
            }
            Shape::Ellipsoid { semi_axes: a } => {
                let g = [
                    2.0 * d[0] / (a[0] * a[0]),
                    2.0 * d[1] / (a[1] * a[1]),
                    2.0 * d[2] / (a[2] * a[2]),
                ];
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    h[i][i] = 2.0 / (a[i] * a[i]);
                }
                (g, h)
            }
            Shape::Superellipsoid {
                semi_axes: a,
                exponent: p,
            } => {
                let mut g = [0.0; 3];
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    let t = (d[i] / a[i]).abs();
                    g[i] = if t == 0.0 {
                        0.0
                    } else {
                        p * t.powf(p - 1.0) * d[i].signum() / a[i]
                    };
                    h[i][i] = if t == 0.0 && p > 2.0 {
                        0.0
                    } else {
                        p * (p - 1.0) * t.powf(p - 2.0) / (a[i] * a[i])
                    };
                }
                (g, h)
            }
        };
        let gn = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        let nu = [grad[0] / gn, grad[1] / gn, grad[2] / gn];
        // S = P H P / |grad|, P the tangent projector; the normal direction
        // is a zero eigenvalue so trace/second-invariant of the full 3x3
        // give kappa1+kappa2 and kappa1*kappa2.
        let mut ph = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for c in 0..3 {
                    let pac = (if a == c { 1.0 } else { 0.0 }) - nu[a] * nu[c];
                    acc += pac * hess[c][b];
                }
                ph[a][b] = acc;
            }
        }
        let mut s = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for c in 0..3 {
                    let pcb = (if c == b { 1.0 } else { 0.0 }) - nu[c] * nu[b];
                    acc += ph[a][c] * pcb;
                }
                s[a][b] = acc / gn;
            }
        }
        let tr = s[0][0] + s[1][1] + s[2][2];
        let mut tr2 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                tr2 += s[a][b] * s[b][a];
            }
        }
        (tr, 0.5 * (tr * tr - tr2))
    }

    /// Radius of the smallest origin-centered ball containing the domain.
    pub fn circumradius(&self) -> f64 {
        let off = (self.center[0] * self.center[0]
            + self.center[1] * self.center[1]
            + self.center[2] * self.center[2])
            .sqrt();
        off + match self.shape {
            Shape::Ball { radius } => radius,
            Shape::Ellipsoid { semi_axes: a } => a[0].max(a[1]).max(a[2]),
            Shape::Superellipsoid {
                semi_axes: a,
                exponent: p,
            } => {
                if p == 2.0 {
                    a[0].max(a[1]).max(a[2])
                } else {
                    // Farthest surface point has x_i proportional to a_i^{p/(p-2)}.
                    let e = p / (p - 2.0);
                    let c: Vec<f64> = a.iter().map(|ai| ai.powf(e)).collect();
                    let s: f64 = c
                        .iter()
                        .zip(a.iter())
                        .map(|(ci, ai)| (ci / ai).powf(p))
                        .sum();
                    let t = s.powf(-1.0 / p);
                    t * c.iter().map(|ci| ci * ci).sum::<f64>().sqrt()
                }
            }
        }
    }

    /// Radius of a ball around the center guaranteed to lie inside.
    pub fn inscribed_radius(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius } => radius,
            Shape::Ellipsoid { semi_axes: a } | Shape::Superellipsoid { semi_axes: a, .. } => {
                a[0].min(a[1]).min(a[2])
            }
        }
    }

    /// Max distance from the boundary to the box walls along which a
    /// 1-Lipschitz function can still drop to zero: `L - max_i |x_i|` over
    /// the (centered) surface.
    pub fn boundary_to_box_distance(&self, half_width: f64) -> f64 {
        let reach = match self.shape {
            Shape::Ball { radius } => radius,
            Shape::Ellipsoid { semi_axes: a } | Shape::Superellipsoid { semi_axes: a, .. } => {
                a[0].max(a[1]).max(a[2])
            }
        };
        let c = self.center[0].abs().max(self.center[1].abs()).max(self.center[2].abs());
        half_width - reach - c
    }
}

/// Uniform Cartesian grid on `[-L, L]^3` with `m` points per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points as f64 - 1.0)
    }

    pub fn n_nodes(&self) -> usize {
        self.points * self.points * self.points
    }

    pub fn cells_per_axis(&self) -> usize {
        self.points - 1
    }

    pub fn n_cells(&self) -> usize {
        let c = self.cells_per_axis();
        c * c * c
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.points * (j + self.points * k)
    }

    #[inline]
    pub fn node_coords(&self, idx: usize) -> (usize, usize, usize) {
        let m = self.points;
        (idx % m, (idx / m) % m, idx / (m * m))
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.node_coords(idx);
        [self.axis_coord(i), self.axis_coord(j), self.axis_coord(k)]
    }

    pub fn is_box_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        let last = self.points - 1;
        i == 0 || j == 0 || k == 0 || i == last || j == last || k == last
    }

    /// Inside-closed-domain flag per node (level <= 0).
    pub fn inside_flags(&self, domain: &DomainSpec) -> Vec<bool> {
        let mut flags = vec![false; self.n_nodes()];
        for (idx, f) in flags.iter_mut().enumerate() {
            *f = domain.contains(self.position(idx));
        }
        flags
    }

    /// Nodes adjacent to the domain boundary: some node in the 3x3x3
    /// neighborhood has the opposite inside/outside classification.
    pub fn boundary_adjacent_flags(&self, domain: &DomainSpec) -> Vec<bool> {
        let inside = self.inside_flags(domain);
        let m = self.points as isize;
        let mut flags = vec![false; self.n_nodes()];
        for idx in 0..self.n_nodes() {
            let (i, j, k) = self.node_coords(idx);
            let (i, j, k) = (i as isize, j as isize, k as isize);
            'scan: for dk in -1..=1_isize {
                for dj in -1..=1_isize {
                    for di in -1..=1_isize {
                        let (ni, nj, nk) = (i + di, j + dj, k + dk);
                        if ni < 0 || nj < 0 || nk < 0 || ni >= m || nj >= m || nk >= m {
                            continue;
                        }
                        let n = self.node_index(ni as usize, nj as usize, nk as usize);
                        if inside[n] != inside[idx] {
                            flags[idx] = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        flags
    }
}

/// Build the computational grid. The box must strictly contain the domain.
pub fn build_grid(domain: &DomainSpec, half_width: f64, points: usize) -> Result<Grid> {
    domain.validate()?;
    if domain.dimension != 3 {
        return Err(Error::InvalidDomain(format!(
            "grid pipeline supports dimension 3 only (got {}); use the radial module for higher N",
            domain.dimension
        )));
    }
    if points < 8 {
        return Err(Error::InvalidParameter(format!(
            "points per axis {points} < 8"
        )));
    }
    if !half_width.is_finite() || half_width <= domain.circumradius() {
        return Err(Error::BoxTooSmall {
            half_width,
            circumradius: domain.circumradius(),
        });
    }
    Ok(Grid {
        half_width,
        points,
    })
}

/// Scalar field on a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_nodes());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Swap in a new value buffer, returning the old one (same length).
    pub fn replace_values(&mut self, mut new: Vec<f64>) -> Vec<f64> {
        assert_eq!(new.len(), self.values.len());
        std::mem::swap(&mut self.values, &mut new);
        new
    }

    pub fn max_value(&self) -> f64 {
        par::max_indexed(self.values.len(), |i| self.values[i])
    }

    pub fn min_value(&self) -> f64 {
        -par::max_indexed(self.values.len(), |i| -self.values[i])
    }

    /// Trilinear interpolation at a point inside the box.
    pub fn interp(&self, p: [f64; 3]) -> f64 {
        let g = self.grid;
        let h = g.spacing();
        let m = g.points_per_axis();
        let mut c = [0usize; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let s = (p[a] + g.half_width()) / h;
            let mut i = s.floor() as isize;
            i = i.clamp(0, m as isize - 2);
            c[a] = i as usize;
            t[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 0 { 1.0 - t[0] } else { t[0] })
                        * (if dy == 0 { 1.0 - t[1] } else { t[1] })
                        * (if dz == 0 { 1.0 - t[2] } else { t[2] });
                    acc += w * self.values[g.node_index(c[0] + dx, c[1] + dy, c[2] + dz)];
                }
            }
        }
        acc
    }

    /// Trilinear spreading weights of a point: adjoint of [`Self::interp`].
    /// Returns up to 8 (node index, weight) pairs.
    pub fn spread_weights(grid: Grid, p: [f64; 3]) -> [(usize, f64); 8] {
        let h = grid.spacing();
        let m = grid.points_per_axis();
        let mut c = [0usize; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let s = (p[a] + grid.half_width()) / h;
            let mut i = s.floor() as isize;
            i = i.clamp(0, m as isize - 2);
            c[a] = i as usize;
            t[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        let mut out = [(0usize, 0f64); 8];
        let mut n = 0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 0 { 1.0 - t[0] } else { t[0] })
                        * (if dy == 0 { 1.0 - t[1] } else { t[1] })
                        * (if dz == 0 { 1.0 - t[2] } else { t[2] });
                    out[n] = (grid.node_index(c[0] + dx, c[1] + dy, c[2] + dz), w);
                    n += 1;
                }
            }
        }
        out
    }

    /// Flat binary snapshot: magic, dimension, points per axis, half-width,
    /// then node values in index order, all little-endian.
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"BQGF")?;
        w.write_all(&(3u32).to_le_bytes())?;
        w.write_all(&(self.grid.points_per_axis() as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_width().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: std::io::Read>(mut r: R) -> std::io::Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"BQGF" {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "bad magic",
            ));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4);
        if dim != 3 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "unsupported dimension",
            ));
        }
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let half_width = f64::from_le_bytes(b8);
        let grid = Grid {
            half_width,
            points: m,
        };
        let mut values = vec![0.0; grid.n_nodes()];
        for v in &mut values {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Ok(GridFunction { grid, values })
    }
}

/// Quadrature discretization of the domain boundary: points on the surface,
/// positive weights summing to the surface area, outward unit normals.
#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub normals: Vec<[f64; 3]>,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        par::sum_indexed(self.weights.len(), |i| self.weights[i])
    }

    /// Same quadrature, rigidly rotated (weights unchanged).
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> BoundaryMesh {
        let rot = |v: &[f64; 3]| {
            [
                r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
                r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
                r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
            ]
        };
        BoundaryMesh {
            points: self.points.iter().map(rot).collect(),
            weights: self.weights.clone(),
            normals: self.normals.iter().map(rot).collect(),
        }
    }
}

fn fibonacci_directions(n: usize) -> Vec<[f64; 3]> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden_angle * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Discretize the domain boundary with a Fibonacci-sphere point set.
///
/// Ball: equal weights `4 pi R^2 / K`. Ellipsoid: the sphere point set is
/// pushed through the affine map and weights carry the surface Jacobian.
/// Superellipsoid: radial graph over directions, weights `r^2 dOmega / (d.nu)`.
pub fn build_boundary_mesh(domain: &DomainSpec, resolution: usize) -> Result<BoundaryMesh> {
    domain.validate()?;
    if domain.dimension != 3 {
        return Err(Error::InvalidDomain(format!(
            "boundary meshes support dimension 3 only (got {})",
            domain.dimension
        )));
    }
    if resolution < 16 {
        return Err(Error::InvalidParameter(format!(
            "boundary resolution {resolution} < 16"
        )));
    }
    let dirs = fibonacci_directions(resolution);
    let sphere_weight = 4.0 * std::f64::consts::PI / resolution as f64;
    let c = domain.center;
    let mut points = Vec::with_capacity(resolution);
    let mut weights = Vec::with_capacity(resolution);
    let mut normals = Vec::with_capacity(resolution);
    match domain.shape {
        Shape::Ball { radius } => {
            for d in &dirs {
                let p = [c[0] + radius * d[0], c[1] + radius * d[1], c[2] + radius * d[2]];
                points.push(p);
                weights.push(sphere_weight * radius * radius);
                normals.push(*d);
            }
        }
        Shape::Ellipsoid { semi_axes: a } => {
            for u in &dirs {
                let p = [c[0] + a[0] * u[0], c[1] + a[1] * u[1], c[2] + a[2] * u[2]];
                // Area element of x = A u on the unit sphere: |det A| * |A^{-T} u|.
                let jac = a[0] * a[1] * a[2]
                    * ((u[0] / a[0]).powi(2) + (u[1] / a[1]).powi(2) + (u[2] / a[2]).powi(2))
                        .sqrt();
                points.push(p);
                weights.push(sphere_weight * jac);
                normals.push(domain.outward_normal(p));
            }
        }
        Shape::Superellipsoid {
            semi_axes: a,
            exponent: p,
        } => {
            for d in &dirs {
                let s = (d[0] / a[0]).abs().powf(p)
                    + (d[1] / a[1]).abs().powf(p)
                    + (d[2] / a[2]).abs().powf(p);
                let r = s.powf(-1.0 / p);
                let x = [c[0] + r * d[0], c[1] + r * d[1], c[2] + r * d[2]];
                let nu = domain.outward_normal(x);
                let cosang = d[0] * nu[0] + d[1] * nu[1] + d[2] * nu[2];
                points.push(x);
                weights.push(sphere_weight * r * r / cosang);
                normals.push(nu);
            }
        }
    }
    Ok(BoundaryMesh {
        points,
        weights,
        normals,
    })
}
