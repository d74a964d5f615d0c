//! Grid domains: masks, signed distance, collars and exhaustion by distance
//! sublevel sets.

pub mod raster;

use crate::error::{Error, Result};
use raster::Raster;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Arc;

/// Number of out-of-domain nodes added on each side of the shape.
pub const PAD: usize = 3;

/// Uniform tensor grid. Node `(i, j)` sits at `(x0 + i h, y0 + j h)` and is
/// stored at index `j * nx + i`. One-dimensional grids have `ny = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [
            self.x0 + i as f64 * self.h,
            if self.dim == 1 {
                0.0
            } else {
                self.y0 + j as f64 * self.h
            },
        ]
    }

    /// Lower and upper corners of the node bounding box.
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let x1 = self.x0 + (self.nx - 1) as f64 * self.h;
        if self.dim == 1 {
            ([self.x0, 0.0], [x1, 0.0])
        } else {
            (
                [self.x0, self.y0],
                [x1, self.y0 + (self.ny - 1) as f64 * self.h],
            )
        }
    }

    /// Axis-neighbour offsets valid for this dimension, as (axis, step).
    pub fn axes(&self) -> usize {
        self.dim
    }

    /// Index of the neighbour one step along `axis` in direction `dir` (±1).
    #[inline]
    pub fn neighbor(&self, k: usize, axis: usize, dir: isize) -> Option<usize> {
        let (i, j) = self.ij(k);
        if axis == 0 {
            let a = i as isize + dir;
            (a >= 0 && (a as usize) < self.nx).then(|| self.index(a as usize, j))
        } else {
            let b = j as isize + dir;
            (b >= 0 && (b as usize) < self.ny).then(|| self.index(i, b as usize))
        }
    }

    /// Axis neighbours of `k` in a fixed order (+x, -x, +y, -y).
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let dirs: &[(usize, isize)] = if self.dim == 1 {
            &[(0, 1), (0, -1)]
        } else {
            &[(0, 1), (0, -1), (1, 1), (1, -1)]
        };
        dirs.iter().filter_map(move |&(a, d)| self.neighbor(k, a, d))
    }
}

/// Shape descriptor accepted by [`build_domain`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeSpec {
    Interval { a: f64, b: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
    MaskFile { path: PathBuf },
}

impl ShapeSpec {
    pub fn unit_disk() -> Self {
        ShapeSpec::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn unit_square() -> Self {
        ShapeSpec::Rectangle {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        }
    }

    pub fn unit_interval() -> Self {
        ShapeSpec::Interval { a: 0.0, b: 1.0 }
    }
}

/// How the domain was obtained; drives the cut-cell quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Interval { a: f64, b: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
    Raster,
    Sublevel { d: f64 },
}

/// Bounded connected domain sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub geometry: Geometry,
    pub grid: Grid,
    /// Inside flag per node; equivalent to `sdist < 0`.
    pub mask: Vec<bool>,
    /// Signed distance to the boundary, negative inside.
    pub sdist: Vec<f64>,
    /// Fraction of each node's cell lying inside the domain.
    pub cell_fraction: Vec<f64>,
    pub boundary_components: usize,
    pub warnings: Vec<String>,
}

impl Domain {
    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// In-mask node indices in storage order.
    pub fn inside_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.mask[k]).collect()
    }

    /// Quadrature weight of node `k`: cell area times the inside fraction.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.cell_fraction[k] * self.h().powi(self.dim() as i32)
    }

    /// Quadrature of the constant 1.
    pub fn measure(&self) -> f64 {
        (0..self.len()).map(|k| self.weight(k)).sum()
    }

    /// Node-to-node Euclidean diameter of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.grid.bbox();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 16 {
        return Err(Error::Underresolved(resolution));
    }
    Ok(())
}

/// Builds a domain. The grid spacing is `L / resolution` with `L` the radius
/// of a disk, the length of an interval, the shorter side of a rectangle, or
/// `1 / resolution` per pixel for mask files.
pub fn build_domain(spec: &ShapeSpec, resolution: usize) -> Result<Arc<Domain>> {
    check_resolution(resolution)?;
    match spec {
        ShapeSpec::Interval { a, b } => interval(*a, *b, resolution),
        ShapeSpec::Disk { center, radius } => disk(*center, *radius, resolution),
        ShapeSpec::Rectangle { min, max } => rectangle(*min, *max, resolution),
        ShapeSpec::MaskFile { path } => {
            let r = Raster::read_pgm(path)?;
            from_raster(&r, 1.0 / resolution as f64)
        }
    }
}

fn interval(a: f64, b: f64, n: usize) -> Result<Arc<Domain>> {
    if !(b > a) {
        return Err(Error::DegenerateDomain(format!("interval [{a}, {b}]")));
    }
    let h = (b - a) / n as f64;
    // vertex-centred: the endpoints are nodes PAD and PAD + n
    let grid = Grid {
        dim: 1,
        nx: n + 1 + 2 * PAD,
        ny: 1,
        x0: a - PAD as f64 * h,
        y0: 0.0,
        h,
    };
    let sdist: Vec<f64> = (0..grid.len())
        .map(|k| {
            let i = k as isize - PAD as isize;
            if i == 0 || i == n as isize {
                0.0
            } else {
                let x = grid.point(k)[0];
                (a - x).max(x - b)
            }
        })
        .collect();
    let frac = sdist
        .iter()
        .map(|&s| (0.5 - s / h).clamp(0.0, 1.0))
        .collect();
    finish(Geometry::Interval { a, b }, grid, sdist, frac)
}

/// Area fraction of the square cell `[-h/2, h/2]^2` on the side `n·p <= -s`
/// of the half-plane with unit normal `n`.
pub fn halfplane_fraction(s: f64, n: [f64; 2], h: f64) -> f64 {
    let (mut a, mut b) = (n[0].abs() * h, n[1].abs() * h);
    if a < b {
        std::mem::swap(&mut a, &mut b);
    }
    let z = -s + 0.5 * (a + b);
    if z <= 0.0 {
        return 0.0;
    }
    if z >= a + b {
        return 1.0;
    }
    if b <= 1e-14 * h {
        return (z / a).clamp(0.0, 1.0);
    }
    let f = if z <= b {
        z * z / (2.0 * a * b)
    } else if z <= a {
        (z - 0.5 * b) / a
    } else {
        1.0 - (a + b - z).powi(2) / (2.0 * a * b)
    };
    f.clamp(0.0, 1.0)
}

fn disk(center: [f64; 2], radius: f64, n: usize) -> Result<Arc<Domain>> {
    if !(radius > 0.0) {
        return Err(Error::DegenerateDomain(format!("disk radius {radius}")));
    }
    let h = radius / n as f64;
    let cells = 2 * n + 2 * PAD;
    let grid = Grid {
        dim: 2,
        nx: cells,
        ny: cells,
        x0: center[0] - radius - (PAD as f64 - 0.5) * h,
        y0: center[1] - radius - (PAD as f64 - 0.5) * h,
        h,
    };
    let mut sdist = Vec::with_capacity(grid.len());
    let mut frac = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let p = grid.point(k);
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        let r = dx.hypot(dy);
        let s = r - radius;
        sdist.push(s);
        let nrm = if r > 0.0 { [dx / r, dy / r] } else { [1.0, 0.0] };
        frac.push(halfplane_fraction(s, nrm, h));
    }
    finish(Geometry::Disk { center, radius }, grid, sdist, frac)
}

fn rectangle(min: [f64; 2], max: [f64; 2], n: usize) -> Result<Arc<Domain>> {
    let (w, hgt) = (max[0] - min[0], max[1] - min[1]);
    if !(w > 0.0 && hgt > 0.0) {
        return Err(Error::DegenerateDomain("rectangle with empty side".into()));
    }
    let h = w.min(hgt) / n as f64;
    let ncx = (w / h).round() as usize;
    let ncy = (hgt / h).round() as usize;
    let grid = Grid {
        dim: 2,
        nx: ncx + 2 * PAD,
        ny: ncy + 2 * PAD,
        x0: min[0] - (PAD as f64 - 0.5) * h,
        y0: min[1] - (PAD as f64 - 0.5) * h,
        h,
    };
    let mut sdist = Vec::with_capacity(grid.len());
    let mut frac = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let p = grid.point(k);
        let dx = (min[0] - p[0]).max(p[0] - max[0]);
        let dy = (min[1] - p[1]).max(p[1] - max[1]);
        let s = if dx <= 0.0 && dy <= 0.0 {
            dx.max(dy)
        } else {
            dx.max(0.0).hypot(dy.max(0.0))
        };
        sdist.push(s);
        let overlap = |c: f64, lo: f64, hi: f64| {
            ((c + 0.5 * h).min(hi) - (c - 0.5 * h).max(lo)).max(0.0) / h
        };
        frac.push(overlap(p[0], min[0], max[0]) * overlap(p[1], min[1], max[1]));
    }
    finish(Geometry::Rectangle { min, max }, grid, sdist, frac)
}

/// Builds a mask domain from a raster; pixel centres become nodes with
/// spacing `h`, padded on all sides. Row 0 of the raster is the top edge.
pub fn from_raster(r: &Raster, h: f64) -> Result<Arc<Domain>> {
    let grid = Grid {
        dim: 2,
        nx: r.width + 2 * PAD,
        ny: r.height + 2 * PAD,
        x0: -(PAD as f64 - 0.5) * h,
        y0: -(PAD as f64 - 0.5) * h,
        h,
    };
    let mut inside = vec![false; grid.len()];
    for row in 0..r.height {
        for col in 0..r.width {
            if r.inside[row * r.width + col] {
                let j = r.height - 1 - row + PAD;
                inside[grid.index(col + PAD, j)] = true;
            }
        }
    }
    let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
    let to_out = raster::distance_to(&outside, grid.nx, grid.ny);
    let to_in = raster::distance_to(&inside, grid.nx, grid.ny);
    let sdist = (0..grid.len())
        .map(|k| {
            if inside[k] {
                -(to_out[k] - 0.5) * h
            } else {
                (to_in[k] - 0.5) * h
            }
        })
        .collect();
    let frac = inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    finish(Geometry::Raster, grid, sdist, frac)
}

fn finish(geometry: Geometry, grid: Grid, sdist: Vec<f64>, frac: Vec<f64>) -> Result<Arc<Domain>> {
    let mask: Vec<bool> = sdist.iter().map(|&s| s < 0.0).collect();
    let n_in = mask.iter().filter(|&&b| b).count();
    if n_in == 0 {
        return Err(Error::DegenerateDomain("empty mask".into()));
    }
    let comps = component_count(&grid, &mask, false);
    if comps != 1 {
        return Err(Error::Connectivity { components: comps });
    }
    let outside: Vec<bool> = mask.iter().map(|b| !b).collect();
    let boundary_components = if grid.dim == 1 {
        1
    } else {
        component_count(&grid, &outside, true)
    };
    let mut warnings = Vec::new();
    if boundary_components > 1 {
        warnings.push(format!(
            "domain has {boundary_components} boundary components; collar solvers require one"
        ));
    }
    Ok(Arc::new(Domain {
        geometry,
        grid,
        mask,
        sdist,
        cell_fraction: frac,
        boundary_components,
        warnings,
    }))
}

/// Number of connected components of `set` (4-connected, or 8-connected in 2D
/// when `diagonal` is set).
pub fn component_count(grid: &Grid, set: &[bool], diagonal: bool) -> usize {
    let mut seen = vec![false; grid.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !set[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = grid.ij(k);
            let range = |c: usize, n: usize| c.saturating_sub(1)..=(c + 1).min(n - 1);
            for b in range(j, grid.ny) {
                for a in range(i, grid.nx) {
                    let di = a.abs_diff(i);
                    let dj = b.abs_diff(j);
                    if di + dj == 0 || (!diagonal && di + dj > 1) {
                        continue;
                    }
                    let q = grid.index(a, b);
                    if set[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    count
}

/// Largest distance from an in-mask node to the boundary.
pub fn inradius(domain: &Domain) -> f64 {
    domain
        .sdist
        .iter()
        .zip(&domain.mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| -s)
        .fold(0.0, f64::max)
}

/// A collar: the band of in-mask nodes within distance `epsilon` of the
/// boundary.
#[derive(Clone, Debug)]
pub struct CollarSpec {
    pub domain: Arc<Domain>,
    pub epsilon: f64,
    /// Band membership per node.
    pub band: Vec<bool>,
    /// Band nodes with an in-mask non-band axis neighbour.
    pub inner_boundary: Vec<usize>,
    /// Distance from the boundary to the inner boundary node set.
    pub thickness: f64,
}

impl CollarSpec {
    pub fn band_nodes(&self) -> Vec<usize> {
        (0..self.band.len()).filter(|&k| self.band[k]).collect()
    }

    /// In-mask nodes outside the band.
    pub fn interior(&self) -> Vec<bool> {
        self.domain
            .mask
            .iter()
            .zip(&self.band)
            .map(|(&m, &b)| m && !b)
            .collect()
    }
}

/// Collar of thickness `epsilon`.
pub fn collar(domain: &Arc<Domain>, epsilon: f64) -> Result<CollarSpec> {
    let r = inradius(domain);
    if !(epsilon > 0.0) || epsilon >= r {
        return Err(Error::CollarTooThick {
            epsilon,
            inradius: r,
        });
    }
    let grid = &domain.grid;
    let band: Vec<bool> = (0..grid.len())
        .map(|k| domain.mask[k] && domain.sdist[k] >= -epsilon)
        .collect();
    let inner_boundary: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            band[k]
                && grid
                    .neighbors(k)
                    .any(|q| domain.mask[q] && !band[q])
        })
        .collect();
    let thickness = inner_boundary
        .iter()
        .map(|&k| -domain.sdist[k])
        .fold(f64::INFINITY, f64::min);
    let thickness = if thickness.is_finite() { thickness } else { epsilon };
    Ok(CollarSpec {
        domain: domain.clone(),
        epsilon,
        band,
        inner_boundary,
        thickness,
    })
}

/// The subdomain `{sdist < -d/2}` on the same grid, with signed distance
/// shifted by `d/2`.
pub fn exhaust(domain: &Arc<Domain>, d: f64) -> Result<Arc<Domain>> {
    let r = inradius(domain);
    if !(d > 0.0) || d >= r {
        return Err(Error::ExhaustionFailure(format!(
            "d = {d} outside (0, inradius = {r})"
        )));
    }
    let grid = domain.grid.clone();
    let sdist: Vec<f64> = domain.sdist.iter().map(|&s| s + 0.5 * d).collect();
    let frac = sublevel_fractions(&grid, &sdist);
    finish(Geometry::Sublevel { d }, grid, sdist, frac).map_err(|e| match e {
        Error::DegenerateDomain(m) => Error::ExhaustionFailure(m),
        Error::Connectivity { components } => {
            Error::ExhaustionFailure(format!("subdomain has {components} components"))
        }
        other => other,
    })
}

fn sublevel_fractions(grid: &Grid, sdist: &[f64]) -> Vec<f64> {
    let h = grid.h;
    (0..grid.len())
        .map(|k| {
            if grid.dim == 1 {
                return (0.5 - sdist[k] / h).clamp(0.0, 1.0);
            }
            let d = |axis: usize| {
                let p = grid.neighbor(k, axis, 1).map(|q| sdist[q]);
                let m = grid.neighbor(k, axis, -1).map(|q| sdist[q]);
                match (p, m) {
                    (Some(p), Some(m)) => (p - m) / (2.0 * h),
                    (Some(p), None) => (p - sdist[k]) / h,
                    (None, Some(m)) => (sdist[k] - m) / h,
                    (None, None) => 0.0,
                }
            };
            let (gx, gy) = (d(0), d(1));
            let g = gx.hypot(gy);
            let nrm = if g > 0.0 { [gx / g, gy / g] } else { [1.0, 0.0] };
            halfplane_fraction(sdist[k], nrm, h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfplane_fraction_limits() {
        let h = 0.1;
        assert_eq!(halfplane_fraction(0.0, [1.0, 0.0], h), 0.5);
        assert_eq!(halfplane_fraction(-h, [1.0, 0.0], h), 1.0);
        assert_eq!(halfplane_fraction(h, [0.0, 1.0], h), 0.0);
        let d = std::f64::consts::FRAC_1_SQRT_2;
        assert!((halfplane_fraction(0.0, [d, d], h) - 0.5).abs() < 1e-15);
        // symmetric complement
        for s in [-0.03, -0.01, 0.02, 0.06] {
            let n = [0.6, 0.8];
            let a = halfplane_fraction(s, n, h);
            let b = halfplane_fraction(-s, [-0.6, -0.8], h);
            assert!((a + b - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn halfplane_fraction_matches_sampling() {
        let h = 1.0;
        let n = [0.28, 0.96];
        for s in [-0.6, -0.3, -0.1, 0.0, 0.2, 0.45] {
            let m = 400;
            let mut hits = 0;
            for a in 0..m {
                for b in 0..m {
                    let x = (a as f64 + 0.5) / m as f64 - 0.5;
                    let y = (b as f64 + 0.5) / m as f64 - 0.5;
                    if n[0] * x + n[1] * y <= -s {
                        hits += 1;
                    }
                }
            }
            let sampled = hits as f64 / (m * m) as f64;
            assert!((halfplane_fraction(s, n, h) - sampled).abs() < 5e-3, "s = {s}");
        }
    }

    #[test]
    fn interval_layout() {
        let d = build_domain(&ShapeSpec::unit_interval(), 32).unwrap();
        assert_eq!(d.dim(), 1);
        assert_eq!(d.mask.iter().filter(|&&m| m).count(), 31);
        assert!((d.measure() - 1.0).abs() < 1e-14);
        assert_eq!(d.sdist[PAD], 0.0);
        assert_eq!(d.sdist[PAD + 32], 0.0);
    }

    #[test]
    fn raster_domain_with_hole_counts_two_boundaries() {
        let (w, hgt) = (20, 20);
        let inside = (0..w * hgt)
            .map(|k| {
                let (c, r) = (k % w, k / w);
                let ring = (2..18).contains(&c) && (2..18).contains(&r);
                let hole = (8..12).contains(&c) && (8..12).contains(&r);
                ring && !hole
            })
            .collect();
        let r = Raster::new(w, hgt, inside).unwrap();
        let d = from_raster(&r, 1.0 / 20.0).unwrap();
        assert_eq!(d.boundary_components, 2);
        assert!(!d.warnings.is_empty());
    }

    #[test]
    fn disconnected_mask_is_rejected() {
        let inside = (0..100).map(|k| k % 10 < 3 || k % 10 > 6).collect();
        let r = Raster::new(10, 10, inside).unwrap();
        assert!(matches!(
            from_raster(&r, 0.1),
            Err(Error::Connectivity { components: 2 })
        ));
    }
}
