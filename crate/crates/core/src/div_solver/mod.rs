//! The divergence equation `div u = h` with `u = 0` on a boundary collar.
//!
//! A first solution is the gradient of a Neumann potential. On the collar
//! band that field is divergence free with zero period, so it has a stream
//! function there; subtracting the rotated gradient of any extension of that
//! stream function removes the field on the band without changing its
//! divergence.

pub mod linear;

use crate::domain_geom::{CollarSpec, Domain};
use crate::error::{Error, Result};
use crate::field_core::{integrate, same_grid, Fill, ScalarField, VectorField};
use linear::{
    conjugate_gradient, harmonic_extension, neumann_operator, tree_integrate, Numbering,
};
use std::sync::Arc;

/// Largest |h| tolerated on band nodes.
pub const BAND_DATUM_TOL: f64 = 1e-12;

/// Relative mean above which a datum is rejected rather than projected.
pub const MEAN_REJECT: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct NeumannSolution {
    /// Zero-mean potential (0 outside the mask).
    pub potential: ScalarField,
    pub residual_l2: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct StreamPrimitive {
    /// Stream function on the band, 0 elsewhere.
    pub gamma: ScalarField,
    pub base_node: usize,
    pub closedness_residual: f64,
    pub band: Vec<bool>,
}

/// Diagnostics of a collar solve.
#[derive(Clone, Debug)]
pub struct CollarSolution {
    pub u: VectorField,
    /// Largest mismatch of the stream function over non-tree lattice edges.
    pub closedness_residual: f64,
    pub neumann_iterations: usize,
    pub extension_iterations: usize,
}

fn check_mean(sum: f64, scale: f64) -> Result<()> {
    if scale > 0.0 && sum.abs() > MEAN_REJECT * scale {
        return Err(Error::InconsistentDatum { mean: sum, scale });
    }
    Ok(())
}

/// Solves the 5-point (3-point in 1D) Neumann problem `Δw = rhs` over the
/// in-mask nodes. `rhs` must already have zero node sum.
fn neumann_potential(domain: &Domain, rhs: &[f64]) -> Result<(Vec<f64>, usize, f64)> {
    let g = &domain.grid;
    let num = Numbering::new(&domain.mask);
    let op = neumann_operator(g.nx, g.ny, &num);
    let h2 = g.h * g.h;
    // A = −L, so A w = −h² rhs
    let b: Vec<f64> = num.site_of.iter().map(|&k| -h2 * rhs[k]).collect();
    let (x, iters, rel) = conjugate_gradient(&op, &b, true)?;
    let mut w = vec![0.0; g.len()];
    for (u, &k) in num.site_of.iter().enumerate() {
        w[k] = x[u];
    }
    Ok((w, iters, rel))
}

/// Neumann problem with a zero-flux (mirror ghost node) boundary condition.
pub fn solve_neumann(h: &ScalarField) -> Result<NeumannSolution> {
    let d = &h.domain;
    let inside = d.inside_nodes();
    let sum: f64 = inside.iter().map(|&k| h.values[k]).sum();
    let scale: f64 = inside.iter().map(|&k| h.values[k].abs()).sum();
    check_mean(sum, scale)?;
    let mean = sum / inside.len() as f64;
    let mut rhs = vec![0.0; d.len()];
    for &k in &inside {
        rhs[k] = h.values[k] - mean;
    }
    let (mut w, iterations, residual_l2) = neumann_potential(d, &rhs)?;
    let pot = ScalarField::from_values(d, w.clone(), Fill::Zero)?;
    let inside_measure: f64 = inside.iter().map(|&k| d.weight(k)).sum();
    let shift = integrate(&pot) / inside_measure;
    for &k in &inside {
        w[k] -= shift;
    }
    Ok(NeumannSolution {
        potential: ScalarField::from_values(d, w, Fill::Zero)?,
        residual_l2,
        iterations,
    })
}

/// Node average of the zero-flux face gradients of `w`.
fn face_average_gradient(domain: &Arc<Domain>, w: &[f64]) -> VectorField {
    let g = &domain.grid;
    let mut u = VectorField::zeros(domain);
    for k in 0..g.len() {
        if !domain.mask[k] {
            continue;
        }
        for axis in 0..g.dim {
            let side = |dir: isize| {
                g.neighbor(k, axis, dir)
                    .filter(|&q| domain.mask[q])
                    .map_or(w[k], |q| w[q])
            };
            u.comps[axis][k] = (side(1) - side(-1)) / (2.0 * g.h);
        }
    }
    u
}

/// First solution `u₀ = ∇w` of `div u = h`, using the mirror ghost at the mask
/// edge so that `u₀` is the average of the zero-flux face gradients.
pub fn solve_div_basic(h: &ScalarField) -> Result<VectorField> {
    let sol = solve_neumann(h)?;
    Ok(face_average_gradient(&h.domain, &sol.potential.values))
}

fn westernmost_boundary_node(domain: &Domain, band: &[bool]) -> Option<usize> {
    let g = &domain.grid;
    let mut best: Option<(usize, usize, usize)> = None;
    for k in 0..g.len() {
        if !band[k] || !g.neighbors(k).any(|q| !domain.mask[q]) {
            continue;
        }
        let (i, j) = g.ij(k);
        if best.is_none_or(|(bi, bj, _)| (i, j) < (bi, bj)) {
            best = Some((i, j, k));
        }
    }
    best.map(|t| t.2)
}

/// Stream function γ on the band with `(∂γ/∂y, −∂γ/∂x) ≈ u0`, by trapezoidal
/// line integration over a breadth-first spanning tree rooted at the
/// westernmost band node touching the boundary.
pub fn stream_primitive(u0: &VectorField, collar: &CollarSpec) -> Result<StreamPrimitive> {
    let d = &collar.domain;
    same_grid(d, &u0.domain)?;
    if d.dim() != 2 {
        return Err(Error::Shape("stream functions need a 2D domain".into()));
    }
    if d.boundary_components != 1 {
        return Err(Error::UnsupportedTopology {
            components: d.boundary_components,
        });
    }
    let g = &d.grid;
    let base_node = westernmost_boundary_node(d, &collar.band)
        .ok_or_else(|| Error::Precondition("collar band does not touch the boundary".into()))?;
    let h = g.h;
    let (ux, uy) = (&u0.comps[0], &u0.comps[1]);
    let inc = |a: usize, b: usize| {
        if b == a + 1 {
            -0.5 * h * (uy[a] + uy[b])
        } else if a == b + 1 {
            0.5 * h * (uy[a] + uy[b])
        } else if b > a {
            0.5 * h * (ux[a] + ux[b])
        } else {
            -0.5 * h * (ux[a] + ux[b])
        }
    };
    let (mut gamma, reached, closedness) = tree_integrate(g.nx, g.ny, &collar.band, base_node, inc);
    if (0..g.len()).any(|k| collar.band[k] && !reached[k]) {
        return Err(Error::Precondition("collar band is not connected".into()));
    }
    let band_max = u0.max_norm_on(&collar.band);
    let tol = 1e-3 * band_max * d.diameter() + 1e-12;
    if closedness > tol {
        return Err(Error::NonzeroPeriod {
            period: closedness,
            tol,
        });
    }
    for (k, v) in gamma.iter_mut().enumerate() {
        if !collar.band[k] {
            *v = 0.0;
        }
    }
    Ok(StreamPrimitive {
        gamma: ScalarField::from_values(d, gamma, Fill::Zero)?,
        base_node,
        closedness_residual: closedness,
        band: collar.band.clone(),
    })
}

/// Harmonic extension of the band stream function to the whole domain; band
/// values are copied unchanged.
pub fn extend_primitive(gp: &StreamPrimitive) -> Result<ScalarField> {
    let d = &gp.gamma.domain;
    let g = &d.grid;
    let unknown: Vec<bool> = (0..g.len()).map(|k| d.mask[k] && !gp.band[k]).collect();
    let mut values = gp.gamma.values.clone();
    harmonic_extension(g.nx, g.ny, &gp.band, &unknown, &mut values)?;
    ScalarField::from_values(d, values, Fill::Zero)
}

/// `u` with `div u = h` in the interior and `u = 0` on the collar band.
pub fn solve_div_collar(h: &ScalarField, collar: &CollarSpec) -> Result<VectorField> {
    Ok(solve_div_collar_detailed(h, collar)?.u)
}

/// Projects `h` to zero node sum over the in-mask non-band nodes, after
/// checking the band precondition and the size of the mean.
fn project_datum(h: &ScalarField, collar: &CollarSpec) -> Result<Vec<f64>> {
    let d = &collar.domain;
    let mut worst = 0.0f64;
    for k in 0..d.len() {
        if collar.band[k] {
            worst = worst.max(h.values[k].abs());
        }
    }
    if worst > BAND_DATUM_TOL {
        return Err(Error::Precondition(format!(
            "datum reaches {worst:e} on the collar band"
        )));
    }
    let interior: Vec<usize> = (0..d.len())
        .filter(|&k| d.mask[k] && !collar.band[k])
        .collect();
    if interior.is_empty() {
        return Err(Error::DegenerateDomain("collar covers the whole domain".into()));
    }
    let sum: f64 = interior.iter().map(|&k| h.values[k]).sum();
    let scale: f64 = interior.iter().map(|&k| h.values[k].abs()).sum();
    check_mean(sum, scale)?;
    let mean = sum / interior.len() as f64;
    let mut rhs = vec![0.0; d.len()];
    for &k in &interior {
        rhs[k] = h.values[k] - mean;
    }
    Ok(rhs)
}

/// [`solve_div_collar`] with solver diagnostics.
///
/// In 2D the construction runs on a staggered lattice: face fluxes of the
/// Neumann potential, a stream function on cell corners integrated over the
/// corners that touch the band or the exterior, and its harmonic extension
/// over the remaining corners. The corrected face fluxes keep the exact
/// discrete divergence of the Neumann solution and vanish on every face
/// adjacent to a band node; node values are face averages.
///
/// In 1D the solution is the cumulative integral of `h` with a four-point
/// cubic rule.
pub fn solve_div_collar_detailed(h: &ScalarField, collar: &CollarSpec) -> Result<CollarSolution> {
    let d = &collar.domain;
    same_grid(d, &h.domain)?;
    if d.dim() == 2 && d.boundary_components != 1 {
        return Err(Error::UnsupportedTopology {
            components: d.boundary_components,
        });
    }
    let rhs = project_datum(h, collar)?;
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(CollarSolution {
            u: VectorField::zeros(d),
            closedness_residual: 0.0,
            neumann_iterations: 0,
            extension_iterations: 0,
        });
    }
    if d.dim() == 1 {
        return Ok(CollarSolution {
            u: cumulative_1d(d, &rhs),
            closedness_residual: 0.0,
            neumann_iterations: 0,
            extension_iterations: 0,
        });
    }
    let g = &d.grid;
    let (nx, ny, hg) = (g.nx, g.ny, g.h);
    let (w, neumann_iterations, _) = neumann_potential(d, &rhs)?;

    // face fluxes: fx[k] on the face k -> k+x, fy[k] on k -> k+y
    let mut fx = vec![0.0; g.len()];
    let mut fy = vec![0.0; g.len()];
    for k in 0..g.len() {
        if !d.mask[k] {
            continue;
        }
        if let Some(q) = g.neighbor(k, 0, 1).filter(|&q| d.mask[q]) {
            fx[k] = (w[q] - w[k]) / hg;
        }
        if let Some(q) = g.neighbor(k, 1, 1).filter(|&q| d.mask[q]) {
            fy[k] = (w[q] - w[k]) / hg;
        }
    }

    // corner (i, j) sits at (i + 1/2, j + 1/2) on an (nx-1) × (ny-1) lattice
    let (cx, cy) = (nx - 1, ny - 1);
    let interior_node = |i: usize, j: usize| {
        let k = g.index(i, j);
        d.mask[k] && !collar.band[k]
    };
    let free: Vec<bool> = (0..cx * cy)
        .map(|c| {
            let (i, j) = (c % cx, c / cx);
            interior_node(i, j)
                && interior_node(i + 1, j)
                && interior_node(i, j + 1)
                && interior_node(i + 1, j + 1)
        })
        .collect();
    let pinned: Vec<bool> = free.iter().map(|b| !b).collect();
    let node = |c: usize, di: usize, dj: usize| g.index(c % cx + di, c / cx + dj);
    let inc = |a: usize, b: usize| {
        if b == a + 1 {
            -hg * fy[node(a, 1, 0)]
        } else if a == b + 1 {
            hg * fy[node(a, 0, 0)]
        } else if b > a {
            hg * fx[node(a, 0, 1)]
        } else {
            -hg * fx[node(a, 0, 0)]
        }
    };
    let (mut gc, reached, closedness) = tree_integrate(cx, cy, &pinned, 0, inc);
    if (0..cx * cy).any(|c| pinned[c] && !reached[c]) {
        return Err(Error::UnsupportedTopology { components: 2 });
    }
    let extension_iterations = harmonic_extension(cx, cy, &pinned, &free, &mut gc)?;

    let mut gx = fx;
    let mut gy = fy;
    for k in 0..g.len() {
        if !d.mask[k] {
            continue;
        }
        let (i, j) = g.ij(k);
        if g.neighbor(k, 0, 1).is_some_and(|q| d.mask[q]) {
            gx[k] -= (gc[j * cx + i] - gc[(j - 1) * cx + i]) / hg;
        }
        if g.neighbor(k, 1, 1).is_some_and(|q| d.mask[q]) {
            gy[k] += (gc[j * cx + i] - gc[j * cx + i - 1]) / hg;
        }
    }
    let mut u = VectorField::zeros(d);
    for k in 0..g.len() {
        if !d.mask[k] {
            continue;
        }
        let west = g.neighbor(k, 0, -1).filter(|&q| d.mask[q]).map_or(0.0, |q| gx[q]);
        let south = g.neighbor(k, 1, -1).filter(|&q| d.mask[q]).map_or(0.0, |q| gy[q]);
        let east = if g.neighbor(k, 0, 1).is_some_and(|q| d.mask[q]) { gx[k] } else { 0.0 };
        let north = if g.neighbor(k, 1, 1).is_some_and(|q| d.mask[q]) { gy[k] } else { 0.0 };
        u.comps[0][k] = 0.5 * (east + west);
        u.comps[1][k] = 0.5 * (north + south);
    }
    Ok(CollarSolution {
        u,
        closedness_residual: closedness,
        neumann_iterations,
        extension_iterations,
    })
}

/// Cumulative integral with the cubic-interpolant rule
/// `∫_{x_{i-1}}^{x_i} g ≈ h/24 (−g_{i−2} + 13 g_{i−1} + 13 g_i − g_{i+1})`.
pub(crate) fn cumulative_1d(domain: &Arc<Domain>, g_vals: &[f64]) -> VectorField {
    let n = g_vals.len();
    let h = domain.h();
    let at = |i: isize| {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            g_vals[i as usize]
        }
    };
    let mut u = vec![0.0; n];
    for i in 1..n {
        let ii = i as isize;
        u[i] = u[i - 1]
            + h / 24.0 * (-at(ii - 2) + 13.0 * at(ii - 1) + 13.0 * at(ii) - at(ii + 1));
    }
    for (v, &m) in u.iter_mut().zip(&domain.mask) {
        if !m {
            *v = 0.0;
        }
    }
    VectorField {
        domain: domain.clone(),
        comps: vec![u],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_geom::{build_domain, collar, ShapeSpec};

    #[test]
    fn zero_datum_gives_zero_field() {
        let d = build_domain(&ShapeSpec::unit_disk(), 24).unwrap();
        let c = collar(&d, 0.15).unwrap();
        let u = solve_div_collar(&ScalarField::zeros(&d), &c).unwrap();
        assert_eq!(u.max_norm(), 0.0);
        let n = solve_neumann(&ScalarField::zeros(&d)).unwrap();
        assert_eq!(n.potential.max_abs(), 0.0);
    }

    #[test]
    fn band_datum_is_rejected() {
        let d = build_domain(&ShapeSpec::unit_disk(), 24).unwrap();
        let c = collar(&d, 0.15).unwrap();
        let h = ScalarField::from_fn(&d, Fill::Zero, |x, _| x);
        assert!(matches!(solve_div_collar(&h, &c), Err(Error::Precondition(_))));
    }
}
