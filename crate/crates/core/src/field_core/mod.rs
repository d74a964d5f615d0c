//! Grid fields, finite-difference operators, quadrature and mollification.

mod holder;
pub mod io;

pub use holder::{
    holder_norm, holder_norm_vector, holder_seminorm, holder_seminorm_with_budget,
    HolderEstimate, DEFAULT_PAIR_BUDGET,
};

use crate::domain_geom::Domain;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Value carried by nodes outside the mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    One,
    Zero,
}

impl Fill {
    pub fn value(self) -> f64 {
        match self {
            Fill::One => 1.0,
            Fill::Zero => 0.0,
        }
    }
}

/// Real samples on every node of a domain's grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub domain: Arc<Domain>,
    pub values: Vec<f64>,
    pub fill: Fill,
}

impl ScalarField {
    /// In-mask nodes take `f(x, y)`, the rest take the fill value.
    pub fn from_fn(domain: &Arc<Domain>, fill: Fill, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.len())
            .map(|k| {
                if domain.mask[k] {
                    let p = domain.grid.point(k);
                    f(p[0], p[1])
                } else {
                    fill.value()
                }
            })
            .collect();
        Self {
            domain: domain.clone(),
            values,
            fill,
        }
    }

    pub fn constant(domain: &Arc<Domain>, c: f64, fill: Fill) -> Self {
        Self::from_fn(domain, fill, |_, _| c)
    }

    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self::constant(domain, 0.0, Fill::Zero)
    }

    pub fn ones(domain: &Arc<Domain>) -> Self {
        Self::constant(domain, 1.0, Fill::One)
    }

    /// Wraps raw node values, resetting out-of-mask nodes to the fill value.
    pub fn from_values(domain: &Arc<Domain>, mut values: Vec<f64>, fill: Fill) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                domain.len()
            )));
        }
        for (v, &m) in values.iter_mut().zip(&domain.mask) {
            if !m {
                *v = fill.value();
            }
        }
        Ok(Self {
            domain: domain.clone(),
            values,
            fill,
        })
    }

    /// Node-wise map over in-mask values; out-of-mask nodes take `fill`.
    pub fn map(&self, fill: Fill, f: impl Fn(f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.domain.mask)
            .map(|(&v, &m)| if m { f(v) } else { fill.value() })
            .collect();
        Self {
            domain: self.domain.clone(),
            values,
            fill,
        }
    }

    /// Node-wise combination with another field on the same grid.
    pub fn zip_map(&self, other: &ScalarField, fill: Fill, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.domain, &other.domain)?;
        let values = (0..self.values.len())
            .map(|k| {
                if self.domain.mask[k] {
                    f(self.values[k], other.values[k])
                } else {
                    fill.value()
                }
            })
            .collect();
        Ok(Self {
            domain: self.domain.clone(),
            values,
            fill,
        })
    }

    /// Same values viewed on another domain sharing this grid.
    pub fn on_domain(&self, domain: &Arc<Domain>) -> Result<Self> {
        same_grid(&self.domain, domain)?;
        Self::from_values(domain, self.values.clone(), self.fill)
    }

    /// Max |value| over in-mask nodes.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.domain.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_inside(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.domain.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One or two component samples on every grid node.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub domain: Arc<Domain>,
    pub comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(domain: &Arc<Domain>) -> Self {
        Self {
            domain: domain.clone(),
            comps: vec![vec![0.0; domain.len()]; domain.dim()],
        }
    }

    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(domain);
        for k in 0..domain.len() {
            if domain.mask[k] {
                let p = domain.grid.point(k);
                let v = f(p[0], p[1]);
                for (c, comp) in out.comps.iter_mut().enumerate() {
                    comp[k] = v[c];
                }
            }
        }
        out
    }

    pub fn from_comps(domain: &Arc<Domain>, mut comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != domain.dim() || comps.iter().any(|c| c.len() != domain.len()) {
            return Err(Error::Shape("vector components do not match the grid".into()));
        }
        for c in comps.iter_mut() {
            for (v, &m) in c.iter_mut().zip(&domain.mask) {
                if !m {
                    *v = 0.0;
                }
            }
        }
        Ok(Self {
            domain: domain.clone(),
            comps,
        })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Euclidean length at node `k`.
    #[inline]
    pub fn norm_at(&self, k: usize) -> f64 {
        self.comps.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt()
    }

    /// Max node-wise Euclidean length over in-mask nodes.
    pub fn max_norm(&self) -> f64 {
        (0..self.domain.len())
            .filter(|&k| self.domain.mask[k])
            .map(|k| self.norm_at(k))
            .fold(0.0, f64::max)
    }

    /// Max node-wise length over the nodes where `set` is true.
    pub fn max_norm_on(&self, set: &[bool]) -> f64 {
        (0..self.domain.len())
            .filter(|&k| set[k])
            .map(|k| self.norm_at(k))
            .fold(0.0, f64::max)
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.comps[c].clone(),
            fill: Fill::Zero,
        }
    }

    pub fn axpy(&self, a: f64, other: &VectorField) -> Result<VectorField> {
        same_grid(&self.domain, &other.domain)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + a * q).collect())
            .collect();
        Ok(VectorField {
            domain: self.domain.clone(),
            comps,
        })
    }
}

/// Checks that two domains share a grid.
pub fn same_grid(a: &Domain, b: &Domain) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::Shape("fields live on different grids".into()));
    }
    Ok(())
}

/// Derivative along `axis` at node `k`: central when both neighbours are in
/// the mask, second-order one-sided when only one side has two in-mask
/// nodes, first-order when only one neighbour exists, zero otherwise.
#[inline]
pub fn masked_derivative(values: &[f64], domain: &Domain, k: usize, axis: usize) -> f64 {
    let g = &domain.grid;
    let h = g.h;
    let inside = |q: Option<usize>| q.filter(|&q| domain.mask[q]);
    let p1 = inside(g.neighbor(k, axis, 1));
    let m1 = inside(g.neighbor(k, axis, -1));
    match (p1, m1) {
        (Some(p), Some(m)) => (values[p] - values[m]) / (2.0 * h),
        (Some(p), None) => match inside(g.neighbor(p, axis, 1)) {
            Some(pp) => (-3.0 * values[k] + 4.0 * values[p] - values[pp]) / (2.0 * h),
            None => (values[p] - values[k]) / h,
        },
        (None, Some(m)) => match inside(g.neighbor(m, axis, -1)) {
            Some(mm) => (3.0 * values[k] - 4.0 * values[m] + values[mm]) / (2.0 * h),
            None => (values[k] - values[m]) / h,
        },
        (None, None) => 0.0,
    }
}

fn require_interior(domain: &Domain) -> Result<()> {
    let g = &domain.grid;
    let any = (0..g.len()).any(|k| domain.mask[k] && g.neighbors(k).all(|q| domain.mask[q]));
    if !any {
        return Err(Error::DegenerateDomain("no interior node".into()));
    }
    Ok(())
}

/// Discrete gradient; zero outside the mask.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    let d = &f.domain;
    require_interior(d)?;
    let mut out = VectorField::zeros(d);
    for k in 0..d.len() {
        if d.mask[k] {
            for (axis, comp) in out.comps.iter_mut().enumerate() {
                comp[k] = masked_derivative(&f.values, d, k, axis);
            }
        }
    }
    Ok(out)
}

/// Discrete divergence with the same stencil as [`gradient`].
pub fn divergence(u: &VectorField) -> Result<ScalarField> {
    let d = &u.domain;
    if u.dim() != d.dim() {
        return Err(Error::Shape(format!(
            "{}-component field on a {}D domain",
            u.dim(),
            d.dim()
        )));
    }
    let mut values = vec![0.0; d.len()];
    for (k, v) in values.iter_mut().enumerate() {
        if d.mask[k] {
            *v = (0..d.dim())
                .map(|axis| masked_derivative(&u.comps[axis], d, k, axis))
                .sum();
        }
    }
    Ok(ScalarField {
        domain: d.clone(),
        values,
        fill: Fill::Zero,
    })
}

/// The rotated gradient `(∂γ/∂y, −∂γ/∂x)`, whose divergence vanishes wherever
/// the central stencils apply.
pub fn rotated_gradient(gamma: &ScalarField) -> Result<VectorField> {
    let d = &gamma.domain;
    if d.dim() != 2 {
        return Err(Error::Shape("rotated gradient needs a 2D domain".into()));
    }
    let g = gradient(gamma)?;
    let comps = vec![g.comps[1].clone(), g.comps[0].iter().map(|v| -v).collect()];
    Ok(VectorField {
        domain: d.clone(),
        comps,
    })
}

/// Per-node matrix `[component][axis]` of the masked differences of a
/// displacement (see [`masked_derivative`]). Zero outside the mask.
pub fn displacement_gradient(displacement: &VectorField) -> Vec<[[f64; 2]; 2]> {
    let d = &displacement.domain;
    let dim = d.dim();
    let mut out = vec![[[0.0; 2]; 2]; d.len()];
    for (k, m) in out.iter_mut().enumerate() {
        if !d.mask[k] {
            continue;
        }
        for c in 0..dim {
            for axis in 0..dim {
                m[c][axis] = masked_derivative(&displacement.comps[c], d, k, axis);
            }
        }
    }
    out
}

/// Jacobian determinant of the map `x ↦ x + displacement(x)` from
/// [`displacement_gradient`]. Nodes outside the mask carry 1.
pub fn jacobian_det(displacement: &VectorField) -> ScalarField {
    let d = &displacement.domain;
    let grad = displacement_gradient(displacement);
    let mut values = vec![1.0; d.len()];
    for (k, v) in values.iter_mut().enumerate() {
        if !d.mask[k] {
            continue;
        }
        let m = &grad[k];
        *v = if d.dim() == 1 {
            1.0 + m[0][0]
        } else {
            (1.0 + m[0][0]) * (1.0 + m[1][1]) - m[0][1] * m[1][0]
        };
    }
    ScalarField {
        domain: d.clone(),
        values,
        fill: Fill::One,
    }
}

/// Cut-cell quadrature: every node contributes its cell area times the
/// inside fraction times its value, summed in storage order.
pub fn integrate(f: &ScalarField) -> f64 {
    let d = &f.domain;
    let mut s = 0.0;
    for k in 0..d.len() {
        let w = d.cell_fraction[k];
        if w > 0.0 {
            s += w * f.values[k];
        }
    }
    s * d.h().powi(d.dim() as i32)
}

/// Sampled, renormalized bump kernel `exp(−1/(1−ρ²))` on the ball of the
/// given radius, as (offset i, offset j, weight).
pub fn mollifier_kernel(dim: usize, h: f64, radius: f64) -> Vec<(isize, isize, f64)> {
    let m = (radius / h).ceil() as isize;
    let jr = if dim == 1 { 0 } else { m };
    let mut out = Vec::new();
    for dj in -jr..=jr {
        for di in -m..=m {
            let rho2 = ((di * di + dj * dj) as f64) * h * h / (radius * radius);
            if rho2 < 1.0 {
                let w = (-1.0 / (1.0 - rho2)).exp();
                if w > 0.0 {
                    out.push((di, dj, w));
                }
            }
        }
    }
    let total: f64 = out.iter().map(|t| t.2).sum();
    for t in out.iter_mut() {
        t.2 /= total;
    }
    out
}

/// Convolution with the normalized bump kernel, treating `f` as extended by
/// 1 outside the mask. Computed as `1 + ρ * (f − 1)` so the output is exactly
/// 1 wherever the kernel ball misses `supp(f − 1)`.
pub fn mollify(f: &ScalarField, radius: f64) -> Result<ScalarField> {
    let d = &f.domain;
    if f.fill != Fill::One {
        return Err(Error::Precondition("mollify needs a density field (fill 1)".into()));
    }
    let min = 2.0 * d.h();
    if !(radius >= min) {
        return Err(Error::KernelUnderresolved { radius, min });
    }
    let kernel = mollifier_kernel(d.dim(), d.h(), radius);
    let g = &d.grid;
    let excess: Vec<f64> = (0..d.len())
        .map(|k| if d.mask[k] { f.values[k] - 1.0 } else { 0.0 })
        .collect();
    let mut values = vec![1.0; d.len()];
    for (k, out) in values.iter_mut().enumerate() {
        if !d.mask[k] {
            continue;
        }
        let (i, j) = g.ij(k);
        let mut acc = 0.0;
        for &(di, dj, w) in &kernel {
            let a = i as isize + di;
            let b = j as isize + dj;
            if a < 0 || b < 0 || a as usize >= g.nx || b as usize >= g.ny {
                continue;
            }
            acc += w * excess[g.index(a as usize, b as usize)];
        }
        *out = 1.0 + acc;
    }
    Ok(ScalarField {
        domain: d.clone(),
        values,
        fill: Fill::One,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_geom::{build_domain, ShapeSpec};

    #[test]
    fn gradient_exact_on_linear() {
        let d = build_domain(&ShapeSpec::unit_square(), 64).unwrap();
        let f = ScalarField::from_fn(&d, Fill::Zero, |x, y| 3.0 * x - 2.0 * y + 1.0);
        let g = gradient(&f).unwrap();
        for k in d.inside_nodes() {
            assert!((g.comps[0][k] - 3.0).abs() < 1e-11);
            assert!((g.comps[1][k] + 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn integrate_unit_square_exact() {
        let d = build_domain(&ShapeSpec::unit_square(), 64).unwrap();
        assert!((integrate(&ScalarField::ones(&d)) - 1.0).abs() < 1e-12);
        assert_eq!(integrate(&ScalarField::zeros(&d)), 0.0);
    }

    #[test]
    fn kernel_has_unit_mass() {
        let k = mollifier_kernel(2, 0.01, 0.05);
        let s: f64 = k.iter().map(|t| t.2).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(k.iter().all(|t| t.2 > 0.0));
    }

    #[test]
    fn mollify_rejects_coarse_radius() {
        let d = build_domain(&ShapeSpec::unit_disk(), 32).unwrap();
        let f = ScalarField::ones(&d);
        assert!(matches!(mollify(&f, 0.03), Err(Error::KernelUnderresolved { .. })));
        let m = mollify(&f, 0.1).unwrap();
        assert!(m.values.iter().all(|&v| v == 1.0));
    }
}
