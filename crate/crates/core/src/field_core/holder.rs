//! Discrete Hölder norms. Every estimate is a supremum over a set of node
//! pairs and therefore a lower bound of the continuum quantity.

use super::{masked_derivative, ScalarField, VectorField};
use crate::domain_geom::Domain;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Pairs scanned exhaustively before switching to a strided subsample.
pub const DEFAULT_PAIR_BUDGET: usize = 4_000_000;

/// Half-width (in nodes) of the local window always scanned when subsampling.
const LOCAL_WINDOW: isize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub order_r: usize,
    pub exponent_alpha: f64,
    pub value: f64,
    /// Number of node pairs scanned for the seminorm part.
    pub pair_budget: usize,
}

fn ratio(values: &[f64], domain: &Domain, alpha: f64, a: usize, b: usize) -> f64 {
    let pa = domain.grid.point(a);
    let pb = domain.grid.point(b);
    let dist = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
    (values[a] - values[b]).abs() / dist.powf(alpha)
}

/// α-seminorm over the node set `region` with the default pair budget.
pub fn holder_seminorm(f: &ScalarField, alpha: f64, region: &[usize]) -> Result<(f64, usize)> {
    holder_seminorm_with_budget(&f.values, &f.domain, alpha, region, DEFAULT_PAIR_BUDGET)
}

/// α-seminorm of raw node values over `region`. Exhaustive when all pairs fit
/// in `budget`; otherwise every pair inside a small index window plus all
/// pairs of a strided node subset. Returns (value, pairs scanned).
pub fn holder_seminorm_with_budget(
    values: &[f64],
    domain: &Domain,
    alpha: f64,
    region: &[usize],
    budget: usize,
) -> Result<(f64, usize)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside (0, 1]")));
    }
    let n = region.len();
    if n < 2 {
        return Err(Error::DegenerateRegion(format!("{n} nodes")));
    }
    let all_pairs = n * (n - 1) / 2;
    let mut best = 0.0f64;
    if all_pairs <= budget {
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(ratio(values, domain, alpha, region[a], region[b]));
            }
        }
        return Ok((best, all_pairs));
    }
    let g = &domain.grid;
    let mut member = vec![false; g.len()];
    for &k in region {
        member[k] = true;
    }
    let mut scanned = 0usize;
    let jw = if g.dim == 1 { 0 } else { LOCAL_WINDOW };
    for &k in region {
        let (i, j) = g.ij(k);
        for dj in 0..=jw {
            for di in -LOCAL_WINDOW..=LOCAL_WINDOW {
                if dj == 0 && di <= 0 {
                    continue;
                }
                let a = i as isize + di;
                let b = j as isize + dj;
                if a < 0 || a as usize >= g.nx || b as usize >= g.ny {
                    continue;
                }
                let q = g.index(a as usize, b as usize);
                if member[q] {
                    best = best.max(ratio(values, domain, alpha, k, q));
                    scanned += 1;
                }
            }
        }
    }
    let remaining = budget.saturating_sub(scanned).max(budget / 2);
    let m = (((2 * remaining) as f64).sqrt() as usize).clamp(2, n);
    let stride = n.div_ceil(m);
    let subset: Vec<usize> = region.iter().step_by(stride).copied().collect();
    for a in 0..subset.len() {
        for b in a + 1..subset.len() {
            best = best.max(ratio(values, domain, alpha, subset[a], subset[b]));
        }
    }
    scanned += subset.len() * (subset.len() - 1) / 2;
    Ok((best, scanned))
}

fn max_abs_on(values: &[f64], region: &[usize]) -> f64 {
    region.iter().map(|&k| values[k].abs()).fold(0.0, f64::max)
}

/// `‖f‖_{C^{r,α}}` over the in-mask nodes, r ∈ {0, 1}: the max norms of f and
/// its first discrete derivatives plus the α-seminorm of the top derivatives.
pub fn holder_norm(f: &ScalarField, r: usize, alpha: f64) -> Result<HolderEstimate> {
    holder_norm_raw(&[&f.values], &f.domain, r, alpha)
}

/// Vector version: the max over components of each term.
pub fn holder_norm_vector(u: &VectorField, r: usize, alpha: f64) -> Result<HolderEstimate> {
    let comps: Vec<&Vec<f64>> = u.comps.iter().collect();
    holder_norm_raw(&comps, &u.domain, r, alpha)
}

fn holder_norm_raw(
    comps: &[&Vec<f64>],
    domain: &Domain,
    r: usize,
    alpha: f64,
) -> Result<HolderEstimate> {
    if r > 1 {
        return Err(Error::UnsupportedOrder(r));
    }
    let region = domain.inside_nodes();
    let mut sup = 0.0f64;
    let mut top: Vec<Vec<f64>> = Vec::new();
    for c in comps {
        sup = sup.max(max_abs_on(c, &region));
        if r == 0 {
            top.push((*c).clone());
        }
    }
    let mut dsup = 0.0f64;
    if r == 1 {
        for c in comps {
            for axis in 0..domain.dim() {
                let mut d = vec![0.0; domain.len()];
                for &k in &region {
                    d[k] = masked_derivative(c, domain, k, axis);
                }
                dsup = dsup.max(max_abs_on(&d, &region));
                top.push(d);
            }
        }
    }
    let mut semi = 0.0f64;
    let mut pairs = 0;
    for t in &top {
        let (s, p) = holder_seminorm_with_budget(t, domain, alpha, &region, DEFAULT_PAIR_BUDGET)?;
        semi = semi.max(s);
        pairs = p;
    }
    Ok(HolderEstimate {
        order_r: r,
        exponent_alpha: alpha,
        value: sup + dsup + semi,
        pair_budget: pairs,
    })
}
