//! Matrix-free symmetric solvers on rectangular node lattices.

use crate::error::{Error, Result};

/// Relative residual target of every lattice solve.
pub const REL_TOL: f64 = 1e-10;

/// Sparse symmetric operator `(A x)_i = diag_i x_i − Σ_j x_j` over the
/// adjacency lists `nbrs` (a graph Laplacian with optional Dirichlet rows).
pub struct LatticeOperator {
    pub start: Vec<usize>,
    pub nbrs: Vec<usize>,
    pub diag: Vec<f64>,
}

impl LatticeOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.len() {
            let mut s = self.diag[i] * x[i];
            for &j in &self.nbrs[self.start[i]..self.start[i + 1]] {
                s -= x[j];
            }
            y[i] = s;
        }
    }
}

/// Unknown numbering for a boolean selection of lattice sites.
pub struct Numbering {
    pub site_of: Vec<usize>,
    pub unknown_of: Vec<usize>,
}

pub const NONE: usize = usize::MAX;

impl Numbering {
    pub fn new(selected: &[bool]) -> Self {
        let mut unknown_of = vec![NONE; selected.len()];
        let mut site_of = Vec::new();
        for (s, &on) in selected.iter().enumerate() {
            if on {
                unknown_of[s] = site_of.len();
                site_of.push(s);
            }
        }
        Self { site_of, unknown_of }
    }
}

/// Axis neighbours of lattice site `s` in an `nx × ny` lattice, in the order
/// +x, −x, +y, −y.
#[inline]
pub fn lattice_neighbors(nx: usize, ny: usize, s: usize) -> [Option<usize>; 4] {
    let (i, j) = (s % nx, s / nx);
    [
        (i + 1 < nx).then(|| s + 1),
        (i > 0).then(|| s - 1),
        (j + 1 < ny).then(|| s + nx),
        (j > 0).then(|| s - nx),
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Jacobi-preconditioned conjugate gradients for `A x = b`. With `singular`
/// set, `A` is a Neumann Laplacian: `b` and every search direction are kept in
/// the zero-sum subspace. Returns (x, iterations, final relative residual).
pub fn conjugate_gradient(
    op: &LatticeOperator,
    b: &[f64],
    singular: bool,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = op.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    if singular {
        remove_mean(&mut r);
    }
    let bnorm = dot(&r, &r).sqrt();
    if n == 0 || bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let max_iter = 50 * n;
    let inv: Vec<f64> = op.diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    if singular {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if it % 64 == 0 {
            history.push(rel);
        }
        if rel <= REL_TOL {
            if singular {
                remove_mean(&mut x);
            }
            return Ok((x, it, rel));
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        if singular {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let last = dot(&r, &r).sqrt() / bnorm;
    history.push(last);
    Err(Error::SolverStall {
        iterations: max_iter,
        last,
        history,
    })
}

/// Neumann Laplacian over the selected sites: neighbours outside the
/// selection contribute zero flux.
pub fn neumann_operator(nx: usize, ny: usize, num: &Numbering) -> LatticeOperator {
    let mut start = vec![0];
    let mut nbrs = Vec::new();
    let mut diag = Vec::with_capacity(num.site_of.len());
    for &s in &num.site_of {
        let mut d = 0.0;
        for q in lattice_neighbors(nx, ny, s).into_iter().flatten() {
            let u = num.unknown_of[q];
            if u != NONE {
                nbrs.push(u);
                d += 1.0;
            }
        }
        diag.push(d);
        start.push(nbrs.len());
    }
    LatticeOperator { start, nbrs, diag }
}

/// Discrete harmonic extension: sites in `unknown` solve the 5-point Laplace
/// equation with Dirichlet data from neighbouring `known` sites; neighbours in
/// neither set are treated as zero-flux. `values` holds the data on input and
/// the extension on output. Returns the iteration count.
pub fn harmonic_extension(
    nx: usize,
    ny: usize,
    known: &[bool],
    unknown: &[bool],
    values: &mut [f64],
) -> Result<usize> {
    let num = Numbering::new(unknown);
    let mut start = vec![0];
    let mut nbrs = Vec::new();
    let mut diag = Vec::with_capacity(num.site_of.len());
    let mut b = Vec::with_capacity(num.site_of.len());
    for &s in &num.site_of {
        let mut d = 0.0;
        let mut rhs = 0.0;
        for q in lattice_neighbors(nx, ny, s).into_iter().flatten() {
            let u = num.unknown_of[q];
            if u != NONE {
                nbrs.push(u);
                d += 1.0;
            } else if known[q] {
                rhs += values[q];
                d += 1.0;
            }
        }
        diag.push(d);
        b.push(rhs);
        start.push(nbrs.len());
    }
    let op = LatticeOperator { start, nbrs, diag };
    let (x, iters, _) = conjugate_gradient(&op, &b, false)?;
    for (u, &s) in num.site_of.iter().enumerate() {
        values[s] = x[u];
    }
    Ok(iters)
}

/// Line integration over a breadth-first spanning tree of `set`, visiting
/// neighbours in the order +x, −x, +y, −y. `increment(from, to)` returns the
/// integral along the lattice edge. Returns (values, reached flags,
/// max mismatch over non-tree edges).
pub fn tree_integrate(
    nx: usize,
    ny: usize,
    set: &[bool],
    start: usize,
    increment: impl Fn(usize, usize) -> f64,
) -> (Vec<f64>, Vec<bool>, f64) {
    let mut values = vec![0.0; set.len()];
    let mut reached = vec![false; set.len()];
    let mut queue = std::collections::VecDeque::new();
    reached[start] = true;
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        for q in lattice_neighbors(nx, ny, s).into_iter().flatten() {
            if set[q] && !reached[q] {
                reached[q] = true;
                values[q] = values[s] + increment(s, q);
                queue.push_back(q);
            }
        }
    }
    let mut mismatch = 0.0f64;
    for s in 0..set.len() {
        if !reached[s] {
            continue;
        }
        // each undirected edge once: +x and +y
        for q in [
            (s % nx + 1 < nx).then(|| s + 1),
            (s / nx + 1 < ny).then(|| s + nx),
        ]
        .into_iter()
        .flatten()
        {
            if reached[q] {
                mismatch = mismatch.max((values[q] - values[s] - increment(s, q)).abs());
            }
        }
    }
    (values, reached, mismatch)
}
