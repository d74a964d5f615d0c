//! Bilinear and Catmull-Rom bicubic interpolation of node values.

use crate::domain_geom::Grid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Bilinear,
    #[default]
    Bicubic,
}

/// Stencil start index, weights and derivative weights (per unit index) along
/// one axis.
#[derive(Clone, Copy)]
struct Axis1 {
    start: isize,
    w: [f64; 4],
    dw: [f64; 4],
    len: usize,
}

fn axis_weights(coord: f64, n: usize, interp: Interp) -> Axis1 {
    let max_cell = n.saturating_sub(2) as f64;
    let c = coord.floor().clamp(0.0, max_cell);
    let t = coord - c;
    let i = c as isize;
    match interp {
        Interp::Bilinear => Axis1 {
            start: i,
            w: [1.0 - t, t, 0.0, 0.0],
            dw: [-1.0, 1.0, 0.0, 0.0],
            len: 2,
        },
        Interp::Bicubic => {
            let (t2, t3) = (t * t, t * t * t);
            Axis1 {
                start: i - 1,
                w: [
                    0.5 * (-t3 + 2.0 * t2 - t),
                    0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                    0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                    0.5 * (t3 - t2),
                ],
                dw: [
                    0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
                    0.5 * (9.0 * t2 - 10.0 * t),
                    0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
                    0.5 * (3.0 * t2 - 2.0 * t),
                ],
                len: 4,
            }
        }
    }
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Interpolated value and gradient of `values` at `(x, y)`. Stencil indices
/// are clamped to the grid; `y` is ignored on one-dimensional grids.
pub fn sample(values: &[f64], grid: &Grid, x: f64, y: f64, interp: Interp) -> (f64, [f64; 2]) {
    let ax = axis_weights((x - grid.x0) / grid.h, grid.nx, interp);
    if grid.dim == 1 {
        let mut v = 0.0;
        let mut dv = 0.0;
        for a in 0..ax.len {
            let q = values[clamp_index(ax.start + a as isize, grid.nx)];
            v += ax.w[a] * q;
            dv += ax.dw[a] * q;
        }
        return (v, [dv / grid.h, 0.0]);
    }
    let ay = axis_weights((y - grid.y0) / grid.h, grid.ny, interp);
    let mut v = 0.0;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for b in 0..ay.len {
        let j = clamp_index(ay.start + b as isize, grid.ny);
        let mut row = 0.0;
        let mut drow = 0.0;
        for a in 0..ax.len {
            let q = values[j * grid.nx + clamp_index(ax.start + a as isize, grid.nx)];
            row += ax.w[a] * q;
            drow += ax.dw[a] * q;
        }
        v += ay.w[b] * row;
        gx += ay.w[b] * drow;
        gy += ay.dw[b] * row;
    }
    (v, [gx / grid.h, gy / grid.h])
}

/// Interpolated value only.
#[inline]
pub fn value(values: &[f64], grid: &Grid, x: f64, y: f64, interp: Interp) -> f64 {
    sample(values, grid, x, y, interp).0
}
