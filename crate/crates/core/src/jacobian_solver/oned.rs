use crate::div_solver::cumulative_1d;
use crate::error::{Error, Result};
use crate::field_core::{integrate, ScalarField, VectorField};
use crate::flow_transport::{GridMap, Interp};
use crate::tolerances;

/// `φ(x) = a + ∫_a^x f` on an interval, by a cumulative fourth-order rule.
///
/// The displacement is the cumulative integral of `f − 1`; its small total
/// is removed by subtracting the same fraction of it over the nodes where
/// `f ≠ 1`, so `φ(b) = b` and `φ = id` node-wise wherever `f = 1` on a
/// stretch reaching an endpoint.
pub fn solve_1d(f: &ScalarField) -> Result<GridMap> {
    let d = &f.domain;
    if d.dim() != 1 {
        return Err(Error::Shape("solve_1d needs an interval domain".into()));
    }
    if let Some(k) = (0..d.len()).find(|&k| d.mask[k] && !(f.values[k] > 0.0)) {
        return Err(Error::Positivity(format!("f = {} at node {k}", f.values[k])));
    }
    let meas = d.measure();
    let error = (integrate(f) - meas).abs();
    let tol = tolerances::MASS_REL * meas;
    if error > tol {
        return Err(Error::MassCondition { error, tol });
    }
    let excess: Vec<f64> = (0..d.len())
        .map(|k| if d.mask[k] { f.values[k] - 1.0 } else { 0.0 })
        .collect();
    let active: Vec<f64> = excess.iter().map(|&v| if v != 0.0 { 1.0 } else { 0.0 }).collect();
    let cum = cumulative_1d(d, &excess).comps.remove(0);
    let share = cumulative_1d(d, &active).comps.remove(0);
    let weight = cum_last(&share, d);
    let total = cum_last(&cum, d);
    let disp: Vec<f64> = (0..d.len())
        .map(|k| {
            if !d.mask[k] {
                0.0
            } else if weight > 0.0 {
                cum[k] - total * (share[k] / weight)
            } else {
                cum[k]
            }
        })
        .collect();
    // strictly increasing images
    let g = &d.grid;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..d.len() {
        let x = g.point(k)[0] + disp[k];
        if x <= prev {
            return Err(Error::OrientationLoss {
                count: 1,
                min_det: 0.0,
            });
        }
        prev = x;
    }
    Ok(GridMap::from_displacement(
        VectorField::from_comps(d, vec![disp])?,
        Interp::Bicubic,
    ))
}

/// Cumulative value at the last in-mask node.
fn cum_last(cum: &[f64], d: &crate::domain_geom::Domain) -> f64 {
    (0..d.len()).rev().find(|&k| d.mask[k]).map_or(0.0, |k| cum[k])
}
