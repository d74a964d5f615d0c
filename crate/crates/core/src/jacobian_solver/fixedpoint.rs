use super::{Method, SolveReport};
use crate::div_solver::solve_div_collar;
use crate::domain_geom::CollarSpec;
use crate::error::{Error, Result};
use crate::field_core::{
    displacement_gradient, holder_norm, masked_derivative, Fill, ScalarField, VectorField,
};
use crate::flow_transport::{check_density, GridMap, Interp};
use crate::tolerances;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Hölder exponent of the smallness gate.
    pub gamma: f64,
    /// Gate on `‖f − 1‖_{C^{0,γ}}`.
    pub epsilon_threshold: f64,
    pub max_iter: usize,
    /// Stop once the C¹ difference of successive iterates is below this.
    pub contraction_tol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            gamma: tolerances::GATE_ALPHA,
            epsilon_threshold: tolerances::GATE_EPSILON,
            max_iter: 50,
            contraction_tol: 1e-9,
        }
    }
}

/// Per-node gradient `[component][axis]` of `v` (masked differences).
pub fn velocity_gradient(v: &VectorField) -> Vec<[[f64; 2]; 2]> {
    displacement_gradient(v)
}

/// `Q(ξ) = det(I + ξ) − 1 − tr ξ` node-wise: `det ξ` in 2D, 0 in 1D.
pub fn q_residual(grad_v: &[[[f64; 2]; 2]], dim: usize) -> Vec<f64> {
    grad_v
        .iter()
        .map(|m| {
            if dim == 1 {
                0.0
            } else {
                m[0][0] * m[1][1] - m[0][1] * m[1][0]
            }
        })
        .collect()
}

/// Sup norm plus sup norm of the masked gradient over in-mask nodes.
fn c1_norm(v: &VectorField) -> f64 {
    let d = &v.domain;
    let mut value = 0.0f64;
    let mut slope = 0.0f64;
    for k in 0..d.len() {
        if !d.mask[k] {
            continue;
        }
        value = value.max(v.norm_at(k));
        for comp in &v.comps {
            for axis in 0..d.dim() {
                slope = slope.max(masked_derivative(comp, d, k, axis).abs());
            }
        }
    }
    value + slope
}

/// Fixed-point iteration `v ← L⁻¹(f − 1 − Q(∇v))` from `v = 0`, with `L⁻¹`
/// the collar divergence solver; returns `φ = id + v`.
pub fn fixedpoint_solve(
    f: &ScalarField,
    collar: &CollarSpec,
    cfg: &FixedPointConfig,
) -> Result<(GridMap, SolveReport)> {
    let mass_error = check_density(f, collar)?;
    let d = &collar.domain;
    let excess = f.map(Fill::Zero, |v| v - 1.0);
    let norm = holder_norm(&excess, 0, cfg.gamma)?.value;
    if norm > cfg.epsilon_threshold {
        return Err(Error::GateFailure {
            norm,
            threshold: cfg.epsilon_threshold,
        });
    }
    let mut v = VectorField::zeros(d);
    let mut history = Vec::new();
    let mut first = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let q = q_residual(&velocity_gradient(&v), d.dim());
        let rhs: Vec<f64> = (0..d.len())
            .map(|k| {
                if d.mask[k] && !collar.band[k] {
                    excess.values[k] - q[k]
                } else {
                    0.0
                }
            })
            .collect();
        let rhs = ScalarField::from_values(d, rhs, Fill::Zero)?;
        let next = solve_div_collar(&rhs, collar)?;
        let step = c1_norm(&next.axpy(-1.0, &v)?);
        history.push(step);
        v = next;
        let size = c1_norm(&v);
        if iterations == 1 {
            first = size;
        } else if size >= 10.0 * first && size > 0.0 {
            return Err(Error::ContractionFailure {
                iterations,
                reason: format!("iterate norm {size:e} reached 10x the first ({first:e})"),
            });
        }
        if !step.is_finite() {
            return Err(Error::ContractionFailure {
                iterations,
                reason: "non-finite iterate".into(),
            });
        }
        if step <= cfg.contraction_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ContractionFailure {
            iterations,
            reason: format!(
                "no convergence in {} iterations (last step {:e})",
                cfg.max_iter,
                history.last().copied().unwrap_or(f64::NAN)
            ),
        });
    }
    let phi = GridMap::from_displacement(v, Interp::Bicubic);
    let mut report = SolveReport::assess(Method::Fixedpoint, &phi, f, &collar.band, collar.thickness)?;
    report.mass_error = mass_error;
    report.iterations = iterations;
    report.contraction_history = history;
    Ok((phi, report))
}
