//! Solvers for `det ∇φ = f` with `φ = id` wherever the data force it:
//! a closed form in 1D, a fixed-point contraction for `f` near 1, a
//! measure-corrected pipeline for general `f`, a reduction for supports at a
//! given distance from the boundary, and volume correction of a given map.

mod fixedpoint;
mod general;
mod measure;
mod oned;
mod volume;

pub use fixedpoint::{fixedpoint_solve, q_residual, velocity_gradient, FixedPointConfig};
pub use general::{identity_region, solve_general, GeneralSolution, IdentityRegion};
pub use measure::{
    bump_base, measure_correct, solve_supported, solve_supported_detailed, MeasureCorrection,
    SupportedConfig, SupportedSolution,
};
pub use oned::solve_1d;
pub use volume::{volume_correct, VolumeCorrection};

use crate::domain_geom::CollarSpec;
use crate::error::{Error, Result};
use crate::field_core::{integrate, Fill, ScalarField};
use crate::flow_transport::{self, GridMap};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oned,
    Moser,
    Fixedpoint,
    Full,
    General,
}

/// Residuals of a solve. Only the seven public measurements serialize.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    /// `max |det ∇φ − f|` over in-mask nodes.
    pub det_residual_inf: f64,
    /// Largest displacement on the identity region (band or `V_d`).
    pub support_violation_inf: f64,
    /// `|∫f − meas Ω|`.
    pub mass_error: f64,
    pub iterations: usize,
    pub collar_thickness: f64,
    /// `‖φ − id‖_{C^{1,1/2}} / ‖f − 1‖_{C^{0,1/2}}`, 0 when `f ≡ 1`.
    pub norm_ratio: f64,
    #[serde(skip)]
    pub warnings: Vec<String>,
    /// Successive C¹ differences of fixed-point iterates, when applicable.
    #[serde(skip)]
    pub contraction_history: Vec<f64>,
}

impl SolveReport {
    /// Measures `phi` against `f` with `identity` as the region where
    /// `phi` must be the identity.
    pub fn assess(
        method: Method,
        phi: &GridMap,
        f: &ScalarField,
        identity: &[bool],
        collar_thickness: f64,
    ) -> Result<Self> {
        let meas = f.domain.measure();
        Ok(Self {
            method,
            det_residual_inf: flow_transport::det_residual(phi, f),
            support_violation_inf: phi.max_displacement_on(identity),
            mass_error: (integrate(f) - meas).abs(),
            iterations: 0,
            collar_thickness,
            norm_ratio: flow_transport::norm_ratio(phi, f)?,
            warnings: Vec::new(),
            contraction_history: Vec::new(),
        })
    }

    /// True when every residual is finite and nonnegative.
    pub fn is_finite(&self) -> bool {
        [
            self.det_residual_inf,
            self.support_violation_inf,
            self.mass_error,
            self.collar_thickness,
            self.norm_ratio,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Which solver [`solve`] runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    /// Closed form in 1D; otherwise the fixed point, falling back to the
    /// full pipeline when the smallness gate or the contraction fails.
    #[default]
    Auto,
    Moser,
    Fixedpoint,
    Full,
}

/// Solves `det ∇φ = f` with `φ = id` on the collar band.
pub fn solve(
    f: &ScalarField,
    collar: &CollarSpec,
    choice: MethodChoice,
    cfg: &SupportedConfig,
) -> Result<(GridMap, SolveReport)> {
    match choice {
        MethodChoice::Moser => flow_transport::moser_solve(f, collar, &cfg.flow),
        MethodChoice::Fixedpoint => fixedpoint_solve(f, collar, &cfg.fixed_point),
        MethodChoice::Full => solve_supported(f, collar, cfg),
        MethodChoice::Auto => {
            if f.domain.dim() == 1 {
                flow_transport::check_density(f, collar)?;
                let phi = solve_1d(f)?;
                let mut report =
                    SolveReport::assess(Method::Oned, &phi, f, &collar.band, collar.thickness)?;
                report.iterations = 1;
                return Ok((phi, report));
            }
            match fixedpoint_solve(f, collar, &cfg.fixed_point) {
                Err(Error::GateFailure { .. }) | Err(Error::ContractionFailure { .. }) => {
                    solve_supported(f, collar, cfg)
                }
                other => other,
            }
        }
    }
}

/// Moves the mass defect of a density onto the nodes where it differs from
/// 1, proportionally to `|f − 1|`, so that `∫f = meas Ω` up to rounding.
/// Nodes where `f = 1` (in particular a collar band) are left untouched.
pub(crate) fn renormalize_mass(f: &ScalarField) -> ScalarField {
    let d = &f.domain;
    let defect = integrate(f) - d.measure();
    let total: f64 = (0..d.len())
        .filter(|&k| d.mask[k])
        .map(|k| d.weight(k) * (f.values[k] - 1.0).abs())
        .sum();
    if total == 0.0 || defect == 0.0 {
        return f.clone();
    }
    let values = (0..d.len())
        .map(|k| {
            let v = f.values[k];
            if d.mask[k] {
                v - defect * (v - 1.0).abs() / total
            } else {
                v
            }
        })
        .collect();
    ScalarField {
        domain: d.clone(),
        values,
        fill: Fill::One,
    }
}
