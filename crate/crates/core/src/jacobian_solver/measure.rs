use super::{fixedpoint_solve, renormalize_mass, FixedPointConfig, Method, SolveReport};
use crate::domain_geom::CollarSpec;
use crate::error::{Error, Result};
use crate::field_core::{integrate, mollify, Fill, ScalarField};
use crate::flow_transport::{
    check_density, compose, interp, invert, moser_solve, FlowConfig, GridMap,
};
use crate::tolerances;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// A density whose excess has been mollified away, up to a bump factor that
/// restores the total mass.
#[derive(Clone, Debug)]
pub struct MeasureCorrection {
    /// `f` mollified.
    pub mollified: ScalarField,
    /// `η·φ_bump`, zero on the band.
    pub bump: ScalarField,
    /// Root of `m(t) = meas Ω` from the linear formula.
    pub t_hat: f64,
    /// The same root by bisection.
    pub t_bisection: f64,
    /// `(1 + t̂ H) f / f̃`.
    pub corrected: ScalarField,
    /// `|∫ corrected − meas Ω|`.
    pub mass_error: f64,
    /// `(m(−1), m(1))`.
    pub bracket: (f64, f64),
}

/// Plateau function of the distance to the boundary: 0 on the band
/// (`−sdist ≤ ε`), a squared-cosine ramp up to `−sdist = 2ε`, then 1.
pub fn bump_base(collar: &CollarSpec) -> ScalarField {
    let d = &collar.domain;
    let eps = collar.epsilon;
    let values = (0..d.len())
        .map(|k| {
            if !d.mask[k] || collar.band[k] {
                return 0.0;
            }
            let s = -d.sdist[k];
            if s <= eps {
                0.0
            } else if s >= 2.0 * eps {
                1.0
            } else {
                (FRAC_PI_2 * (s - eps) / eps).sin().powi(2)
            }
        })
        .collect();
    ScalarField {
        domain: d.clone(),
        values,
        fill: Fill::Zero,
    }
}

/// Mollifies `f` and rescales it by `1 + t̂ H` so the mass is exact.
pub fn measure_correct(
    f: &ScalarField,
    collar: &CollarSpec,
    mollify_radius: f64,
    bump_eta: f64,
) -> Result<MeasureCorrection> {
    let d = &collar.domain;
    if !(bump_eta > 0.0 && bump_eta < 1.0) {
        return Err(Error::Precondition(format!("bump_eta = {bump_eta} outside (0, 1)")));
    }
    let reach = collar.epsilon + 3.0 * mollify_radius;
    let worst = (0..d.len())
        .filter(|&k| d.mask[k] && d.sdist[k] > -reach + 1e-12)
        .map(|k| (f.values[k] - 1.0).abs())
        .fold(0.0, f64::max);
    if worst > tolerances::BAND_ONE {
        return Err(Error::Precondition(format!(
            "f − 1 reaches {worst:e} within 3 mollifier radii of the band"
        )));
    }
    let mollified = mollify(f, mollify_radius)?;
    if let Some(k) = (0..d.len()).find(|&k| d.mask[k] && !(mollified.values[k] > 0.0)) {
        return Err(Error::Positivity(format!("mollified f = {} at node {k}", mollified.values[k])));
    }
    let base = bump_base(collar);
    let bump = base.map(Fill::Zero, |v| bump_eta * v);
    let ratio = f.zip_map(&mollified, Fill::One, |a, b| a / b)?;
    let weighted = ratio.zip_map(&bump, Fill::Zero, |a, b| a * b)?;
    let m0 = integrate(&ratio);
    let slope = integrate(&weighted);
    let meas = d.measure();
    let m = |t: f64| m0 + t * slope;
    let bracket = (m(-1.0), m(1.0));
    if !(bracket.0 < meas && meas < bracket.1) {
        return Err(Error::BracketFailure {
            m_minus: bracket.0,
            m_plus: bracket.1,
            target: meas,
        });
    }
    let t_hat = (meas - m0) / slope;
    let t_bisection = bisect(|t| m(t) - meas, 1e-12 * meas);
    let values = (0..d.len())
        .map(|k| {
            if d.mask[k] {
                (1.0 + t_hat * bump.values[k]) * ratio.values[k]
            } else {
                1.0
            }
        })
        .collect();
    let corrected = ScalarField {
        domain: d.clone(),
        values,
        fill: Fill::One,
    };
    if let Some(k) = (0..d.len()).find(|&k| d.mask[k] && !(corrected.values[k] > 0.0)) {
        return Err(Error::Positivity(format!("corrected f = {} at node {k}", corrected.values[k])));
    }
    let mass_error = (integrate(&corrected) - meas).abs();
    Ok(MeasureCorrection {
        mollified,
        bump,
        t_hat,
        t_bisection,
        corrected,
        mass_error,
        bracket,
    })
}

/// Root of an increasing function on `[−1, 1]` with `g(−1) < 0 < g(1)`.
fn bisect(g: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v.abs() <= tol || hi - lo <= f64::EPSILON {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportedConfig {
    pub fixed_point: FixedPointConfig,
    pub flow: FlowConfig,
    pub mollify_radius: f64,
    pub bump_eta: f64,
    /// Halve the mollifier radius (down to two grid cells) while the
    /// corrected density fails the fixed-point smallness gate.
    pub shrink_radius: bool,
}

impl Default for SupportedConfig {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointConfig::default(),
            flow: FlowConfig::default(),
            mollify_radius: 0.05,
            bump_eta: 0.05,
            shrink_radius: true,
        }
    }
}

/// Intermediate results of [`solve_supported_detailed`].
#[derive(Clone, Debug)]
pub struct SupportedSolution {
    pub map: GridMap,
    pub report: SolveReport,
    pub correction: MeasureCorrection,
    /// Fixed-point solution for the corrected density.
    pub first: GridMap,
    /// Moser solution for the transported remainder.
    pub second: GridMap,
    /// Density of the second stage.
    pub remainder: ScalarField,
    /// Mollifier radius actually used.
    pub mollify_radius: f64,
}

/// Measure-corrected pipeline for `f` equal to 1 on a neighbourhood of the
/// band: a fixed-point solve for the corrected density, then a Moser solve
/// for the transported remainder, composed.
pub fn solve_supported(
    f: &ScalarField,
    collar: &CollarSpec,
    cfg: &SupportedConfig,
) -> Result<(GridMap, SolveReport)> {
    let s = solve_supported_detailed(f, collar, cfg)?;
    Ok((s.map, s.report))
}

/// [`solve_supported`] with its intermediate stages.
pub fn solve_supported_detailed(
    f: &ScalarField,
    collar: &CollarSpec,
    cfg: &SupportedConfig,
) -> Result<SupportedSolution> {
    let mass_error = check_density(f, collar)?;
    let d = &collar.domain;
    let min_radius = 2.0 * d.h();
    let mut radius = cfg.mollify_radius;
    let (correction, first, first_report) = loop {
        let correction = measure_correct(f, collar, radius, cfg.bump_eta)
            .map_err(|e| e.at("measure correction"))?;
        match fixedpoint_solve(&correction.corrected, collar, &cfg.fixed_point) {
            Err(Error::GateFailure { .. }) if cfg.shrink_radius && radius > min_radius => {
                radius = (0.5 * radius).max(min_radius);
            }
            Err(e) => return Err(e.at("fixed point")),
            Ok((first, report)) => break (correction, first, report),
        }
    };
    let back = invert(&first).map_err(|e| e.at("inversion"))?;
    let scale = correction
        .mollified
        .zip_map(&correction.bump, Fill::One, |m, b| m / (1.0 + correction.t_hat * b))?;
    let g = &d.grid;
    let values: Vec<f64> = (0..d.len())
        .map(|k| {
            if !d.mask[k] || collar.band[k] {
                return 1.0;
            }
            let p = back.node_image(k);
            interp::value(&scale.values, g, p[0], p[1], back.interp)
        })
        .collect();
    let remainder = ScalarField::from_values(d, values, Fill::One)?;
    let meas = d.measure();
    let drift = (integrate(&remainder) - meas).abs();
    let tol = tolerances::MASS_REL * meas;
    if drift > tol {
        return Err(Error::ChangeOfVariablesDrift { error: drift, tol });
    }
    let remainder = renormalize_mass(&remainder);
    let (second, second_report) =
        moser_solve(&remainder, collar, &cfg.flow).map_err(|e| e.at("moser"))?;
    let map = compose(&second, &first).map_err(|e| e.at("compose"))?;
    let mut report = SolveReport::assess(Method::Full, &map, f, &collar.band, collar.thickness)?;
    report.mass_error = mass_error;
    report.iterations = first_report.iterations;
    report.contraction_history = first_report.contraction_history;
    report.warnings = second_report.warnings;
    if radius != cfg.mollify_radius {
        report
            .warnings
            .push(format!("mollifier radius reduced to {radius} to pass the smallness gate"));
    }
    Ok(SupportedSolution {
        map,
        report,
        correction,
        first,
        second,
        remainder,
        mollify_radius: radius,
    })
}
