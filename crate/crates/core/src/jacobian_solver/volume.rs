use super::{renormalize_mass, solve_general, GeneralSolution, SupportedConfig};
use crate::error::{Error, Result};
use crate::field_core::{integrate, ScalarField};
use crate::flow_transport::{compose, interp, invert, GridMap, Interp};
use crate::tolerances;

#[derive(Clone, Debug)]
pub struct VolumeCorrection {
    /// `Ψ = φ ∘ ψ`.
    pub map: GridMap,
    /// The inner solve for `f = det ∇ψ⁻¹`.
    pub inner: GeneralSolution,
    /// The density actually solved for (after mass renormalization).
    pub density: ScalarField,
    /// `max |det ∇Ψ − 1|` over in-mask nodes.
    pub det_defect_inf: f64,
    /// Largest `|Ψ − ψ|` on the identity region.
    pub deviation_inf: f64,
}

/// Corrects `psi` to a volume-preserving map that agrees with it near the
/// boundary: `Ψ = φ ∘ ψ` with `det ∇φ = det ∇ψ⁻¹`.
pub fn volume_correct(psi: &GridMap, d: f64, cfg: &SupportedConfig) -> Result<VolumeCorrection> {
    let domain = &psi.domain;
    let h = domain.h();
    let det = psi.jacobian_det();
    let tol = tolerances::support(h);
    for k in 0..domain.len() {
        if !domain.mask[k] {
            continue;
        }
        if !(det.values[k] > 0.0) {
            return Err(Error::Precondition(format!("det ∇ψ = {} at node {k}", det.values[k])));
        }
        if domain.sdist[k] > -d && (det.values[k] - 1.0).abs() > tol {
            return Err(Error::Precondition(format!(
                "ψ is not volume preserving within {d} of the boundary (node {k}, det {})",
                det.values[k]
            )));
        }
        let p = psi.node_image(k);
        let s = interp::value(&domain.sdist, &domain.grid, p[0], p[1], Interp::Bilinear);
        if s > h {
            return Err(Error::Precondition(format!("ψ maps node {k} outside the domain")));
        }
    }
    let back = invert(psi)?;
    let f = back.jacobian_det();
    let meas = domain.measure();
    let error = (integrate(&f) - meas).abs();
    if error > tolerances::MASS_REL * meas {
        return Err(Error::InconsistentMap(format!(
            "∫ det ∇ψ⁻¹ differs from meas Ω by {error:e}"
        )));
    }
    let density = renormalize_mass(&f);
    let inner = solve_general(&density, d, cfg)?;
    let map = compose(&inner.map, psi)?;
    let det_new = map.jacobian_det();
    let det_defect_inf = (0..domain.len())
        .filter(|&k| domain.mask[k])
        .map(|k| (det_new.values[k] - 1.0).abs())
        .fold(0.0, f64::max);
    let region = inner.identity_nodes();
    let deviation_inf = (0..domain.len())
        .filter(|&k| region[k])
        .map(|k| {
            let a = map.node_image(k);
            let b = psi.node_image(k);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .fold(0.0, f64::max);
    Ok(VolumeCorrection {
        map,
        inner,
        density,
        det_defect_inf,
        deviation_inf,
    })
}
