use super::{solve_supported, Method, SolveReport, SupportedConfig};
use crate::domain_geom::{collar, exhaust, inradius, CollarSpec, Domain};
use crate::error::{Error, Result};
use crate::field_core::{integrate, VectorField};
use crate::field_core::ScalarField;
use crate::flow_transport::{check_density, GridMap};
use crate::tolerances;
use std::sync::Arc;

/// Where a support-controlled solve at distance `d` is the identity: the
/// collar band of the subdomain plus everything outside the subdomain.
#[derive(Clone, Debug)]
pub struct IdentityRegion {
    /// `{sdist < −d/2}`.
    pub subdomain: Arc<Domain>,
    /// Collar of the subdomain with thickness `d/8`.
    pub collar: CollarSpec,
    /// Node set `V_d` (in-mask nodes of the full domain).
    pub nodes: Vec<bool>,
}

/// The identity region for distance `d`; a function of the domain and `d`
/// only.
pub fn identity_region(domain: &Arc<Domain>, d: f64) -> Result<IdentityRegion> {
    let subdomain = exhaust(domain, d)?;
    let collar = collar(&subdomain, d / 8.0)?;
    let nodes = (0..domain.len())
        .map(|k| domain.mask[k] && (collar.band[k] || !subdomain.mask[k]))
        .collect();
    Ok(IdentityRegion {
        subdomain,
        collar,
        nodes,
    })
}

#[derive(Clone, Debug)]
pub struct GeneralSolution {
    pub map: GridMap,
    pub report: SolveReport,
    /// `None` when `f ≡ 1` and `d` equals the inradius.
    pub region: Option<IdentityRegion>,
}

impl GeneralSolution {
    /// `V_d` as a node mask; every in-mask node when no region was built.
    pub fn identity_nodes(&self) -> Vec<bool> {
        match &self.region {
            Some(r) => r.nodes.clone(),
            None => self.map.domain.mask.clone(),
        }
    }
}

/// Solves `det ∇φ = f` when `supp(f − 1)` lies at distance at least `d`
/// from the boundary: the problem is solved on `{sdist < −d/2}` with a
/// collar and mollifier radius of `d/8`, and extended by the identity.
pub fn solve_general(f: &ScalarField, d: f64, cfg: &SupportedConfig) -> Result<GeneralSolution> {
    let domain = &f.domain;
    let r = inradius(domain);
    if !(d > 0.0 && d <= r) {
        return Err(Error::Precondition(format!("d = {d} outside (0, inradius = {r}]")));
    }
    if let Some(k) = (0..domain.len()).find(|&k| domain.mask[k] && !(f.values[k] > 0.0)) {
        return Err(Error::Positivity(format!("f = {} at node {k}", f.values[k])));
    }
    let meas = domain.measure();
    let mass_error = (integrate(f) - meas).abs();
    let tol = tolerances::MASS_REL * meas;
    if mass_error > tol {
        return Err(Error::MassCondition {
            error: mass_error,
            tol,
        });
    }
    let offending: Vec<usize> = (0..domain.len())
        .filter(|&k| domain.mask[k] && (f.values[k] - 1.0).abs() > tolerances::BAND_ONE)
        .filter(|&k| domain.sdist[k] > -d)
        .collect();
    if !offending.is_empty() {
        return Err(Error::SupportDistance { nodes: offending });
    }
    let trivial = (0..domain.len())
        .all(|k| !domain.mask[k] || (f.values[k] - 1.0).abs() <= tolerances::BAND_ONE);
    let region = match identity_region(domain, d) {
        Ok(region) => Some(region),
        Err(_) if trivial => None,
        Err(e) => return Err(e),
    };
    if trivial {
        let map = GridMap::identity(domain, cfg.flow.interp);
        let identity = match &region {
            Some(r) => r.nodes.clone(),
            None => domain.mask.clone(),
        };
        let thickness = region.as_ref().map_or(0.0, |r| r.collar.thickness);
        let mut report = SolveReport::assess(Method::General, &map, f, &identity, thickness)?;
        report.mass_error = mass_error;
        return Ok(GeneralSolution {
            map,
            report,
            region,
        });
    }
    let region = region.expect("built above");
    let sub = &region.subdomain;
    let f_sub = f.on_domain(sub)?;
    let sub_meas = sub.measure();
    let sub_error = (integrate(&f_sub) - sub_meas).abs();
    if sub_error > tolerances::MASS_REL * sub_meas {
        return Err(Error::MassCondition {
            error: sub_error,
            tol: tolerances::MASS_REL * sub_meas,
        });
    }
    check_density(&f_sub, &region.collar).map_err(|e| e.at("subdomain"))?;
    let mut sub_cfg = cfg.clone();
    sub_cfg.mollify_radius = d / 8.0;
    let (phi_sub, sub_report) = solve_supported(&f_sub, &region.collar, &sub_cfg)?;
    let displacement = VectorField::from_comps(domain, phi_sub.displacement.comps.clone())?;
    let map = GridMap::from_displacement(displacement, phi_sub.interp);
    let mut report = SolveReport::assess(
        Method::General,
        &map,
        f,
        &region.nodes,
        region.collar.thickness,
    )?;
    report.mass_error = mass_error;
    report.iterations = sub_report.iterations;
    report.contraction_history = sub_report.contraction_history;
    report.warnings = sub_report.warnings;
    Ok(GeneralSolution {
        map,
        report,
        region: Some(region),
    })
}
