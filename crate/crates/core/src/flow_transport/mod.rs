//! Grid maps (interpolation, composition, inversion) and Moser's flow method.

pub mod interp;

pub use interp::Interp;

use crate::div_solver::solve_div_collar;
use crate::domain_geom::{CollarSpec, Domain};
use crate::error::{Error, Result};
use crate::field_core::io::RawField;
use crate::field_core::{
    holder_norm, holder_norm_vector, integrate, jacobian_det, same_grid, Fill, ScalarField,
    VectorField,
};
use crate::jacobian_solver::{Method, SolveReport};
use crate::tolerances;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A map `x ↦ x + displacement(x)` sampled at the grid nodes. Computed maps
/// carry zero displacement outside the mask; maps sampled from a formula keep
/// its values there, so interpolation near the boundary sees the true map.
#[derive(Clone, Debug)]
pub struct GridMap {
    pub domain: Arc<Domain>,
    pub displacement: VectorField,
    pub interp: Interp,
}

impl GridMap {
    pub fn identity(domain: &Arc<Domain>, interp: Interp) -> Self {
        Self {
            domain: domain.clone(),
            displacement: VectorField::zeros(domain),
            interp,
        }
    }

    /// Samples an explicit map at every grid node.
    pub fn from_fn(domain: &Arc<Domain>, interp: Interp, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut displacement = VectorField::zeros(domain);
        for k in 0..domain.len() {
            let x = domain.grid.point(k);
            let p = f(x[0], x[1]);
            for (c, comp) in displacement.comps.iter_mut().enumerate() {
                comp[k] = p[c] - x[c];
            }
        }
        Self {
            domain: domain.clone(),
            displacement,
            interp,
        }
    }

    pub fn from_displacement(displacement: VectorField, interp: Interp) -> Self {
        Self {
            domain: displacement.domain.clone(),
            displacement,
            interp,
        }
    }

    fn check_point(&self, p: [f64; 2]) -> Result<()> {
        let (lo, hi) = self.domain.grid.bbox();
        let slack = 1e-9 * self.domain.h();
        let dims = self.domain.dim();
        for a in 0..dims {
            if !(p[a] >= lo[a] - slack && p[a] <= hi[a] + slack) {
                return Err(Error::OutOfRange { x: p[0], y: p[1] });
            }
        }
        Ok(())
    }

    /// Interpolated displacement and its 2×2 gradient at `p`.
    fn displacement_at(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let g = &self.domain.grid;
        let mut d = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for (c, comp) in self.displacement.comps.iter().enumerate() {
            let (v, grad) = interp::sample(comp, g, p[0], p[1], self.interp);
            d[c] = v;
            jac[c] = grad;
        }
        (d, jac)
    }

    /// Image of a point.
    pub fn eval(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        self.check_point(p)?;
        let (d, _) = self.displacement_at(p);
        Ok([p[0] + d[0], p[1] + d[1]])
    }

    /// Image of node `k` (exact node value, no interpolation).
    pub fn node_image(&self, k: usize) -> [f64; 2] {
        let p = self.domain.grid.point(k);
        let mut out = p;
        for (c, comp) in self.displacement.comps.iter().enumerate() {
            out[c] += comp[k];
        }
        out
    }

    /// Jacobian determinant at every node (see [`jacobian_det`]).
    pub fn jacobian_det(&self) -> ScalarField {
        jacobian_det(&self.displacement)
    }

    /// Lossless JSON: the displacement as a binary field plus an `interp` tag.
    pub fn to_json(&self) -> String {
        let raw = RawField::from_vector(&self.displacement).to_json_binary();
        let mut doc: serde_json::Value = serde_json::from_str(&raw).expect("valid JSON");
        doc["interp"] = serde_json::to_value(self.interp).expect("serializable");
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    /// Reads a map written by [`GridMap::to_json`] or a displacement field in
    /// CSV (bicubic interpolation).
    pub fn from_text(text: &str, domain: &Arc<Domain>) -> Result<Self> {
        let mut interp = Interp::Bicubic;
        if text.trim_start().starts_with('{') {
            let doc: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
            if let Some(tag) = doc.get("interp") {
                interp = serde_json::from_value(tag.clone())
                    .map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        let displacement = RawField::parse_any(text)?.into_vector_unmasked(domain)?;
        Ok(Self {
            domain: domain.clone(),
            displacement,
            interp,
        })
    }

    /// Largest displacement length over the nodes in `set`.
    pub fn max_displacement_on(&self, set: &[bool]) -> f64 {
        self.displacement.max_norm_on(set)
    }
}

/// Images of a list of points.
pub fn eval_map(phi: &GridMap, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    points.iter().map(|&p| phi.eval(p)).collect()
}

fn check_orientation(phi: &GridMap) -> Result<()> {
    let det = phi.jacobian_det();
    let d = &phi.domain;
    let mut count = 0;
    let mut min_det = f64::INFINITY;
    for k in 0..d.len() {
        if d.mask[k] {
            min_det = min_det.min(det.values[k]);
            if det.values[k] <= 0.0 {
                count += 1;
            }
        }
    }
    if count > 0 {
        return Err(Error::OrientationLoss { count, min_det });
    }
    Ok(())
}

/// `φ₂ ∘ φ₁`, sampled at the nodes. Where `φ₁` fixes a node exactly, the
/// node value of `φ₂` is used without interpolation.
pub fn compose(phi2: &GridMap, phi1: &GridMap) -> Result<GridMap> {
    same_grid(&phi2.domain, &phi1.domain)?;
    let d = &phi1.domain;
    let dim = d.dim();
    let mut out = VectorField::zeros(d);
    for k in 0..d.len() {
        if !d.mask[k] {
            continue;
        }
        let d1: Vec<f64> = phi1.displacement.comps.iter().map(|c| c[k]).collect();
        if d1.iter().all(|&v| v == 0.0) {
            for c in 0..dim {
                out.comps[c][k] = phi2.displacement.comps[c][k];
            }
            continue;
        }
        let p = phi1.node_image(k);
        phi2.check_point(p)?;
        let (d2, _) = phi2.displacement_at(p);
        for c in 0..dim {
            out.comps[c][k] = d1[c] + d2[c];
        }
    }
    let map = GridMap {
        domain: d.clone(),
        displacement: out,
        interp: phi1.interp,
    };
    check_orientation(&map)?;
    Ok(map)
}

fn clamp_to_box(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])]
}

/// Damped Newton solve of `φ(x) = y` from `seed`.
fn newton_preimage(phi: &GridMap, y: [f64; 2], seed: [f64; 2], tol: f64) -> Option<[f64; 2]> {
    let (lo, hi) = phi.domain.grid.bbox();
    let dim = phi.domain.dim();
    let residual = |x: [f64; 2]| {
        let (d, jac) = phi.displacement_at(x);
        let r = [x[0] + d[0] - y[0], x[1] + d[1] - y[1]];
        (r, jac)
    };
    let norm = |r: [f64; 2]| if dim == 1 { r[0].abs() } else { r[0].hypot(r[1]) };
    let mut x = clamp_to_box(seed, lo, hi);
    let (mut r, mut jac) = residual(x);
    let mut rn = norm(r);
    for _ in 0..tolerances::INVERSION_MAX_ITER {
        if rn <= tol {
            return Some(x);
        }
        let step = if dim == 1 {
            let a = 1.0 + jac[0][0];
            if a == 0.0 {
                return None;
            }
            [-r[0] / a, 0.0]
        } else {
            let (a, b) = (1.0 + jac[0][0], jac[0][1]);
            let (c, e) = (jac[1][0], 1.0 + jac[1][1]);
            let det = a * e - b * c;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            [-(e * r[0] - b * r[1]) / det, -(-c * r[0] + a * r[1]) / det]
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..tolerances::INVERSION_HALVINGS {
            let trial = clamp_to_box([x[0] + lambda * step[0], x[1] + lambda * step[1]], lo, hi);
            let (rt, jt) = residual(trial);
            let nt = norm(rt);
            if nt < rn {
                x = trial;
                r = rt;
                jac = jt;
                rn = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (rn <= tol).then_some(x)
}

/// Node-wise inverse by Newton iteration on the interpolated map, seeded by
/// the node itself and then by already inverted neighbours.
pub fn invert(phi: &GridMap) -> Result<GridMap> {
    let d = &phi.domain;
    let g = &d.grid;
    let dim = d.dim();
    let tol = tolerances::INVERSION_REL * d.diameter();
    let mut solved: Vec<Option<[f64; 2]>> = vec![None; d.len()];
    let mut failed = Vec::new();
    for k in 0..d.len() {
        if !d.mask[k] {
            continue;
        }
        let y = g.point(k);
        let mut x = newton_preimage(phi, y, y, tol);
        if x.is_none() {
            for q in g.neighbors(k) {
                if let Some(xq) = solved[q] {
                    let yq = g.point(q);
                    let seed = [xq[0] + y[0] - yq[0], xq[1] + y[1] - yq[1]];
                    x = newton_preimage(phi, y, seed, tol);
                    if x.is_some() {
                        break;
                    }
                }
            }
        }
        match x {
            Some(x) => solved[k] = Some(x),
            None => failed.push(k),
        }
    }
    // second sweep: failed nodes may now have solved neighbours on all sides
    let mut still = Vec::new();
    for &k in &failed {
        let y = g.point(k);
        let mut x = None;
        for q in g.neighbors(k) {
            if let Some(xq) = solved[q] {
                let yq = g.point(q);
                x = newton_preimage(phi, y, [xq[0] + y[0] - yq[0], xq[1] + y[1] - yq[1]], tol);
                if x.is_some() {
                    break;
                }
            }
        }
        match x {
            Some(x) => solved[k] = Some(x),
            None => still.push(k),
        }
    }
    if !still.is_empty() {
        return Err(Error::InversionFailure { nodes: still });
    }
    let mut disp = VectorField::zeros(d);
    for k in 0..d.len() {
        if let Some(x) = solved[k] {
            let y = g.point(k);
            for c in 0..dim {
                disp.comps[c][k] = x[c] - y[c];
            }
        }
    }
    Ok(GridMap {
        domain: d.clone(),
        displacement: disp,
        interp: phi.interp,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub time_steps: usize,
    pub integrator: Integrator,
    pub interp: Interp,
    pub clamp_to_domain: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            time_steps: 32,
            integrator: Integrator::Rk4,
            interp: Interp::Bicubic,
            clamp_to_domain: true,
        }
    }
}

/// `w_t = −v / (t f + 1 − t)` node-wise.
pub fn moser_velocity(f: &ScalarField, v: &VectorField, t: f64) -> Result<VectorField> {
    same_grid(&f.domain, &v.domain)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition(format!("t = {t} outside [0, 1]")));
    }
    let d = &f.domain;
    let mut out = VectorField::zeros(d);
    for k in 0..d.len() {
        if !d.mask[k] {
            continue;
        }
        let denom = t * f.values[k] + 1.0 - t;
        if denom <= 0.0 {
            return Err(Error::Positivity(format!("t f + 1 − t = {denom} at node {k}")));
        }
        for c in 0..v.dim() {
            out.comps[c][k] = -v.comps[c][k] / denom;
        }
    }
    Ok(out)
}

/// Checks positivity, the mass condition and `f = 1` on the band.
pub(crate) fn check_density(f: &ScalarField, collar: &CollarSpec) -> Result<f64> {
    let d = &collar.domain;
    same_grid(d, &f.domain)?;
    if let Some(k) = (0..d.len()).find(|&k| d.mask[k] && !(f.values[k] > 0.0)) {
        return Err(Error::Positivity(format!("f = {} at node {k}", f.values[k])));
    }
    let meas = d.measure();
    let mass_error = (integrate(f) - meas).abs();
    let tol = tolerances::MASS_REL * meas;
    if mass_error > tol {
        return Err(Error::MassCondition {
            error: mass_error,
            tol,
        });
    }
    let worst = (0..d.len())
        .filter(|&k| collar.band[k])
        .map(|k| (f.values[k] - 1.0).abs())
        .fold(0.0, f64::max);
    if worst > tolerances::BAND_ONE {
        return Err(Error::Precondition(format!("f − 1 reaches {worst:e} on the band")));
    }
    Ok(mass_error)
}

/// `‖φ − id‖_{C^{1,γ}} / ‖f − 1‖_{C^{0,γ}}` with discrete Hölder norms.
pub(crate) fn norm_ratio(phi: &GridMap, f: &ScalarField) -> Result<f64> {
    let excess = f.map(Fill::Zero, |v| v - 1.0);
    let den = holder_norm(&excess, 0, tolerances::GATE_ALPHA)?.value;
    if den == 0.0 {
        return Ok(0.0);
    }
    let num = holder_norm_vector(&phi.displacement, 1, tolerances::GATE_ALPHA)?.value;
    Ok(num / den)
}

/// Largest axis second difference of `f` over in-mask nodes whose two axis
/// neighbours are in the mask.
fn max_second_difference(f: &ScalarField) -> f64 {
    let d = &f.domain;
    let g = &d.grid;
    let mut best = 0.0f64;
    for k in 0..d.len() {
        if !d.mask[k] {
            continue;
        }
        for axis in 0..d.dim() {
            if let (Some(p), Some(m)) = (g.neighbor(k, axis, 1), g.neighbor(k, axis, -1)) {
                if d.mask[p] && d.mask[m] {
                    let v = (f.values[p] - 2.0 * f.values[k] + f.values[m]) / (g.h * g.h);
                    best = best.max(v.abs());
                }
            }
        }
    }
    best
}

/// Largest |det ∇φ − f| over in-mask nodes.
pub fn det_residual(phi: &GridMap, f: &ScalarField) -> f64 {
    let det = phi.jacobian_det();
    let d = &phi.domain;
    (0..d.len())
        .filter(|&k| d.mask[k])
        .map(|k| (det.values[k] - f.values[k]).abs())
        .fold(0.0, f64::max)
}

/// Time-one map of the flow of `w_t = −v/(t f + 1 − t)` with fixed-step RK4.
/// Returns the map and the number of trajectories that left the mask by more
/// than two cells. With `trace`, the displacement after every step (and at
/// `t = 0`) is appended to it.
pub fn flow_map(
    f: &ScalarField,
    v: &VectorField,
    cfg: &FlowConfig,
    mut trace: Option<&mut Vec<VectorField>>,
) -> Result<(GridMap, usize)> {
    if cfg.time_steps < 8 {
        return Err(Error::Precondition(format!(
            "time_steps = {} below 8",
            cfg.time_steps
        )));
    }
    let d = &f.domain;
    let g = &d.grid;
    let dim = d.dim();
    let (lo, hi) = g.bbox();
    let dt = 1.0 / cfg.time_steps as f64;
    let velocity = |t: f64, p: [f64; 2]| -> [f64; 2] {
        let fv = interp::value(&f.values, g, p[0], p[1], cfg.interp);
        let denom = t * fv + 1.0 - t;
        let mut w = [0.0; 2];
        for c in 0..dim {
            w[c] = -interp::value(&v.comps[c], g, p[0], p[1], cfg.interp) / denom;
        }
        w
    };
    let limit = |p: [f64; 2]| if cfg.clamp_to_domain { clamp_to_box(p, lo, hi) } else { p };
    let mut disp = VectorField::zeros(d);
    if let Some(t) = trace.as_deref_mut() {
        t.clear();
        t.resize(cfg.time_steps + 1, VectorField::zeros(d));
    }
    let mut escaped = 0;
    for k in 0..d.len() {
        if !d.mask[k] {
            continue;
        }
        let start = g.point(k);
        let mut p = start;
        for n in 0..cfg.time_steps {
            let t = n as f64 * dt;
            let k1 = velocity(t, p);
            let k2 = velocity(t + 0.5 * dt, limit([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]]));
            let k3 = velocity(t + 0.5 * dt, limit([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]]));
            let k4 = velocity(t + dt, limit([p[0] + dt * k3[0], p[1] + dt * k3[1]]));
            for c in 0..dim {
                p[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            p = limit(p);
            if let Some(t) = trace.as_deref_mut() {
                for c in 0..dim {
                    t[n + 1].comps[c][k] = p[c] - start[c];
                }
            }
        }
        let sd = interp::value(&d.sdist, g, p[0], p[1], Interp::Bilinear);
        if sd > 2.0 * g.h {
            escaped += 1;
        }
        for c in 0..dim {
            disp.comps[c][k] = p[c] - start[c];
        }
    }
    Ok((
        GridMap {
            domain: d.clone(),
            displacement: disp,
            interp: cfg.interp,
        },
        escaped,
    ))
}

/// Moser's flow method: `v` solves `div v = f − 1` with `v = 0` on the band,
/// `η₁` is the time-one flow of `w_t`, and `φ = η₁⁻¹` satisfies
/// `det ∇φ = f` with `φ = id` on the band.
pub fn moser_solve(
    f: &ScalarField,
    collar: &CollarSpec,
    cfg: &FlowConfig,
) -> Result<(GridMap, SolveReport)> {
    moser_solve_traced(f, collar, cfg, None)
}

/// [`moser_solve`], optionally recording the forward flow displacement at
/// every time step.
pub fn moser_solve_traced(
    f: &ScalarField,
    collar: &CollarSpec,
    cfg: &FlowConfig,
    trace: Option<&mut Vec<VectorField>>,
) -> Result<(GridMap, SolveReport)> {
    let mass_error = check_density(f, collar)?;
    let d = &collar.domain;
    let excess = ScalarField::from_values(
        d,
        (0..d.len())
            .map(|k| if collar.band[k] { 0.0 } else { f.values[k] - 1.0 })
            .collect(),
        Fill::Zero,
    )?;
    let v = solve_div_collar(&excess, collar)?;
    let (eta, escaped) = flow_map(f, &v, cfg, trace)?;
    let phi = invert(&eta)?;
    let residual = det_residual(&phi, f);
    let expected =
        tolerances::DET_EXPECT * d.h() * d.h() * (max_second_difference(f) + excess.max_abs());
    if residual > 10.0 * expected {
        return Err(Error::FlowAccuracy {
            residual,
            limit: 10.0 * expected,
        });
    }
    let mut warnings = Vec::new();
    if escaped > 0 {
        warnings.push(format!("{escaped} trajectories left the mask by more than 2 cells"));
    }
    let report = SolveReport {
        method: Method::Moser,
        det_residual_inf: residual,
        support_violation_inf: phi.max_displacement_on(&collar.band),
        mass_error,
        iterations: cfg.time_steps,
        collar_thickness: collar.thickness,
        norm_ratio: norm_ratio(&phi, f)?,
        warnings,
        contraction_history: Vec::new(),
    };
    Ok((phi, report))
}
