//! Command-line front end for the `jacshape-core` solvers: run
//! configuration, solve and verify commands, volume correction, the 1D
//! oracle comparison and the collar-thickness experiment.
//!
//! Exit codes are listed in [`exit`].

pub mod config;
pub mod exit;
pub mod experiment;
pub mod heatmap;

pub use config::{Args, Command, RunConfig};

use jacshape_core::domain_geom::{collar, Domain};
use jacshape_core::field_core::io::RawField;
use jacshape_core::field_core::VectorField;
use jacshape_core::flow_transport::{det_residual, moser_solve, moser_solve_traced, GridMap};
use jacshape_core::jacobian_solver::{
    fixedpoint_solve, identity_region, solve, solve_1d, solve_general, volume_correct,
    FixedPointConfig, Method, MethodChoice, SolveReport,
};
use jacshape_core::{tolerances, Error};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::USAGE,
            CliError::Solver(e) => exit::code(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Solver(Error::from(e))
    }
}

/// Result of a command that ran to completion.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub message: String,
}

/// Tolerance of the 1D oracle comparison.
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Serialize)]
pub struct SolveOutput {
    pub command: Command,
    pub report: SolveReport,
    pub identity_node_count: usize,
    pub tol_det: f64,
    pub tol_support: f64,
    pub within_tolerance: bool,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct VerifyOutput {
    pub command: Command,
    pub det_residual_inf: f64,
    pub support_violation_inf: f64,
    pub mass_error: f64,
    pub norm_ratio: f64,
    pub tol_det: f64,
    pub tol_support: f64,
    pub within_tolerance: bool,
    /// Node with the largest `|det ∇φ − f|`.
    pub worst_det_point: [f64; 2],
    /// Identity-region node with the largest displacement.
    pub worst_support_point: Option<[f64; 2]>,
}

#[derive(Serialize)]
pub struct VolumeOutput {
    pub command: Command,
    pub det_defect_inf: f64,
    pub deviation_inf: f64,
    pub inner: SolveReport,
    pub identity_node_count: usize,
    pub tol_det: f64,
    pub tol_support: f64,
    pub within_tolerance: bool,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct OracleRow {
    pub amplitude: f64,
    pub moser_error: Option<f64>,
    pub moser_status: String,
    pub fixedpoint_error: Option<f64>,
    pub fixedpoint_status: String,
}

#[derive(Serialize)]
pub struct OracleOutput {
    pub command: Command,
    pub resolution: usize,
    pub tolerance: f64,
    pub rows: Vec<OracleRow>,
    pub within_tolerance: bool,
}

#[derive(Serialize)]
struct ErrorOutput<'a> {
    command: Command,
    error: String,
    exit_code: u8,
    /// Artifacts written before the failure; they are incomplete.
    partial_artifacts: &'a [String],
}

/// Output directory plus the list of files written so far.
struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.text(name, &body)
    }

    /// Writes the heatmaps and their sidecar of scales.
    fn heatmaps(&mut self, maps: &[(&str, &[f64])], domain: &Domain) -> Result<(), CliError> {
        let mut scales = BTreeMap::new();
        for &(name, values) in maps {
            let file = format!("{name}.pgm");
            scales.insert(file.clone(), heatmap::write(&self.dir.join(&file), values, domain)?);
            self.written.push(file);
        }
        self.json("heatmaps.json", &scales)
    }
}

fn displacement_length(u: &VectorField) -> Vec<f64> {
    (0..u.domain.len()).map(|k| u.norm_at(k)).collect()
}

fn within(cfg: &RunConfig, domain: &Domain, det: f64, support: f64) -> bool {
    det <= cfg.tol_det && support <= cfg.tol_support(domain)
}

fn tolerance_code(ok: bool) -> u8 {
    if ok {
        exit::SUCCESS
    } else {
        exit::TOLERANCE
    }
}

/// The identity region for the configured collar or distance.
fn identity_set(cfg: &RunConfig, domain: &Arc<Domain>) -> Result<Vec<bool>, CliError> {
    Ok(match cfg.distance {
        Some(d) => identity_region(domain, d)?.nodes,
        None => collar(domain, cfg.collar)?.band,
    })
}

/// Runs one command. Solver failures leave an `error.json` naming the
/// partial artifacts in the output directory.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Artifacts::new(&cfg.out)?;
    let result = match cfg.command {
        Command::Solve => cmd_solve(cfg, &mut out),
        Command::Verify => cmd_verify(cfg, &mut out),
        Command::CorrectVolume => cmd_correct_volume(cfg, &mut out),
        Command::ExperimentCollar => cmd_experiment_collar(cfg, &mut out),
        Command::Oracle1d => cmd_oracle_1d(cfg, &mut out),
    };
    if let Err(e) = &result {
        let partial = out.written.clone();
        out.json(
            "error.json",
            &ErrorOutput {
                command: cfg.command,
                error: e.to_string(),
                exit_code: e.exit_code(),
                partial_artifacts: &partial,
            },
        )?;
    }
    result
}

fn cmd_solve(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let domain = cfg.build_domain()?;
    let f = cfg.density(&domain)?;
    out.heatmaps(&[("f", &f.values)], &domain)?;
    let scfg = cfg.supported_config();
    let mut warnings = Vec::new();
    let (phi, report, identity) = match cfg.distance {
        Some(d) => {
            let s = solve_general(&f, d, &scfg)?;
            let nodes = s.identity_nodes();
            (s.map, s.report, nodes)
        }
        None => {
            let band = collar(&domain, cfg.collar)?;
            let (phi, report) = if cfg.dump_flow && cfg.method == MethodChoice::Moser {
                let mut trace = Vec::new();
                let solved = moser_solve_traced(&f, &band, &scfg.flow, Some(&mut trace))?;
                for (n, step) in trace.iter().enumerate() {
                    out.text(&format!("flow_{n:04}.csv"), &RawField::from_vector(step).to_csv())?;
                }
                solved
            } else {
                if cfg.dump_flow {
                    warnings.push("--dump-flow only applies to --method moser".into());
                }
                solve(&f, &band, cfg.method, &scfg)?
            };
            (phi, report, band.band)
        }
    };
    warnings.extend(report.warnings.iter().cloned());
    out.text("phi.json", &phi.to_json())?;
    let det = phi.jacobian_det();
    out.heatmaps(
        &[
            ("f", &f.values),
            ("det", &det.values),
            ("displacement", &displacement_length(&phi.displacement)),
        ],
        &domain,
    )?;
    let ok = within(cfg, &domain, report.det_residual_inf, report.support_violation_inf)
        && report.mass_error <= tolerances::MASS_REL * domain.measure();
    let message = format!(
        "solve: det residual {:e}, support violation {:e}, {}",
        report.det_residual_inf,
        report.support_violation_inf,
        if ok { "within tolerance" } else { "TOLERANCE EXCEEDED" }
    );
    out.json(
        "report.json",
        &SolveOutput {
            command: cfg.command,
            identity_node_count: identity.iter().filter(|&&b| b).count(),
            tol_det: cfg.tol_det,
            tol_support: cfg.tol_support(&domain),
            within_tolerance: ok,
            warnings,
            report,
        },
    )?;
    Ok(Outcome {
        code: tolerance_code(ok),
        message,
    })
}

fn argmax(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    values.fold(None, |best, (k, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((k, v)),
    })
}

fn cmd_verify(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    if cfg.phi.is_none() {
        return Err(CliError::Config("verify needs --phi".into()));
    }
    let domain = cfg.build_domain()?;
    let f = cfg.density(&domain)?;
    let phi = cfg.map(&domain)?;
    let identity = identity_set(cfg, &domain)?;
    let report = SolveReport::assess(Method::Full, &phi, &f, &identity, 0.0)?;
    let det = phi.jacobian_det();
    let residual: Vec<f64> = (0..domain.len())
        .map(|k| if domain.mask[k] { (det.values[k] - f.values[k]).abs() } else { 0.0 })
        .collect();
    debug_assert_eq!(report.det_residual_inf, det_residual(&phi, &f));
    let worst_det = argmax((0..domain.len()).filter(|&k| domain.mask[k]).map(|k| (k, residual[k])))
        .map_or(0, |(k, _)| k);
    let worst_support = argmax(
        (0..domain.len())
            .filter(|&k| identity[k])
            .map(|k| (k, phi.displacement.norm_at(k))),
    )
    .filter(|&(_, v)| v > 0.0)
    .map(|(k, _)| domain.grid.point(k));
    out.heatmaps(
        &[
            ("residual", &residual),
            ("displacement", &displacement_length(&phi.displacement)),
        ],
        &domain,
    )?;
    let ok = within(cfg, &domain, report.det_residual_inf, report.support_violation_inf);
    let message = format!(
        "verify: det residual {:e}, support violation {:e}, {}",
        report.det_residual_inf,
        report.support_violation_inf,
        if ok { "within tolerance" } else { "TOLERANCE EXCEEDED" }
    );
    out.json(
        "verify.json",
        &VerifyOutput {
            command: cfg.command,
            det_residual_inf: report.det_residual_inf,
            support_violation_inf: report.support_violation_inf,
            mass_error: report.mass_error,
            norm_ratio: report.norm_ratio,
            tol_det: cfg.tol_det,
            tol_support: cfg.tol_support(&domain),
            within_tolerance: ok,
            worst_det_point: domain.grid.point(worst_det),
            worst_support_point: worst_support,
        },
    )?;
    Ok(Outcome {
        code: tolerance_code(ok),
        message,
    })
}

/// Default distance of the volume correction when `--distance` is absent.
pub const VOLUME_DISTANCE: f64 = 0.25;

fn cmd_correct_volume(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    if cfg.phi.is_none() {
        return Err(CliError::Config("correct-volume needs --phi".into()));
    }
    let domain = cfg.build_domain()?;
    let psi = cfg.map(&domain)?;
    let d = cfg.distance.unwrap_or(VOLUME_DISTANCE);
    let v = volume_correct(&psi, d, &cfg.supported_config())?;
    out.text("corrected.json", &v.map.to_json())?;
    let det = v.map.jacobian_det();
    let change: Vec<f64> = (0..domain.len())
        .map(|k| {
            let a = v.map.node_image(k);
            let b = psi.node_image(k);
            if domain.mask[k] { (a[0] - b[0]).hypot(a[1] - b[1]) } else { 0.0 }
        })
        .collect();
    out.heatmaps(
        &[("density", &v.density.values), ("det", &det.values), ("change", &change)],
        &domain,
    )?;
    let ok = within(cfg, &domain, v.det_defect_inf, v.deviation_inf);
    let message = format!(
        "correct-volume: det defect {:e}, deviation {:e}, {}",
        v.det_defect_inf,
        v.deviation_inf,
        if ok { "within tolerance" } else { "TOLERANCE EXCEEDED" }
    );
    out.json(
        "report.json",
        &VolumeOutput {
            command: cfg.command,
            det_defect_inf: v.det_defect_inf,
            deviation_inf: v.deviation_inf,
            identity_node_count: v.inner.identity_nodes().iter().filter(|&&b| b).count(),
            tol_det: cfg.tol_det,
            tol_support: cfg.tol_support(&domain),
            within_tolerance: ok,
            warnings: v.inner.report.warnings.clone(),
            inner: v.inner.report,
        },
    )?;
    Ok(Outcome {
        code: tolerance_code(ok),
        message,
    })
}

fn cmd_experiment_collar(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let domain = cfg.build_domain()?;
    if !matches!(domain.geometry, jacshape_core::domain_geom::Geometry::Disk { .. }) {
        return Err(CliError::Config("experiment-collar runs on the disk".into()));
    }
    let (center, _) = config::deepest_ball(&domain);
    let summary = experiment::sweep(&domain, center, cfg.method, &cfg.supported_config());
    let csv = experiment::to_csv(&summary.records)
        .map_err(|e| CliError::Solver(Error::Io(e.to_string())))?;
    out.text("collar_experiment.csv", &csv)?;
    out.text("collar_experiment.dat", &experiment::to_dat(&summary))?;
    out.json("collar_experiment.json", &summary)?;
    let failed = summary.records.iter().filter(|r| r.status != "ok").count();
    Ok(Outcome {
        code: exit::SUCCESS,
        message: format!(
            "experiment-collar: {} rows ({failed} failed); {}",
            summary.records.len(),
            summary.observation
        ),
    })
}

fn sup_difference(a: &GridMap, b: &GridMap) -> f64 {
    a.displacement.comps[0]
        .iter()
        .zip(&b.displacement.comps[0])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn cmd_oracle_1d(cfg: &RunConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let domain = cfg.build_domain()?;
    if domain.dim() != 1 {
        return Err(CliError::Config("oracle-1d runs on the interval".into()));
    }
    let band = collar(&domain, cfg.collar)?;
    let scfg = cfg.supported_config();
    let mut rows = Vec::new();
    let mut ok = true;
    for (amplitude, f) in jacshape_core::samples::interval_fixtures(&domain) {
        let exact = solve_1d(&f)?;
        let mut row = OracleRow {
            amplitude,
            moser_error: None,
            moser_status: "ok".into(),
            fixedpoint_error: None,
            fixedpoint_status: "ok".into(),
        };
        match moser_solve(&f, &band, &scfg.flow) {
            Ok((phi, _)) => row.moser_error = Some(sup_difference(&phi, &exact)),
            Err(e) => {
                row.moser_status = e.to_string();
                ok = false;
            }
        }
        match fixedpoint_solve(&f, &band, &FixedPointConfig::default()) {
            Ok((phi, _)) => row.fixedpoint_error = Some(sup_difference(&phi, &exact)),
            Err(e @ Error::GateFailure { .. }) => row.fixedpoint_status = format!("skipped: {e}"),
            Err(e) => {
                row.fixedpoint_status = e.to_string();
                ok = false;
            }
        }
        ok &= [row.moser_error, row.fixedpoint_error]
            .iter()
            .flatten()
            .all(|&e| e <= ORACLE_TOL);
        rows.push(row);
    }
    let worst = rows
        .iter()
        .flat_map(|r| [r.moser_error, r.fixedpoint_error])
        .flatten()
        .fold(0.0, f64::max);
    out.json(
        "oracle_1d.json",
        &OracleOutput {
            command: cfg.command,
            resolution: cfg.resolution(),
            tolerance: ORACLE_TOL,
            rows,
            within_tolerance: ok,
        },
    )?;
    Ok(Outcome {
        code: tolerance_code(ok),
        message: format!(
            "oracle-1d: largest difference from the closed form {worst:e}, {}",
            if ok { "within tolerance" } else { "TOLERANCE EXCEEDED" }
        ),
    })
}
