//! Collar-thickness sweep: how the solver constant and the largest
//! convergent amplitude behave as the collar thins.

use jacshape_core::domain_geom::{collar, Domain};
use jacshape_core::field_core::{Fill, ScalarField};
use jacshape_core::jacobian_solver::{fixedpoint_solve, solve, MethodChoice, SupportedConfig};
use jacshape_core::samples::dipole;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Collar thicknesses of the sweep, strictly decreasing.
pub const THICKNESSES: [f64; 6] = [0.3, 0.2, 0.15, 0.1, 0.075, 0.05];

/// Amplitude of the template density for the reported solve.
pub const BASE_AMPLITUDE: f64 = 0.01;

/// Support radius of the template density `1 + a·dipole(x − c, R)`.
pub const TEMPLATE_RADIUS: f64 = 0.4;

/// Amplitudes tried, in increasing order, for the largest convergent one.
pub const LADDER: [f64; 6] = [0.0025, 0.005, 0.01, 0.02, 0.04, 0.08];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub collar_thickness: f64,
    pub norm_ratio: Option<f64>,
    /// Largest ladder amplitude (all smaller ones included) for which the
    /// fixed point passed its smallness gate and converged.
    pub epsilon_gate_max: Option<f64>,
    pub det_residual: Option<f64>,
    /// `ok`, or the error of the failed solve.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub records: Vec<ExperimentRecord>,
    /// Spearman rank correlation of norm_ratio against 1/δ over the
    /// successful rows; `None` with fewer than two.
    pub spearman_rho: Option<f64>,
    pub observation: String,
}

/// Template density centred at `center`. A dipole rather than a radial
/// bump, so the Neumann field reaches the collar and its thickness matters.
pub fn template(domain: &Arc<Domain>, center: [f64; 2], amplitude: f64) -> ScalarField {
    ScalarField::from_fn(domain, Fill::One, |x, y| {
        1.0 + amplitude * dipole(x - center[0], y - center[1], TEMPLATE_RADIUS)
    })
}

/// One row of the sweep; failures land in `status`.
pub fn run_row(
    domain: &Arc<Domain>,
    center: [f64; 2],
    thickness: f64,
    choice: MethodChoice,
    cfg: &SupportedConfig,
) -> ExperimentRecord {
    let mut record = ExperimentRecord {
        collar_thickness: thickness,
        norm_ratio: None,
        epsilon_gate_max: None,
        det_residual: None,
        status: "ok".into(),
    };
    let band = match collar(domain, thickness) {
        Ok(c) => c,
        Err(e) => {
            record.status = e.to_string();
            return record;
        }
    };
    match solve(&template(domain, center, BASE_AMPLITUDE), &band, choice, cfg) {
        Ok((_, report)) => {
            record.norm_ratio = Some(report.norm_ratio);
            record.det_residual = Some(report.det_residual_inf);
        }
        Err(e) => record.status = e.to_string(),
    }
    for a in LADDER {
        match fixedpoint_solve(&template(domain, center, a), &band, &cfg.fixed_point) {
            Ok(_) => record.epsilon_gate_max = Some(a),
            Err(_) => break,
        }
    }
    record
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = 0.5 * (i + j) as f64 + 1.0;
        for &k in &order[i..=j] {
            out[k] = mean;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` for fewer than two pairs or a
/// constant column.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Runs every thickness in order and summarizes the trend.
pub fn sweep(
    domain: &Arc<Domain>,
    center: [f64; 2],
    choice: MethodChoice,
    cfg: &SupportedConfig,
) -> ExperimentSummary {
    let records: Vec<ExperimentRecord> = THICKNESSES
        .iter()
        .map(|&t| run_row(domain, center, t, choice, cfg))
        .collect();
    let (inv, ratio): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| r.norm_ratio.map(|v| (1.0 / r.collar_thickness, v)))
        .unzip();
    let spearman_rho = spearman(&inv, &ratio);
    let observation = match spearman_rho {
        Some(rho) => {
            let trend = if rho > 0.5 {
                "tends to grow"
            } else if rho < -0.5 {
                "tends to shrink"
            } else {
                "shows no clear monotone trend"
            };
            format!(
                "over {} successful rows the norm ratio {trend} as the collar thins \
                 (Spearman rho = {rho:.4}); this is an observation, not a bound",
                ratio.len()
            )
        }
        None => format!("only {} successful rows; no trend statistic", ratio.len()),
    };
    ExperimentSummary {
        records,
        spearman_rho,
        observation,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// CSV with a header row; failed measurements are empty cells.
pub fn to_csv(records: &[ExperimentRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["collar_thickness", "norm_ratio", "epsilon_gate_max", "det_residual", "status"])?;
    for r in records {
        w.write_record([
            format!("{:e}", r.collar_thickness),
            cell(r.norm_ratio),
            cell(r.epsilon_gate_max),
            cell(r.det_residual),
            r.status.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

/// Whitespace-separated columns for gnuplot; failed measurements are `NaN`.
pub fn to_dat(summary: &ExperimentSummary) -> String {
    let nan = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| format!("{x:e}"));
    let mut out = String::from("# collar_thickness inverse_thickness norm_ratio epsilon_gate_max det_residual\n");
    if let Some(rho) = summary.spearman_rho {
        out.push_str(&format!("# spearman_rho {rho:e}\n"));
    }
    for r in &summary.records {
        out.push_str(&format!(
            "{:e} {:e} {} {} {}\n",
            r.collar_thickness,
            1.0 / r.collar_thickness,
            nan(r.norm_ratio),
            nan(r.epsilon_gate_max),
            nan(r.det_residual)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0], &[1.0]), None);
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
    }

    #[test]
    fn ties_share_their_mean_rank() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
