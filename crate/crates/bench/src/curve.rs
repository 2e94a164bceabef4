//! Normalized Nyström error against rank for each selection method.

use std::path::{Path, PathBuf};

use landmark_core::linalg::eigh;
use landmark_core::nystrom::{nystrom_error_trace, optimal_error_from_spectrum};
use landmark_core::{Error, KernelMatrix, RandomSeed};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MethodSpec};
use crate::dataset::load_dataset;
use crate::error::Result;
use crate::output::{create_dir, format_float, write_csv, write_json, Versions, F17};

/// Written into every metadata file so readers know what `mean_error` means.
pub const NORMALIZATION: &str = "mean over trials of nystrom_error_trace(Q, J) / tr(Q)";

pub const CURVE_HEADER: [&str; 6] = ["method", "k", "mean_error", "std_err", "trials", "baseline"];

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub method: MethodSpec,
    pub k: usize,
    /// `NaN` when every trial was skipped.
    pub mean_error: f64,
    pub std_err: f64,
    /// Trials that produced a subset.
    pub trials: usize,
    /// Trials skipped because the sampler hit a numerical degeneracy.
    pub skipped: usize,
    /// Optimal rank-`k` error over `tr(Q)`.
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    /// Ordered by method (config order), then rank.
    pub points: Vec<CurvePoint>,
    pub trace: f64,
    pub order: usize,
}

impl ErrorCurve {
    pub fn get(&self, method: &MethodSpec, k: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| &p.method == method && p.k == k)
    }

    pub fn baselines(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self.points.iter().map(|p| (p.k, p.baseline)).collect();
        out.sort_by_key(|&(k, _)| k);
        out.dedup_by_key(|&mut (k, _)| k);
        out
    }

    /// Points whose mean falls below the optimal baseline by more than
    /// `tol`; empty unless something is wrong.
    pub fn sandwich_violations(&self, tol: f64) -> Vec<&CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.trials > 0 && p.mean_error < p.baseline - tol)
            .collect()
    }
}

/// Stream of trial `t` of `method` at rank `k`.
pub fn trial_seed(base: u64, method: &MethodSpec, k: usize, t: usize) -> RandomSeed {
    RandomSeed::new(base).derive(&[method.stream_id(), k as u64, t as u64])
}

/// Outcome of a single trial: an error, or a skipped degeneracy.
fn run_trial(
    q: &KernelMatrix,
    method: &MethodSpec,
    k: usize,
    seed: RandomSeed,
) -> landmark_core::Result<Option<f64>> {
    match method.select(q, k, seed) {
        Ok(subset) => Ok(Some(nystrom_error_trace(q, &subset)? / q.trace())),
        Err(e) if e.is_numerical_degeneracy() => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs every (method, rank, trial) item in parallel and reduces in that
/// order, so results do not depend on scheduling.
pub fn error_curve_for_kernel(
    q: &KernelMatrix,
    methods: &[MethodSpec],
    ranks: std::ops::RangeInclusive<usize>,
    trials: usize,
    seed: u64,
) -> landmark_core::Result<ErrorCurve> {
    if q.trace() <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    let spectrum = eigh(q.as_symmetric())?;
    let mut items = Vec::new();
    for method in methods {
        let runs = if method.is_deterministic() { 1 } else { trials };
        for k in ranks.clone() {
            for t in 0..runs {
                items.push((method, k, t));
            }
        }
    }
    let outcomes: Vec<landmark_core::Result<Option<f64>>> = items
        .par_iter()
        .map(|&(method, k, t)| run_trial(q, method, k, trial_seed(seed, method, k, t)))
        .collect();

    let mut points = Vec::new();
    let mut cursor = 0;
    for method in methods {
        let runs = if method.is_deterministic() { 1 } else { trials };
        for k in ranks.clone() {
            let mut values = Vec::with_capacity(runs);
            let mut skipped = 0;
            for outcome in &outcomes[cursor..cursor + runs] {
                match outcome {
                    Ok(Some(v)) => values.push(*v),
                    Ok(None) => skipped += 1,
                    Err(e) => return Err(e.clone()),
                }
            }
            cursor += runs;
            let (mean_error, std_err) = mean_and_std_err(&values);
            points.push(CurvePoint {
                method: *method,
                k,
                mean_error,
                std_err,
                trials: values.len(),
                skipped,
                baseline: optimal_error_from_spectrum(&spectrum, k) / q.trace(),
            });
        }
    }
    Ok(ErrorCurve {
        points,
        trace: q.trace(),
        order: q.order(),
    })
}

pub fn run_error_experiment(config: &ExperimentConfig) -> Result<ErrorCurve> {
    let data = load_dataset(&config.dataset)?;
    config.check_order(data.len())?;
    let q = data.kernel(config.kernel.as_ref())?;
    Ok(error_curve_for_kernel(
        &q,
        &config.methods,
        config.ranks(),
        config.trials,
        config.seed,
    )?)
}

#[derive(Serialize)]
struct CurveRowMeta {
    method: String,
    k: usize,
    trials: usize,
    skipped_degenerate: usize,
    deterministic: bool,
}

#[derive(Serialize)]
struct CurveMetadata {
    command: &'static str,
    versions: Versions,
    normalization: &'static str,
    seed: u64,
    parameters: std::collections::BTreeMap<String, String>,
    kernel_order: usize,
    kernel_trace: F17,
    deterministic_methods: Vec<String>,
    sandwich_violations: usize,
    rows: Vec<CurveRowMeta>,
}

pub fn curve_rows(curve: &ErrorCurve) -> Vec<Vec<String>> {
    curve
        .points
        .iter()
        .map(|p| {
            vec![
                p.method.to_string(),
                p.k.to_string(),
                format_float(p.mean_error),
                format_float(p.std_err),
                p.trials.to_string(),
                format_float(p.baseline),
            ]
        })
        .collect()
}

/// Writes `error_curve.csv` and `error_curve.json` into `dir`.
pub fn write_error_curve(
    curve: &ErrorCurve,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let csv_path = dir.join("error_curve.csv");
    write_csv(&csv_path, &CURVE_HEADER, &curve_rows(curve))?;

    let meta = CurveMetadata {
        command: "error-curve",
        versions: Versions::current(),
        normalization: NORMALIZATION,
        seed: config.seed,
        parameters: config
            .to_key_values()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        kernel_order: curve.order,
        kernel_trace: F17(curve.trace),
        deterministic_methods: config
            .methods
            .iter()
            .filter(|m| m.is_deterministic())
            .map(|m| m.to_string())
            .collect(),
        sandwich_violations: curve.sandwich_violations(1e-12).len(),
        rows: curve
            .points
            .iter()
            .map(|p| CurveRowMeta {
                method: p.method.to_string(),
                k: p.k,
                trials: p.trials,
                skipped_degenerate: p.skipped,
                deterministic: p.method.is_deterministic(),
            })
            .collect(),
    };
    let json_path = dir.join("error_curve.json");
    write_json(&json_path, &meta)?;
    Ok(vec![csv_path, json_path])
}
