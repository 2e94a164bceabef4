//! Exhaustive checks of the expected-error bounds on small random kernels.
//!
//! For each instance and rank `k` three bounds are checked:
//!
//! * uniform sampling: `E‖Q − Q̃‖_tr ≤ (n − k)/n · tr(Q)`
//! * determinantal sampling (`s = 1`): `E‖Q − Q̃‖_tr ≤ (k + 1) Σ_{i>k} λᵢ`
//! * determinant maximization: `‖Q − Q̃‖_tr ≤ (k + 1)(n − k) λ_{k+1}`

use std::path::{Path, PathBuf};

use landmark_core::linalg::eigh;
use landmark_core::nystrom::{nystrom_error_trace, optimal_error_from_spectrum};
use landmark_core::sampling::{
    binomial, exhaustive_max_det_subset, expected_error_exact, ENUMERATION_LIMIT,
};
use landmark_core::synthetic::{random_diagonal_psd, random_psd};
use landmark_core::{KernelMatrix, RandomSeed};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::BoundsConfig;
use crate::error::{BenchError, Result};
use crate::output::{create_dir, format_float, write_csv, write_json, Versions, F17};

/// Slack below which a bound counts as violated.
pub const BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Full-rank Gram matrix.
    Dense,
    /// Random positive diagonal; the uniform bound is attained.
    Diagonal,
    /// Gram matrix of rank exactly `k`, so determinantal sampling is exact.
    RankK,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Dense => "dense",
            Family::Diagonal => "diagonal",
            Family::RankK => "rank_k",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn slack(&self) -> f64 {
        self.bound - self.value
    }

    pub fn holds(&self) -> bool {
        self.value <= self.bound + BOUND_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub instance: usize,
    pub family: Family,
    pub k: usize,
    pub trace: f64,
    pub uniform: BoundCheck,
    pub determinantal: BoundCheck,
    pub det_max: BoundCheck,
}

impl BoundRow {
    pub fn holds(&self) -> bool {
        self.uniform.holds() && self.determinantal.holds() && self.det_max.holds()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub n: usize,
    pub rows: Vec<BoundRow>,
}

impl BoundsReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.holds()).count()
    }

    /// Largest `|slack|` of the uniform bound over diagonal instances.
    pub fn diagonal_tightness(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.family == Family::Diagonal)
            .map(|r| r.uniform.slack().abs())
            .fold(0.0, f64::max)
    }
}

/// Checks all three bounds for one kernel and rank.
pub fn check_bounds(q: &KernelMatrix, k: usize) -> landmark_core::Result<[BoundCheck; 3]> {
    let n = q.order();
    let spectrum = eigh(q.as_symmetric())?;
    let uniform = BoundCheck {
        value: expected_error_exact(q, k, 0.0)?,
        bound: (n - k) as f64 / n as f64 * q.trace(),
    };
    let determinantal = BoundCheck {
        value: expected_error_exact(q, k, 1.0)?,
        bound: (k + 1) as f64 * optimal_error_from_spectrum(&spectrum, k),
    };
    let (best, _) = exhaustive_max_det_subset(q, k)?;
    let det_max = BoundCheck {
        value: nystrom_error_trace(q, &best)?,
        bound: ((k + 1) * (n - k)) as f64 * spectrum.eigenvalues[k].max(0.0),
    };
    Ok([uniform, determinantal, det_max])
}

fn instance_kernel(family: Family, n: usize, k: usize, seed: RandomSeed) -> KernelMatrix {
    let mut rng = seed.rng();
    match family {
        Family::Dense => random_psd(n, n, &mut rng),
        Family::Diagonal => random_diagonal_psd(n, &mut rng),
        Family::RankK => random_psd(n, k, &mut rng),
    }
}

/// Instance `i` belongs to family `i mod 3` (dense, diagonal, rank-k).
/// Dense and diagonal instances are shared across ranks; rank-k instances
/// are drawn afresh for each `k`.
pub fn verify_bounds(
    n: usize,
    k_min: usize,
    k_max: usize,
    instances: usize,
    seed: RandomSeed,
) -> Result<BoundsReport> {
    if k_min == 0 || k_min > k_max || k_max >= n {
        return Err(BenchError::config(format!(
            "ranks {k_min}..={k_max} must satisfy 1 ≤ k_min ≤ k_max < n = {n}"
        )));
    }
    if instances == 0 {
        return Err(BenchError::config("`instances` must be at least 1"));
    }
    if let Some(k) = (k_min..=k_max).find(|&k| binomial(n, k) > ENUMERATION_LIMIT) {
        return Err(landmark_core::Error::TooManySubsets {
            count: binomial(n, k),
            limit: ENUMERATION_LIMIT,
        }
        .into());
    }
    let families = [Family::Dense, Family::Diagonal, Family::RankK];
    let items: Vec<(usize, usize)> = (0..instances)
        .flat_map(|i| (k_min..=k_max).map(move |k| (i, k)))
        .collect();
    let rows: Vec<landmark_core::Result<BoundRow>> = items
        .par_iter()
        .map(|&(i, k)| {
            let family = families[i % 3];
            let instance_seed = match family {
                Family::RankK => seed.derive(&[i as u64, k as u64]),
                _ => seed.derive(&[i as u64]),
            };
            let q = instance_kernel(family, n, k, instance_seed);
            let [uniform, determinantal, det_max] = check_bounds(&q, k)?;
            Ok(BoundRow {
                instance: i,
                family,
                k,
                trace: q.trace(),
                uniform,
                determinantal,
                det_max,
            })
        })
        .collect();
    Ok(BoundsReport {
        n,
        rows: rows.into_iter().collect::<landmark_core::Result<_>>()?,
    })
}

pub const BOUNDS_HEADER: [&str; 14] = [
    "instance",
    "family",
    "k",
    "trace",
    "uniform_expected",
    "uniform_bound",
    "uniform_slack",
    "detmc_expected",
    "detmc_bound",
    "detmc_slack",
    "detmax_error",
    "detmax_bound",
    "detmax_slack",
    "pass",
];

#[derive(Serialize)]
struct BoundsMetadata {
    command: &'static str,
    versions: Versions,
    n: usize,
    rank_min: usize,
    k_max: usize,
    instances: usize,
    seed: u64,
    tolerance: F17,
    rows: usize,
    failures: usize,
    diagonal_uniform_max_abs_slack: F17,
    families: [&'static str; 3],
}

/// Writes `bounds.csv` and `bounds.json` into `dir`.
pub fn write_bounds_report(
    report: &BoundsReport,
    config: &BoundsConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.instance.to_string(),
                r.family.name().to_string(),
                r.k.to_string(),
            ];
            row.push(format_float(r.trace));
            for c in [r.uniform, r.determinantal, r.det_max] {
                row.extend([
                    format_float(c.value),
                    format_float(c.bound),
                    format_float(c.slack()),
                ]);
            }
            row.push(r.holds().to_string());
            row
        })
        .collect();
    let csv_path = dir.join("bounds.csv");
    write_csv(&csv_path, &BOUNDS_HEADER, &rows)?;
    let meta = BoundsMetadata {
        command: "verify-bounds",
        versions: Versions::current(),
        n: config.n,
        rank_min: config.rank_min,
        k_max: config.k_max,
        instances: config.instances,
        seed: config.seed,
        tolerance: F17(BOUND_TOL),
        rows: report.rows.len(),
        failures: report.failures(),
        diagonal_uniform_max_abs_slack: F17(report.diagonal_tightness()),
        families: [
            Family::Dense.name(),
            Family::Diagonal.name(),
            Family::RankK.name(),
        ],
    };
    let json_path = dir.join("bounds.json");
    write_json(&json_path, &meta)?;
    Ok(vec![csv_path, json_path])
}

pub fn run_verify_bounds(config: &BoundsConfig) -> Result<(BoundsReport, Vec<PathBuf>)> {
    let report = verify_bounds(
        config.n,
        config.rank_min,
        config.k_max,
        config.instances,
        RandomSeed::new(config.seed),
    )?;
    let written = write_bounds_report(&report, config, &config.out)?;
    Ok((report, written))
}
