//! Exact and Nyström diffusion-map embeddings with rank correlation against
//! ground-truth tags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use landmark_core::embeddings::{spearman, DiffusionKernel, Embedding};
use landmark_core::PointCloud;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MethodSpec};
use crate::curve::trial_seed;
use crate::dataset::{load_dataset, Dataset};
use crate::error::{BenchError, Result};
use crate::output::{create_dir, format_float, write_csv, write_json, Versions, F17};

#[derive(Debug, Clone, PartialEq)]
pub struct SpearmanSummary {
    pub method: MethodSpec,
    pub k: usize,
    /// `|ρ|` of the first coordinate against the primary tag, per trial,
    /// in trial order. Skipped trials are absent.
    pub abs_spearman: Vec<f64>,
    pub skipped: usize,
}

impl SpearmanSummary {
    pub fn median(&self) -> f64 {
        median(&self.abs_spearman)
    }

    pub fn mean(&self) -> f64 {
        if self.abs_spearman.is_empty() {
            return f64::NAN;
        }
        self.abs_spearman.iter().sum::<f64>() / self.abs_spearman.len() as f64
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone)]
pub struct MethodEmbedding {
    pub method: MethodSpec,
    pub k: usize,
    pub landmarks: Vec<usize>,
    pub embedding: Embedding,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStudy {
    pub points: PointCloud,
    pub exact: Embedding,
    pub exact_spearman: Option<f64>,
    /// First successful trial for each (method, k).
    pub samples: Vec<MethodEmbedding>,
    /// Present only when the data carries tags.
    pub summaries: Vec<SpearmanSummary>,
}

fn abs_spearman(e: &Embedding, tags: Option<&[f64]>) -> Option<f64> {
    tags.map(|t| spearman(&e.column(0), t).abs())
}

type TrialOutcome = Option<(Vec<usize>, Embedding)>;

pub fn embedding_study(config: &ExperimentConfig) -> Result<EmbeddingStudy> {
    let points = match load_dataset(&config.dataset)? {
        Dataset::Points(x) => x,
        Dataset::Kernel(_) => {
            return Err(BenchError::config(format!(
                "dataset `{}` has no points to embed",
                config.dataset.name()
            )))
        }
    };
    config.check_order(points.len())?;
    if config.rank_min <= config.embedding_dim {
        return Err(BenchError::config(format!(
            "rank_min = {} must exceed embedding_dim = {}",
            config.rank_min, config.embedding_dim
        )));
    }
    let kernel = config
        .kernel
        .as_ref()
        .ok_or_else(|| BenchError::config("embedding needs a kernel"))?
        .build(&points)?;
    let dk = DiffusionKernel::from_kernel(kernel)?;
    let (d, m) = (config.embedding_dim, config.diffusion_time);
    let exact = dk.embed(d, m)?;
    let tags = points.primary_tag();
    let exact_spearman = abs_spearman(&exact, tags.as_deref());

    let mut items = Vec::new();
    for method in &config.methods {
        let runs = if method.is_deterministic() {
            1
        } else {
            config.trials
        };
        for k in config.ranks() {
            for t in 0..runs {
                items.push((method, k, t));
            }
        }
    }
    let outcomes: Vec<landmark_core::Result<TrialOutcome>> = items
        .par_iter()
        .map(|&(method, k, t)| {
            let seed = trial_seed(config.seed, method, k, t);
            let subset = match method.select(dk.normalized(), k, seed) {
                Ok(j) => j,
                Err(e) if e.is_numerical_degeneracy() => return Ok(None),
                Err(e) => return Err(e),
            };
            match dk.nystrom_embed(&subset, d, m) {
                Ok(e) => Ok(Some((subset.indices().to_vec(), e))),
                Err(e) if e.is_numerical_degeneracy() => Ok(None),
                Err(landmark_core::Error::InsufficientLandmarks { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    let mut cursor = 0;
    for method in &config.methods {
        let runs = if method.is_deterministic() {
            1
        } else {
            config.trials
        };
        for k in config.ranks() {
            let mut summary = SpearmanSummary {
                method: *method,
                k,
                abs_spearman: Vec::new(),
                skipped: 0,
            };
            let mut first = None;
            for outcome in &outcomes[cursor..cursor + runs] {
                match outcome {
                    Ok(Some((landmarks, e))) => {
                        if let Some(r) = abs_spearman(e, tags.as_deref()) {
                            summary.abs_spearman.push(r);
                        }
                        first.get_or_insert((landmarks, e));
                    }
                    Ok(None) => summary.skipped += 1,
                    Err(e) => return Err(e.clone().into()),
                }
            }
            cursor += runs;
            if let Some((landmarks, e)) = first {
                samples.push(MethodEmbedding {
                    method: *method,
                    k,
                    landmarks: landmarks.clone(),
                    embedding: e.clone(),
                });
            }
            if tags.is_some() {
                summaries.push(summary);
            }
        }
    }
    Ok(EmbeddingStudy {
        points,
        exact,
        exact_spearman,
        samples,
        summaries,
    })
}

fn embedding_rows(e: &Embedding, tags: Option<&[f64]>) -> Vec<Vec<String>> {
    (0..e.coordinates.nrows())
        .map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(e.coordinates.row(i).iter().map(|&v| format_float(v)));
            row.push(tags.map(|t| format_float(t[i])).unwrap_or_default());
            row
        })
        .collect()
}

fn write_embedding(path: &Path, e: &Embedding, tags: Option<&[f64]>) -> Result<()> {
    let mut header = vec!["point_id".to_string()];
    header.extend((1..=e.dim()).map(|j| format!("coord_{j}")));
    header.push("tag".to_string());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, &embedding_rows(e, tags))
}

#[derive(Serialize)]
struct EmbeddingMeta {
    file: String,
    method: String,
    k: Option<usize>,
    landmarks: Option<Vec<usize>>,
    eigenvalues: Vec<F17>,
    trivial_pair_dropped: bool,
    trivial_eigenvalue: Option<F17>,
}

#[derive(Serialize)]
struct SpearmanMeta {
    method: String,
    k: usize,
    trials: usize,
    skipped_degenerate: usize,
    median_abs_spearman: F17,
    mean_abs_spearman: F17,
}

#[derive(Serialize)]
struct StudyMetadata {
    command: &'static str,
    versions: Versions,
    seed: u64,
    diffusion_time: u32,
    embedding_dim: usize,
    parameters: BTreeMap<String, String>,
    spearman_definition: &'static str,
    exact_abs_spearman: Option<F17>,
    embeddings: Vec<EmbeddingMeta>,
    spearman: Vec<SpearmanMeta>,
}

/// Writes `embedding_exact.csv`, one `embedding_<method>_k<k>.csv` per
/// method and rank (first successful trial), `spearman.csv` when tags are
/// present, and `embedding.json`.
pub fn write_embedding_study(
    study: &EmbeddingStudy,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let tags = study.points.primary_tag();
    let mut written = Vec::new();
    let mut metas = Vec::new();

    let exact_path = dir.join("embedding_exact.csv");
    write_embedding(&exact_path, &study.exact, tags.as_deref())?;
    metas.push(EmbeddingMeta {
        file: "embedding_exact.csv".into(),
        method: "exact".into(),
        k: None,
        landmarks: None,
        eigenvalues: study.exact.eigenvalues.iter().map(|&v| F17(v)).collect(),
        trivial_pair_dropped: study.exact.trivial_pair_dropped,
        trivial_eigenvalue: study.exact.trivial_eigenvalue.map(F17),
    });
    written.push(exact_path);

    for s in &study.samples {
        let name = format!("embedding_{}_k{}.csv", s.method.slug(), s.k);
        let path = dir.join(&name);
        write_embedding(&path, &s.embedding, tags.as_deref())?;
        metas.push(EmbeddingMeta {
            file: name,
            method: s.method.to_string(),
            k: Some(s.k),
            landmarks: Some(s.landmarks.clone()),
            eigenvalues: s.embedding.eigenvalues.iter().map(|&v| F17(v)).collect(),
            trivial_pair_dropped: s.embedding.trivial_pair_dropped,
            trivial_eigenvalue: s.embedding.trivial_eigenvalue.map(F17),
        });
        written.push(path);
    }

    if !study.summaries.is_empty() {
        let path = dir.join("spearman.csv");
        let rows: Vec<Vec<String>> = study
            .summaries
            .iter()
            .map(|s| {
                vec![
                    s.method.to_string(),
                    s.k.to_string(),
                    s.abs_spearman.len().to_string(),
                    s.skipped.to_string(),
                    format_float(s.median()),
                    format_float(s.mean()),
                ]
            })
            .collect();
        write_csv(
            &path,
            &[
                "method",
                "k",
                "trials",
                "skipped",
                "median_abs_spearman",
                "mean_abs_spearman",
            ],
            &rows,
        )?;
        written.push(path);
    }

    let meta = StudyMetadata {
        command: "embed",
        versions: Versions::current(),
        seed: config.seed,
        diffusion_time: config.diffusion_time,
        embedding_dim: config.embedding_dim,
        parameters: config
            .to_key_values()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        spearman_definition: "|Spearman rank correlation| between coord_1 and the primary tag",
        exact_abs_spearman: study.exact_spearman.map(F17),
        embeddings: metas,
        spearman: study
            .summaries
            .iter()
            .map(|s| SpearmanMeta {
                method: s.method.to_string(),
                k: s.k,
                trials: s.abs_spearman.len(),
                skipped_degenerate: s.skipped,
                median_abs_spearman: F17(s.median()),
                mean_abs_spearman: F17(s.mean()),
            })
            .collect(),
    };
    let json_path = dir.join("embedding.json");
    write_json(&json_path, &meta)?;
    written.push(json_path);
    Ok(written)
}

pub fn run_embedding_experiment(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let study = embedding_study(config)?;
    write_embedding_study(&study, config, &config.out)
}
