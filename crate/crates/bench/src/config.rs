//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Recognised keys:
//!
//! | Key | Meaning | Default |
//! |-----|---------|---------|
//! | `dataset` | `fishbowl`, `uneven_line`, `gaussian`, `low_rank`, `diagonal` or `csv` | required |
//! | `n_points` | number of points (or kernel order) | required except for `csv` |
//! | `cap_z` | fishbowl cap height | `0.7` |
//! | `dim` | ambient dimension for `gaussian` | `3` |
//! | `kernel_rank` | rank for `low_rank` | required for `low_rank` |
//! | `dataset_seed` | seed of the synthetic generator | value of `seed` |
//! | `path` | CSV file for `csv` | required for `csv` |
//! | `header` | skip the first CSV line | `false` |
//! | `tag_column` | last CSV column is a tag | `false` |
//! | `kernel` | `rbf`, `knn` or `linear` | `rbf` |
//! | `sigma` | kernel bandwidth | required for `rbf` and `knn` |
//! | `k_nn` | neighbours for `knn` | required for `knn` |
//! | `methods` | comma separated, e.g. `uniform, detmc:s=1:steps=500` | required |
//! | `rank_min`, `rank_max` | landmark counts | required |
//! | `trials` | trials per method and rank | `500` |
//! | `seed` | base seed | `0` |
//! | `out` | output directory | `out` |
//! | `embedding_dim` | embedding coordinates | `1` |
//! | `diffusion_time` | power `m` applied to eigenvalues | `1` |
//!
//! Method syntax: `uniform`, `diag2`, `detmc[:s=<real>][:steps=<int>]`,
//! `detmax_random[:trials=<int>]`, `detmax_greedy`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use landmark_core::kernels::{gram_kernel, knn_graph_kernel, rbf_kernel};
use landmark_core::sampling::{
    default_burn_in, det_max_greedy, det_max_random_search, detmc_subset, diag_squared_subset,
    uniform_subset,
};
use landmark_core::{KernelMatrix, LandmarkSubset, PointCloud, RandomSeed};

use crate::error::{BenchError, Result};

pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_DETMAX_TRIALS: usize = 2500;
pub const DEFAULT_CAP_Z: f64 = 0.7;

/// Parsed `key = value` pairs, in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(BenchError::config(format!(
                    "line {}: empty key",
                    lineno + 1
                )));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(BenchError::config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(KeyValues(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.take(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| BenchError::config(format!("`{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.take_parsed(key)?
            .ok_or_else(|| BenchError::config(format!("missing key `{key}`")))
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(key) => Err(BenchError::config(format!("unknown key `{key}`"))),
            None => Ok(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Fishbowl {
        n_points: usize,
        cap_z: f64,
        seed: u64,
    },
    UnevenLine {
        n_points: usize,
        seed: u64,
    },
    Gaussian {
        n_points: usize,
        dim: usize,
        seed: u64,
    },
    /// Kernel given directly as a random rank-limited Gram matrix.
    LowRank {
        n: usize,
        rank: usize,
        seed: u64,
    },
    /// Kernel given directly as a random positive diagonal.
    Diagonal {
        n: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        header: bool,
        tag_column: bool,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Fishbowl { .. } => "fishbowl",
            DatasetSpec::UnevenLine { .. } => "uneven_line",
            DatasetSpec::Gaussian { .. } => "gaussian",
            DatasetSpec::LowRank { .. } => "low_rank",
            DatasetSpec::Diagonal { .. } => "diagonal",
            DatasetSpec::Csv { .. } => "csv",
        }
    }

    pub fn is_kernel(&self) -> bool {
        matches!(
            self,
            DatasetSpec::LowRank { .. } | DatasetSpec::Diagonal { .. }
        )
    }

    fn from_keys(kv: &mut KeyValues, base_seed: u64) -> Result<Self> {
        let name: String = kv.require("dataset")?;
        let seed = kv.take_parsed("dataset_seed")?.unwrap_or(base_seed);
        let spec = match name.as_str() {
            "fishbowl" => DatasetSpec::Fishbowl {
                n_points: kv.require("n_points")?,
                cap_z: kv.take_parsed("cap_z")?.unwrap_or(DEFAULT_CAP_Z),
                seed,
            },
            "uneven_line" => DatasetSpec::UnevenLine {
                n_points: kv.require("n_points")?,
                seed,
            },
            "gaussian" => DatasetSpec::Gaussian {
                n_points: kv.require("n_points")?,
                dim: kv.take_parsed("dim")?.unwrap_or(3),
                seed,
            },
            "low_rank" => DatasetSpec::LowRank {
                n: kv.require("n_points")?,
                rank: kv.require("kernel_rank")?,
                seed,
            },
            "diagonal" => DatasetSpec::Diagonal {
                n: kv.require("n_points")?,
                seed,
            },
            "csv" => DatasetSpec::Csv {
                path: kv.require::<String>("path")?.into(),
                header: kv.take_parsed("header")?.unwrap_or(false),
                tag_column: kv.take_parsed("tag_column")?.unwrap_or(false),
            },
            other => return Err(BenchError::config(format!("unknown dataset `{other}`"))),
        };
        Ok(spec)
    }

    fn write_keys(&self, kv: &mut KeyValues) {
        kv.set("dataset", self.name());
        match self {
            DatasetSpec::Fishbowl {
                n_points,
                cap_z,
                seed,
            } => {
                kv.set("n_points", n_points);
                kv.set("cap_z", cap_z);
                kv.set("dataset_seed", seed);
            }
            DatasetSpec::UnevenLine { n_points, seed } => {
                kv.set("n_points", n_points);
                kv.set("dataset_seed", seed);
            }
            DatasetSpec::Gaussian {
                n_points,
                dim,
                seed,
            } => {
                kv.set("n_points", n_points);
                kv.set("dim", dim);
                kv.set("dataset_seed", seed);
            }
            DatasetSpec::LowRank { n, rank, seed } => {
                kv.set("n_points", n);
                kv.set("kernel_rank", rank);
                kv.set("dataset_seed", seed);
            }
            DatasetSpec::Diagonal { n, seed } => {
                kv.set("n_points", n);
                kv.set("dataset_seed", seed);
            }
            DatasetSpec::Csv {
                path,
                header,
                tag_column,
            } => {
                kv.set("path", path.display());
                kv.set("header", header);
                kv.set("tag_column", tag_column);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Rbf {
        sigma: f64,
    },
    Knn {
        k_nn: usize,
        sigma: f64,
    },
    /// Inner products between points.
    Linear,
}

impl KernelSpec {
    pub fn build(&self, x: &PointCloud) -> landmark_core::Result<KernelMatrix> {
        match *self {
            KernelSpec::Rbf { sigma } => rbf_kernel(x, sigma),
            KernelSpec::Knn { k_nn, sigma } => knn_graph_kernel(x, k_nn, sigma),
            KernelSpec::Linear => gram_kernel(x),
        }
    }

    fn from_keys(kv: &mut KeyValues) -> Result<Self> {
        let name = kv.take("kernel").unwrap_or_else(|| "rbf".to_string());
        match name.as_str() {
            "rbf" => Ok(KernelSpec::Rbf {
                sigma: kv.require("sigma")?,
            }),
            "knn" => Ok(KernelSpec::Knn {
                k_nn: kv.require("k_nn")?,
                sigma: kv.require("sigma")?,
            }),
            "linear" => Ok(KernelSpec::Linear),
            other => Err(BenchError::config(format!("unknown kernel `{other}`"))),
        }
    }

    fn write_keys(&self, kv: &mut KeyValues) {
        match self {
            KernelSpec::Rbf { sigma } => {
                kv.set("kernel", "rbf");
                kv.set("sigma", sigma);
            }
            KernelSpec::Knn { k_nn, sigma } => {
                kv.set("kernel", "knn");
                kv.set("k_nn", k_nn);
                kv.set("sigma", sigma);
            }
            KernelSpec::Linear => kv.set("kernel", "linear"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    Uniform,
    DiagSquared,
    /// Metropolis chain on `det(Q_J)^s`; `steps` defaults to the burn-in
    /// length for the rank.
    DetMc {
        s: f64,
        steps: Option<usize>,
    },
    DetMaxRandom {
        trials: usize,
    },
    DetMaxGreedy,
}

impl MethodSpec {
    /// Deterministic methods are run once per rank.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, MethodSpec::DetMaxGreedy)
    }

    /// Stable identifier mixed into trial streams (FNV-1a of the label).
    pub fn stream_id(&self) -> u64 {
        self.to_string()
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325, |h, b| {
                (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
            })
    }

    /// Label with `:` and `=` removed, for file names.
    pub fn slug(&self) -> String {
        self.to_string().replace(':', "_").replace('=', "")
    }

    pub fn select(
        &self,
        q: &KernelMatrix,
        k: usize,
        seed: RandomSeed,
    ) -> landmark_core::Result<LandmarkSubset> {
        match *self {
            MethodSpec::Uniform => uniform_subset(q.order(), k, seed),
            MethodSpec::DiagSquared => diag_squared_subset(q, k, seed),
            MethodSpec::DetMc { s, steps } => {
                let steps = steps.unwrap_or_else(|| default_burn_in(k));
                detmc_subset(q, k, s, steps, seed).map(|(j, _)| j)
            }
            MethodSpec::DetMaxRandom { trials } => det_max_random_search(q, k, trials, seed),
            MethodSpec::DetMaxGreedy => det_max_greedy(q, k),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Uniform => write!(f, "uniform"),
            MethodSpec::DiagSquared => write!(f, "diag2"),
            MethodSpec::DetMc { s, steps: None } => write!(f, "detmc:s={s}"),
            MethodSpec::DetMc { s, steps: Some(n) } => write!(f, "detmc:s={s}:steps={n}"),
            MethodSpec::DetMaxRandom { trials } => write!(f, "detmax_random:trials={trials}"),
            MethodSpec::DetMaxGreedy => write!(f, "detmax_greedy"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = BenchError;

    fn from_str(text: &str) -> Result<Self> {
        let mut parts = text.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let mut params = BTreeMap::new();
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                BenchError::config(format!("method `{text}`: bad parameter `{part}`"))
            })?;
            params.insert(k.trim(), v.trim());
        }
        let bad = |msg: String| BenchError::config(format!("method `{text}`: {msg}"));
        let mut get = |key: &str| params.remove(key);
        let method = match name {
            "uniform" => MethodSpec::Uniform,
            "diag2" => MethodSpec::DiagSquared,
            "detmc" => {
                let s = match get("s") {
                    Some(v) => v.parse::<f64>().map_err(|e| bad(format!("s: {e}")))?,
                    None => 1.0,
                };
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(bad("s must be a finite non-negative number".into()));
                }
                let steps = get("steps")
                    .map(|v| v.parse::<usize>().map_err(|e| bad(format!("steps: {e}"))))
                    .transpose()?;
                if steps == Some(0) {
                    return Err(bad("steps must be at least 1".into()));
                }
                MethodSpec::DetMc { s, steps }
            }
            "detmax_random" => {
                let trials = match get("trials") {
                    Some(v) => v
                        .parse::<usize>()
                        .map_err(|e| bad(format!("trials: {e}")))?,
                    None => DEFAULT_DETMAX_TRIALS,
                };
                if trials == 0 {
                    return Err(bad("trials must be at least 1".into()));
                }
                MethodSpec::DetMaxRandom { trials }
            }
            "detmax_greedy" => MethodSpec::DetMaxGreedy,
            other => return Err(bad(format!("unknown method `{other}`"))),
        };
        if let Some(key) = params.keys().next() {
            return Err(bad(format!("unexpected parameter `{key}`")));
        }
        Ok(method)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub rank_min: Option<usize>,
    pub rank_max: Option<usize>,
    pub out: Option<PathBuf>,
    pub header: bool,
}

impl Overrides {
    fn apply(&self, kv: &mut KeyValues, trials_key: &str, rank_max_key: &str) {
        if let Some(v) = self.seed {
            kv.set("seed", v);
        }
        if let Some(v) = self.trials {
            kv.set(trials_key, v);
        }
        if let Some(v) = self.rank_min {
            kv.set("rank_min", v);
        }
        if let Some(v) = self.rank_max {
            kv.set(rank_max_key, v);
        }
        if let Some(v) = &self.out {
            kv.set("out", v.display());
        }
        if self.header {
            kv.set("header", true);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Ignored for datasets that are kernels already.
    pub kernel: Option<KernelSpec>,
    pub methods: Vec<MethodSpec>,
    pub rank_min: usize,
    pub rank_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub embedding_dim: usize,
    pub diffusion_time: u32,
}

impl ExperimentConfig {
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let seed = kv.take_parsed("seed")?.unwrap_or(0);
        let dataset = DatasetSpec::from_keys(&mut kv, seed)?;
        let kernel = if dataset.is_kernel() {
            if kv.take("kernel").is_some() {
                return Err(BenchError::config(format!(
                    "dataset `{}` is a kernel; remove the `kernel` key",
                    dataset.name()
                )));
            }
            None
        } else {
            Some(KernelSpec::from_keys(&mut kv)?)
        };
        let methods_text: String = kv.require("methods")?;
        let methods = methods_text
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<MethodSpec>>>()?;
        let config = ExperimentConfig {
            dataset,
            kernel,
            methods,
            rank_min: kv.require("rank_min")?,
            rank_max: kv.require("rank_max")?,
            trials: kv.take_parsed("trials")?.unwrap_or(DEFAULT_TRIALS),
            seed,
            out: kv.take("out").unwrap_or_else(|| "out".into()).into(),
            embedding_dim: kv.take_parsed("embedding_dim")?.unwrap_or(1),
            diffusion_time: kv.take_parsed("diffusion_time")?.unwrap_or(1),
        };
        kv.finish()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut kv = KeyValues::read(path)?;
        overrides.apply(&mut kv, "trials", "rank_max");
        Self::from_key_values(kv)
    }

    /// Checks that need no data. `rank_max < N` is checked once the dataset
    /// is loaded.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::config("`methods` is empty"));
        }
        if self.trials == 0 {
            return Err(BenchError::config("`trials` must be at least 1"));
        }
        if self.rank_min == 0 || self.rank_min > self.rank_max {
            return Err(BenchError::config(format!(
                "rank range {}..={} must satisfy 1 ≤ rank_min ≤ rank_max",
                self.rank_min, self.rank_max
            )));
        }
        if self.embedding_dim == 0 {
            return Err(BenchError::config("`embedding_dim` must be at least 1"));
        }
        if self.diffusion_time == 0 {
            return Err(BenchError::config("`diffusion_time` must be at least 1"));
        }
        Ok(())
    }

    pub fn check_order(&self, n: usize) -> Result<()> {
        if self.rank_max >= n {
            return Err(BenchError::config(format!(
                "rank_max = {} must be below the number of points {n}",
                self.rank_max
            )));
        }
        Ok(())
    }

    pub fn ranks(&self) -> std::ops::RangeInclusive<usize> {
        self.rank_min..=self.rank_max
    }

    /// Canonical key/value form, without the output path so that metadata
    /// does not depend on where it is written.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        self.dataset.write_keys(&mut kv);
        if let Some(kernel) = &self.kernel {
            kernel.write_keys(&mut kv);
        }
        let methods: Vec<String> = self.methods.iter().map(|m| m.to_string()).collect();
        kv.set("methods", methods.join(", "));
        kv.set("rank_min", self.rank_min);
        kv.set("rank_max", self.rank_max);
        kv.set("trials", self.trials);
        kv.set("seed", self.seed);
        kv.set("embedding_dim", self.embedding_dim);
        kv.set("diffusion_time", self.diffusion_time);
        kv
    }
}

/// Parameters of a bound-verification sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsConfig {
    pub n: usize,
    pub rank_min: usize,
    pub k_max: usize,
    pub instances: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl BoundsConfig {
    /// Keys: `n`, `k_max`, `instances`, optional `rank_min` (default 1),
    /// `seed` and `out`. `--trials` overrides `instances` and `--rank-max`
    /// overrides `k_max`.
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let config = BoundsConfig {
            n: kv.require("n")?,
            rank_min: kv.take_parsed("rank_min")?.unwrap_or(1),
            k_max: kv.require("k_max")?,
            instances: kv.require("instances")?,
            seed: kv.take_parsed("seed")?.unwrap_or(0),
            out: kv.take("out").unwrap_or_else(|| "out".into()).into(),
        };
        kv.finish()?;
        if config.instances == 0 {
            return Err(BenchError::config("`instances` must be at least 1"));
        }
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut kv = KeyValues::read(path)?;
        overrides.apply(&mut kv, "instances", "k_max");
        if overrides.header {
            return Err(BenchError::config(
                "`--header` does not apply to verify-bounds",
            ));
        }
        Self::from_key_values(kv)
    }
}
