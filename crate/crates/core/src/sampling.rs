//! Landmark selection: uniform and squared-diagonal sampling, annealed
//! determinantal sampling by a Metropolis chain, determinant maximization,
//! and exhaustive enumeration oracles for small kernels.
//!
//! The annealed determinantal distribution on k-subsets is
//! `p^s(J) ∝ det(Q_J)^s`. At `s = 0` it is uniform; as `s` grows it
//! concentrates on the determinant maximizers. All determinant comparisons
//! are made in the log domain.

use std::collections::HashMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{parameter, Error, Result};
use crate::linalg::{cholesky_logdet_in_place, tridiagonal_logdet, KernelMatrix, PIVOT_RTOL};
use crate::nystrom::nystrom_error_trace;
use crate::subset::LandmarkSubset;

/// Upper limit on the number of subsets an exhaustive oracle will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Re-draws allowed when a chain starts on a zero-determinant subset.
pub const MAX_INIT_ATTEMPTS: usize = 100;

/// Thinning interval for sample streams drawn from one chain.
pub const DEFAULT_THINNING: usize = 5;

/// Burn-in used for sample streams: `max(10k, 500)` steps.
pub fn default_burn_in(k: usize) -> usize {
    (10 * k).max(500)
}

/// A 64-bit seed plus a stream index. Equal pairs give bit-identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomSeed {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSeed {
    pub fn new(seed: u64) -> Self {
        RandomSeed { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        RandomSeed { stream, ..self }
    }

    /// A stream index derived by hashing `parts` into the current stream,
    /// so distinct labels get independent generators.
    pub fn derive(self, parts: &[u64]) -> Self {
        let stream = parts.iter().fold(splitmix64(self.stream), |acc, &p| {
            splitmix64(acc ^ splitmix64(p))
        });
        self.with_stream(stream)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `C(n, k)`, exact.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_rank(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(parameter("k", format!("must lie in 1..{n}, got {k}")));
    }
    Ok(())
}

/// Uniform k-subset of `0..n` by a partial Fisher–Yates shuffle.
pub fn uniform_subset(n: usize, k: usize, seed: RandomSeed) -> Result<LandmarkSubset> {
    check_rank(n, k)?;
    Ok(uniform_subset_with(n, k, &mut seed.rng()))
}

pub(crate) fn uniform_subset_with<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> LandmarkSubset {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    LandmarkSubset::new(pool, n).expect("distinct indices below n")
}

/// Sequential draws without replacement with probability proportional to
/// `Q_ii²` among the indices not yet chosen.
pub fn diag_squared_subset(q: &KernelMatrix, k: usize, seed: RandomSeed) -> Result<LandmarkSubset> {
    let n = q.order();
    check_rank(n, k)?;
    let mut weights: Vec<f64> = q.diagonal().iter().map(|d| d * d).collect();
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive < k {
        return Err(Error::DegenerateWeights {
            positive,
            requested: k,
        });
    }
    let mut rng = seed.rng();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // fall back to the last positive weight if rounding overshoots
        let mut pick = weights
            .iter()
            .rposition(|&w| w > 0.0)
            .expect("positive weight remains");
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if w > 0.0 && target < acc {
                pick = i;
                break;
            }
        }
        chosen.push(pick);
        weights[pick] = 0.0;
    }
    LandmarkSubset::new(chosen, n)
}

/// Backend used for `log det(Q_J)` inside the Metropolis acceptance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogDetBackend {
    /// Cholesky factorization; the chain targets `p^s` exactly.
    #[default]
    Exact,
    /// Continuant of the tridiagonal part of `Q_J` (indices increasing).
    /// The chain then targets that surrogate, not `p^s`.
    Tridiagonal,
}

/// Scratch space for repeated principal-submatrix log-determinants.
struct LogDetWorkspace {
    buffer: Vec<f64>,
    sorted: Vec<usize>,
}

impl LogDetWorkspace {
    fn new(k: usize) -> Self {
        LogDetWorkspace {
            buffer: vec![0.0; k * k],
            sorted: Vec::with_capacity(k),
        }
    }

    fn logdet(&mut self, q: &KernelMatrix, indices: &[usize], backend: LogDetBackend) -> f64 {
        let k = indices.len();
        match backend {
            LogDetBackend::Exact => {
                self.buffer.resize(k * k, 0.0);
                let m = q.as_matrix();
                for (a, &i) in indices.iter().enumerate() {
                    for (b, &j) in indices.iter().enumerate() {
                        self.buffer[a * k + b] = m[(i, j)];
                    }
                }
                cholesky_logdet_in_place(&mut self.buffer, k)
            }
            LogDetBackend::Tridiagonal => {
                self.sorted.clear();
                self.sorted.extend_from_slice(indices);
                self.sorted.sort_unstable();
                let diag: Vec<f64> = self.sorted.iter().map(|&i| q.get(i, i)).collect();
                let off: Vec<f64> = self.sorted.windows(2).map(|w| q.get(w[0], w[1])).collect();
                tridiagonal_logdet(&diag, &off)
            }
        }
    }
}

/// `log det(Q_J)`, `-∞` for numerically singular blocks.
pub fn subset_logdet(q: &KernelMatrix, subset: &LandmarkSubset) -> f64 {
    LogDetWorkspace::new(subset.len()).logdet(q, subset.indices(), LogDetBackend::Exact)
}

/// Exactly normalized `p^s` over all k-subsets, in lexicographic order.
#[derive(Debug, Clone)]
pub struct SubsetDistribution {
    entries: Vec<(LandmarkSubset, f64)>,
}

impl SubsetDistribution {
    pub fn entries(&self) -> &[(LandmarkSubset, f64)] {
        &self.entries
    }

    pub fn probability(&self, subset: &LandmarkSubset) -> f64 {
        self.entries
            .binary_search_by(|(s, _)| s.cmp(subset))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Total-variation distance to the empirical distribution of `samples`.
    pub fn total_variation(&self, samples: &[LandmarkSubset]) -> f64 {
        let mut counts: HashMap<&LandmarkSubset, usize> = HashMap::new();
        for s in samples {
            *counts.entry(s).or_default() += 1;
        }
        let total = samples.len() as f64;
        let mut tv = 0.0;
        for (subset, p) in &self.entries {
            let freq = counts.remove(subset).unwrap_or(0) as f64 / total;
            tv += (freq - p).abs();
        }
        // samples outside the support
        tv += counts.values().map(|&c| c as f64 / total).sum::<f64>();
        0.5 * tv
    }
}

/// The annealed determinantal distribution `p^s(J) ∝ det(Q_J)^s` on
/// k-subsets of a kernel.
#[derive(Debug, Clone, Copy)]
pub struct AnnealedDistribution<'a> {
    kernel: &'a KernelMatrix,
    k: usize,
    s: f64,
}

impl<'a> AnnealedDistribution<'a> {
    pub fn new(kernel: &'a KernelMatrix, k: usize, s: f64) -> Result<Self> {
        if k == 0 || k > kernel.order() {
            return Err(parameter(
                "k",
                format!("must lie in 1..={}, got {k}", kernel.order()),
            ));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(parameter(
                "s",
                format!("must be nonnegative and finite, got {s}"),
            ));
        }
        Ok(AnnealedDistribution { kernel, k, s })
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    /// Unnormalized `s · log det(Q_J)`; zero for every subset when `s = 0`.
    pub fn log_weight(&self, subset: &LandmarkSubset) -> f64 {
        if self.s == 0.0 {
            0.0
        } else {
            self.s * subset_logdet(self.kernel, subset)
        }
    }

    /// Visits every k-subset and normalizes in the log domain.
    pub fn enumerate(&self) -> Result<SubsetDistribution> {
        let n = self.kernel.order();
        let count = binomial(n, self.k);
        if count > ENUMERATION_LIMIT {
            return Err(Error::TooManySubsets {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut workspace = LogDetWorkspace::new(self.k);
        let mut entries = Vec::with_capacity(count as usize);
        for combo in (0..n).combinations(self.k) {
            let weight = if self.s == 0.0 {
                0.0
            } else {
                self.s * workspace.logdet(self.kernel, &combo, LogDetBackend::Exact)
            };
            entries.push((LandmarkSubset::new(combo, n)?, weight));
        }
        let max = entries
            .iter()
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateDistribution { k: self.k });
        }
        let normalizer: f64 = entries.iter().map(|e| (e.1 - max).exp()).sum();
        for e in &mut entries {
            e.1 = (e.1 - max).exp() / normalizer;
        }
        Ok(SubsetDistribution { entries })
    }
}

pub fn exact_subset_distribution(q: &KernelMatrix, k: usize, s: f64) -> Result<SubsetDistribution> {
    AnnealedDistribution::new(q, k, s)?.enumerate()
}

/// Counters reported by a Metropolis run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerDiagnostics {
    pub steps: usize,
    pub accepted: usize,
    /// `accepted / steps`, zero before the first step.
    pub acceptance_rate: f64,
    /// `log det` of the final state under the active backend.
    pub final_logdet: f64,
    /// Which log-determinant the chain's stationary law is built on.
    pub target: LogDetBackend,
}

/// Metropolis chain on k-subsets targeting `p^s`.
///
/// Each step swaps one uniformly chosen member with one uniformly chosen
/// non-member. The proposal is symmetric, so the acceptance probability is
/// `min(1, (det Q_J' / det Q_J)^s)`. Singular proposals are rejected and a
/// singular current state accepts any nonsingular proposal; at `s = 0`
/// every proposal is accepted.
pub struct MetropolisChain<'a> {
    kernel: &'a KernelMatrix,
    s: f64,
    backend: LogDetBackend,
    rng: ChaCha8Rng,
    members: Vec<usize>,
    outsiders: Vec<usize>,
    logdet: f64,
    steps: usize,
    accepted: usize,
    workspace: LogDetWorkspace,
}

impl<'a> MetropolisChain<'a> {
    /// Starts from a uniform subset, re-drawing a zero-determinant start up
    /// to `MAX_INIT_ATTEMPTS` times when `s > 0`.
    pub fn new(
        kernel: &'a KernelMatrix,
        k: usize,
        s: f64,
        backend: LogDetBackend,
        seed: RandomSeed,
    ) -> Result<Self> {
        let n = kernel.order();
        check_rank(n, k)?;
        AnnealedDistribution::new(kernel, k, s)?;
        let mut rng = seed.rng();
        let mut workspace = LogDetWorkspace::new(k);
        let mut attempts = 0;
        let (members, logdet) = loop {
            let start = uniform_subset_with(n, k, &mut rng);
            attempts += 1;
            let logdet = workspace.logdet(kernel, start.indices(), backend);
            if s == 0.0 || logdet.is_finite() {
                break (start.indices().to_vec(), logdet);
            }
            if attempts >= MAX_INIT_ATTEMPTS {
                return Err(Error::SamplerInit { attempts });
            }
        };
        let outsiders = (0..n).filter(|i| !members.contains(i)).collect();
        Ok(MetropolisChain {
            kernel,
            s,
            backend,
            rng,
            members,
            outsiders,
            logdet,
            steps: 0,
            accepted: 0,
            workspace,
        })
    }

    /// One proposal; returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        let a = self.rng.random_range(0..self.members.len());
        let b = self.rng.random_range(0..self.outsiders.len());
        self.steps += 1;

        std::mem::swap(&mut self.members[a], &mut self.outsiders[b]);
        let accept = if self.s == 0.0 {
            true
        } else {
            let proposal = self
                .workspace
                .logdet(self.kernel, &self.members, self.backend);
            let accept = if proposal == f64::NEG_INFINITY {
                false
            } else if self.logdet == f64::NEG_INFINITY {
                true
            } else {
                let log_ratio = self.s * (proposal - self.logdet);
                log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp()
            };
            if accept {
                self.logdet = proposal;
            }
            accept
        };
        if accept {
            self.accepted += 1;
        } else {
            std::mem::swap(&mut self.members[a], &mut self.outsiders[b]);
        }
        accept
    }

    pub fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn state(&self) -> LandmarkSubset {
        LandmarkSubset::new(self.members.clone(), self.kernel.order())
            .expect("chain state is valid")
    }

    pub fn diagnostics(&self) -> SamplerDiagnostics {
        let logdet = if self.s == 0.0 {
            let mut ws = LogDetWorkspace::new(self.members.len());
            ws.logdet(self.kernel, &self.members, self.backend)
        } else {
            self.logdet
        };
        SamplerDiagnostics {
            steps: self.steps,
            accepted: self.accepted,
            acceptance_rate: if self.steps == 0 {
                0.0
            } else {
                self.accepted as f64 / self.steps as f64
            },
            final_logdet: logdet,
            target: self.backend,
        }
    }

    /// `count` states taken every `thinning` steps after `burn_in` steps.
    pub fn samples(
        &mut self,
        count: usize,
        burn_in: usize,
        thinning: usize,
    ) -> Vec<LandmarkSubset> {
        self.run(burn_in);
        (0..count)
            .map(|_| {
                self.run(thinning.max(1));
                self.state()
            })
            .collect()
    }
}

/// Runs a fresh chain for `steps` steps and returns its final state.
pub fn detmc_subset(
    q: &KernelMatrix,
    k: usize,
    s: f64,
    steps: usize,
    seed: RandomSeed,
) -> Result<(LandmarkSubset, SamplerDiagnostics)> {
    detmc_subset_with_backend(q, k, s, steps, seed, LogDetBackend::Exact)
}

pub fn detmc_subset_with_backend(
    q: &KernelMatrix,
    k: usize,
    s: f64,
    steps: usize,
    seed: RandomSeed,
    backend: LogDetBackend,
) -> Result<(LandmarkSubset, SamplerDiagnostics)> {
    if steps == 0 {
        return Err(parameter("steps", "must be at least 1"));
    }
    let mut chain = MetropolisChain::new(q, k, s, backend, seed)?;
    chain.run(steps);
    Ok((chain.state(), chain.diagnostics()))
}

/// Best of `trials` uniform subsets by `det(Q_J)`; the first one found wins
/// ties. With `trials = 1` this is exactly [`uniform_subset`].
pub fn det_max_random_search(
    q: &KernelMatrix,
    k: usize,
    trials: usize,
    seed: RandomSeed,
) -> Result<LandmarkSubset> {
    let n = q.order();
    check_rank(n, k)?;
    if trials == 0 {
        return Err(parameter("trials", "must be at least 1"));
    }
    let mut rng = seed.rng();
    let mut workspace = LogDetWorkspace::new(k);
    let mut best: Option<(LandmarkSubset, f64)> = None;
    for _ in 0..trials {
        let candidate = uniform_subset_with(n, k, &mut rng);
        let logdet = workspace.logdet(q, candidate.indices(), LogDetBackend::Exact);
        if best.as_ref().is_none_or(|(_, b)| logdet > *b) {
            best = Some((candidate, logdet));
        }
    }
    Ok(best.expect("at least one trial").0)
}

/// Greedy determinant maximization: each step adds the index with the
/// largest residual diagonal (the Schur-complement diagonal given the
/// current selection), which maximizes the grown determinant. Ties go to
/// the lowest index.
pub fn det_max_greedy(q: &KernelMatrix, k: usize) -> Result<LandmarkSubset> {
    let n = q.order();
    check_rank(n, k)?;
    let mut residual = q.diagonal();
    let threshold = PIVOT_RTOL * residual.iter().copied().fold(0.0, f64::max);
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for step in 0..k {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if selected.contains(&i) {
                continue;
            }
            if pick.is_none_or(|p| residual[i] > residual[p]) {
                pick = Some(i);
            }
        }
        let pick = pick.expect("k < n leaves candidates");
        let pivot = residual[pick];
        if !(pivot > threshold && pivot > 0.0) {
            return Err(Error::RankExhausted {
                achieved: step,
                requested: k,
            });
        }
        let root = pivot.sqrt();
        let column: Vec<f64> = (0..n)
            .map(|j| {
                let dot: f64 = factors.iter().map(|f| f[j] * f[pick]).sum();
                (q.get(j, pick) - dot) / root
            })
            .collect();
        for j in 0..n {
            residual[j] -= column[j] * column[j];
        }
        selected.push(pick);
        factors.push(column);
    }
    LandmarkSubset::new(selected, n)
}

/// The k-subset of largest `det(Q_J)` by enumeration, with its log
/// determinant. Ties go to the lexicographically first subset.
pub fn exhaustive_max_det_subset(q: &KernelMatrix, k: usize) -> Result<(LandmarkSubset, f64)> {
    let n = q.order();
    if k == 0 || k > n {
        return Err(parameter("k", format!("must lie in 1..={n}, got {k}")));
    }
    let count = binomial(n, k);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooManySubsets {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut workspace = LogDetWorkspace::new(k);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for combo in (0..n).combinations(k) {
        let logdet = workspace.logdet(q, &combo, LogDetBackend::Exact);
        if best.as_ref().is_none_or(|(_, b)| logdet > *b) {
            best = Some((combo, logdet));
        }
    }
    let (indices, logdet) = best.expect("at least one subset");
    Ok((LandmarkSubset::new(indices, n)?, logdet))
}

/// `E_{J ~ p^s} ‖Q − Q̃_J‖_tr` by enumeration.
pub fn expected_error_exact(q: &KernelMatrix, k: usize, s: f64) -> Result<f64> {
    let distribution = exact_subset_distribution(q, k, s)?;
    distribution
        .entries()
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .try_fold(0.0, |acc, (subset, p)| {
            Ok(acc + p * nystrom_error_trace(q, subset)?)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{logdet_psd, SymmetricMatrix};
    use crate::synthetic;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn seed(s: u64) -> RandomSeed {
        RandomSeed::new(s)
    }

    #[test]
    fn seeds_are_reproducible_and_streams_differ() {
        let a: Vec<u64> = (0..4).map(|_| seed(1).rng().random()).collect();
        let b: Vec<u64> = (0..4).map(|_| seed(1).rng().random()).collect();
        assert_eq!(a, b);
        let x: u64 = seed(1).with_stream(1).rng().random();
        let y: u64 = seed(1).with_stream(2).rng().random();
        assert_ne!(x, y);
        assert_eq!(seed(3).derive(&[1, 2]), seed(3).derive(&[1, 2]));
        assert_ne!(seed(3).derive(&[1, 2]), seed(3).derive(&[2, 1]));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn uniform_two_outcomes() {
        let draws = 10_000;
        let zeros = (0..draws)
            .filter(|&t| {
                uniform_subset(2, 1, seed(5).with_stream(t))
                    .unwrap()
                    .indices()
                    == [0]
            })
            .count();
        // ±5σ for Binomial(10⁴, 1/2)
        assert!((zeros as f64 - 5000.0).abs() <= 5.0 * 50.0, "{zeros}");
    }

    #[test]
    fn uniform_leave_one_out_is_balanced() {
        let draws = 20_000u64;
        let mut counts = [0usize; 5];
        for t in 0..draws {
            let s = uniform_subset(5, 4, seed(8).with_stream(t)).unwrap();
            counts[s.complement()[0]] += 1;
        }
        let expected = draws as f64 / 5.0;
        let sd = (draws as f64 * 0.2 * 0.8).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() <= 5.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn uniform_is_deterministic_and_validates() {
        assert_eq!(
            uniform_subset(20, 6, seed(9)).unwrap(),
            uniform_subset(20, 6, seed(9)).unwrap()
        );
        assert!(uniform_subset(5, 0, seed(1)).is_err());
        assert!(uniform_subset(5, 5, seed(1)).is_err());
    }

    #[test]
    fn diag_squared_equal_weights_is_uniform() {
        let q = KernelMatrix::from_diagonal(&[2.0; 5]).unwrap();
        let draws = 20_000u64;
        let mut counts: HashMap<LandmarkSubset, usize> = HashMap::new();
        for t in 0..draws {
            *counts
                .entry(diag_squared_subset(&q, 2, seed(4).with_stream(t)).unwrap())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, 99.9% quantile ≈ 27.88
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn diag_squared_single_positive_weight() {
        let q = KernelMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for t in 0..50 {
            assert_eq!(diag_squared_subset(&q, 1, seed(t)).unwrap().indices(), &[0]);
        }
        assert_eq!(
            diag_squared_subset(&q, 2, seed(0)),
            Err(Error::DegenerateWeights {
                positive: 1,
                requested: 2
            })
        );
    }

    #[test]
    fn diag_squared_matches_enumerated_draw_sequences() {
        let diag = [1.0, 2.0, 3.0, 4.0];
        let q = KernelMatrix::from_diagonal(&diag).unwrap();
        let w: Vec<f64> = diag.iter().map(|d| d * d).collect();
        let total: f64 = w.iter().sum();
        // P({a,b}) = P(a then b) + P(b then a)
        let mut exact = HashMap::new();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let p = w[a] / total * w[b] / (total - w[a]) + w[b] / total * w[a] / (total - w[b]);
                exact.insert(vec![a, b], p);
            }
        }
        let draws = 50_000u64;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for t in 0..draws {
            let s = diag_squared_subset(&q, 2, seed(12).with_stream(t)).unwrap();
            *counts.entry(s.indices().to_vec()).or_default() += 1;
        }
        for (subset, p) in exact {
            let freq = *counts.get(&subset).unwrap_or(&0) as f64 / draws as f64;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 5.0 * sd, "{subset:?}: {freq} vs {p}");
        }
    }

    #[test]
    fn exact_distribution_uniform_at_zero() {
        let mut rng = seed(2).rng();
        let q = synthetic::random_psd(6, 2, &mut rng);
        let d = exact_subset_distribution(&q, 3, 0.0).unwrap();
        assert_eq!(d.entries().len(), 20);
        for (_, p) in d.entries() {
            assert_relative_eq!(*p, 1.0 / 20.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn exact_distribution_diagonal_example() {
        let q = KernelMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let d = exact_subset_distribution(&q, 2, 1.0).unwrap();
        let want = [2.0 / 11.0, 3.0 / 11.0, 6.0 / 11.0];
        for ((_, p), w) in d.entries().iter().zip(want) {
            assert_relative_eq!(*p, w, epsilon = 1e-14);
        }
        let total: f64 = d.entries().iter().map(|e| e.1).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_distribution_zeroes_singular_subsets() {
        // points 0 and 1 coincide in a rank-2 Gram kernel
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.3, 0.0, 0.0, 1.0, 0.9]);
        let q = KernelMatrix::from_matrix(x.transpose() * x).unwrap();
        let d = exact_subset_distribution(&q, 2, 0.5).unwrap();
        let singular = LandmarkSubset::new(vec![0, 1], 4).unwrap();
        assert_eq!(d.probability(&singular), 0.0);
        let d3 = exact_subset_distribution(&q, 3, 1.0);
        assert_eq!(d3.unwrap_err(), Error::DegenerateDistribution { k: 3 });
    }

    #[test]
    fn enumeration_guard() {
        let q = KernelMatrix::from_diagonal(&vec![1.0; 40]).unwrap();
        assert!(matches!(
            exact_subset_distribution(&q, 20, 1.0),
            Err(Error::TooManySubsets { .. })
        ));
    }

    #[test]
    fn subset_logdet_matches_dense() {
        let mut rng = seed(6).rng();
        let q = synthetic::random_psd(8, 8, &mut rng);
        let s = LandmarkSubset::new(vec![1, 3, 6], 8).unwrap();
        assert_relative_eq!(
            subset_logdet(&q, &s),
            logdet_psd(&q.principal_submatrix(s.indices())),
            epsilon = 1e-14
        );
    }

    #[test]
    fn chain_at_zero_accepts_everything_and_is_uniform() {
        let mut rng = seed(10).rng();
        let q = synthetic::random_psd(6, 6, &mut rng);
        let mut chain = MetropolisChain::new(&q, 2, 0.0, LogDetBackend::Exact, seed(3)).unwrap();
        let samples = chain.samples(200_000, 500, 1);
        let d = chain.diagnostics();
        assert_eq!(d.accepted, d.steps);
        assert_eq!(d.acceptance_rate, 1.0);
        let exact = exact_subset_distribution(&q, 2, 0.0).unwrap();
        let tv = exact.total_variation(&samples);
        assert!(tv <= 0.05, "tv {tv}");
    }

    #[test]
    fn chain_matches_diagonal_example() {
        let q = KernelMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let mut chain = MetropolisChain::new(&q, 2, 1.0, LogDetBackend::Exact, seed(17)).unwrap();
        let samples = chain.samples(100_000, default_burn_in(2), DEFAULT_THINNING);
        let exact = exact_subset_distribution(&q, 2, 1.0).unwrap();
        let tv = exact.total_variation(&samples);
        assert!(tv <= 0.02, "tv {tv}");
        let d = chain.diagnostics();
        assert_eq!(d.acceptance_rate, d.accepted as f64 / d.steps as f64);
    }

    #[test]
    fn chain_never_selects_singular_subsets_on_low_rank_kernel() {
        // rank 2 with a duplicated column so some 2-subsets are singular
        let x =
            DMatrix::from_row_slice(2, 5, &[1.0, 1.0, 0.2, -0.5, 0.7, 0.3, 0.3, 1.0, 0.8, -0.4]);
        let q = KernelMatrix::from_matrix(x.transpose() * x).unwrap();
        for t in 0..200 {
            let (s, d) = detmc_subset(&q, 2, 1.0, 50, seed(t)).unwrap();
            assert!(subset_logdet(&q, &s).is_finite());
            assert!(d.final_logdet.is_finite());
            assert_ne!(s.indices(), &[0, 1]);
        }
    }

    #[test]
    fn chain_init_fails_without_nonsingular_subsets() {
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let q = KernelMatrix::from_matrix(x.transpose() * x).unwrap();
        assert_eq!(
            detmc_subset(&q, 2, 1.0, 10, seed(0)).unwrap_err(),
            Error::SamplerInit {
                attempts: MAX_INIT_ATTEMPTS
            }
        );
        assert!(detmc_subset(&q, 2, 0.0, 10, seed(0)).is_ok());
        assert!(detmc_subset(&q, 2, 1.0, 0, seed(0)).is_err());
    }

    #[test]
    fn tridiagonal_backend_targets_surrogate() {
        let mut rng = seed(13).rng();
        let q = synthetic::random_psd(6, 6, &mut rng);
        let (s, d) =
            detmc_subset_with_backend(&q, 3, 1.0, 200, seed(1), LogDetBackend::Tridiagonal)
                .unwrap();
        assert_eq!(d.target, LogDetBackend::Tridiagonal);
        let sub = q.principal_submatrix(s.indices());
        assert_relative_eq!(
            d.final_logdet,
            crate::linalg::tridiagonal_logdet_approx(&sub),
            epsilon = 1e-12
        );
    }

    #[test]
    fn random_search_finds_global_max_when_covering() {
        let mut rng = seed(21).rng();
        let q = synthetic::random_psd(6, 6, &mut rng);
        let (best, _) = exhaustive_max_det_subset(&q, 2).unwrap();
        let found = det_max_random_search(&q, 2, 500, seed(2)).unwrap();
        assert_eq!(found, best);
    }

    #[test]
    fn random_search_on_diagonal_picks_largest_entries() {
        let q = KernelMatrix::from_diagonal(&[0.5, 4.0, 1.0, 3.0, 2.0]).unwrap();
        let found = det_max_random_search(&q, 2, 400, seed(7)).unwrap();
        assert_eq!(found.indices(), &[1, 3]);
    }

    #[test]
    fn random_search_single_trial_is_uniform_subset() {
        let mut rng = seed(1).rng();
        let q = synthetic::random_psd(9, 9, &mut rng);
        for t in 0..20 {
            assert_eq!(
                det_max_random_search(&q, 4, 1, seed(t)).unwrap(),
                uniform_subset(9, 4, seed(t)).unwrap()
            );
        }
    }

    #[test]
    fn greedy_examples() {
        let q = KernelMatrix::from_diagonal(&[0.5, 4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(det_max_greedy(&q, 3).unwrap().indices(), &[1, 3, 4]);

        let x = DMatrix::from_row_slice(1, 4, &[1.0, -2.0, 0.5, 1.5]);
        let rank_one = KernelMatrix::from_matrix(x.transpose() * x).unwrap();
        assert_eq!(
            det_max_greedy(&rank_one, 2).unwrap_err(),
            Error::RankExhausted {
                achieved: 1,
                requested: 2
            }
        );

        let mut rng = seed(4).rng();
        for _ in 0..10 {
            let q = synthetic::random_psd(7, 7, &mut rng);
            let greedy = det_max_greedy(&q, 3).unwrap();
            let (_, best) = exhaustive_max_det_subset(&q, 3).unwrap();
            assert!(subset_logdet(&q, &greedy) <= best + 1e-12);
        }
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let q = KernelMatrix::new(SymmetricMatrix::identity(4)).unwrap();
        assert_eq!(det_max_greedy(&q, 2).unwrap().indices(), &[0, 1]);
    }

    #[test]
    fn expected_error_examples() {
        let diag = [1.0, 2.0, 3.0, 4.0, 5.0];
        let q = KernelMatrix::from_diagonal(&diag).unwrap();
        for k in 1..5 {
            let got = expected_error_exact(&q, k, 0.0).unwrap();
            let want = (5 - k) as f64 / 5.0 * q.trace();
            assert_relative_eq!(got, want, epsilon = 1e-10);
        }

        let mut rng = seed(30).rng();
        let low = synthetic::random_psd(8, 3, &mut rng);
        assert!(expected_error_exact(&low, 3, 1.0).unwrap() <= 1e-10 * low.trace());

        let q = synthetic::random_psd(10, 10, &mut rng);
        let spectrum = crate::linalg::eigh(q.as_symmetric()).unwrap();
        for k in 1..5 {
            let got = expected_error_exact(&q, k, 1.0).unwrap();
            let bound = (k + 1) as f64 * spectrum.tail_sum(k);
            assert!(got <= bound + 1e-10);
        }
    }

    #[test]
    fn annealing_sharpens_the_mode() {
        let mut rng = seed(44).rng();
        let q = synthetic::random_psd(7, 7, &mut rng);
        let (mode, _) = exhaustive_max_det_subset(&q, 3).unwrap();
        let mut last = 0.0;
        for s in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let p = exact_subset_distribution(&q, 3, s)
                .unwrap()
                .probability(&mode);
            assert!(p >= last - 1e-15, "s = {s}: {p} < {last}");
            last = p;
        }
    }

    #[test]
    fn parameter_validation() {
        let q = KernelMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        assert!(AnnealedDistribution::new(&q, 1, -1.0).is_err());
        assert!(AnnealedDistribution::new(&q, 3, 1.0).is_err());
        assert!(det_max_random_search(&q, 1, 0, seed(0)).is_err());
    }
}
