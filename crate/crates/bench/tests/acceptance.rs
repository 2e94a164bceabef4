//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its time budget.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use landmark_bench::config::MethodSpec;
use landmark_bench::config::{ExperimentConfig, KeyValues};
use landmark_bench::curve::error_curve_for_kernel;
use landmark_bench::embed::{embedding_study, median};
use landmark_core::embeddings::{fishbowl, DiffusionKernel};
use landmark_core::kernels::{
    combinatorial_laplacian, knn_graph_kernel, markov_matrix, rbf_kernel,
};
use landmark_core::linalg::{eigh, trace_norm};
use landmark_core::nystrom::{
    nystrom_error_trace, nystrom_extend, optimal_rank_k_error, reconstruct,
};
use landmark_core::sampling::{
    det_max_greedy, exact_subset_distribution, exhaustive_max_det_subset, expected_error_exact,
    subset_logdet, uniform_subset, LogDetBackend, MetropolisChain, DEFAULT_THINNING,
};
use landmark_core::synthetic::{gaussian_matrix, random_diagonal_psd, random_psd};
use landmark_core::{KernelMatrix, PointCloud, RandomSeed};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Kernels of the bound sweeps: per order, three dense, two diagonal, and
/// for each rank two kernels of exactly that rank.
struct SweepInstance {
    q: KernelMatrix,
    diagonal: bool,
    /// Ranks at which the instance is checked.
    ranks: Vec<usize>,
}

fn bound_sweep() -> Vec<SweepInstance> {
    let mut out = Vec::new();
    for n in 3..=12usize {
        let all: Vec<usize> = (1..n).collect();
        for i in 0..3u64 {
            let mut rng = RandomSeed::new(300).derive(&[n as u64, i]).rng();
            out.push(SweepInstance {
                q: random_psd(n, n, &mut rng),
                diagonal: false,
                ranks: all.clone(),
            });
        }
        for i in 0..2u64 {
            let mut rng = RandomSeed::new(301).derive(&[n as u64, i]).rng();
            out.push(SweepInstance {
                q: random_diagonal_psd(n, &mut rng),
                diagonal: true,
                ranks: all.clone(),
            });
        }
        for k in 1..n {
            for i in 0..2u64 {
                let mut rng = RandomSeed::new(302).derive(&[n as u64, k as u64, i]).rng();
                out.push(SweepInstance {
                    q: random_psd(n, k, &mut rng),
                    diagonal: false,
                    ranks: vec![k],
                });
            }
        }
    }
    out
}

fn nystrom_error_identity() -> Check {
    let mut rng = RandomSeed::new(1).rng();
    let mut worst: f64 = 0.0;
    for case in 0..200u64 {
        let n = rng.random_range(2..=30usize);
        let k = rng.random_range(1..=5usize).min(n - 1);
        // rank above k keeps the error away from zero, where a relative
        // comparison has no meaning
        let rank = rng.random_range(k + 1..=n);
        let q = random_psd(n, rank, &mut RandomSeed::new(10).with_stream(case).rng());
        let j = uniform_subset(n, k, RandomSeed::new(11).with_stream(case))
            .map_err(|e| e.to_string())?;
        let fast = nystrom_error_trace(&q, &j).map_err(|e| e.to_string())?;
        let approx = nystrom_extend(&q, &j).map_err(|e| e.to_string())?;
        let dense = trace_norm(
            &(q.as_matrix() - reconstruct(&approx).map_err(|e| e.to_string())?.as_matrix()),
        );
        let rel = (fast - dense).abs() / dense;
        worst = worst.max(rel);
    }
    ensure(
        worst <= 1e-8,
        format!("200 kernels, worst relative gap {worst:.2e}"),
    )
}

fn perfect_reconstruction() -> Check {
    let (n, k) = (50, 5);
    let mut worst: f64 = 0.0;
    let mut subsets = 0;
    for case in 0..50u64 {
        let q = random_psd(n, k, &mut RandomSeed::new(20).with_stream(case).rng());
        let mut candidates = vec![det_max_greedy(&q, k).map_err(|e| e.to_string())?];
        for t in 0..20 {
            candidates.push(
                uniform_subset(n, k, RandomSeed::new(21).derive(&[case, t]))
                    .map_err(|e| e.to_string())?,
            );
        }
        for j in candidates
            .iter()
            .filter(|j| subset_logdet(&q, j).is_finite())
        {
            let err = nystrom_error_trace(&q, j).map_err(|e| e.to_string())?;
            worst = worst.max(err / q.trace());
            subsets += 1;
        }
    }
    ensure(
        worst <= 1e-8 && subsets >= 50 * 21 * 9 / 10,
        format!("{subsets} nonsingular subsets, worst error/tr(Q) {worst:.2e}"),
    )
}

fn uniform_bound(sweep: &[SweepInstance]) -> Check {
    let (mut checked, mut worst_slack, mut worst_tight) = (0, f64::INFINITY, 0.0f64);
    for inst in sweep.iter().filter(|i| i.ranks.len() > 1) {
        let n = inst.q.order();
        for &k in &inst.ranks {
            let e = expected_error_exact(&inst.q, k, 0.0).map_err(|e| e.to_string())?;
            let bound = (n - k) as f64 / n as f64 * inst.q.trace();
            worst_slack = worst_slack.min(bound - e);
            if inst.diagonal {
                worst_tight = worst_tight.max((bound - e).abs());
            }
            checked += 1;
        }
    }
    ensure(
        worst_slack >= -1e-10 && worst_tight <= 1e-10,
        format!("{checked} (Q, k) pairs, min slack {worst_slack:.2e}, diagonal max |slack| {worst_tight:.2e}"),
    )
}

fn determinantal_bound(sweep: &[SweepInstance]) -> Check {
    let (mut checked, mut worst) = (0, f64::INFINITY);
    for inst in sweep {
        for &k in &inst.ranks {
            let e = expected_error_exact(&inst.q, k, 1.0).map_err(|e| e.to_string())?;
            let bound =
                (k + 1) as f64 * optimal_rank_k_error(&inst.q, k).map_err(|e| e.to_string())?;
            worst = worst.min(bound + 1e-10 - e);
            checked += 1;
        }
    }
    ensure(
        worst >= 0.0,
        format!("{checked} (Q, k) pairs, min slack {:.2e}", worst - 1e-10),
    )
}

fn det_max_bound(sweep: &[SweepInstance]) -> Check {
    let (mut checked, mut worst) = (0, f64::INFINITY);
    for inst in sweep {
        let n = inst.q.order();
        let lambda = eigh(inst.q.as_symmetric())
            .map_err(|e| e.to_string())?
            .eigenvalues;
        for &k in &inst.ranks {
            let (j, _) = exhaustive_max_det_subset(&inst.q, k).map_err(|e| e.to_string())?;
            let err = nystrom_error_trace(&inst.q, &j).map_err(|e| e.to_string())?;
            let bound = ((k + 1) * (n - k)) as f64 * lambda[k].max(0.0);
            worst = worst.min(bound + 1e-10 - err);
            checked += 1;
        }
    }
    ensure(
        worst >= 0.0,
        format!("{checked} (Q, k) pairs, min slack {:.2e}", worst - 1e-10),
    )
}

fn sampler_fidelity() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (case, s) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let q = random_psd(
            8,
            8,
            &mut RandomSeed::new(60).with_stream(case as u64).rng(),
        );
        let exact = exact_subset_distribution(&q, 3, s).map_err(|e| e.to_string())?;
        let seed = RandomSeed::new(61).with_stream(case as u64);
        let mut chain = MetropolisChain::new(&q, 3, s, LogDetBackend::Exact, seed)
            .map_err(|e| e.to_string())?;
        let samples = chain.samples(
            100_000,
            landmark_core::sampling::default_burn_in(3),
            DEFAULT_THINNING,
        );
        let tv = exact.total_variation(&samples);
        ok &= tv <= 0.05;
        parts.push(format!("s={s}: TV {tv:.4}"));
    }
    ensure(ok, parts.join(", "))
}

fn fishbowl_ordering() -> Check {
    let x = fishbowl(200, 0.7, RandomSeed::new(1)).map_err(|e| e.to_string())?;
    let q = rbf_kernel(&x, 1.0).map_err(|e| e.to_string())?;
    let uniform = MethodSpec::Uniform;
    let detmc = MethodSpec::DetMc {
        s: 1.0,
        steps: None,
    };
    let detmax = MethodSpec::DetMaxRandom { trials: 2500 };
    let curve = error_curve_for_kernel(&q, &[uniform, detmc, detmax], 2..=20, 500, 1)
        .map_err(|e| e.to_string())?;
    let mut detmc_ok = true;
    let mut strictly_worst = 0;
    for k in 2..=20 {
        let u = curve.get(&uniform, k).unwrap().mean_error;
        let d = curve.get(&detmc, k).unwrap().mean_error;
        let r = curve.get(&detmax, k).unwrap().mean_error;
        detmc_ok &= d <= u;
        if u > d && u > r {
            strictly_worst += 1;
        }
    }
    ensure(
        detmc_ok && strictly_worst >= 15,
        format!("detmc <= uniform at every rank: {detmc_ok}; uniform strictly worst at {strictly_worst}/19 ranks"),
    )
}

fn uneven_line_recovery() -> Check {
    let text =
        "dataset = uneven_line\nn_points = 150\nsigma = 0.05\nmethods = uniform, detmc:s=1\n\
                rank_min = 12\nrank_max = 12\ntrials = 100\nseed = 1\nembedding_dim = 1";
    let config =
        ExperimentConfig::from_key_values(KeyValues::parse(text).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let study = embedding_study(&config).map_err(|e| e.to_string())?;
    let get = |label: &str| {
        study
            .summaries
            .iter()
            .find(|s| s.method.to_string() == label)
            .map(|s| (median(&s.abs_spearman), s.abs_spearman.len()))
            .unwrap_or((f64::NAN, 0))
    };
    let (u, nu) = get("uniform");
    let (d, nd) = get("detmc:s=1");
    ensure(
        d >= u && nu == 100 && nd == 100,
        format!("median |spearman| detmc {d:.4} ({nd} trials), uniform {u:.4} ({nu} trials)"),
    )
}

fn embedding_invariants() -> Check {
    let (mut trivial, mut spectra, mut laplacian) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..10u64 {
        let n = 20 + 5 * case as usize;
        let pts = gaussian_matrix(n, 3, &mut RandomSeed::new(90).with_stream(case).rng());
        let x = PointCloud::new(pts).map_err(|e| e.to_string())?;
        let dk = DiffusionKernel::from_points(&x, 1.0).map_err(|e| e.to_string())?;
        let s = eigh(dk.normalized().as_symmetric()).map_err(|e| e.to_string())?;
        let u = DVector::from_fn(n, |i, _| {
            s.eigenvectors[(i, 0)] / dk.degrees().values()[i].sqrt()
        });
        let spread = (u.max() - u.min()) / u.amax();
        trivial = trivial.max((s.eigenvalues[0] - 1.0).abs()).max(spread);

        let p = markov_matrix(dk.kernel()).map_err(|e| e.to_string())?;
        let mut general: Vec<f64> = p.complex_eigenvalues().iter().map(|c| c.re).collect();
        general.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s.eigenvalues.iter().zip(&general) {
            spectra = spectra.max((a - b).abs());
        }

        let w = knn_graph_kernel(&x, 5, 1.0).map_err(|e| e.to_string())?;
        let l = combinatorial_laplacian(&w).map_err(|e| e.to_string())?;
        let residual = (l.as_matrix() * DVector::from_element(n, 1.0)).amax();
        laplacian = laplacian.max(residual / w.as_matrix().amax());
    }
    // integer weights make every sum exact, so here L𝟙 must vanish bitwise
    let weights = DMatrix::from_fn(12, 12, |i, j| {
        if i == j {
            0.0
        } else {
            ((i * j + i + j) % 4) as f64
        }
    });
    let w = KernelMatrix::from_matrix(weights).map_err(|e| e.to_string())?;
    let l = combinatorial_laplacian(&w).map_err(|e| e.to_string())?;
    let exact_zero = (l.as_matrix() * DVector::from_element(12, 1.0))
        .iter()
        .all(|&v| v == 0.0);
    ensure(
        trivial <= 1e-10 && spectra <= 1e-10 && laplacian <= 1e-12 && exact_zero,
        format!(
            "trivial pair deviation {trivial:.2e}, P vs normalized spectra {spectra:.2e}, \
             |L1| {laplacian:.2e} (integer weights exact: {exact_zero})"
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            out.insert(name, fs::read(entry.path()).unwrap_or_default());
        }
    }
    out
}

fn cli_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        (
            "error-curve",
            "dataset = fishbowl\nn_points = 60\nsigma = 1.0\n\
             methods = uniform, diag2, detmc:s=1:steps=300, detmax_random:trials=50, detmax_greedy\n\
             rank_min = 2\nrank_max = 6\ntrials = 20\nseed = 4",
        ),
        (
            "embed",
            "dataset = uneven_line\nn_points = 80\nsigma = 0.05\n\
             methods = uniform, detmc:s=1, detmax_greedy\nrank_min = 6\nrank_max = 8\ntrials = 10\nseed = 5",
        ),
        ("verify-bounds", "n = 8\nk_max = 3\ninstances = 6\nseed = 6"),
    ];
    let bin = env!("CARGO_BIN_EXE_landmark-bench");
    let mut parts = Vec::new();
    for (command, text) in configs {
        let config = tmp.path().join(format!("{command}.conf"));
        fs::write(&config, text).map_err(|e| e.to_string())?;
        let mut trees = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{command}-{run}"));
            let status = Command::new(bin)
                .arg(command)
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!(
                    "{command} exited with {}: {}",
                    status.status,
                    String::from_utf8_lossy(&status.stderr)
                ));
            }
            trees.push(read_tree(&out));
        }
        if trees[0].is_empty() || trees[0] != trees[1] {
            return Err(format!("{command}: outputs differ between runs"));
        }
        parts.push(format!("{command}: {} files identical", trees[0].len()));
    }
    Ok(parts.join(", "))
}

type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Check + 'a>);

fn main() {
    let sweep_start = Instant::now();
    let sweep = bound_sweep();
    let sweep_cost = sweep_start.elapsed();

    let criteria: Vec<Criterion> = vec![
        (
            "nystrom error identity",
            Duration::from_secs(10),
            Box::new(nystrom_error_identity),
        ),
        (
            "perfect reconstruction at exact rank",
            Duration::from_secs(5),
            Box::new(perfect_reconstruction),
        ),
        (
            "uniform expected-error bound",
            Duration::from_secs(30),
            Box::new(|| uniform_bound(&sweep)),
        ),
        (
            "determinantal expected-error bound",
            Duration::from_secs(60),
            Box::new(|| determinantal_bound(&sweep)),
        ),
        (
            "determinant-maximization bound",
            Duration::from_secs(60),
            Box::new(|| det_max_bound(&sweep)),
        ),
        (
            "metropolis sampler fidelity",
            Duration::from_secs(60),
            Box::new(sampler_fidelity),
        ),
        (
            "fishbowl error ordering",
            Duration::from_secs(300),
            Box::new(fishbowl_ordering),
        ),
        (
            "uneven line recovery",
            Duration::from_secs(300),
            Box::new(uneven_line_recovery),
        ),
        (
            "embedding invariants",
            Duration::from_secs(10),
            Box::new(embedding_invariants),
        ),
        (
            "cli determinism",
            Duration::from_secs(300),
            Box::new(cli_determinism),
        ),
    ];

    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let mut elapsed = start.elapsed();
        if (3..=5).contains(&(i + 1)) {
            elapsed += sweep_cost;
        }
        let in_time = elapsed <= *budget;
        let (passed, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.2}s of {}s]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
