//! Spectral embeddings: PCA, diffusion maps and Laplacian eigenmaps, plus a
//! Nyström-accelerated diffusion map built on a landmark subset.
//!
//! Eigenvectors are only defined up to sign, so comparisons between
//! embeddings should be made per coordinate up to sign (or by rank
//! correlation), never on raw values.

mod manifolds;

pub use manifolds::{fishbowl, uneven_line};

use nalgebra::DMatrix;

use crate::error::{parameter, Error, Result};
use crate::kernels::{
    centre, combinatorial_laplacian, connected_components, covariance_kernel, degree,
    knn_graph_kernel, normalize_with_degrees, rbf_kernel, DegreeVector, PointCloud,
};
use crate::linalg::{eigh, KernelMatrix};
use crate::nystrom::{nystrom_extend, orthogonalized_eigenvectors};
use crate::subset::LandmarkSubset;

/// Eigenvalues within this distance of 1 count toward the multiplicity of
/// the trivial diffusion eigenvalue.
pub const TRIVIAL_EIGENVALUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMethod {
    Pca,
    DiffusionMaps,
    LaplacianEigenmaps,
    NystromDiffusionMaps,
}

impl EmbeddingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EmbeddingMethod::Pca => "pca",
            EmbeddingMethod::DiffusionMaps => "diffusion_maps",
            EmbeddingMethod::LaplacianEigenmaps => "laplacian_eigenmaps",
            EmbeddingMethod::NystromDiffusionMaps => "nystrom_diffusion_maps",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// N × d, one row per input point.
    pub coordinates: DMatrix<f64>,
    /// Eigenvalues paired with the coordinate columns.
    pub eigenvalues: Vec<f64>,
    pub method: EmbeddingMethod,
    pub trivial_pair_dropped: bool,
    /// Eigenvalue of the discarded trivial pair, when one was dropped.
    pub trivial_eigenvalue: Option<f64>,
    pub diffusion_time: Option<u32>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coordinates.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.coordinates.column(j).iter().copied().collect()
    }
}

fn check_dim(d: usize, max: usize, what: &str) -> Result<()> {
    if d == 0 || d > max {
        return Err(parameter(
            "d",
            format!("must lie in 1..={max} ({what}), got {d}"),
        ));
    }
    Ok(())
}

/// Projects centred samples onto the top-`d` eigenvectors of the feature
/// scatter matrix.
pub fn pca_embed(x: &PointCloud, d: usize) -> Result<Embedding> {
    check_dim(d, x.dim(), "feature dimension")?;
    let spectrum = eigh(covariance_kernel(x)?.as_symmetric())?;
    let basis = spectrum.eigenvectors.columns(0, d);
    let coordinates = centre(x.points()) * basis;
    Ok(Embedding {
        coordinates,
        eigenvalues: spectrum.eigenvalues[..d].to_vec(),
        method: EmbeddingMethod::Pca,
        trivial_pair_dropped: false,
        trivial_eigenvalue: None,
        diffusion_time: None,
    })
}

/// A kernel with its degrees and symmetric normalization `D^{-1/2}QD^{-1/2}`,
/// shared between the exact and Nyström diffusion maps.
#[derive(Debug, Clone)]
pub struct DiffusionKernel {
    kernel: KernelMatrix,
    degrees: DegreeVector,
    normalized: KernelMatrix,
}

impl DiffusionKernel {
    pub fn from_points(x: &PointCloud, sigma: f64) -> Result<Self> {
        Self::from_kernel(rbf_kernel(x, sigma)?)
    }

    pub fn from_kernel(kernel: KernelMatrix) -> Result<Self> {
        let degrees = degree(&kernel);
        let normalized = normalize_with_degrees(&kernel, &degrees)?;
        Ok(DiffusionKernel {
            kernel,
            degrees,
            normalized,
        })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn degrees(&self) -> &DegreeVector {
        &self.degrees
    }

    /// `D^{-1/2} Q D^{-1/2}`
    pub fn normalized(&self) -> &KernelMatrix {
        &self.normalized
    }

    pub fn len(&self) -> usize {
        self.kernel.order()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.order() == 0
    }

    /// Maps an eigenvector of the normalized kernel to one of `D⁻¹Q`.
    fn to_markov_vector(&self, column: impl Iterator<Item = f64>) -> Vec<f64> {
        column
            .zip(self.degrees.values())
            .map(|(v, d)| v / d.sqrt())
            .collect()
    }

    /// Exact diffusion map: drops the eigenvalue-1 pair and returns the
    /// next `d` Markov eigenvectors scaled by `λ^m`.
    pub fn embed(&self, d: usize, m: u32) -> Result<Embedding> {
        let n = self.len();
        check_dim(d, n - 1, "points minus one")?;
        if m == 0 {
            return Err(parameter("m", "diffusion time must be positive"));
        }
        let spectrum = eigh(self.normalized.as_symmetric())?;
        let multiplicity = spectrum
            .eigenvalues
            .iter()
            .filter(|&&l| l >= 1.0 - TRIVIAL_EIGENVALUE_TOL)
            .count();
        if multiplicity != 1 {
            return Err(Error::AmbiguousTrivialPair { multiplicity });
        }
        let mut coordinates = DMatrix::zeros(n, d);
        for j in 0..d {
            let lambda = spectrum.eigenvalues[j + 1];
            let u = self.to_markov_vector(spectrum.eigenvectors.column(j + 1).iter().copied());
            let scale = lambda.powi(m as i32);
            for i in 0..n {
                coordinates[(i, j)] = u[i] * scale;
            }
        }
        Ok(Embedding {
            coordinates,
            eigenvalues: spectrum.eigenvalues[1..=d].to_vec(),
            method: EmbeddingMethod::DiffusionMaps,
            trivial_pair_dropped: true,
            trivial_eigenvalue: Some(spectrum.eigenvalues[0]),
            diffusion_time: Some(m),
        })
    }

    /// Diffusion map from the Nyström approximation of the normalized kernel
    /// on the landmarks `subset`.
    ///
    /// The approximate spectrum need not contain an exact `(1, 𝟙)` pair, so
    /// the pair dropped is the one with eigenvalue nearest 1, preferring
    /// the eigenvector of least relative coordinate spread among
    /// near-ties.
    pub fn nystrom_embed(&self, subset: &LandmarkSubset, d: usize, m: u32) -> Result<Embedding> {
        if subset.len() <= d {
            return Err(Error::InsufficientLandmarks {
                landmarks: subset.len(),
                dim: d,
            });
        }
        if m == 0 {
            return Err(parameter("m", "diffusion time must be positive"));
        }
        let approx = nystrom_extend(&self.normalized, subset)?;
        let system = orthogonalized_eigenvectors(&approx)?;
        let r = system.eigenvalues.len();
        if r <= d {
            return Err(Error::InsufficientLandmarks {
                landmarks: r,
                dim: d,
            });
        }
        let vectors: Vec<Vec<f64>> = (0..r)
            .map(|j| self.to_markov_vector(system.eigenvectors.column(j).iter().copied()))
            .collect();

        let distance = |j: usize| (system.eigenvalues[j] - 1.0).abs();
        let nearest = (0..r).map(distance).fold(f64::INFINITY, f64::min);
        let trivial = (0..r)
            .filter(|&j| distance(j) <= nearest + 1e-8)
            .min_by(|&a, &b| relative_spread(&vectors[a]).total_cmp(&relative_spread(&vectors[b])))
            .expect("at least one eigenpair");

        let n = self.len();
        let kept: Vec<usize> = (0..r).filter(|&j| j != trivial).take(d).collect();
        let mut coordinates = DMatrix::zeros(n, d);
        for (c, &j) in kept.iter().enumerate() {
            let scale = system.eigenvalues[j].powi(m as i32);
            for i in 0..n {
                coordinates[(i, c)] = vectors[j][i] * scale;
            }
        }
        Ok(Embedding {
            coordinates,
            eigenvalues: kept.iter().map(|&j| system.eigenvalues[j]).collect(),
            method: EmbeddingMethod::NystromDiffusionMaps,
            trivial_pair_dropped: true,
            trivial_eigenvalue: Some(system.eigenvalues[trivial]),
            diffusion_time: Some(m),
        })
    }
}

/// Standard deviation of the entries of `v / ‖v‖`; zero for constant
/// vectors.
fn relative_spread(v: &[f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / (n * norm);
    (v.iter().map(|x| (x / norm - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn diffusion_maps_embed(x: &PointCloud, sigma: f64, d: usize, m: u32) -> Result<Embedding> {
    DiffusionKernel::from_points(x, sigma)?.embed(d, m)
}

pub fn nystrom_diffusion_embed(
    x: &PointCloud,
    sigma: f64,
    subset: &LandmarkSubset,
    d: usize,
    m: u32,
) -> Result<Embedding> {
    DiffusionKernel::from_points(x, sigma)?.nystrom_embed(subset, d, m)
}

/// Laplacian eigenmaps on the symmetrized k-NN graph.
///
/// Solves `Lv = λDv` through the normalized Laplacian `D^{-1/2}LD^{-1/2}`,
/// drops the `λ = 0` constant solution and returns the next `d` smallest
/// solutions `v = D^{-1/2}ṽ`, so that `‖D^{1/2}v‖ = 1`.
pub fn laplacian_eigenmaps_embed(
    x: &PointCloud,
    k_nn: usize,
    sigma: f64,
    d: usize,
) -> Result<Embedding> {
    let n = x.len();
    check_dim(d, n - 1, "points minus one")?;
    let graph = knn_graph_kernel(x, k_nn, sigma)?;
    let components = connected_components(&graph);
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    let degrees = degree(&graph);
    let laplacian = combinatorial_laplacian(&graph)?;
    let normalized = normalize_with_degrees(&laplacian, &degrees)?;
    let spectrum = eigh(normalized.as_symmetric())?;

    let mut coordinates = DMatrix::zeros(n, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for c in 0..d {
        // ascending order, skipping the smallest (trivial) solution
        let j = n - 2 - c;
        eigenvalues.push(spectrum.eigenvalues[j]);
        for i in 0..n {
            coordinates[(i, c)] = spectrum.eigenvectors[(i, j)] / degrees.values()[i].sqrt();
        }
    }
    Ok(Embedding {
        coordinates,
        eigenvalues,
        method: EmbeddingMethod::LaplacianEigenmaps,
        trivial_pair_dropped: true,
        trivial_eigenvalue: Some(spectrum.eigenvalues[n - 1]),
        diffusion_time: None,
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
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
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; zero when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman inputs must have equal length");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean) * (x - mean);
        vb += (y - mean) * (y - mean);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
