//! The Nyström extension of a kernel from a landmark subset, and the
//! trace-norm error it incurs.
//!
//! For a subset `J` with complement `J̄`, the kernel splits into blocks
//! `Q_J = Q[J×J]`, `Y = Q[J×J̄]` and `Z = Q[J̄×J̄]`. The completion keeps
//! `Q_J` and `Y` and replaces `Z` by `Yᵀ Q_J⁺ Y`, so the residual is the
//! Schur complement `Z − Yᵀ Q_J⁺ Y`. That residual is PSD, hence its trace
//! norm is its trace and the error is available without forming the
//! completed kernel.
//!
//! Indices are never silently reordered: the approximate eigenvectors are
//! stored with rows in the original index order, and every function takes
//! the subset explicitly.

use nalgebra::DMatrix;

use crate::error::{parameter, Error, Result};
use crate::linalg::{
    canonical_sign, eigh, partition, pseudo_inverse_factor, KernelMatrix, Spectrum,
    SymmetricMatrix, PINV_RTOL,
};
use crate::subset::LandmarkSubset;

/// Factorized Nyström completion `Q̃ = Ũ Λ̃ Ũᵀ`.
#[derive(Debug, Clone)]
pub struct NystromApprox {
    subset: LandmarkSubset,
    complement: Vec<usize>,
    landmark_block: SymmetricMatrix,
    cross_block: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
}

impl NystromApprox {
    pub fn subset(&self) -> &LandmarkSubset {
        &self.subset
    }

    pub fn order(&self) -> usize {
        self.subset.ambient_order()
    }

    /// `J̄`, increasing.
    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    /// `Q_J`
    pub fn landmark_block(&self) -> &SymmetricMatrix {
        &self.landmark_block
    }

    /// `Y = Q[J×J̄]`
    pub fn cross_block(&self) -> &DMatrix<f64> {
        &self.cross_block
    }

    /// `Λ̃ = Λ_J`, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `Ũ`, n × k, rows in original index order.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Number of landmark eigenvalues above the pseudo-inverse threshold.
    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Builds the Nyström approximation of `q` from the landmarks `subset`.
///
/// `Ũ` has rows `U_J` at the landmark positions and `Yᵀ U_J Λ_J⁺` elsewhere;
/// eigenvalues of `Q_J` at or below `PINV_RTOL · λ_max(Q_J)` are treated as
/// zero. A subset covering every index is accepted and reproduces `q`.
pub fn nystrom_extend(q: &KernelMatrix, subset: &LandmarkSubset) -> Result<NystromApprox> {
    let parts = partition(q, subset)?;
    let pinv = pseudo_inverse_factor(&parts.landmark_block, PINV_RTOL)?;
    let Spectrum {
        eigenvalues,
        eigenvectors: landmark_vectors,
    } = pinv.spectrum;
    let k = subset.len();
    let n = q.order();

    let mut eigenvectors = DMatrix::zeros(n, k);
    for (a, &row) in parts.landmarks.iter().enumerate() {
        eigenvectors
            .row_mut(row)
            .copy_from(&landmark_vectors.row(a));
    }
    // Yᵀ U_J Λ⁻¹ on the kept columns; null columns stay zero off the landmarks
    let extended = parts.cross_block.transpose() * landmark_vectors.columns(0, pinv.rank);
    for (b, &row) in parts.complement.iter().enumerate() {
        for j in 0..pinv.rank {
            eigenvectors[(row, j)] = extended[(b, j)] / eigenvalues[j];
        }
    }

    Ok(NystromApprox {
        subset: subset.clone(),
        complement: parts.complement,
        landmark_block: parts.landmark_block,
        cross_block: parts.cross_block,
        eigenvalues,
        eigenvectors,
        rank: pinv.rank,
    })
}

/// Materializes `Q̃` in the original index order.
pub fn reconstruct(approx: &NystromApprox) -> Result<KernelMatrix> {
    let mut scaled = approx.eigenvectors.clone();
    for (j, &lambda) in approx.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lambda.max(0.0));
    }
    let full = &scaled * approx.eigenvectors.transpose();
    KernelMatrix::from_matrix(full)
}

/// Orthonormal eigenvectors of `Q̃` together with its nonzero eigenvalues.
#[derive(Debug, Clone)]
pub struct OrthogonalEigensystem {
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// n × r with orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
    /// How many of the k approximate eigenvectors were discarded as
    /// numerically rank deficient.
    pub dropped: usize,
}

/// Orthogonalizes the approximate eigenvectors in `O(nk²)`.
///
/// With `G = Ũ Λ̃^{1/2}` (null columns removed) and `GᵀG = W Σ Wᵀ`, the
/// columns of `G W Σ^{-1/2}` are orthonormal, span the same space as `Ũ`,
/// and diagonalize `Q̃ = G Gᵀ` with eigenvalues `Σ`.
pub fn orthogonalized_eigenvectors(approx: &NystromApprox) -> Result<OrthogonalEigensystem> {
    let n = approx.order();
    let k = approx.eigenvalues.len();
    let r = approx.rank;
    let mut g = approx.eigenvectors.columns(0, r).into_owned();
    for j in 0..r {
        g.column_mut(j).scale_mut(approx.eigenvalues[j].sqrt());
    }
    let inner = SymmetricMatrix::new(g.transpose() * &g)?;
    let spectrum = eigh(&inner)?;
    let threshold = PINV_RTOL
        * spectrum
            .eigenvalues
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(0.0);
    let kept = spectrum
        .eigenvalues
        .iter()
        .take_while(|&&s| s > threshold && s > 0.0)
        .count();

    let mut eigenvectors = DMatrix::zeros(n, kept);
    let mut column = vec![0.0; n];
    for j in 0..kept {
        let v = &g * spectrum.eigenvectors.column(j) / spectrum.eigenvalues[j].sqrt();
        column.copy_from_slice(v.as_slice());
        canonical_sign(&mut column);
        eigenvectors.column_mut(j).copy_from_slice(&column);
    }
    Ok(OrthogonalEigensystem {
        eigenvalues: spectrum.eigenvalues[..kept].to_vec(),
        eigenvectors,
        dropped: k - kept,
    })
}

/// The two traces whose difference is the Nyström error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTerms {
    /// `tr(Z)`
    pub complement_trace: f64,
    /// `tr(Yᵀ Q_J⁺ Y)`
    pub explained_trace: f64,
}

impl ErrorTerms {
    pub fn error(&self) -> f64 {
        (self.complement_trace - self.explained_trace).max(0.0)
    }
}

pub fn nystrom_error_terms(q: &KernelMatrix, subset: &LandmarkSubset) -> Result<ErrorTerms> {
    if subset.ambient_order() != q.order() {
        return Err(Error::DimensionMismatch {
            expected: q.order(),
            found: subset.ambient_order(),
        });
    }
    let landmarks = subset.indices();
    let complement = subset.complement();
    let complement_trace = complement.iter().map(|&i| q.get(i, i)).sum();
    if complement.is_empty() {
        return Ok(ErrorTerms {
            complement_trace,
            explained_trace: 0.0,
        });
    }
    let pinv = pseudo_inverse_factor(&q.principal_submatrix(landmarks), PINV_RTOL)?;
    let m = q.as_matrix();
    let cross = DMatrix::from_fn(landmarks.len(), complement.len(), |a, b| {
        m[(landmarks[a], complement[b])]
    });
    let projected = pinv.factor.transpose() * cross;
    Ok(ErrorTerms {
        complement_trace,
        explained_trace: projected.norm_squared(),
    })
}

/// `‖Q − Q̃‖_tr = tr(Z) − tr(Yᵀ Q_J⁺ Y)`, computed without forming `Q̃`.
///
/// When `Q_J` is numerically singular the pseudo-inverse makes this the
/// limit of the error along the ridge-regularization path.
pub fn nystrom_error_trace(q: &KernelMatrix, subset: &LandmarkSubset) -> Result<f64> {
    Ok(nystrom_error_terms(q, subset)?.error())
}

/// `Σ_{i>k} λᵢ(Q)`, the trace-norm error of the best rank-`k` approximation.
pub fn optimal_rank_k_error(q: &KernelMatrix, k: usize) -> Result<f64> {
    if k > q.order() {
        return Err(parameter(
            "k",
            format!("must not exceed the order {}", q.order()),
        ));
    }
    let spectrum = eigh(q.as_symmetric())?;
    Ok(optimal_error_from_spectrum(&spectrum, k))
}

pub fn optimal_error_from_spectrum(spectrum: &Spectrum, k: usize) -> f64 {
    spectrum.tail_sum(k).max(0.0)
}

/// Sum of squared residuals from projecting the unselected columns of `x`
/// onto the span of the selected ones. For `Q = XᵀX` this equals the
/// Nyström trace-norm error.
pub fn regression_residual_error(x: &DMatrix<f64>, subset: &LandmarkSubset) -> Result<f64> {
    if subset.ambient_order() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: subset.ambient_order(),
        });
    }
    let complement = subset.complement();
    if complement.is_empty() {
        return Ok(0.0);
    }
    let selected = x.select_columns(subset.indices());
    let svd = selected.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.max();
    // σ² thresholded like the eigenvalues of Q_J
    let threshold = PINV_RTOL.sqrt() * sigma_max;
    let basis_cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| svd.singular_values[j] > threshold && svd.singular_values[j] > 0.0)
        .collect();
    let basis = u.select_columns(&basis_cols);

    let mut total = 0.0;
    for &i in &complement {
        let col = x.column(i);
        let residual = col - &basis * (basis.transpose() * col);
        total += residual.norm_squared();
    }
    Ok(total)
}

/// Nyström error divided by `tr(Q)`.
pub fn normalized_error(q: &KernelMatrix, subset: &LandmarkSubset) -> Result<f64> {
    if !(q.trace() > 0.0) {
        return Err(Error::ZeroTrace);
    }
    Ok(nystrom_error_trace(q, subset)? / q.trace())
}
