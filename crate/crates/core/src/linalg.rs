//! Dense symmetric linear algebra: matrix newtypes, eigendecomposition,
//! kernel partitioning, Schur complements and log-domain determinants.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::subset::LandmarkSubset;

/// Relative eigenvalue threshold for the pseudo-inverse of a landmark block.
pub const PINV_RTOL: f64 = 1e-12;

/// Relative tolerance for positive semi-definiteness checks.
pub const PSD_TOL: f64 = 1e-10;

/// Relative pivot threshold below which a triangular factorization reports
/// a zero determinant.
pub const PIVOT_RTOL: f64 = 1e-12;

/// A square real matrix whose entries satisfy `a[i][j] == a[j][i]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Builds a symmetric matrix from `m` by averaging it with its transpose.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        check_finite(&m)?;
        let n = m.nrows();
        let mut m = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(SymmetricMatrix(m))
    }

    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymmetricMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { diag[i] } else { 0.0 },
        ))
    }

    /// Row-major construction, convenient for small literals.
    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// The principal submatrix on `indices`, in the given order.
    pub fn principal_submatrix(&self, indices: &[usize]) -> SymmetricMatrix {
        let k = indices.len();
        SymmetricMatrix(DMatrix::from_fn(k, k, |a, b| {
            self.0[(indices[a], indices[b])]
        }))
    }
}

/// A symmetric positive semi-definite kernel with its trace cached.
///
/// Construction only checks that the diagonal is nonnegative; the full
/// eigenvalue check is available through [`KernelMatrix::validate_psd`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    base: SymmetricMatrix,
    trace: f64,
}

impl KernelMatrix {
    pub fn new(base: SymmetricMatrix) -> Result<Self> {
        for i in 0..base.order() {
            let v = base.get(i, i);
            if v < 0.0 {
                return Err(Error::NegativeDiagonal { index: i, value: v });
            }
        }
        let trace = base.trace();
        Ok(KernelMatrix { base, trace })
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::new(SymmetricMatrix::new(m)?)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymmetricMatrix::from_diagonal(diag)?)
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.base.get(i, j)
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.base.as_matrix()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.get(i, i)).collect()
    }

    pub fn principal_submatrix(&self, indices: &[usize]) -> SymmetricMatrix {
        self.base.principal_submatrix(indices)
    }

    /// Trace norm of a PSD kernel, which is its trace.
    pub fn trace_norm(&self) -> f64 {
        self.trace
    }

    /// Checks `λ_min ≥ -PSD_TOL · λ_max` with a full eigendecomposition.
    pub fn validate_psd(&self) -> Result<()> {
        let spectrum = eigh(&self.base)?;
        let max = spectrum.eigenvalues.first().copied().unwrap_or(0.0);
        let min = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
        let tolerance = PSD_TOL * max.abs().max(f64::MIN_POSITIVE);
        if min < -tolerance {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance,
            });
        }
        Ok(())
    }
}

/// Eigenvalues sorted non-increasing with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `U Λ Uᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lambda);
        }
        &scaled * self.eigenvectors.transpose()
    }

    /// Sum of all eigenvalues after the first `k`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.eigenvalues.iter().skip(k).sum()
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn eigen_iteration_limit(n: usize) -> usize {
    (100 * n).max(1000)
}

/// Flips `v` so that its largest-magnitude entry is positive, ties going to
/// the lowest index.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing and
/// a deterministic eigenvector sign.
pub fn eigh(q: &SymmetricMatrix) -> Result<Spectrum> {
    let n = q.order();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let iterations = eigen_iteration_limit(n);
    let decomposition = SymmetricEigen::try_new(q.as_matrix().clone(), f64::EPSILON, iterations)
        .ok_or(Error::NoConvergence {
            order: n,
            iterations,
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[b]
            .partial_cmp(&decomposition.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut column = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(decomposition.eigenvalues[src]);
        column.copy_from_slice(decomposition.eigenvectors.column(src).as_slice());
        canonical_sign(&mut column);
        eigenvectors.column_mut(dst).copy_from_slice(&column);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// The blocks of a kernel induced by a landmark subset `J` and its
/// complement `J̄`, both in increasing index order.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPartition {
    /// `Q[J×J]`
    pub landmark_block: SymmetricMatrix,
    /// `Q[J×J̄]`, k × (n−k)
    pub cross_block: DMatrix<f64>,
    /// `Q[J̄×J̄]`
    pub complement_block: SymmetricMatrix,
    pub landmarks: Vec<usize>,
    pub complement: Vec<usize>,
}

impl KernelPartition {
    /// Reassembles the source kernel in its original index order.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let k = self.landmarks.len();
        let n = k + self.complement.len();
        let mut permutation = Vec::with_capacity(n);
        permutation.extend_from_slice(&self.landmarks);
        permutation.extend_from_slice(&self.complement);

        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let value = match (a < k, b < k) {
                    (true, true) => self.landmark_block.get(a, b),
                    (true, false) => self.cross_block[(a, b - k)],
                    (false, true) => self.cross_block[(b, a - k)],
                    (false, false) => self.complement_block.get(a - k, b - k),
                };
                out[(permutation[a], permutation[b])] = value;
            }
        }
        out
    }
}

fn check_subset(q: &KernelMatrix, subset: &LandmarkSubset) -> Result<()> {
    if subset.ambient_order() != q.order() {
        return Err(Error::DimensionMismatch {
            expected: q.order(),
            found: subset.ambient_order(),
        });
    }
    Ok(())
}

/// Splits `q` into landmark, cross and complement blocks.
///
/// A subset covering every index yields an empty complement block.
pub fn partition(q: &KernelMatrix, subset: &LandmarkSubset) -> Result<KernelPartition> {
    check_subset(q, subset)?;
    let landmarks = subset.indices().to_vec();
    let complement = subset.complement();
    let m = q.as_matrix();
    let cross_block = DMatrix::from_fn(landmarks.len(), complement.len(), |a, b| {
        m[(landmarks[a], complement[b])]
    });
    Ok(KernelPartition {
        landmark_block: q.principal_submatrix(&landmarks),
        cross_block,
        complement_block: q.principal_submatrix(&complement),
        landmarks,
        complement,
    })
}

/// Factor `W` (k × r) with `W Wᵀ = A⁺`, where the pseudo-inverse discards
/// eigenvalues at or below `rtol · λ_max(A)`.
#[derive(Debug, Clone)]
pub struct PseudoInverseFactor {
    pub spectrum: Spectrum,
    /// Number of eigenpairs kept.
    pub rank: usize,
    pub factor: DMatrix<f64>,
}

pub fn pseudo_inverse_factor(a: &SymmetricMatrix, rtol: f64) -> Result<PseudoInverseFactor> {
    let spectrum = eigh(a)?;
    let threshold = rtol
        * spectrum
            .eigenvalues
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(0.0);
    let rank = spectrum
        .eigenvalues
        .iter()
        .take_while(|&&l| l > threshold && l > 0.0)
        .count();
    let k = a.order();
    let mut factor = DMatrix::zeros(k, rank);
    for j in 0..rank {
        let scale = spectrum.eigenvalues[j].sqrt().recip();
        factor
            .column_mut(j)
            .copy_from(&(spectrum.eigenvectors.column(j) * scale));
    }
    Ok(PseudoInverseFactor {
        spectrum,
        rank,
        factor,
    })
}

/// `Z − Yᵀ Q_J⁺ Y`, the residual block left after conditioning on `J`.
pub fn schur_complement(
    q: &KernelMatrix,
    subset: &LandmarkSubset,
    rtol: f64,
) -> Result<SymmetricMatrix> {
    if !(rtol > 0.0) {
        return Err(crate::error::parameter("rtol", "must be positive"));
    }
    let parts = partition(q, subset)?;
    let pinv = pseudo_inverse_factor(&parts.landmark_block, rtol)?;
    let projected = pinv.factor.transpose() * &parts.cross_block;
    let explained = projected.transpose() * &projected;
    let residual = parts.complement_block.as_matrix() - explained;
    SymmetricMatrix::new(residual)
}

/// Sum of singular values.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.sum()
}

/// Cholesky factorization in place on a row-major `k × k` buffer, returning
/// `log det` or `-∞` on a pivot at or below `PIVOT_RTOL · max diag`.
pub(crate) fn cholesky_logdet_in_place(a: &mut [f64], k: usize) -> f64 {
    debug_assert_eq!(a.len(), k * k);
    let max_diag = (0..k).map(|i| a[i * k + i]).fold(0.0_f64, f64::max);
    if k == 0 {
        return 0.0;
    }
    let threshold = PIVOT_RTOL * max_diag;
    if !(max_diag > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut logdet = 0.0;
    for j in 0..k {
        let mut pivot = a[j * k + j];
        for p in 0..j {
            pivot -= a[j * k + p] * a[j * k + p];
        }
        if !(pivot > threshold) {
            return f64::NEG_INFINITY;
        }
        let root = pivot.sqrt();
        a[j * k + j] = root;
        logdet += pivot.ln();
        for i in (j + 1)..k {
            let mut v = a[i * k + j];
            for p in 0..j {
                v -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = v / root;
        }
    }
    logdet
}

/// `log det(A)` through a Cholesky factorization; `-∞` when `A` is singular
/// or indefinite to within the pivot tolerance.
pub fn logdet_psd(a: &SymmetricMatrix) -> f64 {
    let k = a.order();
    let mut buffer: Vec<f64> = a.as_matrix().transpose().iter().copied().collect();
    cholesky_logdet_in_place(&mut buffer, k)
}

/// Log-determinant of the tridiagonal part of `A` (diagonal plus first
/// off-diagonals) by the three-term continuant recurrence in `O(k)`.
pub fn tridiagonal_logdet_approx(a: &SymmetricMatrix) -> f64 {
    let k = a.order();
    let diag: Vec<f64> = (0..k).map(|i| a.get(i, i)).collect();
    let off: Vec<f64> = (1..k).map(|i| a.get(i, i - 1)).collect();
    tridiagonal_logdet(&diag, &off)
}

pub(crate) fn tridiagonal_logdet(diag: &[f64], off: &[f64]) -> f64 {
    let k = diag.len();
    if k == 0 {
        return 0.0;
    }
    let max_diag = diag.iter().copied().fold(0.0_f64, f64::max);
    if !(max_diag > 0.0) {
        return f64::NEG_INFINITY;
    }
    let threshold = PIVOT_RTOL * max_diag;
    // ratio f_i / f_{i-1} of consecutive leading minors
    let mut ratio = diag[0];
    if !(ratio > threshold) {
        return f64::NEG_INFINITY;
    }
    let mut logdet = ratio.ln();
    for i in 1..k {
        ratio = diag[i] - off[i - 1] * off[i - 1] / ratio;
        if !(ratio > threshold) {
            return f64::NEG_INFINITY;
        }
        logdet += ratio.ln();
    }
    logdet
}
