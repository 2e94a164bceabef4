//! Kernel constructors over point clouds and the degree-based normalizations
//! used by diffusion maps and Laplacian eigenmaps.

use nalgebra::DMatrix;

use crate::error::{parameter, Error, Result};
use crate::linalg::{KernelMatrix, SymmetricMatrix};

/// `N` samples of `n` features, one sample per row, with optional per-point
/// ground-truth tags (one column per tag).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    tags: Option<DMatrix<f64>>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(parameter(
                "points",
                "a point cloud needs at least two samples",
            ));
        }
        for j in 0..points.ncols() {
            for i in 0..points.nrows() {
                if !points[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(PointCloud { points, tags: None })
    }

    pub fn with_tags(mut self, tags: DMatrix<f64>) -> Result<Self> {
        if tags.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: tags.nrows(),
            });
        }
        self.tags = Some(tags);
        Ok(self)
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Feature dimension `n`.
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn tags(&self) -> Option<&DMatrix<f64>> {
        self.tags.as_ref()
    }

    /// The first tag column, if any.
    pub fn primary_tag(&self) -> Option<Vec<f64>> {
        self.tags
            .as_ref()
            .filter(|t| t.ncols() > 0)
            .map(|t| t.column(0).iter().copied().collect())
    }

    /// Reorders samples (and tags) so that row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<PointCloud> {
        let rows =
            |m: &DMatrix<f64>| DMatrix::from_fn(order.len(), m.ncols(), |i, j| m[(order[i], j)]);
        let mut out = PointCloud::new(rows(&self.points))?;
        if let Some(t) = &self.tags {
            out = out.with_tags(rows(t))?;
        }
        Ok(out)
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.points
            .row(i)
            .iter()
            .zip(self.points.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn squared_distances(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.squared_distance(i, j);
                out[(i, j)] = d;
                out[(j, i)] = d;
            }
        }
        out
    }
}

/// Per-feature standardization: zero mean, unit (population) variance.
/// Constant features are only centred.
pub fn standardize(x: &PointCloud) -> PointCloud {
    let mut points = x.points.clone();
    let n = points.nrows() as f64;
    for mut col in points.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col.scale_mut(sd.recip());
        }
    }
    PointCloud {
        points,
        tags: x.tags.clone(),
    }
}

/// Row sums `d_i = Σ_j Q_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(Vec<f64>);

impl DegreeVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Fails on the first zero (or negative) degree.
    pub fn ensure_positive(&self) -> Result<()> {
        match self.0.iter().position(|&d| !(d > 0.0)) {
            Some(index) => Err(Error::ZeroDegree { index }),
            None => Ok(()),
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(parameter(
            "sigma",
            format!("must be positive and finite, got {sigma}"),
        ));
    }
    Ok(())
}

/// Gaussian kernel `exp(−‖xᵢ−xⱼ‖² / 2σ²)`.
pub fn rbf_kernel(x: &PointCloud, sigma: f64) -> Result<KernelMatrix> {
    check_sigma(sigma)?;
    let scale = -0.5 / (sigma * sigma);
    let d2 = x.squared_distances();
    let n = x.len();
    let q = DMatrix::from_fn(n, n, |i, j| (scale * d2[(i, j)]).exp());
    KernelMatrix::new(SymmetricMatrix::from_symmetric_unchecked(q))
}

/// For each point, its `k_nn` nearest other points, ties broken by lower
/// index.
pub fn nearest_neighbours(x: &PointCloud, k_nn: usize) -> Result<Vec<Vec<usize>>> {
    let n = x.len();
    if k_nn == 0 || k_nn >= n {
        return Err(parameter("k_nn", format!("must lie in 1..{n}, got {k_nn}")));
    }
    let d2 = x.squared_distances();
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]).then(a.cmp(&b)));
            others.truncate(k_nn);
            others
        })
        .collect())
}

/// Sparsified Gaussian kernel on the symmetrized k-nearest-neighbour graph,
/// with zero diagonal.
pub fn knn_graph_kernel(x: &PointCloud, k_nn: usize, sigma: f64) -> Result<KernelMatrix> {
    check_sigma(sigma)?;
    let neighbours = nearest_neighbours(x, k_nn)?;
    let n = x.len();
    let scale = -0.5 / (sigma * sigma);
    let mut q = DMatrix::zeros(n, n);
    for (i, list) in neighbours.iter().enumerate() {
        for &j in list {
            let w = (scale * x.squared_distance(i, j)).exp();
            q[(i, j)] = w;
            q[(j, i)] = w;
        }
    }
    KernelMatrix::new(SymmetricMatrix::from_symmetric_unchecked(q))
}

pub fn degree(q: &KernelMatrix) -> DegreeVector {
    DegreeVector(q.as_matrix().row_iter().map(|r| r.sum()).collect())
}

/// Row-stochastic `P = D⁻¹Q`.
pub fn markov_matrix(q: &KernelMatrix) -> Result<DMatrix<f64>> {
    let d = degree(q);
    d.ensure_positive()?;
    let mut p = q.as_matrix().clone();
    for (i, mut row) in p.row_iter_mut().enumerate() {
        row.scale_mut(d.values()[i].recip());
    }
    Ok(p)
}

/// `D^{-1/2} Q D^{-1/2}`, which shares its eigenvalues with `D⁻¹Q`.
pub fn symmetric_normalization(q: &KernelMatrix) -> Result<KernelMatrix> {
    let d = degree(q);
    normalize_with_degrees(q, &d)
}

pub(crate) fn normalize_with_degrees(q: &KernelMatrix, d: &DegreeVector) -> Result<KernelMatrix> {
    d.ensure_positive()?;
    let inv_sqrt: Vec<f64> = d.values().iter().map(|v| v.sqrt().recip()).collect();
    let n = q.order();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inv_sqrt[i] * q.get(i, j) * inv_sqrt[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    KernelMatrix::new(SymmetricMatrix::from_symmetric_unchecked(m))
}

/// `L = D − Q`.
pub fn combinatorial_laplacian(q: &KernelMatrix) -> Result<KernelMatrix> {
    let d = degree(q);
    let mut l = -q.as_matrix().clone();
    for (i, v) in d.values().iter().enumerate() {
        l[(i, i)] += v;
    }
    KernelMatrix::new(SymmetricMatrix::from_symmetric_unchecked(l))
}

/// Feature-space scatter `Σᵢ (xᵢ − x̄)(xᵢ − x̄)ᵀ`, of order `n` (the feature
/// dimension).
pub fn covariance_kernel(x: &PointCloud) -> Result<KernelMatrix> {
    let centred = centre(x.points());
    KernelMatrix::from_matrix(centred.transpose() * &centred)
}

pub(crate) fn centre(points: &DMatrix<f64>) -> DMatrix<f64> {
    let mut centred = points.clone();
    let n = points.nrows() as f64;
    for mut col in centred.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    centred
}

/// Sample inner products `⟨xᵢ, xⱼ⟩`, of order `N`.
pub fn gram_kernel(x: &PointCloud) -> Result<KernelMatrix> {
    let p = x.points();
    KernelMatrix::from_matrix(p * p.transpose())
}

/// Number of connected components of the graph with an edge wherever
/// `Q_ij > 0`, `i ≠ j`.
pub fn connected_components(q: &KernelMatrix) -> usize {
    let n = q.order();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && j != i && q.get(i, j) > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    components
}
