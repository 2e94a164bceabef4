//! Random matrix generators used by tests and the bound-verification
//! harness.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::linalg::{KernelMatrix, SymmetricMatrix};

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Symmetric matrix with independent standard normal upper triangle.
pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymmetricMatrix {
    let g = gaussian_matrix(n, n, rng);
    SymmetricMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            g[(i, j)]
        } else {
            g[(j, i)]
        }
    }))
    .expect("finite square input")
}

/// `Xᵀ X` for a `rank × n` standard normal `X`, so the kernel has rank
/// `min(rank, n)` almost surely.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> KernelMatrix {
    let x = gaussian_matrix(rank, n, rng);
    KernelMatrix::from_matrix(x.transpose() * x).expect("Gram matrices are valid kernels")
}

/// Diagonal kernel with entries uniform on `[0.1, 10)`.
pub fn random_diagonal_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> KernelMatrix {
    let dist = Uniform::new(0.1, 10.0).expect("valid range");
    let diag: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    KernelMatrix::from_diagonal(&diag).expect("positive diagonal")
}
