//! Seeded synthetic point clouds with known ground-truth parameters.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{parameter, Result};
use crate::kernels::PointCloud;
use crate::sampling::RandomSeed;

/// Direction of the segment traced by [`uneven_line`].
const LINE_DIRECTION: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
const LINE_LENGTH: f64 = 1.0;
const LINE_NOISE: f64 = 1e-3;

/// Points uniform on the unit sphere with the cap `z ≥ cap_z` removed.
///
/// Tags are `(azimuth, polar angle)`. Uniformity on the sphere follows from
/// drawing `z` uniformly (Archimedes' hat-box theorem).
pub fn fishbowl(n_points: usize, cap_z: f64, seed: RandomSeed) -> Result<PointCloud> {
    if n_points < 4 {
        return Err(parameter("n_points", "needs at least 4 points"));
    }
    if !(cap_z > 0.0 && cap_z < 1.0) {
        return Err(parameter(
            "cap_z",
            format!("must lie in (0, 1), got {cap_z}"),
        ));
    }
    let mut rng = seed.rng();
    let mut points = DMatrix::zeros(n_points, 3);
    let mut tags = DMatrix::zeros(n_points, 2);
    for i in 0..n_points {
        let z: f64 = rng.random_range(-1.0..cap_z);
        let azimuth: f64 = rng.random_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).sqrt();
        points[(i, 0)] = r * azimuth.cos();
        points[(i, 1)] = r * azimuth.sin();
        points[(i, 2)] = z;
        tags[(i, 0)] = azimuth;
        tags[(i, 1)] = z.acos();
    }
    PointCloud::new(points)?.with_tags(tags)
}

/// Points on a straight unit segment in ℝ³ at `t ~ Beta(2, 5)`, sorted by
/// `t`, with isotropic Gaussian noise of standard deviation `10⁻³` of the
/// segment length. Tagged with `t`.
pub fn uneven_line(n_points: usize, seed: RandomSeed) -> Result<PointCloud> {
    if n_points < 4 {
        return Err(parameter("n_points", "needs at least 4 points"));
    }
    let mut rng = seed.rng();
    let beta = Beta::new(2.0, 5.0).expect("valid shape parameters");
    let noise = Normal::new(0.0, LINE_NOISE * LINE_LENGTH).expect("valid deviation");
    let t = loop {
        let mut t: Vec<f64> = (0..n_points).map(|_| beta.sample(&mut rng)).collect();
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[0] < w[1]) {
            break t;
        }
    };
    let mut points = DMatrix::zeros(n_points, 3);
    for (i, &ti) in t.iter().enumerate() {
        for (c, dir) in LINE_DIRECTION.iter().enumerate() {
            points[(i, c)] = ti * LINE_LENGTH * dir + noise.sample(&mut rng);
        }
    }
    PointCloud::new(points)?.with_tags(DMatrix::from_column_slice(n_points, 1, &t))
}
