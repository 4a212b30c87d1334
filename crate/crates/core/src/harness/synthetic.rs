//! Synthetic instances: planted sparse factorizations and blurred test images.

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problems::conv::conv2d_circular;
use crate::problems::SnmfConfig;

/// `A = max(X Y + noise, 0)` with the ground-truth factors.
#[derive(Debug, Clone)]
pub struct PlantedFactorization {
    pub a: Array2<f64>,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// Nonzeros per column of `x`.
    pub sparsity: usize,
}

impl PlantedFactorization {
    pub fn snmf_config(&self, eta_fit: f64) -> SnmfConfig {
        SnmfConfig { a: self.a.clone(), rank: self.x.ncols(), sparsity: self.sparsity, eta_fit }
    }
}

/// Plants `X` with `round(nonzero_fraction · rows)` uniform nonzeros per
/// column and a uniform `Y`, then adds Gaussian noise of standard deviation
/// `noise`.
pub fn planted_snmf(
    rows: usize,
    cols: usize,
    rank: usize,
    nonzero_fraction: f64,
    noise: f64,
    seed: u64,
) -> Result<PlantedFactorization> {
    if rows == 0 || cols == 0 || rank == 0 || rank > rows.min(cols) {
        return Err(Error::InvalidParameter(format!("invalid shape {rows}x{cols} with rank {rank}")));
    }
    if !(nonzero_fraction > 0.0 && nonzero_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("nonzero fraction {nonzero_fraction} outside (0, 1]")));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = SnmfConfig::sparsity_from_fraction(rows, nonzero_fraction);
    let mut x = Array2::zeros((rows, rank));
    for mut col in x.axis_iter_mut(Axis(1)) {
        for i in sample(&mut rng, rows, s) {
            col[i] = rng.gen_range(0.0..1.0);
        }
    }
    let y = Array2::from_shape_fn((rank, cols), |_| rng.gen_range(0.0..1.0));
    let mut a = x.dot(&y);
    if noise > 0.0 {
        a.mapv_inplace(|v| (v + noise * rng.sample::<f64, _>(StandardNormal)).max(0.0));
    }
    Ok(PlantedFactorization { a, x, y, sparsity: s })
}

/// Piecewise-smooth grayscale test image with values in `[0, 1]`.
pub fn test_image(rows: usize, cols: usize) -> Array2<f64> {
    let (h, w) = (rows as f64, cols as f64);
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (r, c) = (i as f64 / h, j as f64 / w);
        let mut v = 0.15 + 0.2 * c;
        if (0.15..0.45).contains(&r) && (0.1..0.5).contains(&c) {
            v = 0.85;
        }
        let (dr, dc) = (r - 0.65, c - 0.65);
        if dr * dr + dc * dc < 0.04 {
            v = 0.6;
        }
        if (0.7..0.9).contains(&r) && (0.1..0.35).contains(&c) && ((j / 3) % 2 == 0) {
            v = 1.0;
        }
        v
    })
}

/// Normalised linear motion blur of odd side `size` along `angle_deg`.
pub fn motion_kernel(size: usize, angle_deg: f64) -> Result<Array2<f64>> {
    if size % 2 == 0 {
        return Err(Error::InvalidParameter(format!("kernel size must be odd, got {size}")));
    }
    let c = (size / 2) as f64;
    let (s, co) = angle_deg.to_radians().sin_cos();
    let mut k: Array2<f64> = Array2::zeros((size, size));
    let steps = 8 * size;
    for t in 0..=steps {
        let r = -c + 2.0 * c * t as f64 / steps as f64;
        let (i, j) = ((c - r * s).round() as usize, (c + r * co).round() as usize);
        k[[i.min(size - 1), j.min(size - 1)]] += 1.0;
    }
    let total = k.sum();
    Ok(k / total)
}

/// Circular blur plus Gaussian noise, clamped to `[0, 1]`.
pub fn blur(image: &Array2<f64>, kernel: &Array2<f64>, noise: f64, seed: u64) -> Result<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = conv2d_circular(image.view(), kernel.view())?;
    out.mapv_inplace(|v| (v + noise * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0));
    Ok(out)
}
