//! Periodic two-dimensional convolution and its adjoints.
//!
//! `(X ⊙ K)(i, j) = Σ_{a,b} K(a, b) · X(i − a + c_r, j − b + c_c)` with indices
//! taken modulo the image size and `(c_r, c_c)` the kernel centre.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};

pub(crate) fn check_kernel(image: (usize, usize), kernel: (usize, usize)) -> Result<()> {
    let (kh, kw) = kernel;
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::InvalidParameter(format!("kernel must be odd-sized, got {kh}x{kw}")));
    }
    if kh > image.0 || kw > image.1 {
        return Err(Error::InvalidParameter(format!(
            "kernel {kh}x{kw} larger than image {}x{}",
            image.0, image.1
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Circular convolution; the output has the size of `x`.
pub fn conv2d_circular(x: ArrayView2<f64>, k: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (d1, d2) = x.dim();
    check_kernel((d1, d2), k.dim())?;
    let mut out = Array2::zeros((d1, d2));
    conv_rows(x, k, 0..d1, &mut out);
    Ok(out)
}

/// Convolution evaluated only on the given output rows; other rows untouched.
pub(crate) fn conv_rows(x: ArrayView2<f64>, k: ArrayView2<f64>, rows: std::ops::Range<usize>, out: &mut Array2<f64>) {
    let (d1, d2) = x.dim();
    let (kh, kw) = k.dim();
    let (cr, cc) = ((kh / 2) as isize, (kw / 2) as isize);
    for i in rows {
        for j in 0..d2 {
            let mut acc = 0.0;
            for a in 0..kh {
                let xi = wrap(i as isize - a as isize + cr, d1);
                for b in 0..kw {
                    let kv = k[[a, b]];
                    if kv != 0.0 {
                        acc += kv * x[[xi, wrap(j as isize - b as isize + cc, d2)]];
                    }
                }
            }
            out[[i, j]] = acc;
        }
    }
}

/// Adjoint of `X ↦ X ⊙ K`: `⟨X ⊙ K, Z⟩ = ⟨X, correlate(Z, K)⟩`.
pub fn correlate_circular(z: ArrayView2<f64>, k: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (d1, d2) = z.dim();
    check_kernel((d1, d2), k.dim())?;
    let mut out = Array2::zeros((d1, d2));
    scatter_adjoint(z, k, 0..d1, 1.0, out.view_mut());
    Ok(out)
}

/// `out += weight · Aᵀ z` for the residual rows in `rows`, where `A` is
/// convolution by `k`.
pub(crate) fn scatter_adjoint(
    z: ArrayView2<f64>,
    k: ArrayView2<f64>,
    rows: std::ops::Range<usize>,
    weight: f64,
    mut out: ArrayViewMut2<f64>,
) {
    let (d1, d2) = z.dim();
    let (kh, kw) = k.dim();
    let (cr, cc) = ((kh / 2) as isize, (kw / 2) as isize);
    for i in rows {
        for j in 0..d2 {
            let zv = weight * z[[i, j]];
            if zv == 0.0 {
                continue;
            }
            for a in 0..kh {
                let xi = wrap(i as isize - a as isize + cr, d1);
                for b in 0..kw {
                    out[[xi, wrap(j as isize - b as isize + cc, d2)]] += zv * k[[a, b]];
                }
            }
        }
    }
}

/// Adjoint of `K ↦ X ⊙ K` restricted to residual rows `rows`:
/// `out(a, b) += weight · Σ_{i ∈ rows, j} R(i, j) X(i − a + c_r, j − b + c_c)`.
pub(crate) fn kernel_adjoint(
    r: ArrayView2<f64>,
    x: ArrayView2<f64>,
    rows: std::ops::Range<usize>,
    weight: f64,
    mut out: ArrayViewMut2<f64>,
) {
    let (d1, d2) = x.dim();
    let (kh, kw) = out.dim();
    let (cr, cc) = ((kh / 2) as isize, (kw / 2) as isize);
    for a in 0..kh {
        for b in 0..kw {
            let mut acc = 0.0;
            for i in rows.clone() {
                let xi = wrap(i as isize - a as isize + cr, d1);
                for j in 0..d2 {
                    acc += r[[i, j]] * x[[xi, wrap(j as isize - b as isize + cc, d2)]];
                }
            }
            out[[a, b]] += weight * acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
        Array2::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Direct quadruple loop over output pixel and kernel tap.
    fn naive_conv(x: &Array2<f64>, k: &Array2<f64>) -> Array2<f64> {
        let (d1, d2) = x.dim();
        let (kh, kw) = k.dim();
        let mut out = Array2::zeros((d1, d2));
        for i in 0..d1 {
            for j in 0..d2 {
                for a in 0..kh {
                    for b in 0..kw {
                        let si = (i + d1 + kh / 2 - a) % d1;
                        let sj = (j + d2 + kw / 2 - b) % d2;
                        out[[i, j]] += k[[a, b]] * x[[si, sj]];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, (6, 7));
        let mut k = Array2::zeros((3, 3));
        k[[1, 1]] = 1.0;
        assert_eq!(conv2d_circular(x.view(), k.view()).unwrap(), x);
    }

    #[test]
    fn constant_image_sums_kernel() {
        let x = Array2::from_elem((5, 5), 0.7);
        let k = Array2::ones((3, 3));
        let y = conv2d_circular(x.view(), k.view()).unwrap();
        assert!(y.iter().all(|&v| (v - 6.3).abs() < 1e-12));
    }

    #[test]
    fn matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&mut rng, (8, 8));
        let k = random(&mut rng, (3, 3));
        let fast = conv2d_circular(x.view(), k.view()).unwrap();
        let slow = naive_conv(&x, &k);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn even_kernel_rejected() {
        let x = Array2::<f64>::zeros((4, 4));
        assert!(conv2d_circular(x.view(), Array2::zeros((2, 3)).view()).is_err());
        assert!(conv2d_circular(x.view(), Array2::zeros((5, 5)).view()).is_err());
    }

    #[test]
    fn adjoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random(&mut rng, (7, 9));
            let k = random(&mut rng, (3, 5));
            let z = random(&mut rng, (7, 9));
            let lhs = (&conv2d_circular(x.view(), k.view()).unwrap() * &z).sum();
            let rhs = (&correlate_circular(z.view(), k.view()).unwrap() * &x).sum();
            assert!((lhs - rhs).abs() < 1e-10);
            let mut gk = Array2::zeros((3, 5));
            kernel_adjoint(z.view(), x.view(), 0..7, 1.0, gk.view_mut());
            assert!((lhs - (&gk * &k).sum()).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x1, x2) = (random(&mut rng, (6, 6)), random(&mut rng, (6, 6)));
        let k = random(&mut rng, (3, 3));
        let sum = conv2d_circular((&x1 * 2.0 + &x2).view(), k.view()).unwrap();
        let parts = conv2d_circular(x1.view(), k.view()).unwrap() * 2.0 + conv2d_circular(x2.view(), k.view()).unwrap();
        for (a, b) in sum.iter().zip(parts.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
