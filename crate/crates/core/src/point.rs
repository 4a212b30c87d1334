//! Block points `z = (x, y)`, the four-slot iterate history and inertial
//! extrapolation.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{ensure_finite, ensure_same_len, Result};

/// Paired iterate `z = (x, y)`. Matrix blocks are stored flattened, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPoint {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
}

impl BlockPoint {
    pub fn new(x: Array1<f64>, y: Array1<f64>) -> Result<Self> {
        ensure_finite(x.iter(), "block point x")?;
        ensure_finite(y.iter(), "block point y")?;
        Ok(Self { x, y })
    }

    pub fn zeros(x_dim: usize, y_dim: usize) -> Self {
        Self { x: Array1::zeros(x_dim), y: Array1::zeros(y_dim) }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    /// `‖z − other‖²` over both blocks.
    pub fn dist_sq(&self, other: &BlockPoint) -> f64 {
        sq_dist(self.x.view(), other.x.view()) + sq_dist(self.y.view(), other.y.view())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    Zip::from(&a).and(&b).fold(0.0, |acc, &p, &q| acc + (p - q) * (p - q))
}

pub(crate) fn sq_norm(a: ArrayView1<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Sliding history `z_k, z_{k-1}, z_{k-2}, z_{k-3}`, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateWindow {
    slots: [BlockPoint; 4],
}

impl IterateWindow {
    /// All four slots start at `z0`, i.e. `z_{-i} = z_0`.
    pub fn new(z0: BlockPoint) -> Self {
        Self { slots: [z0.clone(), z0.clone(), z0.clone(), z0] }
    }

    /// `lag = 0` is `z_k`, `lag = 3` is `z_{k-3}`.
    pub fn get(&self, lag: usize) -> &BlockPoint {
        &self.slots[lag]
    }

    pub fn current(&self) -> &BlockPoint {
        &self.slots[0]
    }

    /// Shifts every slot back by one; the oldest point is dropped.
    pub fn push(&mut self, z: BlockPoint) {
        self.slots.rotate_right(1);
        self.slots[0] = z;
    }

    /// `[‖z_k−z_{k-1}‖², ‖z_{k-1}−z_{k-2}‖², ‖z_{k-2}−z_{k-3}‖²]`.
    pub fn displacements_sq(&self) -> [f64; 3] {
        [
            self.slots[0].dist_sq(&self.slots[1]),
            self.slots[1].dist_sq(&self.slots[2]),
            self.slots[2].dist_sq(&self.slots[3]),
        ]
    }
}

/// `x_k + c1 (x_k − x_{k-1}) + c2 (x_{k-1} − x_{k-2})`.
pub fn extrapolate(
    x_k: ArrayView1<f64>,
    x_km1: ArrayView1<f64>,
    x_km2: ArrayView1<f64>,
    c1: f64,
    c2: f64,
) -> Result<Array1<f64>> {
    ensure_same_len(x_k.len(), x_km1.len(), "extrapolate x_{k-1}")?;
    ensure_same_len(x_k.len(), x_km2.len(), "extrapolate x_{k-2}")?;
    let mut out = x_k.to_owned();
    if c1 != 0.0 || c2 != 0.0 {
        Zip::from(&mut out)
            .and(&x_k)
            .and(&x_km1)
            .and(&x_km2)
            .for_each(|o, &a, &b, &c| *o = a + c1 * (a - b) + c2 * (b - c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_inertia_is_identity() {
        let x = array![1.0, -2.0, 3.5];
        let u = extrapolate(x.view(), array![0.0, 0.0, 0.0].view(), array![9.0, 9.0, 9.0].view(), 0.0, 0.0)
            .unwrap();
        assert_eq!(u, x);
    }

    #[test]
    fn scalar_arithmetic() {
        let u = extrapolate(array![2.0].view(), array![1.0].view(), array![0.0].view(), 0.5, 0.5).unwrap();
        assert_eq!(u[0], 3.0);
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(extrapolate(array![1.0, 2.0].view(), array![1.0].view(), array![1.0, 2.0].view(), 0.1, 0.1)
            .is_err());
    }

    #[test]
    fn window_starts_constant_and_shifts() {
        let z0 = BlockPoint::new(array![0.0], array![1.0]).unwrap();
        let mut w = IterateWindow::new(z0.clone());
        for lag in 0..4 {
            assert_eq!(w.get(lag), &z0);
        }
        let z1 = BlockPoint::new(array![1.0], array![1.0]).unwrap();
        w.push(z1.clone());
        assert_eq!(w.get(0), &z1);
        assert_eq!(w.get(1), &z0);
        assert_eq!(w.displacements_sq(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_point_rejected() {
        assert!(BlockPoint::new(array![f64::NAN], array![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn fixed_point_of_constant_history(x in prop::collection::vec(-10.0f64..10.0, 1..8),
                                           c1 in 0.0f64..2.0, c2 in 0.0f64..2.0) {
            let x = Array1::from(x);
            let u = extrapolate(x.view(), x.view(), x.view(), c1, c2).unwrap();
            prop_assert_eq!(u, x);
        }

        #[test]
        fn affine_in_newest_argument(a in prop::collection::vec(-5.0f64..5.0, 3),
                                     b in prop::collection::vec(-5.0f64..5.0, 3),
                                     c1 in 0.0f64..1.0, c2 in 0.0f64..1.0, t in -2.0f64..2.0) {
            let (a, b) = (Array1::from(a), Array1::from(b));
            let p = Array1::from(vec![0.3, -0.7, 1.1]);
            let q = Array1::from(vec![-1.0, 0.5, 0.2]);
            let mix = &a * t + &b * (1.0 - t);
            let lhs = extrapolate(mix.view(), p.view(), q.view(), c1, c2).unwrap();
            let rhs = extrapolate(a.view(), p.view(), q.view(), c1, c2).unwrap() * t
                + extrapolate(b.view(), p.view(), q.view(), c1, c2).unwrap() * (1.0 - t);
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((l - r).abs() < 1e-9);
            }
        }
    }
}
