//! The constraint projections: hard thresholding onto sparse nonnegative
//! columns, and the box-and-mass projection used for blur kernels.

use anyhow::Result;
use ndarray::array;
use stibpalm::problems::projection::{prox_bid_x, prox_bid_y, prox_snmf_x};

fn main() -> Result<()> {
    let v = array![[0.9, -0.2], [-1.0, 0.4], [0.3, 0.4], [0.5, 0.1]];
    for s in 1..=3 {
        println!("s = {s}:\n{}", prox_snmf_x(v.view(), s)?);
    }

    let k = array![0.8, 0.6, -0.1, 0.3];
    let p = prox_bid_y(k.view())?;
    println!("kernel {k} -> {p} (mass {:.6})", p.sum());
    println!("image box: {}", prox_bid_x(array![-0.5, 0.25, 1.5].view()));
    Ok(())
}
