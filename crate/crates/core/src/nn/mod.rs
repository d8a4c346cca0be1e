//! A small f64 layer library with explicit forward/backward passes.
//!
//! Every layer returns a tape from `forward` and accumulates parameter
//! gradients in `backward`. All matrix products go through [`gemm`], which
//! is single-threaded and therefore bit-reproducible.

mod conv;
mod gemm;
mod gru;
mod linear;
mod param;

pub use conv::{col2im, im2col, Conv2d, ConvTape, ConvTranspose2d, ConvTransposeTape};
pub use gemm::gemm;
pub use gru::{Gru, GruTape};
pub use linear::Linear;
pub use param::{Adam, Param, Parameterized};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` wherever the post-ReLU activation is not positive.
pub fn relu_backward_inplace(activated: &[f64], grad: &mut [f64]) {
    for (g, a) in grad.iter_mut().zip(activated) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}
