//! Minimal neural-network plumbing: layers with hand-coded backprop and an
//! Adam optimizer.
//!
//! Everything is generic over the element type so the training path can run
//! in `f32` while gradient checks instantiate the exact same code in `f64`.
//! All computation is single-threaded and allocation order is fixed, which
//! keeps runs bit-reproducible for a given rng stream.

mod adam;
mod conv;
mod linear;

pub use adam::{AdamConfig, AdamState};
pub use conv::{col2im, im2col, Conv2d, ConvTranspose2d};
pub use linear::Linear;

use ndarray::{Array, Dimension};
use rand::Rng;
use rand_distr::StandardNormal;

/// Element type of all network tensors.
pub trait Element:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    fn from_scalar(x: f64) -> Self;
    fn to_scalar(self) -> f64;
}

impl Element for f32 {
    fn from_scalar(x: f64) -> Self {
        x as f32
    }
    fn to_scalar(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    fn from_scalar(x: f64) -> Self {
        x
    }
    fn to_scalar(self) -> f64 {
        self
    }
}

/// Draws are made in `f64` and cast, so f32 and f64 instantiations see the
/// same underlying random sequence.
pub fn sample_normal<T: Element, R: Rng>(rng: &mut R, std: f64) -> T {
    let x: f64 = rng.sample(StandardNormal);
    T::from_scalar(x * std)
}

pub fn fill_normal<T: Element, D: Dimension, R: Rng>(arr: &mut Array<T, D>, std: f64, rng: &mut R) {
    for v in arr.iter_mut() {
        *v = sample_normal(rng, std);
    }
}

pub fn leaky_relu<T: Element, D: Dimension>(x: &Array<T, D>, slope: T) -> Array<T, D> {
    x.mapv(|v| if v > T::zero() { v } else { slope * v })
}

/// Gradient through leaky ReLU given the pre-activation values.
pub fn leaky_relu_backward<T: Element, D: Dimension>(
    pre: &Array<T, D>,
    grad_out: &Array<T, D>,
    slope: T,
) -> Array<T, D> {
    let mut g = grad_out.clone();
    ndarray::Zip::from(&mut g).and(pre).for_each(|g, &p| {
        if p <= T::zero() {
            *g *= slope;
        }
    });
    g
}

/// Mutable access to one parameter tensor and its gradient, in the fixed
/// visit order shared by the optimizer and the checkpoint format.
pub struct TensorEntry<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub param: &'a mut [T],
    pub grad: &'a mut [T],
}

/// Read-only view of one parameter tensor.
pub struct TensorView<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}
