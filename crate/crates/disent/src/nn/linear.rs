use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::{fill_normal, Element};

/// Fully connected layer `y = x W^T + b` with accumulated gradients.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    /// (out, in)
    pub w: Array2<T>,
    pub b: Array1<T>,
    pub gw: Array2<T>,
    pub gb: Array1<T>,
}

impl<T: Element> Linear<T> {
    pub fn init<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let mut w = Array2::zeros((out_dim, in_dim));
        fill_normal(&mut w, (1.0 / in_dim as f64).sqrt(), rng);
        Self {
            w,
            b: Array1::zeros(out_dim),
            gw: Array2::zeros((out_dim, in_dim)),
            gb: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    /// x: (n, in) -> (n, out)
    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Array2<T>, grad_y: &Array2<T>) -> Array2<T> {
        self.gw = &self.gw + &grad_y.t().dot(x);
        self.gb = &self.gb + &grad_y.sum_axis(Axis(0));
        grad_y.dot(&self.w)
    }

    /// Input gradient only; parameter gradients stay untouched.
    pub fn backward_data(&self, grad_y: &Array2<T>) -> Array2<T> {
        grad_y.dot(&self.w)
    }

    pub fn zero_grad(&mut self) {
        self.gw.fill(T::zero());
        self.gb.fill(T::zero());
    }

    pub fn entries(&mut self, prefix: &str) -> Vec<super::TensorEntry<'_, T>> {
        let Linear { w, b, gw, gb } = self;
        let w_shape = w.shape().to_vec();
        let b_shape = b.shape().to_vec();
        vec![
            super::TensorEntry {
                name: format!("{prefix}.w"),
                shape: w_shape,
                param: w.as_slice_mut().unwrap(),
                grad: gw.as_slice_mut().unwrap(),
            },
            super::TensorEntry {
                name: format!("{prefix}.b"),
                shape: b_shape,
                param: b.as_slice_mut().unwrap(),
                grad: gb.as_slice_mut().unwrap(),
            },
        ]
    }

    pub fn views(&self, prefix: &str) -> Vec<super::TensorView<'_, T>> {
        vec![
            super::TensorView {
                name: format!("{prefix}.w"),
                shape: self.w.shape().to_vec(),
                data: self.w.as_slice().unwrap(),
            },
            super::TensorView {
                name: format!("{prefix}.b"),
                shape: self.b.shape().to_vec(),
                data: self.b.as_slice().unwrap(),
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_manual_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = Linear::<f64>::init(2, 3, &mut rng);
        layer.w = arr2(&[[1.0, 0.0, -1.0], [2.0, 1.0, 0.5]]);
        layer.b = ndarray::arr1(&[0.5, -0.5]);
        let x = arr2(&[[1.0, 2.0, 3.0]]);
        let y = layer.forward(&x);
        assert_eq!(y, arr2(&[[1.0 + 0.0 - 3.0 + 0.5, 2.0 + 2.0 + 1.5 - 0.5]]));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = Linear::<f64>::init(3, 4, &mut rng);
        let x = {
            let mut x = Array2::zeros((2, 4));
            super::super::fill_normal(&mut x, 1.0, &mut rng);
            x
        };
        let g_out = {
            let mut g = Array2::zeros((2, 3));
            super::super::fill_normal(&mut g, 1.0, &mut rng);
            g
        };
        let mut l = layer.clone();
        let gx = l.backward(&x, &g_out);

        let h = 1e-6;
        // input gradient
        for i in 0..2 {
            for j in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[[i, j]] += h;
                xm[[i, j]] -= h;
                let fd = ((&layer.forward(&xp) * &g_out).sum() - (&layer.forward(&xm) * &g_out).sum())
                    / (2.0 * h);
                assert!((fd - gx[[i, j]]).abs() < 1e-7);
            }
        }
        // weight gradient
        for oi in 0..3 {
            for ii in 0..4 {
                let mut lp = layer.clone();
                let mut lm = layer.clone();
                lp.w[[oi, ii]] += h;
                lm.w[[oi, ii]] -= h;
                let fd = ((&lp.forward(&x) * &g_out).sum() - (&lm.forward(&x) * &g_out).sum())
                    / (2.0 * h);
                assert!((fd - l.gw[[oi, ii]]).abs() < 1e-7);
            }
        }
    }
}
