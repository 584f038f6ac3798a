use ndarray::{Array1, Array2, Array4, Axis};
use rand::Rng;

use super::{fill_normal, Element};

/// Unrolls conv patches of `input` (n, c, h, w) into a (c*k*k, n*oh*ow)
/// matrix. Out-of-bounds taps (from padding) stay zero.
pub fn im2col<T: Element>(input: &Array4<T>, k: usize, stride: usize, pad: usize) -> Array2<T> {
    let (n, c, h, w) = input.dim();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let l = n * oh * ow;
    let mut cols = Array2::<T>::zeros((c * k * k, l));
    let x = input.as_slice().expect("input is standard layout");
    let cs = cols.as_slice_mut().expect("freshly allocated");

    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let row = &mut cs[r * l..(r + 1) * l];
                for ni in 0..n {
                    let base_in = (ni * c + ci) * h * w;
                    for oy in 0..oh {
                        let y = (oy * stride + ky) as isize - pad as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let in_row = base_in + y as usize * w;
                        let col_base = (ni * oh + oy) * ow;
                        for ox in 0..ow {
                            let xx = (ox * stride + kx) as isize - pad as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            row[col_base + ox] = x[in_row + xx as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add inverse of [`im2col`]: folds a (c*k*k, n*oh*ow) matrix back
/// onto an (n, c, h, w) image grid.
#[allow(clippy::too_many_arguments)]
pub fn col2im<T: Element>(
    cols: &Array2<T>,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Array4<T> {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let l = n * oh * ow;
    debug_assert_eq!(cols.dim(), (c * k * k, l));
    let mut out = Array4::<T>::zeros((n, c, h, w));
    let o = out.as_slice_mut().expect("freshly allocated");
    let cs = cols.as_slice().expect("cols is standard layout");

    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let row = &cs[r * l..(r + 1) * l];
                for ni in 0..n {
                    let base_out = (ni * c + ci) * h * w;
                    for oy in 0..oh {
                        let y = (oy * stride + ky) as isize - pad as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let out_row = base_out + y as usize * w;
                        let col_base = (ni * oh + oy) * ow;
                        for ox in 0..ow {
                            let xx = (ox * stride + kx) as isize - pad as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let idx = out_row + xx as usize;
                            o[idx] += row[col_base + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Strided convolution backed by im2col + GEMM.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    /// (out_channels, in_channels, k, k)
    pub w: Array4<T>,
    pub b: Array1<T>,
    pub gw: Array4<T>,
    pub gb: Array1<T>,
    pub stride: usize,
    pub pad: usize,
}

impl<T: Element> Conv2d<T> {
    pub fn init<R: Rng>(
        out_c: usize,
        in_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let mut w = Array4::zeros((out_c, in_c, k, k));
        fill_normal(&mut w, (1.0 / (in_c * k * k) as f64).sqrt(), rng);
        Self {
            w,
            b: Array1::zeros(out_c),
            gw: Array4::zeros((out_c, in_c, k, k)),
            gb: Array1::zeros(out_c),
            stride,
            pad,
        }
    }

    pub fn out_size(&self, h: usize) -> usize {
        let k = self.w.dim().2;
        (h + 2 * self.pad - k) / self.stride + 1
    }

    /// x: (n, in_c, h, w) -> (n, out_c, oh, ow)
    pub fn forward(&self, x: &Array4<T>) -> Array4<T> {
        let (n, _, h, w) = x.dim();
        let (oc, ic, k, _) = self.w.dim();
        let oh = self.out_size(h);
        let ow = self.out_size(w);
        let cols = im2col(x, k, self.stride, self.pad);
        let w_mat = self.w.view().into_shape_with_order((oc, ic * k * k)).unwrap();
        let out_mat = w_mat.dot(&cols); // (oc, n*oh*ow)
        let mut y = out_mat
            .into_shape_with_order((oc, n, oh, ow))
            .unwrap()
            .permuted_axes([1, 0, 2, 3])
            .as_standard_layout()
            .into_owned();
        y += &self.b.view().into_shape_with_order((1, oc, 1, 1)).unwrap();
        y
    }

    /// Accumulates weight gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Array4<T>, grad_y: &Array4<T>) -> Array4<T> {
        let (n, c, h, w) = x.dim();
        let (oc, ic, k, _) = self.w.dim();
        let l = grad_y.len() / oc;
        let cols = im2col(x, k, self.stride, self.pad);
        let gy_mat = grad_y
            .view()
            .permuted_axes([1, 0, 2, 3])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((oc, l))
            .unwrap();
        let gw_mat = gy_mat.dot(&cols.t()); // (oc, ic*k*k)
        self.gw = &self.gw + &gw_mat.into_shape_with_order((oc, ic, k, k)).unwrap();
        self.gb = &self.gb + &gy_mat.sum_axis(Axis(1));
        let w_mat = self.w.view().into_shape_with_order((oc, ic * k * k)).unwrap();
        let gcols = w_mat.t().dot(&gy_mat); // (ic*k*k, l)
        col2im(&gcols, n, c, h, w, k, self.stride, self.pad)
    }

    pub fn zero_grad(&mut self) {
        self.gw.fill(T::zero());
        self.gb.fill(T::zero());
    }

    pub fn entries(&mut self, prefix: &str) -> Vec<super::TensorEntry<'_, T>> {
        let Conv2d { w, b, gw, gb, .. } = self;
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

/// Transposed (fractionally strided) convolution; the exact adjoint of
/// [`Conv2d`] with the same geometry.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T> {
    /// (in_channels, out_channels, k, k)
    pub w: Array4<T>,
    pub b: Array1<T>,
    pub gw: Array4<T>,
    pub gb: Array1<T>,
    pub stride: usize,
    pub pad: usize,
}

impl<T: Element> ConvTranspose2d<T> {
    pub fn init<R: Rng>(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let mut w = Array4::zeros((in_c, out_c, k, k));
        fill_normal(&mut w, (1.0 / (in_c * k * k) as f64).sqrt(), rng);
        Self {
            w,
            b: Array1::zeros(out_c),
            gw: Array4::zeros((in_c, out_c, k, k)),
            gb: Array1::zeros(out_c),
            stride,
            pad,
        }
    }

    pub fn out_size(&self, h: usize) -> usize {
        let k = self.w.dim().2;
        (h - 1) * self.stride + k - 2 * self.pad
    }

    /// x: (n, in_c, h, w) -> (n, out_c, oh, ow)
    pub fn forward(&self, x: &Array4<T>) -> Array4<T> {
        let (n, ic, h, w) = x.dim();
        let (_, oc, k, _) = self.w.dim();
        let oh = self.out_size(h);
        let ow = self.out_size(w);
        let x_mat = x
            .view()
            .permuted_axes([1, 0, 2, 3])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((ic, n * h * w))
            .unwrap();
        let w_mat = self.w.view().into_shape_with_order((ic, oc * k * k)).unwrap();
        let cols = w_mat.t().dot(&x_mat); // (oc*k*k, n*h*w)
        let mut y = col2im(&cols, n, oc, oh, ow, k, self.stride, self.pad);
        y += &self.b.view().into_shape_with_order((1, oc, 1, 1)).unwrap();
        y
    }

    pub fn backward(&mut self, x: &Array4<T>, grad_y: &Array4<T>) -> Array4<T> {
        let (n, ic, h, w) = x.dim();
        let (_, oc, k, _) = self.w.dim();
        let x_mat = x
            .view()
            .permuted_axes([1, 0, 2, 3])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((ic, n * h * w))
            .unwrap();
        let gcols = im2col(grad_y, k, self.stride, self.pad); // (oc*k*k, n*h*w)
        let gw_mat = x_mat.dot(&gcols.t()); // (ic, oc*k*k)
        self.gw = &self.gw + &gw_mat.into_shape_with_order((ic, oc, k, k)).unwrap();
        self.gb = &self.gb + &grad_y.sum_axis(Axis(0)).sum_axis(Axis(1)).sum_axis(Axis(1));
        let w_mat = self.w.view().into_shape_with_order((ic, oc * k * k)).unwrap();
        let gx_mat = w_mat.dot(&gcols); // (ic, n*h*w)
        gx_mat
            .into_shape_with_order((ic, n, h, w))
            .unwrap()
            .permuted_axes([1, 0, 2, 3])
            .as_standard_layout()
            .into_owned()
    }

    pub fn zero_grad(&mut self) {
        self.gw.fill(T::zero());
        self.gb.fill(T::zero());
    }

    pub fn entries(&mut self, prefix: &str) -> Vec<super::TensorEntry<'_, T>> {
        let ConvTranspose2d { w, b, gw, gb, .. } = self;
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
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random4(shape: (usize, usize, usize, usize), rng: &mut ChaCha8Rng) -> Array4<f64> {
        let mut a = Array4::zeros(shape);
        super::super::fill_normal(&mut a, 1.0, rng);
        a
    }

    /// Direct nested-loop convolution used as an oracle.
    fn conv_naive(x: &Array4<f64>, w: &Array4<f64>, b: &Array1<f64>, s: usize, p: usize) -> Array4<f64> {
        let (n, ic, h, wd) = x.dim();
        let (oc, _, k, _) = w.dim();
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (wd + 2 * p - k) / s + 1;
        let mut y = Array4::zeros((n, oc, oh, ow));
        for ni in 0..n {
            for o in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[o];
                        for ci in 0..ic {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let yy = (oy * s + ky) as isize - p as isize;
                                    let xx = (ox * s + kx) as isize - p as isize;
                                    if yy >= 0 && yy < h as isize && xx >= 0 && xx < wd as isize {
                                        acc += x[[ni, ci, yy as usize, xx as usize]]
                                            * w[[o, ci, ky, kx]];
                                    }
                                }
                            }
                        }
                        y[[ni, o, oy, ox]] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_forward_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv2d::<f64>::init(3, 2, 4, 2, 1, &mut rng);
        let x = random4((2, 2, 8, 8), &mut rng);
        let fast = conv.forward(&x);
        let slow = conv_naive(&x, &conv.w, &conv.b, 2, 1);
        assert_eq!(fast.dim(), (2, 3, 4, 4));
        let max_err = (&fast - &slow).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_err < 1e-12, "max error {max_err}");
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv2d::<f64>::init(2, 1, 3, 2, 1, &mut rng);
        let x = random4((1, 1, 5, 5), &mut rng);
        let g_out = random4((1, 2, 3, 3), &mut rng);

        let mut c = conv.clone();
        let gx = c.backward(&x, &g_out);

        let h = 1e-6;
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            xm.as_slice_mut().unwrap()[idx] -= h;
            let fd = ((&conv.forward(&xp) * &g_out).sum() - (&conv.forward(&xm) * &g_out).sum())
                / (2.0 * h);
            assert!((fd - gx.as_slice().unwrap()[idx]).abs() < 1e-7);
        }
        for idx in 0..conv.w.len() {
            let mut cp = conv.clone();
            let mut cm = conv.clone();
            cp.w.as_slice_mut().unwrap()[idx] += h;
            cm.w.as_slice_mut().unwrap()[idx] -= h;
            let fd = ((&cp.forward(&x) * &g_out).sum() - (&cm.forward(&x) * &g_out).sum())
                / (2.0 * h);
            assert!((fd - c.gw.as_slice().unwrap()[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn deconv_doubles_spatial_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let deconv = ConvTranspose2d::<f64>::init(3, 2, 4, 2, 1, &mut rng);
        let x = random4((2, 3, 4, 4), &mut rng);
        assert_eq!(deconv.forward(&x).dim(), (2, 2, 8, 8));
    }

    #[test]
    fn deconv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, deconv(y)> when deconv shares conv's kernel.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conv = Conv2d::<f64>::init(3, 2, 4, 2, 1, &mut rng);
        let mut deconv = ConvTranspose2d::<f64>::init(3, 2, 4, 2, 1, &mut rng);
        // deconv weights (ic=3, oc=2) mirror conv weights (oc=3, ic=2)
        for o in 0..3 {
            for c in 0..2 {
                for ky in 0..4 {
                    for kx in 0..4 {
                        deconv.w[[o, c, ky, kx]] = conv.w[[o, c, ky, kx]];
                    }
                }
            }
        }
        deconv.b.fill(0.0);
        let mut conv0 = conv.clone();
        conv0.b.fill(0.0);

        let x = random4((1, 2, 8, 8), &mut rng);
        let y = random4((1, 3, 4, 4), &mut rng);
        let lhs = (&conv0.forward(&x) * &y).sum();
        let rhs = (&x * &deconv.forward(&y)).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn deconv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let deconv = ConvTranspose2d::<f64>::init(2, 1, 4, 2, 1, &mut rng);
        let x = random4((1, 2, 3, 3), &mut rng);
        let g_out = random4((1, 1, 6, 6), &mut rng);

        let mut d = deconv.clone();
        let gx = d.backward(&x, &g_out);

        let h = 1e-6;
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            xm.as_slice_mut().unwrap()[idx] -= h;
            let fd = ((&deconv.forward(&xp) * &g_out).sum()
                - (&deconv.forward(&xm) * &g_out).sum())
                / (2.0 * h);
            assert!((fd - gx.as_slice().unwrap()[idx]).abs() < 1e-7);
        }
        for idx in 0..deconv.w.len() {
            let mut dp = deconv.clone();
            let mut dm = deconv.clone();
            dp.w.as_slice_mut().unwrap()[idx] += h;
            dm.w.as_slice_mut().unwrap()[idx] -= h;
            let fd = ((&dp.forward(&x) * &g_out).sum() - (&dm.forward(&x) * &g_out).sum())
                / (2.0 * h);
            assert!((fd - d.gw.as_slice().unwrap()[idx]).abs() < 1e-7);
        }
    }
}
