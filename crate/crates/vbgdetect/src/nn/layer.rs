//! Layer primitives: same-padding convolution via im2col + GEMM,
//! non-overlapping max-pooling, inverted dropout, dense layers.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::model::NnFloat;

pub(crate) struct ConvLayer<T> {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub relu: bool,
    /// Shape `(k * k * in_c, out_c)`; rows ordered `(ci, ky, kx)`.
    pub w: Array2<T>,
    pub b: Array1<T>,
}

pub(crate) struct DenseLayer<T> {
    pub relu: bool,
    /// Shape `(in, out)`.
    pub w: Array2<T>,
    pub b: Array1<T>,
}

/// Unrolls `x` (c, h, w) into receptive-field rows with zero padding
/// `k / 2`: output is `(k * k * c, h * w)` so each `(ci, ky, kx)` tap row is
/// filled with contiguous source-row copies.
fn im2col<T: NnFloat>(x: &Array3<T>, k: usize) -> Array2<T> {
    let (c, h, w) = x.dim();
    let p = (k / 2) as i64;
    let mut cols = Array2::zeros((k * k * c, h * w));
    let xs = x.as_slice().expect("contiguous");
    let cs = cols.as_slice_mut().expect("contiguous");
    for ci in 0..c {
        for ky in 0..k {
            let dy = ky as i64 - p;
            for kx in 0..k {
                let dx = kx as i64 - p;
                let row_base = ((ci * k + ky) * k + kx) * h * w;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as i64 - dx).min(w as i64) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as i64 + dy;
                    if sy < 0 || sy >= h as i64 {
                        continue;
                    }
                    let src = (ci * h + sy as usize) * w + (x0 as i64 + dx) as usize;
                    let dst = row_base + y * w + x0;
                    cs[dst..dst + x1 - x0].copy_from_slice(&xs[src..src + x1 - x0]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: accumulates tap-row gradients back onto the
/// input grid.
fn col2im<T: NnFloat>(dcols: &Array2<T>, c: usize, h: usize, w: usize, k: usize) -> Array3<T> {
    let p = (k / 2) as i64;
    let mut dx = Array3::zeros((c, h, w));
    let ds = dcols.as_slice().expect("contiguous");
    let out = dx.as_slice_mut().expect("contiguous");
    for ci in 0..c {
        for ky in 0..k {
            let dy = ky as i64 - p;
            for kx in 0..k {
                let dxo = kx as i64 - p;
                let row_base = ((ci * k + ky) * k + kx) * h * w;
                let x0 = (-dxo).max(0) as usize;
                let x1 = (w as i64 - dxo).min(w as i64) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as i64 + dy;
                    if sy < 0 || sy >= h as i64 {
                        continue;
                    }
                    let dst = (ci * h + sy as usize) * w + (x0 as i64 + dxo) as usize;
                    let src = row_base + y * w + x0;
                    for i in 0..x1 - x0 {
                        out[dst + i] += ds[src + i];
                    }
                }
            }
        }
    }
    dx
}

impl<T: NnFloat> ConvLayer<T> {
    /// Returns pre-activation output `(out_c, h, w)`.
    pub fn forward(&self, x: &Array3<T>) -> Array3<T> {
        let (_, h, w) = x.dim();
        let cols = im2col(x, self.k);
        // (out_c, kkc) x (kkc, hw) lands directly in feature-map layout.
        let mut out = self.w.t().dot(&cols);
        for (oc, mut row) in out.rows_mut().into_iter().enumerate() {
            let b = self.b[oc];
            row.mapv_inplace(|v| v + b);
        }
        let data = if out.is_standard_layout() {
            out.into_raw_vec_and_offset().0
        } else {
            out.iter().copied().collect()
        };
        Array3::from_shape_vec((self.out_c, h, w), data).expect("length matches shape")
    }

    /// Gradient of the loss w.r.t. input, weights and bias. `dz` must
    /// already include the ReLU mask when the layer has one.
    pub fn backward(&self, x: &Array3<T>, dz: &Array3<T>) -> (Array3<T>, Array2<T>, Array1<T>) {
        let (c, h, w) = x.dim();
        let dz2 = dz
            .view()
            .into_shape_with_order((self.out_c, h * w))
            .expect("contiguous");
        let db = Array1::from_iter(dz2.rows().into_iter().map(|r| r.sum()));
        let cols = im2col(x, self.k);
        let dw = cols.dot(&dz2.t()); // (kkc, out_c)
        let dcols = self.w.dot(&dz2); // (kkc, hw)
        let dx = col2im(&dcols, c, h, w, self.k);
        (dx, dw, db)
    }
}

impl<T: NnFloat> DenseLayer<T> {
    pub fn forward(&self, x: &Array1<T>) -> Array1<T> {
        x.dot(&self.w) + &self.b
    }

    pub fn backward(&self, x: &Array1<T>, dz: &Array1<T>) -> (Array1<T>, Array2<T>, Array1<T>) {
        // Outer product, built directly to keep a standard layout.
        let dw = Array2::from_shape_fn((x.len(), dz.len()), |(i, j)| x[i] * dz[j]);
        let dx = self.w.dot(dz);
        (dx, dw, dz.clone())
    }
}

pub(crate) fn relu_forward<T: NnFloat>(z: &mut [T]) {
    for v in z {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `dz` by the ReLU derivative taken at the pre-activation `pre`.
pub(crate) fn relu_backward<T: NnFloat>(dz: &mut [T], pre: &[T]) {
    for (d, &p) in dz.iter_mut().zip(pre) {
        if p <= T::zero() {
            *d = T::zero();
        }
    }
}

/// Non-overlapping max pool; returns the output and the flat input index of
/// each selected maximum (first occurrence wins on ties).
pub(crate) fn maxpool_forward<T: NnFloat>(
    x: &Array3<T>,
    size: usize,
    stride: usize,
) -> (Array3<T>, Vec<u32>) {
    let (c, h, w) = x.dim();
    let oh = (h - size) / stride + 1;
    let ow = (w - size) / stride + 1;
    let mut out = Array3::zeros((c, oh, ow));
    let mut argmax = vec![0u32; c * oh * ow];
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = T::neg_infinity();
                let mut best_idx = 0usize;
                for ky in 0..size {
                    for kx in 0..size {
                        let (sy, sx) = (oy * stride + ky, ox * stride + kx);
                        let v = x[[ci, sy, sx]];
                        if v > best {
                            best = v;
                            best_idx = (ci * h + sy) * w + sx;
                        }
                    }
                }
                out[[ci, oy, ox]] = best;
                argmax[(ci * oh + oy) * ow + ox] = best_idx as u32;
            }
        }
    }
    (out, argmax)
}

pub(crate) fn maxpool_backward<T: NnFloat>(
    dout: &Array3<T>,
    argmax: &[u32],
    in_shape: (usize, usize, usize),
) -> Array3<T> {
    let mut dx = Array3::zeros(in_shape);
    let flat = dx.as_slice_mut().expect("contiguous");
    for (g, &idx) in dout.iter().zip(argmax) {
        flat[idx as usize] += *g;
    }
    dx
}

/// Inverted-dropout mask: each element is `0` with probability `p`, else
/// `1 / (1 - p)`, so the train-mode expectation equals the eval-mode value.
pub(crate) fn dropout_mask<T: NnFloat>(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let keep = T::from(1.0 / (1.0 - p)).expect("p < 1");
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

/// He-uniform initialization: `U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))`.
pub(crate) fn he_uniform<T: NnFloat>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<T> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        T::from(rng.random_range(-limit..limit)).expect("finite")
    })
}
