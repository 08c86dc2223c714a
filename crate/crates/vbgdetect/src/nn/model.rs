//! Network assembly, forward/backward orchestration, and the VBGM model
//! file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{
    dropout_mask, he_uniform, maxpool_backward, maxpool_forward, relu_backward, relu_forward,
    ConvLayer, DenseLayer,
};
use crate::comat::CoMatTensor;
use crate::error::{Error, Result};

/// Float type the network runs at. Training uses `f32`; gradient checks run
/// the identical code in `f64`.
pub trait NnFloat:
    num_traits::Float
    + ndarray::LinalgScalar
    + std::ops::AddAssign
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
}

impl NnFloat for f32 {}
impl NnFloat for f64 {}

/// One architecture entry. Convolutions are stride-1 with same padding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize, relu: bool },
    MaxPool { size: usize, stride: usize },
    Dropout { p: f64 },
    Dense { units: usize, relu: bool },
}

/// Architecture descriptor: input geometry, an input scale applied to the
/// normalized co-occurrence frequencies, and the layer list. A sigmoid head
/// follows the final one-unit dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_bins: usize,
    pub input_channels: usize,
    pub input_scale: f32,
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// The detector architecture: 32x3x3, 32x5x5 + pool + dropout,
    /// 64x3x3, 64x5x5 + pool + dropout, two 256-unit dense layers with
    /// dropout, one-unit head.
    pub fn detector(input_bins: usize) -> Self {
        ArchSpec {
            input_bins,
            input_channels: 6,
            input_scale: input_bins as f32,
            layers: vec![
                LayerSpec::Conv { filters: 32, kernel: 3, relu: true },
                LayerSpec::Conv { filters: 32, kernel: 5, relu: true },
                LayerSpec::MaxPool { size: 3, stride: 3 },
                LayerSpec::Dropout { p: 0.25 },
                LayerSpec::Conv { filters: 64, kernel: 3, relu: true },
                LayerSpec::Conv { filters: 64, kernel: 5, relu: true },
                LayerSpec::MaxPool { size: 3, stride: 3 },
                LayerSpec::Dropout { p: 0.25 },
                LayerSpec::Dense { units: 256, relu: true },
                LayerSpec::Dense { units: 256, relu: true },
                LayerSpec::Dropout { p: 0.5 },
                LayerSpec::Dense { units: 1, relu: false },
            ],
        }
    }

    /// Two-convolution network on an 8x8x6 input, used for gradient
    /// verification.
    pub fn reduced() -> Self {
        ArchSpec {
            input_bins: 8,
            input_channels: 6,
            input_scale: 8.0,
            layers: vec![
                LayerSpec::Conv { filters: 8, kernel: 3, relu: true },
                LayerSpec::Conv { filters: 8, kernel: 5, relu: true },
                LayerSpec::MaxPool { size: 3, stride: 3 },
                LayerSpec::Dropout { p: 0.25 },
                LayerSpec::Dense { units: 16, relu: true },
                LayerSpec::Dense { units: 1, relu: false },
            ],
        }
    }

    /// Drops every dropout layer; masks become trivially absent.
    pub fn without_dropout(&self) -> Self {
        ArchSpec {
            layers: self
                .layers
                .iter()
                .copied()
                .filter(|l| !matches!(l, LayerSpec::Dropout { .. }))
                .collect(),
            ..self.clone()
        }
    }
}

enum Layer<T> {
    Conv(ConvLayer<T>),
    MaxPool { size: usize, stride: usize },
    Dropout { p: f64 },
    Dense(DenseLayer<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl Shape {
    fn len(&self) -> usize {
        match *self {
            Shape::Spatial(c, h, w) => c * h * w,
            Shape::Flat(n) => n,
        }
    }
}

/// Runtime network: layers plus the per-layer input shapes used to route
/// activations and gradients.
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    in_shapes: Vec<Shape>,
    input_shape: (usize, usize, usize),
}

enum Act<T> {
    Spatial(Array3<T>),
    Flat(Array1<T>),
}

impl<T: NnFloat> Act<T> {
    fn flatten(self) -> Array1<T> {
        match self {
            Act::Flat(v) => v,
            Act::Spatial(a) => {
                let v: Vec<T> = a.iter().copied().collect();
                Array1::from_vec(v)
            }
        }
    }
}

enum Trace<T> {
    Conv { x: Array3<T>, pre: Array3<T> },
    Pool { argmax: Vec<u32>, in_shape: (usize, usize, usize) },
    Dropout { mask: Vec<T> },
    Dense { x: Array1<T>, pre: Array1<T> },
}

/// Activations and dropout masks recorded by a training-mode forward pass.
pub struct Cache<T> {
    traces: Vec<Trace<T>>,
    /// Raw network output before the sigmoid.
    pub logit: T,
    layer_count: usize,
    input_shape: (usize, usize, usize),
}

impl<T: NnFloat> Cache<T> {
    /// Dropout masks in layer order, for mask-frozen re-evaluation.
    pub fn masks(&self) -> DropoutMasks<T> {
        DropoutMasks(
            self.traces
                .iter()
                .filter_map(|t| match t {
                    Trace::Dropout { mask } => Some(mask.clone()),
                    _ => None,
                })
                .collect(),
        )
    }
}

/// Dropout masks captured from a forward pass.
pub struct DropoutMasks<T>(Vec<Vec<T>>);

/// Per-layer weight/bias gradients, aligned with the network's layers.
pub struct Gradients<T> {
    pub(crate) per_layer: Vec<Option<(Array2<T>, Array1<T>)>>,
}

impl<T: NnFloat> Gradients<T> {
    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            if let (Some((aw, ab)), Some((bw, bb))) = (a.as_mut(), b.as_ref()) {
                *aw += bw;
                *ab += bb;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in self.per_layer.iter_mut().flatten() {
            g.0.mapv_inplace(|v| v * s);
            g.1.mapv_inplace(|v| v * s);
        }
    }

    /// Largest absolute entry, a cheap training-signal probe.
    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for (w, b) in self.per_layer.iter().flatten() {
            for v in w.iter().chain(b.iter()) {
                if v.abs() > m {
                    m = v.abs();
                }
            }
        }
        m
    }
}

enum MaskSource<'a, T> {
    Eval,
    Sample(&'a mut ChaCha8Rng),
    Reuse(&'a DropoutMasks<T>),
}

impl<T: NnFloat> Network<T> {
    /// Builds the network with He-uniform weights and zero biases drawn
    /// from a seeded generator.
    pub fn init(arch: &ArchSpec, seed: u64) -> Result<Self> {
        if arch.input_channels == 0 || arch.input_bins == 0 {
            return Err(Error::invalid("input shape must be non-zero"));
        }
        match arch.layers.last() {
            Some(LayerSpec::Dense { units: 1, relu: false }) => {}
            _ => {
                return Err(Error::invalid(
                    "architecture must end with a one-unit linear dense layer",
                ))
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_shape = (arch.input_channels, arch.input_bins, arch.input_bins);
        let mut shape = Shape::Spatial(input_shape.0, input_shape.1, input_shape.2);
        let mut layers = Vec::with_capacity(arch.layers.len());
        let mut in_shapes = Vec::with_capacity(arch.layers.len());
        for spec in &arch.layers {
            in_shapes.push(shape);
            match *spec {
                LayerSpec::Conv { filters, kernel, relu } => {
                    let Shape::Spatial(c, h, w) = shape else {
                        return Err(Error::invalid("conv after dense is not supported"));
                    };
                    if kernel % 2 == 0 || kernel == 0 {
                        return Err(Error::invalid("conv kernels must be odd"));
                    }
                    let fan_in = kernel * kernel * c;
                    layers.push(Layer::Conv(ConvLayer {
                        in_c: c,
                        out_c: filters,
                        k: kernel,
                        relu,
                        w: he_uniform(fan_in, filters, fan_in, &mut rng),
                        b: Array1::zeros(filters),
                    }));
                    shape = Shape::Spatial(filters, h, w);
                }
                LayerSpec::MaxPool { size, stride } => {
                    let Shape::Spatial(c, h, w) = shape else {
                        return Err(Error::invalid("pool after dense is not supported"));
                    };
                    if size == 0 || stride == 0 || h < size || w < size {
                        return Err(Error::invalid(format!(
                            "pool {size}/{stride} does not fit {h}x{w}"
                        )));
                    }
                    layers.push(Layer::MaxPool { size, stride });
                    shape = Shape::Spatial(c, (h - size) / stride + 1, (w - size) / stride + 1);
                }
                LayerSpec::Dropout { p } => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(Error::invalid(format!("dropout rate {p} outside [0, 1)")));
                    }
                    layers.push(Layer::Dropout { p });
                }
                LayerSpec::Dense { units, relu } => {
                    let fan_in = shape.len();
                    layers.push(Layer::Dense(DenseLayer {
                        relu,
                        w: he_uniform(fan_in, units, fan_in, &mut rng),
                        b: Array1::zeros(units),
                    }));
                    shape = Shape::Flat(units);
                }
            }
        }
        Ok(Network {
            layers,
            in_shapes,
            input_shape,
        })
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    fn run(&self, input: &Array3<T>, mut masks: MaskSource<'_, T>) -> Result<(T, Vec<Trace<T>>)> {
        if input.dim() != self.input_shape {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match model {:?}",
                input.dim(),
                self.input_shape
            )));
        }
        let mut act = Act::Spatial(input.clone());
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut reuse_idx = 0usize;
        for layer in &self.layers {
            act = match layer {
                Layer::Conv(conv) => {
                    let x = match act {
                        Act::Spatial(a) => a,
                        Act::Flat(_) => return Err(Error::invalid("conv fed a flat activation")),
                    };
                    let pre = conv.forward(&x);
                    let mut post = pre.clone();
                    if conv.relu {
                        relu_forward(post.as_slice_mut().expect("contiguous"));
                    }
                    traces.push(Trace::Conv { x, pre });
                    Act::Spatial(post)
                }
                Layer::MaxPool { size, stride } => {
                    let x = match act {
                        Act::Spatial(a) => a,
                        Act::Flat(_) => return Err(Error::invalid("pool fed a flat activation")),
                    };
                    let (out, argmax) = maxpool_forward(&x, *size, *stride);
                    traces.push(Trace::Pool { argmax, in_shape: x.dim() });
                    Act::Spatial(out)
                }
                Layer::Dropout { p } => {
                    let mask: Option<Vec<T>> = match &mut masks {
                        MaskSource::Eval => None,
                        MaskSource::Sample(rng) =>

                            Some(dropout_mask(act_len(&act), *p, rng)),
                        MaskSource::Reuse(m) => {
                            let mask = m.0.get(reuse_idx).ok_or_else(|| {
                                Error::invalid("dropout mask count does not match network")
                            })?;
                            reuse_idx += 1;
                            Some(mask.clone())
                        }
                    };
                    match mask {
                        None => {
                            traces.push(Trace::Dropout { mask: Vec::new() });
                            act
                        }
                        Some(mask) => {
                            let mut a = act;
                            apply_mask(&mut a, &mask)?;
                            traces.push(Trace::Dropout { mask });
                            a
                        }
                    }
                }
                Layer::Dense(dense) => {
                    let x = act.flatten();
                    let pre = dense.forward(&x);
                    let mut post = pre.clone();
                    if dense.relu {
                        relu_forward(post.as_slice_mut().expect("contiguous"));
                    }
                    traces.push(Trace::Dense { x, pre });
                    Act::Flat(post)
                }
            };
        }
        let logit = match act {
            Act::Flat(v) if v.len() == 1 => v[0],
            _ => return Err(Error::invalid("network did not end in a scalar")),
        };
        Ok((logit, traces))
    }

    /// Deterministic inference logit; dropout is inactive.
    pub fn forward_eval(&self, input: &Array3<T>) -> Result<T> {
        Ok(self.run(input, MaskSource::Eval)?.0)
    }

    /// Training-mode pass: samples dropout masks from `rng` and records
    /// activations for [`Network::backward`].
    pub fn forward_train(&self, input: &Array3<T>, rng: &mut ChaCha8Rng) -> Result<Cache<T>> {
        let (logit, traces) = self.run(input, MaskSource::Sample(rng))?;
        Ok(Cache {
            traces,
            logit,
            layer_count: self.layers.len(),
            input_shape: self.input_shape,
        })
    }

    /// Re-evaluates the network with previously captured dropout masks;
    /// the finite-difference oracle calls this with perturbed weights.
    pub fn forward_frozen(&self, input: &Array3<T>, masks: &DropoutMasks<T>) -> Result<T> {
        Ok(self.run(input, MaskSource::Reuse(masks))?.0)
    }

    /// Binary cross-entropy of a logit against a target in [0, 1], with the
    /// probability clamped away from 0 and 1.
    pub fn bce_loss(logit: T, target: T) -> T {
        let p = sigmoid(logit).max(prob_floor::<T>()).min(T::one() - prob_floor::<T>());
        -(target * p.ln() + (T::one() - target) * (T::one() - p).ln())
    }

    /// Gradients of the BCE loss for the sample recorded in `cache`.
    pub fn backward(&self, cache: &Cache<T>, target: T) -> Result<Gradients<T>> {
        if cache.layer_count != self.layers.len() || cache.input_shape != self.input_shape {
            return Err(Error::invalid(
                "stale activation cache: shapes do not match this network",
            ));
        }
        let mut per_layer: Vec<Option<(Array2<T>, Array1<T>)>> = Vec::new();
        per_layer.resize_with(self.layers.len(), || None);

        // d(BCE)/d(logit) for a sigmoid head.
        let dlogit = sigmoid(cache.logit) - target;
        let mut grad = GradFlow::Flat(Array1::from_vec(vec![dlogit]));

        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let trace = &cache.traces[idx];
            grad = match (layer, trace) {
                (Layer::Dense(dense), Trace::Dense { x, pre }) => {
                    let mut dz = grad.flat()?;
                    if dense.relu {
                        relu_backward(
                            dz.as_slice_mut().expect("contiguous"),
                            pre.as_slice().expect("contiguous"),
                        );
                    }
                    let (dx, dw, db) = dense.backward(x, &dz);
                    per_layer[idx] = Some((dw, db));
                    // Reshape to spatial when the layer below is spatial.
                    match self.in_shapes[idx] {
                        Shape::Flat(_) => GradFlow::Flat(dx),
                        Shape::Spatial(c, h, w) => GradFlow::Spatial(
                            Array3::from_shape_vec((c, h, w), dx.to_vec())
                                .expect("length matches shape"),
                        ),
                    }
                }
                (Layer::Dropout { .. }, Trace::Dropout { mask }) => {
                    if mask.is_empty() {
                        grad
                    } else {
                        let mut g = grad;
                        apply_mask_grad(&mut g, mask)?;
                        g
                    }
                }
                (Layer::MaxPool { .. }, Trace::Pool { argmax, in_shape }) => {
                    let dout = grad.spatial()?;
                    GradFlow::Spatial(maxpool_backward(&dout, argmax, *in_shape))
                }
                (Layer::Conv(conv), Trace::Conv { x, pre }) => {
                    let mut dz = grad.spatial()?;
                    if conv.relu {
                        relu_backward(
                            dz.as_slice_mut().expect("contiguous"),
                            pre.as_slice().expect("contiguous"),
                        );
                    }
                    let (dx, dw, db) = conv.backward(x, &dz);
                    per_layer[idx] = Some((dw, db));
                    GradFlow::Spatial(dx)
                }
                _ => return Err(Error::invalid("stale activation cache: trace mismatch")),
            };
        }
        Ok(Gradients { per_layer })
    }

    /// Zero-valued gradient holder shaped like this network.
    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            per_layer: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv(c) => Some((Array2::zeros(c.w.dim()), Array1::zeros(c.b.len()))),
                    Layer::Dense(d) => Some((Array2::zeros(d.w.dim()), Array1::zeros(d.b.len()))),
                    _ => None,
                })
                .collect(),
        }
    }

    /// SGD-with-momentum step: `v = momentum * v - lr * g; w += v`.
    pub fn apply_momentum_step(
        &mut self,
        grads: &Gradients<T>,
        velocity: &mut Gradients<T>,
        lr: T,
        momentum: T,
    ) {
        for ((layer, g), v) in self
            .layers
            .iter_mut()
            .zip(&grads.per_layer)
            .zip(&mut velocity.per_layer)
        {
            let (Some((gw, gb)), Some((vw, vb))) = (g.as_ref(), v.as_mut()) else {
                continue;
            };
            vw.zip_mut_with(gw, |v, &g| *v = momentum * *v - lr * g);
            vb.zip_mut_with(gb, |v, &g| *v = momentum * *v - lr * g);
            match layer {
                Layer::Conv(c) => {
                    c.w += &*vw;
                    c.b += &*vb;
                }
                Layer::Dense(d) => {
                    d.w += &*vw;
                    d.b += &*vb;
                }
                _ => {}
            }
        }
    }

    /// Flat views over every parameter, for serialization and finite
    /// differences.
    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.w.as_slice().expect("contiguous"));
                    out.push(c.b.as_slice().expect("contiguous"));
                }
                Layer::Dense(d) => {
                    out.push(d.w.as_slice().expect("contiguous"));
                    out.push(d.b.as_slice().expect("contiguous"));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.w.as_slice_mut().expect("contiguous"));
                    out.push(c.b.as_slice_mut().expect("contiguous"));
                }
                Layer::Dense(d) => {
                    out.push(d.w.as_slice_mut().expect("contiguous"));
                    out.push(d.b.as_slice_mut().expect("contiguous"));
                }
                _ => {}
            }
        }
        out
    }

    /// Gradient entries flattened in the same order as [`param_slices`].
    pub fn grad_slices(grads: &Gradients<T>) -> Vec<&[T]> {
        let mut out = Vec::new();
        for g in grads.per_layer.iter().flatten() {
            out.push(g.0.as_slice().expect("contiguous"));
            out.push(g.1.as_slice().expect("contiguous"));
        }
        out
    }
}

fn act_len<T>(act: &Act<T>) -> usize {
    match act {
        Act::Spatial(a) => a.len(),
        Act::Flat(a) => a.len(),
    }
}

fn apply_mask<T: NnFloat>(act: &mut Act<T>, mask: &[T]) -> Result<()> {
    let slice: &mut [T] = match act {
        Act::Spatial(a) => a.as_slice_mut().expect("contiguous"),
        Act::Flat(a) => a.as_slice_mut().expect("contiguous"),
    };
    if slice.len() != mask.len() {
        return Err(Error::invalid("dropout mask length mismatch"));
    }
    for (v, &m) in slice.iter_mut().zip(mask) {
        *v = *v * m;
    }
    Ok(())
}

enum GradFlow<T> {
    Spatial(Array3<T>),
    Flat(Array1<T>),
}

impl<T: NnFloat> GradFlow<T> {
    fn flat(self) -> Result<Array1<T>> {
        match self {
            GradFlow::Flat(a) => Ok(a),
            GradFlow::Spatial(_) => Err(Error::invalid("expected flat gradient")),
        }
    }

    fn spatial(self) -> Result<Array3<T>> {
        match self {
            GradFlow::Spatial(a) => Ok(a),
            GradFlow::Flat(_) => Err(Error::invalid("expected spatial gradient")),
        }
    }
}

fn apply_mask_grad<T: NnFloat>(grad: &mut GradFlow<T>, mask: &[T]) -> Result<()> {
    let slice: &mut [T] = match grad {
        GradFlow::Spatial(a) => a.as_slice_mut().expect("contiguous"),
        GradFlow::Flat(a) => a.as_slice_mut().expect("contiguous"),
    };
    if slice.len() != mask.len() {
        return Err(Error::invalid("dropout mask length mismatch in backward"));
    }
    for (v, &m) in slice.iter_mut().zip(mask) {
        *v = *v * m;
    }
    Ok(())
}

pub(crate) fn sigmoid<T: NnFloat>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn prob_floor<T: NnFloat>() -> T {
    T::from(1e-7).expect("small constant")
}

/// The co-mat CNN: an architecture descriptor plus f32 weights.
pub struct CnnModel {
    pub arch: ArchSpec,
    pub net: Network<f32>,
}

impl CnnModel {
    pub fn init(arch: ArchSpec, seed: u64) -> Result<Self> {
        let net = Network::init(&arch, seed)?;
        Ok(CnnModel { arch, net })
    }

    /// Converts a normalized co-occurrence tensor into the network input,
    /// applying the architecture's input scale.
    pub fn prepare(&self, t: &CoMatTensor) -> Result<Array3<f32>> {
        prepare_input(&self.arch, t)
    }

    /// Probability that the frame behind `t` carries a virtual background.
    pub fn predict(&self, t: &CoMatTensor) -> Result<f64> {
        let input = self.prepare(t)?;
        self.predict_input(&input)
    }

    pub fn predict_input(&self, input: &Array3<f32>) -> Result<f64> {
        Ok(sigmoid(self.net.forward_eval(input)?) as f64)
    }
}

/// Builds the scaled network input from a normalized tensor.
pub fn prepare_input(arch: &ArchSpec, t: &CoMatTensor) -> Result<Array3<f32>> {
    if !t.normalized() {
        return Err(Error::invalid("the CNN expects a normalized tensor"));
    }
    if t.bin_count() != arch.input_bins || t.planes().len() != arch.input_channels {
        return Err(Error::invalid(format!(
            "tensor {}x{} planes {} does not match model input {}x{} planes {}",
            t.bin_count(),
            t.bin_count(),
            t.planes().len(),
            arch.input_bins,
            arch.input_bins,
            arch.input_channels
        )));
    }
    let b = arch.input_bins;
    let mut input = Array3::zeros((arch.input_channels, b, b));
    for (c, plane) in t.planes().iter().enumerate() {
        for i in 0..b {
            for j in 0..b {
                input[[c, i, j]] = plane.get(i, j) as f32 * arch.input_scale;
            }
        }
    }
    Ok(input)
}

const MODEL_MAGIC: &[u8; 4] = b"VBGM";
const MODEL_VERSION: u32 = 1;

/// Writes magic, version, a JSON architecture descriptor, then each
/// parameter tensor as little-endian f32.
pub fn save_model(model: &CnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MODEL_MAGIC).map_err(io)?;
    w.write_all(&MODEL_VERSION.to_le_bytes()).map_err(io)?;
    let arch = serde_json::to_vec(&model.arch)
        .map_err(|e| Error::Runtime(format!("arch serialization: {e}")))?;
    w.write_all(&(arch.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&arch).map_err(io)?;
    for slice in model.net.param_slices() {
        w.write_all(&(slice.len() as u64).to_le_bytes()).map_err(io)?;
        for &v in slice {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format(path, "missing header"))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::format(path, "bad magic, expected VBGM"));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(|e| Error::io(path, e))?;
    let version = u32::from_le_bytes(buf4);
    if version != MODEL_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    r.read_exact(&mut buf4).map_err(|e| Error::io(path, e))?;
    let arch_len = u32::from_le_bytes(buf4) as usize;
    let mut arch_buf = vec![0u8; arch_len];
    r.read_exact(&mut arch_buf).map_err(|e| Error::io(path, e))?;
    let arch: ArchSpec = serde_json::from_slice(&arch_buf)
        .map_err(|e| Error::format(path, format!("arch descriptor: {e}")))?;

    let mut model = CnnModel::init(arch, 0)?;
    for slice in model.net.param_slices_mut() {
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8).map_err(|e| Error::io(path, e))?;
        let n = u64::from_le_bytes(buf8) as usize;
        if n != slice.len() {
            return Err(Error::format(
                path,
                format!("parameter block of {n} values, expected {}", slice.len()),
            ));
        }
        for v in slice.iter_mut() {
            r.read_exact(&mut buf4).map_err(|e| Error::io(path, e))?;
            *v = f32::from_le_bytes(buf4);
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::format(path, "trailing bytes after parameters"));
    }
    Ok(model)
}
