use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Variance floor inside the layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

impl Activation {
    pub(crate) fn apply(self, x: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => x.mapv(|v| v.max(0.0)),
            Activation::Tanh => x.mapv(f64::tanh),
            Activation::None => x.clone(),
        }
    }

    /// Chains `dy` through the activation given its input `x` and output `y`.
    pub(crate) fn backward(self, x: &Array2<f64>, y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => {
                let mut d = dy.clone();
                d.zip_mut_with(x, |g, &v| {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                });
                d
            }
            Activation::Tanh => {
                let mut d = dy.clone();
                d.zip_mut_with(y, |g, &t| *g *= 1.0 - t * t);
                d
            }
            Activation::None => dy.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    /// Layer normalization between the affine map and the activation.
    pub normalize: bool,
}

/// Affine map `y = x Wᵀ + b` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Weights and biases uniform in `[−limit, limit]`.
    pub fn uniform<R: Rng + ?Sized>(rng: &mut R, input: usize, output: usize, limit: f64) -> Self {
        let weight = Array2::from_shape_simple_fn((output, input), || rng.random_range(-limit..=limit));
        let bias = Array1::from_shape_simple_fn(output, || rng.random_range(-limit..=limit));
        Dense { weight, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` (when given) and returns `dx`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: Option<&mut Dense>) -> Array2<f64> {
        if let Some(g) = grad {
            g.weight += &dy.t().dot(x);
            g.bias += &dy.sum_axis(Axis(0));
        }
        dy.dot(&self.weight)
    }

    pub(crate) fn shapes(&self, prefix: &str) -> [(String, Vec<usize>); 2] {
        [
            (format!("{prefix}.weight"), vec![self.output_dim(), self.input_dim()]),
            (format!("{prefix}.bias"), vec![self.output_dim()]),
        ]
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 2] {
        [
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Per-sample normalization over features with learned gain and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub offset: Array1<f64>,
}

/// Values kept from a layer-norm forward pass.
#[derive(Debug, Clone)]
pub struct NormCache {
    pub normalized: Array2<f64>,
    pub inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gain: Array1::ones(dim),
            offset: Array1::zeros(dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        LayerNorm {
            gain: Array1::zeros(dim),
            offset: Array1::zeros(dim),
        }
    }

    /// Normalizes each row to zero mean and unit variance (before gain and offset).
    pub fn normalize(x: &Array2<f64>) -> NormCache {
        let n = x.ncols() as f64;
        let mut normalized = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, s) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| v * inv);
            *s = inv;
        }
        NormCache { normalized, inv_std }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, NormCache) {
        let cache = Self::normalize(x);
        let y = &cache.normalized * &self.gain + &self.offset;
        (y, cache)
    }

    pub fn backward(&self, cache: &NormCache, dy: &Array2<f64>, grad: Option<&mut LayerNorm>) -> Array2<f64> {
        if let Some(g) = grad {
            g.gain += &(dy * &cache.normalized).sum_axis(Axis(0));
            g.offset += &dy.sum_axis(Axis(0));
        }
        let n = dy.ncols() as f64;
        let dxhat = dy * &self.gain;
        let mut dx = Array2::zeros(dy.raw_dim());
        for (((mut out, g), xh), &inv) in dx
            .rows_mut()
            .into_iter()
            .zip(dxhat.rows())
            .zip(cache.normalized.rows())
            .zip(cache.inv_std.iter())
        {
            let mean_g = g.sum() / n;
            let mean_gx = g.dot(&xh) / n;
            for ((o, &gi), &xi) in out.iter_mut().zip(g.iter()).zip(xh.iter()) {
                *o = inv * (gi - mean_g - xi * mean_gx);
            }
        }
        dx
    }

    pub(crate) fn shapes(&self, prefix: &str) -> [(String, Vec<usize>); 2] {
        [
            (format!("{prefix}.gain"), vec![self.gain.len()]),
            (format!("{prefix}.offset"), vec![self.offset.len()]),
        ]
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 2] {
        [
            self.gain.as_slice().expect("standard layout"),
            self.offset.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.gain.as_slice_mut().expect("standard layout"),
            self.offset.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Affine map, optional layer norm, activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub dense: Dense,
    pub norm: Option<LayerNorm>,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Array2<f64>,
    norm: Option<NormCache>,
    act_input: Array2<f64>,
    output: Array2<f64>,
}

impl LayerCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

impl Layer {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, spec: LayerSpec, init_limit: f64) -> Self {
        Layer {
            spec,
            dense: Dense::uniform(rng, spec.input_dim, spec.output_dim, init_limit),
            norm: spec.normalize.then(|| LayerNorm::new(spec.output_dim)),
        }
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        Layer {
            spec,
            dense: Dense::zeros(spec.input_dim, spec.output_dim),
            norm: spec.normalize.then(|| LayerNorm::zeros(spec.output_dim)),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> LayerCache {
        let z = self.dense.forward(x);
        let (act_input, norm) = match &self.norm {
            Some(ln) => {
                let (y, cache) = ln.forward(&z);
                (y, Some(cache))
            }
            None => (z, None),
        };
        let output = self.spec.activation.apply(&act_input);
        LayerCache {
            input: x.clone(),
            norm,
            act_input,
            output,
        }
    }

    pub fn backward(&self, cache: &LayerCache, dy: &Array2<f64>, grad: Option<&mut Layer>) -> Array2<f64> {
        let d_act = self.spec.activation.backward(&cache.act_input, &cache.output, dy);
        let (grad_dense, grad_norm) = match grad {
            Some(g) => (Some(&mut g.dense), g.norm.as_mut()),
            None => (None, None),
        };
        let dz = match (&self.norm, &cache.norm) {
            (Some(ln), Some(nc)) => ln.backward(nc, &d_act, grad_norm),
            _ => d_act,
        };
        self.dense.backward(&cache.input, &dz, grad_dense)
    }

    pub(crate) fn push_shapes(&self, prefix: &str, out: &mut Vec<(String, Vec<usize>)>) {
        out.extend(self.dense.shapes(&format!("{prefix}.dense")));
        if let Some(n) = &self.norm {
            out.extend(n.shapes(&format!("{prefix}.norm")));
        }
    }

    pub(crate) fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.extend(self.dense.tensors());
        if let Some(n) = &self.norm {
            out.extend(n.tensors());
        }
    }

    pub(crate) fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.extend(self.dense.tensors_mut());
        if let Some(n) = &mut self.norm {
            out.extend(n.tensors_mut());
        }
    }

    /// Multiply–accumulate operations of the affine map for one sample.
    pub fn macs(&self) -> usize {
        self.spec.input_dim * self.spec.output_dim
    }
}
