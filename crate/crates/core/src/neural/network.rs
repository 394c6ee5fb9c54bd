use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2};
use rand::Rng;

use super::layer::{Activation, Dense, Layer, LayerCache, LayerNorm, LayerSpec, NormCache};
use crate::error::{Error, Result};

/// Hidden width of the full-size actor and critic.
pub const FULL_SCALE_HIDDEN_UNITS: usize = 1024;

/// Init range of the final actor and critic layers.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Anything exposing its parameters as an ordered list of flat tensors.
pub trait Parameterized {
    fn tensors(&self) -> Vec<&[f64]>;

    /// Name and shape of each tensor, in [`Parameterized::tensors`] order.
    fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)>;

    /// Mutable access; invalidates outstanding forward caches.
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// All parameters concatenated in tensor order.
    fn flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

/// `self ← τ·source + (1 − τ)·self`, tensor by tensor.
pub fn soft_update<P: Parameterized>(target: &mut P, source: &P, tau: f64) {
    for (t, s) in target.tensors_mut().into_iter().zip(source.tensors()) {
        for (a, &b) in t.iter_mut().zip(s) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    }
}

fn check_input(x: &Array2<f64>, expected: usize, what: &str) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Shape(format!(
            "{what} has {} features where {expected} are expected",
            x.ncols()
        )));
    }
    Ok(())
}

/// A chain of [`Layer`]s; the actor network.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    layers: Vec<LayerCache>,
    version: u64,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("non-empty network").output()
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].spec.output_dim != pair[1].spec.input_dim {
                return Err(Error::Shape("consecutive layer dimensions disagree".into()));
            }
        }
        Ok(Mlp {
            layers,
            version: next_version(),
        })
    }

    /// Uniform `±1/√fan_in` init, with the last layer in `±final_limit`.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, specs: &[LayerSpec], final_limit: Option<f64>) -> Result<Self> {
        let last = specs.len().saturating_sub(1);
        let layers = specs
            .iter()
            .enumerate()
            .map(|(i, &spec)| {
                let limit = match final_limit {
                    Some(l) if i == last => l,
                    _ => 1.0 / (spec.input_dim as f64).sqrt(),
                };
                Layer::init(rng, spec, limit)
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| Layer::zeros(l.spec)).collect(),
            version: next_version(),
        }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version = next_version();
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").spec.output_dim
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<MlpCache> {
        check_input(x, self.input_dim(), "network input")?;
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let cache = match caches.last() {
                Some(prev) => layer.forward(prev.output()),
                None => layer.forward(x),
            };
            caches.push(cache);
        }
        Ok(MlpCache {
            layers: caches,
            version: self.version,
        })
    }

    /// Forward pass for one input vector.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        let cache = self.forward(&input)?;
        Ok(cache.output().row(0).to_vec())
    }

    /// Returns `dL/dx` and the parameter gradients `dL/dθ` given `dL/dy`.
    pub fn backward(&self, cache: &MlpCache, dy: &Array2<f64>) -> Result<(Array2<f64>, Mlp)> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(cache, dy, Some(&mut grads))?;
        Ok((dx, grads))
    }

    pub fn backward_input(&self, cache: &MlpCache, dy: &Array2<f64>) -> Result<Array2<f64>> {
        self.backward_into(cache, dy, None)
    }

    fn backward_into(&self, cache: &MlpCache, dy: &Array2<f64>, mut grads: Option<&mut Mlp>) -> Result<Array2<f64>> {
        if cache.version != self.version {
            return Err(Error::State("forward cache is stale: weights changed since the forward pass".into()));
        }
        if dy.raw_dim() != cache.output().raw_dim() {
            return Err(Error::Shape("output gradient does not match the network output".into()));
        }
        let mut g = dy.clone();
        for (i, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let slot = grads.as_deref_mut().map(|m| &mut m.layers[i]);
            g = layer.backward(lc, &g, slot);
        }
        Ok(g)
    }

    /// Multiply–accumulate count of one forward pass (affine maps only).
    pub fn macs(&self) -> usize {
        self.layers.iter().map(Layer::macs).sum()
    }
}

impl Parameterized for Mlp {
    fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.push_shapes(&format!("layer{i}"), &mut out);
        }
        out
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            l.push_tensors(&mut out);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.version = next_version();
        let mut out = Vec::new();
        for l in &mut self.layers {
            l.push_tensors_mut(&mut out);
        }
        out
    }
}

/// Layer chain of the actor: two normalized ReLU hidden layers, normalized tanh output.
pub fn actor_specs(state_dim: usize, action_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            input_dim: state_dim,
            output_dim: hidden,
            activation: Activation::Relu,
            normalize: true,
        },
        LayerSpec {
            input_dim: hidden,
            output_dim: hidden,
            activation: Activation::Relu,
            normalize: true,
        },
        LayerSpec {
            input_dim: hidden,
            output_dim: action_dim,
            activation: Activation::Tanh,
            normalize: true,
        },
    ]
}

pub fn build_actor<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, action_dim: usize, hidden: usize) -> Result<Mlp> {
    if state_dim == 0 || action_dim == 0 || hidden == 0 {
        return Err(Error::Shape("actor dimensions must be >= 1".into()));
    }
    Mlp::init(rng, &actor_specs(state_dim, action_dim, hidden), Some(FINAL_LAYER_INIT))
}

/// Two-branch critic.
///
/// ```text
/// z  = s·W_sᵀ + b_s + a·W_aᵀ + b_a        (each branch: in → H)
/// h1 = ReLU(LayerNorm(z))
/// h2 = ReLU(LayerNorm(h1·W_hᵀ + b_h))     (H → H)
/// Q  = h2·W_oᵀ + b_o                       (H → 1)
/// ```
#[derive(Debug, Clone)]
pub struct Critic {
    pub state_branch: Dense,
    pub action_branch: Dense,
    pub combine_norm: LayerNorm,
    pub hidden: Layer,
    pub output: Layer,
    version: u64,
}

impl PartialEq for Critic {
    fn eq(&self, other: &Self) -> bool {
        self.state_branch == other.state_branch
            && self.action_branch == other.action_branch
            && self.combine_norm == other.combine_norm
            && self.hidden == other.hidden
            && self.output == other.output
    }
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    state: Array2<f64>,
    action: Array2<f64>,
    norm: NormCache,
    combined_act_input: Array2<f64>,
    combined: Array2<f64>,
    hidden: LayerCache,
    output: LayerCache,
    version: u64,
}

impl CriticCache {
    /// Q values, one per sample.
    pub fn q(&self) -> Array1<f64> {
        self.output.output().column(0).to_owned()
    }
}

/// Gradients of a critic pass with respect to its inputs.
#[derive(Debug, Clone)]
pub struct CriticInputGrads {
    pub state: Array2<f64>,
    pub action: Array2<f64>,
}

impl Critic {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, action_dim: usize, hidden: usize) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 || hidden == 0 {
            return Err(Error::Shape("critic dimensions must be >= 1".into()));
        }
        let state_branch = Dense::uniform(rng, state_dim, hidden, 1.0 / (state_dim as f64).sqrt());
        let action_branch = Dense::uniform(rng, action_dim, hidden, 1.0 / (action_dim as f64).sqrt());
        let (hidden_spec, output_spec) = Self::tail_specs(hidden);
        let hidden_layer = Layer::init(rng, hidden_spec, 1.0 / (hidden as f64).sqrt());
        let output = Layer::init(rng, output_spec, FINAL_LAYER_INIT);
        Ok(Critic {
            state_branch,
            action_branch,
            combine_norm: LayerNorm::new(hidden),
            hidden: hidden_layer,
            output,
            version: next_version(),
        })
    }

    fn tail_specs(hidden: usize) -> (LayerSpec, LayerSpec) {
        (
            LayerSpec {
                input_dim: hidden,
                output_dim: hidden,
                activation: Activation::Relu,
                normalize: true,
            },
            LayerSpec {
                input_dim: hidden,
                output_dim: 1,
                activation: Activation::None,
                normalize: false,
            },
        )
    }

    pub fn zeros(state_dim: usize, action_dim: usize, hidden: usize) -> Self {
        let (hidden_spec, output_spec) = Self::tail_specs(hidden);
        Critic {
            state_branch: Dense::zeros(state_dim, hidden),
            action_branch: Dense::zeros(action_dim, hidden),
            combine_norm: LayerNorm::zeros(hidden),
            hidden: Layer::zeros(hidden_spec),
            output: Layer::zeros(output_spec),
            version: next_version(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.state_dim(), self.action_dim(), self.hidden_dim())
    }

    pub fn state_dim(&self) -> usize {
        self.state_branch.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_branch.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.state_branch.output_dim()
    }

    pub fn forward(&self, state: &Array2<f64>, action: &Array2<f64>) -> Result<CriticCache> {
        check_input(state, self.state_dim(), "critic state input")?;
        check_input(action, self.action_dim(), "critic action input")?;
        if state.nrows() != action.nrows() {
            return Err(Error::Shape("state and action batches differ in size".into()));
        }
        let z = self.state_branch.forward(state) + self.action_branch.forward(action);
        let (combined_act_input, norm) = self.combine_norm.forward(&z);
        let combined = Activation::Relu.apply(&combined_act_input);
        let hidden = self.hidden.forward(&combined);
        let output = self.output.forward(hidden.output());
        Ok(CriticCache {
            state: state.clone(),
            action: action.clone(),
            norm,
            combined_act_input,
            combined,
            hidden,
            output,
            version: self.version,
        })
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let s = Array2::from_shape_vec((1, state.len()), state.to_vec()).expect("row shape");
        let a = Array2::from_shape_vec((1, action.len()), action.to_vec()).expect("row shape");
        Ok(self.forward(&s, &a)?.q()[0])
    }

    /// Input and parameter gradients given `dL/dQ` per sample.
    pub fn backward(&self, cache: &CriticCache, dq: &Array1<f64>) -> Result<(CriticInputGrads, Critic)> {
        let mut grads = self.zeros_like();
        let inputs = self.backward_into(cache, dq, Some(&mut grads))?;
        Ok((inputs, grads))
    }

    /// Input gradients only; skips parameter gradients.
    pub fn backward_inputs(&self, cache: &CriticCache, dq: &Array1<f64>) -> Result<CriticInputGrads> {
        self.backward_into(cache, dq, None)
    }

    fn backward_into(&self, cache: &CriticCache, dq: &Array1<f64>, grads: Option<&mut Critic>) -> Result<CriticInputGrads> {
        if cache.version != self.version {
            return Err(Error::State("forward cache is stale: weights changed since the forward pass".into()));
        }
        if dq.len() != cache.state.nrows() {
            return Err(Error::Shape("dQ length differs from batch size".into()));
        }
        let dy = dq.clone().insert_axis(ndarray::Axis(1));
        let (g_state, g_action, g_norm, g_hidden, g_output) = match grads {
            Some(g) => (
                Some(&mut g.state_branch),
                Some(&mut g.action_branch),
                Some(&mut g.combine_norm),
                Some(&mut g.hidden),
                Some(&mut g.output),
            ),
            None => (None, None, None, None, None),
        };
        let d_h2 = self.output.backward(&cache.output, &dy, g_output);
        let d_combined = self.hidden.backward(&cache.hidden, &d_h2, g_hidden);
        let d_act = Activation::Relu.backward(&cache.combined_act_input, &cache.combined, &d_combined);
        let dz = self.combine_norm.backward(&cache.norm, &d_act, g_norm);
        let d_state = self.state_branch.backward(&cache.state, &dz, g_state);
        let d_action = self.action_branch.backward(&cache.action, &dz, g_action);
        Ok(CriticInputGrads {
            state: d_state,
            action: d_action,
        })
    }

    pub fn macs(&self) -> usize {
        let h = self.hidden_dim();
        (self.state_dim() + self.action_dim()) * h + self.hidden.macs() + self.output.macs()
    }
}

impl Parameterized for Critic {
    fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        out.extend(self.state_branch.shapes("state_branch"));
        out.extend(self.action_branch.shapes("action_branch"));
        out.extend(self.combine_norm.shapes("combine_norm"));
        self.hidden.push_shapes("hidden", &mut out);
        self.output.push_shapes("output", &mut out);
        out
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        out.extend(self.state_branch.tensors());
        out.extend(self.action_branch.tensors());
        out.extend(self.combine_norm.tensors());
        self.hidden.push_tensors(&mut out);
        self.output.push_tensors(&mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.version = next_version();
        let mut out = Vec::new();
        out.extend(self.state_branch.tensors_mut());
        out.extend(self.action_branch.tensors_mut());
        out.extend(self.combine_norm.tensors_mut());
        self.hidden.push_tensors_mut(&mut out);
        self.output.push_tensors_mut(&mut out);
        out
    }
}

pub fn build_critic<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, action_dim: usize, hidden: usize) -> Result<Critic> {
    Critic::init(rng, state_dim, action_dim, hidden)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FD_STEP: f64 = 1e-5;
    const FD_TOL: f64 = 1e-4;

    fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    fn close(analytic: f64, numeric: f64) -> bool {
        (analytic - numeric).abs() <= FD_TOL * analytic.abs().max(numeric.abs()).max(1e-3)
    }

    /// Compares every parameter gradient against central differences of `loss`.
    fn check_param_grads<P: Parameterized + Clone>(net: &P, grads: &P, loss: impl Fn(&P) -> f64) {
        let analytic = grads.flat();
        let mut probe = net.clone();
        let mut k = 0;
        for t in 0..net.tensors().len() {
            for i in 0..net.tensors()[t].len() {
                let orig = probe.tensors()[t][i];
                probe.tensors_mut()[t][i] = orig + FD_STEP;
                let up = loss(&probe);
                probe.tensors_mut()[t][i] = orig - FD_STEP;
                let down = loss(&probe);
                probe.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * FD_STEP);
                assert!(
                    close(analytic[k], numeric),
                    "tensor {t} entry {i}: analytic {} vs numeric {numeric}",
                    analytic[k]
                );
                k += 1;
            }
        }
    }

    fn check_input_grads(x: &Array2<f64>, analytic: &Array2<f64>, loss: impl Fn(&Array2<f64>) -> f64) {
        let mut probe = x.clone();
        for idx in ndarray::indices(x.raw_dim()) {
            let orig = probe[idx];
            probe[idx] = orig + FD_STEP;
            let up = loss(&probe);
            probe[idx] = orig - FD_STEP;
            let down = loss(&probe);
            probe[idx] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            assert!(close(analytic[idx], numeric), "{idx:?}: {} vs {numeric}", analytic[idx]);
        }
    }

    /// Weighted sum of outputs, so each output entry gets a distinct upstream gradient.
    fn projection(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        random_batch(rng, rows, cols)
    }

    fn single_layer(activation: Activation, normalize: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = LayerSpec {
            input_dim: 5,
            output_dim: 4,
            activation,
            normalize,
        };
        let mut net = Mlp::init(&mut rng, &[spec], None).unwrap();
        if normalize {
            // non-trivial gain and offset
            for layer in net.layers_mut() {
                let n = layer.norm.as_mut().unwrap();
                n.gain.mapv_inplace(|_| rng.random_range(0.5..1.5));
                n.offset.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
        }
        let x = random_batch(&mut rng, 3, 5);
        let w = projection(3, 4, &mut rng);
        let loss_net = |n: &Mlp, x: &Array2<f64>| (n.forward(x).unwrap().output() * &w).sum();
        let cache = net.forward(&x).unwrap();
        let (dx, grads) = net.backward(&cache, &w).unwrap();
        check_param_grads(&net, &grads, |n| loss_net(n, &x));
        check_input_grads(&x, &dx, |x| loss_net(&net, x));
    }

    #[test]
    fn affine_gradients() {
        single_layer(Activation::None, false, 1);
    }

    #[test]
    fn relu_gradients() {
        single_layer(Activation::Relu, false, 2);
    }

    #[test]
    fn tanh_gradients() {
        single_layer(Activation::Tanh, false, 3);
    }

    #[test]
    fn layer_norm_gradients() {
        single_layer(Activation::None, true, 4);
        single_layer(Activation::Tanh, true, 5);
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // with the ±3e-3 output init the last layer norm divides by a tiny spread,
        // which puts central differences outside their truncation budget
        let net = Mlp::init(&mut rng, &actor_specs(6, 4, 8), None).unwrap();
        let x = random_batch(&mut rng, 3, 6);
        let w = projection(3, 4, &mut rng);
        let loss = |n: &Mlp, x: &Array2<f64>| (n.forward(x).unwrap().output() * &w).sum();
        let cache = net.forward(&x).unwrap();
        let (dx, grads) = net.backward(&cache, &w).unwrap();
        check_param_grads(&net, &grads, |n| loss(n, &x));
        check_input_grads(&x, &dx, |x| loss(&net, x));
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut net = build_critic(&mut rng, 5, 3, 8).unwrap();
        // a larger output layer keeps Q away from the flat initial regime
        for v in net.output.dense.weight.iter_mut() {
            *v *= 100.0;
        }
        let s = random_batch(&mut rng, 4, 5);
        let a = random_batch(&mut rng, 4, 3);
        let dq = Array1::from_shape_simple_fn(4, || rng.random_range(-1.0..1.0));
        let loss = |n: &Critic, s: &Array2<f64>, a: &Array2<f64>| n.forward(s, a).unwrap().q().dot(&dq);
        let cache = net.forward(&s, &a).unwrap();
        let (inputs, grads) = net.backward(&cache, &dq).unwrap();
        check_param_grads(&net, &grads, |n| loss(n, &s, &a));
        check_input_grads(&a, &inputs.action, |a| loss(&net, &s, a));
        check_input_grads(&s, &inputs.state, |s| loss(&net, s, &a));
        let only = net.backward_inputs(&cache, &dq).unwrap();
        assert_eq!(only.action, inputs.action);
    }

    #[test]
    fn zero_network_with_tanh_outputs_zero() {
        let spec = LayerSpec {
            input_dim: 3,
            output_dim: 2,
            activation: Activation::Tanh,
            normalize: false,
        };
        let net = Mlp::from_layers(vec![Layer::zeros(spec)]).unwrap();
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_network_passes_input_through() {
        let spec = LayerSpec {
            input_dim: 1,
            output_dim: 1,
            activation: Activation::None,
            normalize: false,
        };
        let mut layer = Layer::zeros(spec);
        layer.dense.weight[[0, 0]] = 1.0;
        let net = Mlp::from_layers(vec![layer]).unwrap();
        assert_eq!(net.predict(&[3.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let specs = [
            LayerSpec {
                input_dim: 4,
                output_dim: 6,
                activation: Activation::Relu,
                normalize: true,
            },
            LayerSpec {
                input_dim: 6,
                output_dim: 3,
                activation: Activation::Tanh,
                normalize: false,
            },
        ];
        let net = Mlp::init(&mut rng, &specs, None).unwrap();
        let x = [0.3, -1.2, 0.7, 2.0];
        let got = net.predict(&x).unwrap();

        let l0 = &net.layers()[0];
        let z: Vec<f64> = (0..6)
            .map(|o| l0.dense.bias[o] + (0..4).map(|i| l0.dense.weight[[o, i]] * x[i]).sum::<f64>())
            .collect();
        let mean = z.iter().sum::<f64>() / 6.0;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        let norm = l0.norm.as_ref().unwrap();
        let h: Vec<f64> = (0..6)
            .map(|o| ((z[o] - mean) / (var + 1e-12).sqrt() * norm.gain[o] + norm.offset[o]).max(0.0))
            .collect();
        let l1 = &net.layers()[1];
        for o in 0..3 {
            let y = (l1.dense.bias[o] + (0..6).map(|i| l1.dense.weight[[o, i]] * h[i]).sum::<f64>()).tanh();
            assert!((y - got[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let spec = LayerSpec {
            input_dim: 3,
            output_dim: 2,
            activation: Activation::None,
            normalize: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(&mut rng, &[spec], None).unwrap();
        let x = ndarray::array![[1.0, 2.0, -1.0]];
        let dy = ndarray::array![[0.5, -3.0]];
        let cache = net.forward(&x).unwrap();
        let (_, grads) = net.backward(&cache, &dy).unwrap();
        let expected = ndarray::array![[0.5, 1.0, -0.5], [-3.0, -6.0, 3.0]];
        assert_eq!(grads.layers()[0].dense.weight, expected);
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = build_actor(&mut rng, 5, 3, 6).unwrap();
        let x = random_batch(&mut rng, 2, 5);
        let cache = net.forward(&x).unwrap();
        let (dx, grads) = net.backward(&cache, &Array2::zeros((2, 3))).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert!(grads.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = build_actor(&mut rng, 4, 2, 5).unwrap();
        let x = random_batch(&mut rng, 1, 4);
        let cache = net.forward(&x).unwrap();
        net.tensors_mut()[0][0] += 1.0;
        assert!(matches!(net.backward(&cache, &Array2::ones((1, 2))), Err(Error::State(_))));

        let mut critic = build_critic(&mut rng, 4, 2, 5).unwrap();
        let cache = critic.forward(&x, &random_batch(&mut rng, 1, 2)).unwrap();
        let source = critic.clone();
        soft_update(&mut critic, &source, 0.5);
        assert!(critic.backward(&cache, &Array1::ones(1)).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = build_actor(&mut rng, 4, 2, 5).unwrap();
        assert!(matches!(net.predict(&[1.0; 3]), Err(Error::Shape(_))));
        let critic = build_critic(&mut rng, 4, 2, 5).unwrap();
        assert!(critic.q_value(&[0.0; 4], &[0.0; 3]).is_err());
        assert!(build_actor(&mut rng, 0, 2, 5).is_err());
    }

    #[test]
    fn full_scale_single_surface_dimensions() {
        // M = 16, K = 8, L = 1, N = 64
        let state_dim = 2 * (16 * 8 + 64 + 8);
        let action_dim = 2 * (16 * 8 + 64);
        assert_eq!((state_dim, action_dim), (400, 384));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = build_actor(&mut rng, state_dim, action_dim, FULL_SCALE_HIDDEN_UNITS).unwrap();
        assert_eq!(actor.input_dim(), 400);
        assert_eq!(actor.output_dim(), 384);
        let h = FULL_SCALE_HIDDEN_UNITS;
        assert_eq!(actor.macs(), 400 * h + h * h + h * 384);
        // two FLOPs per multiply-accumulate
        let flops = 2.0 * actor.macs() as f64;
        assert!((flops / 3.71e6 - 1.0).abs() < 0.01);
    }

    #[test]
    fn parameter_counts_match_hand_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, a, h) = (7, 3, 10);
        let actor = build_actor(&mut rng, s, a, h).unwrap();
        let dense = |i: usize, o: usize| i * o + o;
        assert_eq!(actor.num_parameters(), dense(s, h) + 2 * h + dense(h, h) + 2 * h + dense(h, a) + 2 * a);
        let critic = build_critic(&mut rng, s, a, h).unwrap();
        assert_eq!(critic.num_parameters(), dense(s, h) + dense(a, h) + 2 * h + dense(h, h) + 2 * h + dense(h, 1));
        assert_eq!(critic.tensor_shapes().len(), critic.tensors().len());
    }

    #[test]
    fn critic_outputs_one_scalar_and_is_seed_deterministic() {
        let build = || build_critic(&mut ChaCha8Rng::seed_from_u64(4), 6, 2, 8).unwrap();
        let (c1, c2) = (build(), build());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_batch(&mut rng, 3, 6);
        let a = random_batch(&mut rng, 3, 2);
        let q1 = c1.forward(&s, &a).unwrap().q();
        assert_eq!(q1.len(), 3);
        assert_eq!(q1, c2.forward(&s, &a).unwrap().q());
    }

    #[test]
    fn soft_update_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut target = build_actor(&mut rng, 3, 2, 4).unwrap();
        let source = build_actor(&mut rng, 3, 2, 4).unwrap();
        let before = target.flat();
        soft_update(&mut target, &source, 0.25);
        for ((t, b), s) in target.flat().iter().zip(before).zip(source.flat()) {
            assert!((t - (0.25 * s + 0.75 * b)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn actor_outputs_in_open_unit_interval(seed in 0u64..1000, scale in 0.1f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = build_actor(&mut rng, 5, 4, 8).unwrap();
            let x: Vec<f64> = (0..5).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            for y in net.predict(&x).unwrap() {
                prop_assert!(y > -1.0 && y < 1.0);
            }
        }

        #[test]
        fn layer_norm_rows_are_standardized(values in proptest::collection::vec(-1e3f64..1e3, 2..16)) {
            let n = values.len();
            let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            let x = Array2::from_shape_vec((1, n), values).unwrap();
            let cache = LayerNorm::normalize(&x);
            let row = cache.normalized.row(0);
            let mean = row.sum() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((var - 1.0).abs() < 1e-10);
        }

        #[test]
        fn forward_is_bit_deterministic(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = build_actor(&mut rng, 4, 3, 6).unwrap();
            let x = [0.1, 0.2, -0.3, 0.4];
            let a = net.predict(&x).unwrap();
            let b = net.clone().predict(&x).unwrap();
            prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
