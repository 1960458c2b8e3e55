//! Small fully-connected networks with hand-written backpropagation.
//!
//! Batches are row-major: one sample per row. A layer computes
//! `z = a · Wᵀ + b` and `a' = φ(z)` with `W` stored `out × in`.
//!
//! Besides ordinary backpropagation this module computes the parameter
//! gradient of the gradient-penalty term `mean_r (‖∇ₓ D(x_r)‖₂ − 1)²`.
//! For piecewise-linear activations the input gradient of a scalar critic
//! is a product of weight matrices and activation masks,
//! `g = W₁ᵀ M₁ W₂ᵀ M₂ … W_Lᵀ m_L`, and the masks have zero derivative
//! almost everywhere. Differentiating `g` with respect to `W_l` then reduces
//! to one backward sweep (the vectors `v_l`) and one forward sweep of the
//! penalty adjoint `u` through the masked linear maps (the vectors `t_l`):
//! `∂P/∂W_l = v_lᵀ t_{l−1}`. Biases do not enter `g`, so their penalty
//! gradient is zero.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub const fn leaky_relu(slope: f64) -> Self {
        Activation::LeakyRelu { slope }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative at pre-activation `z`; `a` is the matching output.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Sigmoid)
    }

    fn init_gain(self) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => (2.0 / (1.0 + slope * slope)).sqrt(),
            Activation::Relu => 2f64.sqrt(),
            Activation::Identity | Activation::Sigmoid => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `inputs[l]` is the input to layer `l` (`inputs[0]` is the batch).
    pub inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    /// `(d weight, d bias)` per layer.
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub input: Option<Array2<f64>>,
}

impl GradientBundle {
    pub fn zeros_like(net: &DenseNet) -> Self {
        GradientBundle {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
            input: None,
        }
    }

    /// `self += scale · other` over parameter gradients.
    pub fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.scaled_add(scale, ow);
            b.scaled_add(scale, ob);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }
}

/// Result of [`DenseNet::penalty_parameter_gradient`].
#[derive(Debug, Clone)]
pub struct PenaltyGradient {
    /// `mean_r (‖g_r‖ − 1)²`, skipped rows counted with norm 0.
    pub penalty: f64,
    pub grads: GradientBundle,
    pub input_gradients: Array2<f64>,
    /// Rows whose input-gradient norm is exactly zero (no gradient taken).
    pub skipped: usize,
}

impl DenseNet {
    /// Build a net, checking that layer dimensions chain.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::Dimension {
                    expected: l.weight.nrows(),
                    got: l.bias.len(),
                });
            }
            if k > 0 && layers[k - 1].weight.nrows() != l.weight.ncols() {
                return Err(Error::Dimension {
                    expected: layers[k - 1].weight.nrows(),
                    got: l.weight.ncols(),
                });
            }
        }
        Ok(DenseNet { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for l in &self.layers {
            let z = a.dot(&l.weight.t()) + &l.bias;
            let next = z.mapv(|v| l.activation.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(ForwardTrace {
            inputs,
            pre_activations: pre,
            output: a,
        })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weight.t()) + &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Backpropagate `upstream` (gradient of the objective with respect to
    /// the output) through a trace produced by [`forward`](Self::forward).
    pub fn backward(&self, trace: &ForwardTrace, upstream: ArrayView2<f64>) -> Result<GradientBundle> {
        self.backward_impl(trace, upstream, true)
    }

    pub(crate) fn backward_impl(
        &self,
        trace: &ForwardTrace,
        upstream: ArrayView2<f64>,
        need_input: bool,
    ) -> Result<GradientBundle> {
        if upstream.dim() != trace.output.dim() || trace.inputs.len() != self.layers.len() {
            return Err(Error::Dimension {
                expected: trace.output.ncols(),
                got: upstream.ncols(),
            });
        }
        let mut layers = vec![None; self.layers.len()];
        let mut grad = upstream.to_owned();
        let mut input = None;
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let z = &trace.pre_activations[k];
            let a_out = if k + 1 < self.layers.len() {
                &trace.inputs[k + 1]
            } else {
                &trace.output
            };
            Zip::from(&mut grad)
                .and(z)
                .and(a_out)
                .for_each(|g, &z, &a| *g *= l.activation.derivative(z, a));
            let dw = grad.t().dot(&trace.inputs[k]);
            let db = grad.sum_axis(Axis(0));
            if k > 0 {
                grad = grad.dot(&l.weight);
            } else if need_input {
                input = Some(grad.dot(&l.weight));
            }
            layers[k] = Some((dw, db));
        }
        Ok(GradientBundle {
            layers: layers.into_iter().map(|l| l.expect("filled")).collect(),
            input,
        })
    }

    fn require_scalar_output(&self) -> Result<()> {
        if self.output_dim() != 1 {
            return Err(Error::Precondition(format!(
                "input gradient needs a scalar-output network, output width is {}",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Row `i` is the gradient of output `i` with respect to input row `i`.
    pub fn input_gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.require_scalar_output()?;
        let trace = self.forward(x)?;
        let ones = Array2::ones(trace.output.raw_dim());
        Ok(self
            .backward_impl(&trace, ones.view(), true)?
            .input
            .expect("input gradient requested"))
    }

    /// Parameter gradient of `mean_r (‖∇ₓ D(x̂_r)‖₂ − 1)²`.
    pub fn penalty_parameter_gradient(&self, x_hat: ArrayView2<f64>) -> Result<PenaltyGradient> {
        self.require_scalar_output()?;
        if let Some(l) = self.layers.iter().find(|l| !l.activation.is_piecewise_linear()) {
            return Err(Error::Precondition(format!(
                "gradient penalty needs piecewise-linear activations, found {:?}",
                l.activation
            )));
        }
        let trace = self.forward(x_hat)?;
        let n = x_hat.nrows();
        let n_layers = self.layers.len();

        let masks: Vec<Array2<f64>> = self
            .layers
            .iter()
            .zip(&trace.pre_activations)
            .map(|(l, z)| z.mapv(|v| l.activation.derivative(v, 0.0)))
            .collect();

        // Backward sweep: v_l is the gradient of D with respect to z_l.
        let mut v: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        let mut cur = masks[n_layers - 1].clone();
        for k in (0..n_layers).rev() {
            let s = cur.dot(&self.layers[k].weight);
            v.push(cur);
            cur = if k > 0 { s * &masks[k - 1] } else { s };
        }
        v.reverse();
        let g = cur;

        let mut penalty = 0.0;
        let mut skipped = 0;
        let mut u = Array2::zeros(g.raw_dim());
        for (r, row) in g.outer_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            penalty += (norm - 1.0).powi(2);
            if norm == 0.0 {
                skipped += 1;
                continue;
            }
            let coef = 2.0 * (norm - 1.0) / norm / n as f64;
            u.row_mut(r).assign(&(&row * coef));
        }
        penalty /= n as f64;

        // Forward sweep of the adjoint through the masked linear maps.
        let mut layers = Vec::with_capacity(n_layers);
        let mut t = u;
        for k in 0..n_layers {
            let l = &self.layers[k];
            let dw = v[k].t().dot(&t);
            layers.push((dw, Array1::zeros(l.bias.len())));
            if k + 1 < n_layers {
                t = t.dot(&l.weight.t()) * &masks[k];
            }
        }
        Ok(PenaltyGradient {
            penalty,
            grads: GradientBundle {
                layers,
                input: None,
            },
            input_gradients: g,
            skipped,
        })
    }
}

/// Build a net from `layer_sizes` (input width first) and one activation
/// per layer. Weights are uniform in `±gain·√(3/fan_in)`, biases zero.
pub fn init_net(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<DenseNet> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config("need at least input and output sizes".into()));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Config(format!(
            "{} layers need {} activations, got {}",
            layer_sizes.len() - 1,
            layer_sizes.len() - 1,
            activations.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config("layer sizes must be >= 1".into()));
    }
    let mut rng = rng::rng(seed);
    let layers = layer_sizes
        .windows(2)
        .zip(activations)
        .map(|(w, &activation)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = activation.init_gain() * (3.0 / fan_in as f64).sqrt();
            let weight =
                Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..bound));
            Layer {
                weight,
                bias: Array1::zeros(fan_out),
                activation,
            }
        })
        .collect();
    DenseNet::new(layers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    /// Settings used for critic and generator training.
    pub fn gan(learning_rate: f64, weight_decay: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.0,
            beta2: 0.9,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// Settings used for the MLP classifier.
    pub fn classifier(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first: Vec<(Array2<f64>, Array1<f64>)>,
    pub second: Vec<(Array2<f64>, Array1<f64>)>,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        let z = GradientBundle::zeros_like(net).layers;
        AdamState {
            config,
            first: z.clone(),
            second: z,
            step: 0,
        }
    }
}

/// One Adam update with bias correction, followed by decoupled weight
/// decay `p ← p − η·λ·p`.
pub fn adam_step(net: &mut DenseNet, grads: &GradientBundle, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers.len() || state.first.len() != net.layers.len() {
        return Err(Error::Dimension {
            expected: net.layers.len(),
            got: grads.layers.len(),
        });
    }
    for (l, (gw, gb)) in net.layers.iter().zip(&grads.layers) {
        if l.weight.dim() != gw.dim() || l.bias.len() != gb.len() {
            return Err(Error::Dimension {
                expected: l.weight.len(),
                got: gw.len(),
            });
        }
    }
    state.step += 1;
    let c = state.config;
    let bc1 = 1.0 - c.beta1.powi(state.step as i32);
    let bc2 = 1.0 - c.beta2.powi(state.step as i32);
    let decay = 1.0 - c.learning_rate * c.weight_decay;

    let update = |p: f64, g: f64, m: &mut f64, v: &mut f64| -> f64 {
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        let stepped = p - c.learning_rate * m_hat / (v_hat.sqrt() + c.eps);
        if c.weight_decay == 0.0 {
            stepped
        } else {
            stepped * decay
        }
    };

    for (k, layer) in net.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[k];
        let (mw, mb) = &mut state.first[k];
        let (vw, vb) = &mut state.second[k];
        Zip::from(&mut layer.weight)
            .and(gw)
            .and(mw)
            .and(vw)
            .for_each(|p, &g, m, v| *p = update(*p, g, m, v));
        Zip::from(&mut layer.bias)
            .and(gb)
            .and(mb)
            .and(vb)
            .for_each(|p, &g, m, v| *p = update(*p, g, m, v));
    }
    Ok(())
}

const CHECKPOINT_FORMAT: &str = "ampgan-densenet";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetCheckpoint<'a> {
    format: std::borrow::Cow<'a, str>,
    version: u32,
    net: std::borrow::Cow<'a, DenseNet>,
}

impl DenseNet {
    /// Versioned JSON checkpoint; floats round-trip bit-exactly.
    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&NetCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            net: std::borrow::Cow::Borrowed(self),
        })
        .expect("net serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: NetCheckpoint<'static> = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let net = ck.net.into_owned();
        DenseNet::new(net.layers)
    }
}
