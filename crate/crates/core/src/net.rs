//! Dense feed-forward networks with exact backpropagation and Adam.
//!
//! Parameters live in one flat `f64` vector so that the same buffer can be
//! used as a CEM genome. Layer `l` occupies `fan_out * fan_in` weights stored
//! row-major (one row per output unit) followed by `fan_out` biases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{check_len, Error, Result};

/// Nonlinearity applied after each hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenActivation {
    Tanh,
    Relu,
    LeakyRelu,
}

/// Nonlinearity applied after the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Activation {
    Tanh,
    Relu,
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if y > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Position of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// Shape and nonlinearities of a multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    layer_sizes: Vec<usize>,
    hidden: HiddenActivation,
    output: OutputActivation,
    leaky_slope: f64,
    slots: Vec<LayerSlot>,
    n_params: usize,
}

impl NetSpec {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

    pub fn new(
        layer_sizes: Vec<usize>,
        hidden: HiddenActivation,
        output: OutputActivation,
    ) -> Result<Self> {
        Self::with_leaky_slope(layer_sizes, hidden, output, Self::DEFAULT_LEAKY_SLOPE)
    }

    pub fn with_leaky_slope(
        layer_sizes: Vec<usize>,
        hidden: HiddenActivation,
        output: OutputActivation,
        leaky_slope: f64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a network needs at least an input and an output layer, got {} layer(s)",
                layer_sizes.len()
            )));
        }
        if let Some(i) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("layer {i} has zero units")));
        }
        if !(leaky_slope > 0.0 && leaky_slope < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leaky slope must lie in (0, 1), got {leaky_slope}"
            )));
        }
        let mut slots = Vec::with_capacity(layer_sizes.len() - 1);
        let mut offset = 0;
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            slots.push(LayerSlot {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            });
            offset += (fan_in + 1) * fan_out;
        }
        Ok(NetSpec {
            layer_sizes,
            hidden,
            output,
            leaky_slope,
            slots,
            n_params: offset,
        })
    }

    /// Actor: `obs -> hidden... -> action`, tanh output so actions stay in (-1, 1).
    pub fn actor(
        obs_dim: usize,
        hidden_sizes: &[usize],
        action_dim: usize,
        hidden: HiddenActivation,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden_sizes);
        sizes.push(action_dim);
        Self::new(sizes, hidden, OutputActivation::Tanh)
    }

    /// Critic: `[state; action] -> hidden... -> 1`, leaky-relu hidden units.
    pub fn critic(obs_dim: usize, action_dim: usize, hidden_sizes: &[usize]) -> Result<Self> {
        let mut sizes = vec![obs_dim + action_dim];
        sizes.extend_from_slice(hidden_sizes);
        sizes.push(1);
        Self::new(sizes, HiddenActivation::LeakyRelu, OutputActivation::Identity)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    /// Total number of weights and biases.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.slots.len() {
            match self.output {
                OutputActivation::Tanh => Activation::Tanh,
                OutputActivation::Identity => Activation::Identity,
            }
        } else {
            match self.hidden {
                HiddenActivation::Tanh => Activation::Tanh,
                HiddenActivation::Relu => Activation::Relu,
                HiddenActivation::LeakyRelu => Activation::LeakyRelu(self.leaky_slope),
            }
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization of weights and biases.
    pub fn init_params(&self, seed: u64) -> NetParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; self.n_params];
        for slot in &self.slots {
            let bound = 1.0 / (slot.fan_in as f64).sqrt();
            let dist = Uniform::new(-bound, bound).expect("finite positive bound");
            let end = slot.bias_offset + slot.fan_out;
            for v in &mut values[slot.weight_offset..end] {
                *v = dist.sample(&mut rng);
            }
        }
        NetParams(values)
    }

    pub fn check_params(&self, params: &NetParams) -> Result<()> {
        check_len("network parameters", self.n_params, params.len())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, params: &NetParams, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_batch(params, input, 1)?;
        Ok(trace.activations.pop().expect("at least one layer"))
    }

    /// Forward pass over `batch` row-major inputs, keeping every layer's output.
    pub fn forward_batch(&self, params: &NetParams, inputs: &[f64], batch: usize) -> Result<Trace> {
        self.check_params(params)?;
        check_len("network input", batch * self.input_dim(), inputs.len())?;
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(inputs.to_vec());
        for (l, slot) in self.slots.iter().enumerate() {
            let act = self.activation(l);
            let w = &params.0[slot.weight_offset..slot.bias_offset];
            let b = &params.0[slot.bias_offset..slot.bias_offset + slot.fan_out];
            let x = &activations[l];
            let mut y = Vec::with_capacity(batch * slot.fan_out);
            for _ in 0..batch {
                y.extend_from_slice(b);
            }
            // Y += X · Wᵀ
            gemm(
                (batch, slot.fan_in, slot.fan_out),
                (x, slot.fan_in, 1),
                (w, 1, slot.fan_in),
                1.0,
                (&mut y, slot.fan_out, 1),
            );
            for v in &mut y {
                *v = act.apply(*v);
            }
            activations.push(y);
        }
        Ok(Trace { batch, activations })
    }

    /// Gradient of `output · upstream_grad` with respect to the parameters and
    /// the input, for a single sample.
    pub fn backward(
        &self,
        params: &NetParams,
        input: &[f64],
        upstream_grad: &[f64],
    ) -> Result<Gradients> {
        let trace = self.forward_batch(params, input, 1)?;
        self.backward_batch(params, &trace, upstream_grad)
    }

    /// Batched backward pass: parameter gradients are summed over the batch,
    /// input gradients are returned per sample.
    pub fn backward_batch(
        &self,
        params: &NetParams,
        trace: &Trace,
        upstream_grad: &[f64],
    ) -> Result<Gradients> {
        let (p, i) = self.backprop(params, trace, upstream_grad, true)?;
        Ok(Gradients {
            params: p.expect("requested"),
            input: i,
        })
    }

    /// Like [`NetSpec::backward_batch`] but skips parameter gradients.
    pub fn input_gradient_batch(
        &self,
        params: &NetParams,
        trace: &Trace,
        upstream_grad: &[f64],
    ) -> Result<Vec<f64>> {
        Ok(self.backprop(params, trace, upstream_grad, false)?.1)
    }

    fn backprop(
        &self,
        params: &NetParams,
        trace: &Trace,
        upstream_grad: &[f64],
        want_params: bool,
    ) -> Result<(Option<Vec<f64>>, Vec<f64>)> {
        self.check_params(params)?;
        let n = trace.batch;
        check_len("upstream gradient", n * self.output_dim(), upstream_grad.len())?;
        check_len("trace depth", self.layer_sizes.len(), trace.activations.len())?;

        let mut grad = want_params.then(|| vec![0.0; self.n_params]);
        let last = self.slots.len() - 1;
        let out_act = self.activation(last);
        let mut delta: Vec<f64> = upstream_grad
            .iter()
            .zip(&trace.activations[last + 1])
            .map(|(g, &y)| g * out_act.derivative_from_output(y))
            .collect();

        for l in (0..self.slots.len()).rev() {
            let slot = self.slots[l];
            let x = &trace.activations[l];
            let w = &params.0[slot.weight_offset..slot.bias_offset];
            if let Some(grad) = grad.as_mut() {
                let (gw, gb) = grad[slot.weight_offset..slot.bias_offset + slot.fan_out]
                    .split_at_mut(slot.fan_in * slot.fan_out);
                // dW += Δᵀ · X
                gemm(
                    (slot.fan_out, n, slot.fan_in),
                    (&delta, 1, slot.fan_out),
                    (x, slot.fan_in, 1),
                    1.0,
                    (gw, slot.fan_in, 1),
                );
                for dr in delta.chunks_exact(slot.fan_out) {
                    for (g, d) in gb.iter_mut().zip(dr) {
                        *g += d;
                    }
                }
            }
            // dX = Δ · W
            let mut dx = vec![0.0; n * slot.fan_in];
            gemm(
                (n, slot.fan_out, slot.fan_in),
                (&delta, slot.fan_out, 1),
                (w, slot.fan_in, 1),
                0.0,
                (&mut dx, slot.fan_in, 1),
            );
            if l > 0 {
                let act = self.activation(l - 1);
                for (d, &y) in dx.iter_mut().zip(x) {
                    *d *= act.derivative_from_output(y);
                }
            }
            delta = dx;
        }
        Ok((grad, delta))
    }
}

/// `C = A · B + beta · C` for strided row/column views, `(m, k, n)` shaped.
fn gemm(
    (m, k, n): (usize, usize, usize),
    (a, rsa, csa): (&[f64], usize, usize),
    (b, rsb, csb): (&[f64], usize, usize),
    beta: f64,
    (c, rsc, csc): (&mut [f64], usize, usize),
) {
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(m > 0 && k > 0 && n > 0);
    assert!(last(m, k, rsa, csa) < a.len());
    assert!(last(k, n, rsb, csb) < b.len());
    assert!(last(m, n, rsc, csc) < c.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Flat parameter vector of a network. The layer index map lives in [`NetSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams(pub Vec<f64>);

impl NetParams {
    pub fn zeros(spec: &NetSpec) -> Self {
        NetParams(vec![0.0; spec.n_params()])
    }

    /// Wraps a flat vector after checking it against `spec`.
    pub fn unflatten(spec: &NetSpec, flat: Vec<f64>) -> Result<Self> {
        check_len("network parameters", spec.n_params(), flat.len())?;
        Ok(NetParams(flat))
    }

    pub fn flatten(&self) -> &[f64] {
        &self.0
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weight matrix (row per output unit) and bias vector of layer `layer`.
    pub fn layer<'a>(&'a self, spec: &NetSpec, layer: usize) -> (&'a [f64], &'a [f64]) {
        let s = spec.slots()[layer];
        (
            &self.0[s.weight_offset..s.bias_offset],
            &self.0[s.bias_offset..s.bias_offset + s.fan_out],
        )
    }

    pub fn layer_mut<'a>(&'a mut self, spec: &NetSpec, layer: usize) -> (&'a mut [f64], &'a mut [f64]) {
        let s = spec.slots()[layer];
        let (w, b) = self.0[s.weight_offset..s.bias_offset + s.fan_out].split_at_mut(s.fan_in * s.fan_out);
        (w, b)
    }
}

/// Per-layer outputs of a batched forward pass; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    pub batch: usize,
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }

    /// One descent step. A non-finite gradient leaves both the state and the
    /// parameters untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len("adam parameters", self.m.len(), params.len())?;
        check_len("adam gradient", self.m.len(), grad.len())?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite gradient coordinate {i} ({})",
                grad[i]
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        Ok(())
    }
}
