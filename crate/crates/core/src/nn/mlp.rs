use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GradientBundle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiplies `delta` by the derivative, expressed through the activation output `y`.
    fn backprop(self, y: &Array2<f64>, delta: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => delta.zip_mut_with(y, |d, &y| {
                if y <= 0.0 {
                    *d = 0.0;
                }
            }),
            Activation::Tanh => delta.zip_mut_with(y, |d, &y| *d *= 1.0 - y * y),
        }
    }
}

/// Fully connected network. Weights are stored `(fan_in, fan_out)` so a
/// batch of row vectors maps as `x.dot(w) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    hidden: Activation,
    output: Activation,
}

/// Per-layer activations recorded by [`Mlp::forward_tape`]; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("tape has the input at least")
    }
}

impl Mlp {
    /// Uniform fan-in initialisation: every weight and bias of a layer is
    /// drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        let mut net = Self::zeros(widths, hidden, output);
        for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
            b.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        net
    }

    pub fn zeros(widths: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(widths.len() >= 2, "an mlp needs input and output widths");
        assert!(widths.iter().all(|&w| w > 0), "layer widths must be positive");
        let weights = widths.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let biases = widths[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Self {
            widths: widths.to_vec(),
            weights,
            biases,
            hidden,
            output,
        }
    }

    /// Sets the final layer to zero so the network initially outputs 0 everywhere.
    pub fn zero_output_layer(&mut self) {
        self.weights.last_mut().unwrap().fill(0.0);
        self.biases.last_mut().unwrap().fill(0.0);
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn weight(&self, layer: usize) -> &Array2<f64> {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &Array1<f64> {
        &self.biases[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.biases[layer]
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector shape");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.dot(w);
            z += b;
            self.activation(l).apply(&mut z);
            h = z;
        }
        Ok(h)
    }

    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(x.ncols())?;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w);
            z += b;
            self.activation(l).apply(&mut z);
            acts.push(z);
        }
        Ok(Tape { acts })
    }

    /// Reverse pass for `sum_rows <upstream_row, output_row>`: parameter
    /// gradients summed over the batch, plus the gradient w.r.t. the input rows.
    pub fn backward(&self, tape: &Tape, upstream: ArrayView2<f64>) -> Result<(GradientBundle, Array2<f64>)> {
        let out = tape.output();
        if upstream.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp upstream gradient",
                expected: out.len(),
                actual: upstream.len(),
            });
        }
        let layers = self.weights.len();
        let mut grad_w = Vec::with_capacity(layers);
        let mut grad_b = Vec::with_capacity(layers);
        let mut delta = upstream.to_owned();
        for l in (0..layers).rev() {
            self.activation(l).backprop(&tape.acts[l + 1], &mut delta);
            grad_w.push(tape.acts[l].t().dot(&delta));
            grad_b.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[l].t());
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((GradientBundle::new(grad_w, grad_b), delta))
    }

    /// Gradient of `<upstream, forward(x)>` with respect to every parameter.
    pub fn grad(&self, x: &[f64], upstream: &[f64]) -> Result<GradientBundle> {
        self.check_input(x.len())?;
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp upstream gradient",
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row vector shape");
        let uv = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector shape");
        let tape = self.forward_tape(xv)?;
        Ok(self.backward(&tape, uv)?.0)
    }

    /// Parameters in canonical order: each layer's weights (row-major) then its bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "mlp parameter vector",
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        for (slot, &v) in self.params_mut().zip(params) {
            *slot = v;
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.widths == other.widths && self.hidden == other.hidden && self.output == other.output
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn polyak_from(&mut self, source: &Mlp, tau: f64) {
        assert!(self.same_architecture(source), "polyak update between different architectures");
        for (t, s) in self.weights.iter_mut().zip(&source.weights) {
            t.zip_mut_with(s, |t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        for (t, s) in self.biases.iter_mut().zip(&source.biases) {
            t.zip_mut_with(s, |t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
    }
}
