use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{check_len, Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    /// Leaky ReLU with negative slope 0.2.
    LeakyRelu,
    Identity,
}

const LEAKY_SLOPE: f64 = 0.2;

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the activation value `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Parameters of a fully connected network.
///
/// `weights[i]` maps layer `i` to layer `i + 1` and has shape
/// `layer_sizes[i + 1] x layer_sizes[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// Intermediate values of one forward pass, consumed by [`Mlp::backward_tape`].
#[derive(Clone, Debug)]
pub struct Tape {
    /// `values[0]` is the input, `values[i]` the output of layer `i`.
    values: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("tape always holds the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.values[0]
    }
}

/// Gradient with the same layout as [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            w.data_mut().iter_mut().zip(o.data()).for_each(|(a, b)| *a += b);
        }
        for (b, o) in self.biases.iter_mut().zip(&other.biases) {
            b.iter_mut().zip(o).for_each(|(a, c)| *a += c);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.data_mut().iter_mut().chain(b.iter_mut()))
    }
}

impl Mlp {
    /// Scaled uniform fan-in/fan-out initialization, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        for w in &mut net.weights {
            let limit = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Invalid(format!(
                "layer sizes must have at least two positive entries, got {layer_sizes:?}"
            )));
        }
        let weights = layer_sizes
            .windows(2)
            .map(|p| Matrix::zeros(p[1], p[0]))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn from_parts(
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("mlp layers"));
        }
        check_len("Mlp::from_parts layer count", weights.len(), biases.len())?;
        let mut layer_sizes = vec![weights[0].cols()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            check_len("Mlp::from_parts fan-in", layer_sizes[i], w.cols())?;
            check_len("Mlp::from_parts bias", w.rows(), b.len())?;
            layer_sizes.push(w.rows());
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    /// Zeroes the final layer so the network outputs exactly zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.weights.len() - 1;
        self.weights[last].data_mut().fill(0.0);
        self.biases[last].fill(0.0);
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.data().len() + b.len())
            .sum()
    }

    /// Parameters flattened layer by layer (weights row-major, then bias).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("Mlp::set_flat", self.num_params(), flat.len())?;
        let mut it = flat.iter();
        for v in self.values_mut() {
            *v = *it.next().unwrap();
        }
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.data_mut().iter_mut().chain(b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("mlp input", self.input_dim(), input.len())?;
        let last = self.weights.len() - 1;
        let mut x = input.to_vec();
        let mut z = Vec::new();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            w.affine_into(&x, b, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut x, &mut z);
        }
        Ok(x)
    }

    pub fn forward_tape(&self, input: &[f64]) -> Result<Tape> {
        check_len("mlp input", self.input_dim(), input.len())?;
        let last = self.weights.len() - 1;
        let mut values = Vec::with_capacity(self.weights.len() + 1);
        let mut pre = Vec::with_capacity(self.weights.len());
        values.push(input.to_vec());
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = Vec::with_capacity(w.rows());
            w.affine_into(values.last().unwrap(), b, &mut z);
            let y = if i < last {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            values.push(y);
        }
        Ok(Tape { values, pre })
    }

    /// Accumulates the gradient of `output · output_grad` into `grads` and
    /// returns the gradient with respect to the input.
    pub fn backward_tape(
        &self,
        tape: &Tape,
        output_grad: &[f64],
        grads: &mut Gradient,
    ) -> Result<Vec<f64>> {
        check_len("mlp output grad", self.output_dim(), output_grad.len())?;
        let last = self.weights.len() - 1;
        let mut delta = output_grad.to_vec();
        for i in (0..=last).rev() {
            if i < last {
                for ((d, z), y) in delta.iter_mut().zip(&tape.pre[i]).zip(&tape.values[i + 1]) {
                    *d *= self.activation.derivative(*z, *y);
                }
            }
            grads.weights[i].add_outer(&delta, &tape.values[i]);
            grads.biases[i].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
            delta = self.weights[i].transpose_mul(&delta);
        }
        Ok(delta)
    }

    /// Exact reverse-mode gradient of `output · output_grad` with respect to
    /// every parameter and to the input.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(Gradient, Vec<f64>)> {
        let tape = self.forward_tape(input)?;
        let mut grads = Gradient::zeros_like(self);
        let input_grad = self.backward_tape(&tape, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use crate::rng::Streams;

    #[test]
    fn identity_single_layer_passes_input_through() {
        let net = Mlp::from_parts(vec![Matrix::identity(2)], vec![vec![0.0; 2]], Activation::Identity)
            .unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_final_layer_gives_zero_output() {
        let mut rng = Streams::new(3).stream("init");
        let mut net = Mlp::new(&[4, 16, 16, 3], Activation::Tanh, &mut rng).unwrap();
        net.zero_output_layer();
        assert_eq!(net.forward(&[0.3, -1.0, 2.0, 0.1]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn hand_expanded_one_two_one_tanh_net() {
        let w1 = Matrix::from_vec(2, 1, vec![0.3, -0.7]).unwrap();
        let w2 = Matrix::from_vec(1, 2, vec![0.5, -1.2]).unwrap();
        let net = Mlp::from_parts(vec![w1, w2], vec![vec![0.1, 0.2], vec![0.05]], Activation::Tanh)
            .unwrap();
        // w2 . tanh(w1 * 0.5 + b1) + b2, evaluated by hand.
        let expected = 0.351_121_371_549_836_1;
        let out = net.forward(&[0.5]).unwrap();
        assert!((out[0] - expected).abs() < 1e-14, "{}", out[0]);
    }

    #[test]
    fn shape_error_names_both_sides() {
        let net = Mlp::zeros(&[3, 2], Activation::Tanh).unwrap();
        let err = net.forward(&[1.0]).unwrap_err().to_string();
        assert!(err.contains('3') && err.contains('1'), "{err}");
        assert!(net.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_gradient() {
        let mut rng = Streams::new(5).stream("init");
        let net = Mlp::new(&[3, 8, 2], Activation::Tanh, &mut rng).unwrap();
        let (g, gin) = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(gin.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_input() {
        let w = Matrix::from_vec(1, 3, vec![0.2, -0.4, 0.9]).unwrap();
        let net = Mlp::from_parts(vec![w], vec![vec![0.0]], Activation::Identity).unwrap();
        let x = [1.5, -2.0, 0.25];
        let (g, gin) = net.backward(&x, &[1.0]).unwrap();
        assert_eq!(g.weights[0].data(), &x);
        assert_eq!(g.biases[0], vec![1.0]);
        assert_eq!(gin, vec![0.2, -0.4, 0.9]);
    }

    fn check_random_net(activation: Activation, seed: u64) {
        let streams = Streams::new(seed);
        let mut rng = streams.stream("init");
        let net = Mlp::new(&[3, 8, 8, 2], activation, &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let og: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (g, _) = net.backward(&x, &og).unwrap();
        let mut probe = net.clone();
        let report = gradient_check(
            |p| {
                probe.set_flat(p).unwrap();
                let y = probe.forward(&x).unwrap();
                y.iter().zip(&og).map(|(a, b)| a * b).sum()
            },
            &net.to_flat(),
            &g.to_flat(),
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{activation:?} seed {seed}: {report:?}");
    }

    #[test]
    fn random_nets_match_finite_differences() {
        for seed in 0..20 {
            check_random_net(Activation::Tanh, seed);
            check_random_net(Activation::LeakyRelu, seed);
            check_random_net(Activation::Relu, seed);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = Streams::new(11).stream("init");
        let net = Mlp::new(&[3, 8, 8, 2], Activation::Tanh, &mut rng).unwrap();
        let x = vec![0.3, -0.5, 0.8];
        let og = [0.7, -1.1];
        let (_, gin) = net.backward(&x, &og).unwrap();
        let report = gradient_check(
            |p| net.forward(p).unwrap().iter().zip(&og).map(|(a, b)| a * b).sum(),
            &x,
            &gin,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = Streams::new(2).stream("init");
        let net = Mlp::new(&[4, 8, 3], Activation::LeakyRelu, &mut rng).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(net.forward_tape(&x).unwrap().output(), &a[..]);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = Streams::new(9).stream("init");
        let net = Mlp::new(&[2, 5, 1], Activation::Tanh, &mut rng).unwrap();
        let mut other = Mlp::zeros(&[2, 5, 1], Activation::Tanh).unwrap();
        other.set_flat(&net.to_flat()).unwrap();
        assert_eq!(net, other);
        assert!(other.set_flat(&[0.0; 3]).is_err());
    }
}
