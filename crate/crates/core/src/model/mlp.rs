//! Fully connected ReLU network with an identity or softmax head.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_width, PredictiveModel};
use crate::data::TargetVector;
use crate::error::{invalid, Error, Result};
use crate::loss::{LossKind, Target, PROB_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    Identity,
    Softmax,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Input width including the intercept column.
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub head: Head,
}

impl MlpConfig {
    pub fn regression(input: usize, hidden: Vec<usize>) -> Self {
        MlpConfig { input, hidden, output: 1, head: Head::Identity }
    }

    pub fn classification(input: usize, hidden: Vec<usize>, classes: usize) -> Self {
        MlpConfig { input, hidden, output: classes, head: Head::Softmax }
    }

    /// Input and output widths taken from the data.
    pub fn for_targets(input: usize, hidden: Vec<usize>, y: &TargetVector) -> Self {
        match y {
            TargetVector::Regression { .. } => MlpConfig::regression(input, hidden),
            TargetVector::Classification { class_count, .. } => {
                MlpConfig::classification(input, hidden, *class_count)
            }
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input];
        s.extend(&self.hidden);
        s.push(self.output);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes().contains(&0) {
            return Err(invalid("all layer sizes must be at least 1"));
        }
        if self.head == Head::Identity && self.output != 1 {
            return Err(invalid("identity head expects a single output"));
        }
        Ok(())
    }
}

/// One affine layer: `z = a W^T + b`, with `W` of shape `out × in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Dense>,
}

/// Per-layer parameter gradients, laid out like [`Mlp`]'s layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect()
}

impl Mlp {
    /// He-style initialisation: weights `N(0, 2 / fan_in)`, zero biases.
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = config.layer_sizes();
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive stddev");
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Mlp { config, layers })
    }

    /// Builds a network from explicit parameters.
    pub fn from_layers(config: MlpConfig, layers: Vec<Dense>) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes();
        if layers.len() != sizes.len() - 1 {
            return Err(Error::DimensionMismatch { expected: sizes.len() - 1, found: layers.len() });
        }
        for (l, w) in layers.iter().zip(sizes.windows(2)) {
            if l.weights.dim() != (w[1], w[0]) || l.bias.len() != w[1] {
                return Err(invalid("layer shape does not match the configuration"));
            }
        }
        Ok(Mlp { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Same architecture with parameters redrawn from the initialiser.
    pub fn randomize(&self, seed: u64) -> Mlp {
        Mlp::new(self.config.clone(), seed).expect("config already validated")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch { expected: self.parameter_count(), found: params.len() });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activations (input first).
    fn forward_trace(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else if self.config.head == Head::Softmax {
                softmax_rows(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(self.config.input, x)?;
        let out = self.forward_trace(x).pop().expect("at least one layer");
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("network produced non-finite output".into()));
        }
        Ok(out)
    }

    /// Mean (optionally weighted) loss over a batch and its parameter gradients.
    pub fn gradients(&self, x: ArrayView2<f64>, y: &TargetVector, loss: &LossKind) -> Result<(f64, Gradients)> {
        check_width(self.config.input, x)?;
        let b = x.nrows();
        if b == 0 {
            return Err(Error::Empty("gradient batch".into()));
        }
        if y.len() != b {
            return Err(Error::DimensionMismatch { expected: b, found: y.len() });
        }
        let acts = self.forward_trace(x);
        let out = acts.last().expect("output layer");
        let (value, mut delta) = output_delta(out.view(), y, loss, self.config.head)?;
        if !value.is_finite() {
            return Err(Error::Diverged { epoch: 0, detail: "non-finite loss".into() });
        }

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let a_prev = &acts[i];
            let weights = delta.t().dot(a_prev);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                // ReLU derivative, zero at and below zero
                Zip::from(&mut back).and(a_prev).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok((value, Gradients { layers: grads }))
    }

    /// Mean loss over a dataset, evaluated in chunks.
    pub fn mean_loss(&self, x: ArrayView2<f64>, y: &TargetVector, loss: &LossKind) -> Result<f64> {
        let out = self.forward(x)?;
        let (value, _) = output_delta(out.view(), y, loss, self.config.head)?;
        Ok(value)
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Mean loss and `∂loss/∂z` at the output pre-activation.
fn output_delta(out: ArrayView2<f64>, y: &TargetVector, loss: &LossKind, head: Head) -> Result<(f64, Array2<f64>)> {
    let b = out.nrows() as f64;
    let mut delta = Array2::zeros(out.dim());
    let mut total = 0.0;
    match (head, loss) {
        (Head::Identity, LossKind::SquaredError | LossKind::AbsoluteDeviation) => {
            for i in 0..out.nrows() {
                let Target::Real(t) = y.get(i) else {
                    return Err(invalid("regression loss needs real targets"));
                };
                let r = out[[i, 0]] - t;
                if *loss == LossKind::SquaredError {
                    total += r * r;
                    delta[[i, 0]] = 2.0 * r / b;
                } else {
                    total += r.abs();
                    delta[[i, 0]] = r.signum() * f64::from(r != 0.0) / b;
                }
            }
        }
        (Head::Softmax, LossKind::CrossEntropy | LossKind::WeightedCrossEntropy(_)) => {
            for i in 0..out.nrows() {
                let Target::Class(c) = y.get(i) else {
                    return Err(invalid("cross-entropy needs class targets"));
                };
                if c >= out.ncols() {
                    return Err(Error::IndexOutOfRange { index: c, bound: out.ncols() });
                }
                let w = match loss {
                    LossKind::WeightedCrossEntropy(ws) => ws[c],
                    _ => 1.0,
                };
                total += -w * out[[i, c]].max(PROB_FLOOR).ln();
                for k in 0..out.ncols() {
                    let onehot = if k == c { 1.0 } else { 0.0 };
                    delta[[i, k]] = w * (out[[i, k]] - onehot) / b;
                }
            }
        }
        _ => return Err(invalid(format!("loss '{}' does not fit the {head:?} head", loss.name()))),
    }
    Ok((total / b, delta))
}

impl PredictiveModel for Mlp {
    fn input_width(&self) -> usize {
        self.config.input
    }

    fn output_width(&self) -> usize {
        self.config.output
    }

    fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward(x)
    }

    fn first_layer_weights(&self) -> Option<ArrayView2<'_, f64>> {
        Some(self.layers[0].weights.view())
    }

    fn randomized(&self, seed: u64) -> Result<Box<dyn PredictiveModel>> {
        Ok(Box::new(self.randomize(seed)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn zero_net(hidden: Vec<usize>) -> Mlp {
        let mut m = Mlp::new(MlpConfig::regression(3, hidden), 0).unwrap();
        m.layers_mut().iter_mut().for_each(|l| {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        });
        m
    }

    #[test]
    fn zero_network_predicts_zero_then_bias() {
        let mut m = zero_net(vec![4]);
        let x = array![[1.0, 2.0, -3.0], [1.0, 0.5, 9.0]];
        assert_eq!(m.forward(x.view()).unwrap(), array![[0.0], [0.0]]);
        m.layers_mut()[1].bias[0] = 2.5;
        assert_eq!(m.forward(x.view()).unwrap(), array![[2.5], [2.5]]);
    }

    #[test]
    fn hand_forward_pass() {
        let cfg = MlpConfig::regression(2, vec![1]);
        let m = Mlp::from_layers(
            cfg,
            vec![
                Dense { weights: array![[0.0, 1.0]], bias: array![0.0] },
                Dense { weights: array![[2.0]], bias: array![1.0] },
            ],
        )
        .unwrap();
        assert_eq!(m.forward(array![[1.0, 3.0]].view()).unwrap(), array![[7.0]]);
        assert_eq!(m.forward(array![[1.0, -3.0]].view()).unwrap(), array![[1.0]]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = Mlp::new(MlpConfig::regression(3, vec![2]), 1).unwrap();
        assert!(m.forward(array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn zero_net_output_bias_gradient() {
        let m = zero_net(vec![3]);
        let x = array![[1.0, 0.3, 0.1], [1.0, -2.0, 0.4], [1.0, 0.0, 1.0]];
        let y = TargetVector::regression(vec![1.0, 2.0, 6.0]);
        let (_, g) = m.gradients(x.view(), &y, &LossKind::SquaredError).unwrap();
        assert!((g.layers[1].bias[0] - (-2.0 * 3.0)).abs() < 1e-12);
        // zero pre-activations block every hidden-layer gradient
        assert!(g.layers[0].weights.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let cfg = MlpConfig::regression(2, vec![1]);
        let m = Mlp::from_layers(
            cfg,
            vec![
                Dense { weights: array![[0.0, 1.0]], bias: array![0.0] },
                Dense { weights: array![[2.0]], bias: array![0.0] },
            ],
        )
        .unwrap();
        let y = TargetVector::regression(vec![5.0]);
        let (_, g) = m.gradients(array![[1.0, -3.0]].view(), &y, &LossKind::SquaredError).unwrap();
        assert_eq!(g.layers[0].weights, array![[0.0, 0.0]]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Mlp::new(MlpConfig::classification(4, vec![8], 3), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((1000, 4), |(_, j)| if j == 0 { 1.0 } else { rng.random_range(-30.0..30.0) });
        let p = m.forward(x.view()).unwrap();
        for row in p.outer_iter() {
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn randomize_keeps_architecture() {
        let m = Mlp::new(MlpConfig::regression(5, vec![7, 3]), 1).unwrap();
        let a = m.randomize(2);
        let b = m.randomize(3);
        assert_eq!(a.config().layer_sizes(), m.config().layer_sizes());
        assert_ne!(a.flatten(), b.flatten());
        assert_eq!(m.first_layer_weights().unwrap().dim(), (7, 5));
        assert_eq!(Mlp::new(m.config().clone(), 1).unwrap(), m);
    }

    #[test]
    fn predict_is_repeatable() {
        let m = Mlp::new(MlpConfig::regression(3, vec![6]), 4).unwrap();
        let x = array![[1.0, 0.2, 0.7], [1.0, -1.0, 2.0]];
        assert_eq!(m.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
    }
}
