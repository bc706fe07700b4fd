//! Stacked sparse autoencoder with a soft-max head.
//!
//! Matrices follow the column-per-record convention: an input batch is an
//! `M x r` array whose columns are records. Each sparse autoencoder maps
//! `M -> N` with a sigmoid encoder and `N -> M` with a sigmoid decoder and is
//! trained on
//!
//! ```text
//! J = 1/(2r) sum_i |x_i - x̂_i|^2
//!   + lambda/2 (|U|^2 + |U'|^2 + |b|^2 + |b'|^2)
//!   + beta sum_j KL(rho || rho_hat_j)
//! ```
//!
//! where `rho_hat_j` is the mean activation of hidden unit `j` over the
//! batch. Layers are pretrained greedily, a soft-max classifier is trained on
//! the last layer's codes, and then the whole stack is fine-tuned on the
//! cross-entropy loss. Optimisation is plain full-batch gradient descent and
//! every random draw comes from one seeded ChaCha stream, so a given seed,
//! dataset and hyperparameter set always yields the same model bits.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds applied to the mean hidden activation before taking logs.
pub const RHO_HAT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Weight decay.
    pub lambda: f64,
    /// Sparsity penalty weight.
    pub beta: f64,
    /// Sparsity target.
    pub rho: f64,
    /// Input dimension followed by each hidden layer's width.
    pub layer_sizes: Vec<usize>,
    pub epochs_pretrain: usize,
    /// Epochs for the soft-max head before fine-tuning.
    pub epochs_softmax: usize,
    pub epochs_finetune: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Include bias vectors in the autoencoder weight-decay term.
    pub decay_biases: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1e-4,
            beta: 3.0,
            rho: 0.05,
            layer_sizes: vec![68, 34, 17],
            epochs_pretrain: 400,
            epochs_softmax: 400,
            epochs_finetune: 4000,
            learning_rate: 0.3,
            seed: 1,
            decay_biases: true,
        }
    }
}

impl Hyperparams {
    pub fn penalty(&self) -> SparsityPenalty {
        SparsityPenalty {
            lambda: self.lambda,
            beta: self.beta,
            rho: self.rho,
            decay_biases: self.decay_biases,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.layer_sizes.is_empty() || self.layer_sizes.contains(&0) {
            return bad(format!("invalid layer sizes {:?}", self.layer_sizes));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.lambda >= 0.0 && self.beta >= 0.0) {
            return bad("lambda and beta must be non-negative".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

/// Penalty terms of the autoencoder cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityPenalty {
    pub lambda: f64,
    pub beta: f64,
    pub rho: f64,
    pub decay_biases: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// KL divergence between Bernoulli(rho) and Bernoulli(rho_hat), natural log.
pub fn kl_divergence(rho: f64, rho_hat: f64) -> f64 {
    let rho_hat = rho_hat.clamp(RHO_HAT_EPSILON, 1.0 - RHO_HAT_EPSILON);
    rho * (rho / rho_hat).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - rho_hat)).ln()
}

fn dim_err(what: &str, expected: usize, got: usize) -> Error {
    Error::Dimension(format!("{what}: expected {expected}, got {got}"))
}

/// Affine map followed by a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidLayer {
    /// `out x in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl SigmoidLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        SigmoidLayer {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn random<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let r = (6.0 / (input + output) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((output, input), || rng.random_range(-r..r));
        SigmoidLayer {
            weights,
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn pre_activation(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = self.weights.dot(&x);
        z += &self.bias.view().insert_axis(Axis(1));
        z
    }

    /// Encodes every column of `x`.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(dim_err("layer input rows", self.input_dim(), x.nrows()));
        }
        Ok(self.pre_activation(x).mapv_into(sigmoid))
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(dim_err("layer input length", self.input_dim(), x.len()));
        }
        let x = ndarray::ArrayView1::from(x);
        let mut z = self.weights.dot(&x);
        z += &self.bias;
        Ok(z.mapv_into(sigmoid))
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn step(&mut self, grad: &SigmoidLayer, lr: f64) {
        self.weights.scaled_add(-lr, &grad.weights);
        self.bias.scaled_add(-lr, &grad.bias);
    }

    fn is_finite(&self) -> bool {
        self.parameters().all(|v| v.is_finite())
    }
}

/// One sparse autoencoder: encoder `M -> N` plus decoder `N -> M`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderLayer {
    pub encoder: SigmoidLayer,
    pub decoder: SigmoidLayer,
}

impl AutoencoderLayer {
    pub fn random<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let encoder = SigmoidLayer::random(input, hidden, rng);
        let decoder = SigmoidLayer::random(hidden, input, rng);
        AutoencoderLayer { encoder, decoder }
    }

    fn zeros_like(&self) -> Self {
        AutoencoderLayer {
            encoder: SigmoidLayer::zeros(self.encoder.input_dim(), self.encoder.output_dim()),
            decoder: SigmoidLayer::zeros(self.decoder.input_dim(), self.decoder.output_dim()),
        }
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.encoder.parameters().chain(self.decoder.parameters())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.encoder
            .parameters_mut()
            .chain(self.decoder.parameters_mut())
    }

    /// Mean squared reconstruction error per record, `1/(2r) sum |x - x̂|^2`.
    pub fn reconstruction_error(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        let hidden = self.encoder.forward(x)?;
        let out = self.decoder.forward(hidden.view())?;
        let r = x.ncols().max(1) as f64;
        Ok((&out - &x).mapv(|d| d * d).sum() / (2.0 * r))
    }
}

pub fn encode(layer: &AutoencoderLayer, x: &[f64]) -> Result<Array1<f64>> {
    layer.encoder.forward_one(x)
}

/// Autoencoder cost and its exact gradient with respect to every parameter.
pub fn sae_cost_grad(
    layer: &AutoencoderLayer,
    x: ArrayView2<'_, f64>,
    penalty: &SparsityPenalty,
) -> Result<(f64, AutoencoderLayer)> {
    let r = x.ncols();
    if r == 0 {
        return Err(Error::Empty("training batch"));
    }
    if layer.decoder.output_dim() != layer.encoder.input_dim()
        || layer.decoder.input_dim() != layer.encoder.output_dim()
    {
        return Err(Error::Dimension(format!(
            "decoder {}x{} does not mirror encoder {}x{}",
            layer.decoder.output_dim(),
            layer.decoder.input_dim(),
            layer.encoder.output_dim(),
            layer.encoder.input_dim()
        )));
    }
    let rf = r as f64;
    let hidden = layer.encoder.forward(x)?;
    let out = layer.decoder.forward(hidden.view())?;

    let diff = &out - &x;
    let reconstruction = diff.mapv(|d| d * d).sum() / (2.0 * rf);

    let sq = |l: &SigmoidLayer, with_bias: bool| {
        let w = l.weights.mapv(|v| v * v).sum();
        if with_bias {
            w + l.bias.mapv(|v| v * v).sum()
        } else {
            w
        }
    };
    let decay = 0.5
        * penalty.lambda
        * (sq(&layer.encoder, penalty.decay_biases) + sq(&layer.decoder, penalty.decay_biases));

    let rho_hat = hidden.sum_axis(Axis(1)) / rf;
    let sparsity = penalty.beta
        * rho_hat
            .iter()
            .map(|&rh| kl_divergence(penalty.rho, rh))
            .sum::<f64>();

    let cost = reconstruction + decay + sparsity;

    // Output deltas: dJ/dz2 = (x̂ - x)/r * x̂(1 - x̂).
    let delta_out = diff * &out.mapv(|o| o * (1.0 - o)) / rf;

    // d/d(a_jk) of beta * sum_j KL(rho || mean_k a_jk); zero where the clamp is active.
    let sparse_term = rho_hat.mapv(|rh| {
        if rh <= RHO_HAT_EPSILON || rh >= 1.0 - RHO_HAT_EPSILON {
            0.0
        } else {
            penalty.beta * (-penalty.rho / rh + (1.0 - penalty.rho) / (1.0 - rh)) / rf
        }
    });
    let mut delta_hidden = layer.decoder.weights.t().dot(&delta_out);
    delta_hidden += &sparse_term.insert_axis(Axis(1));
    delta_hidden *= &hidden.mapv(|a| a * (1.0 - a));

    let mut grad = layer.zeros_like();
    grad.decoder.weights = delta_out.dot(&hidden.t());
    grad.decoder
        .weights
        .scaled_add(penalty.lambda, &layer.decoder.weights);
    grad.decoder.bias = delta_out.sum_axis(Axis(1));
    grad.encoder.weights = delta_hidden.dot(&x.t());
    grad.encoder
        .weights
        .scaled_add(penalty.lambda, &layer.encoder.weights);
    grad.encoder.bias = delta_hidden.sum_axis(Axis(1));
    if penalty.decay_biases {
        grad.decoder
            .bias
            .scaled_add(penalty.lambda, &layer.decoder.bias);
        grad.encoder
            .bias
            .scaled_add(penalty.lambda, &layer.encoder.bias);
    }
    Ok((cost, grad))
}

/// Runs full-batch gradient descent on one autoencoder; returns the cost
/// at the start of every epoch followed by the final cost.
pub fn train_autoencoder(
    layer: &mut AutoencoderLayer,
    x: ArrayView2<'_, f64>,
    penalty: &SparsityPenalty,
    epochs: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(epochs + 1);
    for epoch in 0..epochs {
        let (cost, grad) = sae_cost_grad(layer, x, penalty)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite {
                what: "autoencoder cost".into(),
                epoch,
            });
        }
        history.push(cost);
        layer.encoder.step(&grad.encoder, learning_rate);
        layer.decoder.step(&grad.decoder, learning_rate);
    }
    let (cost, _) = sae_cost_grad(layer, x, penalty)?;
    if !cost.is_finite() || !layer.encoder.is_finite() || !layer.decoder.is_finite() {
        return Err(Error::NonFinite {
            what: "autoencoder parameters".into(),
            epoch: epochs,
        });
    }
    history.push(cost);
    Ok(history)
}

/// Greedy layer-wise pretraining. `x` is `layer_sizes[0] x r`.
pub fn pretrain<R: Rng>(
    x: ArrayView2<'_, f64>,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<(Vec<AutoencoderLayer>, Vec<Vec<f64>>)> {
    hp.validate()?;
    let sizes = &hp.layer_sizes;
    if x.nrows() != sizes[0] {
        return Err(dim_err("pretraining input rows", sizes[0], x.nrows()));
    }
    let penalty = hp.penalty();
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    let mut histories = Vec::with_capacity(sizes.len() - 1);
    let mut input = x.to_owned();
    for pair in sizes.windows(2) {
        let mut layer = AutoencoderLayer::random(pair[0], pair[1], rng);
        let history = train_autoencoder(
            &mut layer,
            input.view(),
            &penalty,
            hp.epochs_pretrain,
            hp.learning_rate,
        )?;
        input = layer.encoder.forward(input.view())?;
        layers.push(layer);
        histories.push(history);
    }
    Ok((layers, histories))
}

/// Column-wise soft-max.
pub fn softmax_columns(mut z: Array2<f64>) -> Array2<f64> {
    for mut col in z.columns_mut() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col.mapv_inplace(|v| v / sum);
    }
    z
}

/// Linear layer followed by soft-max.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    /// `K x N`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl SoftmaxHead {
    pub fn zeros(input: usize, classes: usize) -> Self {
        SoftmaxHead {
            weights: Array2::zeros((classes, input)),
            bias: Array1::zeros(classes),
        }
    }

    pub fn random<R: Rng>(input: usize, classes: usize, rng: &mut R) -> Self {
        let l = SigmoidLayer::random(input, classes, rng);
        SoftmaxHead {
            weights: l.weights,
            bias: l.bias,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn probabilities(&self, codes: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if codes.nrows() != self.input_dim() {
            return Err(dim_err(
                "soft-max input rows",
                self.input_dim(),
                codes.nrows(),
            ));
        }
        let mut z = self.weights.dot(&codes);
        z += &self.bias.view().insert_axis(Axis(1));
        Ok(softmax_columns(z))
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn step(&mut self, grad: &SoftmaxHead, lr: f64) {
        self.weights.scaled_add(-lr, &grad.weights);
        self.bias.scaled_add(-lr, &grad.bias);
    }
}

fn check_labels(labels: &[usize], records: usize, classes: usize) -> Result<()> {
    if labels.len() != records {
        return Err(dim_err("label count", records, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Dimension(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Mean cross-entropy of `probs` (K x r) against `labels`.
fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let r = labels.len() as f64;
    -labels
        .iter()
        .enumerate()
        .map(|(i, &y)| probs[[y, i]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / r
}

/// `(P - Y) / r`.
fn output_delta(mut probs: Array2<f64>, labels: &[usize]) -> Array2<f64> {
    for (i, &y) in labels.iter().enumerate() {
        probs[[y, i]] -= 1.0;
    }
    probs / labels.len() as f64
}

/// Cross-entropy plus `lambda/2 |W|^2` and its gradient.
pub fn softmax_cost_grad(
    head: &SoftmaxHead,
    codes: ArrayView2<'_, f64>,
    labels: &[usize],
    lambda: f64,
) -> Result<(f64, SoftmaxHead)> {
    check_labels(labels, codes.ncols(), head.num_classes())?;
    if labels.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let probs = head.probabilities(codes)?;
    let cost = cross_entropy(&probs, labels) + 0.5 * lambda * head.weights.mapv(|w| w * w).sum();
    let delta = output_delta(probs, labels);
    let mut weights = delta.dot(&codes.t());
    weights.scaled_add(lambda, &head.weights);
    let grad = SoftmaxHead {
        weights,
        bias: delta.sum_axis(Axis(1)),
    };
    Ok((cost, grad))
}

fn require_all_classes(labels: &[usize], class_names: &[String]) -> Result<()> {
    let mut seen = vec![false; class_names.len()];
    for &l in labels {
        if let Some(s) = seen.get_mut(l) {
            *s = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(Error::MissingClass(class_names[missing].clone())),
        None => Ok(()),
    }
}

/// Trains a soft-max head in place; returns the per-epoch cost trajectory.
pub fn train_softmax(
    head: &mut SoftmaxHead,
    codes: ArrayView2<'_, f64>,
    labels: &[usize],
    lambda: f64,
    epochs: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (cost, grad) = softmax_cost_grad(head, codes, labels, lambda)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite {
                what: "soft-max loss".into(),
                epoch,
            });
        }
        history.push(cost);
        head.step(&grad, learning_rate);
    }
    Ok(history)
}

/// Encoder stack plus soft-max head. With no encoders it is a plain
/// soft-max regression on the raw input.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    pub encoders: Vec<SigmoidLayer>,
    pub head: SoftmaxHead,
    pub hyperparams: Hyperparams,
    pub class_names: Vec<String>,
}

/// Gradient of the fine-tuning loss, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub encoders: Vec<SigmoidLayer>,
    pub head: SoftmaxHead,
}

impl SaeModel {
    pub fn input_dim(&self) -> usize {
        self.encoders
            .first()
            .map_or(self.head.input_dim(), SigmoidLayer::input_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.head.num_classes()
    }

    /// `[input, hidden..]` as actually stored.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.encoders.iter().map(SigmoidLayer::output_dim));
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        let mut dim = self.input_dim();
        for (i, enc) in self.encoders.iter().enumerate() {
            if enc.input_dim() != dim || enc.bias.len() != enc.output_dim() {
                return Err(Error::Dimension(format!("encoder {i} does not chain")));
            }
            dim = enc.output_dim();
        }
        if self.head.input_dim() != dim || self.head.bias.len() != self.head.num_classes() {
            return Err(Error::Dimension("soft-max head does not chain".into()));
        }
        if self.class_names.len() != self.num_classes() {
            return Err(dim_err(
                "class names",
                self.num_classes(),
                self.class_names.len(),
            ));
        }
        if !self.parameters().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "model parameter".into(),
                epoch: 0,
            });
        }
        Ok(())
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.encoders
            .iter()
            .flat_map(SigmoidLayer::parameters)
            .chain(self.head.parameters())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.encoders
            .iter_mut()
            .flat_map(SigmoidLayer::parameters_mut)
            .chain(self.head.parameters_mut())
    }

    /// Encodes a `M x r` batch through every encoder.
    pub fn encode(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut a = x.to_owned();
        for enc in &self.encoders {
            a = enc.forward(a.view())?;
        }
        Ok(a)
    }

    /// Class probabilities, `K x r`.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(dim_err("input rows", self.input_dim(), x.nrows()));
        }
        self.head.probabilities(self.encode(x)?.view())
    }

    /// Predicted class for every column of `x`.
    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x)?;
        Ok(probs
            .columns()
            .into_iter()
            .map(|c| argmax(c.iter()))
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(dim_err("input length", self.input_dim(), x.len()));
        }
        let mut a = ndarray::ArrayView1::from(x).to_owned();
        for enc in &self.encoders {
            a = enc.forward_one(a.as_slice().expect("contiguous"))?;
        }
        let mut z = self.head.weights.dot(&a);
        z += &self.head.bias;
        let probs = softmax_columns(z.insert_axis(Axis(1)))
            .into_iter()
            .collect::<Vec<_>>();
        Ok((argmax(probs.iter()), probs))
    }

    /// Cross-entropy plus `lambda/2` times the squared weights of every layer,
    /// and its gradient by back-propagation through the whole stack.
    pub fn finetune_cost_grad(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[usize],
        lambda: f64,
    ) -> Result<(f64, ModelGrad)> {
        if x.nrows() != self.input_dim() {
            return Err(dim_err("input rows", self.input_dim(), x.nrows()));
        }
        check_labels(labels, x.ncols(), self.num_classes())?;
        if labels.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let mut activations = Vec::with_capacity(self.encoders.len() + 1);
        activations.push(x.to_owned());
        for enc in &self.encoders {
            let next = enc.forward(activations.last().unwrap().view())?;
            activations.push(next);
        }
        let top = activations.last().unwrap();
        let probs = self.head.probabilities(top.view())?;
        let weight_sq: f64 = self
            .encoders
            .iter()
            .map(|e| e.weights.mapv(|w| w * w).sum())
            .sum::<f64>()
            + self.head.weights.mapv(|w| w * w).sum();
        let cost = cross_entropy(&probs, labels) + 0.5 * lambda * weight_sq;

        let delta_out = output_delta(probs, labels);
        let mut head_w = delta_out.dot(&top.t());
        head_w.scaled_add(lambda, &self.head.weights);
        let head = SoftmaxHead {
            weights: head_w,
            bias: delta_out.sum_axis(Axis(1)),
        };

        let mut delta = self.head.weights.t().dot(&delta_out) * top.mapv(|a| a * (1.0 - a));
        let mut encoders = Vec::with_capacity(self.encoders.len());
        for (l, enc) in self.encoders.iter().enumerate().rev() {
            let input = &activations[l];
            let mut weights = delta.dot(&input.t());
            weights.scaled_add(lambda, &enc.weights);
            encoders.push(SigmoidLayer {
                weights,
                bias: delta.sum_axis(Axis(1)),
            });
            if l > 0 {
                delta = enc.weights.t().dot(&delta) * input.mapv(|a| a * (1.0 - a));
            }
        }
        encoders.reverse();
        Ok((cost, ModelGrad { encoders, head }))
    }
}

fn argmax<'a, I: Iterator<Item = &'a f64>>(values: I) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Fine-tunes every layer jointly; returns the tuned model and the loss
/// recorded at the start of each epoch.
pub fn fine_tune(
    model: &SaeModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    epochs: usize,
) -> Result<(SaeModel, Vec<f64>)> {
    let mut model = model.clone();
    let lr = model.hyperparams.learning_rate;
    let lambda = model.hyperparams.lambda;
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (cost, grad) = model.finetune_cost_grad(x, labels, lambda)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite {
                what: "fine-tuning loss".into(),
                epoch,
            });
        }
        history.push(cost);
        for (enc, g) in model.encoders.iter_mut().zip(&grad.encoders) {
            enc.step(g, lr);
        }
        model.head.step(&grad.head, lr);
    }
    Ok((model, history))
}

/// Cost trajectories recorded while training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub pretrain: Vec<Vec<f64>>,
    pub softmax: Vec<f64>,
    pub finetune: Vec<f64>,
}

/// Greedy pretraining, soft-max head, then fine-tuning. `x` is `M x r`.
pub fn train_stacked(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    hp: &Hyperparams,
) -> Result<(SaeModel, TrainingLog)> {
    hp.validate()?;
    check_labels(labels, x.ncols(), class_names.len())?;
    require_all_classes(labels, class_names)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let (layers, pretrain_log) = pretrain(x, hp, &mut rng)?;
    let encoders: Vec<SigmoidLayer> = layers.into_iter().map(|l| l.encoder).collect();
    let mut model = SaeModel {
        head: SoftmaxHead::random(*hp.layer_sizes.last().unwrap(), class_names.len(), &mut rng),
        encoders,
        hyperparams: hp.clone(),
        class_names: class_names.to_vec(),
    };
    let codes = model.encode(x)?;
    let softmax_log = train_softmax(
        &mut model.head,
        codes.view(),
        labels,
        hp.lambda,
        hp.epochs_softmax,
        hp.learning_rate,
    )?;
    let (model, finetune_log) = fine_tune(&model, x, labels, hp.epochs_finetune)?;
    Ok((
        model,
        TrainingLog {
            pretrain: pretrain_log,
            softmax: softmax_log,
            finetune: finetune_log,
        },
    ))
}

/// Same architecture as [`train_stacked`], randomly initialised and trained
/// by back-propagation alone for `epochs_softmax + epochs_finetune` epochs.
pub fn train_unpretrained(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    hp: &Hyperparams,
) -> Result<(SaeModel, TrainingLog)> {
    hp.validate()?;
    check_labels(labels, x.ncols(), class_names.len())?;
    require_all_classes(labels, class_names)?;
    if x.nrows() != hp.layer_sizes[0] {
        return Err(dim_err("input rows", hp.layer_sizes[0], x.nrows()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let encoders = hp
        .layer_sizes
        .windows(2)
        .map(|p| AutoencoderLayer::random(p[0], p[1], &mut rng).encoder)
        .collect();
    let model = SaeModel {
        head: SoftmaxHead::random(*hp.layer_sizes.last().unwrap(), class_names.len(), &mut rng),
        encoders,
        hyperparams: hp.clone(),
        class_names: class_names.to_vec(),
    };
    let (model, log) = fine_tune(&model, x, labels, hp.epochs_softmax + hp.epochs_finetune)?;
    Ok((
        model,
        TrainingLog {
            finetune: log,
            ..Default::default()
        },
    ))
}

/// Soft-max regression directly on the input features.
pub fn train_softmax_only(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    hp: &Hyperparams,
) -> Result<(SaeModel, TrainingLog)> {
    hp.validate()?;
    require_all_classes(labels, class_names)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut head = SoftmaxHead::random(x.nrows(), class_names.len(), &mut rng);
    let log = train_softmax(
        &mut head,
        x,
        labels,
        hp.lambda,
        hp.epochs_softmax + hp.epochs_finetune,
        hp.learning_rate,
    )?;
    let mut hyperparams = hp.clone();
    hyperparams.layer_sizes = vec![x.nrows()];
    Ok((
        SaeModel {
            encoders: Vec::new(),
            head,
            hyperparams,
            class_names: class_names.to_vec(),
        },
        TrainingLog {
            softmax: log,
            ..Default::default()
        },
    ))
}

/// Parameters as the model would be before any training epoch.
pub fn initial_model(class_names: &[String], hp: &Hyperparams) -> Result<SaeModel> {
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let encoders = hp
        .layer_sizes
        .windows(2)
        .map(|p| AutoencoderLayer::random(p[0], p[1], &mut rng).encoder)
        .collect();
    Ok(SaeModel {
        head: SoftmaxHead::random(*hp.layer_sizes.last().unwrap(), class_names.len(), &mut rng),
        encoders,
        hyperparams: hp.clone(),
        class_names: class_names.to_vec(),
    })
}
