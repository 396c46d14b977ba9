//! Feed-forward surrogate for the prediction-error objective.
//!
//! The model maps a normalized canonical genotype to `1 - mIoU` through
//! rectifier hidden layers and a logistic output. It is trained on a
//! combination of mean squared error and a pairwise margin ranking term.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{Genotype, SearchSpace, GENOME_LENGTH, MAX_DEPTH, NUM_STAGES};
use crate::lut::{CostTable, LutError, MetricKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurrogateError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("class {0} has TP + FP + FN = 0")]
    UndefinedClassIoU(usize),
    #[error("need at least {needed} training pairs, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("training target {0} outside [0, 1]")]
    TargetOutOfRange(f64),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Lut(#[from] LutError),
}

/// Confusion counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Mean intersection-over-union over classes.
pub fn miou(classes: &[ClassCounts]) -> Result<f64, SurrogateError> {
    if classes.is_empty() {
        return Err(SurrogateError::Shape("at least one class is required".into()));
    }
    let mut sum = 0.0;
    for (n, c) in classes.iter().enumerate() {
        let denom = c.tp + c.fp + c.fn_;
        if denom == 0 {
            return Err(SurrogateError::UndefinedClassIoU(n));
        }
        sum += c.tp as f64 / denom as f64;
    }
    Ok(sum / classes.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub mse: f64,
    pub rank: f64,
}

fn rank_term(pred: &[f64], truth: &[f64], margin: f64) -> f64 {
    let n = pred.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let sign = if pred[i] > pred[j] { 1.0 } else { -1.0 };
            sum += (margin - sign * (truth[i] - truth[j])).max(0.0);
        }
    }
    sum / (2.0 * n as f64)
}

/// Mean squared error plus the margin ranking term summed over ordered pairs `i != j`.
pub fn loss(pred: &[f64], truth: &[f64], margin: f64) -> Result<LossParts, SurrogateError> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(SurrogateError::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len() as f64;
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let rank = rank_term(pred, truth, margin);
    Ok(LossParts { total: mse + rank, mse, rank })
}

/// Derivative of [`loss`] with respect to each prediction.
///
/// The ranking term depends on the predictions only through the sign
/// function, so it is piecewise constant and contributes nothing away from
/// ties; only the squared-error part carries gradient.
pub fn loss_gradient(pred: &[f64], truth: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter().zip(truth).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

/// Surrogate input features: canonical genes scaled to `[0, 1]` by their domain maximum.
pub fn features(g: &Genotype) -> [f64; GENOME_LENGTH] {
    let c = g.canonicalize();
    let mut x = [0.0; GENOME_LENGTH];
    for (p, (xi, &gene)) in x.iter_mut().zip(c.genes()).enumerate() {
        *xi = f64::from(gene) / f64::from(SearchSpace.upper(p));
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    // row-major, outputs x inputs
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + self.bias[o]);
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Multi-layer perceptron with rectifier hidden layers and a logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    layers: Vec<Dense>,
}

/// Per-sample intermediate values kept for back-propagation.
struct Trace {
    // inputs to each layer; the last entry is the logistic output
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl SurrogateModel {
    /// Randomly initialized model with the given layer widths (`[32, ..., 1]`).
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self, SurrogateError> {
        if layer_dims.len() < 2 || layer_dims[0] != GENOME_LENGTH || *layer_dims.last().unwrap() != 1 {
            return Err(SurrogateError::Shape(format!(
                "layer dims must start at {GENOME_LENGTH} and end at 1, got {layer_dims:?}"
            )));
        }
        if layer_dims.contains(&0) {
            return Err(SurrogateError::Shape("zero-width layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims.windows(2).map(|w| Dense::init(w[0], w[1], &mut rng)).collect();
        Ok(Self { layers })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<(), SurrogateError> {
        if params.len() != self.num_parameters() {
            return Err(SurrogateError::Shape(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&activations[k], &mut z);
            let a = if k == last {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            activations.push(a);
        }
        Trace { activations, pre }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        if x.len() != self.layers[0].inputs {
            return Err(SurrogateError::Shape(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.layers[0].inputs
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if k == last {
                next.iter_mut().for_each(|v| *v = sigmoid(*v));
            } else {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur[0])
    }

    /// Predicted error of `g`, strictly inside `(0, 1)`.
    pub fn predict(&self, g: &Genotype) -> f64 {
        self.forward(&features(g)).expect("genotype features match the input layer")
    }

    /// Signs of every hidden pre-activation; a change between two parameter
    /// vectors means a rectifier kink lies between them.
    pub fn activation_pattern(&self, inputs: &[Vec<f64>]) -> Vec<bool> {
        let mut pattern = Vec::new();
        for x in inputs {
            let t = self.trace(x);
            for z in &t.pre[..t.pre.len() - 1] {
                pattern.extend(z.iter().map(|&v| v > 0.0));
            }
        }
        pattern
    }

    /// Loss over a batch and its gradient with respect to [`Self::parameters`].
    pub fn loss_and_gradient(
        &self,
        inputs: &[Vec<f64>],
        targets: &[f64],
        margin: f64,
    ) -> Result<(LossParts, Vec<f64>), SurrogateError> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(SurrogateError::Shape(format!("{} inputs vs {} targets", inputs.len(), targets.len())));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != self.layers[0].inputs) {
            return Err(SurrogateError::Shape(format!("input has {} features", bad.len())));
        }
        let traces: Vec<Trace> = inputs.iter().map(|x| self.trace(x)).collect();
        let preds: Vec<f64> = traces.iter().map(|t| t.activations.last().unwrap()[0]).collect();
        let parts = loss(&preds, targets, margin)?;
        let dpred = loss_gradient(&preds, targets);

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        let last = self.layers.len() - 1;
        for (t, &dp) in traces.iter().zip(&dpred) {
            let y = t.activations.last().unwrap()[0];
            let mut delta = vec![dp * y * (1.0 - y)];
            for k in (0..=last).rev() {
                let layer = &self.layers[k];
                let input = &t.activations[k];
                let (gw, gb) = &mut grads[k];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if k == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&t.pre[k - 1]) {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        Ok((parts, flat))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            layer_dims: self.layer_dims(),
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.bias.clone()).collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SurrogateError> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| SurrogateError::Format(e.to_string()))?;
        let dims = &file.layer_dims;
        if dims.len() < 2 || file.weights.len() != dims.len() - 1 || file.biases.len() != dims.len() - 1 {
            return Err(SurrogateError::Format("layer count mismatch".into()));
        }
        let mut layers = Vec::new();
        for (k, w) in dims.windows(2).enumerate() {
            if file.weights[k].len() != w[0] * w[1] || file.biases[k].len() != w[1] {
                return Err(SurrogateError::Format(format!("layer {k} has wrong weight shape")));
            }
            layers.push(Dense { inputs: w[0], outputs: w[1], weights: file.weights[k].clone(), bias: file.biases[k].clone() });
        }
        if dims[0] != GENOME_LENGTH || dims[dims.len() - 1] != 1 {
            return Err(SurrogateError::Format(format!("unsupported layer dims {dims:?}")));
        }
        Ok(Self { layers })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub margin: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub holdout_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            margin: 0.05,
            batch_size: 64,
            epochs: 120,
            learning_rate: 1e-3,
            hidden: vec![128, 128],
            holdout_fraction: 0.2,
        }
    }
}

impl TrainingConfig {
    fn check(&self) -> Result<(), SurrogateError> {
        if !(self.margin > 0.0) {
            return Err(SurrogateError::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(SurrogateError::Config("batch size and epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SurrogateError::Config("learning rate must be positive".into()));
        }
        if !(0.0 < self.holdout_fraction && self.holdout_fraction < 1.0) {
            return Err(SurrogateError::Config("holdout fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_size: usize,
    pub holdout_size: usize,
    pub mae: f64,
    pub pearson: f64,
    pub spearman: f64,
    /// Mean mini-batch total loss per epoch.
    pub loss_history: Vec<f64>,
}

pub const MIN_TRAINING_PAIRS: usize = 100;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0, lr }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Fits a fresh model to `(genotype, error)` pairs with mini-batch Adam.
///
/// A seeded shuffle holds out `cfg.holdout_fraction` of the pairs; the report
/// is computed on that split only.
pub fn train(
    pairs: &[(Genotype, f64)],
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<(SurrogateModel, TrainingReport), SurrogateError> {
    cfg.check()?;
    if pairs.len() < MIN_TRAINING_PAIRS {
        return Err(SurrogateError::InsufficientData { needed: MIN_TRAINING_PAIRS, got: pairs.len() });
    }
    if let Some(&(_, y)) = pairs.iter().find(|(_, y)| !(0.0..=1.0).contains(y)) {
        return Err(SurrogateError::TargetOutOfRange(y));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let holdout = ((pairs.len() as f64) * cfg.holdout_fraction).round() as usize;
    let (test_idx, train_idx) = order.split_at(holdout);

    let xs: Vec<Vec<f64>> = pairs.iter().map(|(g, _)| features(g).to_vec()).collect();
    let mut dims = vec![GENOME_LENGTH];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let mut model = SurrogateModel::new(&dims, rng.gen())?;
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);

    let mut train_order = train_idx.to_vec();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        train_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in train_order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| pairs[i].1).collect();
            let (parts, grad) = model.loss_and_gradient(&bx, &by, cfg.margin)?;
            adam.update(&mut params, &grad);
            model.set_parameters(&params)?;
            epoch_loss += parts.total;
            batches += 1;
        }
        loss_history.push(epoch_loss / batches as f64);
    }

    let truth: Vec<f64> = test_idx.iter().map(|&i| pairs[i].1).collect();
    let pred: Vec<f64> = test_idx.iter().map(|&i| model.forward(&xs[i]).unwrap()).collect();
    let mae = pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / truth.len().max(1) as f64;
    let report = TrainingReport {
        train_size: train_idx.len(),
        holdout_size: test_idx.len(),
        mae,
        pearson: pearson(&pred, &truth),
        spearman: spearman(&pred, &truth),
        loss_history,
    };
    Ok((model, report))
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Deterministic stand-in for trained-network error.
///
/// Error falls with log FLOPs along a logistic curve (larger networks are
/// more accurate, with diminishing returns), plus a small seeded per-stage
/// depth/width interaction.
#[derive(Debug, Clone)]
pub struct ErrorOracle {
    table: CostTable,
    pivot_flops: f64,
    interaction: [f64; NUM_STAGES],
}

impl ErrorOracle {
    const FLOOR: f64 = 0.08;
    const SPAN: f64 = 0.9;
    const SLOPE: f64 = 1.0;
    const INTERACTION: f64 = 0.03;

    pub fn new(table: &CostTable, seed: u64) -> Result<Self, SurrogateError> {
        table.check_complete()?;
        let mut mid = vec![1i64; GENOME_LENGTH];
        for d in &mut mid[..NUM_STAGES] {
            *d = (MAX_DEPTH / 2) as i64;
        }
        let mid = Genotype::from_slice(&mid).expect("mid-range genotype is valid");
        let pivot_flops = table.compose_cost(&mid, MetricKind::Flops)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut interaction = [0.0; NUM_STAGES];
        for c in &mut interaction {
            *c = rng.gen_range(-1.0..=1.0);
        }
        Ok(Self { table: table.clone(), pivot_flops, interaction })
    }

    pub fn error(&self, g: &Genotype) -> f64 {
        let flops = self.table.compose_cost(g, MetricKind::Flops).expect("table checked complete");
        let x = (flops / self.pivot_flops).ln();
        let mut e = Self::FLOOR + Self::SPAN * sigmoid(-Self::SLOPE * x);
        for s in 0..NUM_STAGES {
            let depth = g.depth(s) as f64 / MAX_DEPTH as f64;
            let width = g.width(s) as f64 / 2.0;
            e += Self::INTERACTION * self.interaction[s] * depth * width;
        }
        e.clamp(1e-3, 1.0 - 1e-3)
    }
}

/// One-shot form of [`ErrorOracle::error`].
pub fn synthetic_error_oracle(g: &Genotype, table: &CostTable, seed: u64) -> Result<f64, SurrogateError> {
    Ok(ErrorOracle::new(table, seed)?.error(g))
}
