//! Multi-layer perceptron: ReLU hidden layers, softmax output, cross-entropy
//! loss, backpropagation and Adam minibatch training with early stopping.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Scaler};
use crate::rng::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    #[serde(default)]
    pub l2: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_sizes: vec![391, 870],
            activation: Activation::Relu,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            l2: 0.0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden_sizes must be non-empty with every size >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("l2 must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the pre-update minibatch predictions over the epoch.
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub scaler: Scaler,
    /// `weights[l]` is `fan_in x fan_out`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub class_names: Vec<String>,
    pub train_history: Vec<EpochStats>,
    /// Rows used for gradient steps.
    pub n_train: usize,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// He-style uniform initialization, bound `sqrt(6 / fan_in)`; zero biases.
pub fn mlp_init(config: &MlpConfig, input_dim: usize, class_names: Vec<String>) -> Result<MlpModel> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::invalid("input_dim must be at least 1"));
    }
    if class_names.len() < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    let mut dims = vec![input_dim];
    dims.extend_from_slice(&config.hidden_sizes);
    dims.push(class_names.len());

    let mut rng = rng::rng(config.seed, tags::MLP_INIT);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let bound = (6.0 / w[0] as f64).sqrt();
        weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || {
            rng.random_range(-bound..bound)
        }));
        biases.push(Array1::zeros(w[1]));
    }
    Ok(MlpModel {
        config: config.clone(),
        scaler: Scaler::identity(input_dim),
        weights,
        biases,
        class_names,
        train_history: Vec::new(),
        n_train: 0,
    })
}

fn softmax_rows(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    z
}

fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        self.scaler.validate()?;
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::invalid("layer count mismatch"));
        }
        if self.scaler.dim() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: self.scaler.dim(),
            });
        }
        for l in 0..self.weights.len() {
            if self.biases[l].len() != self.weights[l].ncols() {
                return Err(Error::DimMismatch {
                    expected: self.weights[l].ncols(),
                    got: self.biases[l].len(),
                });
            }
            if l + 1 < self.weights.len() && self.weights[l].ncols() != self.weights[l + 1].nrows() {
                return Err(Error::DimMismatch {
                    expected: self.weights[l].ncols(),
                    got: self.weights[l + 1].nrows(),
                });
            }
        }
        if self.weights.last().unwrap().ncols() != self.n_classes() {
            return Err(Error::DimMismatch {
                expected: self.n_classes(),
                got: self.weights.last().unwrap().ncols(),
            });
        }
        let finite = self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::invalid("non-finite parameters"));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer (`zs`) and post-activations feeding
    /// each layer (`acts[0]` is the input).
    fn forward_cache(&self, batch: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let n_layers = self.weights.len();
        let mut acts = Vec::with_capacity(n_layers);
        let mut zs = Vec::with_capacity(n_layers);
        acts.push(batch.to_owned());
        for l in 0..n_layers {
            let z = acts[l].dot(&self.weights[l]) + &self.biases[l];
            if l + 1 < n_layers {
                acts.push(z.mapv(|x| x.max(0.0)));
            }
            zs.push(z);
        }
        (zs, acts)
    }

    /// Output-layer logits for an already scaled batch.
    pub fn logits(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let mut a = batch.to_owned();
        let last = self.weights.len() - 1;
        for l in 0..=last {
            let z = a.dot(&self.weights[l]) + &self.biases[l];
            a = if l < last { z.mapv(|x| x.max(0.0)) } else { z };
        }
        Ok(a)
    }

    /// Class probabilities for an already scaled batch; the row max is
    /// subtracted before exponentiation.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(self.logits(batch)?))
    }

    /// Mean cross-entropy plus `l2 / 2 * sum ||W||^2`, with gradients for
    /// every parameter. Does not touch the model.
    pub fn loss_grad(&self, batch: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients)> {
        self.backprop(batch, labels).map(|(loss, grads, _)| (loss, grads))
    }

    /// [`Self::loss_grad`] plus the number of rows whose argmax is correct.
    fn backprop(&self, batch: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients, usize)> {
        self.check_batch(&batch)?;
        if labels.len() != batch.nrows() {
            return Err(Error::DimMismatch {
                expected: batch.nrows(),
                got: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.n_classes()) {
            return Err(Error::invalid(format!("label {l} out of range")));
        }
        let n = batch.nrows() as f64;
        let (zs, acts) = self.forward_cache(batch);
        let logits = zs.last().unwrap();

        let mut nll = 0.0;
        let mut correct = 0;
        let mut delta = Array2::zeros(logits.raw_dim());
        for (i, (row, mut d)) in logits.rows().into_iter().zip(delta.rows_mut()).enumerate() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
            nll += lse - row[labels[i]];
            if argmax(row.iter().copied()) == labels[i] {
                correct += 1;
            }
            Zip::from(&mut d).and(&row).for_each(|d, &z| *d = (z - lse).exp() / n);
            d[labels[i]] -= 1.0 / n;
        }
        let penalty: f64 = self.weights.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>()).sum();
        let loss = nll / n + 0.5 * self.config.l2 * penalty;

        let n_layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); n_layers];
        let mut gb = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let mut g = acts[l].t().dot(&delta);
            if self.config.l2 > 0.0 {
                g.scaled_add(self.config.l2, &self.weights[l]);
            }
            gw[l] = g;
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                Zip::from(&mut prev).and(&zs[l - 1]).for_each(|p, &z| {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                });
                delta = prev;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
            correct,
        ))
    }

    fn scale_matrix(&self, vs: &[FeatureVector]) -> Result<Array2<f64>> {
        let dim = self.input_dim();
        let mut x = Array2::zeros((vs.len(), dim));
        for (v, mut row) in vs.iter().zip(x.rows_mut()) {
            let out = row.as_slice_mut().expect("standard layout");
            self.scaler.transform_into(v.as_slice(), out)?;
        }
        Ok(x)
    }

    /// Scale, forward, argmax (ties to the lower class index).
    pub fn predict(&self, v: &FeatureVector) -> Result<(usize, Vec<f64>)> {
        let x = self.scale_matrix(std::slice::from_ref(v))?;
        let p = self.forward(x.view())?;
        let row: Vec<f64> = p.row(0).to_vec();
        Ok((argmax(row.iter().copied()), row))
    }

    pub fn predict_batch(&self, vs: &[FeatureVector]) -> Result<Vec<(usize, Vec<f64>)>> {
        let mut out = Vec::with_capacity(vs.len());
        // Bounded chunks keep the hidden activations small.
        for chunk in vs.chunks(1024) {
            let p = self.forward(self.scale_matrix(chunk)?.view())?;
            for row in p.rows() {
                out.push((argmax(row.iter().copied()), row.to_vec()));
            }
        }
        Ok(out)
    }

    fn accuracy_scaled(&self, x: &Array2<f64>, labels: &[usize]) -> f64 {
        let mut correct = 0usize;
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + 1024).min(x.nrows());
            let logits = self.logits(x.slice(s![start..end, ..])).expect("dims checked");
            for (row, &l) in logits.rows().into_iter().zip(&labels[start..end]) {
                if argmax(row.iter().copied()) == l {
                    correct += 1;
                }
            }
            start = end;
        }
        correct as f64 / x.nrows() as f64
    }
}

struct Adam {
    t: i32,
    mw: Vec<Array2<f64>>,
    vw: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(model: &MlpModel) -> Self {
        Adam {
            t: 0,
            mw: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            vw: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            mb: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            vb: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        };
        for l in 0..model.weights.len() {
            Zip::from(&mut model.weights[l])
                .and(&mut self.mw[l])
                .and(&mut self.vw[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut model.biases[l])
                .and(&mut self.mb[l])
                .and(&mut self.vb[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Validation accuracy with the weights and biases that reached it.
type Snapshot = (f64, Vec<Array2<f64>>, Vec<Array1<f64>>);

/// Minibatch Adam training.
///
/// The scaler is fit on `train` only. When `val` is non-empty, training stops
/// once validation accuracy has not improved for `patience` epochs and the
/// best-scoring parameters are restored.
pub fn mlp_train(train: &LabeledDataset, val: &LabeledDataset, config: &MlpConfig) -> Result<MlpModel> {
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if !val.is_empty() {
        train.check_compatible(val)?;
    }
    let mut model = mlp_init(config, crate::features::FEATURE_DIM, train.class_names.clone())?;
    model.scaler = Scaler::fit(&train.vectors)?;
    model.n_train = train.len();
    let x = model.scale_matrix(&train.vectors)?;
    let xv = model.scale_matrix(&val.vectors)?;

    let mut rng = rng::rng(config.seed, tags::MLP_SHUFFLE);
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<Snapshot> = None;
    let mut since_best = 0;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for idx in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), idx);
            let yb: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let (loss, grads, hits) = model.backprop(xb.view(), &yb)?;
            if !loss.is_finite() {
                return Err(Error::NumericFailure {
                    epoch,
                    detail: format!("loss became {loss}"),
                });
            }
            loss_sum += loss * idx.len() as f64;
            correct += hits;
            adam.step(&mut model, &grads, config.learning_rate);
        }
        let val_accuracy = (!val.is_empty()).then(|| model.accuracy_scaled(&xv, &val.labels));
        model.train_history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_accuracy,
        });

        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|b| acc > b.0) {
                best = Some((acc, model.weights.clone(), model.biases.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, w, b)) = best {
        model.weights = w;
        model.biases = b;
    }
    Ok(model)
}
