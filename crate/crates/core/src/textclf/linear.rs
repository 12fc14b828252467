//! Multinomial logistic regression trained by seeded mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            epochs: 30,
            l2: 1e-4,
            batch_size: 32,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `C × D` weights (row-major) plus per-class bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub final_loss: f64,
}

impl LinearModel {
    pub fn zeros(classes: Vec<String>, dim: usize) -> Self {
        let c = classes.len();
        LinearModel {
            classes,
            dim,
            weights: vec![0.0; c * dim],
            bias: vec![0.0; c],
            hyperparams: Hyperparams::default(),
            final_loss: f64::NAN,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.weights[c * self.dim..(c + 1) * self.dim]
    }

    pub fn logits(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(logits_scaled(&self.weights, &self.bias, self.dim, 1.0, x))
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &FeatureVector) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        if x.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim,
            });
        }
        Ok(())
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn logits_scaled(
    weights: &[f64],
    bias: &[f64],
    dim: usize,
    scale: f64,
    x: &FeatureVector,
) -> Vec<f64> {
    bias.iter()
        .enumerate()
        .map(|(c, b)| {
            let row = &weights[c * dim..(c + 1) * dim];
            b + scale * x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
        })
        .collect()
}

/// Cross-entropy of one sample given logits; `probs` receives the softmax.
fn sample_loss(logits: &[f64], label: usize, probs: &mut Vec<f64>) -> f64 {
    probs.clear();
    probs.extend_from_slice(logits);
    let m = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + probs.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    softmax_in_place(probs);
    lse - logits[label]
}

/// Objective `mean CE + (l2/2)·‖W‖²` and its gradient with respect to
/// `(weights, bias)`, both dense. Used for loss reporting and gradient checks.
pub fn loss_and_gradient(
    model: &LinearModel,
    samples: &[(FeatureVector, usize)],
    l2: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (c, d) = (model.num_classes(), model.dim);
    let mut gw: Vec<f64> = model.weights.iter().map(|w| l2 * w).collect();
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    let n = samples.len().max(1) as f64;
    let mut probs = Vec::with_capacity(c);
    for (x, y) in samples {
        let z = model.logits(x)?;
        loss += sample_loss(&z, *y, &mut probs) / n;
        for k in 0..c {
            let delta = (probs[k] - if k == *y { 1.0 } else { 0.0 }) / n;
            gb[k] += delta;
            for (j, v) in x.iter() {
                gw[k * d + j] += delta * v;
            }
        }
    }
    loss += 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    Ok((loss, gw, gb))
}

fn objective(model: &LinearModel, samples: &[(FeatureVector, usize)], l2: f64) -> f64 {
    let n = samples.len().max(1) as f64;
    let mut probs = Vec::new();
    let ce: f64 = samples
        .iter()
        .map(|(x, y)| {
            sample_loss(
                &logits_scaled(&model.weights, &model.bias, model.dim, 1.0, x),
                *y,
                &mut probs,
            )
        })
        .sum::<f64>()
        / n;
    ce + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Fits a model over `classes` (indices into which are the sample labels).
///
/// Every class needs at least one sample. Samples are shuffled each epoch
/// with a ChaCha8 stream seeded from `hp.seed`; the step size at epoch `t`
/// (1-based) is `learning_rate / sqrt(t)`. L2 decay is applied lazily through
/// a multiplicative scale so each step only touches the batch's features.
pub fn train(
    samples: &[(FeatureVector, usize)],
    classes: &[String],
    hp: &Hyperparams,
) -> Result<LinearModel> {
    hp.validate()?;
    if classes.is_empty() {
        return Err(Error::InvalidConfig("no classes declared".into()));
    }
    let mut counts = vec![0usize; classes.len()];
    for (_, y) in samples {
        *counts.get_mut(*y).ok_or_else(|| {
            Error::InvalidConfig(format!("label index {y} outside {} classes", classes.len()))
        })? += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(classes[empty].clone()));
    }
    let dim = samples[0].0.dim;
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.dim != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.dim,
        });
    }

    let c = classes.len();
    let mut weights = vec![0.0; c * dim];
    let mut bias = vec![0.0; c];
    let mut scale = 1.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut probs = Vec::with_capacity(c);
    let mut deltas: Vec<f64> = Vec::new();
    let mut model = LinearModel {
        classes: classes.to_vec(),
        dim,
        weights: Vec::new(),
        bias: Vec::new(),
        hyperparams: *hp,
        final_loss: f64::NAN,
    };

    for epoch in 1..=hp.epochs {
        let lr = hp.learning_rate / (epoch as f64).sqrt();
        order.shuffle(&mut rng);
        for batch in order.chunks(hp.batch_size) {
            let bn = batch.len() as f64;
            deltas.clear();
            for &i in batch {
                let (x, y) = &samples[i];
                let z = logits_scaled(&weights, &bias, dim, scale, x);
                sample_loss(&z, *y, &mut probs);
                deltas.extend(
                    probs
                        .iter()
                        .enumerate()
                        .map(|(k, p)| (p - if k == *y { 1.0 } else { 0.0 }) / bn),
                );
            }
            scale *= 1.0 - lr * hp.l2;
            let step = lr / scale;
            for (bi, &i) in batch.iter().enumerate() {
                let x = &samples[i].0;
                let d = &deltas[bi * c..(bi + 1) * c];
                for k in 0..c {
                    bias[k] -= lr * d[k];
                    let row = &mut weights[k * dim..(k + 1) * dim];
                    for (j, v) in x.iter() {
                        row[j] -= step * d[k] * v;
                    }
                }
            }
            if scale < 1e-9 {
                weights.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        if hp.epochs <= 1 || epoch == hp.epochs || epoch % 5 == 0 {
            let probe = LinearModel {
                weights: weights.iter().map(|w| w * scale).collect(),
                bias: bias.clone(),
                ..model.clone()
            };
            let loss = objective(&probe, samples, hp.l2);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            model.final_loss = loss;
        }
    }
    weights.iter_mut().for_each(|w| *w *= scale);
    model.weights = weights;
    model.bias = bias;
    if hp.epochs == 0 {
        model.final_loss = objective(&model, samples, hp.l2);
    }
    Ok(model)
}

/// On-disk form: weights stored sparsely as `(feature, value)` pairs per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelFile {
    pub classes: Vec<String>,
    pub dim: usize,
    pub bias: Vec<f64>,
    pub weights: Vec<Vec<(u32, f64)>>,
    pub hyperparams: Hyperparams,
    pub final_loss: Option<f64>,
}

impl From<&LinearModel> for LinearModelFile {
    fn from(m: &LinearModel) -> Self {
        LinearModelFile {
            classes: m.classes.clone(),
            dim: m.dim,
            bias: m.bias.clone(),
            weights: (0..m.num_classes())
                .map(|c| {
                    m.row(c)
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(j, w)| (j as u32, *w))
                        .collect()
                })
                .collect(),
            hyperparams: m.hyperparams,
            final_loss: m.final_loss.is_finite().then_some(m.final_loss),
        }
    }
}

impl TryFrom<LinearModelFile> for LinearModel {
    type Error = Error;

    fn try_from(f: LinearModelFile) -> Result<Self> {
        let c = f.classes.len();
        if f.weights.len() != c || f.bias.len() != c {
            return Err(Error::malformed(
                "model",
                "class count disagrees with weight rows",
            ));
        }
        let mut weights = vec![0.0; c * f.dim];
        for (k, row) in f.weights.iter().enumerate() {
            for &(j, w) in row {
                let j = j as usize;
                if j >= f.dim {
                    return Err(Error::DimensionMismatch {
                        expected: f.dim,
                        got: j + 1,
                    });
                }
                weights[k * f.dim + j] = w;
            }
        }
        Ok(LinearModel {
            classes: f.classes,
            dim: f.dim,
            weights,
            bias: f.bias,
            hyperparams: f.hyperparams,
            final_loss: f.final_loss.unwrap_or(f64::NAN),
        })
    }
}

impl Serialize for LinearModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LinearModelFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = LinearModelFile::deserialize(d)?;
        LinearModel::try_from(f).map_err(serde::de::Error::custom)
    }
}
