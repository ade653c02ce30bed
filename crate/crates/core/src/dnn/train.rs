use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::adam::{adam_step, AdamState};
use super::matrix::Matrix;
use super::network::{backward, forward, init_model, loss_cce, Mode, ModelParams};
use super::{rng_stream, ModelConfig, STREAM_DROPOUT, STREAM_SHUFFLE, STREAM_SPLIT};
use crate::capture::ActivityLabel;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Scaler};
use crate::openset::DEFAULT_THRESHOLD;

pub const VALIDATION_FRACTION: f64 = 0.2;

const INFER_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the train-mode (dropout) outputs seen during the epoch.
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub seed: u64,
    pub train_size: usize,
    pub validation_size: usize,
    /// Positions (into the training input) of the held-back validation rows.
    pub validation_indices: Vec<usize>,
}

impl TrainReport {
    pub fn final_epoch(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

/// Trained network plus everything needed to apply it to raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub scaler: Scaler,
    /// Output node `i` means `label_map[i]`.
    pub label_map: Vec<ActivityLabel>,
    pub threshold: f64,
}

impl ModelArtifact {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.label_map.len() != self.params.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.params.output_dim(),
                found: self.label_map.len(),
            });
        }
        if self.scaler.dim() != self.params.input_dim() || self.scaler.std.len() != self.scaler.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.params.input_dim(),
                found: self.scaler.dim(),
            });
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidThreshold(self.threshold));
        }
        Ok(())
    }

    fn scaled_matrix<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<Matrix> {
        let dim = self.scaler.dim();
        let mut m = Matrix::zeros(rows.len(), dim);
        for (i, row) in rows.enumerate() {
            self.scaler.transform_into(row, m.row_mut(i))?;
        }
        Ok(m)
    }

    /// Scaler, then an inference pass: the softmax output for one vector.
    pub fn predict_proba(&self, vector: &FeatureVector) -> Result<Vec<f64>> {
        let x = self.scaled_matrix(core::iter::once(&vector.values[..]))?;
        Ok(self.params.infer(&x)?.row(0).to_vec())
    }

    /// One probability row per input vector.
    pub fn predict_proba_batch(&self, vectors: &[FeatureVector]) -> Result<Matrix> {
        let mut out = Matrix::zeros(vectors.len(), self.params.output_dim());
        for (c, chunk) in vectors.chunks(INFER_CHUNK).enumerate() {
            let x = self.scaled_matrix(chunk.iter().map(|v| &v.values[..]))?;
            let p = self.params.infer(&x)?;
            for r in 0..p.rows() {
                out.row_mut(c * INFER_CHUNK + r).copy_from_slice(p.row(r));
            }
        }
        Ok(out)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-class seeded split. Each class with `n >= 2` rows contributes
/// `clamp(round(frac * n), 1, n - 1)` rows to validation. Returns sorted
/// (train, validation) positions.
pub fn stratified_split(targets: &[usize], validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &t) in targets.iter().enumerate() {
        by_class.entry(t).or_default().push(i);
    }
    let mut rng = rng_stream(seed, STREAM_SPLIT);
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_class {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_val = if n < 2 {
            0
        } else {
            (libm::round(validation_fraction * n as f64) as usize).clamp(1, n - 1)
        };
        va.extend_from_slice(&idx[..n_val]);
        tr.extend_from_slice(&idx[n_val..]);
    }
    tr.sort_unstable();
    va.sort_unstable();
    (tr, va)
}

fn accuracy(params: &ModelParams, x: &Matrix, targets: &[usize]) -> Result<f64> {
    let mut correct = 0usize;
    let cols = x.cols();
    for (c, chunk) in x.as_slice().chunks(INFER_CHUNK * cols).enumerate() {
        let rows = chunk.len() / cols;
        let xm = Matrix::from_vec(rows, cols, chunk.to_vec())?;
        let p = params.infer(&xm)?;
        for r in 0..rows {
            if argmax(p.row(r)) == targets[c * INFER_CHUNK + r] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / targets.len().max(1) as f64)
}

fn gather(scaler: &Scaler, features: &[FeatureVector], positions: &[usize]) -> Result<Matrix> {
    let mut m = Matrix::zeros(positions.len(), scaler.dim());
    for (r, &i) in positions.iter().enumerate() {
        scaler.transform_into(&features[i].values, m.row_mut(r))?;
    }
    Ok(m)
}

/// Stratified 80/20 split, scaler fitted on the training part, seeded
/// mini-batch Adam for a fixed number of epochs. The artifact carries the
/// default rejection threshold.
pub fn train(features: &[FeatureVector], config: &ModelConfig) -> Result<(ModelArtifact, TrainReport)> {
    let mut labels: Vec<&ActivityLabel> = Vec::with_capacity(features.len());
    for f in features {
        labels.push(f.label.as_ref().ok_or(Error::MissingLabel)?);
    }
    let mut counts: BTreeMap<&ActivityLabel, usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::InvalidConfig("training needs at least 2 classes".into()));
    }
    if let Some((l, &c)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(Error::TooFewSamples { label: l.to_string(), count: c });
    }
    let label_map: Vec<ActivityLabel> = counts.keys().map(|l| (*l).clone()).collect();
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| label_map.binary_search(l).expect("label present"))
        .collect();

    let mut config = config.clone();
    config.output_dim = label_map.len();
    config.validate()?;
    if config.input_dim != crate::features::FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            expected: crate::features::FEATURE_DIM,
            found: config.input_dim,
        });
    }

    let (train_pos, val_pos) = stratified_split(&targets, VALIDATION_FRACTION, config.seed);
    let scaler = Scaler::fit(train_pos.iter().map(|&i| &features[i].values[..]))?;
    let x_train = gather(&scaler, features, &train_pos)?;
    let y_train: Vec<usize> = train_pos.iter().map(|&i| targets[i]).collect();
    let x_val = gather(&scaler, features, &val_pos)?;
    let y_val: Vec<usize> = val_pos.iter().map(|&i| targets[i]).collect();

    let mut params = init_model(&config, config.seed)?;
    let adam = config.adam();
    let mut state = AdamState::new(&params);
    let mut shuffle_rng = rng_stream(config.seed, STREAM_SHUFFLE);
    let mut dropout_rng = rng_stream(config.seed, STREAM_DROPOUT);
    let dim = x_train.cols();
    let mut order: Vec<usize> = (0..train_pos.len()).collect();
    let mut step = 0u64;
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut xb = Matrix::zeros(batch.len(), dim);
            let mut yb = Vec::with_capacity(batch.len());
            for (r, &i) in batch.iter().enumerate() {
                xb.row_mut(r).copy_from_slice(x_train.row(i));
                yb.push(y_train[i]);
            }
            let mode = Mode::Train { dropout_rate: config.dropout_rate, mask_seed: dropout_rng.gen() };
            let diverged = Error::Diverged { epoch, batch: batch_no };
            let (probs, cache) = forward(&params, &xb, mode).map_err(|e| match e {
                Error::NonFiniteActivation(_) => diverged.clone(),
                other => other,
            })?;
            let loss = loss_cce(&probs, &yb)?;
            if !loss.is_finite() {
                return Err(diverged);
            }
            loss_sum += loss * batch.len() as f64;
            correct += (0..probs.rows()).filter(|&r| argmax(probs.row(r)) == yb[r]).count();
            let grads = backward(&params, &cache, &yb)?;
            step += 1;
            adam_step(&adam, &mut state, &mut params, &grads, step)?;
        }
        let n = order.len() as f64;
        epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            validation_accuracy: accuracy(&params, &x_val, &y_val)?,
        });
    }

    let report = TrainReport {
        epochs,
        seed: config.seed,
        train_size: train_pos.len(),
        validation_size: val_pos.len(),
        validation_indices: val_pos,
    };
    let artifact = ModelArtifact { config, params, scaler, label_map, threshold: DEFAULT_THRESHOLD };
    Ok((artifact, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified_and_seeded() {
        let targets: Vec<usize> = (0..100).map(|i| if i < 90 { 0 } else { 1 }).collect();
        let (tr, va) = stratified_split(&targets, 0.2, 3);
        assert_eq!(tr.len() + va.len(), 100);
        assert_eq!(va.iter().filter(|&&i| targets[i] == 0).count(), 18);
        assert_eq!(va.iter().filter(|&&i| targets[i] == 1).count(), 2);
        assert_eq!((tr.clone(), va.clone()), stratified_split(&targets, 0.2, 3));
        assert_ne!(va, stratified_split(&targets, 0.2, 4).1);
        // Two samples: one each side.
        let (tr, va) = stratified_split(&[5, 5], 0.2, 0);
        assert_eq!((tr.len(), va.len()), (1, 1));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }

    #[test]
    fn rejects_unlabeled_and_tiny_classes() {
        let mut fv = FeatureVector { values: [0.0; 48], label: None, window_index: 0 };
        assert_eq!(train(&[fv.clone()], &ModelConfig::default()).unwrap_err(), Error::MissingLabel);
        let a = ActivityLabel::new("a", "x").unwrap();
        let b = ActivityLabel::new("b", "y").unwrap();
        fv.label = Some(a.clone());
        let mut other = fv.clone();
        other.label = Some(b);
        let err = train(&[fv.clone(), fv.clone(), other], &ModelConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewSamples { count: 1, .. }));
        assert!(train(&[fv.clone(), fv], &ModelConfig::default()).is_err());
    }
}
