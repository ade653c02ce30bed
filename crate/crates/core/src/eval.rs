//! Accuracy metrics, the misclassification matrix and the leave-one-app-out
//! protocol.
//!
//! Known-data accuracy counts an instance as correct only when it is
//! accepted (not rejected) and its predicted label equals the true label.
//! Unknown-data accuracy is the fraction of never-trained instances that are
//! rejected. Scoring is per segment.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::capture::ActivityLabel;
use crate::dnn::{rng_stream, train, ModelConfig};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::openset::{predict, sweep_threshold, Prediction, Verdict};

const STREAM_CALIBRATION: u64 = 5;

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Fraction of known instances accepted with the correct label.
pub fn accuracy_known(predictions: &[Prediction], truth: &[ActivityLabel]) -> Result<f64> {
    check_aligned(predictions.len(), truth.len())?;
    if predictions.is_empty() {
        return Err(Error::Empty("known evaluation set"));
    }
    let correct = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.verdict.label() == Some(*t))
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Fraction of unknown instances rejected.
pub fn accuracy_unknown(predictions: &[Prediction]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("unknown evaluation set"));
    }
    let rejected = predictions.iter().filter(|p| p.verdict.is_unknown()).count();
    Ok(rejected as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: ActivityLabel,
    /// Known instances of this class.
    pub support: usize,
    /// Accepted predictions of this class, from either set.
    pub predicted: usize,
    pub true_positives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub known_accuracy: f64,
    /// `None` when no unknown instances were supplied.
    pub unknown_rejection: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    pub correct: usize,
    pub wrong_label: usize,
    pub falsely_rejected: usize,
    pub falsely_accepted: usize,
    pub correctly_rejected: usize,
}

impl EvalReport {
    pub fn known_total(&self) -> usize {
        self.correct + self.wrong_label + self.falsely_rejected
    }

    pub fn unknown_total(&self) -> usize {
        self.falsely_accepted + self.correctly_rejected
    }
}

pub fn evaluate(
    known: &[Prediction],
    truth: &[ActivityLabel],
    unknown: &[Prediction],
    label_map: &[ActivityLabel],
) -> Result<EvalReport> {
    let known_accuracy = accuracy_known(known, truth)?;
    let unknown_rejection = if unknown.is_empty() { None } else { Some(accuracy_unknown(unknown)?) };
    let mut r = EvalReport {
        known_accuracy,
        unknown_rejection,
        per_class: Vec::with_capacity(label_map.len()),
        correct: 0,
        wrong_label: 0,
        falsely_rejected: 0,
        falsely_accepted: 0,
        correctly_rejected: 0,
    };
    for (p, t) in known.iter().zip(truth) {
        match p.verdict.label() {
            None => r.falsely_rejected += 1,
            Some(l) if l == t => r.correct += 1,
            Some(_) => r.wrong_label += 1,
        }
    }
    for p in unknown {
        if p.verdict.is_unknown() {
            r.correctly_rejected += 1;
        } else {
            r.falsely_accepted += 1;
        }
    }
    for label in label_map {
        let support = truth.iter().filter(|t| *t == label).count();
        let predicted = known
            .iter()
            .chain(unknown)
            .filter(|p| p.verdict.label() == Some(label))
            .count();
        let true_positives = known
            .iter()
            .zip(truth)
            .filter(|(p, t)| *t == label && p.verdict.label() == Some(label))
            .count();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        r.per_class.push(ClassMetrics {
            label: label.clone(),
            support,
            predicted,
            true_positives,
            precision: ratio(true_positives, predicted),
            recall: ratio(true_positives, support),
        });
    }
    Ok(r)
}

/// Distribution, over trained apps, of the held-out instances that were
/// wrongly accepted as known.
#[derive(Debug, Clone, PartialEq)]
pub struct MisclassRow {
    pub app: String,
    pub total: usize,
    pub accepted: usize,
    /// Percentage per matrix column; `None` where the column app was not
    /// trained for this row or when nothing was accepted.
    pub cells: Vec<Option<f64>>,
}

impl MisclassRow {
    pub fn is_empty(&self) -> bool {
        self.accepted == 0
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisclassMatrix {
    /// Trained apps.
    pub columns: Vec<String>,
    pub rows: Vec<MisclassRow>,
}

/// Apps in first-appearance order of the label map.
fn apps_of(label_map: &[ActivityLabel]) -> Vec<String> {
    let mut apps: Vec<String> = Vec::new();
    for l in label_map {
        if !apps.iter().any(|a| a == l.app()) {
            apps.push(l.app().to_string());
        }
    }
    apps
}

fn misclass_row(app: &str, predictions: &[Prediction], columns: &[String], trained: &[String]) -> MisclassRow {
    let mut counts = alloc::vec![0usize; columns.len()];
    let mut accepted = 0;
    for p in predictions {
        if let Verdict::Known(l) = &p.verdict {
            accepted += 1;
            if let Some(c) = columns.iter().position(|c| c == l.app()) {
                counts[c] += 1;
            }
        }
    }
    let cells = columns
        .iter()
        .zip(&counts)
        .map(|(col, &n)| {
            (accepted > 0 && trained.contains(col)).then(|| 100.0 * n as f64 / accepted as f64)
        })
        .collect();
    MisclassRow { app: app.to_string(), total: predictions.len(), accepted, cells }
}

/// One row per held-out app group; columns are the apps of `label_map`.
pub fn misclassification_matrix(
    groups: &[(String, Vec<Prediction>)],
    label_map: &[ActivityLabel],
) -> MisclassMatrix {
    let columns = apps_of(label_map);
    let rows = groups
        .iter()
        .map(|(app, preds)| misclass_row(app, preds, &columns, &columns))
        .collect();
    MisclassMatrix { columns, rows }
}

/// How the rejection threshold of each leave-one-app-out run is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TauPolicy {
    Fixed(f64),
    /// Recommended threshold of a sweep over `grid`, calibrated on the
    /// run's validation split and one seeded half of the held-out app's
    /// segments; the detection rate is measured on the other half.
    Sweep { grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoaoRun {
    pub held_out: String,
    pub trained_apps: Vec<String>,
    pub label_map: Vec<ActivityLabel>,
    pub threshold: f64,
    pub validation_accuracy: f64,
    pub evaluated: usize,
    pub rejected: usize,
    pub detection_rate: f64,
    /// Columns are `trained_apps`.
    pub misclass: MisclassRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedApp {
    pub app: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoaoReport {
    pub runs: Vec<LoaoRun>,
    pub skipped: Vec<SkippedApp>,
    pub mean_detection_rate: Option<f64>,
}

impl LoaoReport {
    /// Table of all runs; columns are every app seen, sorted.
    pub fn matrix(&self) -> MisclassMatrix {
        let mut columns: BTreeSet<String> = BTreeSet::new();
        for run in &self.runs {
            columns.insert(run.held_out.clone());
            columns.extend(run.trained_apps.iter().cloned());
        }
        let columns: Vec<String> = columns.into_iter().collect();
        let rows = self
            .runs
            .iter()
            .map(|run| {
                let cells = columns
                    .iter()
                    .map(|c| {
                        run.trained_apps
                            .iter()
                            .position(|t| t == c)
                            .and_then(|i| run.misclass.cells[i])
                    })
                    .collect();
                MisclassRow { cells, ..run.misclass.clone() }
            })
            .collect();
        MisclassMatrix { columns, rows }
    }
}

/// Sorted distinct apps of a labeled dataset.
pub fn dataset_apps(dataset: &[FeatureVector]) -> Result<Vec<String>> {
    let mut apps = BTreeSet::new();
    for v in dataset {
        apps.insert(v.label.as_ref().ok_or(Error::MissingLabel)?.app().to_string());
    }
    Ok(apps.into_iter().collect())
}

/// Trains on every app except `held_out` and scores rejection of its segments.
///
/// Classes with fewer than two segments are left out of training.
pub fn loao_run(dataset: &[FeatureVector], held_out: &str, config: &ModelConfig, policy: &TauPolicy) -> Result<LoaoRun> {
    let mut train_set = Vec::new();
    let mut unknown = Vec::new();
    for v in dataset {
        let label = v.label.as_ref().ok_or(Error::MissingLabel)?;
        if label.app() == held_out {
            unknown.push(v.clone());
        } else {
            train_set.push(v.clone());
        }
    }
    if unknown.is_empty() {
        return Err(Error::InsufficientData(alloc::format!("no segments for app {held_out}")));
    }
    let counts = train_set.iter().fold(alloc::collections::BTreeMap::new(), |mut m, v| {
        *m.entry(v.label.clone()).or_insert(0usize) += 1;
        m
    });
    train_set.retain(|v| counts[&v.label] >= 2);
    if counts.values().filter(|&&c| c >= 2).count() < 2 {
        return Err(Error::InsufficientData(alloc::format!(
            "fewer than 2 trainable classes without app {held_out}"
        )));
    }

    let (mut artifact, report) = train(&train_set, config)?;
    if artifact.label_map.iter().any(|l| l.app() == held_out) {
        return Err(Error::InvalidConfig("held-out app leaked into training".into()));
    }
    let (threshold, evaluated) = match policy {
        TauPolicy::Fixed(t) => (*t, unknown),
        TauPolicy::Sweep { grid } => {
            let mut rng = rng_stream(config.seed, STREAM_CALIBRATION);
            unknown.shuffle(&mut rng);
            let half = unknown.len() / 2;
            let (calib, test) = unknown.split_at(half);
            if calib.is_empty() || test.is_empty() {
                return Err(Error::InsufficientData(alloc::format!(
                    "app {held_out} has too few segments to calibrate and test"
                )));
            }
            let known: Vec<FeatureVector> =
                report.validation_indices.iter().map(|&i| train_set[i].clone()).collect();
            let sweep = sweep_threshold(&artifact, &known, calib, grid)?;
            (sweep.recommended_tau, test.to_vec())
        }
    };
    artifact.threshold = threshold;
    let preds = predict(&artifact, &evaluated, threshold)?;
    let detection_rate = accuracy_unknown(&preds)?;
    let trained_apps = apps_of(&artifact.label_map);
    let misclass = misclass_row(held_out, &preds, &trained_apps, &trained_apps);
    Ok(LoaoRun {
        held_out: held_out.to_string(),
        validation_accuracy: report.final_epoch().map_or(0.0, |e| e.validation_accuracy),
        threshold,
        evaluated: preds.len(),
        rejected: preds.iter().filter(|p| p.verdict.is_unknown()).count(),
        detection_rate,
        label_map: artifact.label_map,
        trained_apps,
        misclass,
    })
}

/// Collects per-app results in app order. Apps whose run failed for lack of
/// data are listed as skipped; any other error aborts.
pub fn assemble_loao(results: Vec<(String, Result<LoaoRun>)>) -> Result<LoaoReport> {
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for (app, res) in results {
        match res {
            Ok(run) => runs.push(run),
            Err(e @ (Error::InsufficientData(_) | Error::TooFewSamples { .. })) => {
                skipped.push(SkippedApp { app, reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    let mean_detection_rate = (!runs.is_empty())
        .then(|| runs.iter().map(|r| r.detection_rate).sum::<f64>() / runs.len() as f64);
    Ok(LoaoReport { runs, skipped, mean_detection_rate })
}

/// Runs [`loao_run`] for every app in turn.
pub fn leave_one_app_out(dataset: &[FeatureVector], config: &ModelConfig, policy: &TauPolicy) -> Result<LoaoReport> {
    let apps = dataset_apps(dataset)?;
    if apps.len() < 2 {
        return Err(Error::InsufficientData("leave-one-app-out needs at least 2 apps".into()));
    }
    let results = apps
        .into_iter()
        .map(|app| {
            let r = loao_run(dataset, &app, config, policy);
            (app, r)
        })
        .collect();
    assemble_loao(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::openset::classify;
    use alloc::vec;

    fn lab(app: &str, act: &str) -> ActivityLabel {
        ActivityLabel::new(app, act).unwrap()
    }

    fn label_map() -> Vec<ActivityLabel> {
        vec![lab("facebook", "live"), lab("facebook", "post"), lab("skype", "call")]
    }

    fn pred(probs: &[f64], tau: f64) -> Prediction {
        classify(probs, tau, &label_map()).unwrap()
    }

    #[test]
    fn known_accuracy_counting() {
        let lm = label_map();
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..8 {
            preds.push(pred(&[0.99, 0.005, 0.005], 0.97));
            truth.push(lm[0].clone());
        }
        preds.push(pred(&[0.005, 0.99, 0.005], 0.97));
        truth.push(lm[0].clone());
        preds.push(pred(&[0.5, 0.3, 0.2], 0.97));
        truth.push(lm[0].clone());
        assert!((accuracy_known(&preds, &truth).unwrap() - 0.8).abs() < 1e-15);
        assert!(accuracy_known(&preds, &truth[1..]).is_err());

        let r = evaluate(&preds, &truth, &[], &lm).unwrap();
        assert_eq!((r.correct, r.wrong_label, r.falsely_rejected), (8, 1, 1));
        assert_eq!(r.unknown_rejection, None);
        assert_eq!(r.per_class[0].recall, Some(0.8));
        assert_eq!(r.per_class[1].precision, Some(0.0));
        assert_eq!(r.per_class[2].precision, None);
    }

    #[test]
    fn unknown_rejection_rate() {
        let mut preds: Vec<Prediction> = (0..62).map(|_| pred(&[0.4, 0.3, 0.3], 0.97)).collect();
        preds.extend((0..38).map(|_| pred(&[0.98, 0.01, 0.01], 0.97)));
        assert!((accuracy_unknown(&preds).unwrap() - 0.62).abs() < 1e-15);
        assert_eq!(accuracy_unknown(&preds[..62]).unwrap(), 1.0);
        assert_eq!(accuracy_unknown(&preds[62..]).unwrap(), 0.0);
        assert!(accuracy_unknown(&[]).is_err());
    }

    #[test]
    fn matrix_rows() {
        let all_fb: Vec<Prediction> = (0..5).map(|_| pred(&[0.99, 0.005, 0.005], 0.5)).collect();
        let rejected: Vec<Prediction> = (0..3).map(|_| pred(&[0.4, 0.3, 0.3], 0.5)).collect();
        let mut mixed = all_fb.clone();
        mixed.push(pred(&[0.0, 0.01, 0.99], 0.5));
        let m = misclassification_matrix(
            &[("gmail".into(), all_fb), ("viber".into(), rejected), ("youtube".into(), mixed)],
            &label_map(),
        );
        assert_eq!(m.columns, ["facebook", "skype"]);
        assert_eq!(m.rows[0].cells, [Some(100.0), Some(0.0)]);
        assert!(m.rows[1].is_empty());
        assert_eq!(m.rows[1].cells, [None, None]);
        assert!((m.rows[2].sum() - 100.0).abs() < 1e-9);
    }
}
