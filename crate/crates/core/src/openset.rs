//! Open-set rejection by thresholding the top softmax probability.
//!
//! An input whose highest class probability `p_max` falls below the
//! threshold is declared unknown; `p_max >= threshold` keeps the arg-max
//! label.

use alloc::vec::Vec;

use crate::capture::ActivityLabel;
use crate::dnn::{argmax, ModelArtifact};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Shipped rejection threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.97;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Known(ActivityLabel),
    Unknown,
}

impl Verdict {
    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown)
    }

    pub fn label(&self) -> Option<&ActivityLabel> {
        match self {
            Verdict::Known(l) => Some(l),
            Verdict::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub p_max: f64,
    pub argmax_index: usize,
    pub verdict: Verdict,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold))
    }
}

pub fn classify(probabilities: &[f64], threshold: f64, label_map: &[ActivityLabel]) -> Result<Prediction> {
    if probabilities.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    check_threshold(threshold)?;
    if label_map.len() != probabilities.len() {
        return Err(Error::DimensionMismatch { expected: label_map.len(), found: probabilities.len() });
    }
    let argmax_index = argmax(probabilities);
    let p_max = probabilities[argmax_index];
    let verdict = if p_max >= threshold {
        Verdict::Known(label_map[argmax_index].clone())
    } else {
        Verdict::Unknown
    };
    Ok(Prediction { probabilities: probabilities.to_vec(), p_max, argmax_index, verdict })
}

/// Predicts and classifies a batch of raw feature vectors.
pub fn predict(artifact: &ModelArtifact, vectors: &[FeatureVector], threshold: f64) -> Result<Vec<Prediction>> {
    let probs = artifact.predict_proba_batch(vectors)?;
    probs
        .iter_rows()
        .take(vectors.len())
        .map(|row| classify(row, threshold, &artifact.label_map))
        .collect()
}

/// Uniform bins over [0, 1] of `p_max`, counted separately for known and
/// unknown instances. `p_max = 1` lands in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub known: Vec<usize>,
    pub unknown: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.known.len()
    }
}

fn bin_of(p: f64, bins: usize) -> usize {
    let k = libm::floor(p * bins as f64);
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

pub fn confidence_histogram(known: &[Prediction], unknown: &[Prediction], bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidConfig("histogram needs at least 2 bins".into()));
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut h = Histogram { edges, known: alloc::vec![0; bins], unknown: alloc::vec![0; bins] };
    for p in known {
        h.known[bin_of(p.p_max, bins)] += 1;
    }
    for p in unknown {
        h.unknown[bin_of(p.p_max, bins)] += 1;
    }
    Ok(h)
}

/// A known-set instance reduced to what thresholding needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredKnown {
    pub p_max: f64,
    /// Arg-max label equals the true label.
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    /// Correct and accepted, over all known instances.
    pub known_accuracy: f64,
    /// Rejected, over all unknown instances.
    pub unknown_rejection: f64,
    pub known_correct: usize,
    pub known_rejected: usize,
    pub known_total: usize,
    pub unknown_rejected: usize,
    pub unknown_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Sorted by ascending `tau`.
    pub rows: Vec<SweepRow>,
    /// Maximizes the mean of known accuracy and unknown rejection; ties go
    /// to the larger threshold.
    pub recommended_tau: f64,
}

/// `n` evenly spaced thresholds from 0 to 1 inclusive.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Threshold sweep over pre-scored instances.
pub fn sweep_scored(known: &[ScoredKnown], unknown_p_max: &[f64], grid: &[f64]) -> Result<SweepReport> {
    if known.is_empty() || unknown_p_max.is_empty() {
        return Err(Error::Empty("threshold sweep evaluation set"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("threshold grid"));
    }
    for &t in grid {
        check_threshold(t)?;
    }
    let mut taus = grid.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let rows: Vec<SweepRow> = taus
        .iter()
        .map(|&tau| {
            let known_rejected = known.iter().filter(|k| k.p_max < tau).count();
            let known_correct = known.iter().filter(|k| k.correct && k.p_max >= tau).count();
            let unknown_rejected = unknown_p_max.iter().filter(|&&p| p < tau).count();
            SweepRow {
                tau,
                known_accuracy: known_correct as f64 / known.len() as f64,
                unknown_rejection: unknown_rejected as f64 / unknown_p_max.len() as f64,
                known_correct,
                known_rejected,
                known_total: known.len(),
                unknown_rejected,
                unknown_total: unknown_p_max.len(),
            }
        })
        .collect();
    let mut best = 0;
    let objective = |r: &SweepRow| 0.5 * (r.known_accuracy + r.unknown_rejection);
    for (i, r) in rows.iter().enumerate() {
        if objective(r) >= objective(&rows[best]) {
            best = i;
        }
    }
    let recommended_tau = rows[best].tau;
    Ok(SweepReport { rows, recommended_tau })
}

/// Scores both evaluation sets with the artifact, then sweeps the grid.
/// Known vectors must carry their true label.
pub fn sweep_threshold(
    artifact: &ModelArtifact,
    known: &[FeatureVector],
    unknown: &[FeatureVector],
    grid: &[f64],
) -> Result<SweepReport> {
    if known.is_empty() || unknown.is_empty() {
        return Err(Error::Empty("threshold sweep evaluation set"));
    }
    let kp = artifact.predict_proba_batch(known)?;
    let scored: Vec<ScoredKnown> = known
        .iter()
        .zip(kp.iter_rows())
        .map(|(v, row)| {
            let i = argmax(row);
            let truth = v.label.as_ref().ok_or(Error::MissingLabel)?;
            Ok(ScoredKnown { p_max: row[i], correct: &artifact.label_map[i] == truth })
        })
        .collect::<Result<_>>()?;
    let up = artifact.predict_proba_batch(unknown)?;
    let unknown_p: Vec<f64> = up.iter_rows().take(unknown.len()).map(|r| r[argmax(r)]).collect();
    sweep_scored(&scored, &unknown_p, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labels(n: usize) -> Vec<ActivityLabel> {
        (0..n)
            .map(|i| ActivityLabel::new("app", alloc::format!("act{i}")).unwrap())
            .collect()
    }

    #[test]
    fn threshold_rule() {
        let lm = labels(2);
        let p = classify(&[0.98, 0.02], 0.97, &lm).unwrap();
        assert_eq!(p.verdict, Verdict::Known(lm[0].clone()));
        assert!(classify(&[0.5, 0.5], 0.97, &lm).unwrap().verdict.is_unknown());
        assert!(!classify(&[0.5, 0.5], 0.0, &lm).unwrap().verdict.is_unknown());
        assert!(classify(&[0.999_999, 1e-6], 1.0, &lm).unwrap().verdict.is_unknown());
        assert!(!classify(&[1.0, 0.0], 1.0, &lm).unwrap().verdict.is_unknown());
        // Equality is known.
        assert!(!classify(&[0.97, 0.03], 0.97, &lm).unwrap().verdict.is_unknown());
        assert_eq!(classify(&[0.5, 0.5], 0.1, &lm).unwrap().argmax_index, 0);
    }

    #[test]
    fn classify_errors() {
        assert!(classify(&[], 0.5, &[]).is_err());
        assert!(classify(&[1.0, 0.0], 1.5, &labels(2)).is_err());
        assert!(classify(&[1.0, 0.0], 0.5, &labels(3)).is_err());
    }

    #[test]
    fn histogram_placement() {
        let lm = labels(2);
        let known: Vec<_> = (0..10).map(|_| classify(&[0.99, 0.01], 0.5, &lm).unwrap()).collect();
        let h = confidence_histogram(&known, &[], 10).unwrap();
        assert_eq!(h.known[9], 10);
        assert!(h.unknown.iter().all(|&c| c == 0));
        let one = classify(&[1.0, 0.0], 0.5, &lm).unwrap();
        assert_eq!(confidence_histogram(&[one], &[], 4).unwrap().known, [0, 0, 0, 1]);
        assert!(confidence_histogram(&[], &[], 1).is_err());
        assert_eq!(h.edges.len(), 11);
    }

    #[test]
    fn sweep_boundaries() {
        let known = [
            ScoredKnown { p_max: 1.0, correct: true },
            ScoredKnown { p_max: 0.9, correct: true },
            ScoredKnown { p_max: 1.0, correct: false },
        ];
        let r = sweep_scored(&known, &[0.4, 0.99], &[1.0, 0.0]).unwrap();
        assert_eq!(r.rows[0].tau, 0.0);
        assert_eq!(r.rows[0].unknown_rejected, 0);
        assert_eq!(r.rows[1].known_correct, 1);
        assert_eq!(r.rows[1].unknown_rejection, 1.0);
        assert!(sweep_scored(&[], &[0.5], &[0.5]).is_err());
        assert!(sweep_scored(&known, &[0.5], &[]).is_err());
        assert!(sweep_scored(&known, &[0.5], &[1.2]).is_err());
    }

    #[test]
    fn recommended_tau_prefers_larger_on_ties() {
        let known = [ScoredKnown { p_max: 0.95, correct: true }];
        let r = sweep_scored(&known, &[0.2], &uniform_grid(11)).unwrap();
        // Every tau in (0.2, 0.95] scores 1.0; the largest one wins.
        assert!((r.recommended_tau - 0.9).abs() < 1e-12);
    }

    #[test]
    fn grid_helper() {
        assert_eq!(uniform_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform_grid(101).len(), 101);
    }
}
