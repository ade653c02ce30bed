//! The 48-dimensional segment summary and the standardization transform.
//!
//! A segment is described by twelve order-free statistics of two series
//! (frame length, frame inter-arrival time) in each of two directions. Block
//! order is length-uplink, length-downlink, interarrival-uplink,
//! interarrival-downlink; within a block the order is [`STAT_NAMES`].
//!
//! Conventions: sample variance (divisor n-1), bias-corrected skew (G1) and
//! excess kurtosis (G2), linear-interpolation quartiles, and median absolute
//! deviation taken literally as `median(|x - median(x)|)`. Statistics that
//! are undefined for short series are filled with 0.

use alloc::vec::Vec;

use crate::capture::{ActivityLabel, Direction};
use crate::error::{Error, Result};
use crate::segment::FlowSegment;

pub const STATS_PER_SERIES: usize = 12;
pub const FEATURE_DIM: usize = 4 * STATS_PER_SERIES;

pub const STAT_NAMES: [&str; STATS_PER_SERIES] = [
    "min", "max", "std", "q1", "q2", "q3", "mean", "mad", "var", "skew", "kurt", "sum",
];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DirectionalStats {
    pub minimum: f64,
    pub maximum: f64,
    pub standard_deviation: f64,
    pub first_quartile: f64,
    pub second_quartile: f64,
    pub third_quartile: f64,
    pub mean: f64,
    pub median_absolute_deviation: f64,
    pub variance: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub sum: f64,
}

impl DirectionalStats {
    pub fn to_array(&self) -> [f64; STATS_PER_SERIES] {
        [
            self.minimum,
            self.maximum,
            self.standard_deviation,
            self.first_quartile,
            self.second_quartile,
            self.third_quartile,
            self.mean,
            self.median_absolute_deviation,
            self.variance,
            self.skew,
            self.kurtosis,
            self.sum,
        ]
    }
}

/// Consecutive differences of a non-decreasing timestamp series.
pub fn interarrival(timestamps: &[f64]) -> Result<Vec<f64>> {
    timestamps
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let d = w[1] - w[0];
            if d < 0.0 {
                Err(Error::DecreasingTimestamp { index: i + 1 })
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// Linear interpolation between order statistics at `h = (n-1) p`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + (hi - sorted[lo]) * frac,
        _ => sorted[lo],
    }
}

fn sort_f64(v: &mut [f64]) {
    v.sort_unstable_by(|a, b| a.total_cmp(b));
}

pub fn stats12(series: &[f64]) -> Result<DirectionalStats> {
    if let Some(i) = series.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = series.len();
    if n == 0 {
        return Ok(DirectionalStats::default());
    }
    let nf = n as f64;
    let mut sorted = series.to_vec();
    sort_f64(&mut sorted);
    let sum: f64 = series.iter().sum();
    let mean = sum / nf;
    let median = quantile_sorted(&sorted, 0.5);
    let mut deviations: Vec<f64> = series.iter().map(|x| libm::fabs(x - median)).collect();
    sort_f64(&mut deviations);

    let mut stats = DirectionalStats {
        minimum: sorted[0],
        maximum: sorted[n - 1],
        first_quartile: quantile_sorted(&sorted, 0.25),
        second_quartile: median,
        third_quartile: quantile_sorted(&sorted, 0.75),
        mean,
        median_absolute_deviation: quantile_sorted(&deviations, 0.5),
        sum,
        ..DirectionalStats::default()
    };
    // Constant series: every spread and shape statistic is exactly zero.
    if n < 2 || stats.minimum == stats.maximum {
        return Ok(stats);
    }

    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    stats.variance = m2 / (nf - 1.0);
    stats.standard_deviation = libm::sqrt(stats.variance);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    if n >= 3 {
        let g1 = m3 / libm::pow(m2, 1.5);
        stats.skew = libm::sqrt(nf * (nf - 1.0)) / (nf - 2.0) * g1;
    }
    if n >= 4 {
        let g2 = m4 / (m2 * m2) - 3.0;
        stats.kurtosis = (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0);
    }
    Ok(stats)
}

/// Fixed-width statistical summary of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
    pub label: Option<ActivityLabel>,
    pub window_index: u64,
}

pub fn featurize(segment: &FlowSegment) -> Result<FeatureVector> {
    let (mut up_len, mut down_len) = (Vec::new(), Vec::new());
    let (mut up_ts, mut down_ts) = (Vec::new(), Vec::new());
    for f in &segment.frames {
        match f.dir {
            Direction::Uplink => {
                up_len.push(f64::from(f.len));
                up_ts.push(f.ts);
            }
            Direction::Downlink => {
                down_len.push(f64::from(f.len));
                down_ts.push(f.ts);
            }
        }
    }
    let blocks = [
        stats12(&up_len)?,
        stats12(&down_len)?,
        stats12(&interarrival(&up_ts)?)?,
        stats12(&interarrival(&down_ts)?)?,
    ];
    let mut values = [0.0; FEATURE_DIM];
    for (chunk, block) in values.chunks_exact_mut(STATS_PER_SERIES).zip(&blocks) {
        chunk.copy_from_slice(&block.to_array());
    }
    Ok(FeatureVector {
        values,
        label: segment.label.clone(),
        window_index: segment.window_index,
    })
}

/// Per-feature standardization `x' = (x - mean) / std` with population std.
/// A zero std marks a constant feature, which maps to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fits on rows of equal width.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
        I::IntoIter: Clone,
    {
        let rows = rows.into_iter();
        let mut count = 0usize;
        let mut dim = None;
        let mut sums = Vec::new();
        let mut mins = Vec::new();
        let mut maxs = Vec::new();
        for row in rows.clone() {
            let d = *dim.get_or_insert(row.len());
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            if count == 0 {
                sums = alloc::vec![0.0; d];
                mins = row.to_vec();
                maxs = row.to_vec();
            }
            for (j, &x) in row.iter().enumerate() {
                sums[j] += x;
                mins[j] = f64::min(mins[j], x);
                maxs[j] = f64::max(maxs[j], x);
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Empty("scaler fit matrix"));
        }
        let n = count as f64;
        let constant: Vec<bool> = mins.iter().zip(&maxs).map(|(a, b)| a == b).collect();
        let mean: Vec<f64> = sums
            .iter()
            .zip(&mins)
            .zip(&constant)
            .map(|((s, m), &c)| if c { *m } else { s / n })
            .collect();
        let mut sq = alloc::vec![0.0; mean.len()];
        for row in rows {
            for (j, &x) in row.iter().enumerate() {
                let d = x - mean[j];
                sq[j] += d * d;
            }
        }
        let std = sq
            .iter()
            .zip(&constant)
            .map(|(s, &c)| if c { 0.0 } else { libm::sqrt(s / n) })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes `x` into `out`.
    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() || out.len() != self.dim() || self.std.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        for ((o, &v), (m, s)) in out.iter_mut().zip(x).zip(self.mean.iter().zip(&self.std)) {
            *o = if *s == 0.0 { 0.0 } else { (v - m) / s };
        }
        Ok(())
    }

    pub fn apply(&self, vector: &FeatureVector) -> Result<FeatureVector> {
        let mut values = [0.0; FEATURE_DIM];
        self.transform_into(&vector.values, &mut values)?;
        Ok(FeatureVector { values, ..vector.clone() })
    }
}

pub fn fit_scaler(vectors: &[FeatureVector]) -> Result<Scaler> {
    Scaler::fit(vectors.iter().map(|v| &v.values[..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{CaptureRecord, FrameType};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stats_of_one_to_four() {
        let s = stats12(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.minimum, s.maximum, s.mean, s.sum), (1.0, 4.0, 2.5, 10.0));
        assert_eq!((s.first_quartile, s.second_quartile, s.third_quartile), (1.75, 2.5, 3.25));
        assert_eq!(s.median_absolute_deviation, 1.0);
        assert!(close(s.variance, 5.0 / 3.0, 1e-12));
        assert!(close(s.standard_deviation, 1.2909944487358056, 1e-12));
        assert!(close(s.skew, 0.0, 1e-12));
        assert!(close(s.kurtosis, -1.2, 1e-12));
    }

    #[test]
    fn single_and_empty_series() {
        let s = stats12(&[7.0]).unwrap();
        assert_eq!(
            s.to_array(),
            [7.0, 7.0, 0.0, 7.0, 7.0, 7.0, 7.0, 0.0, 0.0, 0.0, 0.0, 7.0]
        );
        assert_eq!(stats12(&[]).unwrap().to_array(), [0.0; 12]);
        assert_eq!(stats12(&[1.0, f64::NAN]), Err(Error::NonFinite(1)));
    }

    #[test]
    fn interarrival_cases() {
        let d = interarrival(&[0.0, 0.1, 0.4]).unwrap();
        assert!(close(d[0], 0.1, 1e-15) && close(d[1], 0.3, 1e-15));
        assert!(interarrival(&[5.0]).unwrap().is_empty());
        assert!(interarrival(&[1.0, 0.5]).is_err());
    }

    fn frame(ts: f64, len: u32, dir: Direction) -> CaptureRecord {
        CaptureRecord {
            ts,
            len,
            dir,
            ftype: FrameType::Data,
            retry: false,
            fcs_ok: true,
            label: Some(ActivityLabel::new("viber", "call").unwrap()),
        }
    }

    #[test]
    fn uplink_only_segment() {
        let seg = FlowSegment {
            label: Some(ActivityLabel::new("viber", "call").unwrap()),
            window_index: 4,
            window_s: 0.5,
            frames: alloc::vec![frame(0.0, 100, Direction::Uplink), frame(0.1, 200, Direction::Uplink)],
        };
        let fv = featurize(&seg).unwrap();
        assert_eq!((fv.values[0], fv.values[1], fv.values[11]), (100.0, 200.0, 300.0));
        assert!(fv.values[12..24].iter().all(|&v| v == 0.0));
        assert!(fv.values[36..48].iter().all(|&v| v == 0.0));
        // Interarrival-uplink block from the single gap 0.1.
        assert_eq!(fv.values[24], 0.1);
        assert_eq!(fv.values[35], 0.1);
        assert_eq!(fv.window_index, 4);
        assert_eq!(fv.label, seg.label);
    }

    #[test]
    fn scaler_examples() {
        let rows: [&[f64]; 3] = [&[2.0, 5.0], &[4.0, 5.0], &[6.0, 5.0]];
        let sc = Scaler::fit(rows).unwrap();
        assert_eq!(sc.mean, [4.0, 5.0]);
        assert!(close(sc.std[0], 1.632993161855452, 1e-12));
        assert_eq!(sc.std[1], 0.0);
        let mut out = [0.0; 2];
        sc.transform_into(&[6.0, 123.0], &mut out).unwrap();
        assert!(close(out[0], 1.224744871391589, 1e-12));
        assert_eq!(out[1], 0.0);
        sc.transform_into(&[4.0, 5.0], &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0]);
        assert!(sc.transform_into(&[1.0], &mut [0.0]).is_err());
        let empty: [&[f64]; 0] = [];
        assert_eq!(Scaler::fit(empty), Err(Error::Empty("scaler fit matrix")));
    }
}
