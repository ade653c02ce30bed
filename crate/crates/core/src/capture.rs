//! Frame metadata records and the pre-classification frame filter.
//!
//! Only error-free data frames carry the activity signal: management and
//! control frames are dropped, as are retransmissions and frames whose check
//! sequence failed.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Class identity of an in-app activity. The app is the grouping key for
/// leave-one-app-out experiments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivityLabel {
    app: String,
    activity: String,
}

impl ActivityLabel {
    /// Both parts must be non-empty, lowercase and free of whitespace.
    pub fn new(app: impl Into<String>, activity: impl Into<String>) -> Result<Self> {
        let app = app.into();
        let activity = activity.into();
        for part in [&app, &activity] {
            if part.is_empty() {
                return Err(Error::InvalidLabel("empty label component".to_string()));
            }
            if part.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
                return Err(Error::InvalidLabel(part.clone()));
            }
        }
        Ok(Self { app, activity })
    }

    pub fn app(&self) -> &str {
        &self.app
    }

    pub fn activity(&self) -> &str {
        &self.activity
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.app, self.activity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    Data,
    Management,
    Control,
}

/// Side-channel metadata of one sniffed 802.11 frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRecord {
    /// Seconds since capture start.
    pub ts: f64,
    /// Frame length in bytes.
    pub len: u32,
    pub dir: Direction,
    pub ftype: FrameType,
    /// 802.11 retransmission flag.
    pub retry: bool,
    /// Frame check sequence passed.
    pub fcs_ok: bool,
    pub label: Option<ActivityLabel>,
}

impl CaptureRecord {
    /// Record-local invariants: a finite non-negative timestamp and a positive length.
    pub fn validate(&self, index: usize) -> Result<()> {
        if !self.ts.is_finite() || self.ts < 0.0 {
            return Err(Error::InvalidRecord {
                index,
                reason: "timestamp must be finite and non-negative",
            });
        }
        if self.len == 0 {
            return Err(Error::InvalidRecord {
                index,
                reason: "frame length must be at least 1",
            });
        }
        Ok(())
    }

    pub fn is_clean_data(&self) -> bool {
        self.ftype == FrameType::Data && !self.retry && self.fcs_ok
    }
}

/// Summary of a filtered capture.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaptureMeta {
    pub record_count: usize,
    pub dropped_mgmt_ctrl: usize,
    pub dropped_retry_or_fcs: usize,
    /// Span between the first and last surviving timestamp of each labeled
    /// stream, summed over streams.
    pub duration: f64,
    pub label_set: BTreeSet<ActivityLabel>,
}

/// Checks the per-record invariants and timestamp ordering.
///
/// Timestamps must be non-decreasing within each labeled stream, i.e. each
/// maximal run of consecutive records sharing the same label. A label change
/// starts a new stream whose clock may restart, which lets per-activity logs
/// be concatenated into one file.
pub fn validate_records(records: &[CaptureRecord]) -> Result<()> {
    for (i, rec) in records.iter().enumerate() {
        rec.validate(i)?;
        if i > 0 {
            let prev = &records[i - 1];
            if prev.label == rec.label && rec.ts < prev.ts {
                return Err(Error::DecreasingTimestamp { index: i });
            }
        }
    }
    Ok(())
}

/// Keeps exactly the clean data frames, preserving order.
pub fn filter_frames(records: &[CaptureRecord]) -> (Vec<CaptureRecord>, CaptureMeta) {
    let mut meta = CaptureMeta::default();
    let mut kept = Vec::with_capacity(records.len());
    for rec in records {
        if rec.ftype != FrameType::Data {
            meta.dropped_mgmt_ctrl += 1;
        } else if rec.retry || !rec.fcs_ok {
            meta.dropped_retry_or_fcs += 1;
        } else {
            kept.push(rec.clone());
        }
    }
    meta.record_count = kept.len();
    meta.duration = split_streams(&kept)
        .iter()
        .map(|s| s.last().map_or(0.0, |l| l.ts) - s.first().map_or(0.0, |f| f.ts))
        .sum();
    meta.label_set = kept.iter().filter_map(|r| r.label.clone()).collect();
    (kept, meta)
}

/// Splits records into labeled streams: maximal runs of consecutive records
/// carrying the same label.
pub fn split_streams(records: &[CaptureRecord]) -> Vec<&[CaptureRecord]> {
    let mut streams = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].label != records[start].label {
            if i > start {
                streams.push(&records[start..i]);
            }
            start = i;
        }
    }
    streams
}
