//! Fixed-duration time windows over labeled frame streams.

use alloc::vec::Vec;

use crate::capture::{split_streams, ActivityLabel, CaptureRecord};
use crate::error::{Error, Result};

/// All data frames of one labeled stream falling into one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSegment {
    pub label: Option<ActivityLabel>,
    pub window_index: u64,
    pub window_s: f64,
    pub frames: Vec<CaptureRecord>,
}

/// Index of the half-open window `[k*w, (k+1)*w)` containing `offset`.
///
/// The floor is corrected against the boundary products so the window
/// invariant holds exactly in floating point.
fn window_of(offset: f64, window_s: f64) -> u64 {
    let mut k = libm::floor(offset / window_s);
    if k < 0.0 {
        k = 0.0;
    }
    while k > 0.0 && k * window_s > offset {
        k -= 1.0;
    }
    while (k + 1.0) * window_s <= offset {
        k += 1.0;
    }
    k as u64
}

/// Segments one labeled stream into consecutive non-overlapping windows
/// anchored at its first frame. Empty windows are omitted.
pub fn segment_by_window(records: &[CaptureRecord], window_s: f64) -> Result<Vec<FlowSegment>> {
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(Error::InvalidWindow(window_s));
    }
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    if records.iter().any(|r| r.label != first.label) {
        return Err(Error::MixedLabels);
    }
    let t0 = first.ts;
    let mut segments: Vec<FlowSegment> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let offset = rec.ts - t0;
        if offset < 0.0 {
            return Err(Error::DecreasingTimestamp { index: i });
        }
        let k = window_of(offset, window_s);
        match segments.last_mut() {
            Some(seg) if seg.window_index == k => seg.frames.push(rec.clone()),
            Some(seg) if seg.window_index > k => {
                return Err(Error::DecreasingTimestamp { index: i })
            }
            _ => segments.push(FlowSegment {
                label: first.label.clone(),
                window_index: k,
                window_s,
                frames: alloc::vec![rec.clone()],
            }),
        }
    }
    Ok(segments)
}

/// Splits a filtered capture into labeled streams and segments each one.
pub fn segment_streams(records: &[CaptureRecord], window_s: f64) -> Result<Vec<FlowSegment>> {
    let mut out = Vec::new();
    for stream in split_streams(records) {
        out.extend(segment_by_window(stream, window_s)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{Direction, FrameType};

    fn stream(ts: &[f64]) -> Vec<CaptureRecord> {
        ts.iter()
            .map(|&ts| CaptureRecord {
                ts,
                len: 60,
                dir: Direction::Downlink,
                ftype: FrameType::Data,
                retry: false,
                fcs_ok: true,
                label: Some(ActivityLabel::new("skype", "video_call").unwrap()),
            })
            .collect()
    }

    #[test]
    fn boundary_arithmetic() {
        let segs = segment_by_window(&stream(&[0.0, 0.1, 0.3, 0.6]), 0.5).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].window_index, segs[0].frames.len()), (0, 3));
        assert_eq!((segs[1].window_index, segs[1].frames.len()), (1, 1));
    }

    #[test]
    fn empty_windows_dropped() {
        let segs = segment_by_window(&stream(&[0.0, 1.7]), 0.5).unwrap();
        let idx: Vec<u64> = segs.iter().map(|s| s.window_index).collect();
        assert_eq!(idx, [0, 3]);
    }

    #[test]
    fn boundary_frame_goes_to_later_window() {
        let segs = segment_by_window(&stream(&[2.0, 2.5, 3.0]), 0.5).unwrap();
        let idx: Vec<u64> = segs.iter().map(|s| s.window_index).collect();
        assert_eq!(idx, [0, 1, 2]);
    }

    #[test]
    fn anchored_at_first_frame() {
        let a = segment_by_window(&stream(&[0.0, 0.4, 0.9]), 0.5).unwrap();
        let b = segment_by_window(&stream(&[10.0, 10.4, 10.9]), 0.5).unwrap();
        let ia: Vec<u64> = a.iter().map(|s| s.window_index).collect();
        let ib: Vec<u64> = b.iter().map(|s| s.window_index).collect();
        assert_eq!(ia, ib);
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(
            segment_by_window(&stream(&[0.0]), 0.0),
            Err(Error::InvalidWindow(0.0))
        );
        assert!(segment_by_window(&stream(&[0.0]), -1.0).is_err());
        let mut mixed = stream(&[0.0, 0.1]);
        mixed[1].label = None;
        assert_eq!(segment_by_window(&mixed, 0.5), Err(Error::MixedLabels));
        assert!(segment_by_window(&[], 0.5).unwrap().is_empty());
    }

    #[test]
    fn float_boundaries_respect_invariant() {
        let ts: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        for w in [0.5, 0.2, 0.05, 0.02, 0.1, 0.3] {
            for seg in segment_by_window(&stream(&ts), w).unwrap() {
                let k = seg.window_index as f64;
                for f in &seg.frames {
                    assert!(k * w <= f.ts && f.ts < (k + 1.0) * w, "w={w} ts={}", f.ts);
                }
            }
        }
    }
}
