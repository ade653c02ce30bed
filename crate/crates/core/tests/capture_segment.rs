use inapp_core::capture::{split_streams, validate_records};
use inapp_core::synth::{generate_capture, paperlike8};
use inapp_core::{
    filter_frames, fit_scaler, segment_by_window, segment_streams, ActivityLabel, CaptureRecord, Direction,
    FeatureVector, FrameType, Scaler, FEATURE_DIM,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<CaptureRecord> {
    let labels = [None, Some(ActivityLabel::new("gmail", "send").unwrap())];
    let mut t = 0.0;
    (0..n)
        .map(|i| {
            t += rng.gen_range(0.0..0.01);
            CaptureRecord {
                ts: t,
                len: rng.gen_range(1..2000),
                dir: if rng.gen_bool(0.5) { Direction::Uplink } else { Direction::Downlink },
                ftype: match rng.gen_range(0..5) {
                    0 => FrameType::Management,
                    1 => FrameType::Control,
                    _ => FrameType::Data,
                },
                retry: rng.gen_bool(0.1),
                fcs_ok: rng.gen_bool(0.9),
                label: labels[(i / 100) % 2].clone(),
            }
        })
        .collect()
}

#[test]
fn filter_matches_predicate_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let recs = random_records(&mut rng, 1000);
    let (kept, meta) = filter_frames(&recs);
    let want: Vec<CaptureRecord> = recs
        .iter()
        .filter(|r| matches!(r.ftype, FrameType::Data) && !r.retry && r.fcs_ok)
        .cloned()
        .collect();
    assert_eq!(kept, want);
    let mgmt = recs.iter().filter(|r| r.ftype != FrameType::Data).count();
    assert_eq!(meta.dropped_mgmt_ctrl, mgmt);
    assert_eq!(kept.len() + meta.dropped_mgmt_ctrl + meta.dropped_retry_or_fcs, recs.len());

    let (again, meta2) = filter_frames(&kept);
    assert_eq!(again, kept);
    assert_eq!((meta2.dropped_mgmt_ctrl, meta2.dropped_retry_or_fcs), (0, 0));
}

#[test]
fn concatenated_activity_logs_restart_the_clock() {
    let ps = paperlike8();
    let mut recs = generate_capture(&ps[0], 3.0, 1).unwrap();
    recs.extend(generate_capture(&ps[1], 3.0, 2).unwrap());
    validate_records(&recs).unwrap();
    let (kept, meta) = filter_frames(&recs);
    assert_eq!(split_streams(&kept).len(), 2);
    assert_eq!(meta.label_set.len(), 2);
    let segs = segment_streams(&kept, 0.5).unwrap();
    assert_eq!(segs.iter().map(|s| s.frames.len()).sum::<usize>(), kept.len());
    assert!(segment_by_window(&kept, 0.5).is_err(), "mixed labels in one stream");
}

fn stream(seed: u64, duration: f64) -> Vec<CaptureRecord> {
    let p = &paperlike8()[(seed % 37) as usize];
    filter_frames(&generate_capture(p, duration, seed).unwrap()).0
}

fn check_partition(recs: &[CaptureRecord], w: f64) -> usize {
    let segs = segment_by_window(recs, w).unwrap();
    let flat: Vec<CaptureRecord> = segs.iter().flat_map(|s| s.frames.iter().cloned()).collect();
    assert_eq!(flat, recs, "segments must partition the stream in order");
    let t0 = recs.first().map_or(0.0, |r| r.ts);
    for pair in segs.windows(2) {
        assert!(pair[0].window_index < pair[1].window_index);
    }
    for s in &segs {
        assert!(!s.frames.is_empty());
        let k = s.window_index as f64;
        for f in &s.frames {
            let off = f.ts - t0;
            assert!(k * w <= off && off < (k + 1.0) * w, "frame at {off} outside window {k} of {w}");
        }
    }
    segs.len()
}

#[test]
fn sixty_second_stream_at_table_windows() {
    let recs = stream(3, 60.0);
    assert!(recs.len() > 1000);
    let mut last = usize::MAX;
    for w in [0.02, 0.05, 0.2, 0.5] {
        let n = check_partition(&recs, w);
        assert!(n <= last, "{n} segments at {w} s after {last}");
        last = n;
    }
}

proptest! {
    #[test]
    fn partition_holds_for_any_window(seed in 0u64..500, w in 0.001f64..5.0) {
        let recs = stream(seed, 4.0);
        check_partition(&recs, w);
    }

    #[test]
    fn nested_windows_never_add_segments(seed in 0u64..500, a in 1i32..8, b in 1i32..5) {
        let recs = stream(seed, 4.0);
        let fine = 2f64.powi(-a);
        let coarse = fine * 2f64.powi(b);
        prop_assert!(check_partition(&recs, coarse) <= check_partition(&recs, fine));
    }
}

fn scaler_rows(rng: &mut ChaCha8Rng, constant_cols: &[usize]) -> Vec<FeatureVector> {
    let scales: Vec<f64> = (0..FEATURE_DIM).map(|_| 10f64.powi(rng.gen_range(-3..4))).collect();
    (0..500)
        .map(|_| {
            let mut values = [0.0; FEATURE_DIM];
            for (j, v) in values.iter_mut().enumerate() {
                *v = if constant_cols.contains(&j) {
                    scales[j] * 0.37
                } else {
                    scales[j] * (rng.gen_range(-1.0..1.0) + 3.0)
                };
            }
            FeatureVector { values, label: None, window_index: 0 }
        })
        .collect()
}

#[test]
fn scaler_standardizes_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..20 {
        let constant: Vec<usize> = (0..FEATURE_DIM).filter(|_| rng.gen_bool(0.15)).collect();
        let rows = scaler_rows(&mut rng, &constant);
        let sc: Scaler = fit_scaler(&rows).unwrap();
        let out: Vec<FeatureVector> = rows.iter().map(|r| sc.apply(r).unwrap()).collect();
        for j in 0..FEATURE_DIM {
            let col: Vec<f64> = out.iter().map(|r| r.values[j]).collect();
            if constant.contains(&j) {
                assert!(col.iter().all(|&v| v == 0.0), "trial {trial} col {j}");
                assert_eq!(sc.std[j], 0.0);
            } else {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                assert!(mean.abs() < 1e-9, "trial {trial} col {j} mean {mean}");
                assert!((sd - 1.0).abs() < 1e-9, "trial {trial} col {j} sd {sd}");
            }
        }
    }
}
