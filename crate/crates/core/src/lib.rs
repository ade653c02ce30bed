//! Fine-grained in-app activity classification from encrypted 802.11
//! side-channel metadata (frame lengths, timings and directions), with
//! rejection of never-trained activities by thresholding the classifier's
//! top softmax probability.
//!
//! The pipeline is: [`capture::filter_frames`] keeps error-free data frames,
//! [`segment::segment_streams`] cuts each labeled stream into fixed time
//! windows, [`features::featurize`] summarizes a window into 48 statistics,
//! [`dnn::train`] fits a tanh MLP, and [`openset::classify`] turns its
//! probabilities into a known-label-or-unknown verdict. [`eval`] holds the
//! metrics and the leave-one-app-out protocol; [`synth`] generates labeled
//! test traffic.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats and the command-line front end live in the
//! companion `inapp` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod capture;
pub mod dnn;
pub mod error;
pub mod eval;
pub mod features;
pub mod openset;
pub mod segment;
pub mod synth;

pub use capture::{filter_frames, ActivityLabel, CaptureMeta, CaptureRecord, Direction, FrameType};
pub use error::{Error, Result};
pub use features::{featurize, fit_scaler, FeatureVector, Scaler, FEATURE_DIM};
pub use segment::{segment_by_window, segment_streams, FlowSegment};

/// Filters, segments and featurizes a capture in one pass.
pub fn featurize_capture(records: &[CaptureRecord], window_s: f64) -> Result<alloc::vec::Vec<FeatureVector>> {
    let (kept, _) = filter_frames(records);
    segment_streams(&kept, window_s)?.iter().map(featurize).collect()
}
