//! Labeled synthetic frame streams with controllable per-activity statistics.
//!
//! Each direction is an independent arrival process (inter-arrival
//! distribution) carrying frame lengths from a length distribution truncated
//! to [`MIN_LEN`, `MAX_LEN`] bytes. Management/control frames and
//! retransmissions are added on top of the clean data stream, so filtering
//! recovers exactly the profile's data frames.

use alloc::format;
use alloc::vec::Vec;

use rand::distributions::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal};

use crate::capture::{ActivityLabel, CaptureRecord, Direction, FrameType};
use crate::dnn::rng_stream;
use crate::error::{Error, Result};

pub const MIN_LEN: u32 = 40;
pub const MAX_LEN: u32 = 1500;

/// Timestamps are quantized to this resolution (seconds).
pub const TS_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Frame length distribution, truncated to [`MIN_LEN`, `MAX_LEN`] and rounded
/// to whole bytes.
#[derive(Debug, Clone, PartialEq)]
pub enum LengthDist {
    LogNormal { mu: f64, sigma: f64 },
    Mixture(Vec<LogNormalComponent>),
    Discrete { values: Vec<u32>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapDist {
    Exponential { rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Mean of a lognormal truncated to [a, b].
fn truncated_lognormal_mean(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let (la, lb) = (libm::log(a), libm::log(b));
    let mass = normal_cdf((lb - mu) / sigma) - normal_cdf((la - mu) / sigma);
    let partial =
        normal_cdf((lb - mu - sigma * sigma) / sigma) - normal_cdf((la - mu - sigma * sigma) / sigma);
    libm::exp(mu + 0.5 * sigma * sigma) * partial / mass
}

fn truncated_mass(mu: f64, sigma: f64) -> f64 {
    let (la, lb) = (libm::log(f64::from(MIN_LEN)), libm::log(f64::from(MAX_LEN)));
    normal_cdf((lb - mu) / sigma) - normal_cdf((la - mu) / sigma)
}

fn check_lognormal(mu: f64, sigma: f64) -> Result<()> {
    if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidProfile(format!("lognormal(mu={mu}, sigma={sigma})")));
    }
    if truncated_mass(mu, sigma) < 1e-6 {
        return Err(Error::InvalidProfile(format!(
            "lognormal(mu={mu}, sigma={sigma}) has no mass in [{MIN_LEN}, {MAX_LEN}]"
        )));
    }
    Ok(())
}

fn check_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidProfile(format!("mixture weight {w}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::InvalidProfile("mixture weights sum to zero".into()));
    }
    Ok(())
}

fn sample_truncated(mu: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let dist = LogNormal::new(mu, sigma).expect("validated");
    let (lo, hi) = (f64::from(MIN_LEN), f64::from(MAX_LEN));
    loop {
        let x = dist.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}

fn pick(weights: impl Iterator<Item = f64> + Clone, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

impl LengthDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            LengthDist::LogNormal { mu, sigma } => check_lognormal(*mu, *sigma),
            LengthDist::Mixture(cs) => {
                if cs.is_empty() {
                    return Err(Error::InvalidProfile("empty mixture".into()));
                }
                check_weights(cs.iter().map(|c| c.weight))?;
                cs.iter().try_for_each(|c| check_lognormal(c.mu, c.sigma))
            }
            LengthDist::Discrete { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(Error::InvalidProfile("discrete values/weights mismatch".into()));
                }
                if let Some(v) = values.iter().find(|v| !(MIN_LEN..=MAX_LEN).contains(v)) {
                    return Err(Error::InvalidProfile(format!("length {v} outside [{MIN_LEN}, {MAX_LEN}]")));
                }
                check_weights(weights.iter().copied())
            }
        }
    }

    /// Analytic mean of the truncated (continuous) distribution.
    pub fn mean(&self) -> f64 {
        let (a, b) = (f64::from(MIN_LEN), f64::from(MAX_LEN));
        match self {
            LengthDist::LogNormal { mu, sigma } => truncated_lognormal_mean(*mu, *sigma, a, b),
            LengthDist::Mixture(cs) => {
                let total: f64 = cs.iter().map(|c| c.weight).sum();
                cs.iter()
                    .map(|c| c.weight / total * truncated_lognormal_mean(c.mu, c.sigma, a, b))
                    .sum()
            }
            LengthDist::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(&v, w)| f64::from(v) * w / total).sum()
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let x = match self {
            LengthDist::LogNormal { mu, sigma } => sample_truncated(*mu, *sigma, rng),
            LengthDist::Mixture(cs) => {
                let c = cs[pick(cs.iter().map(|c| c.weight), rng)];
                sample_truncated(c.mu, c.sigma, rng)
            }
            LengthDist::Discrete { values, weights } => {
                return values[pick(weights.iter().copied(), rng)];
            }
        };
        (libm::round(x) as u32).clamp(MIN_LEN, MAX_LEN)
    }
}

impl GapDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GapDist::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            GapDist::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProfile(format!("{self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            GapDist::Exponential { rate } => 1.0 / rate,
            GapDist::LogNormal { mu, sigma } => libm::exp(mu + 0.5 * sigma * sigma),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            GapDist::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            GapDist::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
        }
    }
}

/// Statistical description of one labeled activity.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityProfile {
    pub label: ActivityLabel,
    pub uplink_len: LengthDist,
    pub downlink_len: LengthDist,
    pub uplink_gap: GapDist,
    pub downlink_gap: GapDist,
    /// Probability that a data frame is accompanied by a management or
    /// control frame.
    pub mgmt_ctrl_rate: f64,
    /// Probability that a data frame is followed by a retransmitted copy.
    pub retry_rate: f64,
}

impl ActivityProfile {
    pub fn validate(&self) -> Result<()> {
        self.uplink_len.validate()?;
        self.downlink_len.validate()?;
        self.uplink_gap.validate()?;
        self.downlink_gap.validate()?;
        for (name, r) in [("mgmt_ctrl_rate", self.mgmt_ctrl_rate), ("retry_rate", self.retry_rate)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidProfile(format!("{name} {r} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// Expected share of uplink data frames, implied by the two arrival rates.
    pub fn uplink_fraction(&self) -> f64 {
        let up = 1.0 / self.uplink_gap.mean();
        let down = 1.0 / self.downlink_gap.mean();
        up / (up + down)
    }
}

fn quantize(t: f64) -> f64 {
    libm::round(t / TS_RESOLUTION) * TS_RESOLUTION
}

fn arrivals(gap: &GapDist, len: &LengthDist, duration: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, u32)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > duration {
            return out;
        }
        out.push((quantize(t).min(duration), len.sample(rng)));
    }
}

/// Time-ordered frame stream of one activity over `(0, duration]`.
pub fn generate_capture(profile: &ActivityProfile, duration: f64, seed: u64) -> Result<Vec<CaptureRecord>> {
    profile.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidProfile(format!("duration {duration}")));
    }
    let mut up_rng = rng_stream(seed, 11);
    let mut down_rng = rng_stream(seed, 12);
    let mut noise_rng = rng_stream(seed, 13);
    let up = arrivals(&profile.uplink_gap, &profile.uplink_len, duration, &mut up_rng);
    let down = arrivals(&profile.downlink_gap, &profile.downlink_len, duration, &mut down_rng);

    let mut data: Vec<(f64, u32, Direction)> = up
        .into_iter()
        .map(|(t, l)| (t, l, Direction::Uplink))
        .chain(down.into_iter().map(|(t, l)| (t, l, Direction::Downlink)))
        .collect();
    // Stable: uplink first on equal timestamps.
    data.sort_by(|a, b| a.0.total_cmp(&b.0));

    let label = Some(profile.label.clone());
    let mut out = Vec::with_capacity(data.len() * 2);
    for (ts, len, dir) in data {
        let frame = CaptureRecord {
            ts,
            len,
            dir,
            ftype: FrameType::Data,
            retry: false,
            fcs_ok: true,
            label: label.clone(),
        };
        if noise_rng.gen::<f64>() < profile.mgmt_ctrl_rate {
            let mgmt = noise_rng.gen::<bool>();
            out.push(CaptureRecord {
                len: noise_rng.gen_range(MIN_LEN..=300),
                ftype: if mgmt { FrameType::Management } else { FrameType::Control },
                dir: if noise_rng.gen::<bool>() { Direction::Uplink } else { Direction::Downlink },
                ..frame.clone()
            });
        }
        let retry = noise_rng.gen::<f64>() < profile.retry_rate;
        let corrupt = noise_rng.gen::<bool>();
        out.push(frame.clone());
        if retry {
            out.push(CaptureRecord { retry: true, fcs_ok: !corrupt, ..frame });
        }
    }
    Ok(out)
}

/// Apps of the `paperlike-8` fixture, with their activity counts.
pub const PAPERLIKE_APPS: [(&str, usize); 8] = [
    ("facebook", 6),
    ("instagram", 5),
    ("youtube", 4),
    ("whatsapp", 4),
    ("viber", 4),
    ("gmail", 4),
    ("skype", 5),
    ("messenger", 5),
];

/// App pairs whose activity profiles deliberately overlap.
pub const PAPERLIKE_OVERLAPS: [(&str, &str); 2] = [("instagram", "facebook"), ("skype", "youtube")];

const PAPERLIKE_SEED: u64 = 0x5eed_8a55;

/// Canonical small / medium / large frame sizes shared by every activity.
const SIZE_MODES: [(f64, f64); 3] = [(70.0, 0.15), (420.0, 0.35), (1380.0, 0.04)];

fn mixture(weights: [f64; 3], shift: f64) -> LengthDist {
    LengthDist::Mixture(
        SIZE_MODES
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(i, (&(m, s), weight))| {
                // The full-size mode stays pinned near the MTU.
                let shift = if i + 1 == SIZE_MODES.len() { 0.0 } else { shift };
                LogNormalComponent { weight, mu: libm::log(m) + shift, sigma: s }
            })
            .collect(),
    )
}

fn random_profile_params(rng: &mut ChaCha8Rng) -> [f64; 10] {
    let mut p = [0.0; 10];
    // Up/down mixture weights, a size shift, and log arrival rates.
    for v in p.iter_mut().take(6) {
        *v = 0.05 + rng.gen::<f64>();
    }
    p[6] = rng.gen_range(-0.25..0.25);
    p[7] = rng.gen_range(-0.25..0.25);
    p[8] = rng.gen_range(libm::log(60.0)..libm::log(400.0));
    p[9] = rng.gen_range(libm::log(60.0)..libm::log(400.0));
    p
}

fn perturb(p: &[f64; 10], scale: f64, rng: &mut ChaCha8Rng) -> [f64; 10] {
    let mut q = *p;
    for v in q.iter_mut().take(6) {
        *v = (*v * (1.0 + scale * rng.gen_range(-1.0..1.0))).max(0.02);
    }
    for v in q.iter_mut().skip(6) {
        *v += scale * rng.gen_range(-0.5..0.5);
    }
    q
}

fn profile_from(label: ActivityLabel, p: &[f64; 10]) -> ActivityProfile {
    ActivityProfile {
        label,
        uplink_len: mixture([p[0], p[1], p[2]], p[6]),
        downlink_len: mixture([p[3], p[4], p[5]], p[7]),
        uplink_gap: GapDist::Exponential { rate: libm::exp(p[8]) },
        downlink_gap: GapDist::Exponential { rate: libm::exp(p[9]) },
        mgmt_ctrl_rate: 0.1,
        retry_rate: 0.05,
    }
}

/// The shipped `paperlike-8` fixture: eight synthetic apps with four to six
/// activities each. Activities of the pairs in [`PAPERLIKE_OVERLAPS`] are
/// close to their partner's; every other activity is drawn independently.
pub fn paperlike8() -> Vec<ActivityProfile> {
    let mut rng = rng_stream(PAPERLIKE_SEED, 0);
    let mut params: Vec<(usize, [f64; 10])> = Vec::new();
    let mut profiles = Vec::new();
    for (app_idx, &(app, n)) in PAPERLIKE_APPS.iter().enumerate() {
        let partner = PAPERLIKE_OVERLAPS
            .iter()
            .find(|(a, _)| *a == app)
            .and_then(|(_, b)| PAPERLIKE_APPS.iter().position(|(x, _)| x == b));
        for k in 0..n {
            let base = partner.and_then(|pi| params.iter().filter(|(a, _)| *a == pi).nth(k).map(|(_, p)| *p));
            let p = match base {
                Some(b) => perturb(&b, 0.6, &mut rng),
                None => random_profile_params(&mut rng),
            };
            params.push((app_idx, p));
            let label = ActivityLabel::new(app, format!("activity_{}", k + 1)).expect("valid fixture label");
            profiles.push(profile_from(label, &p));
        }
    }
    profiles
}

/// Generates every profile in turn, each stream starting at time 0, seeded
/// per activity from `seed`.
pub fn generate_all(profiles: &[ActivityProfile], duration: f64, seed: u64) -> Result<Vec<CaptureRecord>> {
    let mut out = Vec::new();
    for (i, p) in profiles.iter().enumerate() {
        let s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
        out.extend(generate_capture(p, duration, s).map_err(|e| match e {
            Error::InvalidProfile(m) => Error::InvalidProfile(format!("{}: {m}", p.label)),
            other => other,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::filter_frames;

    fn simple(retry: f64, mgmt: f64) -> ActivityProfile {
        ActivityProfile {
            label: ActivityLabel::new("gmail", "send_mail").unwrap(),
            uplink_len: LengthDist::LogNormal { mu: 5.5, sigma: 0.6 },
            downlink_len: LengthDist::Discrete { values: alloc::vec![66, 1500], weights: alloc::vec![1.0, 3.0] },
            uplink_gap: GapDist::Exponential { rate: 40.0 },
            downlink_gap: GapDist::LogNormal { mu: -4.0, sigma: 0.5 },
            mgmt_ctrl_rate: mgmt,
            retry_rate: retry,
        }
    }

    #[test]
    fn clean_profile_filters_nothing() {
        let recs = generate_capture(&simple(0.0, 0.0), 20.0, 1).unwrap();
        let (kept, meta) = filter_frames(&recs);
        assert_eq!(kept.len(), recs.len());
        assert_eq!(meta.dropped_mgmt_ctrl + meta.dropped_retry_or_fcs, 0);
    }

    #[test]
    fn deterministic_and_bounded() {
        let p = simple(0.1, 0.2);
        let a = generate_capture(&p, 10.0, 5).unwrap();
        assert_eq!(a, generate_capture(&p, 10.0, 5).unwrap());
        assert_ne!(a, generate_capture(&p, 10.0, 6).unwrap());
        assert!(a.windows(2).all(|w| w[0].ts <= w[1].ts));
        assert!(a.iter().all(|r| r.ts >= 0.0 && r.ts <= 10.0));
        assert!(a.iter().all(|r| (MIN_LEN..=MAX_LEN).contains(&r.len)));
        let (kept, meta) = filter_frames(&a);
        assert!(meta.dropped_mgmt_ctrl > 0 && meta.dropped_retry_or_fcs > 0);
        assert!(kept.iter().all(CaptureRecord::is_clean_data));
    }

    #[test]
    fn invalid_profiles() {
        let mut p = simple(0.0, 0.0);
        p.retry_rate = 1.0;
        assert!(p.validate().is_err());
        let mut p = simple(0.0, 0.0);
        p.uplink_len = LengthDist::LogNormal { mu: 20.0, sigma: 0.1 };
        assert!(p.validate().is_err());
        let mut p = simple(0.0, 0.0);
        p.uplink_gap = GapDist::Exponential { rate: 0.0 };
        assert!(p.validate().is_err());
        assert!(generate_capture(&simple(0.0, 0.0), 0.0, 1).is_err());
    }

    #[test]
    fn paperlike_fixture_shape() {
        let ps = paperlike8();
        let total: usize = PAPERLIKE_APPS.iter().map(|(_, n)| n).sum();
        assert_eq!(ps.len(), total);
        assert!(ps.iter().all(|p| p.validate().is_ok()));
        assert_eq!(ps, paperlike8());
        let f = ps[0].uplink_fraction();
        assert!(f > 0.0 && f < 1.0);
    }
}
