//! TOML documents for model hyperparameters and synthetic activity profiles.
//!
//! Model config keys mirror [`ModelConfig`]; any key left out keeps its
//! default:
//!
//! ```toml
//! hidden_dims = [1024, 512, 256, 128]
//! dropout_rate = 0.3
//! learning_rate = 0.001
//! batch_size = 2048
//! epochs = 100
//! seed = 0
//! ```
//!
//! A profile document is a list of `[[activity]]` tables:
//!
//! ```toml
//! [[activity]]
//! app = "gmail"
//! activity = "send_mail"
//! mgmt_ctrl_rate = 0.1
//! retry_rate = 0.05
//! uplink_len = { family = "lognormal", mu = 5.5, sigma = 0.6 }
//! downlink_len = { family = "discrete", values = [66, 1500], weights = [1.0, 3.0] }
//! uplink_gap = { family = "exponential", rate = 40.0 }
//! downlink_gap = { family = "lognormal", mu = -4.0, sigma = 0.5 }
//! ```
//!
//! Length families: `lognormal`, `mixture` (`components = [{weight, mu, sigma}, ..]`)
//! and `discrete`. Gap families: `exponential` and `lognormal`.

use std::path::Path;

use inapp_core::dnn::ModelConfig;
use inapp_core::synth::{ActivityProfile, GapDist, LengthDist, LogNormalComponent};
use inapp_core::ActivityLabel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigDoc {
    pub input_dim: Option<usize>,
    pub hidden_dims: Option<Vec<usize>>,
    pub hidden_activation: Option<String>,
    pub dropout_rate: Option<f64>,
    pub learning_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

impl ModelConfigDoc {
    pub fn resolve(self) -> Result<ModelConfig> {
        if let Some(act) = &self.hidden_activation {
            if act != "tanh" {
                return Err(Error::Config(format!("unsupported hidden_activation {act:?}; only \"tanh\"")));
            }
        }
        let d = ModelConfig::default();
        let cfg = ModelConfig {
            input_dim: self.input_dim.unwrap_or(d.input_dim),
            hidden_dims: self.hidden_dims.unwrap_or(d.hidden_dims),
            output_dim: d.output_dim,
            dropout_rate: self.dropout_rate.unwrap_or(d.dropout_rate),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            adam_beta1: self.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: self.adam_beta2.unwrap_or(d.adam_beta2),
            adam_epsilon: self.adam_epsilon.unwrap_or(d.adam_epsilon),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            seed: self.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_model_config(text: &str, path: &Path) -> Result<ModelConfig> {
    let doc: ModelConfigDoc = toml::from_str(text).map_err(|e| Error::format(path, e))?;
    doc.resolve().map_err(|e| Error::format(path, e))
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_config(&text, path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum LengthDoc {
    Lognormal { mu: f64, sigma: f64 },
    Mixture { components: Vec<ComponentDoc> },
    Discrete { values: Vec<u32>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    weight: f64,
    mu: f64,
    sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum GapDoc {
    Exponential { rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    app: String,
    activity: String,
    uplink_len: LengthDoc,
    downlink_len: LengthDoc,
    uplink_gap: GapDoc,
    downlink_gap: GapDoc,
    #[serde(default)]
    mgmt_ctrl_rate: f64,
    #[serde(default)]
    retry_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfilesDoc {
    activity: Vec<ProfileDoc>,
}

impl From<LengthDoc> for LengthDist {
    fn from(d: LengthDoc) -> Self {
        match d {
            LengthDoc::Lognormal { mu, sigma } => LengthDist::LogNormal { mu, sigma },
            LengthDoc::Mixture { components } => LengthDist::Mixture(
                components
                    .into_iter()
                    .map(|c| LogNormalComponent { weight: c.weight, mu: c.mu, sigma: c.sigma })
                    .collect(),
            ),
            LengthDoc::Discrete { values, weights } => LengthDist::Discrete { values, weights },
        }
    }
}

impl From<&LengthDist> for LengthDoc {
    fn from(d: &LengthDist) -> Self {
        match d {
            LengthDist::LogNormal { mu, sigma } => LengthDoc::Lognormal { mu: *mu, sigma: *sigma },
            LengthDist::Mixture(cs) => LengthDoc::Mixture {
                components: cs
                    .iter()
                    .map(|c| ComponentDoc { weight: c.weight, mu: c.mu, sigma: c.sigma })
                    .collect(),
            },
            LengthDist::Discrete { values, weights } => {
                LengthDoc::Discrete { values: values.clone(), weights: weights.clone() }
            }
        }
    }
}

impl From<GapDoc> for GapDist {
    fn from(d: GapDoc) -> Self {
        match d {
            GapDoc::Exponential { rate } => GapDist::Exponential { rate },
            GapDoc::Lognormal { mu, sigma } => GapDist::LogNormal { mu, sigma },
        }
    }
}

impl From<&GapDist> for GapDoc {
    fn from(d: &GapDist) -> Self {
        match *d {
            GapDist::Exponential { rate } => GapDoc::Exponential { rate },
            GapDist::LogNormal { mu, sigma } => GapDoc::Lognormal { mu, sigma },
        }
    }
}

pub fn parse_profiles(text: &str, path: &Path) -> Result<Vec<ActivityProfile>> {
    let doc: ProfilesDoc = toml::from_str(text).map_err(|e| Error::format(path, e))?;
    doc.activity
        .into_iter()
        .map(|p| {
            let label = ActivityLabel::new(p.app, p.activity)?;
            let profile = ActivityProfile {
                label,
                uplink_len: p.uplink_len.into(),
                downlink_len: p.downlink_len.into(),
                uplink_gap: p.uplink_gap.into(),
                downlink_gap: p.downlink_gap.into(),
                mgmt_ctrl_rate: p.mgmt_ctrl_rate,
                retry_rate: p.retry_rate,
            };
            profile.validate()?;
            Ok(profile)
        })
        .collect::<inapp_core::Result<Vec<_>>>()
        .map_err(|e| Error::format(path, e))
}

pub fn load_profiles(path: &Path) -> Result<Vec<ActivityProfile>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profiles(&text, path)
}

pub fn profiles_to_toml(profiles: &[ActivityProfile]) -> String {
    let doc = ProfilesDoc {
        activity: profiles
            .iter()
            .map(|p| ProfileDoc {
                app: p.label.app().to_string(),
                activity: p.label.activity().to_string(),
                uplink_len: (&p.uplink_len).into(),
                downlink_len: (&p.downlink_len).into(),
                uplink_gap: (&p.uplink_gap).into(),
                downlink_gap: (&p.downlink_gap).into(),
                mgmt_ctrl_rate: p.mgmt_ctrl_rate,
                retry_rate: p.retry_rate,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("profiles serialize")
}
