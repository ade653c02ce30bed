//! The `inapp` command line.
//!
//! Exit status: 0 on success, 1 for bad arguments or inputs, 2 for internal
//! failures (divergence, non-finite activations, panics).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inapp_core::dnn::{train, ModelConfig};
use inapp_core::eval::{assemble_loao, dataset_apps, evaluate, loao_run, TauPolicy};
use inapp_core::openset::{confidence_histogram, predict, sweep_threshold, uniform_grid, DEFAULT_THRESHOLD};
use inapp_core::synth::{generate_all, paperlike8, ActivityProfile};
use inapp_core::{filter_frames, segment_streams, ActivityLabel, FeatureVector};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fsio::{with_suffix, write_atomic};
use crate::manifest::RunManifest;
use crate::{artifact, config, featcsv, framelog, reports};

#[derive(Debug, Parser)]
#[command(name = "inapp", version, about = "In-app activity classification from 802.11 frame metadata")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labeled synthetic frame logs from activity profiles.
    Synth(SynthArgs),
    /// Filter, segment and featurize frame logs into a feature CSV.
    Featurize(FeaturizeArgs),
    /// Train a model on a labeled feature CSV.
    Train(TrainArgs),
    /// Score the segments of frame logs with a trained model.
    Classify(ClassifyArgs),
    /// Score labeled known and unknown feature sets.
    Evaluate(EvaluateArgs),
    /// Leave-one-app-out noise detection experiment.
    Loao(LoaoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    #[value(name = "paperlike-8")]
    Paperlike8,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Profile document (`[[activity]]` tables).
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub config: Option<PathBuf>,
    /// Built-in profile set.
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
    /// Keep only these apps (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub apps: Vec<String>,
    /// Seconds of traffic per activity.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the resolved profiles as TOML.
    #[arg(long)]
    pub dump_profiles: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Frame logs; each file is segmented on its own.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub window_s: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled feature CSV.
    pub features: PathBuf,
    /// Model config (TOML); missing keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-epoch metrics CSV [default: <output>.report.csv].
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Frame logs to score.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub window_s: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV of trained classes, labeled.
    #[arg(long)]
    pub known: PathBuf,
    /// Feature CSV of never-trained activities.
    #[arg(long)]
    pub unknown: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
    /// Output prefix: writes `<prefix>.summary.txt`, `.per_class.csv`,
    /// `.histogram.csv` and, with `--unknown`, `.sweep.csv`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TauPolicyArg {
    Fixed,
    Sweep,
}

#[derive(Debug, Args)]
pub struct LoaoArgs {
    /// Labeled feature CSV covering every app.
    pub features: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = TauPolicyArg::Fixed)]
    pub tau_policy: TauPolicyArg,
    /// Threshold for the fixed policy.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
    /// Output prefix: writes `<prefix>.table.csv`, `.misclass.csv` and
    /// `.summary.txt`.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                2
            } else {
                1
            }
        }
        Err(_) => 2,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let (mut manifest, primary) = match cli.command {
        Command::Synth(a) => synth_cmd(a)?,
        Command::Featurize(a) => featurize_cmd(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Classify(a) => classify_cmd(a)?,
        Command::Evaluate(a) => evaluate_cmd(a)?,
        Command::Loao(a) => loao_cmd(a)?,
    };
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    manifest.write_beside(&primary)?;
    Ok(())
}

fn check_window(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("--window-s must be a positive number, got {w}")))
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Config(format!("--threshold must be in [0, 1], got {t}")))
    }
}

fn model_config(path: Option<&Path>, seed: Option<u64>) -> Result<ModelConfig> {
    let mut cfg = match path {
        Some(p) => config::load_model_config(p)?,
        None => ModelConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn config_json(cfg: &ModelConfig) -> serde_json::Value {
    json!({
        "input_dim": cfg.input_dim,
        "hidden_dims": cfg.hidden_dims,
        "dropout_rate": cfg.dropout_rate,
        "learning_rate": cfg.learning_rate,
        "adam_beta1": cfg.adam_beta1,
        "adam_beta2": cfg.adam_beta2,
        "adam_epsilon": cfg.adam_epsilon,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "seed": cfg.seed,
    })
}

/// Filters, segments and featurizes each log separately, in argument order.
pub fn featurize_logs(inputs: &[PathBuf], window_s: f64) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::new();
    for path in inputs {
        let records = framelog::read_frame_log(path)?;
        let (kept, meta) = filter_frames(&records);
        log::info!(
            "{}: kept {} data frames, dropped {} mgmt/ctrl and {} retry/bad-FCS",
            path.display(),
            meta.record_count,
            meta.dropped_mgmt_ctrl,
            meta.dropped_retry_or_fcs
        );
        for seg in segment_streams(&kept, window_s)? {
            out.push(inapp_core::featurize(&seg)?);
        }
    }
    Ok(out)
}

fn synth_cmd(a: SynthArgs) -> Result<(RunManifest, PathBuf)> {
    if !(a.duration.is_finite() && a.duration > 0.0) {
        return Err(Error::Config(format!("--duration must be positive, got {}", a.duration)));
    }
    let mut profiles: Vec<ActivityProfile> = match (&a.config, a.fixture) {
        (Some(p), _) => config::load_profiles(p)?,
        (None, Some(Fixture::Paperlike8)) => paperlike8(),
        (None, None) => unreachable!("clap requires a profile source"),
    };
    if !a.apps.is_empty() {
        for app in &a.apps {
            if !profiles.iter().any(|p| p.label.app() == app) {
                return Err(Error::Config(format!("--apps: no profile for app {app:?}")));
            }
        }
        profiles.retain(|p| a.apps.iter().any(|x| x == p.label.app()));
    }
    let records = generate_all(&profiles, a.duration, a.seed)?;
    let mut buf = Vec::new();
    framelog::write_frame_log(&mut buf, &records).map_err(|e| Error::io(&a.output, e))?;
    write_atomic(&a.output, &buf)?;
    let mut m = RunManifest::new("synth");
    if let Some(p) = &a.dump_profiles {
        write_atomic(p, config::profiles_to_toml(&profiles).as_bytes())?;
        m.outputs.push(p.clone());
    }
    m.param("duration", a.duration)
        .param("fixture", a.fixture.map(|_| "paperlike-8"))
        .param("apps", a.apps.clone())
        .param("activities", profiles.len());
    m.inputs.extend(a.config.clone());
    m.outputs.insert(0, a.output.clone());
    m.seed = Some(a.seed);
    Ok((m, a.output))
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<(RunManifest, PathBuf)> {
    check_window(a.window_s)?;
    let vectors = featurize_logs(&a.inputs, a.window_s)?;
    let mut buf = Vec::new();
    featcsv::write_features(&mut buf, &vectors).map_err(|e| Error::format(&a.output, e))?;
    write_atomic(&a.output, &buf)?;
    let mut m = RunManifest::new("featurize");
    m.param("window_s", a.window_s).param("segments", vectors.len());
    m.inputs = a.inputs;
    m.outputs.push(a.output.clone());
    Ok((m, a.output))
}

fn train_cmd(a: TrainArgs) -> Result<(RunManifest, PathBuf)> {
    let cfg = model_config(a.config.as_deref(), a.seed)?;
    let features = featcsv::read_features(&a.features)?;
    let (model, report) = train(&features, &cfg)?;
    write_atomic(&a.output, &artifact::to_json(&model))?;
    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.output, ".report.csv"));
    write_atomic(&report_path, reports::train_report_csv(&report).as_bytes())?;
    if let Some(last) = report.final_epoch() {
        log::info!(
            "epoch {}: loss {:.4}, train acc {:.4}, validation acc {:.4}",
            last.epoch,
            last.train_loss,
            last.train_accuracy,
            last.validation_accuracy
        );
    }
    let mut m = RunManifest::new("train");
    m.param("config", config_json(&cfg))
        .param("classes", model.label_map.len())
        .param("train_size", report.train_size)
        .param("validation_size", report.validation_size);
    m.inputs.push(a.features);
    m.inputs.extend(a.config);
    m.outputs = vec![a.output.clone(), report_path];
    m.seed = Some(cfg.seed);
    Ok((m, a.output))
}

fn classify_cmd(a: ClassifyArgs) -> Result<(RunManifest, PathBuf)> {
    check_window(a.window_s)?;
    check_threshold(a.threshold)?;
    let model = artifact::load(&a.model)?;
    let vectors = featurize_logs(&a.inputs, a.window_s)?;
    let preds = predict(&model, &vectors, a.threshold)?;
    let truth: Vec<Option<ActivityLabel>> = vectors.iter().map(|v| v.label.clone()).collect();
    let windows: Vec<u64> = vectors.iter().map(|v| v.window_index).collect();
    let csv = reports::predictions_csv(&truth, &windows, &preds, &model.label_map);
    write_atomic(&a.output, csv.as_bytes())?;
    let rejected = preds.iter().filter(|p| p.verdict.is_unknown()).count();
    let mut m = RunManifest::new("classify");
    m.param("window_s", a.window_s)
        .param("threshold", a.threshold)
        .param("segments", preds.len())
        .param("rejected", rejected);
    m.inputs.push(a.model);
    m.inputs.extend(a.inputs);
    m.outputs.push(a.output.clone());
    Ok((m, a.output))
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<(RunManifest, PathBuf)> {
    check_threshold(a.threshold)?;
    let model = artifact::load(&a.model)?;
    let known = featcsv::read_features(&a.known)?;
    let mut truth = Vec::with_capacity(known.len());
    for (i, v) in known.iter().enumerate() {
        let line = i + 2;
        let label = v.label.clone().ok_or_else(|| Error::Line {
            path: a.known.clone(),
            line,
            msg: "known rows need app and activity".into(),
        })?;
        if !model.label_map.contains(&label) {
            return Err(Error::Line { path: a.known.clone(), line, msg: format!("{label} is not a class of the model") });
        }
        truth.push(label);
    }
    let unknown = match &a.unknown {
        Some(p) => featcsv::read_features(p)?,
        None => Vec::new(),
    };
    let kp = predict(&model, &known, a.threshold)?;
    let up = predict(&model, &unknown, a.threshold)?;
    let report = evaluate(&kp, &truth, &up, &model.label_map)?;
    let hist = confidence_histogram(&kp, &up, a.bins)?;
    let sweep = if unknown.is_empty() {
        None
    } else {
        Some(sweep_threshold(&model, &known, &unknown, &uniform_grid(a.grid_points))?)
    };

    let summary = with_suffix(&a.output, ".summary.txt");
    let per_class = with_suffix(&a.output, ".per_class.csv");
    let histogram = with_suffix(&a.output, ".histogram.csv");
    write_atomic(&summary, reports::eval_summary(&report, a.threshold, sweep.as_ref()).as_bytes())?;
    write_atomic(&per_class, reports::per_class_csv(&report).as_bytes())?;
    write_atomic(&histogram, reports::histogram_csv(&hist).as_bytes())?;
    let mut m = RunManifest::new("evaluate");
    m.outputs = vec![summary.clone(), per_class, histogram];
    if let Some(sw) = &sweep {
        let p = with_suffix(&a.output, ".sweep.csv");
        write_atomic(&p, reports::sweep_csv(sw).as_bytes())?;
        m.outputs.push(p);
        m.param("recommended_tau", sw.recommended_tau);
    }
    m.param("threshold", a.threshold)
        .param("bins", a.bins)
        .param("grid_points", a.grid_points)
        .param("known_accuracy", report.known_accuracy)
        .param("unknown_rejection", report.unknown_rejection);
    m.inputs.push(a.model);
    m.inputs.push(a.known);
    m.inputs.extend(a.unknown);
    Ok((m, a.output))
}

fn loao_cmd(a: LoaoArgs) -> Result<(RunManifest, PathBuf)> {
    let cfg = model_config(a.config.as_deref(), a.seed)?;
    let policy = match a.tau_policy {
        TauPolicyArg::Fixed => {
            check_threshold(a.threshold)?;
            TauPolicy::Fixed(a.threshold)
        }
        TauPolicyArg::Sweep => TauPolicy::Sweep { grid: uniform_grid(a.grid_points) },
    };
    let dataset = featcsv::read_features(&a.features)?;
    let apps = dataset_apps(&dataset)?;
    if apps.len() < 2 {
        return Err(Error::Config(format!("{}: leave-one-app-out needs at least 2 apps", a.features.display())));
    }
    let results = apps
        .par_iter()
        .map(|app| (app.clone(), loao_run(&dataset, app, &cfg, &policy)))
        .collect();
    let report = assemble_loao(results)?;
    for s in &report.skipped {
        log::warn!("skipped {}: {}", s.app, s.reason);
    }

    let table = with_suffix(&a.output, ".table.csv");
    let misclass = with_suffix(&a.output, ".misclass.csv");
    let summary = with_suffix(&a.output, ".summary.txt");
    write_atomic(&table, reports::loao_table_csv(&report).as_bytes())?;
    write_atomic(&misclass, reports::misclass_csv(&report.matrix()).as_bytes())?;
    write_atomic(&summary, reports::loao_summary(&report).as_bytes())?;
    let mut m = RunManifest::new("loao");
    m.param("config", config_json(&cfg))
        .param(
            "tau_policy",
            match a.tau_policy {
                TauPolicyArg::Fixed => "fixed",
                TauPolicyArg::Sweep => "sweep",
            },
        )
        .param("threshold", a.threshold)
        .param("grid_points", a.grid_points)
        .param("mean_detection_rate", report.mean_detection_rate);
    m.inputs.push(a.features);
    m.inputs.extend(a.config);
    m.outputs = vec![table, misclass, summary];
    m.seed = Some(cfg.seed);
    Ok((m, a.output))
}

