//! CSV and plain-text renderings of training, evaluation and
//! leave-one-app-out results.
//!
//! Numbers use Rust's shortest round-trip formatting, so re-running a
//! subcommand on the same inputs yields the same bytes.

use std::fmt::Write as _;

use inapp_core::dnn::TrainReport;
use inapp_core::eval::{EvalReport, LoaoReport, MisclassMatrix};
use inapp_core::openset::{Histogram, Prediction, SweepReport};
use inapp_core::ActivityLabel;

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(header).expect("in-memory write");
    for row in rows {
        wr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wr.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn train_report_csv(report: &TrainReport) -> String {
    csv_string(
        &["epoch", "train_loss", "train_accuracy", "validation_accuracy"],
        report.epochs.iter().map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.train_accuracy.to_string(),
                e.validation_accuracy.to_string(),
            ]
        }),
    )
}

/// One line per segment. `truth` and `window_index` align with `predictions`.
pub fn predictions_csv(
    truth: &[Option<ActivityLabel>],
    window_index: &[u64],
    predictions: &[Prediction],
    label_map: &[ActivityLabel],
) -> String {
    let rows = predictions.iter().enumerate().map(|(i, p)| {
        let (app, act) = match &truth[i] {
            Some(l) => (l.app().to_string(), l.activity().to_string()),
            None => Default::default(),
        };
        let top = &label_map[p.argmax_index];
        let (pred_app, pred_act, verdict) = match p.verdict.label() {
            Some(l) => (l.app().to_string(), l.activity().to_string(), "known"),
            None => (String::new(), String::new(), "unknown"),
        };
        vec![
            app,
            act,
            window_index[i].to_string(),
            p.p_max.to_string(),
            top.to_string(),
            pred_app,
            pred_act,
            verdict.to_string(),
        ]
    });
    csv_string(
        &["app", "activity", "window_index", "p_max", "argmax", "pred_app", "pred_activity", "verdict"],
        rows,
    )
}

pub fn per_class_csv(report: &EvalReport) -> String {
    csv_string(
        &["app", "activity", "support", "predicted", "true_positives", "precision", "recall"],
        report.per_class.iter().map(|c| {
            vec![
                c.label.app().to_string(),
                c.label.activity().to_string(),
                c.support.to_string(),
                c.predicted.to_string(),
                c.true_positives.to_string(),
                opt(c.precision),
                opt(c.recall),
            ]
        }),
    )
}

pub fn eval_summary(report: &EvalReport, threshold: f64, sweep: Option<&SweepReport>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "threshold            {threshold}");
    let _ = writeln!(s, "known instances      {}", report.known_total());
    let _ = writeln!(s, "  correct            {}", report.correct);
    let _ = writeln!(s, "  wrong label        {}", report.wrong_label);
    let _ = writeln!(s, "  falsely rejected   {}", report.falsely_rejected);
    let _ = writeln!(s, "known accuracy       {:.4}", report.known_accuracy);
    match report.unknown_rejection {
        Some(r) => {
            let _ = writeln!(s, "unknown instances    {}", report.unknown_total());
            let _ = writeln!(s, "  correctly rejected {}", report.correctly_rejected);
            let _ = writeln!(s, "  falsely accepted   {}", report.falsely_accepted);
            let _ = writeln!(s, "unknown rejection    {r:.4}");
        }
        None => {
            let _ = writeln!(s, "unknown instances    0");
        }
    }
    if let Some(sw) = sweep {
        let _ = writeln!(s, "recommended tau      {}", sw.recommended_tau);
    }
    s
}

pub fn histogram_csv(h: &Histogram) -> String {
    csv_string(
        &["bin_lo", "bin_hi", "known_count", "unknown_count"],
        (0..h.bins()).map(|i| {
            vec![
                h.edges[i].to_string(),
                h.edges[i + 1].to_string(),
                h.known[i].to_string(),
                h.unknown[i].to_string(),
            ]
        }),
    )
}

pub fn sweep_csv(sw: &SweepReport) -> String {
    csv_string(
        &[
            "tau",
            "known_acc",
            "unknown_rej",
            "mean",
            "known_correct",
            "known_rejected",
            "known_total",
            "unknown_rejected",
            "unknown_total",
            "recommended",
        ],
        sw.rows.iter().map(|r| {
            vec![
                r.tau.to_string(),
                r.known_accuracy.to_string(),
                r.unknown_rejection.to_string(),
                (0.5 * (r.known_accuracy + r.unknown_rejection)).to_string(),
                r.known_correct.to_string(),
                r.known_rejected.to_string(),
                r.known_total.to_string(),
                r.unknown_rejected.to_string(),
                r.unknown_total.to_string(),
                u8::from(r.tau == sw.recommended_tau).to_string(),
            ]
        }),
    )
}

/// Trained apps, held-out app and detection rate per run; trained apps are
/// `;`-separated.
pub fn loao_table_csv(report: &LoaoReport) -> String {
    csv_string(
        &[
            "trained_apps",
            "held_out_app",
            "detection_rate",
            "threshold",
            "evaluated",
            "rejected",
            "validation_accuracy",
        ],
        report.runs.iter().map(|r| {
            vec![
                r.trained_apps.join(";"),
                r.held_out.clone(),
                r.detection_rate.to_string(),
                r.threshold.to_string(),
                r.evaluated.to_string(),
                r.rejected.to_string(),
                r.validation_accuracy.to_string(),
            ]
        }),
    )
}

/// Percentages; a blank cell is a column the row's model never saw or a row
/// with nothing accepted.
pub fn misclass_csv(m: &MisclassMatrix) -> String {
    let mut header = vec!["held_out_app", "total", "accepted"];
    header.extend(m.columns.iter().map(String::as_str));
    csv_string(
        &header,
        m.rows.iter().map(|r| {
            let mut row = vec![r.app.clone(), r.total.to_string(), r.accepted.to_string()];
            row.extend(r.cells.iter().map(|c| opt(*c)));
            row
        }),
    )
}

pub fn loao_summary(report: &LoaoReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>9} {:>9} {:>9} {:>8}", "held-out app", "evaluated", "rejected", "detection", "tau");
    for r in &report.runs {
        let _ = writeln!(
            s,
            "{:<16} {:>9} {:>9} {:>8.1}% {:>8}",
            r.held_out,
            r.evaluated,
            r.rejected,
            100.0 * r.detection_rate,
            r.threshold
        );
    }
    if let Some(m) = report.mean_detection_rate {
        let _ = writeln!(s, "mean detection rate {:.1}%", 100.0 * m);
    }
    for sk in &report.skipped {
        let _ = writeln!(s, "skipped {}: {}", sk.app, sk.reason);
    }
    s
}
