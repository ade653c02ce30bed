//! Canonical frame log: UTF-8 JSON lines, one frame per line.
//!
//! ```text
//! {"ts":0.0,"len":120,"dir":"up","ftype":"data","retry":false,"fcs_ok":true,"app":"gmail","activity":"send_mail"}
//! ```
//!
//! `app` and `activity` are optional but come as a pair. Blank lines are
//! ignored. Timestamps must not decrease within a labeled stream (a run of
//! lines with the same label); a label change may restart the clock.

use std::io::{BufRead, Write};
use std::path::Path;

use inapp_core::{ActivityLabel, CaptureRecord, Direction, FrameType};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    ts: f64,
    len: u32,
    dir: Dir,
    ftype: Ftype,
    retry: bool,
    fcs_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    app: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activity: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Dir {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Ftype {
    Data,
    Mgmt,
    Ctrl,
}

impl FrameLine {
    fn into_record(self) -> std::result::Result<CaptureRecord, String> {
        let label = match (self.app, self.activity) {
            (Some(app), Some(activity)) => {
                Some(ActivityLabel::new(app, activity).map_err(|e| e.to_string())?)
            }
            (None, None) => None,
            (Some(_), None) => return Err("missing mandatory field `activity` (app given)".into()),
            (None, Some(_)) => return Err("missing mandatory field `app` (activity given)".into()),
        };
        let rec = CaptureRecord {
            ts: self.ts,
            len: self.len,
            dir: match self.dir {
                Dir::Up => Direction::Uplink,
                Dir::Down => Direction::Downlink,
            },
            ftype: match self.ftype {
                Ftype::Data => FrameType::Data,
                Ftype::Mgmt => FrameType::Management,
                Ftype::Ctrl => FrameType::Control,
            },
            retry: self.retry,
            fcs_ok: self.fcs_ok,
            label,
        };
        rec.validate(0).map_err(|e| match e {
            inapp_core::Error::InvalidRecord { reason, .. } => reason.to_string(),
            other => other.to_string(),
        })?;
        Ok(rec)
    }

    fn from_record(r: &CaptureRecord) -> Self {
        FrameLine {
            ts: r.ts,
            len: r.len,
            dir: match r.dir {
                Direction::Uplink => Dir::Up,
                Direction::Downlink => Dir::Down,
            },
            ftype: match r.ftype {
                FrameType::Data => Ftype::Data,
                FrameType::Management => Ftype::Mgmt,
                FrameType::Control => Ftype::Ctrl,
            },
            retry: r.retry,
            fcs_ok: r.fcs_ok,
            app: r.label.as_ref().map(|l| l.app().to_string()),
            activity: r.label.as_ref().map(|l| l.activity().to_string()),
        }
    }
}

/// Parses and validates a frame log. `path` is used for error messages only.
pub fn parse_frame_log<R: BufRead>(reader: R, path: &Path) -> Result<Vec<CaptureRecord>> {
    let mut records: Vec<CaptureRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Line { path: path.to_path_buf(), line: line_no, msg };
        let parsed: FrameLine = serde_json::from_str(&line).map_err(|e| err(format!("malformed record: {e}")))?;
        let rec = parsed.into_record().map_err(err)?;
        if let Some(prev) = records.last() {
            if prev.label == rec.label && rec.ts < prev.ts {
                return Err(err(format!("decreasing timestamp at line {line_no}")));
            }
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_frame_log(path: &Path) -> Result<Vec<CaptureRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_frame_log(std::io::BufReader::new(file), path)
}

pub fn write_frame_log<W: Write>(mut w: W, records: &[CaptureRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &FrameLine::from_record(r))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<CaptureRecord>> {
        parse_frame_log(s.as_bytes(), Path::new("t.jsonl"))
    }

    #[test]
    fn single_record() {
        let recs = parse(
            r#"{"ts":0.0,"len":120,"dir":"up","ftype":"data","retry":false,"fcs_ok":true,"app":"gmail","activity":"send_mail"}"#,
        )
        .unwrap();
        assert_eq!(
            recs,
            [CaptureRecord {
                ts: 0.0,
                len: 120,
                dir: Direction::Uplink,
                ftype: FrameType::Data,
                retry: false,
                fcs_ok: true,
                label: Some(ActivityLabel::new("gmail", "send_mail").unwrap()),
            }]
        );
    }

    #[test]
    fn empty_input() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn decreasing_timestamp_names_line() {
        let log = "{\"ts\":1.0,\"len\":60,\"dir\":\"down\",\"ftype\":\"data\",\"retry\":false,\"fcs_ok\":true}\n\
                   {\"ts\":0.5,\"len\":60,\"dir\":\"down\",\"ftype\":\"data\",\"retry\":false,\"fcs_ok\":true}\n";
        let err = parse(log).unwrap_err().to_string();
        assert!(err.contains("decreasing timestamp at line 2"), "{err}");
    }

    #[test]
    fn malformed_lines() {
        let base = r#""ts":0.0,"len":60,"retry":false,"fcs_ok":true"#;
        for (bad, needle) in [
            (format!("{{{base},\"dir\":\"sideways\",\"ftype\":\"data\"}}"), "line 1"),
            (format!("{{{base},\"dir\":\"up\",\"ftype\":\"beacon\"}}"), "unknown variant"),
            (format!("{{{base},\"ftype\":\"data\"}}"), "missing field `dir`"),
            (format!("{{{base},\"dir\":\"up\",\"ftype\":\"data\",\"app\":\"x\"}}"), "activity"),
            (format!("{{{base},\"dir\":\"up\",\"ftype\":\"data\",\"extra\":1}}"), "unknown field"),
            ("not json".to_string(), "malformed"),
            (
                r#"{"ts":-1.0,"len":60,"dir":"up","ftype":"data","retry":false,"fcs_ok":true}"#.into(),
                "non-negative",
            ),
            (
                r#"{"ts":0.0,"len":0,"dir":"up","ftype":"data","retry":false,"fcs_ok":true}"#.into(),
                "at least 1",
            ),
        ] {
            let err = parse(&bad).unwrap_err().to_string();
            assert!(err.contains(needle), "{err} lacks {needle}");
        }
    }

    #[test]
    fn write_then_parse() {
        let recs = inapp_core::synth::generate_capture(&inapp_core::synth::paperlike8()[3], 2.0, 9).unwrap();
        let mut buf = Vec::new();
        write_frame_log(&mut buf, &recs).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
    }
}
