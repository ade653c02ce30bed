//! Feature matrix CSV: `app,activity,window_index,f00..f47`.
//!
//! Values are written in shortest round-trip decimal form, so reading a file
//! back reproduces the vectors bit for bit. Unlabeled rows leave `app` and
//! `activity` empty.

use std::io::{Read, Write};
use std::path::Path;

use inapp_core::{ActivityLabel, FeatureVector, FEATURE_DIM};

use crate::error::{Error, Result};

pub fn header() -> Vec<String> {
    let mut h = vec!["app".to_string(), "activity".to_string(), "window_index".to_string()];
    h.extend((0..FEATURE_DIM).map(|i| format!("f{i:02}")));
    h
}

pub fn write_features<W: Write>(w: W, vectors: &[FeatureVector]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header())?;
    let mut row = Vec::with_capacity(FEATURE_DIM + 3);
    for v in vectors {
        row.clear();
        match &v.label {
            Some(l) => {
                row.push(l.app().to_string());
                row.push(l.activity().to_string());
            }
            None => row.extend([String::new(), String::new()]),
        }
        row.push(v.window_index.to_string());
        row.extend(v.values.iter().map(|x| x.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn parse_features<R: Read>(r: R, path: &Path) -> Result<Vec<FeatureVector>> {
    let mut rd = csv::Reader::from_reader(r);
    let got: Vec<String> = rd
        .headers()
        .map_err(|e| Error::format(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header() {
        return Err(Error::format(path, "header must be app,activity,window_index,f00..f47"));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let err = |msg: String| Error::Line { path: path.to_path_buf(), line, msg };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let label = match (&rec[0], &rec[1]) {
            ("", "") => None,
            (app, act) => Some(ActivityLabel::new(app, act).map_err(|e| err(e.to_string()))?),
        };
        let window_index = rec[2].parse().map_err(|e| err(format!("window_index: {e}")))?;
        let mut values = [0.0f64; FEATURE_DIM];
        for (j, v) in values.iter_mut().enumerate() {
            let field = &rec[3 + j];
            *v = field.parse().map_err(|e| err(format!("f{j:02} = {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(err(format!("f{j:02} is not finite")));
            }
        }
        out.push(FeatureVector { values, label, window_index });
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_features(std::io::BufReader::new(file), path)
}
