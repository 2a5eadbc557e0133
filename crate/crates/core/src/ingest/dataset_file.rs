//! Dataset file: a JSON header line followed by one JSON row per sample.
//!
//! ```text
//! {"format":"clientprint-dataset","version":1,"feature_schema":"slot-rewards-v1","scheme":"six_class","class_names":["grandine",...]}
//! {"x":[0.61,0.29,0.55,1.02,0.41,0.75,0.26],"label":"grandine","mode":"default"}
//! ```
//!
//! Floats are written in shortest round-trip form, so save then load is
//! exact. Unknown fields on any line are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::malformed;
use crate::dataset::{LabelScheme, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, ModeTag, FEATURE_DIM, FEATURE_SCHEMA_ID};

pub const DATASET_FORMAT: &str = "clientprint-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    feature_schema: String,
    scheme: LabelScheme,
    class_names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row<'a> {
    x: Vec<f64>,
    #[serde(borrow)]
    label: std::borrow::Cow<'a, str>,
    #[serde(default = "default_mode")]
    mode: ModeTag,
}

fn default_mode() -> ModeTag {
    ModeTag::Default
}

pub fn write_dataset<W: Write>(ds: &LabeledDataset, mut w: W) -> Result<()> {
    ds.validate()?;
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        feature_schema: FEATURE_SCHEMA_ID.into(),
        scheme: ds.scheme,
        class_names: ds.class_names.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for ((v, &l), &mode) in ds.vectors.iter().zip(&ds.labels).zip(&ds.modes) {
        let row = Row {
            x: v.0.to_vec(),
            label: ds.class_names[l].as_str().into(),
            mode,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, BufWriter::new(File::create(path)?))
}

pub fn read_dataset<R: BufRead>(mut r: R) -> Result<LabeledDataset> {
    let mut buf = String::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut ds: Option<LabeledDataset> = None;
    loop {
        buf.clear();
        let n = r.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let start = offset;
        offset += n as u64;
        let text = buf.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        match ds.as_mut() {
            None => {
                let h: Header = serde_json::from_str(text).map_err(|e| malformed(line_no, start, &e))?;
                if h.format != DATASET_FORMAT {
                    return Err(Error::Incompatible(format!(
                        "not a dataset file (format `{}`)",
                        h.format
                    )));
                }
                if h.version != DATASET_VERSION {
                    return Err(Error::Incompatible(format!(
                        "dataset version {} unsupported (expected {DATASET_VERSION})",
                        h.version
                    )));
                }
                if h.feature_schema != FEATURE_SCHEMA_ID {
                    return Err(Error::Incompatible(format!(
                        "feature schema `{}` does not match `{FEATURE_SCHEMA_ID}`",
                        h.feature_schema
                    )));
                }
                let empty = LabeledDataset::empty(h.scheme, h.class_names);
                empty.validate()?;
                ds = Some(empty);
            }
            Some(ds) => {
                let row: Row = serde_json::from_str(text).map_err(|e| malformed(line_no, start, &e))?;
                let bad = |reason: String| Error::Malformed {
                    line: line_no,
                    offset: start,
                    reason,
                };
                if row.x.len() != FEATURE_DIM {
                    return Err(bad(format!("expected {FEATURE_DIM} features, found {}", row.x.len())));
                }
                let v = FeatureVector::from_slice(&row.x)?;
                v.check_ranges().map_err(|e| bad(e.to_string()))?;
                let label = ds
                    .class_names
                    .iter()
                    .position(|c| *c == row.label)
                    .ok_or_else(|| bad(format!("label `{}` is not a declared class", row.label)))?;
                ds.vectors.push(v);
                ds.labels.push(label);
                ds.modes.push(row.mode);
            }
        }
    }
    let ds = ds.ok_or_else(|| Error::Malformed {
        line: 1,
        offset: 0,
        reason: "missing header line".into(),
    })?;
    ds.validate()?;
    Ok(ds)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}
