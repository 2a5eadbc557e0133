//! Raw reward records, one JSON object per line, and their conversion to a
//! labeled feature dataset.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::malformed;
use crate::dataset::{LabelScheme, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::{extract_features, Gwei, ModeTag, SlotRewardsRecord};

pub fn write_records<W: Write>(records: &[SlotRewardsRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_records(records: &[SlotRewardsRecord], path: impl AsRef<Path>) -> Result<()> {
    write_records(records, BufWriter::new(File::create(path)?))
}

pub fn read_records<R: BufRead>(mut r: R) -> Result<Vec<SlotRewardsRecord>> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let (mut offset, mut line) = (0u64, 0usize);
    loop {
        buf.clear();
        let n = r.read_line(&mut buf)?;
        if n == 0 {
            return Ok(out);
        }
        line += 1;
        let start = offset;
        offset += n as u64;
        if buf.trim().is_empty() {
            continue;
        }
        let rec: SlotRewardsRecord = serde_json::from_str(buf.trim_end()).map_err(|e| malformed(line, start, &e))?;
        out.push(rec);
    }
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<SlotRewardsRecord>> {
    read_records(BufReader::new(File::open(path)?))
}

/// Extracts features from labeled records. `label` and `mode` override the
/// per-record values (records fetched from a node carry neither). Records
/// without a mode count as `default`.
pub fn records_to_dataset(
    records: &[SlotRewardsRecord],
    ideal_reward: Gwei,
    class_names: Vec<String>,
    label: Option<&str>,
    mode: Option<ModeTag>,
) -> Result<LabeledDataset> {
    let mut ds = LabeledDataset::empty(LabelScheme::Client, class_names);
    ds.validate()?;
    for (i, r) in records.iter().enumerate() {
        let name = label
            .or(r.label.as_deref())
            .ok_or_else(|| Error::schema(format!("records[{i}].label"), "record has no label"))?;
        let class = ds
            .class_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::schema(format!("records[{i}].label"), format!("unknown client `{name}`")))?;
        let v = extract_features(r, ideal_reward).map_err(|e| match e {
            Error::Schema { field, reason } => Error::Schema {
                field: format!("records[{i}].{field}"),
                reason,
            },
            other => other,
        })?;
        ds.vectors.push(v);
        ds.labels.push(class);
        ds.modes.push(mode.or(r.mode).unwrap_or(ModeTag::Default));
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::default_class_names;
    use crate::features::DEFAULT_IDEAL_REWARD;
    use crate::synth::{generate, generate_records, GeneratorConfig};

    #[test]
    fn round_trip_and_extraction() {
        let cfg = GeneratorConfig {
            per_class: 5,
            seed: 3,
            ..Default::default()
        };
        let recs = generate_records(&cfg, ModeTag::AllSubnets, DEFAULT_IDEAL_REWARD).unwrap();
        let mut raw = Vec::new();
        write_records(&recs, &mut raw).unwrap();
        let back = read_records(raw.as_slice()).unwrap();
        assert_eq!(back, recs);

        let ds = records_to_dataset(&back, DEFAULT_IDEAL_REWARD, default_class_names(), None, None).unwrap();
        let expected = generate(&cfg, ModeTag::AllSubnets).unwrap();
        assert_eq!(ds.labels, expected.labels);
        assert_eq!(ds.modes, expected.modes);
    }

    #[test]
    fn missing_label_is_a_schema_error() {
        let cfg = GeneratorConfig {
            per_class: 1,
            ..Default::default()
        };
        let mut recs = generate_records(&cfg, ModeTag::Default, DEFAULT_IDEAL_REWARD).unwrap();
        recs[2].label = None;
        let err = records_to_dataset(&recs, DEFAULT_IDEAL_REWARD, default_class_names(), None, None).unwrap_err();
        assert!(
            matches!(err, Error::Schema { ref field, .. } if field == "records[2].label"),
            "{err}"
        );
        let ds = records_to_dataset(&recs, DEFAULT_IDEAL_REWARD, default_class_names(), Some("teku"), None).unwrap();
        assert!(ds.labels.iter().all(|&l| l == 5));
    }

    #[test]
    fn bad_line_reports_position() {
        let text = "{\"slot\": 1}\n";
        assert!(matches!(
            read_records(text.as_bytes()),
            Err(Error::Malformed { line: 1, .. })
        ));
    }
}
