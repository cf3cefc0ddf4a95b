//! Human label sidecars: caption flags, filter labels and calibration pairs.
//!
//! All three are CSV with a header row. Extra columns are ignored; each
//! `instance_id` may appear once.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use winovis_core::calibration::LabeledPair;
use winovis_core::corpus::{FilterLabel, FilterVerdict};

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("duplicate instance_id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: bad {column} value {value:?}")]
    BadValue { line: u64, column: &'static str, value: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },
}

type Result<T, E = LabelError> = std::result::Result<T, E>;

struct Table<R: Read> {
    reader: csv::Reader<R>,
    columns: BTreeMap<&'static str, usize>,
}

impl<R: Read> Table<R> {
    fn open(input: R, required: &[&'static str], optional: &[&'static str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(input);
        let headers = reader.headers()?.clone();
        let mut columns = BTreeMap::new();
        for &name in required.iter().chain(optional) {
            match headers.iter().position(|h| h == name) {
                Some(i) => {
                    columns.insert(name, i);
                }
                None if required.contains(&name) => return Err(LabelError::MissingColumn(name)),
                None => {}
            }
        }
        Ok(Self { reader, columns })
    }

    /// Visits each row with a field getter; rejects repeated instance ids.
    fn rows(mut self, mut f: impl FnMut(&dyn Fn(&'static str) -> Option<String>, u64) -> Result<()>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for rec in self.reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let get = |name: &'static str| self.columns.get(name).and_then(|&i| rec.get(i)).map(str::to_string);
            let id = get("instance_id").unwrap_or_default();
            if !seen.insert(id.clone()) {
                return Err(LabelError::DuplicateId(id));
            }
            f(&get, line)?;
        }
        Ok(())
    }
}

fn flag(value: Option<String>, column: &'static str, line: u64) -> Result<bool> {
    match value.as_deref() {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        other => Err(LabelError::BadValue { line, column, value: other.unwrap_or_default().into() }),
    }
}

/// `instance_id, captioned` with `captioned` in {0, 1}.
pub fn read_caption_flags(input: impl Read) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    Table::open(input, &["instance_id", "captioned"], &[])?.rows(|get, line| {
        out.insert(get("instance_id").unwrap_or_default(), flag(get("captioned"), "captioned", line)?);
        Ok(())
    })?;
    Ok(out)
}

/// `instance_id, verdict[, note]`; verdict uses the snake_case filter names.
pub fn read_filter_labels(input: impl Read) -> Result<Vec<FilterLabel>> {
    let mut out = Vec::new();
    Table::open(input, &["instance_id", "verdict"], &["note"])?.rows(|get, line| {
        let raw = get("verdict").unwrap_or_default();
        let verdict: FilterVerdict = raw
            .parse()
            .map_err(|_| LabelError::BadValue { line, column: "verdict", value: raw.clone() })?;
        out.push(FilterLabel {
            instance_id: get("instance_id").unwrap_or_default(),
            verdict,
            note: get("note").filter(|n| !n.is_empty()),
        });
        Ok(())
    })?;
    Ok(out)
}

/// `instance_id, iou_value, human_positive` with the flag in {0, 1}.
pub fn read_calibration(input: impl Read) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    Table::open(input, &["instance_id", "iou_value", "human_positive"], &[])?.rows(|get, line| {
        let raw = get("iou_value").unwrap_or_default();
        let iou_value = raw
            .parse::<f64>()
            .ok()
            .filter(|v| (0.0..=1.0).contains(v))
            .ok_or_else(|| LabelError::BadValue { line, column: "iou_value", value: raw.clone() })?;
        out.push(LabeledPair {
            instance_id: get("instance_id").unwrap_or_default(),
            iou_value,
            human_positive: flag(get("human_positive"), "human_positive", line)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| LabelError::Open { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caption_flags() {
        let flags = read_caption_flags("instance_id,captioned\nid1,1\nid2, 0\n".as_bytes()).unwrap();
        assert!(flags["id1"]);
        assert!(!flags["id2"]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = read_caption_flags("instance_id,captioned\nid1,1\nid1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LabelError::DuplicateId(id) if id == "id1"));
    }

    #[test]
    fn missing_column_named() {
        let err = read_calibration("instance_id,iou_value\na,0.5\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "missing required column \"human_positive\"");
    }

    #[test]
    fn bad_values() {
        assert!(matches!(
            read_caption_flags("instance_id,captioned\nid1,yes\n".as_bytes()),
            Err(LabelError::BadValue { column: "captioned", line: 2, .. })
        ));
        assert!(read_calibration("instance_id,iou_value,human_positive\na,1.5,1\n".as_bytes()).is_err());
        assert!(read_filter_labels("instance_id,verdict\na,maybe\n".as_bytes()).is_err());
    }

    #[test]
    fn filter_labels_with_optional_note() {
        let labels = read_filter_labels("verdict,instance_id,note\nredundant,a,dup of b\naccept,b,\n".as_bytes()).unwrap();
        assert_eq!(labels[0].verdict, FilterVerdict::Redundant);
        assert_eq!(labels[0].note.as_deref(), Some("dup of b"));
        assert_eq!(labels[1].note, None);
        let no_note = read_filter_labels("instance_id,verdict\na,illogical\n".as_bytes()).unwrap();
        assert_eq!(no_note[0].verdict, FilterVerdict::Illogical);
    }

    #[test]
    fn calibration_pairs() {
        let pairs = read_calibration("instance_id,iou_value,human_positive\na,0.25,0\nb,0.75,1\n".as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs[1].human_positive);
        assert_eq!(pairs[0].iou_value, 0.25);
    }
}
