//! Report JSON and the flat per-instance CSVs.

use std::io::{Read, Write};

use winovis_core::disambiguation::{Entity, InstanceVerdict, Status};
use winovis_core::metrics::MetricsReport;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: bad {column} value {value:?}")]
    BadValue { line: u64, column: &'static str, value: String },
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
}

pub const VERDICT_COLUMNS: [&str; 6] =
    ["instance_id", "status", "predicted", "iou_entities", "iou_pronoun_e1", "iou_pronoun_e2"];

pub fn report_to_json(report: &MetricsReport) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn report_from_json(text: &str) -> Result<MetricsReport, ReportError> {
    Ok(serde_json::from_str(text)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    // `{}` prints the shortest text that parses back to the same f64.
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Absent fields are written as empty cells.
pub fn write_verdicts_csv(out: impl Write, verdicts: &[InstanceVerdict]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERDICT_COLUMNS)?;
    for v in verdicts {
        w.write_record([
            v.instance_id.clone(),
            v.status.as_str().to_string(),
            v.predicted.map(|e| e.as_str().to_string()).unwrap_or_default(),
            fmt_opt(v.iou_entities),
            fmt_opt(v.iou_pronoun_e1),
            fmt_opt(v.iou_pronoun_e2),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_verdicts_csv(input: impl Read) -> Result<Vec<InstanceVerdict>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(VERDICT_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or(ReportError::MissingColumn(name))?;
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad = |column: &'static str, value: &str| ReportError::BadValue { line, column, value: value.into() };
        let opt_f64 = |i: usize, column: &'static str| -> Result<Option<f64>, ReportError> {
            match field(i) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(column, s)),
            }
        };
        let status: Status = field(1).parse().map_err(|_| bad("status", field(1)))?;
        let predicted = match field(2) {
            "" => None,
            s => Some(s.parse::<Entity>().map_err(|_| bad("predicted", s))?),
        };
        out.push(InstanceVerdict {
            instance_id: field(0).to_string(),
            status,
            predicted,
            iou_entities: opt_f64(3, "iou_entities")?,
            iou_pronoun_e1: opt_f64(4, "iou_pronoun_e1")?,
            iou_pronoun_e2: opt_f64(5, "iou_pronoun_e2")?,
        });
    }
    Ok(out)
}

/// Instances that produced no verdict, with the reason.
pub fn write_errors_csv(out: impl Write, errors: &[(String, String)]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance_id", "error"])?;
    for (id, msg) in errors {
        w.write_record([id, msg])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
