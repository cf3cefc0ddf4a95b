//! Line-delimited instance records and extraction of candidates from model
//! responses.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::Deserialize;
use serde_json::Value;
use winovis_core::corpus::{instance_id, ContextType, EntityClass, WinoVisInstance};

#[derive(Debug, thiserror::Error)]
pub enum InstancesError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate instance id {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The record shape on disk. `id` is optional and derived when absent.
#[derive(Deserialize)]
struct Record {
    #[serde(default)]
    id: Option<String>,
    statement: String,
    pronoun: String,
    snippet: String,
    options: [String; 2],
    answer: i64,
    reason: String,
    #[serde(default)]
    entity_class: Option<EntityClass>,
    #[serde(default)]
    context_type: Option<ContextType>,
}

impl From<Record> for WinoVisInstance {
    fn from(r: Record) -> Self {
        Self {
            id: r.id.unwrap_or_else(|| instance_id(&r.statement)),
            statement: r.statement,
            pronoun: r.pronoun,
            snippet: r.snippet,
            options: r.options,
            answer: r.answer,
            reason: r.reason,
            entity_class: r.entity_class,
            context_type: r.context_type,
        }
    }
}

/// Reads one object per line; blank lines are skipped.
pub fn read_instances(input: impl BufRead) -> Result<Vec<WinoVisInstance>, InstancesError> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| InstancesError::Parse { line: i + 1, message: e.to_string() })?;
        let inst = WinoVisInstance::from(rec);
        if !ids.insert(inst.id.clone()) {
            return Err(InstancesError::DuplicateId(inst.id));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn write_instances(mut out: impl Write, instances: &[WinoVisInstance]) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A fragment of a response that looked like an object but was unusable.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    /// Byte offset of the opening brace.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedBatch {
    pub candidates: Vec<WinoVisInstance>,
    pub failures: Vec<ParseFailure>,
}

const REQUIRED: [&str; 6] = ["statement", "pronoun", "snippet", "options", "answer", "reason"];

fn candidate(value: Value) -> Result<WinoVisInstance, String> {
    let Value::Object(map) = &value else {
        return Err("not an object".into());
    };
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !map.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(format!("missing keys: {}", missing.join(", ")));
    }
    // Models sometimes quote the answer index.
    let mut value = value;
    if let Some(Value::String(s)) = value.get("answer") {
        let n: i64 = s.trim().parse().map_err(|_| format!("answer {s:?} is not an integer"))?;
        value["answer"] = Value::from(n);
    }
    let rec: Record = serde_json::from_value(value).map_err(|e| e.to_string())?;
    Ok(rec.into())
}

/// Extracts every well-formed instance object embedded in free text.
///
/// Each `{` that is not inside an already parsed object starts a parse
/// attempt. Failed attempts are recorded and scanning resumes one byte later.
pub fn parse_batch(text: &str) -> ParsedBatch {
    let mut out = ParsedBatch::default();
    let mut pos = 0;
    while let Some(rel) = text[pos..].find('{') {
        let start = pos + rel;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => {
                let end = start + stream.byte_offset();
                match candidate(value) {
                    Ok(c) => out.candidates.push(c),
                    Err(message) => out.failures.push(ParseFailure { offset: start, message }),
                }
                pos = end;
            }
            Some(Err(e)) => {
                out.failures.push(ParseFailure { offset: start, message: e.to_string() });
                pos = start + 1;
            }
            None => break,
        }
    }
    out
}
