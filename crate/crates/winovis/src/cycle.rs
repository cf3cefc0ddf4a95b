//! The prompt cycle: prompt, complete, parse, validate, de-duplicate, repeat.

use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};
use winovis_core::corpus::{build_prompt, redundancy_against, validate_instance, PromptTemplate, WinoVisInstance};

use crate::instances::parse_batch;
use crate::llm::{ClientError, LlmClient, SamplingParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    pub target_count: usize,
    /// Maximum number of prompts issued; retries of one prompt count once.
    pub request_cap: usize,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    pub redundancy_threshold: f64,
    pub sampling: SamplingParams,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            target_count: 10,
            request_cap: 50,
            max_retries: 4,
            backoff_base: Duration::from_secs(1),
            backoff_max: Duration::from_secs(60),
            redundancy_threshold: 0.8,
            sampling: SamplingParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub id: Option<String>,
    pub reason: String,
}

/// One line of the audit log per issued prompt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub request: usize,
    pub start_index: usize,
    pub attempts: u32,
    pub prompt_sha256: String,
    pub response_sha256: Option<String>,
    pub error: Option<String>,
    pub accepted: Vec<String>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleOutcome {
    pub accepted: Vec<WinoVisInstance>,
    pub audit: Vec<AuditRecord>,
    /// Set when the client failed for good; `accepted` holds the partial result.
    pub aborted: Option<String>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn backoff(cfg: &CycleConfig, attempt: u32) -> Duration {
    let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
    cfg.backoff_base.saturating_mul(factor).min(cfg.backoff_max)
}

/// Runs the cycle until `target_count` candidates are accepted or the request
/// cap is hit. `sleep` is called between retries.
pub fn run_cycle(
    client: &mut dyn LlmClient,
    tmpl: &PromptTemplate,
    cfg: &CycleConfig,
    sleep: &mut dyn FnMut(Duration),
) -> CycleOutcome {
    let mut out = CycleOutcome::default();
    let mut request = 0;
    while out.accepted.len() < cfg.target_count && request < cfg.request_cap {
        request += 1;
        let start_index = out.accepted.len() + 1;
        let prompt = build_prompt(tmpl, start_index);
        let mut record = AuditRecord {
            request,
            start_index,
            attempts: 0,
            prompt_sha256: sha256_hex(&prompt),
            response_sha256: None,
            error: None,
            accepted: Vec::new(),
            rejections: Vec::new(),
        };
        let response = loop {
            record.attempts += 1;
            match client.complete(&prompt, &cfg.sampling) {
                Ok(text) => break Ok(text),
                Err(ClientError::Transient(msg)) if record.attempts <= cfg.max_retries => {
                    log::warn!("request {request} attempt {} failed: {msg}", record.attempts);
                    sleep(backoff(cfg, record.attempts - 1));
                }
                Err(e) => break Err(e.to_string()),
            }
        };
        let text = match response {
            Ok(text) => text,
            Err(msg) => {
                record.error = Some(msg.clone());
                out.audit.push(record);
                out.aborted = Some(msg);
                return out;
            }
        };
        record.response_sha256 = Some(sha256_hex(&text));

        let batch = parse_batch(&text);
        for f in batch.failures {
            record.rejections.push(Rejection { id: None, reason: format!("parse failure at byte {}: {}", f.offset, f.message) });
        }
        for cand in batch.candidates {
            let reject = |reason: String| Rejection { id: Some(cand.id.clone()), reason };
            let violations = validate_instance(&cand);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
                record.rejections.push(reject(format!("invalid: {}", list.join("; "))));
            } else if let Some(flag) = redundancy_against(&cand, &out.accepted, cfg.redundancy_threshold) {
                record.rejections.push(reject(format!("redundant with {} (jaccard {:.3})", flag.first, flag.jaccard)));
            } else if out.accepted.len() >= cfg.target_count {
                record.rejections.push(reject("target already reached".into()));
            } else {
                record.accepted.push(cand.id.clone());
                out.accepted.push(cand);
            }
        }
        out.audit.push(record);
    }
    out
}
