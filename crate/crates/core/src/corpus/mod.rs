//! Instance schema and the pure parts of corpus construction.

mod prompt;
mod redundancy;
mod validate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use sha2::{Digest, Sha256};

pub use prompt::{build_prompt, PromptTemplate, CRITERIA_RULES, DEFAULT_SEED_SAMPLES};
pub use redundancy::{jaccard, redundancy_against, redundancy_scan, token_set, RedundancyFlag};
pub use validate::{contains_phrase, validate_instance, validate_pair, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EntityClass {
    Disparate,
    DistinctAge,
    DistinctRole,
    DistinctOther,
}

impl EntityClass {
    pub fn is_distinct(self) -> bool {
        !matches!(self, EntityClass::Disparate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ContextType {
    VisuallyTangible,
    Emotional,
    Characteristic,
    VisuallyIntangible,
}

impl ContextType {
    pub const ALL: [ContextType; 4] = [
        ContextType::VisuallyTangible,
        ContextType::Emotional,
        ContextType::Characteristic,
        ContextType::VisuallyIntangible,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextType::VisuallyTangible => "visually_tangible",
            ContextType::Emotional => "emotional",
            ContextType::Characteristic => "characteristic",
            ContextType::VisuallyIntangible => "visually_intangible",
        }
    }
}

/// One schema item. `options[0]` is entity 1, `answer` indexes the referent.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WinoVisInstance {
    pub id: String,
    pub statement: String,
    pub pronoun: String,
    pub snippet: String,
    pub options: [String; 2],
    pub answer: i64,
    pub reason: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub entity_class: Option<EntityClass>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub context_type: Option<ContextType>,
}

impl WinoVisInstance {
    /// Builds an untagged instance whose id is derived from the statement.
    pub fn new(
        statement: impl Into<String>,
        pronoun: impl Into<String>,
        snippet: impl Into<String>,
        options: [&str; 2],
        answer: i64,
        reason: impl Into<String>,
    ) -> Self {
        let statement = statement.into();
        Self {
            id: instance_id(&statement),
            statement,
            pronoun: pronoun.into(),
            snippet: snippet.into(),
            options: options.map(String::from),
            answer,
            reason: reason.into(),
            entity_class: None,
            context_type: None,
        }
    }

    pub fn with_tags(mut self, entity_class: EntityClass, context_type: ContextType) -> Self {
        self.entity_class = Some(entity_class);
        self.context_type = Some(context_type);
        self
    }
}

/// Lower-cased statement with whitespace runs collapsed to single spaces.
pub fn normalize_statement(statement: &str) -> String {
    statement
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Content id: first 16 hex digits of SHA-256 over the normalised statement.
pub fn instance_id(statement: &str) -> String {
    let digest = Sha256::digest(normalize_statement(statement).as_bytes());
    hex::encode(&digest[..8])
}

/// Human filter outcome for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FilterVerdict {
    Accept,
    TextuallyAmbiguous,
    Illogical,
    VisuallyIndistinctive,
    Redundant,
}

impl FilterVerdict {
    pub const ALL: [FilterVerdict; 5] = [
        FilterVerdict::Accept,
        FilterVerdict::TextuallyAmbiguous,
        FilterVerdict::Illogical,
        FilterVerdict::VisuallyIndistinctive,
        FilterVerdict::Redundant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterVerdict::Accept => "accept",
            FilterVerdict::TextuallyAmbiguous => "textually_ambiguous",
            FilterVerdict::Illogical => "illogical",
            FilterVerdict::VisuallyIndistinctive => "visually_indistinctive",
            FilterVerdict::Redundant => "redundant",
        }
    }
}

impl fmt::Display for FilterVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for FilterVerdict {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        FilterVerdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or(crate::Error::InvalidSample("unknown filter verdict"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterLabel {
    pub instance_id: String,
    pub verdict: FilterVerdict,
    pub note: Option<String>,
}

/// Category shares of a tagged corpus, in percent of all instances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorpusDistribution {
    pub total: usize,
    pub disparate: f64,
    pub distinct: f64,
    /// Indexed like [`ContextType::ALL`].
    pub context: [f64; 4],
    pub untagged: usize,
}

pub fn corpus_distribution(instances: &[WinoVisInstance]) -> CorpusDistribution {
    let total = instances.len();
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let distinct = instances
        .iter()
        .filter(|i| i.entity_class.is_some_and(EntityClass::is_distinct))
        .count();
    let disparate = instances
        .iter()
        .filter(|i| i.entity_class == Some(EntityClass::Disparate))
        .count();
    let mut context = [0.0; 4];
    for (slot, ct) in context.iter_mut().zip(ContextType::ALL) {
        *slot = pct(instances.iter().filter(|i| i.context_type == Some(ct)).count());
    }
    CorpusDistribution {
        total,
        disparate: pct(disparate),
        distinct: pct(distinct),
        context,
        untagged: instances
            .iter()
            .filter(|i| i.entity_class.is_none() || i.context_type.is_none())
            .count(),
    }
}
