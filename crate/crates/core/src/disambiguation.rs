//! The verdict pipeline: caption filter, percentile masks, entity-overlap
//! filter, then the pronoun decision boundary.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::attribution::TokenHeatmapSet;
use crate::grid::{iou, threshold_mask, Heatmap2D};
use crate::{Error, Result};

/// Thresholds of the pipeline. Both IoU comparisons are strict (`>`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineConfig {
    pub quantile_q: f64,
    pub overlap_threshold: f64,
    pub decision_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            quantile_q: 0.9,
            overlap_threshold: 0.4,
            decision_threshold: 0.4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantile_q > 0.0 && self.quantile_q < 1.0) {
            return Err(Error::InvalidConfig("quantile must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return Err(Error::InvalidConfig("overlap threshold must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(Error::InvalidConfig("decision threshold must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One of the two referent entities. `Entity1` is option index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Entity {
    Entity1,
    Entity2,
}

impl Entity {
    pub fn from_answer(answer: i64) -> Option<Self> {
        match answer {
            0 => Some(Entity::Entity1),
            1 => Some(Entity::Entity2),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Entity::Entity1 => 0,
            Entity::Entity2 => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Entity::Entity1 => Entity::Entity2,
            Entity::Entity2 => Entity::Entity1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Entity::Entity1 => "entity1",
            Entity::Entity2 => "entity2",
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Entity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity1" => Ok(Entity::Entity1),
            "entity2" => Ok(Entity::Entity2),
            _ => Err(Error::InvalidSample("unknown entity name")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Status {
    Captioned,
    Overlapped,
    Correct,
    Incorrect,
    Neither,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Captioned,
        Status::Overlapped,
        Status::Correct,
        Status::Incorrect,
        Status::Neither,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Captioned => "captioned",
            Status::Overlapped => "overlapped",
            Status::Correct => "correct",
            Status::Incorrect => "incorrect",
            Status::Neither => "neither",
        }
    }

    pub fn is_evaluable(self) -> bool {
        matches!(self, Status::Correct | Status::Incorrect | Status::Neither)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Status::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or(Error::InvalidSample("unknown status"))
    }
}

/// Role of a prompt token in a heatmap bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TokenRole {
    Entity1,
    Entity2,
    Pronoun,
    Other,
}

impl TokenRole {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenRole::Entity1 => "entity1",
            TokenRole::Entity2 => "entity2",
            TokenRole::Pronoun => "pronoun",
            TokenRole::Other => "other",
        }
    }
}

/// Outcome of one instance. IoU fields are filled as far as the pipeline got.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstanceVerdict {
    pub instance_id: String,
    pub status: Status,
    pub predicted: Option<Entity>,
    pub iou_entities: Option<f64>,
    pub iou_pronoun_e1: Option<f64>,
    pub iou_pronoun_e2: Option<f64>,
}

/// How the decision boundary resolved (or failed to resolve) the pronoun.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    /// Exactly one entity exceeded the boundary.
    Single(Entity),
    /// Both exceeded it; the higher IoU wins.
    Both(Entity),
    /// Both exceeded it with identical IoU.
    Tie,
    /// Neither exceeded it.
    Below,
}

impl Decision {
    pub fn predicted(self) -> Option<Entity> {
        match self {
            Decision::Single(e) | Decision::Both(e) => Some(e),
            Decision::Tie | Decision::Below => None,
        }
    }
}

pub fn decide(iou_e1: f64, iou_e2: f64, threshold: f64) -> Decision {
    match (iou_e1 > threshold, iou_e2 > threshold) {
        (true, false) => Decision::Single(Entity::Entity1),
        (false, true) => Decision::Single(Entity::Entity2),
        (false, false) => Decision::Below,
        (true, true) if iou_e1 > iou_e2 => Decision::Both(Entity::Entity1),
        (true, true) if iou_e2 > iou_e1 => Decision::Both(Entity::Entity2),
        (true, true) => Decision::Tie,
    }
}

/// The three heatmaps the pipeline needs for one instance.
#[derive(Debug, Clone, Copy)]
pub struct RoleHeatmaps<'a> {
    pub entity1: &'a Heatmap2D,
    pub entity2: &'a Heatmap2D,
    pub pronoun: &'a Heatmap2D,
}

impl<'a> RoleHeatmaps<'a> {
    pub fn from_set(set: &'a TokenHeatmapSet, entity1: &str, entity2: &str, pronoun: &str) -> Result<Self> {
        let lookup = |role: &'static str, token: &str| {
            set.get(token).ok_or_else(|| Error::MissingToken {
                role,
                token: token.into(),
            })
        };
        Ok(Self {
            entity1: lookup("entity1", entity1)?,
            entity2: lookup("entity2", entity2)?,
            pronoun: lookup("pronoun", pronoun)?,
        })
    }

    fn check_dims(&self) -> Result<()> {
        let d = self.entity1.dims();
        for other in [self.entity2, self.pronoun] {
            if other.dims() != d {
                return Err(Error::DimensionMismatch(d.0, d.1, other.width(), other.height()));
            }
        }
        Ok(())
    }
}

/// Runs the four pipeline stages on one instance.
pub fn evaluate_instance(
    instance_id: &str,
    heatmaps: RoleHeatmaps<'_>,
    gold: Entity,
    caption_flag: bool,
    cfg: &PipelineConfig,
) -> Result<InstanceVerdict> {
    cfg.validate()?;
    let mut verdict = InstanceVerdict {
        instance_id: instance_id.into(),
        status: Status::Captioned,
        predicted: None,
        iou_entities: None,
        iou_pronoun_e1: None,
        iou_pronoun_e2: None,
    };
    if caption_flag {
        return Ok(verdict);
    }
    heatmaps.check_dims()?;

    let e1 = threshold_mask(heatmaps.entity1, cfg.quantile_q)?;
    let e2 = threshold_mask(heatmaps.entity2, cfg.quantile_q)?;
    let iou_entities = iou(&e1, &e2)?;
    verdict.iou_entities = Some(iou_entities);
    if iou_entities > cfg.overlap_threshold {
        verdict.status = Status::Overlapped;
        return Ok(verdict);
    }

    let pronoun = threshold_mask(heatmaps.pronoun, cfg.quantile_q)?;
    let s1 = iou(&pronoun, &e1)?;
    let s2 = iou(&pronoun, &e2)?;
    verdict.iou_pronoun_e1 = Some(s1);
    verdict.iou_pronoun_e2 = Some(s2);
    verdict.predicted = decide(s1, s2, cfg.decision_threshold).predicted();
    verdict.status = match verdict.predicted {
        Some(p) if p == gold => Status::Correct,
        Some(_) => Status::Incorrect,
        None => Status::Neither,
    };
    Ok(verdict)
}

#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub instance_id: &'a str,
    pub heatmaps: RoleHeatmaps<'a>,
    pub caption_flag: bool,
}

/// Evaluates every item in input order. All ids must have a gold answer.
pub fn evaluate_batch(
    items: &[BatchItem<'_>],
    golds: &BTreeMap<String, Entity>,
    cfg: &PipelineConfig,
) -> Result<Vec<InstanceVerdict>> {
    let unknown: Vec<String> = items
        .iter()
        .filter(|it| !golds.contains_key(it.instance_id))
        .map(|it| it.instance_id.into())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownInstances(unknown));
    }
    items
        .iter()
        .map(|it| evaluate_instance(it.instance_id, it.heatmaps, golds[it.instance_id], it.caption_flag, cfg))
        .collect()
}
