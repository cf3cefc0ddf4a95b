//! Deterministic synthetic scenarios with analytically known verdicts.
//!
//! Every role token gets a heatmap that is a constant-amplitude disc over
//! uniform background noise strictly below the amplitude. When the disc
//! covers more pixels than the quantile position leaves above it, the
//! percentile mask is exactly the disc, so the expected IoUs are plain set
//! computations on disc membership.
//!
//! Noise comes from ChaCha8 (`rand_chacha`) seeded with
//! `SeedableRng::seed_from_u64(spec.seed)`. Grids are filled in token order,
//! row-major, one `next_u32` per background cell, mapped to
//! `(u >> 8) * 2^-24 * ceiling` in `f32`. Suites derive scenario `i` from a
//! ChaCha8 generator seeded with the suite seed on stream `i`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::WinoVisInstance;
use crate::disambiguation::{Entity, InstanceVerdict, PipelineConfig, Status, TokenRole};
use crate::{Error, Result};

/// A disc in relative coordinates. The radius is relative to the shorter side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub amplitude: f64,
    pub role: TokenRole,
}

impl BlobSpec {
    fn contains(&self, width: usize, height: usize, x: usize, y: usize) -> bool {
        let r = self.radius * width.min(height) as f64;
        let dx = x as f64 + 0.5 - self.center_x * width as f64;
        let dy = y as f64 + 0.5 - self.center_y * height as f64;
        dx * dx + dy * dy <= r * r
    }

    fn membership(&self, width: usize, height: usize) -> Vec<bool> {
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| self.contains(width, height, x, y))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub statement: String,
    /// Tokens for entity 1, entity 2 and the pronoun.
    pub role_tokens: [String; 3],
    pub width: usize,
    pub height: usize,
    /// One blob per role: entity 1, entity 2, pronoun (any order).
    pub blobs: Vec<BlobSpec>,
    pub background_noise_amplitude: f64,
    pub caption_flag: bool,
    pub gold: Entity,
    /// When set, generation fails unless the geometry yields this status.
    pub expected_status: Option<Status>,
    pub seed: u64,
}

/// Which way the pipeline resolved a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    Captioned,
    Overlapped,
    /// Exactly one entity above the decision boundary.
    Single,
    /// Both above it, distinct IoUs.
    Both,
    /// Both above it with identical IoUs.
    Tie,
    /// Neither above it.
    Below,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Captioned => "captioned",
            Branch::Overlapped => "overlapped",
            Branch::Single => "single",
            Branch::Both => "both",
            Branch::Tie => "tie",
            Branch::Below => "below",
        }
    }
}

/// A generated bundle: `f32` grids in token order plus the expected outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBundle {
    pub instance: WinoVisInstance,
    pub width: usize,
    pub height: usize,
    pub tokens: Vec<String>,
    pub roles: Vec<TokenRole>,
    pub caption_flag: bool,
    pub grids: Vec<Vec<f32>>,
    pub expected: InstanceVerdict,
    pub branch: Branch,
}

/// Fewest disc pixels for which the `q`-quantile lands strictly above every
/// background value of an `n`-pixel grid.
pub fn min_disc_area(n: usize, q: f64) -> usize {
    let pos = (n - 1) as f64 * q;
    let above = (n - 1) as f64 - pos;
    libm::floor(above) as usize + 1
}

fn set_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn blob_for(spec: &ScenarioSpec, role: TokenRole) -> Result<&BlobSpec> {
    let mut found = spec.blobs.iter().filter(|b| b.role == role);
    match (found.next(), found.next()) {
        (Some(b), None) => Ok(b),
        _ => Err(Error::InvalidScenario(format!(
            "need exactly one {} blob",
            role.as_str()
        ))),
    }
}

fn check_spec(spec: &ScenarioSpec, cfg: &PipelineConfig) -> Result<[Vec<bool>; 3]> {
    cfg.validate()?;
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::ZeroDimension {
            width: spec.width,
            height: spec.height,
        });
    }
    if spec.blobs.len() != 3 || spec.blobs.iter().any(|b| b.role == TokenRole::Other) {
        return Err(Error::InvalidScenario("blobs must be entity1, entity2, pronoun".into()));
    }
    let noise = spec.background_noise_amplitude;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidScenario("noise amplitude must be non-negative".into()));
    }
    let n = spec.width * spec.height;
    let min_area = min_disc_area(n, cfg.quantile_q);
    let roles = [TokenRole::Entity1, TokenRole::Entity2, TokenRole::Pronoun];
    let mut sets: [Vec<bool>; 3] = Default::default();
    for (slot, role) in sets.iter_mut().zip(roles) {
        let blob = blob_for(spec, role)?;
        if !((0.0..=1.0).contains(&blob.center_x) && (0.0..=1.0).contains(&blob.center_y)) {
            return Err(Error::InvalidScenario("blob centre outside the unit square".into()));
        }
        if !(blob.radius > 0.0 && blob.radius <= 0.5) {
            return Err(Error::InvalidScenario("blob radius must lie in (0, 0.5]".into()));
        }
        if !(blob.amplitude > noise && blob.amplitude.is_finite()) {
            return Err(Error::InvalidScenario("blob amplitude must exceed the noise ceiling".into()));
        }
        let set = blob.membership(spec.width, spec.height);
        let area = set.iter().filter(|&&b| b).count();
        if area < min_area {
            return Err(Error::InvalidScenario(format!(
                "{} disc covers {area} pixels, thresholding needs at least {min_area}",
                role.as_str()
            )));
        }
        *slot = set;
    }
    Ok(sets)
}

/// Expected verdict from disc geometry alone.
fn expected_verdict(spec: &ScenarioSpec, sets: &[Vec<bool>; 3], cfg: &PipelineConfig) -> (InstanceVerdict, Branch) {
    let mut v = InstanceVerdict {
        instance_id: spec.id.clone(),
        status: Status::Captioned,
        predicted: None,
        iou_entities: None,
        iou_pronoun_e1: None,
        iou_pronoun_e2: None,
    };
    if spec.caption_flag {
        return (v, Branch::Captioned);
    }
    let [e1, e2, p] = sets;
    let entities = set_iou(e1, e2);
    v.iou_entities = Some(entities);
    if entities > cfg.overlap_threshold {
        v.status = Status::Overlapped;
        return (v, Branch::Overlapped);
    }
    let (s1, s2) = (set_iou(p, e1), set_iou(p, e2));
    v.iou_pronoun_e1 = Some(s1);
    v.iou_pronoun_e2 = Some(s2);
    let t = cfg.decision_threshold;
    let (predicted, branch) = if s1 > t && s2 > t {
        if s1 == s2 {
            (None, Branch::Tie)
        } else if s1 > s2 {
            (Some(Entity::Entity1), Branch::Both)
        } else {
            (Some(Entity::Entity2), Branch::Both)
        }
    } else if s1 > t {
        (Some(Entity::Entity1), Branch::Single)
    } else if s2 > t {
        (Some(Entity::Entity2), Branch::Single)
    } else {
        (None, Branch::Below)
    };
    v.predicted = predicted;
    v.status = match predicted {
        None => Status::Neither,
        Some(e) if e == spec.gold => Status::Correct,
        Some(_) => Status::Incorrect,
    };
    (v, branch)
}

fn unit_f32(rng: &mut ChaCha8Rng) -> f32 {
    (rng.next_u32() >> 8) as f32 * (1.0 / (1u32 << 24) as f32)
}

/// Token that carries pure noise, so bundles also exercise the `other` role.
pub const FILLER_TOKEN: &str = "because";

/// Renders the heatmaps of a scenario and its expected verdict.
pub fn synth_bundle(spec: &ScenarioSpec, cfg: &PipelineConfig) -> Result<SynthBundle> {
    let sets = check_spec(spec, cfg)?;
    let (expected, branch) = expected_verdict(spec, &sets, cfg);
    if let Some(planted) = spec.expected_status {
        if planted != expected.status {
            return Err(Error::InvalidScenario(format!(
                "planted status {planted} but geometry gives {}",
                expected.status
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ceiling = spec.background_noise_amplitude as f32;
    let n = spec.width * spec.height;
    let mut grids = Vec::with_capacity(4);
    let roles = [TokenRole::Entity1, TokenRole::Entity2, TokenRole::Pronoun];
    for (set, role) in sets.iter().zip(roles) {
        let amplitude = blob_for(spec, role)?.amplitude as f32;
        let grid = set
            .iter()
            .map(|&inside| if inside { amplitude } else { unit_f32(&mut rng) * ceiling })
            .collect();
        grids.push(grid);
    }
    grids.push((0..n).map(|_| unit_f32(&mut rng) * ceiling).collect());

    let [t1, t2, tp] = &spec.role_tokens;
    let instance = WinoVisInstance {
        id: spec.id.clone(),
        statement: spec.statement.clone(),
        pronoun: tp.clone(),
        snippet: format!("{tp} was nearby"),
        options: [t1.clone(), t2.clone()],
        answer: spec.gold.index() as i64,
        reason: "synthetic fixture".into(),
        entity_class: None,
        context_type: None,
    };
    Ok(SynthBundle {
        instance,
        width: spec.width,
        height: spec.height,
        tokens: vec![t1.clone(), t2.clone(), tp.clone(), FILLER_TOKEN.to_string()],
        roles: vec![TokenRole::Entity1, TokenRole::Entity2, TokenRole::Pronoun, TokenRole::Other],
        caption_flag: spec.caption_flag,
        grids,
        expected,
        branch,
    })
}

const VOCAB: [(&str, &str, &str); 8] = [
    ("thief", "diamond", "it"),
    ("plumber", "pipe", "it"),
    ("dog", "car", "it"),
    ("king", "advisor", "he"),
    ("cat", "vacuum cleaner", "it"),
    ("man", "child", "he"),
    ("ant", "leaf", "it"),
    ("bee", "flower", "it"),
];

/// Suite grid size; every template below is laid out in its pixel units.
pub const SUITE_SIZE: usize = 64;

struct Template {
    e1: (f64, f64, f64),
    e2: (f64, f64, f64),
    pronoun: (f64, f64, f64),
    caption: bool,
    /// Gold relative to the entity the pronoun resolves to (if any).
    gold_matches: bool,
    status: Status,
}

const LEFT: (f64, f64, f64) = (16.0, 16.0, 12.0);
const RIGHT: (f64, f64, f64) = (48.0, 16.0, 12.0);
const NEAR_LEFT: (f64, f64, f64) = (26.0, 32.0, 13.0);
const NEAR_RIGHT: (f64, f64, f64) = (38.0, 32.0, 13.0);

const TEMPLATES: [Template; 10] = [
    Template { e1: LEFT, e2: RIGHT, pronoun: LEFT, caption: true, gold_matches: true, status: Status::Captioned },
    Template { e1: LEFT, e2: LEFT, pronoun: (48.0, 48.0, 12.0), caption: false, gold_matches: true, status: Status::Overlapped },
    Template { e1: (28.0, 32.0, 14.0), e2: (36.0, 32.0, 14.0), pronoun: (32.0, 52.0, 12.0), caption: false, gold_matches: true, status: Status::Overlapped },
    Template { e1: LEFT, e2: RIGHT, pronoun: LEFT, caption: false, gold_matches: true, status: Status::Correct },
    Template { e1: LEFT, e2: RIGHT, pronoun: LEFT, caption: false, gold_matches: false, status: Status::Incorrect },
    Template { e1: NEAR_LEFT, e2: NEAR_RIGHT, pronoun: (30.0, 32.0, 15.0), caption: false, gold_matches: true, status: Status::Correct },
    Template { e1: NEAR_LEFT, e2: NEAR_RIGHT, pronoun: (30.0, 32.0, 15.0), caption: false, gold_matches: false, status: Status::Incorrect },
    Template { e1: NEAR_LEFT, e2: NEAR_RIGHT, pronoun: (32.0, 32.0, 15.0), caption: false, gold_matches: true, status: Status::Neither },
    Template { e1: LEFT, e2: RIGHT, pronoun: (32.0, 48.0, 12.0), caption: false, gold_matches: true, status: Status::Neither },
    Template { e1: LEFT, e2: RIGHT, pronoun: (26.0, 16.0, 12.0), caption: false, gold_matches: true, status: Status::Neither },
];

/// `count` scenarios cycling through every status and decision branch.
///
/// Each scenario is a pure function of `(seed, index)`: the generator seeded
/// with `seed` is switched to stream `index` before drawing.
pub fn synth_suite(count: usize, seed: u64) -> Vec<ScenarioSpec> {
    (0..count).map(|i| scenario(seed, i)).collect()
}

fn scenario(seed: u64, index: usize) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let t = &TEMPLATES[index % TEMPLATES.len()];
    let swap = rng.next_u32() & 1 == 1;
    let flip = rng.next_u32() & 1 == 1;
    let (w1, w2, wp) = VOCAB[(rng.next_u32() as usize) % VOCAB.len()];
    let amp = |rng: &mut ChaCha8Rng| 1.0 + 3.0 * f64::from(unit_f32(rng));
    let amplitudes = [amp(&mut rng), amp(&mut rng), amp(&mut rng)];
    let min_amp = amplitudes.iter().copied().fold(f64::INFINITY, f64::min);
    let noise = min_amp * (0.1 + 0.8 * f64::from(unit_f32(&mut rng)));
    let noise_seed = rng.next_u64();

    let size = SUITE_SIZE as f64;
    let to_blob = |(x, y, r): (f64, f64, f64), amplitude: f64, role: TokenRole| BlobSpec {
        center_x: x / size,
        center_y: if flip { (size - y) / size } else { y / size },
        radius: r / size,
        amplitude,
        role,
    };
    let (g1, g2) = if swap { (t.e2, t.e1) } else { (t.e1, t.e2) };
    let blobs = vec![
        to_blob(g1, amplitudes[0], TokenRole::Entity1),
        to_blob(g2, amplitudes[1], TokenRole::Entity2),
        to_blob(t.pronoun, amplitudes[2], TokenRole::Pronoun),
    ];
    // Resolving templates put the pronoun on entity 1; elsewhere gold is arbitrary.
    let referent = if swap { Entity::Entity2 } else { Entity::Entity1 };
    let gold = if t.gold_matches { referent } else { referent.other() };

    let statement = format!("Scenario {seed}-{index}: the {w1} watched the {w2} because {wp} was nearby.");
    ScenarioSpec {
        id: crate::corpus::instance_id(&statement),
        statement,
        role_tokens: [w1.into(), w2.into(), wp.into()],
        width: SUITE_SIZE,
        height: SUITE_SIZE,
        blobs,
        background_noise_amplitude: noise,
        caption_flag: t.caption,
        gold,
        expected_status: Some(t.status),
        seed: noise_seed,
    }
}
