//! Verdict counts, binary and multi-class metrics, and two-proportion Z-tests.
//!
//! Ratios are kept as exact fractions until they are rendered. A metric whose
//! denominator is zero is absent.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{ContextType, EntityClass, WinoVisInstance};
use crate::disambiguation::{Entity, InstanceVerdict, Status};
use crate::{Error, Result};

/// Reports with fewer than this many predictions are flagged as low support.
pub const LOW_SUPPORT_PREDICTIONS: u64 = 5;

/// A non-negative exact fraction.
#[derive(Debug, Clone, Copy)]
pub struct Ratio {
    num: u128,
    den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    /// `None` when the denominator is zero.
    pub fn new(num: u128, den: u128) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        Some(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numer(&self) -> u128 {
        self.num
    }

    pub fn denom(&self) -> u128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    fn add(self, other: Self) -> Self {
        Self::new(self.num * other.den + other.num * self.den, self.den * other.den)
            .expect("nonzero denominators")
    }

    fn halve(self) -> Self {
        Self::new(self.num, self.den * 2).expect("nonzero denominator")
    }

    /// Harmonic mean `2ab / (a + b)`, absent when `a + b == 0`.
    fn harmonic_mean(self, other: Self) -> Option<Self> {
        let num = 2 * self.num * other.num;
        let den = self.num * other.den + other.num * self.den;
        Self::new(num, den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Value in percent.
    pub fn percent(&self) -> f64 {
        (self.num * 100) as f64 / self.den as f64
    }

    /// Percent rounded half away from zero to `decimals` places, computed exactly.
    pub fn render_percent(&self, decimals: u32) -> String {
        let scale = 10u128.pow(decimals);
        let scaled = self.num * 100 * scale;
        let rounded = (2 * scaled + self.den) / (2 * self.den);
        if decimals == 0 {
            format!("{rounded}")
        } else {
            format!(
                "{}.{:0width$}",
                rounded / scale,
                rounded % scale,
                width = decimals as usize
            )
        }
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.num * other.den == other.num * self.den
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some((self.num * other.den).cmp(&(other.num * self.den)))
    }
}

/// Renders an optional percentage to one decimal, `"N/A"` when absent.
pub fn render_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.1}", libm::round(v * 10.0) / 10.0),
        None => "N/A".into(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerdictCounts {
    pub captioned: u64,
    pub overlapped: u64,
    pub correct: u64,
    pub incorrect: u64,
    pub neither: u64,
}

impl VerdictCounts {
    pub fn evaluable(&self) -> u64 {
        self.correct + self.incorrect + self.neither
    }

    pub fn total(&self) -> u64 {
        self.evaluable() + self.captioned + self.overlapped
    }

    pub fn predictions(&self) -> u64 {
        self.correct + self.incorrect
    }

    pub fn record(&mut self, status: Status) {
        match status {
            Status::Captioned => self.captioned += 1,
            Status::Overlapped => self.overlapped += 1,
            Status::Correct => self.correct += 1,
            Status::Incorrect => self.incorrect += 1,
            Status::Neither => self.neither += 1,
        }
    }

    pub fn get(&self, status: Status) -> u64 {
        match status {
            Status::Captioned => self.captioned,
            Status::Overlapped => self.overlapped,
            Status::Correct => self.correct,
            Status::Incorrect => self.incorrect,
            Status::Neither => self.neither,
        }
    }

    pub fn from_statuses(statuses: impl IntoIterator<Item = Status>) -> Self {
        let mut counts = Self::default();
        for s in statuses {
            counts.record(s);
        }
        counts
    }

    pub fn from_verdicts(verdicts: &[InstanceVerdict]) -> Self {
        Self::from_statuses(verdicts.iter().map(|v| v.status))
    }
}

/// Rows are the true entity, columns the predicted one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix2 {
    pub c11: u64,
    pub c12: u64,
    pub c21: u64,
    pub c22: u64,
}

impl ConfusionMatrix2 {
    pub fn record(&mut self, truth: Entity, predicted: Entity) {
        match (truth, predicted) {
            (Entity::Entity1, Entity::Entity1) => self.c11 += 1,
            (Entity::Entity1, Entity::Entity2) => self.c12 += 1,
            (Entity::Entity2, Entity::Entity1) => self.c21 += 1,
            (Entity::Entity2, Entity::Entity2) => self.c22 += 1,
        }
    }

    pub fn correct(&self) -> u64 {
        self.c11 + self.c22
    }

    pub fn incorrect(&self) -> u64 {
        self.c12 + self.c21
    }

    pub fn multiclass(&self) -> MulticlassMetrics {
        multiclass_metrics(self.c11, self.c22, self.c21, self.c12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryMetrics {
    pub precision: Option<Ratio>,
    pub recall: Option<Ratio>,
    pub f1: Option<Ratio>,
    pub certainty: Option<Ratio>,
}

/// Precision `C/(C+I)`, recall `C/(C+N)` with "neither" as a miss, their
/// harmonic mean, and certainty `(C+I)/evaluable`.
pub fn binary_metrics(counts: &VerdictCounts) -> BinaryMetrics {
    let (c, i, n) = (
        u128::from(counts.correct),
        u128::from(counts.incorrect),
        u128::from(counts.neither),
    );
    let precision = Ratio::new(c, c + i);
    let recall = Ratio::new(c, c + n);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => p.harmonic_mean(r),
        _ => None,
    };
    BinaryMetrics {
        precision,
        recall,
        f1,
        certainty: Ratio::new(c + i, c + i + n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulticlassMetrics {
    pub accuracy: Option<Ratio>,
    pub macro_precision: Option<Ratio>,
    pub macro_recall: Option<Ratio>,
    pub macro_f1: Option<Ratio>,
}

/// Two-class view that ignores "neither" outcomes.
///
/// `wrong_pred_e1` counts predictions of entity 1 that were wrong (true
/// entity 2), and vice versa. Macro averages are absent if either class
/// value is absent.
pub fn multiclass_metrics(
    correct_e1: u64,
    correct_e2: u64,
    wrong_pred_e1: u64,
    wrong_pred_e2: u64,
) -> MulticlassMetrics {
    let (c1, c2, w1, w2) = (
        u128::from(correct_e1),
        u128::from(correct_e2),
        u128::from(wrong_pred_e1),
        u128::from(wrong_pred_e2),
    );
    let mean = |a: Option<Ratio>, b: Option<Ratio>| Some(a?.add(b?).halve());
    let macro_precision = mean(Ratio::new(c1, c1 + w1), Ratio::new(c2, c2 + w2));
    let macro_recall = mean(Ratio::new(c1, c1 + w2), Ratio::new(c2, c2 + w1));
    let macro_f1 = match (macro_precision, macro_recall) {
        (Some(p), Some(r)) => p.harmonic_mean(r),
        _ => None,
    };
    MulticlassMetrics {
        accuracy: Ratio::new(c1 + c2, c1 + c2 + w1 + w2),
        macro_precision,
        macro_recall,
        macro_f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZTest {
    pub z: f64,
    pub p_two_sided: f64,
}

/// Pooled two-proportion Z-test of `c1/n1` against `c2/n2`.
pub fn ztest_two_proportions(c1: u64, n1: u64, c2: u64, n2: u64) -> Result<ZTest> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidSample("sample sizes must be positive"));
    }
    if c1 > n1 || c2 > n2 {
        return Err(Error::InvalidSample("successes exceed sample size"));
    }
    if c1 + c2 == 0 || c1 + c2 == n1 + n2 {
        return Err(Error::DegenerateProportions);
    }
    let (c1, n1, c2, n2) = (c1 as f64, n1 as f64, c2 as f64, n2 as f64);
    let pooled = (c1 + c2) / (n1 + n2);
    let se = libm::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    let z = (c1 / n1 - c2 / n2) / se;
    Ok(ZTest {
        z,
        p_two_sided: normal_two_sided_p(z),
    })
}

/// `2 * (1 - Phi(|z|))`, via the complementary error function.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(libm::fabs(z) / core::f64::consts::SQRT_2)
}

/// Metrics that are proportions and therefore admit a two-proportion test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ProportionMetric {
    Precision,
    Recall,
    Certainty,
}

impl ProportionMetric {
    pub const ALL: [ProportionMetric; 3] = [
        ProportionMetric::Precision,
        ProportionMetric::Recall,
        ProportionMetric::Certainty,
    ];

    /// The `(successes, trials)` pair behind the metric.
    pub fn sample(self, counts: &VerdictCounts) -> (u64, u64) {
        let (c, i, n) = (counts.correct, counts.incorrect, counts.neither);
        match self {
            ProportionMetric::Precision => (c, c + i),
            ProportionMetric::Recall => (c, c + n),
            ProportionMetric::Certainty => (c + i, c + i + n),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProportionMetric::Precision => "precision",
            ProportionMetric::Recall => "recall",
            ProportionMetric::Certainty => "certainty",
        }
    }
}

pub fn compare_proportion(metric: ProportionMetric, a: &VerdictCounts, b: &VerdictCounts) -> Result<ZTest> {
    let (c1, n1) = metric.sample(a);
    let (c2, n2) = metric.sample(b);
    ztest_two_proportions(c1, n1, c2, n2)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MulticlassSummary {
    pub accuracy: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
}

/// Share of each status in the total, in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatusShares {
    pub captioned: Option<f64>,
    pub overlapped: Option<f64>,
    pub correct: Option<f64>,
    pub incorrect: Option<f64>,
    pub neither: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub counts: VerdictCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub certainty: Option<f64>,
    pub confusion: ConfusionMatrix2,
    pub multiclass: MulticlassSummary,
    pub shares: StatusShares,
    pub low_support: bool,
    pub per_category: BTreeMap<String, MetricsReport>,
}

impl MetricsReport {
    fn from_parts(counts: VerdictCounts, confusion: ConfusionMatrix2) -> Self {
        let pct = |r: Option<Ratio>| r.map(|r| r.percent());
        let b = binary_metrics(&counts);
        let m = confusion.multiclass();
        let share = |s: Status| {
            Ratio::new(u128::from(counts.get(s)), u128::from(counts.total())).map(|r| r.percent())
        };
        Self {
            counts,
            precision: pct(b.precision),
            recall: pct(b.recall),
            f1: pct(b.f1),
            certainty: pct(b.certainty),
            confusion,
            multiclass: MulticlassSummary {
                accuracy: pct(m.accuracy),
                macro_precision: pct(m.macro_precision),
                macro_recall: pct(m.macro_recall),
                macro_f1: pct(m.macro_f1),
            },
            shares: StatusShares {
                captioned: share(Status::Captioned),
                overlapped: share(Status::Overlapped),
                correct: share(Status::Correct),
                incorrect: share(Status::Incorrect),
                neither: share(Status::Neither),
            },
            low_support: counts.predictions() < LOW_SUPPORT_PREDICTIONS,
            per_category: BTreeMap::new(),
        }
    }
}

pub fn entity_class_key(class: Option<EntityClass>) -> String {
    let name = match class {
        Some(c) if c.is_distinct() => "distinct",
        Some(_) => "disparate",
        None => "untagged",
    };
    format!("entity_class:{name}")
}

pub fn context_type_key(context: Option<ContextType>) -> String {
    format!("context_type:{}", context.map_or("untagged", ContextType::as_str))
}

#[derive(Default)]
struct Tally {
    counts: VerdictCounts,
    confusion: ConfusionMatrix2,
}

impl Tally {
    fn add(&mut self, status: Status, truth: Entity, predicted: Option<Entity>) {
        self.counts.record(status);
        if let Some(p) = predicted {
            self.confusion.record(truth, p);
        }
    }
}

/// Aggregates verdicts into counts, metrics, confusion matrix and per-category
/// sub-reports (entity class and context type).
pub fn build_report(
    verdicts: &[InstanceVerdict],
    instances: &BTreeMap<String, WinoVisInstance>,
) -> Result<MetricsReport> {
    let unknown: Vec<String> = verdicts
        .iter()
        .filter(|v| !instances.contains_key(&v.instance_id))
        .map(|v| v.instance_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownInstances(unknown));
    }

    let mut all = Tally::default();
    let mut by_category: BTreeMap<String, Tally> = BTreeMap::new();
    for v in verdicts {
        let inst = &instances[&v.instance_id];
        let truth = Entity::from_answer(inst.answer)
            .ok_or(Error::InvalidSample("instance answer must be 0 or 1"))?;
        let consistent = match (v.status, v.predicted) {
            (Status::Correct, Some(p)) => p == truth,
            (Status::Incorrect, Some(p)) => p != truth,
            (Status::Correct | Status::Incorrect, None) => false,
            (_, p) => p.is_none(),
        };
        if !consistent {
            return Err(Error::InvalidSample("verdict disagrees with the gold answer"));
        }
        all.add(v.status, truth, v.predicted);
        for key in [entity_class_key(inst.entity_class), context_type_key(inst.context_type)] {
            by_category.entry(key).or_default().add(v.status, truth, v.predicted);
        }
    }

    let mut report = MetricsReport::from_parts(all.counts, all.confusion);
    report.per_category = by_category
        .into_iter()
        .map(|(k, t)| (k, MetricsReport::from_parts(t.counts, t.confusion)))
        .collect();
    Ok(report)
}
