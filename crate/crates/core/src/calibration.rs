//! Threshold calibration against human labels.
//!
//! For each candidate threshold the rule "IoU > threshold" is compared with
//! the human judgement; agreement is the fraction of pairs where both match.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledPair {
    pub instance_id: String,
    pub iou_value: f64,
    pub human_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgreementPoint {
    pub threshold: f64,
    pub agreement: f64,
}

/// `0, step, 2*step, ..., 1`. The default step is 0.05.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidGrid);
    }
    let n = libm::round(1.0 / step) as usize;
    if (n as f64 * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidGrid);
    }
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

pub fn default_grid() -> Vec<f64> {
    threshold_grid(0.05).expect("0.05 divides 1")
}

pub fn agreement_curve(pairs: &[LabeledPair], thresholds: &[f64]) -> Result<Vec<AgreementPoint>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("labeled pairs"));
    }
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("threshold grid"));
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid);
    }
    if let Some(p) = pairs.iter().find(|p| !(0.0..=1.0).contains(&p.iou_value)) {
        return Err(Error::IouOutOfRange(p.iou_value));
    }
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let agree = pairs
                .iter()
                .filter(|p| (p.iou_value > threshold) == p.human_positive)
                .count();
            AgreementPoint {
                threshold,
                agreement: agree as f64 / pairs.len() as f64,
            }
        })
        .collect())
}

/// Smallest threshold reaching the maximal agreement; `None` for an empty curve.
pub fn select_threshold(curve: &[AgreementPoint]) -> Option<f64> {
    let best = curve.iter().map(|p| p.agreement).fold(f64::NEG_INFINITY, f64::max);
    curve.iter().find(|p| p.agreement == best).map(|p| p.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pair(iou_value: f64, human_positive: bool) -> LabeledPair {
        LabeledPair {
            instance_id: "x".into(),
            iou_value,
            human_positive,
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[8], 0.4);
        assert_eq!(g[20], 1.0);
        assert!(threshold_grid(0.3).is_err());
        assert!(threshold_grid(0.0).is_err());
    }

    #[test]
    fn all_positive_at_one() {
        let pairs = vec![pair(1.0, true); 4];
        let curve = agreement_curve(&pairs, &default_grid()).unwrap();
        for p in &curve {
            let want = if p.threshold < 1.0 { 1.0 } else { 0.0 };
            assert_eq!(p.agreement, want, "theta {}", p.threshold);
        }
    }

    #[test]
    fn single_negative_pair() {
        let curve = agreement_curve(&[pair(0.5, false)], &[0.4, 0.6]).unwrap();
        assert_eq!(
            curve,
            vec![
                AgreementPoint { threshold: 0.4, agreement: 0.0 },
                AgreementPoint { threshold: 0.6, agreement: 1.0 },
            ]
        );
    }

    #[test]
    fn select_examples() {
        let pts = |v: &[(f64, f64)]| -> Vec<AgreementPoint> {
            v.iter().map(|&(threshold, agreement)| AgreementPoint { threshold, agreement }).collect()
        };
        assert_eq!(select_threshold(&pts(&[(0.2, 0.8), (0.4, 1.0), (0.6, 1.0)])), Some(0.4));
        assert_eq!(select_threshold(&pts(&[(0.1, 0.5), (0.2, 0.5)])), Some(0.1));
        assert_eq!(select_threshold(&[]), None);
    }

    #[test]
    fn input_errors() {
        assert_eq!(agreement_curve(&[], &[0.5]), Err(Error::EmptyInput("labeled pairs")));
        assert_eq!(agreement_curve(&[pair(0.5, true)], &[]), Err(Error::EmptyInput("threshold grid")));
        assert_eq!(agreement_curve(&[pair(0.5, true)], &[0.5, 0.4]), Err(Error::InvalidGrid));
        assert_eq!(agreement_curve(&[pair(1.5, true)], &[0.5]), Err(Error::IouOutOfRange(1.5)));
    }
}
