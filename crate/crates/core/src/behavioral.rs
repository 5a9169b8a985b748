//! Level 3: behavioral evidential diagnosis.
//!
//! For each suspect, every failure type of its class is scored by mapping
//! per-feature Z-scores through trend-direction relational algorithms into
//! certainty factors, folding them with the certainty-factor calculus, and
//! ranking the resulting hypotheses. Beliefs can optionally be converted to
//! posterior probabilities given priors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComponentId, DetectorModel, ProbeId, TrendDirection, TrendSpec};
use crate::monitor::{z_score_or_substitute, BaselineArchive, FeatureName, FeatureVector};
use crate::structural::SuspectReport;

#[derive(Debug, Error)]
pub enum BehavioralError {
    #[error("contradictory certainty factors +1 and -1 cannot be combined")]
    Contradiction,
    #[error("certainty factor {0} outside [-1, 1]")]
    CfOutOfRange(f64),
    #[error("prior {0} outside (0, 1)")]
    PriorOutOfRange(f64),
    #[error("certainty factor {0} has no finite odds")]
    InfiniteOdds(f64),
    #[error("no feature vector for probe {0}")]
    MissingProbeFeatures(ProbeId),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// A candidate explanation: one failure type of one suspect component.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hypothesis {
    pub component: ComponentId,
    pub failure_type: String,
}

/// One piece of evidence: a feature Z-score mapped through a trend spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub probe: ProbeId,
    pub feature: FeatureName,
    pub z: f64,
    pub cf: f64,
    pub trend: TrendSpec,
}

/// A scored hypothesis with its full evidence trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisBelief {
    pub hypothesis: Hypothesis,
    pub combined_cf: f64,
    pub evidence: Vec<EvidenceItem>,
    pub posterior: Option<f64>,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Map a Z-score to a certainty factor through one of the four trend
/// relational algorithms. Output is bounded by the spec's weight and
/// continuous in z; large slopes make the mapping nearly discrete.
pub fn relational_cf(z: f64, spec: &TrendSpec) -> f64 {
    let TrendSpec {
        weight: w,
        slope: k,
        cutoff: c,
        direction,
    } = *spec;
    match direction {
        TrendDirection::Increasing => w * (2.0 * sigmoid(k * (z - c)) - 1.0),
        TrendDirection::Decreasing => w * (2.0 * sigmoid(k * (-z - c)) - 1.0),
        TrendDirection::Either => w * (2.0 * sigmoid(k * (z.abs() - c)) - 1.0),
        TrendDirection::NoChange => w * (1.0 - 2.0 * sigmoid(k * (z.abs() - c))),
    }
}

fn next_toward_zero(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// MYCIN-style certainty-factor combination.
///
/// The same-sign branches are evaluated in the symmetric forms
/// (a+b) - a*b and (a+b) + a*b so the result is bit-for-bit commutative.
/// When both operands lie strictly inside (-1, 1) the true result does too,
/// but rounding can saturate it to +/-1; those results are nudged back to
/// the nearest representable interior value so the calculus stays closed.
pub fn combine_cf(a: f64, b: f64) -> Result<f64, BehavioralError> {
    for v in [a, b] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(BehavioralError::CfOutOfRange(v));
        }
    }
    if (a == 1.0 && b == -1.0) || (a == -1.0 && b == 1.0) {
        return Err(BehavioralError::Contradiction);
    }
    let raw = if a >= 0.0 && b >= 0.0 {
        (a + b) - a * b
    } else if a <= 0.0 && b <= 0.0 {
        (a + b) + a * b
    } else {
        (a + b) / (1.0 - a.abs().min(b.abs()))
    };
    Ok(if raw.abs() >= 1.0 && a.abs() < 1.0 && b.abs() < 1.0 {
        next_toward_zero(raw.signum())
    } else {
        raw
    })
}

/// Fold an evidence list in its recorded order, starting from 0.
pub fn fold_evidence(evidence: &[EvidenceItem]) -> Result<f64, BehavioralError> {
    let mut acc = 0.0;
    for e in evidence {
        acc = combine_cf(acc, e.cf)?;
    }
    Ok(acc)
}

/// Convert a certainty factor to a posterior probability given a prior.
/// The likelihood ratio is 1/(1-cf) for supporting evidence and 1+cf for
/// refuting evidence; the posterior comes from the updated odds.
pub fn cf_to_probability(cf: f64, prior: f64) -> Result<f64, BehavioralError> {
    if !(cf > -1.0 && cf < 1.0) {
        return Err(BehavioralError::InfiniteOdds(cf));
    }
    if !(prior > 0.0 && prior < 1.0) {
        return Err(BehavioralError::PriorOutOfRange(prior));
    }
    if cf == 0.0 {
        // lambda = 1: the odds round-trip must leave the prior untouched.
        return Ok(prior);
    }
    let lambda = if cf >= 0.0 { 1.0 / (1.0 - cf) } else { 1.0 + cf };
    let odds = lambda * prior / (1.0 - prior);
    Ok(odds / (1.0 + odds))
}

/// Score one hypothesis: gather every matching behavioral entry over the
/// suspect's dependent probes, map Z-scores to certainty factors, and fold
/// in sorted (probe, feature) order. Probes whose feature value or baseline
/// norm is absent contribute no evidence.
pub fn score_hypothesis(
    hypothesis: &Hypothesis,
    model: &DetectorModel,
    features: &BTreeMap<ProbeId, FeatureVector>,
    archive: &BaselineArchive,
) -> Result<HypothesisBelief, BehavioralError> {
    let class = model.component_class(&hypothesis.component)?;
    let entries = model
        .behavior()
        .entries_for(&class.name, &hypothesis.failure_type);
    let probes = model.dependent_probes(&hypothesis.component)?;

    let mut evidence = Vec::new();
    for entry in entries {
        for probe in probes {
            if model.probe_kind(probe) != Some(entry.probe_role.as_str()) {
                continue;
            }
            let fv = features
                .get(probe)
                .ok_or_else(|| BehavioralError::MissingProbeFeatures(probe.clone()))?;
            let Some(x) = fv.get(entry.feature) else {
                continue;
            };
            let Some(baseline) = archive.probes.get(probe) else {
                continue;
            };
            let Some(norm) = baseline.feature_norms.get(&entry.feature) else {
                continue;
            };
            let z = z_score_or_substitute(x, norm.avg, norm.sd);
            evidence.push(EvidenceItem {
                probe: probe.clone(),
                feature: entry.feature,
                z,
                cf: relational_cf(z, &entry.trend),
                trend: entry.trend,
            });
        }
    }
    evidence.sort_by(|a, b| {
        (&a.probe, a.feature, a.trend.direction).cmp(&(&b.probe, b.feature, b.trend.direction))
    });
    let combined_cf = fold_evidence(&evidence)?;
    Ok(HypothesisBelief {
        hypothesis: hypothesis.clone(),
        combined_cf,
        evidence,
        posterior: None,
    })
}

/// Score every (suspect, failure type) hypothesis and rank by combined
/// certainty factor, breaking ties by structural rank, then hypothesis id.
///
/// Posteriors use the model's per-class prior when present; otherwise a
/// uniform prior over the suspect's ambiguity class (left absent for
/// singleton classes without a configured prior).
pub fn diagnose(
    suspects: &SuspectReport,
    model: &DetectorModel,
    features: &BTreeMap<ProbeId, FeatureVector>,
    archive: &BaselineArchive,
) -> Result<Vec<HypothesisBelief>, BehavioralError> {
    let mut beliefs = Vec::new();
    for entry in &suspects.entries {
        let class = model.component_class(&entry.component)?;
        for failure_type in &class.failure_types {
            let hypothesis = Hypothesis {
                component: entry.component.clone(),
                failure_type: failure_type.clone(),
            };
            let mut belief = score_hypothesis(&hypothesis, model, features, archive)?;
            let prior = match model.class_prior(&class.name) {
                Some(p) => Some(p),
                None => suspects
                    .class_of(&entry.component)
                    .filter(|class| class.len() > 1)
                    .map(|class| 1.0 / class.len() as f64),
            };
            if let Some(p) = prior {
                if belief.combined_cf > -1.0 && belief.combined_cf < 1.0 {
                    belief.posterior = Some(cf_to_probability(belief.combined_cf, p)?);
                }
            }
            beliefs.push(belief);
        }
    }
    let rank = |c: &ComponentId| suspects.rank_of(c).unwrap_or(usize::MAX);
    beliefs.sort_by(|a, b| {
        b.combined_cf
            .total_cmp(&a.combined_cf)
            .then_with(|| rank(&a.hypothesis.component).cmp(&rank(&b.hypothesis.component)))
            .then_with(|| a.hypothesis.cmp(&b.hypothesis))
    });
    Ok(beliefs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(direction: TrendDirection, w: f64, k: f64, c: f64) -> TrendSpec {
        TrendSpec {
            direction,
            weight: w,
            slope: k,
            cutoff: c,
        }
    }

    #[test]
    fn increasing_is_zero_at_cutoff() {
        for &(w, k, c) in &[(1.0, 2.0, 0.0), (0.5, 7.0, 3.0), (0.9, 100.0, -2.0)] {
            let s = spec(TrendDirection::Increasing, w, k, c);
            assert!(relational_cf(c, &s).abs() < 1e-15);
        }
    }

    #[test]
    fn increasing_matches_tanh() {
        let s = spec(TrendDirection::Increasing, 1.0, 2.0, 0.0);
        let v = relational_cf(1.0, &s);
        assert!((v - 1f64.tanh()).abs() < 1e-12);
        assert!((v - 0.7615942).abs() < 1e-7);
    }

    #[test]
    fn no_change_saturates_negative() {
        let s = spec(TrendDirection::NoChange, 1.0, 2.0, 1.0);
        assert!(relational_cf(1.0, &s).abs() < 1e-15);
        assert!(relational_cf(1e6, &s) < -0.999999);
    }

    #[test]
    fn decreasing_is_mirrored_increasing() {
        let inc = spec(TrendDirection::Increasing, 0.8, 3.0, 1.5);
        let dec = spec(TrendDirection::Decreasing, 0.8, 3.0, 1.5);
        for i in -50..=50 {
            let z = i as f64 / 5.0;
            assert_eq!(relational_cf(z, &dec), relational_cf(-z, &inc));
        }
    }

    #[test]
    fn output_bounded_by_weight() {
        for dir in [
            TrendDirection::Increasing,
            TrendDirection::Decreasing,
            TrendDirection::Either,
            TrendDirection::NoChange,
        ] {
            let s = spec(dir, 0.7, 5.0, 1.0);
            for i in -100..=100 {
                let z = i as f64 / 2.0;
                assert!(relational_cf(z, &s).abs() <= 0.7 + 1e-15);
            }
        }
    }

    #[test]
    fn near_discrete_limit() {
        let s = spec(TrendDirection::Increasing, 1.0, 100.0, 0.0);
        assert!(relational_cf(0.1, &s) >= 0.999);
        assert!(relational_cf(-0.1, &s) <= -0.999);
    }

    #[test]
    fn combine_identity_and_values() {
        assert_eq!(combine_cf(0.0, 0.37).unwrap(), 0.37);
        assert_eq!(combine_cf(-0.8, 0.0).unwrap(), -0.8);
        assert_eq!(combine_cf(0.5, 0.5).unwrap(), 0.75);
        let v = combine_cf(0.8, -0.5).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }

    #[test]
    fn combine_is_commutative() {
        for &(a, b) in &[(0.3, 0.9), (-0.2, 0.7), (-0.6, -0.5), (0.99, -0.98)] {
            assert_eq!(combine_cf(a, b).unwrap(), combine_cf(b, a).unwrap());
        }
    }

    #[test]
    fn combine_rejects_contradiction() {
        assert!(matches!(
            combine_cf(1.0, -1.0),
            Err(BehavioralError::Contradiction)
        ));
        assert!(combine_cf(1.0, 1.0).is_ok());
        assert!(matches!(
            combine_cf(1.5, 0.0),
            Err(BehavioralError::CfOutOfRange(_))
        ));
    }

    #[test]
    fn combine_closed_in_open_interval() {
        let mut a = 0.0;
        for i in 0..1000 {
            let b = if i % 2 == 0 { 0.97 } else { -0.93 };
            a = combine_cf(a, b).unwrap();
            assert!(a > -1.0 && a < 1.0);
        }
    }

    #[test]
    fn conversion_direct_values() {
        assert_eq!(cf_to_probability(0.0, 0.5).unwrap(), 0.5);
        assert!((cf_to_probability(0.5, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((cf_to_probability(-0.5, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(cf_to_probability(1.0, 0.5).is_err());
        assert!(cf_to_probability(0.5, 1.0).is_err());
    }

    #[test]
    fn conversion_preserves_prior_at_zero_cf() {
        for &p in &[0.01, 0.25, 0.5, 0.73, 0.999] {
            let post = cf_to_probability(0.0, p).unwrap();
            assert!((post - p).abs() < 1e-15);
        }
    }

    #[test]
    fn fold_reproduces_combined_cf() {
        let ev: Vec<EvidenceItem> = [0.9, -0.4, 0.6, 0.2]
            .iter()
            .enumerate()
            .map(|(i, &cf)| EvidenceItem {
                probe: ProbeId::new(format!("p{i}")),
                feature: FeatureName::Mean,
                z: 0.0,
                cf,
                trend: spec(TrendDirection::Increasing, 1.0, 1.0, 0.0),
            })
            .collect();
        let folded = fold_evidence(&ev).unwrap();
        assert_eq!(folded, fold_evidence(&ev).unwrap());
        let mut manual = 0.0;
        for e in &ev {
            manual = combine_cf(manual, e.cf).unwrap();
        }
        assert_eq!(folded, manual);
    }

    #[test]
    fn two_strong_evidences_compound() {
        let a = combine_cf(0.0, 0.9).unwrap();
        let b = combine_cf(a, 0.9).unwrap();
        assert!((b - 0.99).abs() < 1e-12);
    }
}
