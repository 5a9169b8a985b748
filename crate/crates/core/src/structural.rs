//! Level 2: structural suspect reduction.
//!
//! Operates only on Boolean probe verdicts and the dependency map. A
//! component with every dependent probe OK is exonerated; the rest form the
//! suspect set, ranked by BAD/total probe ratio and partitioned into
//! ambiguity classes of identical signatures.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComponentId, DetectorModel, ProbeId};
use crate::monitor::{ProbeState, ProbeVerdict};

#[derive(Debug, Error)]
pub enum StructuralError {
    #[error("no verdict for probe {0}")]
    MissingVerdict(ProbeId),
    #[error("duplicate verdict for probe {0}")]
    DuplicateVerdict(ProbeId),
    #[error("verdict for probe {0} not in model")]
    UnknownProbe(ProbeId),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// One ranked suspect with its BAD/total dependent-probe counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspectEntry {
    pub component: ComponentId,
    pub bad_probes: usize,
    pub total_probes: usize,
    pub ratio: f64,
}

/// Ranked suspects plus the partition of suspects into ambiguity classes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuspectReport {
    pub entries: Vec<SuspectEntry>,
    pub ambiguity_classes: Vec<Vec<ComponentId>>,
}

impl SuspectReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 0-based structural rank of a component, if it is a suspect.
    pub fn rank_of(&self, c: &ComponentId) -> Option<usize> {
        self.entries.iter().position(|e| &e.component == c)
    }

    /// The ambiguity class containing `c`, if any.
    pub fn class_of(&self, c: &ComponentId) -> Option<&[ComponentId]> {
        self.ambiguity_classes
            .iter()
            .find(|class| class.contains(c))
            .map(|class| class.as_slice())
    }
}

fn verdict_map<'a>(
    model: &DetectorModel,
    verdicts: &'a [ProbeVerdict],
) -> Result<BTreeMap<&'a ProbeId, ProbeState>, StructuralError> {
    let mut map = BTreeMap::new();
    for v in verdicts {
        if !model.has_probe(&v.probe) {
            return Err(StructuralError::UnknownProbe(v.probe.clone()));
        }
        if map.insert(&v.probe, v.state).is_some() {
            return Err(StructuralError::DuplicateVerdict(v.probe.clone()));
        }
    }
    for p in model.probe_ids() {
        if !map.contains_key(p) {
            return Err(StructuralError::MissingVerdict(p.clone()));
        }
    }
    Ok(map)
}

/// Exonerate every component whose dependent probes are all OK; return the
/// components with at least one BAD dependent probe.
pub fn reduce_suspects(
    model: &DetectorModel,
    verdicts: &[ProbeVerdict],
) -> Result<BTreeSet<ComponentId>, StructuralError> {
    let states = verdict_map(model, verdicts)?;
    let mut suspects = BTreeSet::new();
    for v in verdicts {
        if states[&v.probe] == ProbeState::Bad {
            for c in model.upstream_components(&v.probe)? {
                suspects.insert(c.clone());
            }
        }
    }
    Ok(suspects)
}

/// Rank suspects by BAD/total ratio descending; ties broken by fewer total
/// probes, then by component id.
pub fn rank_suspects(
    model: &DetectorModel,
    verdicts: &[ProbeVerdict],
    suspects: &BTreeSet<ComponentId>,
) -> Result<Vec<SuspectEntry>, StructuralError> {
    let states = verdict_map(model, verdicts)?;
    let mut entries = Vec::with_capacity(suspects.len());
    for c in suspects {
        let probes = model.dependent_probes(c)?;
        let total = probes.len();
        let bad = probes
            .iter()
            .filter(|p| states[*p] == ProbeState::Bad)
            .count();
        entries.push(SuspectEntry {
            component: c.clone(),
            bad_probes: bad,
            total_probes: total,
            ratio: bad as f64 / total as f64,
        });
    }
    // cross-multiplied ratio comparison keeps ties exact
    entries.sort_by(|a, b| {
        let ra = a.bad_probes * b.total_probes;
        let rb = b.bad_probes * a.total_probes;
        rb.cmp(&ra)
            .then(a.total_probes.cmp(&b.total_probes))
            .then(a.component.cmp(&b.component))
    });
    Ok(entries)
}

/// Partition suspects into classes of identical dependent-probe signatures,
/// ordered by smallest member id.
pub fn ambiguity_classes(
    model: &DetectorModel,
    suspects: &BTreeSet<ComponentId>,
) -> Result<Vec<Vec<ComponentId>>, StructuralError> {
    let mut by_signature: BTreeMap<&BTreeSet<ProbeId>, Vec<ComponentId>> = BTreeMap::new();
    for c in suspects {
        by_signature
            .entry(model.dependent_probes(c)?)
            .or_default()
            .push(c.clone());
    }
    let mut classes: Vec<Vec<ComponentId>> = by_signature.into_values().collect();
    classes.sort_by(|a, b| a[0].cmp(&b[0]));
    Ok(classes)
}

/// Full level-2 pass: reduce, rank, partition.
pub fn suspect_report(
    model: &DetectorModel,
    verdicts: &[ProbeVerdict],
) -> Result<SuspectReport, StructuralError> {
    let suspects = reduce_suspects(model, verdicts)?;
    let entries = rank_suspects(model, verdicts, &suspects)?;
    let ambiguity = ambiguity_classes(model, &suspects)?;
    Ok(SuspectReport {
        entries,
        ambiguity_classes: ambiguity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BehaviorEntry, ComponentClass};

    /// Small fixture: serial chain pmt1 -> cable1 -> splitter1 sharing probes
    /// {a1, t1}; adc board over {a1, a2}; second channel pmt2 over {a2, t2}.
    fn chain_model() -> DetectorModel {
        let classes = vec![ComponentClass {
            name: "part".into(),
            failure_types: vec!["broken".into()],
        }];
        let probes = vec![
            (ProbeId::new("a1"), "amplitude".into()),
            (ProbeId::new("t1"), "timing".into()),
            (ProbeId::new("a2"), "amplitude".into()),
            (ProbeId::new("t2"), "timing".into()),
        ];
        let dep = |ids: &[&str]| ids.iter().map(|s| ProbeId::new(*s)).collect::<BTreeSet<_>>();
        let depends: BTreeMap<ComponentId, BTreeSet<ProbeId>> = [
            (ComponentId::new("pmt1"), dep(&["a1", "t1"])),
            (ComponentId::new("cable1"), dep(&["a1", "t1"])),
            (ComponentId::new("splitter1"), dep(&["a1", "t1"])),
            (ComponentId::new("pmt2"), dep(&["a2", "t2"])),
            (ComponentId::new("adc"), dep(&["a1", "a2"])),
        ]
        .into_iter()
        .collect();
        let components = depends
            .keys()
            .map(|c| (c.clone(), "part".to_string()))
            .collect();
        DetectorModel::from_parts(
            components,
            probes,
            depends,
            classes,
            vec![BehaviorEntry {
                class: "part".into(),
                failure_type: "broken".into(),
                feature: crate::monitor::FeatureName::Mean,
                probe_role: "amplitude".into(),
                trend: crate::model::TrendSpec {
                    direction: crate::model::TrendDirection::Either,
                    weight: 0.9,
                    slope: 2.0,
                    cutoff: 3.0,
                },
            }],
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn verdicts(bad: &[&str]) -> Vec<ProbeVerdict> {
        ["a1", "t1", "a2", "t2"]
            .iter()
            .map(|p| ProbeVerdict {
                probe: ProbeId::new(*p),
                state: if bad.contains(p) {
                    ProbeState::Bad
                } else {
                    ProbeState::Ok
                },
                statistic: if bad.contains(p) { 99.0 } else { 0.5 },
                dof: 10,
            })
            .collect()
    }

    #[test]
    fn all_ok_means_no_suspects() {
        let m = chain_model();
        assert!(reduce_suspects(&m, &verdicts(&[])).unwrap().is_empty());
    }

    #[test]
    fn one_bad_probe_yields_exactly_upstream() {
        let m = chain_model();
        let suspects = reduce_suspects(&m, &verdicts(&["a1"])).unwrap();
        let expected = m
            .upstream_components(&ProbeId::new("a1"))
            .unwrap()
            .clone();
        assert_eq!(suspects, expected);
        assert_eq!(suspects.len(), 4); // pmt1, cable1, splitter1, adc
    }

    #[test]
    fn exonerated_components_have_no_bad_probes() {
        // brute-force soundness check
        let m = chain_model();
        let vs = verdicts(&["a1", "t2"]);
        let suspects = reduce_suspects(&m, &vs).unwrap();
        let states: BTreeMap<_, _> = vs.iter().map(|v| (v.probe.clone(), v.state)).collect();
        for (c, _) in m.components() {
            if !suspects.contains(c) {
                let bad = m
                    .dependent_probes(c)
                    .unwrap()
                    .iter()
                    .filter(|p| states[*p] == ProbeState::Bad)
                    .count();
                assert_eq!(bad, 0, "exonerated {c} has BAD probes");
            }
        }
    }

    #[test]
    fn missing_and_duplicate_verdicts_rejected() {
        let m = chain_model();
        let mut vs = verdicts(&[]);
        let dup = vs[0].clone();
        vs.push(dup);
        assert!(matches!(
            reduce_suspects(&m, &vs),
            Err(StructuralError::DuplicateVerdict(_))
        ));
        let vs = &verdicts(&[])[..3];
        assert!(matches!(
            reduce_suspects(&m, vs),
            Err(StructuralError::MissingVerdict(_))
        ));
    }

    #[test]
    fn ranking_three_of_four_beats_four_of_eight() {
        // the canonical ordering example: A with 3/4 BAD ranks ahead of B with 4/8
        let classes = vec![ComponentClass {
            name: "part".into(),
            failure_types: vec!["broken".into()],
        }];
        let probes: Vec<(ProbeId, String)> = (0..8)
            .map(|i| (ProbeId::new(format!("p{i}")), "amplitude".to_string()))
            .collect();
        let a_probes: BTreeSet<ProbeId> = (0..4).map(|i| ProbeId::new(format!("p{i}"))).collect();
        let b_probes: BTreeSet<ProbeId> = (0..8).map(|i| ProbeId::new(format!("p{i}"))).collect();
        let depends = [
            (ComponentId::new("A"), a_probes),
            (ComponentId::new("B"), b_probes),
        ]
        .into_iter()
        .collect();
        let m = DetectorModel::from_parts(
            vec![
                (ComponentId::new("A"), "part".into()),
                (ComponentId::new("B"), "part".into()),
            ],
            probes,
            depends,
            classes,
            Vec::new(),
            BTreeMap::new(),
        )
        .unwrap();
        // p0..p2 BAD and p4 BAD: A has 3/4, B has 4/8
        let vs: Vec<ProbeVerdict> = (0..8)
            .map(|i| ProbeVerdict {
                probe: ProbeId::new(format!("p{i}")),
                state: if i < 3 || i == 4 {
                    ProbeState::Bad
                } else {
                    ProbeState::Ok
                },
                statistic: 1.0,
                dof: 10,
            })
            .collect();
        let report = suspect_report(&m, &vs).unwrap();
        assert_eq!(report.entries[0].component, ComponentId::new("A"));
        assert_eq!(report.entries[0].bad_probes, 3);
        assert_eq!(report.entries[0].total_probes, 4);
        assert_eq!(report.entries[1].component, ComponentId::new("B"));
        assert_eq!(report.entries[1].bad_probes, 4);
        assert_eq!(report.entries[1].total_probes, 8);
    }

    #[test]
    fn equal_ratio_ties_break_by_fewer_totals() {
        let m = chain_model();
        // a1 BAD: pmt1/cable1/splitter1 have 1/2, adc has 1/2; totals equal,
        // so id order decides. Check ratio ordering invariant instead.
        let report = suspect_report(&m, &verdicts(&["a1"])).unwrap();
        for w in report.entries.windows(2) {
            assert!(w[0].ratio >= w[1].ratio);
        }
        // both channels' amp probes BAD: adc 2/2 ranks ahead of chains 1/2
        let report = suspect_report(&m, &verdicts(&["a1", "a2"])).unwrap();
        assert_eq!(report.entries[0].component, ComponentId::new("adc"));
    }

    #[test]
    fn serial_chain_forms_ambiguity_class_of_three() {
        let m = chain_model();
        let suspects = reduce_suspects(&m, &verdicts(&["a1", "t1"])).unwrap();
        let classes = ambiguity_classes(&m, &suspects).unwrap();
        let triple = classes.iter().find(|c| c.len() == 3).expect("no triple");
        assert_eq!(
            triple,
            &vec![
                ComponentId::new("cable1"),
                ComponentId::new("pmt1"),
                ComponentId::new("splitter1")
            ]
        );
    }

    #[test]
    fn empty_suspects_empty_partition() {
        let m = chain_model();
        assert!(ambiguity_classes(&m, &BTreeSet::new()).unwrap().is_empty());
    }

    #[test]
    fn monotone_in_bad_verdicts() {
        let m = chain_model();
        let s1 = reduce_suspects(&m, &verdicts(&["a1"])).unwrap();
        let s2 = reduce_suspects(&m, &verdicts(&["a1", "t2"])).unwrap();
        assert!(s1.is_subset(&s2));
    }
}
