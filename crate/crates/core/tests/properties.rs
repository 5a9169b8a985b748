//! Randomized property tests over the core numerics and model machinery.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use probemon::behavioral::{combine_cf, relational_cf};
use probemon::model::{ComponentClass, ComponentId, DetectorModel, ProbeId, TrendDirection, TrendSpec};
use probemon::monitor::{build_histogram, chi_square_stat};
use probemon::simulator::{build_synthetic_model, SyntheticSpec};
use probemon::structural::ambiguity_classes;

fn cf() -> impl Strategy<Value = f64> {
    (-0.9999f64..=0.9999).prop_filter("interior", |v| v.abs() < 1.0)
}

proptest! {
    #[test]
    fn histogram_conserves_counts(
        values in prop::collection::vec(-1e3f64..1e3, 0..200),
        lo in -50.0f64..0.0,
        width in 0.1f64..10.0,
        bins in 2usize..30,
    ) {
        let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let h = build_histogram(values.iter().copied(), &edges).unwrap();
        prop_assert_eq!(h.total() as usize, values.len());
    }

    #[test]
    fn combine_is_commutative_and_closed(a in cf(), b in cf()) {
        let ab = combine_cf(a, b).unwrap();
        let ba = combine_cf(b, a).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(ab > -1.0 && ab < 1.0);
    }

    #[test]
    fn combine_identity_and_sign(a in cf()) {
        prop_assert_eq!(combine_cf(a, 0.0).unwrap().to_bits(), a.to_bits());
        // Supporting evidence never weakens a belief of the same sign.
        if a >= 0.0 {
            prop_assert!(combine_cf(a, 0.5).unwrap() >= a);
        } else {
            prop_assert!(combine_cf(a, -0.5).unwrap() <= a);
        }
    }

    #[test]
    fn relational_cf_bounded_and_antisymmetric(
        z in -100.0f64..100.0,
        w in 0.01f64..1.0,
        k in 0.1f64..200.0,
        c in -10.0f64..10.0,
    ) {
        let spec = |direction| TrendSpec { direction, weight: w, slope: k, cutoff: c };
        let inc = relational_cf(z, &spec(TrendDirection::Increasing));
        let dec = relational_cf(-z, &spec(TrendDirection::Decreasing));
        prop_assert!(inc.abs() <= w);
        prop_assert_eq!(inc.to_bits(), dec.to_bits());
        // NoChange is the negation of Either.
        let either = relational_cf(z, &spec(TrendDirection::Either));
        let none = relational_cf(z, &spec(TrendDirection::NoChange));
        prop_assert!((either + none).abs() < 1e-15);
    }

    #[test]
    fn chi_square_zero_on_match(expected in prop::collection::vec(5.0f64..100.0, 2..20)) {
        let (stat, dof) = chi_square_stat(&expected, &expected).unwrap();
        prop_assert!(stat.abs() < 1e-12);
        prop_assert_eq!(dof, expected.len() - 1);
    }

    #[test]
    fn census_matches_generated_model(
        n_slats in 1usize..40,
        pmts_per_slat in 1usize..3,
        hv_group in 1usize..20,
        board_group in 1usize..20,
        boards_per_crate in 1usize..10,
    ) {
        let spec = SyntheticSpec {
            n_slats,
            pmts_per_slat,
            hv_group,
            board_group,
            boards_per_crate,
            ..SyntheticSpec::default()
        };
        let detector = build_synthetic_model(&spec).unwrap();
        prop_assert_eq!(detector.model.component_count(), spec.component_census());
        prop_assert_eq!(detector.model.probe_count(), spec.probe_census());
        prop_assert_eq!(spec.probe_census(), 2 * spec.channels());
    }

    #[test]
    fn model_serialization_round_trips(n_slats in 1usize..20) {
        let spec = SyntheticSpec { n_slats, ..SyntheticSpec::default() };
        let model = build_synthetic_model(&spec).unwrap().model;
        let text = model.serialize();
        let reloaded = DetectorModel::load(&text).unwrap();
        prop_assert_eq!(reloaded.serialize(), text);
    }

    #[test]
    fn ambiguity_partition_matches_brute_force(
        signatures in prop::collection::vec(prop::collection::btree_set(0usize..8, 1..6), 1..30),
    ) {
        let probes: Vec<ProbeId> = (0..8).map(|i| ProbeId::new(format!("p{i}"))).collect();
        let mut components = Vec::new();
        let mut depends = BTreeMap::new();
        for (i, sig) in signatures.iter().enumerate() {
            let id = ComponentId::new(format!("c{i:02}"));
            components.push((id.clone(), "part".to_string()));
            depends.insert(id, sig.iter().map(|&j| probes[j].clone()).collect::<BTreeSet<_>>());
        }
        let model = DetectorModel::from_parts(
            components,
            probes.iter().map(|p| (p.clone(), "amplitude".into())).collect(),
            depends.clone(),
            vec![ComponentClass { name: "part".into(), failure_types: vec!["fail".into()] }],
            Vec::new(),
            BTreeMap::new(),
        ).unwrap();
        let suspects: BTreeSet<ComponentId> = depends.keys().cloned().collect();
        let classes = ambiguity_classes(&model, &suspects).unwrap();

        // Oracle: components are in the same class iff signatures are equal.
        for a in &suspects {
            for b in &suspects {
                let same_class = classes.iter().any(|cl| cl.contains(a) && cl.contains(b));
                let same_sig = depends[a] == depends[b];
                prop_assert_eq!(same_class, same_sig, "{} vs {}", a, b);
            }
        }
        // Every suspect appears exactly once.
        let members: Vec<&ComponentId> = classes.iter().flatten().collect();
        prop_assert_eq!(members.len(), suspects.len());
    }
}
