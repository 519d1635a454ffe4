use std::f64::consts::PI;

use proptest::prelude::*;
use ris_core::reflect::{
    control_payload_bits, expand, grid_point, project, Clustering, FeasibilitySet, ReflectionConfig,
};
use ris_core::{Error, C64};

#[test]
fn payload_bits_per_set() {
    let disc = ReflectionConfig::from_phase_indices(&[0, 1, 2, 3, 4], 8);
    assert_eq!(control_payload_bits(&disc, None, None).unwrap(), 15);
    let cl = Clustering::contiguous(5, 2).unwrap();
    assert_eq!(control_payload_bits(&disc, Some(&cl), None).unwrap(), 6);
    let cont = ReflectionConfig::unit(5, FeasibilitySet::ContinuousPhase);
    assert_eq!(control_payload_bits(&cont, None, Some(6)).unwrap(), 30);
    let gen = ReflectionConfig::unit(5, FeasibilitySet::General);
    assert_eq!(control_payload_bits(&gen, None, Some(6)).unwrap(), 60);
    assert!(matches!(
        control_payload_bits(&cont, None, None),
        Err(Error::MissingQuantizationDepth)
    ));
}

#[test]
fn expand_rejects_short_cluster_vector() {
    let cl = Clustering::new(vec![0, 1, 2, 1], 3).unwrap();
    let one = [C64::new(1.0, 0.0); 2];
    assert!(matches!(expand(&one, &cl), Err(Error::IndexOutOfRange { .. })));
    let v = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
    assert_eq!(expand(&v, &cl).unwrap(), vec![v[0], v[1], v[2], v[1]]);
}

#[test]
fn infeasible_configuration_is_rejected() {
    let bad = vec![C64::new(2.0, 0.0)];
    assert!(ReflectionConfig::new(bad, FeasibilitySet::General).is_err());
}

proptest! {
    #[test]
    fn discrete_projection_is_nearest_grid_point(re in -3.0..3.0f64, im in -3.0..3.0f64, tau in 1u32..17) {
        let z = C64::new(re, im);
        prop_assume!(z.norm() > 1e-6);
        let p = project(&[z], FeasibilitySet::DiscretePhase { tau })[0];
        let best = (0..tau).map(|m| (grid_point(m, tau) - z).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!((p - z).norm() <= best + 1e-12);
    }

    #[test]
    fn continuous_projection_keeps_phase(r in 1e-3..5.0f64, a in -PI..PI) {
        let p = project(&[C64::from_polar(r, a)], FeasibilitySet::ContinuousPhase)[0];
        prop_assert!((p.norm() - 1.0).abs() < 1e-12);
        prop_assert!((p - C64::from_polar(1.0, a)).norm() < 1e-9);
    }

    #[test]
    fn contiguous_clusters_are_balanced(q in 1usize..64, r in 1usize..64) {
        prop_assume!(r <= q);
        let cl = Clustering::contiguous(q, r).unwrap();
        let sizes: Vec<usize> = cl.members().iter().map(Vec::len).collect();
        prop_assert_eq!(sizes.len(), r);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
