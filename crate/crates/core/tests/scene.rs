mod common;

use ris_core::reflect::{FeasibilitySet, ReflectionConfig};
use ris_core::scene::{composite_channel, evolve, snapshot_sequence, synthesize_channels, MobilityProfile};
use ris_core::{Error, C64};

const CONT: FeasibilitySet = FeasibilitySet::ContinuousPhase;

#[test]
fn composite_matches_elementwise_sum() {
    let sc = common::scenario(3, 2, &[(5, CONT), (4, CONT)], 1);
    let ch = synthesize_channels(&sc, 0).unwrap();
    let configs: Vec<ReflectionConfig> = (0..2)
        .map(|n| {
            let theta: Vec<C64> = (0..ch.elements(n))
                .map(|q| C64::from_polar(1.0, 0.7 * q as f64 + n as f64))
                .collect();
            ReflectionConfig::new(theta, CONT).unwrap()
        })
        .collect();
    let h = composite_channel(&ch, &configs).unwrap();
    for k in 0..2 {
        for l in 0..3 {
            let mut want = ch.direct[(k, l)];
            for n in 0..2 {
                for q in 0..ch.elements(n) {
                    want += ch.ris_user[n][(k, q)] * configs[n].theta()[q] * ch.bs_ris[n][(q, l)];
                }
            }
            assert!((h[(k, l)] - want).norm() <= 1e-12 * want.norm().max(1e-30));
        }
    }
}

#[test]
fn synthesis_is_reproducible_and_seed_sensitive() {
    let sc = common::scenario(2, 2, &[(4, CONT)], 9);
    let a = synthesize_channels(&sc, 3).unwrap();
    let b = synthesize_channels(&sc, 3).unwrap();
    assert_eq!(a, b);
    let mut other = sc.clone();
    other.seed = 10;
    assert_ne!(a.direct, synthesize_channels(&other, 3).unwrap().direct);
}

#[test]
fn configuration_length_must_match_panel() {
    let sc = common::scenario(2, 1, &[(4, CONT)], 2);
    let ch = synthesize_channels(&sc, 0).unwrap();
    let short = vec![ReflectionConfig::unit(3, CONT)];
    assert!(matches!(
        composite_channel(&ch, &short),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn more_users_than_antennas_is_rejected() {
    let sc = common::scenario(2, 3, &[(4, CONT)], 2);
    assert!(matches!(
        synthesize_channels(&sc, 0),
        Err(Error::InvalidScenario(_) | Error::Validation { .. })
    ));
}

#[test]
fn static_and_zero_drift_profiles_freeze_channels() {
    let sc = common::scenario(2, 2, &[(4, CONT)], 4);
    let ch = synthesize_channels(&sc, 0).unwrap();
    assert_eq!(evolve(&sc, &ch, &MobilityProfile::Static, 1).unwrap(), ch);
    let frozen = MobilityProfile::Stochastic { drift_sigma: 0.0 };
    assert_eq!(evolve(&sc, &ch, &frozen, 1).unwrap(), ch);
}

#[test]
fn stochastic_drift_keeps_average_power() {
    let sc = common::scenario(4, 2, &[(16, CONT)], 5);
    let profile = MobilityProfile::Stochastic { drift_sigma: 0.3 };
    let seq = snapshot_sequence(&sc, &profile, 400).unwrap();
    let power = |i: usize| seq[i].bs_ris[0].iter().map(|z| z.norm_sqr()).sum::<f64>();
    let early: f64 = (0..200).map(power).sum::<f64>() / 200.0;
    let late: f64 = (200..400).map(power).sum::<f64>() / 200.0;
    assert!((early / late - 1.0).abs() < 0.25, "{early} vs {late}");
    assert_ne!(seq[0], seq[1]);
}

#[test]
fn steerable_profile_moves_the_panel() {
    let sc = common::scenario(2, 1, &[(4, CONT)], 6);
    let profile = MobilityProfile::Steerable {
        ris: 0,
        trajectory: vec![[30.0, 12.0, 5.0], [60.0, 40.0, 5.0]],
    };
    let seq = snapshot_sequence(&sc, &profile, 3).unwrap();
    let mut there = sc.clone();
    there.ris[0].position = [60.0, 40.0, 5.0];
    assert_eq!(seq[1], synthesize_channels(&there, 1).unwrap());
    // the moved panel is farther from the BS, so its channel is weaker
    let power = |m: &ris_core::CMat| m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let near = synthesize_channels(&sc, 1).unwrap();
    assert!(power(&seq[1].bs_ris[0]) < power(&near.bs_ris[0]));
}
