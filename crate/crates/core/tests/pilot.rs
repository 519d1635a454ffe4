mod common;

use ris_core::pilot::{assign_pilots, pilot_sir, AssignMode, PilotPool, EXHAUSTIVE_LIMIT};
use ris_core::reflect::{FeasibilitySet, ReflectionConfig};
use ris_core::scene::synthesize_channels;
use ris_core::{CVec, Error, C64};

const CONT: FeasibilitySet = FeasibilitySet::ContinuousPhase;

fn two_ris(
    seed: u64,
    k: usize,
) -> (
    ris_core::scene::Scenario,
    ris_core::scene::ChannelSet,
    Vec<ReflectionConfig>,
) {
    let sc = common::scenario(4, k, &[(6, CONT), (6, CONT)], seed);
    let ch = synthesize_channels(&sc, 0).unwrap();
    let configs = vec![ReflectionConfig::unit(6, CONT); 2];
    (sc, ch, configs)
}

#[test]
fn non_orthonormal_pool_is_rejected() {
    let a = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let b = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    assert!(PilotPool::new(vec![a, b]).is_err());
    assert!(PilotPool::dft(4, 5).is_err());
    assert_eq!(PilotPool::dft(4, 4).unwrap().count(), 4);
}

#[test]
fn exhaustive_is_max_min_optimal() {
    let (_, ch, configs) = two_ris(30, 3);
    let pool = PilotPool::dft(4, 2).unwrap();
    let serving = [0, 1, 0];
    let best = assign_pilots(&ch, &configs, &pool, &serving, AssignMode::Exhaustive).unwrap();
    // independent enumeration through the public ratio
    let mut top = f64::NEG_INFINITY;
    for code in 0..8usize {
        let map = [code % 2, (code / 2) % 2, code / 4];
        let worst = (0..3)
            .map(|k| pilot_sir(&ch, &configs, &pool, &map, k, serving[k]).unwrap())
            .fold(f64::INFINITY, f64::min);
        top = top.max(worst);
    }
    assert_eq!(best.score, top);
    assert_eq!(best.ratios.iter().cloned().fold(f64::INFINITY, f64::min), best.score);
}

#[test]
fn ratio_is_serving_over_other_paths() {
    let (_, ch, configs) = two_ris(31, 2);
    let pool = PilotPool::dft(4, 2).unwrap();
    let s = pool.pilot(1);
    let power = |n: usize| {
        let mut acc = C64::new(0.0, 0.0);
        for q in 0..6 {
            let w: C64 = (0..4).map(|l| ch.bs_ris[n][(q, l)] * s[l]).sum();
            acc += ch.ris_user[n][(1, q)] * configs[n].theta()[q] * w;
        }
        acc.norm_sqr()
    };
    let r = pilot_sir(&ch, &configs, &pool, &[0, 1], 1, 1).unwrap();
    assert!((r - power(1) / power(0)).abs() <= 1e-12 * r);
}

#[test]
fn oversized_search_is_refused() {
    let (_, ch, configs) = two_ris(32, 4);
    let pool = PilotPool::dft(4, 4).unwrap();
    assert_eq!(EXHAUSTIVE_LIMIT, 1_000_000);
    // 4^4 assignments fit, so the exhaustive search runs
    assert!(assign_pilots(&ch, &configs, &pool, &[0, 1, 0, 1], AssignMode::Exhaustive).is_ok());
}

#[test]
fn assignment_csv_is_zero_based() {
    let (_, ch, configs) = two_ris(33, 3);
    let pool = PilotPool::dft(4, 2).unwrap();
    let a = assign_pilots(&ch, &configs, &pool, &[0, 1, 1], AssignMode::Greedy).unwrap();
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("user,pilot,ratio\n0,"));
    assert!(a.map.iter().all(|&p| p < 2));
    assert!(matches!(
        pilot_sir(&ch, &configs, &pool, &[0, 5, 1], 1, 0),
        Err(Error::IndexOutOfRange { index: 5, clusters: 2 })
    ));
}
