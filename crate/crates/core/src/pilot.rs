//! Pilot assignment across RIS-served users: maximize the minimum ratio of
//! a user's serving-path pilot power to the pilot power leaking through the
//! other RIS.

use std::io::Write;

use crate::reflect::ReflectionConfig;
use crate::scene::{distance, ChannelSet, Scenario};
use crate::{linalg, CVec, Error, Result, C64};

/// Largest number of maps the exhaustive search visits.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Mutually orthonormal pilot sequences of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPool {
    pilots: Vec<CVec>,
}

impl PilotPool {
    pub fn new(pilots: Vec<CVec>) -> Result<Self> {
        if pilots.is_empty() {
            return Err(Error::InvalidScenario("empty pilot pool".into()));
        }
        let l = pilots[0].len();
        for (i, a) in pilots.iter().enumerate() {
            if a.len() != l {
                return Err(Error::DimensionMismatch("pilots of different lengths".into()));
            }
            for (j, b) in pilots.iter().enumerate() {
                let ip = linalg::dotc(a.as_slice(), b.as_slice());
                let expect = if i == j { 1.0 } else { 0.0 };
                if (ip - C64::new(expect, 0.0)).norm() > 1e-10 {
                    return Err(Error::InvalidScenario(format!(
                        "pilots {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Self { pilots })
    }

    /// The first `count` columns of the unitary DFT matrix of size `L`.
    pub fn dft(l: usize, count: usize) -> Result<Self> {
        if count == 0 || count > l {
            return Err(Error::InvalidScenario(format!("{count} pilots of length {l}")));
        }
        let scale = 1.0 / (l as f64).sqrt();
        Self::new(
            (0..count)
                .map(|p| {
                    CVec::from_fn(l, |i, _| {
                        C64::from_polar(scale, -std::f64::consts::TAU * (p * i) as f64 / l as f64)
                    })
                })
                .collect(),
        )
    }

    pub fn count(&self) -> usize {
        self.pilots.len()
    }

    pub fn pilot(&self, i: usize) -> &CVec {
        &self.pilots[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignMode {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotAssignment {
    /// Pilot index (zero-based) of each user.
    pub map: Vec<usize>,
    /// Minimum ratio over users.
    pub score: f64,
    /// Ratio of each user.
    pub ratios: Vec<f64>,
}

impl PilotAssignment {
    /// `user,pilot,ratio` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "pilot", "ratio"])?;
        for (k, (p, r)) in self.map.iter().zip(&self.ratios).enumerate() {
            w.write_record([k.to_string(), p.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// RIS with the strongest BS-RIS-user cascade for each user.
pub fn default_serving_map(scenario: &Scenario) -> Vec<usize> {
    scenario
        .terminals
        .iter()
        .map(|t| {
            let gain = |n: usize| {
                let r = &scenario.ris[n].position;
                scenario.channel.path_gain(distance(&scenario.bs_position, r))
                    * scenario.channel.path_gain(distance(r, &t.position))
            };
            (0..scenario.ris.len())
                .max_by(|&a, &b| gain(a).partial_cmp(&gain(b)).unwrap().then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect()
}

/// Pilot power user `k` receives through RIS `n`.
fn path_power(ch: &ChannelSet, configs: &[ReflectionConfig], n: usize, k: usize, s: &CVec) -> f64 {
    let w = &ch.bs_ris[n] * s;
    configs[n]
        .theta()
        .iter()
        .enumerate()
        .map(|(q, th)| ch.ris_user[n][(k, q)] * th * w[q])
        .sum::<C64>()
        .norm_sqr()
}

fn check(ch: &ChannelSet, configs: &[ReflectionConfig], pool: &PilotPool) -> Result<()> {
    if ch.num_ris() < 2 {
        return Err(Error::DegenerateObjective(
            "the interference term needs at least two RIS".into(),
        ));
    }
    if configs.len() != ch.num_ris() || (0..ch.num_ris()).any(|n| configs[n].len() != ch.elements(n)) {
        return Err(Error::DimensionMismatch(
            "reflection configs do not match the RIS".into(),
        ));
    }
    if pool.pilot(0).len() != ch.num_antennas() {
        return Err(Error::DimensionMismatch(
            "pilot length differs from the BS antenna count".into(),
        ));
    }
    Ok(())
}

fn ratio(ch: &ChannelSet, configs: &[ReflectionConfig], s: &CVec, k: usize, serving: usize) -> f64 {
    let num = path_power(ch, configs, serving, k, s);
    let den: f64 = (0..ch.num_ris())
        .filter(|&n| n != serving)
        .map(|n| path_power(ch, configs, n, k, s))
        .sum();
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Serving-to-leakage pilot power ratio of user `k`; `+∞` when nothing
/// leaks and the serving path carries power.
pub fn pilot_sir(
    ch: &ChannelSet,
    configs: &[ReflectionConfig],
    pool: &PilotPool,
    map: &[usize],
    k: usize,
    serving: usize,
) -> Result<f64> {
    check(ch, configs, pool)?;
    if k >= ch.num_users() || serving >= ch.num_ris() || map.len() != ch.num_users() {
        return Err(Error::DimensionMismatch("user, RIS or map out of range".into()));
    }
    if map[k] >= pool.count() {
        return Err(Error::IndexOutOfRange {
            index: map[k],
            clusters: pool.count(),
        });
    }
    Ok(ratio(ch, configs, pool.pilot(map[k]), k, serving))
}

/// Max-min pilot assignment.
pub fn assign_pilots(
    ch: &ChannelSet,
    configs: &[ReflectionConfig],
    pool: &PilotPool,
    serving: &[usize],
    mode: AssignMode,
) -> Result<PilotAssignment> {
    check(ch, configs, pool)?;
    let k_users = ch.num_users();
    if serving.len() != k_users || serving.iter().any(|&n| n >= ch.num_ris()) {
        return Err(Error::DimensionMismatch("serving map".into()));
    }
    // table[k][p]: ratio of user k on pilot p
    let table: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            (0..pool.count())
                .map(|p| ratio(ch, configs, pool.pilot(p), k, serving[k]))
                .collect()
        })
        .collect();
    let score = |map: &[usize]| {
        map.iter()
            .enumerate()
            .map(|(k, &p)| table[k][p])
            .fold(f64::INFINITY, f64::min)
    };
    let map = match mode {
        AssignMode::Exhaustive => {
            let size = (pool.count() as u128).checked_pow(k_users as u32).unwrap_or(u128::MAX);
            if size > EXHAUSTIVE_LIMIT {
                return Err(Error::SearchSpaceTooLarge {
                    size,
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            let mut map = vec![0; k_users];
            let mut best = (map.clone(), score(&map));
            // lexicographic order, user 0 most significant
            for _ in 1..size {
                for k in (0..k_users).rev() {
                    map[k] += 1;
                    if map[k] < pool.count() {
                        break;
                    }
                    map[k] = 0;
                }
                let s = score(&map);
                if s > best.1 {
                    best = (map.clone(), s);
                }
            }
            best.0
        }
        AssignMode::Greedy => {
            let gain: Vec<f64> = (0..k_users)
                .map(|k| {
                    let n = serving[k];
                    ch.ris_user[n].row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() * linalg::fro2(&ch.bs_ris[n])
                })
                .collect();
            let mut order: Vec<usize> = (0..k_users).collect();
            order.sort_by(|&a, &b| gain[b].partial_cmp(&gain[a]).unwrap().then(a.cmp(&b)));
            let mut map = vec![0; k_users];
            let mut current = f64::INFINITY;
            for &k in &order {
                let mut best = (0, f64::NEG_INFINITY);
                for p in 0..pool.count() {
                    let v = current.min(table[k][p]);
                    if v > best.1 {
                        best = (p, v);
                    }
                }
                map[k] = best.0;
                current = best.1;
            }
            let mut s = score(&map);
            for a in 0..k_users {
                for b in a + 1..k_users {
                    map.swap(a, b);
                    let t = score(&map);
                    if t > s {
                        s = t;
                    } else {
                        map.swap(a, b);
                    }
                }
            }
            map
        }
    };
    let ratios = map.iter().enumerate().map(|(k, &p)| table[k][p]).collect();
    Ok(PilotAssignment {
        score: score(&map),
        map,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflect::FeasibilitySet;
    use crate::scene::{fixtures, synthesize_channels};

    fn two_ris() -> (Scenario, ChannelSet, Vec<ReflectionConfig>) {
        let fs = FeasibilitySet::ContinuousPhase;
        let s = fixtures::scenario(4, 3, &[(6, fs), (6, fs)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let cfg = vec![ReflectionConfig::unit(6, fs); 2];
        (s, ch, cfg)
    }

    #[test]
    fn dft_pool_is_orthonormal() {
        let p = PilotPool::dft(8, 3).unwrap();
        assert_eq!(p.count(), 3);
        assert!(PilotPool::dft(2, 3).is_err());
    }

    #[test]
    fn identical_paths_give_unit_ratio() {
        let (_, mut ch, cfg) = two_ris();
        ch.bs_ris[1] = ch.bs_ris[0].clone();
        ch.ris_user[1] = ch.ris_user[0].clone();
        let pool = PilotPool::dft(4, 2).unwrap();
        for k in 0..3 {
            let r = pilot_sir(&ch, &cfg, &pool, &[0, 1, 0], k, 0).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_ris_is_degenerate() {
        let s = fixtures::scenario(4, 2, &[(4, FeasibilitySet::ContinuousPhase)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let cfg = vec![ReflectionConfig::unit(4, FeasibilitySet::ContinuousPhase)];
        let pool = PilotPool::dft(4, 2).unwrap();
        assert!(matches!(
            pilot_sir(&ch, &cfg, &pool, &[0, 1], 0, 0),
            Err(Error::DegenerateObjective(_))
        ));
    }

    #[test]
    fn silent_leakage_is_infinite() {
        let (_, mut ch, cfg) = two_ris();
        ch.ris_user[1].fill(C64::new(0.0, 0.0));
        let pool = PilotPool::dft(4, 2).unwrap();
        assert_eq!(pilot_sir(&ch, &cfg, &pool, &[0, 0, 0], 0, 0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        let (_, ch, cfg) = two_ris();
        let pool = PilotPool::dft(4, 2).unwrap();
        let serving = [0, 1, 0];
        let ex = assign_pilots(&ch, &cfg, &pool, &serving, AssignMode::Exhaustive).unwrap();
        let gr = assign_pilots(&ch, &cfg, &pool, &serving, AssignMode::Greedy).unwrap();
        assert!(gr.score <= ex.score);
    }

    #[test]
    fn search_space_limit() {
        let (_, ch, cfg) = two_ris();
        let pool = PilotPool::dft(4, 4).unwrap();
        let mut ch = ch;
        let k = 11;
        ch.direct = crate::CMat::zeros(k, 4);
        ch.ris_user = vec![crate::CMat::zeros(k, 6); 2];
        let r = assign_pilots(&ch, &cfg, &pool, &vec![0; k], AssignMode::Exhaustive);
        assert!(matches!(r, Err(Error::SearchSpaceTooLarge { .. })));
    }
}
