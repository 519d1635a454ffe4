use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::channels::gain_map;
use super::{synthesize_channels, ChannelGenParams, ChannelSet, Position, Scenario};
use crate::linalg::complex_normal;
use crate::{Error, Result};

/// Generator stream offset reserved for mobility innovations.
const MOBILITY_STREAM: u64 = 1 << 40;

/// Rule for moving from one channel snapshot to the next.
#[derive(Debug, Clone, PartialEq)]
pub enum MobilityProfile {
    /// Channels never change.
    Static,
    /// First-order Gauss-Markov fading: `h' = ρh + σ·g·w` with `ρ = sqrt(1-σ²)`,
    /// `g` the RMS path gain of the entry and `w ~ CN(0,1)`.
    Stochastic { drift_sigma: f64 },
    /// RIS `ris` follows a known list of waypoints, one per step (cyclic);
    /// every step is resynthesized at the new geometry.
    Steerable { ris: usize, trajectory: Vec<Position> },
    /// Markov chain over channel-parameter states; `transition` is
    /// row-stochastic.
    Predictable {
        states: Vec<ChannelGenParams>,
        transition: Vec<Vec<f64>>,
    },
    /// Steerable geometry with Gauss-Markov correlated small-scale fading.
    Hybrid {
        ris: usize,
        trajectory: Vec<Position>,
        drift_sigma: f64,
    },
}

impl MobilityProfile {
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let check_sigma = |s: f64| {
            if (0.0..=1.0).contains(&s) {
                Ok(())
            } else {
                Err(Error::InvalidScenario(format!("drift_sigma {s} outside [0, 1]")))
            }
        };
        let check_traj = |ris: usize, t: &Vec<Position>| {
            if ris >= scenario.num_ris() {
                Err(Error::InvalidScenario(format!("steered RIS {ris} does not exist")))
            } else if t.is_empty() {
                Err(Error::InvalidScenario("empty trajectory".into()))
            } else {
                Ok(())
            }
        };
        match self {
            MobilityProfile::Static => Ok(()),
            MobilityProfile::Stochastic { drift_sigma } => check_sigma(*drift_sigma),
            MobilityProfile::Steerable { ris, trajectory } => check_traj(*ris, trajectory),
            MobilityProfile::Hybrid {
                ris,
                trajectory,
                drift_sigma,
            } => {
                check_sigma(*drift_sigma)?;
                check_traj(*ris, trajectory)
            }
            MobilityProfile::Predictable { states, transition } => {
                if states.is_empty() || transition.len() != states.len() {
                    return bad("transition matrix must be S x S with S >= 1 states".into());
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != states.len() || row.iter().any(|p| !(*p >= 0.0)) {
                        return bad(format!("transition row {i} is malformed"));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        return bad(format!("transition row {i} sums to {sum}"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn mobility_rng(scenario: &Scenario, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(MOBILITY_STREAM + step);
    rng
}

fn moved(scenario: &Scenario, ris: usize, trajectory: &[Position], step: u64) -> Scenario {
    let mut s = scenario.clone();
    s.ris[ris].position = trajectory[(step % trajectory.len() as u64) as usize];
    s
}

/// Produces snapshot `step` from the previous snapshot `ch`.
pub fn evolve(scenario: &Scenario, ch: &ChannelSet, profile: &MobilityProfile, step: u64) -> Result<ChannelSet> {
    profile.validate(scenario)?;
    match profile {
        MobilityProfile::Static => Ok(ch.clone()),
        MobilityProfile::Stochastic { drift_sigma } => {
            if *drift_sigma == 0.0 {
                return Ok(ch.clone());
            }
            let gains = gain_map(scenario);
            Ok(gauss_markov(
                ch,
                &gains,
                &gains,
                *drift_sigma,
                None,
                &mut mobility_rng(scenario, step),
            ))
        }
        MobilityProfile::Steerable { ris, trajectory } => {
            let mut next = synthesize_channels(&moved(scenario, *ris, trajectory, step), step)?;
            next.markov_state = ch.markov_state;
            Ok(next)
        }
        MobilityProfile::Hybrid {
            ris,
            trajectory,
            drift_sigma,
        } => {
            let prev_s = moved(scenario, *ris, trajectory, step.saturating_sub(1));
            let next_s = moved(scenario, *ris, trajectory, step);
            let fresh = synthesize_channels(&next_s, step)?;
            Ok(gauss_markov(
                ch,
                &gain_map(&prev_s),
                &gain_map(&next_s),
                *drift_sigma,
                Some(&fresh),
                &mut mobility_rng(scenario, step),
            ))
        }
        MobilityProfile::Predictable { states, transition } => {
            let row = &transition[ch.markov_state.min(states.len() - 1)];
            let u: f64 = mobility_rng(scenario, step).random();
            let mut acc = 0.0;
            let mut next_state = states.len() - 1;
            for (j, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    next_state = j;
                    break;
                }
            }
            let mut s = scenario.clone();
            s.channel = states[next_state].clone();
            let mut next = synthesize_channels(&s, step)?;
            next.markov_state = next_state;
            Ok(next)
        }
    }
}

/// Gauss-Markov update, rescaling the memory term by the change in path
/// gain. The innovation is either a fresh draw (`fresh`) or a scaled
/// complex Gaussian.
fn gauss_markov(
    ch: &ChannelSet,
    old_gain: &ChannelSet,
    new_gain: &ChannelSet,
    sigma: f64,
    fresh: Option<&ChannelSet>,
    rng: &mut ChaCha8Rng,
) -> ChannelSet {
    let rho = (1.0 - sigma * sigma).sqrt();
    let mut next = ch.clone();
    let old = old_gain.blocks();
    let new = new_gain.blocks();
    let fresh_blocks = fresh.map(ChannelSet::blocks);
    for (b, m) in next.blocks_mut().into_iter().enumerate() {
        for (i, z) in m.iter_mut().enumerate() {
            let g_old = old[b][i].re;
            let g_new = new[b][i].re;
            let memory = if g_old > 0.0 { *z * (g_new / g_old) } else { *z };
            let innovation = match &fresh_blocks {
                Some(f) => f[b][i],
                None => complex_normal(rng) * g_new,
            };
            *z = memory * rho + innovation * sigma;
        }
    }
    next
}

/// Snapshots `0..count` under `profile`, starting from a fresh synthesis.
pub fn snapshot_sequence(scenario: &Scenario, profile: &MobilityProfile, count: usize) -> Result<Vec<ChannelSet>> {
    let mut out: Vec<ChannelSet> = Vec::with_capacity(count);
    for t in 0..count as u64 {
        let ch = match out.last() {
            None => synthesize_channels(scenario, 0)?,
            Some(prev) => evolve(scenario, prev, profile, t)?,
        };
        out.push(ch);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflect::FeasibilitySet;
    use crate::scene::fixtures;

    fn base() -> Scenario {
        fixtures::scenario(2, 2, &[(4, FeasibilitySet::ContinuousPhase)])
    }

    #[test]
    fn static_and_zero_drift_are_identity() {
        let s = base();
        let ch = synthesize_channels(&s, 0).unwrap();
        assert_eq!(evolve(&s, &ch, &MobilityProfile::Static, 1).unwrap(), ch);
        let p = MobilityProfile::Stochastic { drift_sigma: 0.0 };
        assert_eq!(evolve(&s, &ch, &p, 1).unwrap(), ch);
    }

    #[test]
    fn ring_chain_returns_after_s_steps() {
        let s = base();
        let states: Vec<ChannelGenParams> = (0..3)
            .map(|i| ChannelGenParams {
                rician_k: i as f64,
                ..ChannelGenParams::default()
            })
            .collect();
        let transition = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
        let p = MobilityProfile::Predictable { states, transition };
        let seq = snapshot_sequence(&s, &p, 4).unwrap();
        let visited: Vec<usize> = seq.iter().map(|c| c.markov_state).collect();
        assert_eq!(visited, vec![0, 1, 2, 0]);
    }

    #[test]
    fn rows_must_be_stochastic() {
        let p = MobilityProfile::Predictable {
            states: vec![ChannelGenParams::default(); 2],
            transition: vec![vec![0.5, 0.5], vec![0.7, 0.2]],
        };
        assert!(p.validate(&base()).is_err());
        let neg = MobilityProfile::Stochastic { drift_sigma: -0.1 };
        assert!(neg.validate(&base()).is_err());
    }

    #[test]
    fn gauss_markov_keeps_second_moment() {
        let mut s = fixtures::scenario(1, 1, &[]);
        s.channel.model = crate::scene::FadingModel::Rayleigh;
        let p = MobilityProfile::Stochastic { drift_sigma: 0.3 };
        let g = gain_map(&s).direct[(0, 0)].re.powi(2);
        let mut ch = synthesize_channels(&s, 0).unwrap();
        let mut acc = 0.0;
        let steps = 10_000;
        for t in 1..=steps {
            ch = evolve(&s, &ch, &p, t).unwrap();
            acc += ch.direct[(0, 0)].norm_sqr();
        }
        let m2 = acc / steps as f64;
        assert!((m2 / g - 1.0).abs() < 0.05, "{m2} vs {g}");
    }

    #[test]
    fn steerable_moves_the_ris() {
        let s = base();
        let p = MobilityProfile::Steerable {
            ris: 0,
            trajectory: vec![[30.0, 15.0, 5.0], [300.0, 15.0, 5.0]],
        };
        let seq = snapshot_sequence(&s, &p, 2).unwrap();
        let near: f64 = seq[0].bs_ris[0].iter().map(|z| z.norm_sqr()).sum();
        let far: f64 = seq[1].bs_ris[0].iter().map(|z| z.norm_sqr()).sum();
        assert!(far < near);
    }

    #[test]
    fn sequences_are_reproducible() {
        let s = base();
        let p = MobilityProfile::Hybrid {
            ris: 0,
            trajectory: vec![[30.0, 15.0, 5.0], [35.0, 15.0, 5.0]],
            drift_sigma: 0.2,
        };
        assert_eq!(
            snapshot_sequence(&s, &p, 5).unwrap(),
            snapshot_sequence(&s, &p, 5).unwrap()
        );
    }
}
