//! Distributed per-RIS operation: each RIS estimates the transmitted
//! symbols from what impinges on it, solves a local symbol-level problem
//! with its share of the SINR target, and configures itself. A refresh
//! protocol keeps the local precoder estimates from drifting.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::precode::slp::{solve_ci_batch, CiSpec};
use crate::precode::{self, SlpSolution, SlpTheta, SolverParams};
use crate::reflect::ReflectionConfig;
use crate::scene::{composite_channel, distance, evolve, synthesize_channels, ChannelSet, MobilityProfile, Scenario};
use crate::{linalg, CMat, CVec, Error, Result, C64};

const SYMBOL_STREAM: u64 = 2 << 40;
const SENSING_STREAM: u64 = 3 << 40;

/// Local state of one RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct DistState {
    pub ris: usize,
    /// Estimate of the BS precoder, `L x K`.
    pub p_local: CMat,
    pub beta: f64,
    /// `γ_k^(n)` for each user.
    pub gamma_split: Vec<f64>,
    /// Other RIS this one exchanges precoder estimates with.
    pub neighbors: Vec<usize>,
    pub config: ReflectionConfig,
}

/// Equal split `γ_k^(n) = (β√γ_k / N)²`, so that `Σ_n √γ_k^(n) = β√γ_k`.
pub fn equal_split(sinr_targets: &[f64], beta: f64, n_ris: usize) -> Vec<f64> {
    sinr_targets
        .iter()
        .map(|g| (beta * g.sqrt() / n_ris as f64).powi(2))
        .collect()
}

/// `max_k |Σ_n √γ_k^(n) - β√γ_k|` over a set of states.
pub fn split_residual(states: &[DistState], sinr_targets: &[f64]) -> f64 {
    let beta = states.first().map_or(1.0, |s| s.beta);
    sinr_targets
        .iter()
        .enumerate()
        .map(|(k, g)| (states.iter().map(|s| s.gamma_split[k].sqrt()).sum::<f64>() - beta * g.sqrt()).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshMode {
    KeepLocal,
    NeighborAverage,
    BsBroadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshPolicy {
    pub mode: RefreshMode,
    /// Slots between refreshes.
    pub period: u64,
}

/// `ŝ = (H_BR P_prev)^† y`.
pub fn soft_estimate(y_ris: &CVec, bs_ris: &CMat, p_prev: &CMat) -> Result<CVec> {
    if y_ris.len() != bs_ris.nrows() || bs_ris.ncols() != p_prev.nrows() {
        return Err(Error::DimensionMismatch("observation, RIS channel and precoder".into()));
    }
    let eff = bs_ris * p_prev;
    let pinv = linalg::pinv_full_rank(&eff, eff.ncols())?;
    Ok(pinv * y_ris)
}

/// Result of one local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub slp: SlpSolution,
    /// Updated local precoder: the smallest change with `P ŝ = x`.
    pub p_local: CMat,
    pub config: ReflectionConfig,
}

/// Minimum-power local transmit vector meeting each user's CI constraint
/// with the local target `γ_k^(n)` over this RIS's cascade only, with the
/// RIS's own coefficients free and warm-started from its current ones.
pub fn local_slp(
    state: &DistState,
    ch: &ChannelSet,
    scenario: &Scenario,
    s_hat: &CVec,
    params: &SolverParams,
) -> Result<LocalSolution> {
    let n = state.ris;
    if n >= ch.num_ris() || s_hat.len() != ch.num_users() || state.gamma_split.len() != ch.num_users() {
        return Err(Error::DimensionMismatch(
            "local state does not match the channels".into(),
        ));
    }
    let local = ChannelSet::new(
        CMat::zeros(ch.num_users(), ch.num_antennas()),
        vec![ch.bs_ris[n].clone()],
        vec![ch.ris_user[n].clone()],
    )?;
    let specs: Vec<CiSpec> = scenario
        .terminals
        .iter()
        .zip(&state.gamma_split)
        .map(|(t, g)| CiSpec {
            threshold: (t.noise_power * g).sqrt(),
            half_angle: t.constellation.ci_half_angle,
        })
        .collect();
    let symbols = CMat::from_column_slice(s_hat.len(), 1, s_hat.as_slice());
    let slp = solve_ci_batch(
        &local,
        vec![scenario.ris[n].feasibility],
        specs,
        symbols,
        &SlpTheta::Free {
            init: Some(vec![state.config.clone()]),
        },
        params,
    )?;
    let x = slp.x.column(0).into_owned();
    let norm2 = s_hat.norm_squared();
    let p_local = if norm2 > 0.0 {
        let resid = &x - &state.p_local * s_hat;
        &state.p_local + resid * s_hat.adjoint() * C64::new(1.0 / norm2, 0.0)
    } else {
        state.p_local.clone()
    };
    let config = slp.configs[0].clone();
    Ok(LocalSolution { slp, p_local, config })
}

/// Applies the refresh protocol at slot boundary `t`; `p_bs` is the
/// precoder the BS will use in slot `t`.
pub fn refresh(states: &mut [DistState], policy: &RefreshPolicy, p_bs: Option<&CMat>, t: u64) -> Result<()> {
    if policy.period == 0 {
        return Err(Error::InvalidScenario("refresh period must be positive".into()));
    }
    if !t.is_multiple_of(policy.period) {
        return Ok(());
    }
    match policy.mode {
        RefreshMode::KeepLocal => {}
        RefreshMode::NeighborAverage => {
            let snapshot: Vec<CMat> = states.iter().map(|s| s.p_local.clone()).collect();
            let index = |ris: usize| states.iter().position(|s| s.ris == ris);
            let mut next = Vec::with_capacity(states.len());
            for (i, s) in states.iter().enumerate() {
                let mut acc = snapshot[i].clone();
                let mut count = 1.0;
                for &nb in &s.neighbors {
                    if let Some(j) = index(nb).filter(|&j| j != i) {
                        acc += &snapshot[j];
                        count += 1.0;
                    }
                }
                next.push(acc * C64::new(1.0 / count, 0.0));
            }
            for (s, p) in states.iter_mut().zip(next) {
                s.p_local = p;
            }
        }
        RefreshMode::BsBroadcast => {
            let p = p_bs.ok_or(Error::MissingBroadcast { slot: t })?;
            for s in states.iter_mut() {
                s.p_local = p.clone();
            }
        }
    }
    Ok(())
}

/// Episode settings beyond the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOptions {
    pub beta: f64,
    /// Variance of the noise on each RIS observation.
    pub sensing_noise: f64,
    /// RIS closer than this are neighbors.
    pub neighbor_radius: f64,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            sensing_noise: 0.0,
            neighbor_radius: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    pub slot: u64,
    pub sum_rate: f64,
    /// Smallest CI slack of the BS transmission against the true symbols.
    pub min_true_slack: f64,
    /// Largest `||ŝ^(n) - s||` over RIS.
    pub est_error: f64,
    /// `||x^(n)||²` of each local solution.
    pub ris_power: Vec<f64>,
    pub split_residual: f64,
}

/// CSV with columns `slot,sum_rate,min_true_slack,est_error,power_0..`.
pub fn write_metrics_csv<W: Write>(metrics: &[SlotMetrics], n_ris: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "slot".to_string(),
        "sum_rate".into(),
        "min_true_slack".into(),
        "est_error".into(),
    ];
    header.extend((0..n_ris).map(|n| format!("power_{n}")));
    w.write_record(&header)?;
    for m in metrics {
        let mut row = vec![
            m.slot.to_string(),
            m.sum_rate.to_string(),
            m.min_true_slack.to_string(),
            m.est_error.to_string(),
        ];
        row.extend(m.ris_power.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// BS precoder for the current reflection state: zero forcing, or matched
/// filtering when the composite channel is rank deficient.
fn bs_precoder(ch: &ChannelSet, configs: &[ReflectionConfig], power: f64) -> Result<CMat> {
    match precode::zf_precoder(ch, configs, power) {
        Ok(p) => Ok(p),
        Err(Error::RankDeficient { .. }) => {
            let h = composite_channel(ch, configs)?;
            Ok(precode::mrt_columns(&h, power))
        }
        Err(e) => Err(e),
    }
}

fn min_true_slack(h: &CMat, x: &CVec, s: &[C64], scenario: &Scenario) -> f64 {
    let y = h * x;
    scenario
        .terminals
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let z = y[k] * C64::from_polar(1.0, -s[k].arg());
            let thr = (t.noise_power * t.sinr_target).sqrt();
            let phi = t.constellation.ci_half_angle;
            if phi.cos() < 1e-12 {
                z.re - thr
            } else {
                (z.re - thr) * phi.tan() - z.im.abs()
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Runs `slots` slots of the distributed protocol. Each slot: the channels
/// evolve, the BS transmits `P s` with `P` chosen for the previous
/// reflection state, every RIS estimates `s` from its noisy observation,
/// solves its local problem and configures itself, then the refresh policy
/// is applied at the slot boundary.
pub fn run_distributed_episode(
    scenario: &Scenario,
    profile: &MobilityProfile,
    slots: u64,
    policy: &RefreshPolicy,
    options: &EpisodeOptions,
    params: &SolverParams,
) -> Result<Vec<SlotMetrics>> {
    run_episode(scenario, profile, slots, policy, options, params, false)
}

/// Reference run in which every RIS knows the transmitted symbols and the
/// BS precoder exactly.
pub fn run_centralized_episode(
    scenario: &Scenario,
    profile: &MobilityProfile,
    slots: u64,
    options: &EpisodeOptions,
    params: &SolverParams,
) -> Result<Vec<SlotMetrics>> {
    let policy = RefreshPolicy {
        mode: RefreshMode::BsBroadcast,
        period: 1,
    };
    run_episode(scenario, profile, slots, &policy, options, params, true)
}

fn run_episode(
    scenario: &Scenario,
    profile: &MobilityProfile,
    slots: u64,
    policy: &RefreshPolicy,
    options: &EpisodeOptions,
    params: &SolverParams,
    oracle: bool,
) -> Result<Vec<SlotMetrics>> {
    scenario.validate()?;
    profile.validate(scenario)?;
    params.validate()?;
    if !(options.beta > 0.0 && options.beta <= 1.0) || !(options.sensing_noise >= 0.0) {
        return Err(Error::InvalidScenario(format!("invalid episode options {options:?}")));
    }
    if policy.period == 0 {
        return Err(Error::InvalidScenario("refresh period must be positive".into()));
    }
    if slots == 0 {
        return Ok(Vec::new());
    }
    let n_ris = scenario.num_ris();
    if n_ris == 0 {
        return Err(Error::InvalidScenario(
            "distributed operation needs at least one RIS".into(),
        ));
    }
    let targets: Vec<f64> = scenario.terminals.iter().map(|t| t.sinr_target).collect();
    let split = equal_split(&targets, options.beta, n_ris);

    let mut ch = synthesize_channels(scenario, 0)?;
    let mut configs: Vec<ReflectionConfig> = scenario
        .ris
        .iter()
        .map(|r| ReflectionConfig::unit(r.elements, r.feasibility))
        .collect();
    let mut p_bs = bs_precoder(&ch, &configs, scenario.power_budget)?;
    let mut states: Vec<DistState> = (0..n_ris)
        .map(|n| DistState {
            ris: n,
            p_local: p_bs.clone(),
            beta: options.beta,
            gamma_split: split.clone(),
            neighbors: (0..n_ris)
                .filter(|&m| {
                    m != n && distance(&scenario.ris[n].position, &scenario.ris[m].position) <= options.neighbor_radius
                })
                .collect(),
            config: configs[n].clone(),
        })
        .collect();
    let noise = scenario.noise_powers();
    let mut out = Vec::with_capacity(slots as usize);

    for t in 0..slots {
        if t > 0 {
            ch = evolve(scenario, &ch, profile, t)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(SYMBOL_STREAM + t);
        let s: Vec<C64> = scenario
            .terminals
            .iter()
            .map(|term| term.constellation.symbol(rng.random_range(0..term.constellation.order)))
            .collect();
        let s_vec = CVec::from_vec(s.clone());
        let x = &p_bs * &s_vec;

        let mut sense = ChaCha8Rng::seed_from_u64(scenario.seed);
        sense.set_stream(SENSING_STREAM + t);
        let mut est_error: f64 = 0.0;
        let mut ris_power = Vec::with_capacity(n_ris);
        for state in states.iter_mut() {
            let n = state.ris;
            let s_hat = if oracle {
                s_vec.clone()
            } else {
                let mut y = &ch.bs_ris[n] * &x;
                if options.sensing_noise > 0.0 {
                    let sd = options.sensing_noise.sqrt();
                    y.iter_mut().for_each(|v| *v += linalg::complex_normal(&mut sense) * sd);
                }
                soft_estimate(&y, &ch.bs_ris[n], &state.p_local)?
            };
            est_error = est_error.max((&s_hat - &s_vec).norm());
            let local = local_slp(state, &ch, scenario, &s_hat, params)?;
            ris_power.push(local.slp.power);
            state.p_local = local.p_local;
            state.config = local.config.clone();
            configs[n] = local.config;
        }

        let h = composite_channel(&ch, &configs)?;
        let a = precode::gains(&h, &p_bs);
        let sum_rate = (0..ch.num_users())
            .map(|k| (1.0 + precode::sinr_from_gains(&a, noise[k], k)).log2())
            .sum();
        out.push(SlotMetrics {
            slot: t,
            sum_rate,
            min_true_slack: min_true_slack(&h, &x, &s, scenario),
            est_error,
            ris_power,
            split_residual: split_residual(&states, &targets),
        });

        p_bs = bs_precoder(&ch, &configs, scenario.power_budget)?;
        refresh(&mut states, policy, Some(&p_bs), t + 1)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflect::FeasibilitySet;
    use crate::scene::fixtures;

    #[test]
    fn identity_effective_matrix_recovers_symbols() {
        let s = CVec::from_vec(vec![C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]);
        let h = CMat::identity(2, 2);
        let p = CMat::identity(2, 2);
        assert!((soft_estimate(&s, &h, &p).unwrap() - &s).norm() < 1e-14);
        assert!(matches!(
            soft_estimate(&s, &h, &CMat::zeros(2, 2)),
            Err(Error::RankDeficient { .. })
        ));
    }

    fn state(ris: usize, v: f64) -> DistState {
        DistState {
            ris,
            p_local: CMat::from_element(2, 1, C64::new(v, 0.0)),
            beta: 1.0,
            gamma_split: vec![1.0],
            neighbors: vec![1 - ris],
            config: ReflectionConfig::unit(1, FeasibilitySet::ContinuousPhase),
        }
    }

    #[test]
    fn refresh_modes() {
        let avg = RefreshPolicy {
            mode: RefreshMode::NeighborAverage,
            period: 1,
        };
        let mut st = vec![state(0, 1.0), state(1, 3.0)];
        refresh(&mut st, &avg, None, 5).unwrap();
        assert!(st.iter().all(|s| s.p_local[(0, 0)] == C64::new(2.0, 0.0)));
        let bc = RefreshPolicy {
            mode: RefreshMode::BsBroadcast,
            period: 2,
        };
        assert!(matches!(
            refresh(&mut st, &bc, None, 4),
            Err(Error::MissingBroadcast { slot: 4 })
        ));
        refresh(&mut st, &bc, None, 3).unwrap();
        let p = CMat::from_element(2, 1, C64::new(7.0, 0.0));
        refresh(&mut st, &bc, Some(&p), 4).unwrap();
        assert!(st.iter().all(|s| s.p_local == p));
    }

    #[test]
    fn equal_split_meets_the_sum_constraint() {
        let targets = [2.0, 0.5, 9.0];
        let sp = equal_split(&targets, 0.7, 3);
        let st: Vec<DistState> = (0..3)
            .map(|n| DistState {
                gamma_split: sp.clone(),
                beta: 0.7,
                ..state(n % 2, 0.0)
            })
            .collect();
        assert!(split_residual(&st, &targets) < 1e-12);
    }

    #[test]
    fn empty_episode() {
        let s = fixtures::scenario(4, 2, &[(8, FeasibilitySet::ContinuousPhase)]);
        let pol = RefreshPolicy {
            mode: RefreshMode::KeepLocal,
            period: 1,
        };
        let m = run_distributed_episode(
            &s,
            &MobilityProfile::Static,
            0,
            &pol,
            &EpisodeOptions::default(),
            &SolverParams::default(),
        )
        .unwrap();
        assert!(m.is_empty());
    }
}
