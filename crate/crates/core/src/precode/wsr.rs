//! Weighted-sum-rate maximization over the precoder and the reflection
//! coefficients, with optional element clustering.

use super::engine::{Layout, Problem, Run, WsrObjective};
use super::{PrecodeSolution, SolverParams};
use crate::reflect::{Clustering, FeasibilitySet};
use crate::scene::{ChannelSet, Scenario};
use crate::{Error, Result, C64};

/// How elements are grouped into shared-coefficient clusters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSpec {
    /// One fixed clustering per RIS.
    Fixed(Vec<Clustering>),
    /// Search assignments with at most this many clusters per RIS.
    Budget(Vec<usize>),
}

pub(crate) fn check_instance(ch: &ChannelSet, scenario: &Scenario) -> Result<()> {
    scenario.validate()?;
    let consistent = ch.num_users() == scenario.num_users()
        && ch.num_antennas() == scenario.bs_antennas
        && ch.num_ris() == scenario.num_ris()
        && scenario
            .ris
            .iter()
            .enumerate()
            .all(|(n, r)| ch.elements(n) == r.elements);
    if !consistent {
        return Err(Error::DimensionMismatch(
            "channel set does not match the scenario".into(),
        ));
    }
    Ok(())
}

pub(crate) fn feasibility_sets(scenario: &Scenario) -> Vec<FeasibilitySet> {
    scenario.ris.iter().map(|r| r.feasibility).collect()
}

fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {k} users",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidScenario(
            "weights must be non-negative and not all zero".into(),
        ));
    }
    Ok(())
}

/// Maximizes `Σ_k ω_k log2(1 + γ_k)` under `||P||_F² ≤ P̄` and the
/// per-RIS feasibility sets, using the scenario weights.
pub fn solve_wsr(ch: &ChannelSet, scenario: &Scenario, params: &SolverParams) -> Result<PrecodeSolution> {
    solve_wsr_weighted(ch, scenario, &scenario.weights, params)
}

/// Same as [`solve_wsr`] with explicit weights; zero weights are allowed.
pub fn solve_wsr_weighted(
    ch: &ChannelSet,
    scenario: &Scenario,
    weights: &[f64],
    params: &SolverParams,
) -> Result<PrecodeSolution> {
    check_instance(ch, scenario)?;
    params.validate()?;
    check_weights(weights, ch.num_users())?;
    let prob = Problem {
        ch,
        layout: Layout::elementwise(ch, &feasibility_sets(scenario)),
        power_budget: scenario.power_budget,
        noise: scenario.noise_powers(),
        active: None,
        eve: false,
    };
    let obj = WsrObjective {
        weights: weights.to_vec(),
        noise: scenario.noise_powers(),
    };
    let run = prob.multistart(&obj, params, false)?;
    Ok(prob.solution(run))
}

/// Weighted-sum-rate maximization where each cluster of elements shares one
/// coefficient. With a budget, element assignments are refined by greedy
/// single-element moves between warm-started solves.
pub fn solve_wsr_clustered(
    ch: &ChannelSet,
    scenario: &Scenario,
    spec: &ClusterSpec,
    params: &SolverParams,
) -> Result<(PrecodeSolution, Vec<Clustering>)> {
    check_instance(ch, scenario)?;
    params.validate()?;
    check_weights(&scenario.weights, ch.num_users())?;
    let n_ris = ch.num_ris();
    let (mut clusterings, search) = match spec {
        ClusterSpec::Fixed(c) => {
            if c.len() != n_ris || c.iter().enumerate().any(|(n, c)| c.elements() != ch.elements(n)) {
                return Err(Error::DimensionMismatch(
                    "clustering does not match the RIS sizes".into(),
                ));
            }
            (c.clone(), false)
        }
        ClusterSpec::Budget(r) => {
            if r.len() != n_ris {
                return Err(Error::DimensionMismatch("one cluster budget per RIS expected".into()));
            }
            let c = r
                .iter()
                .enumerate()
                .map(|(n, &r)| Clustering::contiguous(ch.elements(n), r.min(ch.elements(n))))
                .collect::<Result<Vec<_>>>()?;
            (c, true)
        }
    };
    let sets = feasibility_sets(scenario);
    let obj = WsrObjective {
        weights: scenario.weights.clone(),
        noise: scenario.noise_powers(),
    };
    let make = |c: &[Clustering]| Problem {
        ch,
        layout: Layout::clustered(c, &sets),
        power_budget: scenario.power_budget,
        noise: scenario.noise_powers(),
        active: None,
        eve: false,
    };
    let mut run = make(&clusterings).multistart(&obj, params, false)?;
    if search {
        for _ in 0..params.max_outer_iters {
            if !reassign_best(ch, &mut clusterings, &mut run, &make, &obj)? {
                break;
            }
            let prob = make(&clusterings);
            let more = prob.ascend(&obj, run.it.clone(), params, false)?;
            let mut trace = std::mem::take(&mut run.trace);
            trace.extend_from_slice(&more.trace[1..]);
            run = Run { trace, ..more };
        }
    }
    let sol = make(&clusterings).solution(run);
    Ok((sol, clusterings))
}

/// Applies the single-element move between clusters that most improves the
/// objective. Returns whether a move was made; the trace gets the new value.
fn reassign_best<'a>(
    ch: &ChannelSet,
    clusterings: &mut [Clustering],
    run: &mut Run,
    make: &dyn Fn(&[Clustering]) -> Problem<'a>,
    obj: &WsrObjective,
) -> Result<bool> {
    use super::engine::Objective;
    let prob = make(clusterings);
    let base = obj.value(&prob.products(&run.it)?);
    let mut best: Option<(usize, usize, usize, f64)> = None;
    let mut best_val = base;
    for n in 0..ch.num_ris() {
        let w = &ch.bs_ris[n] * &run.it.p;
        let a = prob.products(&run.it)?;
        for q in 0..ch.elements(n) {
            let from = clusterings[n].assignment()[q];
            if clusterings[n].cluster_size(from) == 1 {
                continue;
            }
            for to in 0..clusterings[n].clusters() {
                if to == from {
                    continue;
                }
                let d: C64 = run.it.coeff[n][to] - run.it.coeff[n][from];
                let mut pr = a.clone();
                for k in 0..ch.num_users() {
                    for j in 0..ch.num_users() {
                        pr.a[(k, j)] += ch.ris_user[n][(k, q)] * w[(q, j)] * d;
                    }
                }
                let v = obj.value(&pr);
                if v > best_val {
                    best_val = v;
                    best = Some((n, q, to, v));
                }
            }
        }
    }
    let Some((n, q, to, _)) = best else { return Ok(false) };
    clusterings[n].reassign(q, to);
    let v = obj.value(&make(clusterings).products(&run.it)?);
    run.trace.push(v);
    Ok(true)
}
