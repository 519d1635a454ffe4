use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{load_scenario_file, ScenarioFile};
use super::oracle::brute_force_wsr;
use crate::dist::{run_centralized_episode, run_distributed_episode};
use crate::pilot::{assign_pilots, default_serving_map, pilot_sir, AssignMode, PilotPool};
use crate::precode::{
    solve_slp, solve_slp_all_symbols, solve_wsr, solve_wsr_clustered, ClusterSpec, SlpSolution, SlpTheta,
    DEFAULT_COMBINATION_CAP,
};
use crate::reflect::{FeasibilitySet, ReflectionConfig};
use crate::relaysec::{solve_hybrid, solve_secrecy, HybridRelayConfig};
use crate::scene::synthesize_channels;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Wsr,
    WsrClustered,
    Slp,
    SlpAll,
    Pilot,
    Hybrid,
    Secrecy,
    Distributed,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Wsr,
        Task::WsrClustered,
        Task::Slp,
        Task::SlpAll,
        Task::Pilot,
        Task::Hybrid,
        Task::Secrecy,
        Task::Distributed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Wsr => "wsr",
            Task::WsrClustered => "wsr_clustered",
            Task::Slp => "slp",
            Task::SlpAll => "slp_all",
            Task::Pilot => "pilot",
            Task::Hybrid => "hybrid",
            Task::Secrecy => "secrecy",
            Task::Distributed => "distributed",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub scenario_path: PathBuf,
    pub task: Task,
    pub trials: usize,
    pub seed_base: u64,
    pub output_dir: PathBuf,
    /// Cross-check against exact enumeration where the instance allows it.
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub trial: usize,
    pub seed: u64,
    pub objective: f64,
    pub baseline_objective: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub feasible: bool,
    /// Exact optimum minus the solver objective.
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub task: Task,
    pub trials: usize,
    pub feasible: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub oracle_gap_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub rows: Vec<MetricRow>,
    pub summary: Summary,
    /// Per trial: objective and, for symbol-level tasks, minimum slack.
    pub traces: Vec<Vec<(f64, Option<f64>)>>,
}

struct Outcome {
    objective: f64,
    baseline: f64,
    iterations: usize,
    feasible: bool,
    oracle_gap: Option<f64>,
    trace: Vec<(f64, Option<f64>)>,
}

fn plain(trace: &[f64]) -> Vec<(f64, Option<f64>)> {
    trace.iter().map(|&f| (f, None)).collect()
}

fn slp_outcome(sol: SlpSolution) -> Outcome {
    Outcome {
        objective: sol.power,
        baseline: sol.zf_power.unwrap_or(f64::NAN),
        iterations: sol.iterate_trace.len().saturating_sub(1),
        feasible: sol.min_slack() >= -1e-6,
        oracle_gap: None,
        trace: sol
            .iterate_trace
            .iter()
            .zip(&sol.slack_trace)
            .map(|(&f, &s)| (f, Some(s)))
            .collect(),
    }
}

fn oracle_applicable(file: &ScenarioFile) -> bool {
    let s = &file.scenario;
    s.num_users() == 1
        && s.ris
            .iter()
            .all(|r| matches!(r.feasibility, FeasibilitySet::DiscretePhase { .. }))
}

fn run_trial(file: &ScenarioFile, task: Task, seed: u64, oracle: bool) -> Result<Outcome> {
    let mut scenario = file.scenario.clone();
    scenario.seed = seed;
    let params = crate::precode::SolverParams {
        seed,
        ..file.solver.clone()
    };
    let ch = synthesize_channels(&scenario, 0)?;
    match task {
        Task::Wsr => {
            let sol = solve_wsr(&ch, &scenario, &params)?;
            let oracle_gap = if oracle && oracle_applicable(file) {
                match brute_force_wsr(&ch, &scenario) {
                    Ok(best) => Some(best - sol.objective),
                    Err(e) => {
                        log::warn!("trial seed {seed}: oracle skipped: {e}");
                        None
                    }
                }
            } else {
                None
            };
            Ok(Outcome {
                objective: sol.objective,
                baseline: sol.initial_objective,
                iterations: sol.iterations(),
                feasible: true,
                oracle_gap,
                trace: plain(&sol.iterate_trace),
            })
        }
        Task::WsrClustered => {
            let budgets = scenario.ris.iter().map(|r| r.cluster_budget).collect();
            let (sol, _) = solve_wsr_clustered(&ch, &scenario, &ClusterSpec::Budget(budgets), &params)?;
            Ok(Outcome {
                objective: sol.objective,
                baseline: sol.initial_objective,
                iterations: sol.iterations(),
                feasible: true,
                oracle_gap: None,
                trace: plain(&sol.iterate_trace),
            })
        }
        Task::Slp => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let symbols: Vec<C64> = scenario
                .terminals
                .iter()
                .map(|t| t.constellation.symbol(rng.random_range(0..t.constellation.order)))
                .collect();
            let sol = solve_slp(&ch, &scenario, &symbols, &SlpTheta::Free { init: None }, &params)?;
            Ok(slp_outcome(sol))
        }
        Task::SlpAll => {
            let sol = solve_slp_all_symbols(
                &ch,
                &scenario,
                &SlpTheta::Free { init: None },
                DEFAULT_COMBINATION_CAP,
                &params,
            )?;
            Ok(slp_outcome(sol))
        }
        Task::Pilot => {
            let k = scenario.num_users();
            let count = file.pilot_count.unwrap_or(k.saturating_sub(1).max(1));
            let pool = PilotPool::dft(scenario.bs_antennas, count)?;
            let configs: Vec<ReflectionConfig> = scenario
                .ris
                .iter()
                .map(|r| ReflectionConfig::unit(r.elements, r.feasibility))
                .collect();
            let serving = default_serving_map(&scenario);
            let greedy = assign_pilots(&ch, &configs, &pool, &serving, AssignMode::Greedy)?;
            let zeros = vec![0; k];
            let mut baseline = f64::INFINITY;
            for (u, &n) in serving.iter().enumerate() {
                baseline = baseline.min(pilot_sir(&ch, &configs, &pool, &zeros, u, n)?);
            }
            let oracle_gap = if oracle {
                Some(assign_pilots(&ch, &configs, &pool, &serving, AssignMode::Exhaustive)?.score - greedy.score)
            } else {
                None
            };
            Ok(Outcome {
                objective: greedy.score,
                baseline,
                iterations: 0,
                feasible: true,
                oracle_gap,
                trace: Vec::new(),
            })
        }
        Task::Hybrid => {
            let cfg = HybridRelayConfig::from_scenario(&scenario)?;
            let sol = solve_hybrid(&ch, &scenario, &cfg, &params)?;
            Ok(Outcome {
                objective: sol.objective,
                baseline: sol.initial_objective,
                iterations: sol.iterations(),
                feasible: true,
                oracle_gap: None,
                trace: plain(&sol.iterate_trace),
            })
        }
        Task::Secrecy => {
            let sol = solve_secrecy(&ch, &scenario, file.secrecy_demand, &params)?;
            Ok(Outcome {
                objective: sol.objective,
                baseline: sol.initial_objective,
                iterations: sol.iterations(),
                feasible: true,
                oracle_gap: None,
                trace: plain(&sol.iterate_trace),
            })
        }
        Task::Distributed => {
            let d = &file.distributed;
            let dist = run_distributed_episode(&scenario, &file.mobility, d.slots, &d.policy, &d.options, &params)?;
            let central = run_centralized_episode(&scenario, &file.mobility, d.slots, &d.options, &params)?;
            let mean =
                |m: &[crate::dist::SlotMetrics]| m.iter().map(|s| s.sum_rate).sum::<f64>() / m.len().max(1) as f64;
            Ok(Outcome {
                objective: mean(&dist),
                baseline: mean(&central),
                iterations: dist.len(),
                feasible: true,
                oracle_gap: None,
                trace: dist.iter().map(|s| (s.sum_rate, Some(s.min_true_slack))).collect(),
            })
        }
    }
}

fn summarize(task: Task, rows: &[MetricRow]) -> Summary {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.feasible && r.objective.is_finite())
        .map(|r| r.objective)
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.oracle_gap).collect();
    Summary {
        task,
        trials: rows.len(),
        feasible: rows.iter().filter(|r| r.feasible).count(),
        mean,
        std: var.sqrt(),
        min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        oracle_gap_mean: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
    }
}

/// Runs the campaign's trials in parallel; trial `i` uses seed
/// `seed_base + i`. Rows come back in trial order. A failing trial is
/// recorded as infeasible and the campaign continues.
pub fn run_campaign(c: &Campaign) -> Result<CampaignResult> {
    let file = load_scenario_file(&c.scenario_path)?;
    run_campaign_on(&file, c.task, c.trials, c.seed_base, c.oracle)
}

/// [`run_campaign`] on an already loaded scenario file.
pub fn run_campaign_on(
    file: &ScenarioFile,
    task: Task,
    trials: usize,
    seed_base: u64,
    oracle: bool,
) -> Result<CampaignResult> {
    if trials == 0 {
        return Err(Error::InvalidScenario("a campaign needs at least one trial".into()));
    }
    let results: Vec<(MetricRow, Vec<(f64, Option<f64>)>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base.wrapping_add(i as u64);
            let start = Instant::now();
            let out = run_trial(file, task, seed, oracle);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(o) => (
                    MetricRow {
                        trial: i,
                        seed,
                        objective: o.objective,
                        baseline_objective: o.baseline,
                        iterations: o.iterations,
                        wall_ms,
                        feasible: o.feasible,
                        oracle_gap: o.oracle_gap,
                    },
                    o.trace,
                ),
                Err(e) => {
                    log::warn!("trial {i} (seed {seed}) failed: {e}");
                    (
                        MetricRow {
                            trial: i,
                            seed,
                            objective: f64::NAN,
                            baseline_objective: f64::NAN,
                            iterations: 0,
                            wall_ms,
                            feasible: false,
                            oracle_gap: None,
                        },
                        Vec::new(),
                    )
                }
            }
        })
        .collect();
    let (rows, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(CampaignResult {
        summary: summarize(task, &rows),
        rows,
        traces,
    })
}
