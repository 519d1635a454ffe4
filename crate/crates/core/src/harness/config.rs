//! TOML scenario files.

use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;

use crate::dist::{EpisodeOptions, RefreshMode, RefreshPolicy};
use crate::precode::SolverParams;
use crate::reflect::FeasibilitySet;
use crate::scene::{
    ActiveRelay, ChannelGenParams, Constellation, Eavesdropper, FadingModel, MobilityProfile, Position, RisPanel,
    Scenario, Terminal,
};
use crate::{Error, Result};

const DEFAULT_NOISE: f64 = 1e-9;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    seed: Option<u64>,
    power_budget: Option<f64>,
    bs_antennas: usize,
    bs_position: Option<Position>,
    weights: Option<Vec<f64>>,
    channel: Option<RawChannel>,
    #[serde(default)]
    ris: Vec<RawRis>,
    #[serde(default)]
    terminal: Vec<RawTerminal>,
    eavesdropper: Option<RawEve>,
    relay: Option<RawRelay>,
    mobility: Option<RawMobility>,
    solver: Option<RawSolver>,
    secrecy: Option<RawSecrecy>,
    pilot: Option<RawPilot>,
    distributed: Option<RawDistributed>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    model: Option<String>,
    rician_k: Option<f64>,
    pathloss_exponent: Option<f64>,
    reference_loss_db: Option<f64>,
    wavelength: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRis {
    elements: usize,
    feasibility: String,
    tau: Option<u32>,
    position: Position,
    clusters: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerminal {
    position: Position,
    noise_power: Option<f64>,
    sinr_target: Option<f64>,
    psk_order: Option<usize>,
    ci_half_angle: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEve {
    antennas: usize,
    noise_power: Option<f64>,
    position: Position,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelay {
    antennas: usize,
    position: Position,
    noise_power: Option<f64>,
    power_budget: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMobility {
    profile: String,
    drift_sigma: Option<f64>,
    ris: Option<usize>,
    trajectory: Option<Vec<Position>>,
    transition: Option<Vec<Vec<f64>>>,
    state: Option<Vec<RawChannel>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    max_outer_iters: Option<usize>,
    max_inner_iters: Option<usize>,
    tol: Option<f64>,
    step_init: Option<f64>,
    backtrack_factor: Option<f64>,
    restarts: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSecrecy {
    demand: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPilot {
    count: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistributed {
    slots: Option<u64>,
    beta: Option<f64>,
    sensing_noise: Option<f64>,
    refresh: Option<String>,
    period: Option<u64>,
    neighbor_radius: Option<f64>,
}

/// Settings of a distributed episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedSettings {
    pub slots: u64,
    pub policy: RefreshPolicy,
    pub options: EpisodeOptions,
}

/// Everything a scenario file configures.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub mobility: MobilityProfile,
    pub solver: SolverParams,
    /// Rate demand of the second user in secrecy runs.
    pub secrecy_demand: f64,
    /// Pilot pool size; defaults to `max(1, K - 1)`.
    pub pilot_count: Option<usize>,
    pub distributed: DistributedSettings,
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<(Scenario, MobilityProfile)> {
    let f = load_scenario_file(path)?;
    Ok((f.scenario, f.mobility))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the dotted `key` (such as `terminal[1].noise_power`) in the
/// source, falling back to its table header and then to line 1.
fn locate(text: &str, key: &str) -> usize {
    let (head, field) = match key.split_once('.') {
        Some((h, f)) => (h, Some(f)),
        None => (key, None),
    };
    let (section, index) = match head.split_once('[') {
        Some((name, rest)) => (Some(name), rest.trim_end_matches(']').parse().unwrap_or(0)),
        None if field.is_some() => (Some(head), 0),
        None => (None, 0),
    };
    let field = if section.is_none() { Some(head) } else { field };
    let starts_field = |line: &str, f: &str| {
        line.trim_start()
            .strip_prefix(f)
            .is_some_and(|r| r.trim_start().starts_with('='))
    };
    let mut current: Option<String> = None;
    let mut seen = 0usize;
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if Some(name.as_str()) == section {
                if seen == index {
                    header_line = Some(i + 1);
                } else if header_line.is_some() {
                    break;
                }
                seen += 1;
            } else if header_line.is_some() {
                break;
            }
            current = Some(name);
            continue;
        }
        let in_scope = match section {
            None => current.is_none(),
            Some(_) => header_line.is_some(),
        };
        if in_scope {
            if let Some(f) = field {
                if starts_field(line, f) {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

fn invalid(text: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.to_string(),
        line: locate(text, key),
        message: message.into(),
    }
}

fn require<T>(text: &str, v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| {
        invalid(
            text,
            &format!("mobility.{field}"),
            format!("`{field}` is required for this profile"),
        )
    })
}

fn channel_params(text: &str, key: &str, raw: Option<&RawChannel>) -> Result<ChannelGenParams> {
    let d = ChannelGenParams::default();
    let Some(raw) = raw else { return Ok(d) };
    let model = match raw.model.as_deref() {
        None | Some("rician") => FadingModel::Rician,
        Some("rayleigh") => FadingModel::Rayleigh,
        Some(other) => {
            return Err(invalid(
                text,
                &format!("{key}.model"),
                format!("unknown fading model `{other}`"),
            ));
        }
    };
    Ok(ChannelGenParams {
        model,
        rician_k: raw.rician_k.unwrap_or(d.rician_k),
        pathloss_exponent: raw.pathloss_exponent.unwrap_or(d.pathloss_exponent),
        reference_loss_db: raw.reference_loss_db.unwrap_or(d.reference_loss_db),
        wavelength: raw.wavelength.unwrap_or(d.wavelength),
    })
}

/// Parses scenario text; errors carry the line of the offending key.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;

    let channel = channel_params(text, "channel", raw.channel.as_ref())?;
    let mut ris = Vec::with_capacity(raw.ris.len());
    for (i, r) in raw.ris.iter().enumerate() {
        let feasibility = match (r.feasibility.as_str(), r.tau) {
            ("general", _) => FeasibilitySet::General,
            ("continuous", _) => FeasibilitySet::ContinuousPhase,
            ("discrete", Some(tau)) => FeasibilitySet::DiscretePhase { tau },
            ("discrete", None) => {
                return Err(invalid(text, &format!("ris[{i}].tau"), "discrete phases need `tau`"));
            }
            (other, _) => {
                return Err(invalid(
                    text,
                    &format!("ris[{i}].feasibility"),
                    format!("expected general, continuous or discrete, found `{other}`"),
                ));
            }
        };
        ris.push(RisPanel {
            elements: r.elements,
            feasibility,
            position: r.position,
            cluster_budget: r.clusters.unwrap_or(r.elements),
        });
    }
    let terminals: Vec<Terminal> = raw
        .terminal
        .iter()
        .map(|t| {
            let order = t.psk_order.unwrap_or(4);
            Terminal {
                noise_power: t.noise_power.unwrap_or(DEFAULT_NOISE),
                position: t.position,
                sinr_target: t.sinr_target.unwrap_or(1.0),
                constellation: Constellation {
                    order,
                    ci_half_angle: t.ci_half_angle.unwrap_or(PI / order.max(1) as f64),
                },
            }
        })
        .collect();
    let scenario = Scenario {
        bs_antennas: raw.bs_antennas,
        bs_position: raw.bs_position.unwrap_or([0.0, 0.0, 10.0]),
        ris,
        weights: raw.weights.clone().unwrap_or_else(|| vec![1.0; terminals.len()]),
        terminals,
        eavesdropper: raw.eavesdropper.as_ref().map(|e| Eavesdropper {
            antennas: e.antennas,
            noise_power: e.noise_power.unwrap_or(DEFAULT_NOISE),
            position: e.position,
        }),
        relay: raw.relay.as_ref().map(|r| ActiveRelay {
            antennas: r.antennas,
            position: r.position,
            noise_power: r.noise_power.unwrap_or(DEFAULT_NOISE),
            power_budget: r.power_budget.unwrap_or(0.1),
        }),
        power_budget: raw.power_budget.unwrap_or(1.0),
        seed: raw.seed.unwrap_or(0),
        channel,
    };
    if let Some((key, message)) = scenario.first_issue() {
        let key = if message.contains("K <= L") {
            format!("terminal[{}]", scenario.bs_antennas)
        } else {
            key
        };
        return Err(invalid(text, &key, message));
    }

    let mobility = match &raw.mobility {
        None => MobilityProfile::Static,
        Some(m) => match m.profile.as_str() {
            "static" => MobilityProfile::Static,
            "stochastic" => MobilityProfile::Stochastic {
                drift_sigma: require(text, m.drift_sigma, "drift_sigma")?,
            },
            "steerable" => MobilityProfile::Steerable {
                ris: m.ris.unwrap_or(0),
                trajectory: require(text, m.trajectory.clone(), "trajectory")?,
            },
            "hybrid" => MobilityProfile::Hybrid {
                ris: m.ris.unwrap_or(0),
                trajectory: require(text, m.trajectory.clone(), "trajectory")?,
                drift_sigma: require(text, m.drift_sigma, "drift_sigma")?,
            },
            "predictable" => {
                let raw_states = require(text, m.state.as_ref(), "state")?;
                let states = raw_states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| channel_params(text, &format!("mobility.state[{i}]"), Some(s)))
                    .collect::<Result<Vec<_>>>()?;
                MobilityProfile::Predictable {
                    states,
                    transition: require(text, m.transition.clone(), "transition")?,
                }
            }
            other => {
                return Err(invalid(
                    text,
                    "mobility.profile",
                    format!("unknown mobility profile `{other}`"),
                ));
            }
        },
    };
    mobility
        .validate(&scenario)
        .map_err(|e| invalid(text, "mobility.profile", e.to_string()))?;

    let rs = raw.solver.unwrap_or_default();
    let d = SolverParams::default();
    let solver = SolverParams {
        max_outer_iters: rs.max_outer_iters.unwrap_or(d.max_outer_iters),
        max_inner_iters: rs.max_inner_iters.unwrap_or(d.max_inner_iters),
        tol: rs.tol.unwrap_or(d.tol),
        step_init: rs.step_init.unwrap_or(d.step_init),
        backtrack_factor: rs.backtrack_factor.unwrap_or(d.backtrack_factor),
        restarts: rs.restarts.unwrap_or(d.restarts),
        seed: scenario.seed,
    };
    solver.validate().map_err(|e| invalid(text, "solver", e.to_string()))?;

    let secrecy_demand = raw.secrecy.as_ref().map_or(0.0, |s| s.demand);
    if !(secrecy_demand >= 0.0) {
        return Err(invalid(text, "secrecy.demand", "must be >= 0"));
    }
    let pilot_count = raw.pilot.as_ref().map(|p| p.count);
    if pilot_count == Some(0) {
        return Err(invalid(text, "pilot.count", "must be >= 1"));
    }

    let rd = raw.distributed.unwrap_or_default();
    let mode = match rd.refresh.as_deref() {
        None | Some("bs_broadcast") => RefreshMode::BsBroadcast,
        Some("keep_local") => RefreshMode::KeepLocal,
        Some("neighbor_average") => RefreshMode::NeighborAverage,
        Some(other) => {
            return Err(invalid(
                text,
                "distributed.refresh",
                format!("unknown refresh mode `{other}`"),
            ));
        }
    };
    let de = EpisodeOptions::default();
    let distributed = DistributedSettings {
        slots: rd.slots.unwrap_or(10),
        policy: RefreshPolicy {
            mode,
            period: rd.period.unwrap_or(1),
        },
        options: EpisodeOptions {
            beta: rd.beta.unwrap_or(de.beta),
            sensing_noise: rd.sensing_noise.unwrap_or(de.sensing_noise),
            neighbor_radius: rd.neighbor_radius.unwrap_or(de.neighbor_radius),
        },
    };
    if distributed.policy.period == 0 {
        return Err(invalid(text, "distributed.period", "must be >= 1"));
    }
    if !(distributed.options.beta > 0.0 && distributed.options.beta <= 1.0) {
        return Err(invalid(text, "distributed.beta", "must lie in (0, 1]"));
    }
    if !(distributed.options.sensing_noise >= 0.0) {
        return Err(invalid(text, "distributed.sensing_noise", "must be >= 0"));
    }

    Ok(ScenarioFile {
        scenario,
        mobility,
        solver,
        secrecy_demand,
        pilot_count,
        distributed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "bs_antennas = 4\n\n[[ris]]\nelements = 8\nfeasibility = \"continuous\"\nposition = [30.0, 15.0, 5.0]\n\n[[terminal]]\nposition = [40.0, 5.0, 1.5]\n\n[[terminal]]\nposition = [43.0, 3.0, 1.5]\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let f = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(f.scenario.num_users(), 2);
        assert_eq!(f.scenario.weights, vec![1.0, 1.0]);
        assert_eq!(f.scenario.ris[0].cluster_budget, 8);
        assert_eq!(f.mobility, MobilityProfile::Static);
        assert_eq!(f.solver.restarts, 4);
    }

    #[test]
    fn too_many_terminals() {
        let mut text = MINIMAL.replace("bs_antennas = 4", "bs_antennas = 1");
        text.push_str("\n[[terminal]]\nposition = [1.0, 1.0, 1.0]\n");
        match parse_scenario_str(&text) {
            Err(Error::Validation { line, message, .. }) => {
                assert!(message.contains("K <= L"));
                assert_eq!(line, 11);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_reports_its_line() {
        let text = MINIMAL.replace("elements = 8\n", "elements = 8\nelements = 9\n");
        match parse_scenario_str(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_level_validation_line() {
        let text = MINIMAL.replacen(
            "position = [43.0, 3.0, 1.5]",
            "position = [43.0, 3.0, 1.5]\nnoise_power = -1.0",
            1,
        );
        match parse_scenario_str(&text) {
            Err(Error::Validation { key, line, .. }) => {
                assert_eq!(key, "terminal[1].noise_power");
                assert_eq!(line, 13);
            }
            other => panic!("{other:?}"),
        }
    }
}
