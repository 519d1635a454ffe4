use crate::precode::engine::{ActivePath, Iterate, Layout, Problem, Run, WsrObjective};
use crate::precode::{self, PrecodeSolution, SolverParams};
use crate::reflect::ReflectionConfig;
use crate::scene::{ChannelSet, Scenario};
use crate::{CMat, Error, Result};

/// Amplify-and-forward settings of the active relay antennas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridRelayConfig {
    pub alpha: f64,
    /// `P̄_z`.
    pub relay_power_budget: f64,
    /// `σ²_z`.
    pub relay_noise: f64,
    pub active_antennas: usize,
}

impl HybridRelayConfig {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let relay = scenario
            .relay
            .as_ref()
            .ok_or_else(|| Error::InvalidScenario("scenario has no active relay".into()))?;
        let cfg = Self {
            alpha: 0.0,
            relay_power_budget: relay.power_budget,
            relay_noise: relay.noise_power,
            active_antennas: relay.antennas,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite())
            || !(self.relay_power_budget >= 0.0)
            || !(self.relay_noise > 0.0)
            || self.active_antennas == 0
        {
            return Err(Error::InvalidScenario(format!("invalid relay configuration {self:?}")));
        }
        Ok(())
    }

    fn check(&self, ch: &ChannelSet) -> Result<()> {
        self.validate()?;
        let act = ch.active.as_ref().ok_or(Error::MissingActiveChannels)?;
        if act.bs_relay.nrows() != self.active_antennas {
            return Err(Error::DimensionMismatch(format!(
                "{} active antennas configured, channels have {}",
                self.active_antennas,
                act.bs_relay.nrows()
            )));
        }
        Ok(())
    }
}

/// SINR of the amplified path,
/// `α²|g_k p_k|² / (α² Σ_{l≠k} |g_k p_l|² + α²||h_k||²σ²_z + σ²_w,k)` with
/// `g_k = h_act,kᵀ H_B-R,act`.
pub fn sinr_active(ch: &ChannelSet, cfg: &HybridRelayConfig, p: &CMat, noise: &[f64], k: usize) -> Result<f64> {
    cfg.check(ch)?;
    if k >= ch.num_users() || noise.len() != ch.num_users() || p.ncols() != ch.num_users() {
        return Err(Error::DimensionMismatch("user index, noise or precoder".into()));
    }
    let path = ActivePath::new(ch, cfg.relay_noise, cfg.relay_power_budget)?;
    let a = &path.cascade * p;
    let a2 = cfg.alpha * cfg.alpha;
    let signal = a2 * a[(k, k)].norm_sqr();
    let interference: f64 = (0..a.ncols()).filter(|&l| l != k).map(|l| a[(k, l)].norm_sqr()).sum();
    Ok(signal / (a2 * interference + a2 * path.user_gain[k] * cfg.relay_noise + noise[k]))
}

/// MRC combination of both paths: `γ_k + γ_act,k`.
pub fn sinr_mrc(
    ch: &ChannelSet,
    configs: &[ReflectionConfig],
    cfg: &HybridRelayConfig,
    p: &CMat,
    noise: &[f64],
    k: usize,
) -> Result<f64> {
    Ok(precode::sinr(ch, configs, p, noise, k)? + sinr_active(ch, cfg, p, noise, k)?)
}

/// Weighted sum rate with MRC over the passive and amplified paths,
/// maximized over `P`, `θ` and `α` under the BS and relay power budgets.
/// Starts from the passive-only optimum, so it never does worse.
pub fn solve_hybrid(
    ch: &ChannelSet,
    scenario: &Scenario,
    cfg: &HybridRelayConfig,
    params: &SolverParams,
) -> Result<PrecodeSolution> {
    cfg.check(ch)?;
    let passive = precode::solve_wsr(ch, scenario, params)?;
    if cfg.relay_power_budget == 0.0 {
        return Ok(passive);
    }
    let layout = Layout::elementwise(ch, &crate::precode::wsr::feasibility_sets(scenario));
    let prob = Problem {
        ch,
        power_budget: scenario.power_budget,
        noise: scenario.noise_powers(),
        active: Some(ActivePath::new(ch, cfg.relay_noise, cfg.relay_power_budget)?),
        eve: false,
        layout,
    };
    let obj = WsrObjective {
        weights: scenario.weights.clone(),
        noise: scenario.noise_powers(),
    };
    let start = Iterate {
        p: passive.precoder.clone(),
        coeff: prob.layout.coeff_from(&passive.configs),
        alpha: 0.0,
    };
    let run = prob.ascend(&obj, start, params, true)?;
    let mut trace = passive.iterate_trace.clone();
    trace.extend_from_slice(&run.trace[1..]);
    let mut sol = prob.solution(Run { trace, ..run });
    sol.initial_objective = passive.initial_objective;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ActiveChannels;
    use crate::C64;

    fn scalar_relay() -> (ChannelSet, HybridRelayConfig) {
        let one = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let ch = ChannelSet::new(CMat::zeros(1, 1), vec![], vec![])
            .unwrap()
            .with_active(ActiveChannels {
                bs_relay: one.clone(),
                relay_user: one,
            })
            .unwrap();
        let cfg = HybridRelayConfig {
            alpha: 1.0,
            relay_power_budget: 1.0,
            relay_noise: 1.0,
            active_antennas: 1,
        };
        (ch, cfg)
    }

    #[test]
    fn scalar_active_sinr() {
        let (ch, cfg) = scalar_relay();
        let p = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        assert!((sinr_active(&ch, &cfg, &p, &[1.0], 0).unwrap() - 0.5).abs() < 1e-15);
        let off = HybridRelayConfig { alpha: 0.0, ..cfg };
        assert_eq!(sinr_active(&ch, &off, &p, &[1.0], 0).unwrap(), 0.0);
        assert!((sinr_mrc(&ch, &[], &cfg, &p, &[1.0], 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_active_blocks() {
        let ch = ChannelSet::new(CMat::zeros(1, 1), vec![], vec![]).unwrap();
        let (_, cfg) = scalar_relay();
        let p = CMat::zeros(1, 1);
        assert!(matches!(
            sinr_active(&ch, &cfg, &p, &[1.0], 0),
            Err(Error::MissingActiveChannels)
        ));
    }
}
