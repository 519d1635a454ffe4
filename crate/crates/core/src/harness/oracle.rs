use crate::precode::wsr::check_instance;
use crate::reflect::{FeasibilitySet, ReflectionConfig};
use crate::scene::{composite_channel, ChannelSet, Scenario};
use crate::{Error, Result};

/// Largest number of joint configurations the enumeration visits.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 20;

/// Exact weighted-sum-rate optimum of a single-user instance with discrete
/// phases, by enumerating every joint configuration. For each one the
/// matched filter at full power is optimal, giving
/// `ω log2(1 + P̄ ||e(θ)||² / σ²)`.
pub fn brute_force_wsr(ch: &ChannelSet, scenario: &Scenario) -> Result<f64> {
    check_instance(ch, scenario)?;
    if ch.num_users() != 1 {
        return Err(Error::InvalidScenario("enumeration oracle needs a single user".into()));
    }
    let mut taus = Vec::new();
    let mut size: u128 = 1;
    for (n, r) in scenario.ris.iter().enumerate() {
        let FeasibilitySet::DiscretePhase { tau } = r.feasibility else {
            return Err(Error::InvalidScenario(format!("RIS {n} does not use discrete phases")));
        };
        for _ in 0..r.elements {
            size = size.saturating_mul(tau as u128);
        }
        taus.push(tau);
    }
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let lens: Vec<usize> = scenario.ris.iter().map(|r| r.elements).collect();
    let mut idx: Vec<Vec<u32>> = lens.iter().map(|&q| vec![0; q]).collect();
    let noise = scenario.terminals[0].noise_power;
    let weight = scenario.weights[0];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..size {
        let configs: Vec<ReflectionConfig> = idx
            .iter()
            .zip(&taus)
            .map(|(m, &tau)| ReflectionConfig::from_phase_indices(m, tau))
            .collect();
        let h = composite_channel(ch, &configs)?;
        let g: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        best = best.max(weight * (1.0 + scenario.power_budget * g / noise).log2());
        // odometer over all element indices
        'carry: for (n, m) in idx.iter_mut().enumerate() {
            for v in m.iter_mut() {
                *v += 1;
                if *v < taus[n] {
                    break 'carry;
                }
                *v = 0;
            }
        }
    }
    Ok(best)
}
