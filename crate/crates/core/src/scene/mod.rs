//! Network scenarios, seeded channel synthesis, the composite downlink
//! channel and snapshot-to-snapshot mobility.

mod channels;
mod mobility;

pub use channels::{
    composite_channel, eve_composite_channel, synthesize_channels, ActiveChannels, ChannelSet, EveChannels,
};
pub use mobility::{evolve, snapshot_sequence, MobilityProfile};

use std::f64::consts::PI;

use crate::reflect::FeasibilitySet;
use crate::{Error, Result};

/// Cartesian position in meters.
pub type Position = [f64; 3];

/// Fading law for every link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingModel {
    Rayleigh,
    Rician,
}

/// Parameters of the stochastic channel generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGenParams {
    pub model: FadingModel,
    /// Linear Rician K-factor (ratio of LoS to scattered power).
    pub rician_k: f64,
    pub pathloss_exponent: f64,
    /// Loss at the 1 m reference distance, in dB.
    pub reference_loss_db: f64,
    pub wavelength: f64,
}

impl Default for ChannelGenParams {
    fn default() -> Self {
        Self {
            model: FadingModel::Rician,
            rician_k: 3.0,
            pathloss_exponent: 2.2,
            reference_loss_db: 30.0,
            wavelength: 0.1,
        }
    }
}

impl ChannelGenParams {
    /// Average power gain of a link of length `distance` (clamped to 1 m).
    pub fn path_gain(&self, distance: f64) -> f64 {
        10f64.powf(-self.reference_loss_db / 10.0) * distance.max(1.0).powf(-self.pathloss_exponent)
    }

    /// K-factor actually used by the generator (zero for Rayleigh).
    pub fn effective_k(&self) -> f64 {
        match self.model {
            FadingModel::Rayleigh => 0.0,
            FadingModel::Rician => self.rician_k,
        }
    }

    fn check(&self) -> std::result::Result<(), (String, String)> {
        let bad = |k: &str, m: &str| Err((format!("channel.{k}"), m.to_string()));
        if !(self.rician_k >= 0.0) {
            return bad("rician_k", "must be >= 0");
        }
        if !(self.pathloss_exponent > 0.0) {
            return bad("pathloss_exponent", "must be > 0");
        }
        if !self.reference_loss_db.is_finite() {
            return bad("reference_loss_db", "must be finite");
        }
        if !(self.wavelength > 0.0) {
            return bad("wavelength", "must be > 0");
        }
        Ok(())
    }
}

/// PSK constellation and the half-angle of its constructive-interference
/// sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    pub order: usize,
    pub ci_half_angle: f64,
}

impl Constellation {
    /// `M`-PSK with the decision-region half-angle `π/M`.
    pub fn psk(order: usize) -> Self {
        Self {
            order,
            ci_half_angle: PI / order as f64,
        }
    }

    /// Symbol `m` of the constellation, `exp(j(2m+1)π/M)`.
    pub fn symbol(&self, m: usize) -> crate::C64 {
        crate::C64::from_polar(1.0, (2 * m + 1) as f64 * PI / self.order as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisPanel {
    pub elements: usize,
    pub feasibility: FeasibilitySet,
    pub position: Position,
    /// Maximum number of element clusters for control signaling.
    pub cluster_budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub noise_power: f64,
    pub position: Position,
    /// Linear SINR target used by the constructive-interference constraints.
    pub sinr_target: f64,
    pub constellation: Constellation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eavesdropper {
    pub antennas: usize,
    pub noise_power: f64,
    pub position: Position,
}

/// Active amplify-and-forward antennas co-located with a RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRelay {
    pub antennas: usize,
    pub position: Position,
    /// Noise variance at the relay input.
    pub noise_power: f64,
    pub power_budget: f64,
}

/// Full description of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_antennas: usize,
    pub bs_position: Position,
    pub ris: Vec<RisPanel>,
    pub terminals: Vec<Terminal>,
    pub eavesdropper: Option<Eavesdropper>,
    pub relay: Option<ActiveRelay>,
    /// BS transmit power budget in watts.
    pub power_budget: f64,
    /// Per-user priority weights of the weighted sum rate.
    pub weights: Vec<f64>,
    pub seed: u64,
    pub channel: ChannelGenParams,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.terminals.len()
    }

    pub fn num_ris(&self) -> usize {
        self.ris.len()
    }

    pub fn noise_powers(&self) -> Vec<f64> {
        self.terminals.iter().map(|t| t.noise_power).collect()
    }

    /// First violated invariant as `(key, message)`, where `key` is the
    /// dotted configuration path of the offending field.
    pub fn first_issue(&self) -> Option<(String, String)> {
        self.check().err()
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|(k, m)| Error::InvalidScenario(format!("{k}: {m}")))
    }

    fn check(&self) -> std::result::Result<(), (String, String)> {
        let bad = |k: String, m: &str| Err((k, m.to_string()));
        let k = self.terminals.len();
        if self.bs_antennas == 0 {
            return bad("bs_antennas".into(), "must be positive");
        }
        if k == 0 {
            return bad("terminal".into(), "at least one terminal is required");
        }
        if k > self.bs_antennas {
            return bad(
                "terminal".into(),
                &format!("K <= L violated: {k} terminals for {} BS antennas", self.bs_antennas),
            );
        }
        if self.weights.len() != k {
            return bad(
                "weights".into(),
                &format!("expected {k} weights, found {}", self.weights.len()),
            );
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return bad("weights".into(), "all weights must be positive and finite");
        }
        if !(self.power_budget >= 0.0) || !self.power_budget.is_finite() {
            return bad("power_budget".into(), "must be finite and >= 0");
        }
        for (i, p) in self.ris.iter().enumerate() {
            if p.elements == 0 {
                return bad(format!("ris[{i}].elements"), "must be >= 1");
            }
            if p.cluster_budget == 0 || p.cluster_budget > p.elements {
                return bad(format!("ris[{i}].clusters"), "must satisfy 1 <= R <= Q");
            }
            if let FeasibilitySet::DiscretePhase { tau } = p.feasibility {
                if tau < 2 {
                    return bad(format!("ris[{i}].tau"), "must be >= 2");
                }
            }
        }
        for (i, t) in self.terminals.iter().enumerate() {
            if !(t.noise_power > 0.0) {
                return bad(format!("terminal[{i}].noise_power"), "must be > 0");
            }
            if !(t.sinr_target > 0.0) {
                return bad(format!("terminal[{i}].sinr_target"), "must be > 0");
            }
            if t.constellation.order < 2 {
                return bad(format!("terminal[{i}].psk_order"), "must be >= 2");
            }
            let phi = t.constellation.ci_half_angle;
            if !(phi > 0.0 && phi <= std::f64::consts::FRAC_PI_2) {
                return bad(format!("terminal[{i}].ci_half_angle"), "must lie in (0, pi/2]");
            }
        }
        if let Some(e) = &self.eavesdropper {
            if e.antennas == 0 {
                return bad("eavesdropper.antennas".into(), "must be >= 1");
            }
            if !(e.noise_power > 0.0) {
                return bad("eavesdropper.noise_power".into(), "must be > 0");
            }
        }
        if let Some(r) = &self.relay {
            if r.antennas == 0 {
                return bad("relay.antennas".into(), "must be >= 1");
            }
            if !(r.noise_power > 0.0) {
                return bad("relay.noise_power".into(), "must be > 0");
            }
            if !(r.power_budget >= 0.0) {
                return bad("relay.power_budget".into(), "must be >= 0");
            }
        }
        self.channel.check()
    }
}

pub(crate) fn distance(a: &Position, b: &Position) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_above_l_is_rejected() {
        let s = fixtures::scenario(2, 3, &[]);
        let (key, msg) = s.first_issue().unwrap();
        assert_eq!(key, "terminal");
        assert!(msg.contains("K <= L"));
    }

    #[test]
    fn weights_length_must_match() {
        let mut s = fixtures::scenario(4, 2, &[]);
        s.weights.push(1.0);
        assert_eq!(s.first_issue().unwrap().0, "weights");
        s.weights = vec![1.0, 0.0];
        assert_eq!(s.first_issue().unwrap().0, "weights");
    }

    #[test]
    fn cluster_budget_bounded_by_elements() {
        let mut s = fixtures::scenario(4, 2, &[(8, FeasibilitySet::ContinuousPhase)]);
        assert!(s.validate().is_ok());
        s.ris[0].cluster_budget = 9;
        assert_eq!(s.first_issue().unwrap().0, "ris[0].clusters");
    }

    #[test]
    fn psk_symbols_sit_at_odd_multiples_of_pi_over_m() {
        let c = Constellation::psk(4);
        let s = c.symbol(0);
        assert!((s.arg() - PI / 4.0).abs() < 1e-15);
        assert!((c.ci_half_angle - PI / 4.0).abs() < 1e-15);
    }
}
