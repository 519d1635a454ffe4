#![allow(dead_code)]

use ris_core::reflect::FeasibilitySet;
use ris_core::scene::{
    ActiveRelay, ChannelGenParams, Constellation, Eavesdropper, FadingModel, RisPanel, Scenario, Terminal,
};

/// Multi-RIS deployment with comparable direct and reflected path gains.
pub fn scenario(l: usize, k: usize, panels: &[(usize, FeasibilitySet)], seed: u64) -> Scenario {
    Scenario {
        bs_antennas: l,
        bs_position: [0.0, 0.0, 10.0],
        ris: panels
            .iter()
            .enumerate()
            .map(|(i, &(q, fs))| RisPanel {
                elements: q,
                feasibility: fs,
                position: [30.0 + 8.0 * i as f64, 12.0 - 20.0 * (i % 2) as f64, 5.0],
                cluster_budget: q,
            })
            .collect(),
        terminals: (0..k)
            .map(|i| Terminal {
                noise_power: 1e-6,
                position: [38.0 + 3.0 * i as f64, 4.0 - 2.5 * i as f64, 1.5],
                sinr_target: 2.0,
                constellation: Constellation::psk(4),
            })
            .collect(),
        eavesdropper: None,
        relay: None,
        power_budget: 1.0,
        weights: vec![1.0; k],
        seed,
        channel: ChannelGenParams {
            model: FadingModel::Rician,
            rician_k: 3.0,
            pathloss_exponent: 2.2,
            reference_loss_db: 0.0,
            wavelength: 0.1,
        },
    }
}

pub fn with_relay(mut s: Scenario, antennas: usize, budget: f64) -> Scenario {
    s.relay = Some(ActiveRelay {
        antennas,
        position: [30.0, 12.0, 5.0],
        noise_power: 1e-7,
        power_budget: budget,
    });
    s
}

pub fn with_eve(mut s: Scenario, antennas: usize) -> Scenario {
    s.eavesdropper = Some(Eavesdropper {
        antennas,
        noise_power: 1e-6,
        position: [45.0, -3.0, 1.5],
    });
    s
}
