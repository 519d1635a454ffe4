//! Downlink precoding: SINR and weighted-sum-rate evaluation, linear
//! baselines, joint active/passive beamforming and symbol-level precoding
//! with constructive-interference constraints.

mod align;
pub(crate) mod engine;
pub(crate) mod slp;
pub(crate) mod wsr;

pub use slp::{
    ci_slack, psk_combinations, solve_slp, solve_slp_all_symbols, SlpSolution, SlpTheta, DEFAULT_COMBINATION_CAP,
};
pub use wsr::{solve_wsr, solve_wsr_clustered, solve_wsr_weighted, ClusterSpec};

use std::io::Write;

use crate::reflect::ReflectionConfig;
use crate::scene::{composite_channel, ChannelSet};
use crate::{linalg, CMat, Error, Result, C64};

/// Knobs shared by every iterative solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Relative objective change that ends the outer loop.
    pub tol: f64,
    /// Initial step, relative to the feasible radius of the block.
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub restarts: usize,
    /// Seed of the random initializations.
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            max_inner_iters: 50,
            tol: 1e-6,
            step_init: 0.5,
            backtrack_factor: 0.5,
            restarts: 4,
            seed: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0)
            || !(self.step_init > 0.0)
            || !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0)
            || self.restarts == 0
        {
            return Err(Error::InvalidScenario(format!("invalid solver parameters {self:?}")));
        }
        Ok(())
    }
}

/// Result of a channel-level precoding problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeSolution {
    /// Precoding matrix `L x K`, column `k` is `p_k`.
    pub precoder: CMat,
    pub configs: Vec<ReflectionConfig>,
    pub objective: f64,
    /// Objective at the initialization of the returned run.
    pub initial_objective: f64,
    /// Objective after every outer iteration, starting with the initial one.
    pub iterate_trace: Vec<f64>,
    pub converged: bool,
    /// Amplification factor of the active relay path, zero when unused.
    pub alpha: f64,
}

impl PrecodeSolution {
    pub fn iterations(&self) -> usize {
        self.iterate_trace.len().saturating_sub(1)
    }

    /// `iteration,objective` rows of the trace.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "objective", "min_slack"])?;
        for (i, f) in self.iterate_trace.iter().enumerate() {
            w.write_record([i.to_string(), f.to_string(), String::new()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Effective gains `A = H P`: entry `(k, j)` is what user `k` receives from
/// stream `j`.
pub(crate) fn gains(h: &CMat, p: &CMat) -> CMat {
    h * p
}

/// SINR of user `k` from the gain matrix `A = H P`.
pub(crate) fn sinr_from_gains(a: &CMat, noise: f64, k: usize) -> f64 {
    let signal = a[(k, k)].norm_sqr();
    let interference: f64 = (0..a.ncols()).filter(|&j| j != k).map(|j| a[(k, j)].norm_sqr()).sum();
    signal / (interference + noise)
}

fn check_precoder(ch: &ChannelSet, p: &CMat, noise: &[f64]) -> Result<()> {
    let (k, l) = ch.direct.shape();
    if p.nrows() != l || p.ncols() != k || noise.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "precoder {:?} and {} noise powers for K={k}, L={l}",
            p.shape(),
            noise.len()
        )));
    }
    Ok(())
}

/// SINR of user `k` over the composite channel:
/// `|e_k p_k|² / (Σ_{j≠k} |e_k p_j|² + σ²_k)`.
pub fn sinr(ch: &ChannelSet, configs: &[ReflectionConfig], p: &CMat, noise: &[f64], k: usize) -> Result<f64> {
    check_precoder(ch, p, noise)?;
    if k >= ch.num_users() {
        return Err(Error::DimensionMismatch(format!("user {k} out of range")));
    }
    let h = composite_channel(ch, configs)?;
    Ok(sinr_from_gains(&gains(&h, p), noise[k], k))
}

/// `Σ_k ω_k log2(1 + γ_k)`.
pub fn weighted_sum_rate(
    ch: &ChannelSet,
    configs: &[ReflectionConfig],
    p: &CMat,
    noise: &[f64],
    weights: &[f64],
) -> Result<f64> {
    check_precoder(ch, p, noise)?;
    if weights.len() != ch.num_users() {
        return Err(Error::DimensionMismatch("weights length".into()));
    }
    let h = composite_channel(ch, configs)?;
    let a = gains(&h, p);
    Ok(weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * (1.0 + sinr_from_gains(&a, noise[k], k)).log2())
        .sum())
}

/// Matched-filter columns `conj(e_k)/||e_k||`, each scaled to `P̄/K`.
/// Users with a zero channel get the first antenna instead of an error.
pub(crate) fn mrt_columns(h: &CMat, power_budget: f64) -> CMat {
    let (k, l) = h.shape();
    let scale = (power_budget / k as f64).sqrt();
    let mut p = CMat::zeros(l, k);
    for u in 0..k {
        let norm = h.row(u).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for a in 0..l {
                p[(a, u)] = h[(u, a)].conj() / norm * scale;
            }
        } else {
            p[(0, u)] = C64::new(scale, 0.0);
        }
    }
    p
}

/// Maximum-ratio transmission with equal power split.
pub fn mrt_precoder(ch: &ChannelSet, configs: &[ReflectionConfig], power_budget: f64) -> Result<CMat> {
    let h = composite_channel(ch, configs)?;
    if let Some(user) = (0..h.nrows()).find(|&u| h.row(u).iter().all(|z| z.norm_sqr() == 0.0)) {
        return Err(Error::ZeroChannel { user });
    }
    Ok(mrt_columns(&h, power_budget))
}

/// Zero-forcing: right pseudo-inverse of the composite channel with each
/// column normalized to `P̄/K`.
pub fn zf_precoder(ch: &ChannelSet, configs: &[ReflectionConfig], power_budget: f64) -> Result<CMat> {
    let h = composite_channel(ch, configs)?;
    let mut w = linalg::pinv_full_rank(&h, h.nrows())?;
    let scale = (power_budget / h.nrows() as f64).sqrt();
    for mut col in w.column_iter_mut() {
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.iter_mut().for_each(|z| *z *= scale / n);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflect::FeasibilitySet;
    use crate::scene::{fixtures, synthesize_channels};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn direct_only(h: CMat) -> ChannelSet {
        ChannelSet::new(h, vec![], vec![]).unwrap()
    }

    #[test]
    fn single_user_sinr_is_snr() {
        let ch = direct_only(CMat::from_row_slice(1, 2, &[c(1.0, 1.0), c(0.5, 0.0)]));
        let p = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let e = c(1.0, 1.0) + c(0.0, 0.5);
        let got = sinr(&ch, &[], &p, &[0.5], 0).unwrap();
        assert!((got - e.norm_sqr() / 0.5).abs() < 1e-14);
    }

    #[test]
    fn silent_interferers_leave_noise_only() {
        let ch = direct_only(CMat::from_fn(2, 2, |r, c2| C64::new(1.0 + r as f64, c2 as f64)));
        let mut p = CMat::zeros(2, 2);
        p[(0, 0)] = c(1.0, 0.0);
        let g = sinr(&ch, &[], &p, &[0.3, 0.3], 0).unwrap();
        assert!((g - 1.0 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn wsr_trivial_cases() {
        let ch = direct_only(CMat::from_element(1, 1, c(1.0, 0.0)));
        let zero = CMat::zeros(1, 1);
        assert_eq!(weighted_sum_rate(&ch, &[], &zero, &[1.0], &[1.0]).unwrap(), 0.0);
        let one = CMat::from_element(1, 1, c(1.0, 0.0));
        assert!((weighted_sum_rate(&ch, &[], &one, &[1.0], &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        let s = fixtures::scenario(4, 3, &[(6, FeasibilitySet::ContinuousPhase)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let cfg = vec![ReflectionConfig::unit(6, FeasibilitySet::ContinuousPhase)];
        let p = mrt_precoder(&ch, &cfg, 1.0).unwrap();
        let w = [1.0, 2.0, 0.5];
        let w3: Vec<f64> = w.iter().map(|x| 3.0 * x).collect();
        let a = weighted_sum_rate(&ch, &cfg, &p, &s.noise_powers(), &w).unwrap();
        let b = weighted_sum_rate(&ch, &cfg, &p, &s.noise_powers(), &w3).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b.abs());
    }

    #[test]
    fn mrt_examples() {
        let ch = direct_only(CMat::from_element(1, 1, c(2.0, 0.0)));
        let p = mrt_precoder(&ch, &[], 1.0).unwrap();
        assert!((p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let zero = direct_only(CMat::zeros(1, 1));
        assert!(matches!(
            mrt_precoder(&zero, &[], 1.0),
            Err(Error::ZeroChannel { user: 0 })
        ));
        let ch = direct_only(CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 1.0)]));
        let p = mrt_precoder(&ch, &[], 1.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p[(0, 0)] - c(r, 0.0)).norm() < 1e-15);
        assert!((p[(1, 0)] - c(0.0, -r)).norm() < 1e-15);
    }

    #[test]
    fn zf_examples() {
        let ch = direct_only(CMat::identity(3, 3));
        let p = zf_precoder(&ch, &[], 3.0).unwrap();
        assert!((p - CMat::identity(3, 3)).iter().all(|z| z.norm() < 1e-12));
        let rank1 = direct_only(CMat::from_fn(2, 2, |_, _| c(1.0, 0.0)));
        assert!(matches!(
            zf_precoder(&rank1, &[], 1.0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn zf_nulls_interference() {
        // residual check on a random full-rank 2x4 composite channel
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = CMat::from_fn(2, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let ch = direct_only(h.clone());
        let p = zf_precoder(&ch, &[], 2.0).unwrap();
        let hp = &h * &p;
        assert!(hp[(0, 1)].norm() < 1e-10 && hp[(1, 0)].norm() < 1e-10);
        assert!((linalg::fro2(&p) - 2.0).abs() < 1e-12);
    }
}
