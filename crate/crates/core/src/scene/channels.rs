use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{distance, ChannelGenParams, Position, Scenario};
use crate::linalg::complex_normal;
use crate::reflect::ReflectionConfig;
use crate::{CMat, Error, Result, C64};

/// Channel blocks of the active amplify-and-forward path.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveChannels {
    /// BS to relay antennas, `A x L`.
    pub bs_relay: CMat,
    /// Relay antennas to users, `K x A`; row `k` is `h_{R-U,act,k}^T`.
    pub relay_user: CMat,
}

/// Eavesdropper channel blocks, mirroring the legitimate structure.
#[derive(Debug, Clone, PartialEq)]
pub struct EveChannels {
    /// BS to eavesdropper, `N_Eve x L`.
    pub direct: CMat,
    /// RIS `n` to eavesdropper, `N_Eve x Q^(n)`.
    pub ris_eve: Vec<CMat>,
}

/// One snapshot of every channel matrix in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to users, `K x L`.
    pub direct: CMat,
    /// BS to RIS `n`, `Q^(n) x L`.
    pub bs_ris: Vec<CMat>,
    /// RIS `n` to users, `K x Q^(n)`.
    pub ris_user: Vec<CMat>,
    pub active: Option<ActiveChannels>,
    pub eve: Option<EveChannels>,
    /// State index of the predictable-mobility Markov chain.
    pub markov_state: usize,
}

impl ChannelSet {
    pub fn new(direct: CMat, bs_ris: Vec<CMat>, ris_user: Vec<CMat>) -> Result<Self> {
        let ch = Self {
            direct,
            bs_ris,
            ris_user,
            active: None,
            eve: None,
            markov_state: 0,
        };
        ch.check()?;
        Ok(ch)
    }

    pub fn with_active(mut self, active: ActiveChannels) -> Result<Self> {
        self.active = Some(active);
        self.check()?;
        Ok(self)
    }

    pub fn with_eve(mut self, eve: EveChannels) -> Result<Self> {
        self.eve = Some(eve);
        self.check()?;
        Ok(self)
    }

    pub fn num_users(&self) -> usize {
        self.direct.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.direct.ncols()
    }

    pub fn num_ris(&self) -> usize {
        self.bs_ris.len()
    }

    pub fn elements(&self, n: usize) -> usize {
        self.bs_ris[n].nrows()
    }

    fn check(&self) -> Result<()> {
        let (k, l) = self.direct.shape();
        let mismatch = |m: String| Err(Error::DimensionMismatch(m));
        if self.bs_ris.len() != self.ris_user.len() {
            return mismatch("bs_ris and ris_user list lengths differ".into());
        }
        for (n, (br, ru)) in self.bs_ris.iter().zip(&self.ris_user).enumerate() {
            if br.ncols() != l || ru.nrows() != k || ru.ncols() != br.nrows() {
                return mismatch(format!(
                    "RIS {n}: bs_ris {:?}, ris_user {:?} for K={k}, L={l}",
                    br.shape(),
                    ru.shape()
                ));
            }
        }
        if let Some(a) = &self.active {
            if a.bs_relay.ncols() != l || a.relay_user.nrows() != k || a.relay_user.ncols() != a.bs_relay.nrows() {
                return mismatch("active relay blocks".into());
            }
        }
        if let Some(e) = &self.eve {
            if e.direct.ncols() != l || e.ris_eve.len() != self.bs_ris.len() {
                return mismatch("eavesdropper blocks".into());
            }
            for (g, br) in e.ris_eve.iter().zip(&self.bs_ris) {
                if g.nrows() != e.direct.nrows() || g.ncols() != br.nrows() {
                    return mismatch("eavesdropper RIS block".into());
                }
            }
        }
        Ok(())
    }

    /// Every matrix of the set in a fixed order.
    pub(crate) fn blocks(&self) -> Vec<&CMat> {
        let mut v = vec![&self.direct];
        v.extend(self.bs_ris.iter());
        v.extend(self.ris_user.iter());
        if let Some(a) = &self.active {
            v.push(&a.bs_relay);
            v.push(&a.relay_user);
        }
        if let Some(e) = &self.eve {
            v.push(&e.direct);
            v.extend(e.ris_eve.iter());
        }
        v
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<&mut CMat> {
        let mut v = vec![&mut self.direct];
        v.extend(self.bs_ris.iter_mut());
        v.extend(self.ris_user.iter_mut());
        if let Some(a) = &mut self.active {
            v.push(&mut a.bs_relay);
            v.push(&mut a.relay_user);
        }
        if let Some(e) = &mut self.eve {
            v.push(&mut e.direct);
            v.extend(e.ris_eve.iter_mut());
        }
        v
    }

    fn block_names(&self) -> Vec<(&'static str, usize)> {
        let n = self.num_ris();
        let mut v = vec![("direct", 0)];
        v.extend((0..n).map(|i| ("bs_ris", i)));
        v.extend((0..n).map(|i| ("ris_user", i)));
        if self.active.is_some() {
            v.push(("bs_relay", 0));
            v.push(("relay_user", 0));
        }
        if self.eve.is_some() {
            v.push(("eve_direct", 0));
            v.extend((0..n).map(|i| ("ris_eve", i)));
        }
        v
    }

    /// Flat CSV dump with columns `block,index,row,col,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block", "index", "row", "col", "re", "im"])?;
        for ((name, idx), m) in self.block_names().into_iter().zip(self.blocks()) {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let z = m[(r, c)];
                    w.write_record([
                        name.to_string(),
                        idx.to_string(),
                        r.to_string(),
                        c.to_string(),
                        format!("{:e}", z.re),
                        format!("{:e}", z.im),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Steering vector of a half-wavelength ULA laid along the x axis.
fn steering(n: usize, direction_cosine: f64) -> impl Iterator<Item = C64> {
    (0..n).map(move |m| C64::from_polar(1.0, PI * m as f64 * direction_cosine))
}

/// One `n_to x n_from` Rician link between two array centers.
pub(crate) fn draw_link<R: rand::Rng + ?Sized>(
    rng: &mut R,
    params: &ChannelGenParams,
    from: &Position,
    n_from: usize,
    to: &Position,
    n_to: usize,
) -> CMat {
    let d = distance(from, to);
    let amp = params.path_gain(d).sqrt();
    let k = params.effective_k();
    let (w_los, w_nlos) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    let dd = d.max(f64::MIN_POSITIVE);
    let u_dep = (to[0] - from[0]) / dd;
    let u_arr = (from[0] - to[0]) / dd;
    let carrier = C64::from_polar(1.0, -2.0 * PI * d / params.wavelength);
    let a_to: Vec<C64> = steering(n_to, u_arr).collect();
    let a_from: Vec<C64> = steering(n_from, u_dep).collect();
    CMat::from_fn(n_to, n_from, |r, c| {
        let los = a_to[r] * a_from[c] * carrier;
        let nlos = complex_normal(rng);
        (los * w_los + nlos * w_nlos) * amp
    })
}

/// Per-entry RMS amplitude of every block, laid out like a `ChannelSet`.
pub(crate) fn gain_map(scenario: &Scenario) -> ChannelSet {
    let p = &scenario.channel;
    let l = scenario.bs_antennas;
    let bs = &scenario.bs_position;
    let amp = |a: &Position, b: &Position| C64::new(p.path_gain(distance(a, b)).sqrt(), 0.0);
    let users = &scenario.terminals;
    let direct = CMat::from_fn(users.len(), l, |k, _| amp(bs, &users[k].position));
    let bs_ris = scenario
        .ris
        .iter()
        .map(|r| CMat::from_element(r.elements, l, amp(bs, &r.position)))
        .collect();
    let ris_user = scenario
        .ris
        .iter()
        .map(|r| CMat::from_fn(users.len(), r.elements, |k, _| amp(&r.position, &users[k].position)))
        .collect();
    let active = scenario.relay.as_ref().map(|a| ActiveChannels {
        bs_relay: CMat::from_element(a.antennas, l, amp(bs, &a.position)),
        relay_user: CMat::from_fn(users.len(), a.antennas, |k, _| amp(&a.position, &users[k].position)),
    });
    let eve = scenario.eavesdropper.as_ref().map(|e| EveChannels {
        direct: CMat::from_element(e.antennas, l, amp(bs, &e.position)),
        ris_eve: scenario
            .ris
            .iter()
            .map(|r| CMat::from_element(e.antennas, r.elements, amp(&r.position, &e.position)))
            .collect(),
    });
    ChannelSet {
        direct,
        bs_ris,
        ris_user,
        active,
        eve,
        markov_state: 0,
    }
}

/// Draws every channel of `scenario` for snapshot `snapshot_index`.
///
/// The result is a pure function of `(scenario, snapshot_index)`: the
/// generator is ChaCha8 seeded with `scenario.seed` on stream
/// `snapshot_index`, and blocks are drawn in the fixed order direct,
/// BS-RIS, RIS-user (per RIS), active relay, eavesdropper.
pub fn synthesize_channels(scenario: &Scenario, snapshot_index: u64) -> Result<ChannelSet> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(snapshot_index);
    let p = &scenario.channel;
    let l = scenario.bs_antennas;
    let bs = scenario.bs_position;

    let mut direct = CMat::zeros(scenario.num_users(), l);
    for (k, t) in scenario.terminals.iter().enumerate() {
        let h = draw_link(&mut rng, p, &bs, l, &t.position, 1);
        direct.row_mut(k).copy_from(&h.row(0));
    }
    let mut bs_ris = Vec::with_capacity(scenario.num_ris());
    let mut ris_user = Vec::with_capacity(scenario.num_ris());
    for r in &scenario.ris {
        bs_ris.push(draw_link(&mut rng, p, &bs, l, &r.position, r.elements));
        let mut ru = CMat::zeros(scenario.num_users(), r.elements);
        for (k, t) in scenario.terminals.iter().enumerate() {
            let h = draw_link(&mut rng, p, &r.position, r.elements, &t.position, 1);
            ru.row_mut(k).copy_from(&h.row(0));
        }
        ris_user.push(ru);
    }
    let active = scenario.relay.as_ref().map(|a| {
        let bs_relay = draw_link(&mut rng, p, &bs, l, &a.position, a.antennas);
        let mut relay_user = CMat::zeros(scenario.num_users(), a.antennas);
        for (k, t) in scenario.terminals.iter().enumerate() {
            let h = draw_link(&mut rng, p, &a.position, a.antennas, &t.position, 1);
            relay_user.row_mut(k).copy_from(&h.row(0));
        }
        ActiveChannels { bs_relay, relay_user }
    });
    let eve = scenario.eavesdropper.as_ref().map(|e| EveChannels {
        direct: draw_link(&mut rng, p, &bs, l, &e.position, e.antennas),
        ris_eve: scenario
            .ris
            .iter()
            .map(|r| draw_link(&mut rng, p, &r.position, r.elements, &e.position, e.antennas))
            .collect(),
    });
    Ok(ChannelSet {
        direct,
        bs_ris,
        ris_user,
        active,
        eve,
        markov_state: 0,
    })
}

fn check_configs(ch: &ChannelSet, configs: &[ReflectionConfig]) -> Result<()> {
    if configs.len() != ch.num_ris() {
        return Err(Error::DimensionMismatch(format!(
            "{} reflection configs for {} RIS",
            configs.len(),
            ch.num_ris()
        )));
    }
    for (n, c) in configs.iter().enumerate() {
        if c.len() != ch.elements(n) {
            return Err(Error::DimensionMismatch(format!(
                "RIS {n}: config length {} for {} elements",
                c.len(),
                ch.elements(n)
            )));
        }
    }
    Ok(())
}

/// `base + Σ_n left_n · diag(θ_n) · H_BR^(n)`.
fn cascade(base: &CMat, left: &[CMat], ch: &ChannelSet, configs: &[ReflectionConfig]) -> CMat {
    let mut h = base.clone();
    for ((g, br), cfg) in left.iter().zip(&ch.bs_ris).zip(configs) {
        let mut scaled = g.clone();
        for (q, theta) in cfg.theta().iter().enumerate() {
            for r in 0..scaled.nrows() {
                scaled[(r, q)] *= theta;
            }
        }
        h += scaled * br;
    }
    h
}

/// Composite downlink channel `H_BU + Σ_n H_RU^(n) diag(θ^(n)) H_BR^(n)`.
pub fn composite_channel(ch: &ChannelSet, configs: &[ReflectionConfig]) -> Result<CMat> {
    check_configs(ch, configs)?;
    Ok(cascade(&ch.direct, &ch.ris_user, ch, configs))
}

/// Composite BS-to-eavesdropper channel with the same single-bounce structure.
pub fn eve_composite_channel(ch: &ChannelSet, configs: &[ReflectionConfig]) -> Result<CMat> {
    check_configs(ch, configs)?;
    let eve = ch.eve.as_ref().ok_or(Error::MissingEveChannels)?;
    Ok(cascade(&eve.direct, &eve.ris_eve, ch, configs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflect::{FeasibilitySet, ReflectionConfig};
    use crate::scene::{fixtures, FadingModel};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn synthesis_is_seeded_and_deterministic() {
        let s = fixtures::scenario(4, 2, &[(8, FeasibilitySet::ContinuousPhase)]);
        let a = synthesize_channels(&s, 3).unwrap();
        let b = synthesize_channels(&s, 3).unwrap();
        assert_eq!(a, b);
        let other = synthesize_channels(&s, 4).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn huge_k_factor_converges_to_los_ramp() {
        let mut s = fixtures::scenario(2, 1, &[]);
        s.channel.rician_k = 1e9;
        let draws: Vec<C64> = (0..100)
            .map(|i| synthesize_channels(&s, i).unwrap().direct[(0, 1)])
            .collect();
        let mean = draws.iter().sum::<C64>() / 100.0;
        let var = draws.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / 100.0;
        assert!(var < 1e-6, "variance {var}");
    }

    #[test]
    fn rayleigh_second_moment_matches_path_gain() {
        // Monte-Carlo moment oracle over 1e5 independent snapshots.
        let mut s = fixtures::scenario(1, 1, &[]);
        s.channel.model = FadingModel::Rayleigh;
        s.channel.reference_loss_db = 0.0;
        s.channel.pathloss_exponent = 2.0;
        s.bs_position = [0.0, 0.0, 0.0];
        s.terminals[0].position = [3.0, 4.0, 0.0];
        let n = 100_000;
        let m2: f64 = (0..n)
            .map(|i| synthesize_channels(&s, i).unwrap().direct[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        let expected = 1.0 / 25.0;
        assert!((m2 / expected - 1.0).abs() < 0.02, "m2 {m2} vs {expected}");
    }

    fn unit_set(theta: C64) -> (ChannelSet, Vec<ReflectionConfig>) {
        let one = CMat::from_element(1, 1, c(1.0, 0.0));
        let ch = ChannelSet::new(one.clone(), vec![one.clone()], vec![one]).unwrap();
        let cfg = ReflectionConfig::new(vec![theta], FeasibilitySet::General).unwrap();
        (ch, vec![cfg])
    }

    #[test]
    fn destructive_reflection_cancels_direct_path() {
        let (ch, cfg) = unit_set(C64::from_polar(1.0, PI));
        let h = composite_channel(&ch, &cfg).unwrap();
        assert!(h[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn without_ris_composite_is_direct() {
        let d = CMat::from_fn(2, 3, |r, c| C64::new(r as f64, c as f64));
        let ch = ChannelSet::new(d.clone(), vec![], vec![]).unwrap();
        assert_eq!(composite_channel(&ch, &[]).unwrap(), d);
    }

    #[test]
    fn zero_efficiency_leaves_direct_path() {
        let s = fixtures::scenario(3, 2, &[(5, FeasibilitySet::General)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let cfg = ReflectionConfig::new(vec![C64::new(0.0, 0.0); 5], FeasibilitySet::General).unwrap();
        assert_eq!(composite_channel(&ch, &[cfg]).unwrap(), ch.direct);
    }

    #[test]
    fn unit_reflection_single_ris_is_plain_product() {
        let s = fixtures::scenario(3, 2, &[(5, FeasibilitySet::ContinuousPhase)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let cfg = ReflectionConfig::new(vec![C64::new(1.0, 0.0); 5], FeasibilitySet::ContinuousPhase).unwrap();
        let expected = &ch.direct + &ch.ris_user[0] * &ch.bs_ris[0];
        assert_eq!(composite_channel(&ch, &[cfg]).unwrap(), expected);
    }

    #[test]
    fn wrong_config_length_is_a_dimension_mismatch() {
        let s = fixtures::scenario(3, 2, &[(5, FeasibilitySet::General)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let cfg = ReflectionConfig::new(vec![C64::new(1.0, 0.0); 4], FeasibilitySet::General).unwrap();
        assert!(matches!(
            composite_channel(&ch, &[cfg]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(composite_channel(&ch, &[]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn csv_dump_has_one_line_per_entry() {
        let s = fixtures::scenario(2, 1, &[(3, FeasibilitySet::General)]);
        let ch = synthesize_channels(&s, 0).unwrap();
        let mut buf = Vec::new();
        ch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // header + 2 direct + 6 bs_ris + 3 ris_user
        assert_eq!(text.lines().count(), 1 + 2 + 6 + 3);
    }
}
