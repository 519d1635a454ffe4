//! Block-ascent machinery shared by the channel-level solvers.
//!
//! Every objective here is a function of three small product matrices:
//! the legitimate gains `A = H(θ) P`, the eavesdropper gains
//! `E = H_E(θ) P` and the active relay gains `α C P`. An objective reports
//! its value and the Wirtinger derivative with respect to each product;
//! the engine chains these through to `P`, `θ` and handles feasibility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{align, mrt_columns, sinr_from_gains, PrecodeSolution, SolverParams};
use crate::reflect::{grid_point, Clustering, FeasibilitySet, ReflectionConfig};
use crate::scene::{composite_channel, eve_composite_channel, ChannelSet};
use crate::{linalg, CMat, Error, Result, C64};

const WMMSE_STEPS: usize = 3;

/// How reflection coefficients map to optimization coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub sets: Vec<FeasibilitySet>,
    /// `groups[n][c]` lists the elements of RIS `n` driven by coordinate `c`.
    pub groups: Vec<Vec<Vec<usize>>>,
    lens: Vec<usize>,
}

impl Layout {
    pub fn elementwise(ch: &ChannelSet, sets: &[FeasibilitySet]) -> Self {
        let groups = (0..ch.num_ris())
            .map(|n| (0..ch.elements(n)).map(|q| vec![q]).collect())
            .collect();
        Self {
            sets: sets.to_vec(),
            groups,
            lens: (0..ch.num_ris()).map(|n| ch.elements(n)).collect(),
        }
    }

    pub fn clustered(clusterings: &[Clustering], sets: &[FeasibilitySet]) -> Self {
        Self {
            sets: sets.to_vec(),
            groups: clusterings.iter().map(|c| c.members()).collect(),
            lens: clusterings.iter().map(|c| c.elements()).collect(),
        }
    }

    pub fn configs(&self, coeff: &[Vec<C64>]) -> Vec<ReflectionConfig> {
        (0..self.sets.len())
            .map(|n| {
                let mut theta = vec![C64::new(1.0, 0.0); self.lens[n]];
                for (c, members) in self.groups[n].iter().enumerate() {
                    for &q in members {
                        theta[q] = coeff[n][c];
                    }
                }
                ReflectionConfig::from_feasible(theta, self.sets[n])
            })
            .collect()
    }

    /// Uniformly random phases on each feasible set (unit modulus).
    pub fn random_coeff<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<C64>> {
        self.sets
            .iter()
            .zip(&self.groups)
            .map(|(fs, groups)| {
                groups
                    .iter()
                    .map(|_| match *fs {
                        FeasibilitySet::DiscretePhase { tau } => grid_point(rng.random_range(0..tau), tau),
                        _ => C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)),
                    })
                    .collect()
            })
            .collect()
    }

    /// Coordinates read back from element-level configurations, taking the
    /// first member of each group.
    pub fn coeff_from(&self, configs: &[ReflectionConfig]) -> Vec<Vec<C64>> {
        self.groups
            .iter()
            .zip(configs)
            .map(|(groups, cfg)| groups.iter().map(|m| cfg.theta()[m[0]]).collect())
            .collect()
    }
}

/// Amplify-and-forward path data.
#[derive(Debug, Clone)]
pub(crate) struct ActivePath {
    /// `relay_user · bs_relay`, `K x L`.
    pub cascade: CMat,
    pub bs_relay: CMat,
    /// `||h_act,k||²` per user.
    pub user_gain: Vec<f64>,
    pub relay_noise: f64,
    pub relay_budget: f64,
}

impl ActivePath {
    pub fn new(ch: &ChannelSet, relay_noise: f64, relay_budget: f64) -> Result<Self> {
        let act = ch.active.as_ref().ok_or(Error::MissingActiveChannels)?;
        let user_gain = act
            .relay_user
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        Ok(Self {
            cascade: &act.relay_user * &act.bs_relay,
            bs_relay: act.bs_relay.clone(),
            user_gain,
            relay_noise,
            relay_budget,
        })
    }

    /// Largest α that keeps the relay within its budget for precoder `p`.
    pub fn alpha_max(&self, p: &CMat) -> f64 {
        let load = linalg::fro2(&(&self.bs_relay * p)) + p.ncols() as f64 * self.relay_noise;
        (self.relay_budget / load).sqrt()
    }
}

pub(crate) struct Problem<'a> {
    pub ch: &'a ChannelSet,
    pub layout: Layout,
    pub power_budget: f64,
    pub noise: Vec<f64>,
    pub active: Option<ActivePath>,
    pub eve: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub p: CMat,
    pub coeff: Vec<Vec<C64>>,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Products {
    pub a: CMat,
    pub e: Option<CMat>,
    pub act: Option<CMat>,
    pub act_noise: Vec<f64>,
}

/// `∂f/∂conj(·)` of each product.
pub(crate) struct Adjoint {
    pub a: CMat,
    pub e: Option<CMat>,
    pub act: Option<CMat>,
}

pub(crate) trait Objective {
    fn value(&self, pr: &Products) -> f64;
    fn adjoint(&self, pr: &Products) -> Adjoint;
    /// For a single user: the value depends on `θ` only through `|A_00|` and
    /// increases with it, and matched filtering maximizes it over `P` when
    /// the active path is off.
    fn single_user_gain(&self) -> bool {
        false
    }
    /// User weights when the value is a plain weighted sum rate over `A`,
    /// which enables weighted-MMSE updates of `P`.
    fn rate_weights(&self) -> Option<&[f64]> {
        None
    }
}

/// Adds `scale · ∂γ_k/∂conj(A_k·)` to row `k` of `out`.
pub(crate) fn add_sinr_adjoint(a: &CMat, noise: f64, k: usize, scale: f64, out: &mut CMat) {
    let s = a[(k, k)].norm_sqr();
    let mut i = noise;
    for j in 0..a.ncols() {
        if j != k {
            i += a[(k, j)].norm_sqr();
        }
    }
    out[(k, k)] += a[(k, k)] * (scale / i);
    for j in 0..a.ncols() {
        if j != k {
            out[(k, j)] -= a[(k, j)] * (scale * s / (i * i));
        }
    }
}

/// `Σ_k ω_k log2(1 + γ_k + γ_act,k)`.
pub(crate) struct WsrObjective {
    pub weights: Vec<f64>,
    pub noise: Vec<f64>,
}

impl WsrObjective {
    fn total_sinr(&self, pr: &Products, k: usize) -> f64 {
        let mut g = sinr_from_gains(&pr.a, self.noise[k], k);
        if let Some(act) = &pr.act {
            g += sinr_from_gains(act, pr.act_noise[k], k);
        }
        g
    }
}

impl Objective for WsrObjective {
    fn value(&self, pr: &Products) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (1.0 + self.total_sinr(pr, k)).log2())
            .sum()
    }

    fn adjoint(&self, pr: &Products) -> Adjoint {
        let mut ga = CMat::zeros(pr.a.nrows(), pr.a.ncols());
        let mut gact = pr.act.as_ref().map(|m| CMat::zeros(m.nrows(), m.ncols()));
        for (k, w) in self.weights.iter().enumerate() {
            let coef = w / (std::f64::consts::LN_2 * (1.0 + self.total_sinr(pr, k)));
            add_sinr_adjoint(&pr.a, self.noise[k], k, coef, &mut ga);
            if let (Some(act), Some(g)) = (&pr.act, gact.as_mut()) {
                add_sinr_adjoint(act, pr.act_noise[k], k, coef, g);
            }
        }
        Adjoint {
            a: ga,
            e: None,
            act: gact,
        }
    }

    fn single_user_gain(&self) -> bool {
        self.weights.len() == 1
    }

    fn rate_weights(&self) -> Option<&[f64]> {
        Some(&self.weights)
    }
}

/// One weighted-MMSE update of `P` for the gains `H P` under `||P||² <= P̄`.
/// The multiplier of the power constraint is found by bisection on the
/// eigenvalues of the weighted receive covariance.
fn wmmse_step(h: &CMat, p: &CMat, weights: &[f64], noise: &[f64], budget: f64) -> CMat {
    let (k_users, l) = h.shape();
    let a = h * p;
    let mut m = CMat::zeros(l, l);
    let mut rhs = CMat::zeros(l, k_users);
    for k in 0..k_users {
        let total = a.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() + noise[k];
        let u = a[(k, k)] / total;
        let w = 1.0 / (1.0 - a[(k, k)].norm_sqr() / total).max(1e-300);
        let hk = h.row(k).adjoint();
        m += &hk * hk.adjoint() * C64::new(weights[k] * u.norm_sqr() * w, 0.0);
        rhs.set_column(k, &(&hk * (u * weights[k] * w)));
    }
    let eig = m.symmetric_eigen();
    let q = eig.eigenvectors.adjoint() * &rhs;
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let r: Vec<f64> = q.row_iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum()).collect();
    let floor = 1e-12 * lam_max;
    let power = |mu: f64| -> f64 {
        r.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(ri, li)| {
                let d = li.max(0.0) + mu;
                if d <= floor {
                    0.0
                } else {
                    ri / (d * d)
                }
            })
            .sum()
    };
    let mut mu = 0.0;
    if !(power(0.0) <= budget) {
        let (mut lo, mut hi) = (0.0, (r.iter().sum::<f64>() / budget).sqrt());
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if power(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mu = hi;
    }
    let mut scaled = q;
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        let d = eig.eigenvalues[i].max(0.0) + mu;
        let f = if d <= floor { 0.0 } else { 1.0 / d };
        row.iter_mut().for_each(|z| *z *= f);
    }
    &eig.eigenvectors * scaled
}

struct Channels {
    h: CMat,
    he: Option<CMat>,
}

/// Inner product `Re Σ conj(g) d`.
fn re_inner(g: &CMat, d: &CMat) -> f64 {
    g.iter().zip(d.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `dst += d · src`.
fn add_scaled(dst: &mut CMat, src: &CMat, d: C64) {
    dst.iter_mut().zip(src.iter()).for_each(|(x, y)| *x += y * d);
}

fn coupling(left: &CMat, w: &CMat, members: &[usize]) -> CMat {
    let mut b = CMat::zeros(left.nrows(), w.ncols());
    for &q in members {
        for k in 0..left.nrows() {
            let u = left[(k, q)];
            if u == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..w.ncols() {
                b[(k, j)] += u * w[(q, j)];
            }
        }
    }
    b
}

impl Problem<'_> {
    pub fn users(&self) -> usize {
        self.ch.num_users()
    }

    fn channels(&self, coeff: &[Vec<C64>]) -> Result<Channels> {
        let configs = self.layout.configs(coeff);
        Ok(Channels {
            h: composite_channel(self.ch, &configs)?,
            he: if self.eve {
                Some(eve_composite_channel(self.ch, &configs)?)
            } else {
                None
            },
        })
    }

    fn products_with(&self, chn: &Channels, p: &CMat, alpha: f64) -> Products {
        let (act, act_noise) = match &self.active {
            Some(path) => (
                Some(&path.cascade * p * C64::new(alpha, 0.0)),
                (0..self.users())
                    .map(|k| alpha * alpha * path.user_gain[k] * path.relay_noise + self.noise[k])
                    .collect(),
            ),
            None => (None, Vec::new()),
        };
        Products {
            a: &chn.h * p,
            e: chn.he.as_ref().map(|he| he * p),
            act,
            act_noise,
        }
    }

    pub fn products(&self, it: &Iterate) -> Result<Products> {
        let chn = self.channels(&it.coeff)?;
        Ok(self.products_with(&chn, &it.p, it.alpha))
    }

    fn p_feasible(&self, p: &CMat, alpha: f64) -> bool {
        if linalg::fro2(p) > self.power_budget * (1.0 + 1e-12) {
            return false;
        }
        match &self.active {
            Some(path) if alpha > 0.0 => {
                let load = linalg::fro2(&(&path.bs_relay * p)) + p.ncols() as f64 * path.relay_noise;
                alpha * alpha * load <= path.relay_budget * (1.0 + 1e-12)
            }
            _ => true,
        }
    }

    fn project_ball(&self, p: CMat) -> CMat {
        let e = linalg::fro2(&p);
        if e > self.power_budget {
            p * C64::new((self.power_budget / e).sqrt(), 0.0)
        } else {
            p
        }
    }

    /// Improves `P` with the fixed channels: weighted-MMSE steps for plain
    /// rate objectives, projected gradient ascent with Armijo backtracking
    /// otherwise.
    fn p_block(&self, obj: &dyn Objective, it: &mut Iterate, params: &SolverParams) -> Result<()> {
        if self.power_budget == 0.0 {
            it.p.fill(C64::new(0.0, 0.0));
            return Ok(());
        }
        let chn = self.channels(&it.coeff)?;
        let mut pr = self.products_with(&chn, &it.p, it.alpha);
        let mut f = obj.value(&pr);

        if self.users() == 1 && obj.single_user_gain() && (self.active.is_none() || it.alpha == 0.0) {
            let cand = mrt_columns(&chn.h, self.power_budget);
            let fc = obj.value(&self.products_with(&chn, &cand, it.alpha));
            if fc > f {
                it.p = cand;
            }
            return Ok(());
        }

        if let Some(weights) = obj.rate_weights() {
            if !self.eve && (self.active.is_none() || it.alpha == 0.0) {
                let mut cand = it.p.clone();
                for _ in 0..WMMSE_STEPS {
                    cand = self.project_ball(wmmse_step(&chn.h, &cand, weights, &self.noise, self.power_budget));
                    let fc = obj.value(&self.products_with(&chn, &cand, it.alpha));
                    if !(fc > f) || !self.p_feasible(&cand, it.alpha) {
                        break;
                    }
                    let gain = fc - f;
                    it.p = cand.clone();
                    f = fc;
                    if gain <= 1e-2 * params.tol * f.abs() {
                        break;
                    }
                }
                return Ok(());
            }
        }

        let radius = self.power_budget.sqrt();
        let mut delta = params.step_init * radius;
        for _ in 0..params.max_inner_iters {
            let adj = obj.adjoint(&pr);
            let mut g = chn.h.adjoint() * &adj.a;
            if let (Some(he), Some(ge)) = (&chn.he, &adj.e) {
                g += he.adjoint() * ge;
            }
            if let (Some(path), Some(gact)) = (&self.active, &adj.act) {
                g += path.cascade.adjoint() * gact * C64::new(it.alpha, 0.0);
            }
            g *= C64::new(2.0, 0.0);
            let gn = linalg::fro2(&g).sqrt();
            if !(gn > 0.0 && gn.is_finite()) {
                break;
            }
            let mut accepted = None;
            while delta > 1e-14 * radius {
                let cand = self.project_ball(&it.p + &g * C64::new(delta / gn, 0.0));
                if self.p_feasible(&cand, it.alpha) {
                    let prc = self.products_with(&chn, &cand, it.alpha);
                    let fc = obj.value(&prc);
                    let dir = re_inner(&g, &(&cand - &it.p));
                    if fc > f && fc >= f + 1e-4 * dir {
                        accepted = Some((cand, prc, fc));
                        break;
                    }
                }
                delta *= params.backtrack_factor;
            }
            let Some((cand, prc, fc)) = accepted else { break };
            let gain = fc - f;
            it.p = cand;
            pr = prc;
            f = fc;
            delta = (delta / params.backtrack_factor).min(2.0 * radius);
            if gain <= 1e-2 * params.tol * f.abs() {
                break;
            }
        }
        Ok(())
    }

    /// Golden-section search for α over `[0, α_max(P)]`, keeping the best of
    /// the search point, the boundary and the current value.
    fn alpha_block(&self, obj: &dyn Objective, it: &mut Iterate) -> Result<()> {
        let Some(path) = &self.active else { return Ok(()) };
        let amax = path.alpha_max(&it.p);
        if !(amax > 0.0) {
            it.alpha = 0.0;
            return Ok(());
        }
        let chn = self.channels(&it.coeff)?;
        let eval = |alpha: f64| obj.value(&self.products_with(&chn, &it.p, alpha));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0, amax);
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (eval(x1), eval(x2));
        for _ in 0..80 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = eval(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = eval(x1);
            }
        }
        let mut best = (it.alpha.min(amax), eval(it.alpha.min(amax)));
        if it.alpha > amax {
            best.1 = f64::NEG_INFINITY;
        }
        for cand in [0.5 * (lo + hi), amax, 0.0] {
            let fc = eval(cand);
            if fc > best.1 {
                best = (cand, fc);
            }
        }
        it.alpha = best.0;
        Ok(())
    }

    fn theta_block(&self, obj: &dyn Objective, it: &mut Iterate, params: &SolverParams) -> Result<()> {
        if self.layout.sets.is_empty() {
            return Ok(());
        }
        if self.users() == 1 && obj.single_user_gain() {
            return self.align_block(obj, it);
        }
        let chn = self.channels(&it.coeff)?;
        let mut pr = self.products_with(&chn, &it.p, it.alpha);
        let mut f = obj.value(&pr);
        let mut trial = pr.clone();
        let zero = C64::new(0.0, 0.0);
        for n in 0..self.layout.sets.len() {
            let w = &self.ch.bs_ris[n] * &it.p;
            let eve_left = if self.eve {
                self.ch.eve.as_ref().map(|e| &e.ris_eve[n])
            } else {
                None
            };
            let set = self.layout.sets[n];
            for c in 0..self.layout.groups[n].len() {
                let members = &self.layout.groups[n][c];
                let b = coupling(&self.ch.ris_user[n], &w, members);
                let be = eve_left.map(|m| coupling(m, &w, members));
                if b.iter().all(|z| *z == zero) && be.as_ref().is_none_or(|m| m.iter().all(|z| *z == zero)) {
                    continue;
                }
                let cur = it.coeff[n][c];
                let mut eval = |z: C64| -> f64 {
                    let d = z - cur;
                    trial.a.copy_from(&pr.a);
                    add_scaled(&mut trial.a, &b, d);
                    if let (Some(e), Some(e0), Some(be)) = (trial.e.as_mut(), pr.e.as_ref(), be.as_ref()) {
                        e.copy_from(e0);
                        add_scaled(e, be, d);
                    }
                    obj.value(&trial)
                };
                let mut best: Option<(C64, f64)> = None;
                match set {
                    FeasibilitySet::DiscretePhase { tau } => {
                        let mut fbest = f;
                        for m in 0..tau {
                            let z = grid_point(m, tau);
                            if z == cur {
                                continue;
                            }
                            let fc = eval(z);
                            if fc > fbest {
                                fbest = fc;
                                best = Some((z, fc));
                            }
                        }
                    }
                    _ => {
                        let adj = obj.adjoint(&pr);
                        let mut g = b.iter().zip(adj.a.iter()).map(|(x, y)| x.conj() * y).sum::<C64>();
                        if let (Some(be), Some(ge)) = (be.as_ref(), adj.e.as_ref()) {
                            g += be.iter().zip(ge.iter()).map(|(x, y)| x.conj() * y).sum::<C64>();
                        }
                        g *= 2.0;
                        let gn = g.norm();
                        if !(gn > 0.0 && gn.is_finite()) {
                            continue;
                        }
                        // on the unit circle move along the phase, since a
                        // mostly radial gradient projects to almost nothing
                        let on_circle = set == FeasibilitySet::ContinuousPhase;
                        let slope = (g * cur.conj()).im;
                        if on_circle && slope == 0.0 {
                            continue;
                        }
                        let mut t = params.step_init;
                        while t > 1e-12 {
                            let (z, rise) = if on_circle {
                                (cur * C64::from_polar(1.0, t * slope.signum()), t * slope.abs())
                            } else {
                                let z = set.project_one(cur + g * (t / gn));
                                (z, (g.conj() * (z - cur)).re)
                            };
                            if z == cur {
                                break;
                            }
                            let fc = eval(z);
                            if fc > f && fc >= f + 1e-4 * rise {
                                best = Some((z, fc));
                                break;
                            }
                            t *= params.backtrack_factor;
                        }
                    }
                }
                if let Some((z, fc)) = best {
                    let d = z - cur;
                    add_scaled(&mut pr.a, &b, d);
                    if let (Some(e), Some(be)) = (pr.e.as_mut(), be.as_ref()) {
                        add_scaled(e, be, d);
                    }
                    it.coeff[n][c] = z;
                    f = fc;
                }
            }
        }
        Ok(())
    }

    /// Exact single-user update: maximize `|A_00|` over all coordinates.
    fn align_block(&self, obj: &dyn Objective, it: &mut Iterate) -> Result<()> {
        let chn = self.channels(&it.coeff)?;
        let pr = self.products_with(&chn, &it.p, it.alpha);
        let f = obj.value(&pr);
        let mut bs = Vec::new();
        let mut sets = Vec::new();
        let mut cur = Vec::new();
        let mut c0 = pr.a[(0, 0)];
        for n in 0..self.layout.sets.len() {
            let w = &self.ch.bs_ris[n] * &it.p;
            for (c, members) in self.layout.groups[n].iter().enumerate() {
                let b = coupling(&self.ch.ris_user[n], &w, members)[(0, 0)];
                c0 -= b * it.coeff[n][c];
                bs.push(b);
                sets.push(self.layout.sets[n]);
                cur.push(it.coeff[n][c]);
            }
        }
        let x = align::align(c0, &bs, &sets, &cur);
        let mut cand = it.clone();
        let mut i = 0;
        for coeff in cand.coeff.iter_mut() {
            for z in coeff.iter_mut() {
                *z = x[i];
                i += 1;
            }
        }
        if obj.value(&self.products(&cand)?) > f {
            *it = cand;
        }
        Ok(())
    }

    /// Alternates the blocks until the relative change drops below `tol`.
    pub fn ascend(&self, obj: &dyn Objective, mut it: Iterate, params: &SolverParams, tune_alpha: bool) -> Result<Run> {
        let mut f = obj.value(&self.products(&it)?);
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        let mut trace = vec![f];
        let mut converged = false;
        for _ in 0..params.max_outer_iters {
            self.p_block(obj, &mut it, params)?;
            if tune_alpha {
                self.alpha_block(obj, &mut it)?;
            }
            self.theta_block(obj, &mut it, params)?;
            let next = obj.value(&self.products(&it)?);
            if !next.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            trace.push(next);
            let done = next - f <= params.tol * f.abs();
            f = next;
            if done {
                converged = true;
                break;
            }
        }
        Ok(Run { it, trace, converged })
    }

    pub fn random_start(&self, params: &SolverParams, restart: usize) -> Result<Iterate> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(restart as u64);
        let coeff = self.layout.random_coeff(&mut rng);
        let h = composite_channel(self.ch, &self.layout.configs(&coeff))?;
        Ok(Iterate {
            p: mrt_columns(&h, self.power_budget),
            coeff,
            alpha: 0.0,
        })
    }

    /// Best run over `params.restarts` random initializations.
    pub fn multistart(&self, obj: &dyn Objective, params: &SolverParams, tune_alpha: bool) -> Result<Run> {
        let mut best: Option<Run> = None;
        for r in 0..params.restarts {
            let run = self.ascend(obj, self.random_start(params, r)?, params, tune_alpha)?;
            if best.as_ref().is_none_or(|b| run.value() > b.value()) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one restart"))
    }

    pub fn solution(&self, run: Run) -> PrecodeSolution {
        PrecodeSolution {
            configs: self.layout.configs(&run.it.coeff),
            objective: run.value(),
            initial_objective: run.trace[0],
            precoder: run.it.p,
            converged: run.converged,
            alpha: run.it.alpha,
            iterate_trace: run.trace,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Run {
    pub it: Iterate,
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl Run {
    pub fn value(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_normal;

    fn wsr(h: &CMat, p: &CMat, w: &[f64], noise: &[f64]) -> f64 {
        let a = h * p;
        (0..w.len())
            .map(|k| w[k] * (1.0 + sinr_from_gains(&a, noise[k], k)).log2())
            .sum()
    }

    #[test]
    fn wmmse_step_is_monotone_and_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let (k, l) = (1 + trial % 4, 4);
            let h = CMat::from_fn(k, l, |_, _| complex_normal(&mut rng));
            let mut p = mrt_columns(&h, 2.0);
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
            let noise = vec![0.1; k];
            for _ in 0..5 {
                let next = wmmse_step(&h, &p, &w, &noise, 2.0);
                assert!(linalg::fro2(&next) <= 2.0 * (1.0 + 1e-9));
                assert!(wsr(&h, &next, &w, &noise) >= wsr(&h, &p, &w, &noise) - 1e-9);
                p = next;
            }
        }
    }
}
