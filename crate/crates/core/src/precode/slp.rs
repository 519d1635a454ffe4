//! Symbol-level precoding with constructive-interference (CI) constraints.
//!
//! For fixed reflection coefficients each transmit vector solves
//! `min ||x||² s.t. Re(w_i x) ≥ b_i`, a least-distance program. It is
//! handed to NNLS through the classical reformulation
//! `min ||E u - f||, u ≥ 0` with `E = [Gᵀ; bᵀ]`, `f = e_last`, which also
//! yields the constraint multipliers used for the reflection update.

use nalgebra::{DMatrix, DVector};

use super::SolverParams;
use crate::precode::wsr::{check_instance, feasibility_sets};
use crate::reflect::{grid_point, FeasibilitySet, ReflectionConfig};
use crate::scene::{composite_channel, ChannelSet, Scenario};
use crate::{linalg, CMat, CVec, Error, Result, C64};

/// Largest number of symbol combinations the all-symbol solver accepts.
pub const DEFAULT_COMBINATION_CAP: usize = 4096;

/// Left-hand side of the CI sector constraint,
/// `(Re(ỹ e^{-j∠s}) - σ√γ) tan φ - |Im(ỹ e^{-j∠s})|`. Non-negative means
/// `ỹ` lies in the constructive sector of `s`.
pub fn ci_slack(y_tilde: C64, s: C64, sigma_w: f64, gamma: f64, phi: f64) -> f64 {
    let z = y_tilde * C64::from_polar(1.0, -s.arg());
    (z.re - sigma_w * gamma.sqrt()) * phi.tan() - z.im.abs()
}

/// Reported slack: the CI slack for `φ < π/2`, and `Re(ỹ e^{-j∠s}) - σ√γ`
/// for a half-plane sector (BPSK).
fn reported_slack(y: C64, s: C64, t: f64, phi: f64) -> f64 {
    if phi.cos() < 1e-12 {
        (y * C64::from_polar(1.0, -s.arg())).re - t
    } else {
        ci_slack(y, s, 1.0, t * t, phi)
    }
}

/// How the reflection coefficients are treated by the SLP solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum SlpTheta {
    Fixed(Vec<ReflectionConfig>),
    /// Optimized jointly, starting from `init` or from all-ones.
    Free {
        init: Option<Vec<ReflectionConfig>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlpSolution {
    /// Transmit vectors, `L x C` with one column per symbol combination.
    pub x: CMat,
    /// Symbols of each column, `K x C`.
    pub symbols: CMat,
    /// CI slacks, user-major within each column: entry `c*K + k`.
    pub slack: Vec<f64>,
    /// `||X||_F²`.
    pub power: f64,
    pub configs: Vec<ReflectionConfig>,
    /// Power of the zero-forcing point that meets every constraint with
    /// equality, when the composite channel has full row rank.
    pub zf_power: Option<f64>,
    pub kkt_residual: f64,
    /// Power after every outer iteration.
    pub iterate_trace: Vec<f64>,
    /// Minimum slack after every outer iteration.
    pub slack_trace: Vec<f64>,
}

impl SlpSolution {
    pub fn min_slack(&self) -> f64 {
        self.slack.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "objective", "min_slack"])?;
        for (i, (f, s)) in self.iterate_trace.iter().zip(&self.slack_trace).enumerate() {
            w.write_record([i.to_string(), f.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sector parameters of one user.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CiSpec {
    /// `σ√γ`.
    pub threshold: f64,
    pub half_angle: f64,
}

pub(crate) fn ci_specs(scenario: &Scenario) -> Vec<CiSpec> {
    scenario
        .terminals
        .iter()
        .map(|t| CiSpec {
            threshold: (t.noise_power * t.sinr_target).sqrt(),
            half_angle: t.constellation.ci_half_angle,
        })
        .collect()
}

/// One CI half-plane `Re(rho · e_k x) ≥ b` with its multiplier.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Multiplier {
    pub user: usize,
    /// `(sin φ ± j cos φ) e^{-j∠s_k}`.
    pub rho: C64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ColumnSolution {
    pub x: CVec,
    pub multipliers: Vec<Multiplier>,
    pub kkt_residual: f64,
}

/// Lawson-Hanson non-negative least squares.
fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let m = e.ncols();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let mut blocked = vec![false; m];
    let scale = e.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale * (e.nrows().max(m) as f64);
    for _ in 0..(6 * m + 10) {
        let w = e.transpose() * (f - e * &x);
        let Some(j) = (0..m)
            .filter(|&i| !passive[i] && !blocked[i] && w[i] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap())
        else {
            break;
        };
        passive[j] = true;
        let mut entered = true;
        loop {
            let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
            let sub = DMatrix::from_fn(e.nrows(), idx.len(), |r, c| e[(r, idx[c])]);
            let zp = sub
                .svd(true, true)
                .solve(f, 1e-13)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            let mut z = DVector::zeros(m);
            for (c, &i) in idx.iter().enumerate() {
                z[i] = zp[c];
            }
            if entered && z[j] <= tol {
                // numerically dependent column: leave it out
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            entered = false;
            if idx.iter().all(|&i| z[i] > tol) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            for &i in &idx {
                if z[i] <= tol {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            x += (&z - &x) * alpha;
            for &i in &idx {
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if idx.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    x
}

/// Minimum-norm `x` meeting every user's CI constraint on channel `h`.
pub(crate) fn solve_column(h: &CMat, symbols: &[C64], specs: &[CiSpec]) -> Result<ColumnSolution> {
    let (k_users, l) = h.shape();
    let mut rows: Vec<(usize, C64, DVector<f64>, f64, f64)> = Vec::new();
    let mut worst = f64::INFINITY;
    for k in 0..k_users {
        let (sin, cos) = specs[k].half_angle.sin_cos();
        let rot = C64::from_polar(1.0, -symbols[k].arg());
        let b = specs[k].threshold * sin;
        let rhos = if cos < 1e-12 {
            vec![C64::new(sin, 0.0)]
        } else {
            vec![C64::new(sin, cos), C64::new(sin, -cos)]
        };
        for rho in rhos {
            let w: Vec<C64> = (0..l).map(|a| rho * rot * h[(k, a)]).collect();
            let a = DVector::from_fn(2 * l, |i, _| if i < l { w[i].re } else { -w[i - l].im });
            let norm = a.norm();
            if norm == 0.0 {
                if b > 0.0 {
                    worst = worst.min(-specs[k].threshold);
                }
                continue;
            }
            rows.push((k, rho * rot, a / norm, b / norm, norm));
        }
    }
    if worst < 0.0 {
        return Err(Error::Infeasible { min_slack: worst });
    }
    if rows.is_empty() {
        return Ok(ColumnSolution {
            x: CVec::zeros(l),
            multipliers: Vec::new(),
            kkt_residual: 0.0,
        });
    }
    let hscale = rows.iter().fold(0.0_f64, |m, r| m.max(r.3.abs()));
    let hscale = if hscale > 0.0 { hscale } else { 1.0 };
    let m = rows.len();
    let n = 2 * l;
    let e = DMatrix::from_fn(n + 1, m, |r, c| if r < n { rows[c].2[r] } else { rows[c].3 / hscale });
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let resid = &e * &u - &f;
    let denom = -resid[n];
    if !(denom > 1e-12) {
        return Err(Error::Infeasible {
            min_slack: f64::NEG_INFINITY,
        });
    }
    let xr: DVector<f64> = resid.rows(0, n) / denom;
    let lambda: Vec<f64> = u.iter().map(|v| v / denom).collect();
    let mut kkt: f64 = 0.0;
    let xnorm2 = xr.norm_squared().max(f64::MIN_POSITIVE);
    let mut min_rel = f64::INFINITY;
    for (i, row) in rows.iter().enumerate() {
        let s = row.2.dot(&xr) - row.3 / hscale;
        kkt = kkt.max((lambda[i] * s).abs() / xnorm2).max(-s / xnorm2.sqrt());
        if row.3 > 0.0 {
            min_rel = min_rel.min(s / (row.3 / hscale));
        }
    }
    if min_rel < -1e-4 {
        return Err(Error::Infeasible { min_slack: min_rel });
    }
    let x = CVec::from_fn(l, |a, _| C64::new(xr[a], xr[a + l]) * hscale);
    let multipliers = rows
        .iter()
        .zip(&lambda)
        .map(|(r, lam)| {
            // multiplier of the unnormalized constraint at the original scale
            Multiplier {
                user: r.0,
                rho: r.1,
                lambda: lam * hscale / r.4,
            }
        })
        .collect();
    Ok(ColumnSolution {
        x,
        multipliers,
        kkt_residual: kkt,
    })
}

/// All `Π_k M_k` symbol-index combinations, user 0 varying fastest.
pub fn psk_combinations(orders: &[usize], cap: usize) -> Result<Vec<Vec<usize>>> {
    let mut total: u128 = 1;
    for &m in orders {
        total = total.saturating_mul(m as u128);
    }
    if total > cap as u128 {
        return Err(Error::CombinatorialCap { combos: total, cap });
    }
    Ok((0..total as usize)
        .map(|mut code| {
            orders
                .iter()
                .map(|&m| {
                    let i = code % m;
                    code /= m;
                    i
                })
                .collect()
        })
        .collect())
}

struct Batch<'a> {
    ch: &'a ChannelSet,
    sets: Vec<FeasibilitySet>,
    specs: Vec<CiSpec>,
    symbols: CMat,
}

struct BatchEval {
    columns: Vec<ColumnSolution>,
    power: f64,
}

impl Batch<'_> {
    fn eval(&self, configs: &[ReflectionConfig]) -> Result<BatchEval> {
        let h = composite_channel(self.ch, configs)?;
        let mut columns = Vec::with_capacity(self.symbols.ncols());
        let mut power = 0.0;
        for c in 0..self.symbols.ncols() {
            let s: Vec<C64> = self.symbols.column(c).iter().cloned().collect();
            let col = solve_column(&h, &s, &self.specs)?;
            power += col.x.norm_squared();
            columns.push(col);
        }
        Ok(BatchEval { columns, power })
    }

    /// `∂||X||²/∂conj(θ)` per RIS element.
    fn gradient(&self, ev: &BatchEval) -> Vec<Vec<C64>> {
        (0..self.ch.num_ris())
            .map(|n| {
                let ru = &self.ch.ris_user[n];
                let br = &self.ch.bs_ris[n];
                let mut g = vec![C64::new(0.0, 0.0); br.nrows()];
                for col in &ev.columns {
                    let vx = br * &col.x;
                    for mu in &col.multipliers {
                        for (q, gq) in g.iter_mut().enumerate() {
                            *gq -= (mu.rho * ru[(mu.user, q)] * vx[q]).conj() * mu.lambda;
                        }
                    }
                }
                g
            })
            .collect()
    }

    fn solution(
        &self,
        configs: Vec<ReflectionConfig>,
        ev: BatchEval,
        trace: Vec<f64>,
        slack_trace: Vec<f64>,
    ) -> Result<SlpSolution> {
        let h = composite_channel(self.ch, &configs)?;
        let (k_users, l) = h.shape();
        let mut x = CMat::zeros(l, self.symbols.ncols());
        let mut kkt: f64 = 0.0;
        for (c, col) in ev.columns.iter().enumerate() {
            x.set_column(c, &col.x);
            kkt = kkt.max(col.kkt_residual);
        }
        let slack = slacks(&h, &x, &self.symbols, &self.specs);
        let zf_power = linalg::pinv_full_rank(&h, k_users).ok().map(|pinv| {
            (0..self.symbols.ncols())
                .map(|c| {
                    let target = CVec::from_fn(k_users, |k, _| {
                        C64::from_polar(self.specs[k].threshold, self.symbols[(k, c)].arg())
                    });
                    (&pinv * target).norm_squared()
                })
                .sum()
        });
        Ok(SlpSolution {
            power: linalg::fro2(&x),
            x,
            symbols: self.symbols.clone(),
            slack,
            configs,
            zf_power,
            kkt_residual: kkt,
            iterate_trace: trace,
            slack_trace,
        })
    }

    fn min_slack(&self, configs: &[ReflectionConfig], ev: &BatchEval) -> Result<f64> {
        let h = composite_channel(self.ch, configs)?;
        let mut x = CMat::zeros(h.ncols(), self.symbols.ncols());
        for (c, col) in ev.columns.iter().enumerate() {
            x.set_column(c, &col.x);
        }
        Ok(slacks(&h, &x, &self.symbols, &self.specs)
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    fn solve(&self, theta: &SlpTheta, params: &SolverParams) -> Result<SlpSolution> {
        let (mut configs, free) = match theta {
            SlpTheta::Fixed(c) => (c.clone(), false),
            SlpTheta::Free { init: Some(c) } => (c.clone(), true),
            SlpTheta::Free { init: None } => (
                (0..self.ch.num_ris())
                    .map(|n| ReflectionConfig::unit(self.ch.elements(n), self.sets[n]))
                    .collect(),
                true,
            ),
        };
        let mut ev = self.eval(&configs)?;
        let mut trace = vec![ev.power];
        let mut slack_trace = vec![self.min_slack(&configs, &ev)?];
        if free {
            let mut converged = false;
            for _ in 0..params.max_outer_iters {
                let before = ev.power;
                self.gradient_step(&mut configs, &mut ev, params)?;
                self.discrete_sweep(&mut configs, &mut ev)?;
                trace.push(ev.power);
                slack_trace.push(self.min_slack(&configs, &ev)?);
                if before - ev.power <= params.tol * before {
                    converged = true;
                    break;
                }
            }
            log::debug!("slp reflection loop converged: {converged}");
        }
        self.solution(configs, ev, trace, slack_trace)
    }

    /// Projected gradient step on every non-discrete RIS, accepted only on a
    /// strict power decrease.
    fn gradient_step(
        &self,
        configs: &mut Vec<ReflectionConfig>,
        ev: &mut BatchEval,
        params: &SolverParams,
    ) -> Result<()> {
        let movable: Vec<usize> = (0..self.sets.len())
            .filter(|&n| !matches!(self.sets[n], FeasibilitySet::DiscretePhase { .. }))
            .collect();
        if movable.is_empty() {
            return Ok(());
        }
        let g = self.gradient(ev);
        let gmax = movable
            .iter()
            .flat_map(|&n| g[n].iter().map(|z| z.norm()))
            .fold(0.0_f64, f64::max);
        if !(gmax > 0.0 && gmax.is_finite()) {
            return Ok(());
        }
        let mut t = params.step_init;
        for _ in 0..params.max_inner_iters {
            let mut cand = configs.clone();
            for &n in &movable {
                let raw: Vec<C64> = configs[n]
                    .theta()
                    .iter()
                    .zip(&g[n])
                    .map(|(th, gq)| th - gq * (t / gmax))
                    .collect();
                cand[n] = ReflectionConfig::projected(&raw, self.sets[n]);
            }
            if let Ok(next) = self.eval(&cand) {
                if next.power < ev.power {
                    *configs = cand;
                    *ev = next;
                    return Ok(());
                }
            }
            t *= params.backtrack_factor;
        }
        Ok(())
    }

    /// One pass of exact per-element enumeration on discrete RIS.
    fn discrete_sweep(&self, configs: &mut [ReflectionConfig], ev: &mut BatchEval) -> Result<()> {
        for n in 0..self.sets.len() {
            let FeasibilitySet::DiscretePhase { tau } = self.sets[n] else {
                continue;
            };
            for q in 0..configs[n].len() {
                let cur = configs[n].theta()[q];
                for m in 0..tau {
                    let z = grid_point(m, tau);
                    if z == cur {
                        continue;
                    }
                    let mut theta = configs[n].theta().to_vec();
                    theta[q] = z;
                    let mut cand = configs.to_vec();
                    cand[n] = ReflectionConfig::from_feasible(theta, self.sets[n]);
                    if let Ok(next) = self.eval(&cand) {
                        if next.power < ev.power {
                            configs[n] = cand.swap_remove(n);
                            *ev = next;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn slacks(h: &CMat, x: &CMat, symbols: &CMat, specs: &[CiSpec]) -> Vec<f64> {
    let y = h * x;
    let mut out = Vec::with_capacity(y.len());
    for c in 0..y.ncols() {
        for k in 0..y.nrows() {
            out.push(reported_slack(
                y[(k, c)],
                symbols[(k, c)],
                specs[k].threshold,
                specs[k].half_angle,
            ));
        }
    }
    out
}

/// CI-constrained power minimization on an arbitrary channel set with
/// explicit sector parameters, one column per symbol vector.
pub(crate) fn solve_ci_batch(
    ch: &ChannelSet,
    sets: Vec<FeasibilitySet>,
    specs: Vec<CiSpec>,
    symbols: CMat,
    theta: &SlpTheta,
    params: &SolverParams,
) -> Result<SlpSolution> {
    Batch {
        ch,
        sets,
        specs,
        symbols,
    }
    .solve(theta, params)
}

/// Minimum-power symbol-level precoding for one symbol vector `s`.
pub fn solve_slp(
    ch: &ChannelSet,
    scenario: &Scenario,
    symbols: &[C64],
    theta: &SlpTheta,
    params: &SolverParams,
) -> Result<SlpSolution> {
    check_instance(ch, scenario)?;
    params.validate()?;
    if symbols.len() != ch.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols for {} users",
            symbols.len(),
            ch.num_users()
        )));
    }
    let batch = Batch {
        ch,
        sets: feasibility_sets(scenario),
        specs: ci_specs(scenario),
        symbols: CMat::from_column_slice(symbols.len(), 1, symbols),
    };
    batch.solve(theta, params)
}

/// Symbol-level precoding over every combination of the users' PSK
/// symbols with one shared reflection configuration. Columns follow
/// [`psk_combinations`] order.
pub fn solve_slp_all_symbols(
    ch: &ChannelSet,
    scenario: &Scenario,
    theta: &SlpTheta,
    cap: usize,
    params: &SolverParams,
) -> Result<SlpSolution> {
    check_instance(ch, scenario)?;
    params.validate()?;
    let orders: Vec<usize> = scenario.terminals.iter().map(|t| t.constellation.order).collect();
    let combos = psk_combinations(&orders, cap)?;
    let symbols = CMat::from_fn(orders.len(), combos.len(), |k, c| {
        scenario.terminals[k].constellation.symbol(combos[c][k])
    });
    let batch = Batch {
        ch,
        sets: feasibility_sets(scenario),
        specs: ci_specs(scenario),
        symbols,
    };
    batch.solve(theta, params)
}
