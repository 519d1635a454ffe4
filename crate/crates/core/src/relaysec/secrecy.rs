use std::f64::consts::LN_2;
use std::io::Write;

use crate::precode::engine::{add_sinr_adjoint, Adjoint, Iterate, Layout, Objective, Problem, Products, Run};
use crate::precode::wsr::{check_instance, feasibility_sets};
use crate::precode::{self, sinr_from_gains, PrecodeSolution, SolverParams};
use crate::reflect::ReflectionConfig;
use crate::scene::{eve_composite_channel, ChannelSet, Scenario};
use crate::{CMat, CVec, Error, Result, C64};

/// Slack added to a positive demand inside the penalty so the final
/// iterate lands on the feasible side.
const DEMAND_MARGIN: f64 = 1e-4;
const PENALTY_STAGES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyResult {
    pub c1: f64,
    pub c2: f64,
    pub c_eve: f64,
    /// `max(0, C1 - C_Eve)`.
    pub secrecy_rate: f64,
}

impl SecrecyResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["c1", "c2", "c_eve", "secrecy_rate"])?;
        w.write_record([self.c1, self.c2, self.c_eve, self.secrecy_rate].map(|v| v.to_string()))?;
        w.flush()?;
        Ok(())
    }
}

/// `log2 det(I + (σ²I + K)⁻¹ D)` with `D = H_E p1 p1ᴴ H_Eᴴ` and
/// `K = H_E p2 p2ᴴ H_Eᴴ` over the composite eavesdropper channel.
pub fn eve_capacity(
    ch: &ChannelSet,
    configs: &[ReflectionConfig],
    p1: &CVec,
    p2: &CVec,
    eve_noise: f64,
) -> Result<f64> {
    let he = eve_composite_channel(ch, configs)?;
    if p1.len() != he.ncols() || p2.len() != he.ncols() {
        return Err(Error::DimensionMismatch("precoder length".into()));
    }
    if !(eve_noise > 0.0) {
        return Err(Error::InvalidScenario("eavesdropper noise must be positive".into()));
    }
    let d1 = &he * p1;
    let d2 = &he * p2;
    let n = he.nrows();
    let cov = CMat::identity(n, n) * C64::new(eve_noise, 0.0) + &d2 * d2.adjoint();
    let d = &d1 * d1.adjoint();
    let lu = cov.lu();
    let x = lu
        .solve(&d)
        .ok_or_else(|| Error::DimensionMismatch("singular eavesdropper covariance".into()))?;
    let det = (CMat::identity(n, n) + x).determinant();
    Ok(det.re.log2().max(0.0))
}

/// Closed form of the eavesdropper capacity for rank-one `D` and `K`,
/// `log2(1 + q/σ²)` with `q = ||d1||² - |d2ᴴd1|²/(σ² + ||d2||²)`.
fn eve_rate(d1: &[C64], d2: &[C64], s: f64) -> (f64, f64, f64, C64) {
    let n1: f64 = d1.iter().map(|z| z.norm_sqr()).sum();
    let n2: f64 = d2.iter().map(|z| z.norm_sqr()).sum();
    let c: C64 = d2.iter().zip(d1).map(|(a, b)| a.conj() * b).sum();
    let q = (n1 - c.norm_sqr() / (s + n2)).max(0.0);
    ((1.0 + q / s).log2(), q, n2, c)
}

pub fn secrecy_eval(
    ch: &ChannelSet,
    configs: &[ReflectionConfig],
    p1: &CVec,
    p2: &CVec,
    scenario: &Scenario,
) -> Result<SecrecyResult> {
    if ch.num_users() != 2 {
        return Err(Error::InvalidScenario("secrecy needs exactly two users".into()));
    }
    let eve = scenario.eavesdropper.as_ref().ok_or(Error::MissingEveChannels)?;
    let mut p = CMat::zeros(p1.len(), 2);
    p.set_column(0, p1);
    p.set_column(1, p2);
    let noise = scenario.noise_powers();
    let c1 = (1.0 + precode::sinr(ch, configs, &p, &noise, 0)?).log2();
    let c2 = (1.0 + precode::sinr(ch, configs, &p, &noise, 1)?).log2();
    let c_eve = eve_capacity(ch, configs, p1, p2, eve.noise_power)?;
    Ok(SecrecyResult {
        c1,
        c2,
        c_eve,
        secrecy_rate: (c1 - c_eve).max(0.0),
    })
}

/// `C1 - C_Eve - μ max(0, target - C2)²`.
struct SecrecyObjective {
    noise: [f64; 2],
    eve_noise: f64,
    target: f64,
    mu: f64,
}

impl SecrecyObjective {
    fn parts(&self, pr: &Products) -> (f64, f64, f64) {
        let c1 = (1.0 + sinr_from_gains(&pr.a, self.noise[0], 0)).log2();
        let c2 = (1.0 + sinr_from_gains(&pr.a, self.noise[1], 1)).log2();
        let e = pr.e.as_ref().expect("eavesdropper products");
        let d1: Vec<C64> = e.column(0).iter().cloned().collect();
        let d2: Vec<C64> = e.column(1).iter().cloned().collect();
        (c1, c2, eve_rate(&d1, &d2, self.eve_noise).0)
    }
}

impl Objective for SecrecyObjective {
    fn value(&self, pr: &Products) -> f64 {
        let (c1, c2, ce) = self.parts(pr);
        let short = (self.target - c2).max(0.0);
        c1 - ce - self.mu * short * short
    }

    fn adjoint(&self, pr: &Products) -> Adjoint {
        let mut ga = CMat::zeros(2, 2);
        let g1 = 1.0 / (LN_2 * (1.0 + sinr_from_gains(&pr.a, self.noise[0], 0)));
        add_sinr_adjoint(&pr.a, self.noise[0], 0, g1, &mut ga);
        let c2 = (1.0 + sinr_from_gains(&pr.a, self.noise[1], 1)).log2();
        let short = (self.target - c2).max(0.0);
        if short > 0.0 {
            let g2 = 2.0 * self.mu * short / (LN_2 * (1.0 + sinr_from_gains(&pr.a, self.noise[1], 1)));
            add_sinr_adjoint(&pr.a, self.noise[1], 1, g2, &mut ga);
        }
        let e = pr.e.as_ref().expect("eavesdropper products");
        let d1: Vec<C64> = e.column(0).iter().cloned().collect();
        let d2: Vec<C64> = e.column(1).iter().cloned().collect();
        let s = self.eve_noise;
        let (_, q, n2, c) = eve_rate(&d1, &d2, s);
        let scale = 1.0 / (LN_2 * (s + q));
        let den = s + n2;
        let mut ge = CMat::zeros(e.nrows(), 2);
        for i in 0..e.nrows() {
            ge[(i, 0)] = -(d1[i] - c * d2[i] / den) * scale;
            ge[(i, 1)] = (c.conj() * d1[i] * den - d2[i] * c.norm_sqr()) / (den * den) * scale;
        }
        Adjoint {
            a: ga,
            e: Some(ge),
            act: None,
        }
    }
}

/// Maximizes `C1 - C_Eve` subject to `C2 ≥ demand`, the BS power budget
/// and the feasibility sets. The demand is enforced by a quadratic penalty
/// whose weight grows tenfold per stage; the best iterate meeting the
/// demand to within `1e-6` is returned, with `objective = C1 - C_Eve`.
pub fn solve_secrecy(
    ch: &ChannelSet,
    scenario: &Scenario,
    demand: f64,
    params: &SolverParams,
) -> Result<PrecodeSolution> {
    check_instance(ch, scenario)?;
    params.validate()?;
    if ch.num_users() != 2 {
        return Err(Error::InvalidScenario("secrecy needs exactly two users".into()));
    }
    let eve = scenario.eavesdropper.as_ref().ok_or(Error::MissingEveChannels)?;
    if ch.eve.is_none() {
        return Err(Error::MissingEveChannels);
    }
    if !(demand >= 0.0 && demand.is_finite()) {
        return Err(Error::InvalidScenario(format!("demand {demand}")));
    }
    let noise = scenario.noise_powers();
    let prob = Problem {
        ch,
        layout: Layout::elementwise(ch, &feasibility_sets(scenario)),
        power_budget: scenario.power_budget,
        noise: noise.clone(),
        active: None,
        eve: true,
    };
    let mut obj = SecrecyObjective {
        noise: [noise[0], noise[1]],
        eve_noise: eve.noise_power,
        target: 0.0,
        mu: 1.0,
    };

    if demand == 0.0 {
        let mut run = prob.multistart(&obj, params, false)?;
        // the rate-only optimum for user 1 is also a strong start
        let c1 = precode::solve_wsr_weighted(ch, scenario, &[1.0, 0.0], params)?;
        let start = Iterate {
            p: c1.precoder,
            coeff: prob.layout.coeff_from(&c1.configs),
            alpha: 0.0,
        };
        let warm = prob.ascend(&obj, start, params, false)?;
        if warm.value() > run.value() {
            run = warm;
        }
        return Ok(prob.solution(run));
    }

    // largest C2 the solver can reach decides feasibility of the demand
    let best_c2 = precode::solve_wsr_weighted(ch, scenario, &[0.0, 1.0], params)?;
    if best_c2.objective < demand - 1e-6 {
        return Err(Error::DemandInfeasible {
            demand,
            attainable: best_c2.objective,
        });
    }

    obj.target = demand + DEMAND_MARGIN;
    let mut run = prob.multistart(&obj, params, false)?;
    let mut best: Option<(f64, Run)> = None;
    for stage in 0..PENALTY_STAGES {
        if stage > 0 {
            obj.mu *= 10.0;
            run = prob.ascend(&obj, run.it.clone(), params, false)?;
        }
        let (secrecy, c2) = secrecy_and_c2(&prob, &obj, &run.it)?;
        if c2 >= demand - 1e-6 && best.as_ref().is_none_or(|b| secrecy > b.0) {
            best = Some((secrecy, run.clone()));
        }
    }
    match best {
        Some((secrecy, run)) => {
            let mut sol = prob.solution(run);
            sol.objective = secrecy;
            Ok(sol)
        }
        None => {
            let it = Iterate {
                p: best_c2.precoder.clone(),
                coeff: prob.layout.coeff_from(&best_c2.configs),
                alpha: 0.0,
            };
            let (secrecy, _) = secrecy_and_c2(&prob, &obj, &it)?;
            let mut sol = best_c2;
            sol.objective = secrecy;
            sol.iterate_trace = vec![secrecy];
            sol.initial_objective = secrecy;
            Ok(sol)
        }
    }
}

fn secrecy_and_c2(prob: &Problem, obj: &SecrecyObjective, it: &Iterate) -> Result<(f64, f64)> {
    let (c1, c2, ce) = obj.parts(&prob.products(it)?);
    Ok((c1 - ce, c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::EveChannels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(r, c, |_, _| crate::linalg::complex_normal(rng))
    }

    #[test]
    fn closed_form_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ne in 1..4 {
            let ch = ChannelSet::new(random(2, 3, &mut rng), vec![], vec![])
                .unwrap()
                .with_eve(EveChannels {
                    direct: random(ne, 3, &mut rng),
                    ris_eve: vec![],
                })
                .unwrap();
            let p1 = CVec::from_fn(3, |_, _| crate::linalg::complex_normal(&mut rng));
            let p2 = CVec::from_fn(3, |_, _| crate::linalg::complex_normal(&mut rng));
            let det = eve_capacity(&ch, &[], &p1, &p2, 0.3).unwrap();
            let he = &ch.eve.as_ref().unwrap().direct;
            let d1: Vec<C64> = (he * &p1).iter().cloned().collect();
            let d2: Vec<C64> = (he * &p2).iter().cloned().collect();
            assert!((det - eve_rate(&d1, &d2, 0.3).0).abs() < 1e-10);
        }
    }

    #[test]
    fn eve_adjoint_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let obj = SecrecyObjective {
            noise: [0.5, 0.7],
            eve_noise: 0.4,
            target: 5.0,
            mu: 2.0,
        };
        let pr = Products {
            a: random(2, 2, &mut rng),
            e: Some(random(3, 2, &mut rng)),
            act: None,
            act_noise: vec![],
        };
        let adj = obj.adjoint(&pr);
        let h = 1e-6;
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut up = pr.clone();
                up.a[(r, c)] += dir * h;
                let mut dn = pr.clone();
                dn.a[(r, c)] -= dir * h;
                let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
                let an = 2.0 * (adj.a[(r, c)].conj() * dir).re;
                assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "a {r} {c}: {fd} vs {an}");
            }
        }
        let ge = adj.e.unwrap();
        for r in 0..3 {
            for c in 0..2 {
                for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut up = pr.clone();
                    up.e.as_mut().unwrap()[(r, c)] += dir * h;
                    let mut dn = pr.clone();
                    dn.e.as_mut().unwrap()[(r, c)] -= dir * h;
                    let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
                    let an = 2.0 * (ge[(r, c)].conj() * dir).re;
                    assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "e {r} {c}: {fd} vs {an}");
                }
            }
        }
    }
}
