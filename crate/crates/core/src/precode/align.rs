//! Exact coherent alignment for a scalar received amplitude.
//!
//! Maximizes `|c + Σ_i x_i b_i|` over per-coordinate feasibility sets.
//! Continuous and general coordinates always align with the resultant.
//! Discrete coordinates pick the grid phase nearest to `ψ - arg b_i` for the
//! resultant direction `ψ`, so their joint choice is piecewise constant in
//! `ψ` and only changes at `Σ τ_i` breakpoints. Sweeping one representative
//! direction per arc between breakpoints therefore visits the optimum.

use std::f64::consts::PI;

use crate::reflect::{grid_point, nearest_grid_index, FeasibilitySet};
use crate::C64;

const TWO_PI: f64 = 2.0 * PI;

fn resultant(c: C64, b: &[C64], x: &[C64]) -> C64 {
    c + b.iter().zip(x).map(|(bi, xi)| bi * xi).sum::<C64>()
}

/// Returns the maximizing coefficients. Coordinates with `b_i = 0` keep
/// their `current` value; the result is never worse than `current`.
pub(crate) fn align(c: C64, b: &[C64], sets: &[FeasibilitySet], current: &[C64]) -> Vec<C64> {
    debug_assert!(b.len() == sets.len() && b.len() == current.len());
    let mut breakpoints = Vec::new();
    for (bi, fs) in b.iter().zip(sets) {
        if let FeasibilitySet::DiscretePhase { tau } = *fs {
            if bi.norm() > 0.0 {
                for m in 0..tau {
                    let a = bi.arg() + TWO_PI * (m as f64 + 0.5) / tau as f64;
                    breakpoints.push(a.rem_euclid(TWO_PI));
                }
            }
        }
    }
    breakpoints.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breakpoints.dedup();

    let choose = |psi: f64| -> Vec<C64> {
        // discrete choices first, then continuous ones align to the partial sum
        let mut x = current.to_vec();
        for i in 0..b.len() {
            if b[i].norm() == 0.0 {
                continue;
            }
            if let FeasibilitySet::DiscretePhase { tau } = sets[i] {
                let target = C64::from_polar(1.0, psi - b[i].arg());
                x[i] = grid_point(nearest_grid_index(target, tau), tau);
            }
        }
        let mut partial = c;
        for i in 0..b.len() {
            if matches!(sets[i], FeasibilitySet::DiscretePhase { .. }) || b[i].norm() == 0.0 {
                partial += b[i] * x[i];
            }
        }
        let dir = if partial.norm() > 0.0 { partial.arg() } else { psi };
        for i in 0..b.len() {
            if b[i].norm() > 0.0 && !matches!(sets[i], FeasibilitySet::DiscretePhase { .. }) {
                x[i] = C64::from_polar(1.0, dir - b[i].arg());
            }
        }
        x
    };

    let mut candidates = Vec::new();
    if breakpoints.is_empty() {
        candidates.push(choose(if c.norm() > 0.0 { c.arg() } else { 0.0 }));
    } else {
        for (i, &lo) in breakpoints.iter().enumerate() {
            let hi = if i + 1 < breakpoints.len() {
                breakpoints[i + 1]
            } else {
                breakpoints[0] + TWO_PI
            };
            candidates.push(choose(0.5 * (lo + hi)));
        }
    }

    let mut best = current.to_vec();
    let mut best_val = resultant(c, b, current).norm();
    for x in candidates {
        let v = resultant(c, b, &x).norm();
        if v > best_val {
            best_val = v;
            best = x;
        }
    }
    best
}
