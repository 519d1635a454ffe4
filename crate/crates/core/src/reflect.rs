//! Reflection coefficients, their feasibility sets, and element clustering.

use std::f64::consts::PI;
use std::io::Write;

use crate::{Error, Result, C64};

/// Admissible values of a single reflection coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilitySet {
    /// Closed unit disk `|θ| <= 1`.
    General,
    /// Unit circle `|θ| = 1`.
    ContinuousPhase,
    /// `τ` equally spaced phases `exp(j2πm/τ)`.
    DiscretePhase { tau: u32 },
}

impl FeasibilitySet {
    /// Whether `theta` is a member of the set. Discrete membership is exact:
    /// the value must equal a constructed grid point bit for bit.
    pub fn contains(&self, theta: C64) -> bool {
        match *self {
            FeasibilitySet::General => theta.norm() <= 1.0 + 1e-12,
            FeasibilitySet::ContinuousPhase => (theta.norm() - 1.0).abs() <= 1e-12,
            FeasibilitySet::DiscretePhase { tau } => (0..tau).any(|m| grid_point(m, tau) == theta),
        }
    }

    /// Euclidean projection of one coefficient onto the set.
    ///
    /// General clips the magnitude, continuous normalizes it (zero maps to
    /// `1+0j`), discrete picks the nearest grid phase with ties resolved
    /// toward the smaller grid index.
    pub fn project_one(&self, theta: C64) -> C64 {
        match *self {
            FeasibilitySet::General => {
                let r = theta.norm();
                if r > 1.0 {
                    theta / r
                } else {
                    theta
                }
            }
            FeasibilitySet::ContinuousPhase => {
                let r = theta.norm();
                if r == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    theta / r
                }
            }
            FeasibilitySet::DiscretePhase { tau } => grid_point(nearest_grid_index(theta, tau), tau),
        }
    }
}

/// The `m`-th discrete phase `exp(j2πm/τ)`.
pub fn grid_point(m: u32, tau: u32) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * m as f64 / tau as f64)
}

/// Index of the grid phase angularly closest to `theta`; lowest index on ties.
pub fn nearest_grid_index(theta: C64, tau: u32) -> u32 {
    if theta.norm() == 0.0 {
        return 0;
    }
    let angle = theta.arg().rem_euclid(2.0 * PI);
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for m in 0..tau {
        let g = 2.0 * PI * m as f64 / tau as f64;
        let diff = (angle - g).rem_euclid(2.0 * PI);
        let d = diff.min(2.0 * PI - diff);
        if d < best_d {
            best_d = d;
            best = m;
        }
    }
    best
}

/// Element-wise projection of a raw coefficient vector.
pub fn project(theta_raw: &[C64], fs: FeasibilitySet) -> Vec<C64> {
    theta_raw.iter().map(|&t| fs.project_one(t)).collect()
}

/// Reflection coefficients of one RIS together with their feasibility set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionConfig {
    theta: Vec<C64>,
    feasibility: FeasibilitySet,
}

impl ReflectionConfig {
    /// Wraps `theta` after checking that every entry lies in `feasibility`.
    pub fn new(theta: Vec<C64>, feasibility: FeasibilitySet) -> Result<Self> {
        if let Some(q) = theta.iter().position(|&t| !feasibility.contains(t)) {
            return Err(Error::InvalidScenario(format!(
                "reflection coefficient {q} = {} is outside {feasibility:?}",
                theta[q]
            )));
        }
        Ok(Self { theta, feasibility })
    }

    /// Projects `theta_raw` onto `feasibility`; always feasible.
    pub fn projected(theta_raw: &[C64], feasibility: FeasibilitySet) -> Self {
        Self {
            theta: project(theta_raw, feasibility),
            feasibility,
        }
    }

    /// Wraps values already known to be feasible (solver output).
    pub(crate) fn from_feasible(theta: Vec<C64>, feasibility: FeasibilitySet) -> Self {
        debug_assert!(theta.iter().all(|&t| feasibility.contains(t)));
        Self { theta, feasibility }
    }

    /// Discrete configuration built directly from grid indices.
    pub fn from_phase_indices(indices: &[u32], tau: u32) -> Self {
        Self {
            theta: indices.iter().map(|&m| grid_point(m % tau, tau)).collect(),
            feasibility: FeasibilitySet::DiscretePhase { tau },
        }
    }

    /// All-ones configuration (zero phase, full efficiency); feasible for
    /// every set.
    pub fn unit(len: usize, feasibility: FeasibilitySet) -> Self {
        Self {
            theta: vec![C64::new(1.0, 0.0); len],
            feasibility,
        }
    }

    pub fn theta(&self) -> &[C64] {
        &self.theta
    }

    pub fn feasibility(&self) -> FeasibilitySet {
        self.feasibility
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn is_feasible(&self) -> bool {
        self.theta.iter().all(|&t| self.feasibility.contains(t))
    }

    /// Writes `index,eta,phi` rows with `phi` in `[0, 2π)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eta", "phi"])?;
        for (q, t) in self.theta.iter().enumerate() {
            let phi = if t.norm() == 0.0 {
                0.0
            } else {
                t.arg().rem_euclid(2.0 * PI)
            };
            w.write_record([q.to_string(), t.norm().to_string(), phi.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Partition of the `Q` elements of one RIS into `R` non-empty clusters.
///
/// Cluster labels are zero-based: `assignment[q] = r` with `r < R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
    clusters: usize,
}

impl Clustering {
    pub fn new(assignment: Vec<usize>, clusters: usize) -> Result<Self> {
        if clusters == 0 {
            return Err(Error::IndexOutOfRange { index: 0, clusters });
        }
        let mut used = vec![false; clusters];
        for &r in &assignment {
            if r >= clusters {
                return Err(Error::IndexOutOfRange { index: r, clusters });
            }
            used[r] = true;
        }
        if let Some(r) = used.iter().position(|u| !u) {
            return Err(Error::InvalidScenario(format!("cluster {r} has no elements")));
        }
        Ok(Self { assignment, clusters })
    }

    /// Every element in its own cluster.
    pub fn identity(q: usize) -> Self {
        Self {
            assignment: (0..q).collect(),
            clusters: q,
        }
    }

    /// Contiguous blocks whose sizes differ by at most one element.
    pub fn contiguous(q: usize, r: usize) -> Result<Self> {
        if r == 0 || r > q {
            return Err(Error::IndexOutOfRange { index: r, clusters: q });
        }
        Self::new((0..q).map(|i| i * r / q).collect(), r)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn elements(&self) -> usize {
        self.assignment.len()
    }

    /// Element indices of every cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.clusters];
        for (q, &r) in self.assignment.iter().enumerate() {
            m[r].push(q);
        }
        m
    }

    pub(crate) fn cluster_size(&self, r: usize) -> usize {
        self.assignment.iter().filter(|&&a| a == r).count()
    }

    pub(crate) fn reassign(&mut self, q: usize, r: usize) {
        self.assignment[q] = r;
    }
}

/// Broadcasts per-cluster coefficients to the elements: `θ_q = θ̃_{a(q)}`.
pub fn expand(clustered: &[C64], clustering: &Clustering) -> Result<Vec<C64>> {
    clustering
        .assignment
        .iter()
        .map(|&r| {
            clustered.get(r).copied().ok_or(Error::IndexOutOfRange {
                index: r,
                clusters: clustered.len(),
            })
        })
        .collect()
}

/// Bits needed to ship one configuration to the RIS controller.
///
/// Discrete sets cost `ceil(log2 τ)` bits per coefficient. Continuous phases
/// cost `depth` bits and general coefficients `2·depth` (magnitude and phase),
/// where `depth` is the configured quantization depth.
pub fn control_payload_bits(
    config: &ReflectionConfig,
    clustering: Option<&Clustering>,
    depth: Option<u32>,
) -> Result<u64> {
    let per_coeff = match config.feasibility() {
        FeasibilitySet::DiscretePhase { tau } => ceil_log2(tau),
        FeasibilitySet::ContinuousPhase => depth.ok_or(Error::MissingQuantizationDepth)? as u64,
        FeasibilitySet::General => 2 * depth.ok_or(Error::MissingQuantizationDepth)? as u64,
    };
    let count = clustering.map_or(config.len(), Clustering::clusters) as u64;
    Ok(count * per_coeff)
}

fn ceil_log2(tau: u32) -> u64 {
    (u32::BITS - (tau.max(1) - 1).leading_zeros()) as u64
}
