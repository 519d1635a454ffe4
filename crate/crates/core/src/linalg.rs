//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec, Error, Result, C64};

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Squared Frobenius norm.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Numerical rank from the singular values, relative tolerance `1e-10`.
pub fn rank(m: &CMat) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

/// Moore-Penrose pseudo-inverse, failing with `RankDeficient` when the rank
/// is below `needed`.
pub fn pinv_full_rank(m: &CMat, needed: usize) -> Result<CMat> {
    let r = rank(m);
    if r < needed {
        return Err(Error::RankDeficient { rank: r, needed });
    }
    let smax = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    m.clone()
        .pseudo_inverse(1e-10 * smax)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

/// Row `k` of `m` as an owned column vector (no conjugation).
pub fn row(m: &CMat, k: usize) -> CVec {
    CVec::from_iterator(m.ncols(), m.row(k).iter().cloned())
}

/// `Σ_i conj(a_i) b_i`.
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Real matrix of zeros shaped like a complex matrix, used for gain maps.
pub fn zeros_like(m: &CMat) -> CMat {
    DMatrix::zeros(m.nrows(), m.ncols())
}
