//! The Bernstein moment condition `(1/n) sum E|X_i|^m <= (m!/2) K^{m-2} sigma^2`,
//! the resulting tail bound for normalized sums and its Orlicz-norm form.

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{invalid, nonnegative, positive, Error, Result};
use crate::numeric::factorial;
use crate::orlicz::{OrliczParams, TailBound};

/// Default highest moment order checked.
pub const DEFAULT_M_MAX: u32 = 20;

const SQRT6: f64 = 2.449_489_742_783_178;

/// Scales `(sigma, K)` of the moment condition and the number of summands `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinProfile {
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub n: u64,
}

impl BernsteinProfile {
    pub fn new(sigma: f64, k: f64, n: u64) -> Result<Self> {
        nonnegative("sigma", sigma)?;
        positive("K", k)?;
        if n == 0 {
            return Err(invalid("n", "need n >= 1"));
        }
        Ok(Self { sigma, k, n })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Self::new(self.sigma, self.k, self.n).map(|_| ())
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

/// Relative slack allowed when a moment meets its bound with equality.
pub const RATIO_SLACK: f64 = 1e-12;

/// Outcome of [`check_bernstein`]. `worst_ratio` is the largest
/// left-to-right ratio over `m = 2..=m_max`; the condition holds iff it is
/// at most `1 + RATIO_SLACK`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinCheck {
    pub holds: bool,
    pub worst_m: u32,
    pub worst_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Checks the moment condition for the average of the given laws (one law
/// per summand, or a single law for the i.i.d. case). Order `m = 1` is not
/// checked.
pub fn check_bernstein(
    dists: &[DistributionSpec],
    sigma: f64,
    k: f64,
    m_max: u32,
) -> Result<BernsteinCheck> {
    if dists.is_empty() {
        return Err(invalid("dists", "need at least one distribution"));
    }
    nonnegative("sigma", sigma)?;
    positive("K", k)?;
    if m_max < 2 {
        return Err(invalid("m_max", "need m_max >= 2"));
    }
    for d in dists {
        d.validate()?;
    }
    let mut ratios = Vec::with_capacity(m_max as usize - 1);
    let mut worst_m = 2;
    let mut worst_ratio = f64::NEG_INFINITY;
    for m in 2..=m_max {
        let mut lhs = 0.0;
        for d in dists {
            lhs += d.abs_moment(m)?;
        }
        lhs /= dists.len() as f64;
        let rhs = 0.5 * factorial(m) * k.powi(m as i32 - 2) * sigma * sigma;
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_m = m;
        }
        ratios.push(ratio);
    }
    Ok(BernsteinCheck {
        holds: worst_ratio <= 1.0 + RATIO_SLACK,
        worst_m,
        worst_ratio,
        ratios,
    })
}

/// Threshold `sigma sqrt(2t) + K t / sqrt(n)` for `|n^{-1/2} sum X_i|`, capped at
/// `min(1, 2 e^{-t})`.
pub fn bernstein_tail(profile: &BernsteinProfile, t: f64) -> Result<TailBound> {
    profile.validate()?;
    positive("t", t)?;
    let threshold = profile.sigma * (2.0 * t).sqrt() + profile.k * t / profile.sqrt_n();
    Ok(TailBound::two_sided(t, threshold))
}

/// `||n^{-1/2} sum X_i||_{Psi_L} <= sqrt(6) sigma` with `L = sqrt(6) K / (sqrt(n) sigma)`.
pub fn bernstein_orlicz_norm(profile: &BernsteinProfile) -> Result<OrliczParams> {
    profile.validate()?;
    if profile.sigma == 0.0 {
        return Err(Error::DegenerateProfile);
    }
    Ok(OrliczParams {
        l: SQRT6 * profile.k / (profile.sqrt_n() * profile.sigma),
        tau: SQRT6 * profile.sigma,
    })
}
