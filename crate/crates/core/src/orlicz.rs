//! The Bernstein-Orlicz function `Psi_L(z) = exp[((sqrt(1 + 2Lz) - 1)/L)^2] - 1`,
//! its inverse, Orlicz norms of distributions and samples, and the
//! conversions between norm bounds and tail bounds.
//!
//! `L = 0` is accepted everywhere and means the sub-Gaussian limit
//! `Psi_0(z) = exp(z^2) - 1`.

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{nonnegative, positive, Error, Result};

/// Factor by which both constants weaken when a tail bound is turned back
/// into a norm bound.
pub const PROB_TO_NORM_FACTOR: f64 = 1.732_050_807_568_877_2;

/// `psi_eval` stops at this value and raises the `saturated` flag.
pub const PSI_SATURATION: f64 = 1e300;
const LN_SATURATION: f64 = 690.775_527_898_213_7; // ln(1e300)

/// Parameters `(L, tau)` of a statement `||Z||_{Psi_L} <= tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrliczParams {
    #[serde(rename = "L")]
    pub l: f64,
    pub tau: f64,
}

impl OrliczParams {
    pub fn new(l: f64, tau: f64) -> Result<Self> {
        Ok(Self {
            l: nonnegative("L", l)?,
            tau: nonnegative("tau", tau)?,
        })
    }

    pub fn tail_statement(&self) -> TailStatement {
        TailStatement {
            tau: self.tau,
            l: self.l,
        }
    }
}

/// `Psi_L(z)` together with a flag raised when the value was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    pub saturated: bool,
}

/// `(sqrt(1 + 2Lz) - 1) / L`, written without cancellation; equals `z` at `L = 0`.
#[inline]
pub(crate) fn psi_core(l: f64, z: f64) -> f64 {
    2.0 * z / ((1.0 + 2.0 * l * z).sqrt() + 1.0)
}

#[inline]
pub(crate) fn psi_unchecked(l: f64, z: f64) -> PsiValue {
    if z > 1e300 {
        return PsiValue {
            value: PSI_SATURATION,
            saturated: true,
        };
    }
    let u = psi_core(l, z);
    let exponent = u * u;
    if exponent > LN_SATURATION {
        PsiValue {
            value: PSI_SATURATION,
            saturated: true,
        }
    } else {
        PsiValue {
            value: exponent.exp_m1(),
            saturated: false,
        }
    }
}

#[inline]
pub(crate) fn psi_inverse_unchecked(l: f64, t: f64) -> f64 {
    let log = t.ln_1p();
    log.sqrt() + 0.5 * l * log
}

/// Evaluates `Psi_L(z)`.
pub fn psi_eval(l: f64, z: f64) -> Result<PsiValue> {
    nonnegative("L", l)?;
    if z.is_nan() || z < 0.0 {
        return Err(crate::error::invalid("z", format!("expected z >= 0, got {z}")));
    }
    Ok(psi_unchecked(l, z))
}

/// `Psi_L^{-1}(t) = sqrt(log(1+t)) + (L/2) log(1+t)`.
pub fn psi_inverse(l: f64, t: f64) -> Result<f64> {
    nonnegative("L", l)?;
    if t.is_nan() || t < 0.0 {
        return Err(crate::error::invalid("t", format!("expected t >= 0, got {t}")));
    }
    Ok(psi_inverse_unchecked(l, t))
}

/// Young functions supported by the norm calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OrliczFn {
    BernsteinOrlicz {
        #[serde(rename = "L")]
        l: f64,
    },
    /// `exp(z) - 1`, kept for comparison with sub-exponential norms.
    SubExponential,
}

impl OrliczFn {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            OrliczFn::BernsteinOrlicz { l } => psi_unchecked(l, z).value,
            OrliczFn::SubExponential => {
                if z > LN_SATURATION {
                    PSI_SATURATION
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    pub fn inverse(&self, t: f64) -> f64 {
        match *self {
            OrliczFn::BernsteinOrlicz { l } => psi_inverse_unchecked(l, t),
            OrliczFn::SubExponential => t.ln_1p(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OrliczFn::BernsteinOrlicz { l } => nonnegative("L", l).map(|_| ()),
            OrliczFn::SubExponential => Ok(()),
        }
    }
}

/// `E Psi_L(|Z| / c)`; `+inf` when the expectation diverges.
pub fn expected_psi(dist: &DistributionSpec, l: f64, c: f64) -> f64 {
    let f = OrliczFn::BernsteinOrlicz { l };
    dist.expect_abs(|x| f.eval(x / c)).value()
}

const BISECTION_REL_TOL: f64 = 1e-12;

/// Geometric bisection for `inf { c : E Psi(|Z|/c) <= 1 }` inside a bracket
/// where `exceeds(lo)` holds and `exceeds(hi)` does not.
fn bisect_norm<F: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, mut exceeds: F) -> f64 {
    while hi / lo - 1.0 > BISECTION_REL_TOL {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if exceeds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Brackets the norm by doubling and halving from `scale`, then bisects.
fn solve_norm<F: FnMut(f64) -> bool>(scale: f64, mut exceeds: F) -> Result<f64> {
    const MAX_STEPS: i32 = 200;
    let mut hi = scale;
    let mut steps = 0;
    while exceeds(hi) {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_STEPS || !hi.is_finite() {
            return Err(Error::NormNotFinite { lo: scale, hi });
        }
    }
    let mut lo = hi * 0.5;
    steps = 0;
    while !exceeds(lo) {
        hi = lo;
        lo *= 0.5;
        steps += 1;
        if steps > MAX_STEPS || lo == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(bisect_norm(lo, hi, exceeds))
}

/// Bernstein-Orlicz norm of a distribution by bisection on
/// `c -> E Psi_L(|Z|/c)`, the expectation computed by adaptive quadrature
/// over the quantile function.
pub fn orlicz_norm_quadrature(dist: &DistributionSpec, l: f64) -> Result<f64> {
    nonnegative("L", l)?;
    dist.validate()?;
    // quantiles stop near |X| = 700, where an exponential tail under Psi_0 can
    // still look integrable, so divergence is decided from the tail class
    if l == 0.0 && !dist.has_sub_gaussian_tail() {
        return Err(Error::NormNotFinite { lo: 0.0, hi: f64::INFINITY });
    }
    let second = dist.expect_abs(|x| x * x).value();
    if second == 0.0 {
        return Ok(0.0);
    }
    let scale = if second.is_finite() {
        second.sqrt()
    } else {
        dist.upper_quantile(0.25).abs().max(f64::MIN_POSITIVE)
    };
    solve_norm(scale, |c| expected_psi(dist, l, c) > 1.0)
}

/// Plug-in Bernstein-Orlicz norm of a sample: `inf { c : mean Psi_L(|z_i|/c) <= 1 }`.
pub fn orlicz_norm_empirical(sample: &[f64], l: f64) -> Result<f64> {
    orlicz_norm_empirical_with(sample, OrliczFn::BernsteinOrlicz { l })
}

/// As [`orlicz_norm_empirical`] for any supported Young function.
pub fn orlicz_norm_empirical_with(sample: &[f64], psi: OrliczFn) -> Result<f64> {
    psi.validate()?;
    if sample.is_empty() {
        return Err(crate::error::invalid("sample", "empty sample"));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(crate::error::invalid("sample", "non-finite entry"));
    }
    let max = sample.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let n = sample.len() as f64;
    let exceeds = |c: f64| {
        let mut total = 0.0;
        for z in sample {
            total += psi.eval(z.abs() / c);
            if total > n {
                return true;
            }
        }
        false
    };
    let lo = max / psi.inverse(1e12);
    let hi = max / psi.inverse(1e-12);
    Ok(bisect_norm(lo, hi, exceeds))
}

/// The map `t -> tau (sqrt(t) + L t / 2)` paired with the cap `min(1, 2 e^{-t})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStatement {
    pub tau: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl TailStatement {
    pub fn threshold(&self, t: f64) -> f64 {
        self.tau * (t.sqrt() + 0.5 * self.l * t)
    }

    pub fn at(&self, t: f64) -> TailBound {
        TailBound::two_sided(t, self.threshold(t))
    }
}

/// A single deviation statement `P(X >= threshold) <= prob_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub t: f64,
    pub threshold: f64,
    pub prob_bound: f64,
}

impl TailBound {
    /// Bound with probability cap `min(1, 2 e^{-t})`.
    pub fn two_sided(t: f64, threshold: f64) -> Self {
        Self {
            t,
            threshold,
            prob_bound: two_sided_cap(t),
        }
    }
}

/// `min(1, 2 e^{-t})`.
pub fn two_sided_cap(t: f64) -> f64 {
    (2.0 * (-t).exp()).min(1.0)
}

/// Tail bound implied by `||Z||_{Psi_L} <= tau`.
pub fn tail_from_norm(params: OrliczParams, t: f64) -> Result<TailBound> {
    positive("t", t)?;
    Ok(params.tail_statement().at(t))
}

/// Norm bound implied by `P(|Z| >= tau (sqrt(t) + L t/2)) <= 2 e^{-t}` for all `t`:
/// `||Z||_{Psi_{sqrt(3) L}} <= sqrt(3) tau`.
pub fn norm_from_tail(tau: f64, l: f64) -> Result<OrliczParams> {
    OrliczParams::new(PROB_TO_NORM_FACTOR * l, PROB_TO_NORM_FACTOR * tau)
}
