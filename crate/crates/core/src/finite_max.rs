//! Maxima of finitely many variables sharing a Bernstein-Orlicz norm bound.

use serde::{Deserialize, Serialize};

use crate::bernstein::{bernstein_orlicz_norm, BernsteinProfile};
use crate::error::{invalid, nonnegative, positive, Result};
use crate::orlicz::{psi_inverse_unchecked, OrliczParams, TailBound, PROB_TO_NORM_FACTOR};

/// `max_j ||Z_j||_{Psi_L} <= tau` over `p` variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxBoundInput {
    pub params: OrliczParams,
    pub p: u64,
}

impl MaxBoundInput {
    pub fn new(params: OrliczParams, p: u64) -> Result<Self> {
        let input = Self { params, p };
        input.validate()?;
        Ok(input)
    }

    /// Uniform bound from per-variable norms by taking their maximum.
    pub fn from_norms(norms: &[f64], l: f64) -> Result<Self> {
        if norms.is_empty() {
            return Err(invalid("norms", "need at least one variable"));
        }
        let mut tau = 0.0_f64;
        for &v in norms {
            tau = tau.max(nonnegative("norm", v)?);
        }
        Self::new(OrliczParams::new(l, tau)?, norms.len() as u64)
    }

    fn validate(&self) -> Result<()> {
        nonnegative("L", self.params.l)?;
        nonnegative("tau", self.params.tau)?;
        if self.p == 0 {
            return Err(invalid("p", "need p >= 1"));
        }
        Ok(())
    }

    fn shift(&self) -> f64 {
        self.params.tau * psi_inverse_unchecked(self.params.l, self.p as f64)
    }
}

/// A bound `||(X - shift)_+||_{Psi_L} <= tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedNormStatement {
    pub shift: f64,
    pub params: OrliczParams,
}

/// `E max_j |Z_j| <= tau Psi_L^{-1}(p)`.
pub fn max_expectation_bound(input: &MaxBoundInput) -> Result<f64> {
    input.validate()?;
    Ok(input.shift())
}

/// `sigma sqrt(6 log(1+p)) + (3K/sqrt(n)) log(1+p)` for `p` normalized Bernstein sums.
pub fn max_bernstein_expectation_bound(profile: &BernsteinProfile, p: u64) -> Result<f64> {
    profile.validate()?;
    if p == 0 {
        return Err(invalid("p", "need p >= 1"));
    }
    positive("sigma", profile.sigma)?;
    let log = (p as f64).ln_1p();
    Ok(profile.sigma * (6.0 * log).sqrt() + 3.0 * profile.k / (profile.n as f64).sqrt() * log)
}

/// Union-bound threshold `tau [Psi_L^{-1}(p) + sqrt(t) + L t/2]` with cap `min(1, 2e^{-t})`.
pub fn max_deviation_threshold(input: &MaxBoundInput, t: f64) -> Result<TailBound> {
    input.validate()?;
    positive("t", t)?;
    let spread = input.params.tail_statement().threshold(t);
    Ok(TailBound::two_sided(t, input.shift() + spread))
}

/// `||(max_j |Z_j| - tau Psi_L^{-1}(p))_+||_{Psi_{sqrt(3) L}} <= sqrt(3) tau`.
pub fn max_deviation_norm(input: &MaxBoundInput) -> Result<ShiftedNormStatement> {
    input.validate()?;
    Ok(ShiftedNormStatement {
        shift: input.shift(),
        params: OrliczParams {
            l: PROB_TO_NORM_FACTOR * input.params.l,
            tau: PROB_TO_NORM_FACTOR * input.params.tau,
        },
    })
}

/// [`max_expectation_bound`] for the norm bound of [`bernstein_orlicz_norm`];
/// agrees with [`max_bernstein_expectation_bound`].
pub fn max_expectation_from_profile(profile: &BernsteinProfile, p: u64) -> Result<f64> {
    max_expectation_bound(&MaxBoundInput::new(bernstein_orlicz_norm(profile)?, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(tau: f64, l: f64, p: u64) -> MaxBoundInput {
        MaxBoundInput::new(OrliczParams::new(l, tau).unwrap(), p).unwrap()
    }

    #[test]
    fn expectation_values() {
        let ln2 = 2f64.ln();
        assert!((max_expectation_bound(&input(1.0, 0.0, 1)).unwrap() - ln2.sqrt()).abs() < 1e-15);
        let ln3 = 3f64.ln();
        let v = max_expectation_bound(&input(2.0, 1.0, 2)).unwrap();
        assert!((v - 2.0 * (ln3.sqrt() + 0.5 * ln3)).abs() < 1e-14);
        assert!((v - 3.194_906_436_604_52).abs() < 1e-12);
    }

    #[test]
    fn bernstein_specialization() {
        let prof = BernsteinProfile::new(1.0, 1.0, 9).unwrap();
        let direct = max_bernstein_expectation_bound(&prof, 1).unwrap();
        assert!((direct - 2.732_481_160_897_563).abs() < 1e-12);
        for (sigma, k, n, p) in [(1.0, 1.0, 9, 1), (0.3, 2.0, 100, 50), (4.0, 0.1, 7, 1000)] {
            let prof = BernsteinProfile::new(sigma, k, n).unwrap();
            let a = max_bernstein_expectation_bound(&prof, p).unwrap();
            let b = max_expectation_from_profile(&prof, p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn large_p_is_sub_gaussian() {
        let prof = BernsteinProfile::new(1.0, 1.0, 1_000_000_000_000).unwrap();
        let p = 1_000_000;
        let v = max_bernstein_expectation_bound(&prof, p).unwrap();
        let ratio = v / (6.0 * (p as f64).ln()).sqrt();
        assert!((ratio - 1.0).abs() < 1e-4, "{ratio}");
    }

    #[test]
    fn deviation_threshold_structure() {
        let b = max_deviation_threshold(&input(1.0, 0.0, 1), 1.0).unwrap();
        assert!((b.threshold - (2f64.ln().sqrt() + 1.0)).abs() < 1e-15);
        let inp = input(1.3, 0.7, 12);
        let base = max_expectation_bound(&inp).unwrap();
        for t in [0.1, 1.0, 5.0] {
            let th = max_deviation_threshold(&inp, t).unwrap().threshold;
            assert!((th - base - 1.3 * (t.sqrt() + 0.35 * t)).abs() < 1e-13);
        }
        let tiny = max_deviation_threshold(&inp, 1e-14).unwrap().threshold;
        assert!((tiny - base).abs() < 1e-6);
    }

    #[test]
    fn deviation_norm_constants() {
        let s = max_deviation_norm(&input(1.0, 1.0, 1)).unwrap();
        let ln2 = 2f64.ln();
        assert!((s.shift - (ln2.sqrt() + 0.5 * ln2)).abs() < 1e-15);
        assert!((s.params.tau - 3f64.sqrt()).abs() < 1e-15);
        assert!((s.params.l - 3f64.sqrt()).abs() < 1e-15);
        let s2 = max_deviation_norm(&input(1.0, 1.0, 10)).unwrap();
        assert!(s2.shift > s.shift);
        assert_eq!(s2.params, s.params);
    }

    #[test]
    fn heterogeneous_norms_take_the_max() {
        let inp = MaxBoundInput::from_norms(&[0.5, 2.0, 1.0], 0.3).unwrap();
        assert_eq!(inp.params.tau, 2.0);
        assert_eq!(inp.p, 3);
        assert!(MaxBoundInput::from_norms(&[], 1.0).is_err());
    }
}
