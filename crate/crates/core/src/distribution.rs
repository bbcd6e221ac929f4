//! Built-in real distributions with CDF, inverse CDF and absolute moments.

use serde::{Deserialize, Serialize};
use statrs::function::{erf, gamma::ln_gamma};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::numeric::{integrate_unit_tail_capped, TailIntegral, DIVERGENCE_CAP};

/// Distribution of a real random variable used by the norm and moment
/// calculators and by the samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    StandardNormal,
    /// `Y - 1/rate` with `Y ~ Exp(rate)`.
    CenteredExponential { rate: f64 },
    /// `U - (a+b)/2` with `U ~ Uniform(a, b)`.
    CenteredUniform { a: f64, b: f64 },
    /// `U ~ Uniform(a, b)`, not centered; the usual design law.
    Uniform { a: f64, b: f64 },
    /// `a` with probability `p`, `b` otherwise.
    TwoPoint { a: f64, b: f64, p: f64 },
    PointMass { value: f64 },
    Empirical { sample: Vec<f64> },
    /// Nonnegative variable whose tail is exactly
    /// `P(Z >= tau (sqrt(t) + l t / 2)) = min(1, 2 e^{-t})` for all `t > 0`.
    ExactTail { tau: f64, l: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::StandardNormal => Ok(()),
            DistributionSpec::CenteredExponential { rate } => {
                crate::error::positive("rate", *rate).map(|_| ())
            }
            DistributionSpec::CenteredUniform { a, b } | DistributionSpec::Uniform { a, b } => {
                if a.is_finite() && b.is_finite() && a < b {
                    Ok(())
                } else {
                    Err(invalid("a,b", format!("need finite a < b, got ({a}, {b})")))
                }
            }
            DistributionSpec::TwoPoint { a, b, p } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(invalid("a,b", "atoms must be finite"));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid("p", format!("probability out of [0,1]: {p}")));
                }
                Ok(())
            }
            DistributionSpec::PointMass { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("value", "must be finite"))
                }
            }
            DistributionSpec::Empirical { sample } => {
                if sample.is_empty() {
                    return Err(invalid("sample", "empty sample"));
                }
                if sample.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("sample", "non-finite entry"));
                }
                Ok(())
            }
            DistributionSpec::ExactTail { tau, l } => {
                crate::error::nonnegative("tau", *tau)?;
                crate::error::nonnegative("l", *l).map(|_| ())
            }
        }
    }

    /// Whether expectations are finite sums over atoms.
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            DistributionSpec::TwoPoint { .. }
                | DistributionSpec::PointMass { .. }
                | DistributionSpec::Empirical { .. }
        ) || matches!(self, DistributionSpec::ExactTail { tau, .. } if *tau == 0.0)
    }

    /// Whether `E exp(X^2/c^2)` is finite for large `c`: false for the
    /// exponential-tailed kinds.
    pub fn has_sub_gaussian_tail(&self) -> bool {
        match self {
            DistributionSpec::CenteredExponential { .. } => false,
            DistributionSpec::ExactTail { tau, l } => *tau == 0.0 || *l == 0.0,
            _ => true,
        }
    }

    /// Atoms `(value, probability)` sorted by value, for discrete kinds.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let mut atoms = match self {
            DistributionSpec::TwoPoint { a, b, p } => vec![(*a, *p), (*b, 1.0 - *p)],
            DistributionSpec::PointMass { value } => vec![(*value, 1.0)],
            DistributionSpec::Empirical { sample } => {
                let w = 1.0 / sample.len() as f64;
                sample.iter().map(|&x| (x, w)).collect()
            }
            DistributionSpec::ExactTail { tau, .. } if *tau == 0.0 => vec![(0.0, 1.0)],
            _ => return None,
        };
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        Some(atoms)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::StandardNormal => 0.5 * erf::erfc(-x / SQRT_2),
            DistributionSpec::CenteredExponential { rate } => {
                let y = rate * x + 1.0;
                if y <= 0.0 {
                    0.0
                } else {
                    -(-y).exp_m1()
                }
            }
            DistributionSpec::CenteredUniform { a, b } => {
                let h = 0.5 * (b - a);
                ((x + h) / (2.0 * h)).clamp(0.0, 1.0)
            }
            DistributionSpec::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            DistributionSpec::ExactTail { tau, l } if *tau > 0.0 => {
                if x <= 0.0 {
                    return 0.0;
                }
                let root_t = crate::orlicz::psi_core(*l, x / tau);
                let survival = (2.0 * (-root_t * root_t).exp()).min(1.0);
                1.0 - survival
            }
            _ => {
                let atoms = self.atoms().expect("discrete kinds carry atoms");
                atoms.iter().filter(|(v, _)| *v <= x).map(|(_, p)| p).sum()
            }
        }
    }

    /// Inverse CDF, `inf { x : F(x) >= u }` for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            DistributionSpec::StandardNormal => -SQRT_2 * erf::erfc_inv(2.0 * u),
            DistributionSpec::CenteredExponential { rate } => (-(-u).ln_1p() - 1.0) / rate,
            DistributionSpec::CenteredUniform { a, b } => {
                let h = 0.5 * (b - a);
                -h + 2.0 * h * u
            }
            DistributionSpec::Uniform { a, b } => a + (b - a) * u,
            DistributionSpec::ExactTail { tau, .. } if *tau > 0.0 => self.upper_quantile(1.0 - u),
            _ => {
                let atoms = self.atoms().expect("discrete kinds carry atoms");
                let mut acc = 0.0;
                for (v, p) in &atoms {
                    acc += p;
                    if acc >= u {
                        return *v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }

    /// `quantile(1 - v)`, evaluated without cancellation for small `v`.
    pub fn upper_quantile(&self, v: f64) -> f64 {
        match self {
            DistributionSpec::StandardNormal => SQRT_2 * erf::erfc_inv(2.0 * v),
            DistributionSpec::CenteredExponential { rate } => (-v.ln() - 1.0) / rate,
            DistributionSpec::CenteredUniform { a, b } => {
                let h = 0.5 * (b - a);
                h - 2.0 * h * v
            }
            DistributionSpec::Uniform { a, b } => b - (b - a) * v,
            DistributionSpec::ExactTail { tau, l } if *tau > 0.0 => {
                let t = (2.0 / v).ln();
                tau * (t.sqrt() + 0.5 * l * t)
            }
            _ => self.quantile(1.0 - v),
        }
    }

    /// `E g(|X|)` for a nonnegative `g`; continuous kinds integrate over the
    /// quantile function, discrete kinds sum over atoms.
    pub fn expect_abs<G: FnMut(f64) -> f64>(&self, g: G) -> TailIntegral {
        self.expect_abs_capped(g, DIVERGENCE_CAP)
    }

    /// As [`expect_abs`](Self::expect_abs) with an explicit divergence cap.
    pub fn expect_abs_capped<G: FnMut(f64) -> f64>(&self, mut g: G, cap: f64) -> TailIntegral {
        if let Some(atoms) = self.atoms() {
            let value: f64 = atoms.iter().map(|(x, p)| p * g(x.abs())).sum();
            return if value.is_finite() {
                TailIntegral::Finite(value)
            } else {
                TailIntegral::Diverged
            };
        }
        let lower = integrate_unit_tail_capped(|v| g(self.quantile(v).abs()), cap);
        let TailIntegral::Finite(lower) = lower else {
            return TailIntegral::Diverged;
        };
        match integrate_unit_tail_capped(|v| g(self.upper_quantile(v).abs()), cap) {
            TailIntegral::Finite(upper) => TailIntegral::Finite(lower + upper),
            TailIntegral::Diverged => TailIntegral::Diverged,
        }
    }

    /// `E|X|^m`, closed form where available and quadrature otherwise.
    pub fn abs_moment(&self, m: u32) -> Result<f64> {
        let value = match self {
            DistributionSpec::StandardNormal => {
                let m = m as f64;
                (0.5 * m * 2f64.ln() + ln_gamma(0.5 * (m + 1.0)) - 0.5 * PI.ln()).exp()
            }
            DistributionSpec::CenteredUniform { a, b } => {
                let h = 0.5 * (b - a);
                h.powi(m as i32) / (m as f64 + 1.0)
            }
            _ => self
                .expect_abs_capped(|x| x.powi(m as i32), f64::INFINITY)
                .value(),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteMoment { order: m })
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::StandardNormal
            | DistributionSpec::CenteredExponential { .. }
            | DistributionSpec::CenteredUniform { .. } => 0.0,
            DistributionSpec::Uniform { a, b } => 0.5 * (a + b),
            DistributionSpec::ExactTail { .. } => self.expect_abs(|x| x).value(),
            _ => self
                .atoms()
                .expect("discrete kinds carry atoms")
                .iter()
                .map(|(x, p)| x * p)
                .sum(),
        }
    }
}
