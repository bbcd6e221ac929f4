//! Expectation and deviation bounds for `sup_g |nu_n(g)|` from a bracketing
//! entropy profile, plus Massart's inequality as a comparator.

use serde::{Deserialize, Serialize};

use crate::bracketing::{chain_ls, check_k_levels, EntropyProfile, CHAIN_TAU};
use crate::error::{invalid, nonnegative, positive, Error, Result};
use crate::numeric::fmt_sig9;
use crate::orlicz::{two_sided_cap, TailBound};
use crate::tree::uniform_l;

const SQRT6: f64 = 2.449_489_742_783_178;

/// Coefficient `24 sqrt(6)` of the deviation spread.
pub const SPREAD_COEFFICIENT: f64 = 24.0 * SQRT6;
/// `72 sqrt(2)`, the Orlicz norm of the excess over the shift.
pub const ORLICZ_EXCESS_NORM: f64 = 72.0 * std::f64::consts::SQRT_2;

/// `ceil(log2 n)`, the default scan limit.
pub fn default_s_max(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as usize
    }
}

/// Sample size, uniform Bernstein scale `K >= 1` of the class, its entropy
/// profile and the largest depth scanned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpBoundInput {
    pub n: u64,
    #[serde(rename = "K")]
    pub k: f64,
    pub profile: EntropyProfile,
    #[serde(rename = "S_max")]
    pub s_max: usize,
}

impl EpBoundInput {
    /// `s_max` defaults to `ceil(log2 n)`; the profile must reach it.
    pub fn new(n: u64, k: f64, profile: EntropyProfile, s_max: Option<usize>) -> Result<Self> {
        let input = Self {
            n,
            k,
            s_max: s_max.unwrap_or_else(|| default_s_max(n)),
            profile,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "need n >= 1"));
        }
        if !(self.k.is_finite() && self.k >= 1.0) {
            return Err(invalid("K", format!("need K >= 1, got {}", self.k)));
        }
        if self.profile.depth() < self.s_max {
            return Err(invalid(
                "profile",
                format!(
                    "entropy profile reaches level {}, scan needs S_max = {}",
                    self.profile.depth(),
                    self.s_max
                ),
            ));
        }
        if self.profile.hprod[0] != self.profile.htilde[0] {
            return Err(Error::Internal("H_0 differs from H~_0".into()));
        }
        Ok(())
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

/// `K_{s-1} = 2^{-s} sqrt(n) min(sqrt(6)/(3 sqrt(H_s)), 1/eps)` for
/// `s = 1..=S`; `eps = 0` drops the second term.
pub fn truncation_levels(input: &EpBoundInput, s: usize, eps: f64) -> Result<Vec<f64>> {
    input.validate()?;
    nonnegative("eps", eps)?;
    if s > input.s_max {
        return Err(invalid("S", format!("S = {s} exceeds S_max = {}", input.s_max)));
    }
    let rn = input.sqrt_n();
    let inv_eps = if eps == 0.0 { f64::INFINITY } else { 1.0 / eps };
    let levels: Vec<f64> = (1..=s)
        .map(|s| {
            let h = input.profile.hprod[s];
            0.5f64.powi(s as i32) * rn * (SQRT6 / (3.0 * h.sqrt())).min(inv_eps)
        })
        .collect();
    check_k_levels(&levels).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(levels)
}

/// The scan `E_S` for `S = 0..=S_max` and its first minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationScan {
    pub per_s: Vec<f64>,
    pub best_s: usize,
    pub best: f64,
}

impl ExpectationScan {
    pub fn is_interior(&self) -> bool {
        self.best_s > 0 && self.best_s + 1 < self.per_s.len()
    }

    /// Columns `S`, `E_bar_S`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("S\tE_bar_S\n");
        for (s, e) in self.per_s.iter().enumerate() {
            out.push_str(&format!("{s}\t{}\n", fmt_sig9(*e)));
        }
        out
    }
}

/// `E_S = 2^{-S} sqrt(n) + 14 sum_{s=0}^S 2^{-s} sqrt(6 H~_s) + 36 K H~_0 / sqrt(n)`.
pub fn expectation_bound(input: &EpBoundInput) -> Result<ExpectationScan> {
    input.validate()?;
    let rn = input.sqrt_n();
    let h = &input.profile.htilde;
    let fixed = 36.0 * input.k * h[0] / rn;
    let mut entropy = 0.0;
    let mut per_s = Vec::with_capacity(input.s_max + 1);
    for s in 0..=input.s_max {
        let w = 0.5f64.powi(s as i32);
        entropy += w * (6.0 * h[s]).sqrt();
        per_s.push(w * rn + 14.0 * entropy + fixed);
    }
    let (best_s, best) = per_s
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (s, e)| if e < acc.1 { (s, e) } else { acc });
    Ok(ExpectationScan {
        per_s,
        best_s,
        best,
    })
}

/// `L = sum_s 2^{-s} L_s (1+s) / 4` for the chain at depth `S` with
/// truncation levels chosen at `eps`, and the two inequalities it must meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantAssembly {
    #[serde(rename = "L")]
    pub l: f64,
    /// `sqrt(6) K / sqrt(n) + min(2, sqrt(6)/eps)`.
    pub l_cap: f64,
    /// `4 tau (1 + L/2)` with `tau = 3 sqrt(6)`.
    pub four_tau_term: f64,
    /// `36 K / sqrt(n) + 24 sqrt(6)`.
    pub four_tau_cap: f64,
}

impl ConstantAssembly {
    pub fn l_slack(&self) -> f64 {
        self.l_cap - self.l
    }

    pub fn tau_slack(&self) -> f64 {
        self.four_tau_cap - self.four_tau_term
    }
}

pub fn constant_assembly(input: &EpBoundInput, s: usize, eps: f64) -> Result<ConstantAssembly> {
    positive("eps", eps)?;
    let k_levels = truncation_levels(input, s, eps)?;
    let ls = chain_ls(input.k, &k_levels, input.n);
    let l = uniform_l(&ls);
    let rn = input.sqrt_n();
    let out = ConstantAssembly {
        l,
        l_cap: SQRT6 * input.k / rn + 2f64.min(SQRT6 / eps),
        four_tau_term: 4.0 * CHAIN_TAU * (1.0 + l / 2.0),
        four_tau_cap: 36.0 * input.k / rn + SPREAD_COEFFICIENT,
    };
    let tol = 1e-12;
    if out.l > out.l_cap * (1.0 + tol) || out.four_tau_term > out.four_tau_cap * (1.0 + tol) {
        return Err(Error::Internal(format!("constant assembly out of range: {out:?}")));
    }
    Ok(out)
}

/// Which shift the deviation threshold uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationForm {
    /// `min E_S + 36K/sqrt(n) + 24 sqrt(6)`, as assembled in the proof.
    #[default]
    Proof,
    /// `min E_S + 36K/sqrt(n)`, as displayed in the theorem.
    Statement,
}

/// Threshold `shift + 24 sqrt(6)(sqrt(t) + L~ t/2)` with `L~ = sqrt(6) K / (2 sqrt(n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpDeviationThreshold {
    pub t: f64,
    pub expectation: f64,
    pub shift: f64,
    pub spread: f64,
    pub threshold: f64,
    pub prob_bound: f64,
    #[serde(rename = "L_tilde")]
    pub l_tilde: f64,
}

impl EpDeviationThreshold {
    pub fn tail(&self) -> TailBound {
        TailBound {
            t: self.t,
            threshold: self.threshold,
            prob_bound: self.prob_bound,
        }
    }
}

pub fn l_tilde(input: &EpBoundInput) -> f64 {
    SQRT6 * input.k / (2.0 * input.sqrt_n())
}

fn deviation_shift(input: &EpBoundInput, form: DeviationForm) -> Result<(f64, f64)> {
    let expectation = expectation_bound(input)?.best;
    let mut shift = expectation + 36.0 * input.k / input.sqrt_n();
    if form == DeviationForm::Proof {
        shift += SPREAD_COEFFICIENT;
    }
    Ok((expectation, shift))
}

pub fn deviation_threshold(input: &EpBoundInput, t: f64) -> Result<EpDeviationThreshold> {
    deviation_threshold_with(input, t, DeviationForm::Proof)
}

pub fn deviation_threshold_with(
    input: &EpBoundInput,
    t: f64,
    form: DeviationForm,
) -> Result<EpDeviationThreshold> {
    positive("t", t)?;
    let (expectation, shift) = deviation_shift(input, form)?;
    let lt = l_tilde(input);
    let spread = SPREAD_COEFFICIENT * (t.sqrt() + lt * t / 2.0);
    Ok(EpDeviationThreshold {
        t,
        expectation,
        shift,
        spread,
        threshold: shift + spread,
        prob_bound: two_sided_cap(t),
        l_tilde: lt,
    })
}

/// `||(sup|nu_n| - shift)_+||_{Psi_{sqrt(3) L~}} <= 72 sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpDeviation {
    pub shift: f64,
    pub spread_coefficient: f64,
    #[serde(rename = "L_tilde")]
    pub l_tilde: f64,
    #[serde(rename = "orlicz_L")]
    pub orlicz_l: f64,
    pub orlicz_norm: f64,
}

pub fn deviation_orlicz(input: &EpBoundInput) -> Result<EpDeviation> {
    let (_, shift) = deviation_shift(input, DeviationForm::Proof)?;
    let lt = l_tilde(input);
    Ok(EpDeviation {
        shift,
        spread_coefficient: SPREAD_COEFFICIENT,
        l_tilde: lt,
        orlicz_l: 3f64.sqrt() * lt,
        orlicz_norm: ORLICZ_EXCESS_NORM,
    })
}

/// Massart's one-sided bound for classes with `sup|g| <= K_bound`:
/// `(1+eps) E + sqrt(8t) + (2.5 + 32/eps) K_bound t / sqrt(n)`, exceeded
/// with probability at most `e^{-t}`.
pub fn massart_threshold(e_sup: f64, k_bound: f64, n: u64, eps: f64, t: f64) -> Result<TailBound> {
    nonnegative("E_sup", e_sup)?;
    nonnegative("K_bound", k_bound)?;
    positive("eps", eps)?;
    positive("t", t)?;
    if n == 0 {
        return Err(invalid("n", "need n >= 1"));
    }
    let threshold =
        (1.0 + eps) * e_sup + (8.0 * t).sqrt() + (2.5 + 32.0 / eps) * k_bound * t / (n as f64).sqrt();
    Ok(TailBound {
        t,
        threshold,
        prob_bound: (-t).exp().min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(depth: usize) -> EntropyProfile {
        EntropyProfile::from_counts(&vec![1; depth + 1]).unwrap()
    }

    #[test]
    fn scan_limit() {
        assert_eq!(default_s_max(1), 0);
        assert_eq!(default_s_max(2), 1);
        assert_eq!(default_s_max(100), 7);
        assert_eq!(default_s_max(256), 8);
        assert_eq!(default_s_max(257), 9);
    }

    #[test]
    fn levels_without_eps() {
        let input = EpBoundInput::new(100, 1.0, flat(7), None).unwrap();
        let k = truncation_levels(&input, 3, 0.0).unwrap();
        let ln2 = std::f64::consts::LN_2;
        for (i, v) in k.iter().enumerate() {
            let s = i as i32 + 1;
            let oracle = 0.5f64.powi(s) * 10.0 * SQRT6 / (3.0 * ln2.sqrt());
            assert!((v - oracle).abs() < 1e-13 * oracle);
        }
        let k = truncation_levels(&input, 3, 1e6).unwrap();
        assert!((k[1] - 0.25 * 10.0 / 1e6).abs() < 1e-20);
        assert!(truncation_levels(&input, 8, 0.0).is_err());
    }

    #[test]
    fn single_term_scan() {
        let p = EntropyProfile::from_counts(&[5]).unwrap();
        let input = EpBoundInput::new(1, 2.0, p.clone(), None).unwrap();
        let scan = expectation_bound(&input).unwrap();
        let h = 6f64.ln();
        assert_eq!(scan.per_s.len(), 1);
        assert!((scan.per_s[0] - (1.0 + 14.0 * (6.0 * h).sqrt() + 72.0 * h)).abs() < 1e-12);
        assert_eq!(scan.best_s, 0);
    }

    #[test]
    fn flat_profile_at_256_favours_depth_zero() {
        // E_{S+1} - E_S = 2^{-S-1} (14 sqrt(6 log 2) - sqrt(n)), positive for sqrt(n) = 16
        let input = EpBoundInput::new(256, 1.0, flat(8), None).unwrap();
        let scan = expectation_bound(&input).unwrap();
        assert_eq!(scan.best_s, 0);
        assert!(scan.per_s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn indicator_profile_has_interior_minimum_for_large_n() {
        let n = 4096;
        let input = EpBoundInput::new(n, 1.0, EntropyProfile::indicators(12).unwrap(), None).unwrap();
        let scan = expectation_bound(&input).unwrap();
        assert!(scan.is_interior(), "{scan:?}");
        // sqrt(n) = 64 beats 14 sqrt(6 H~_{S+1}) until log(1 + 4^{S+1}) > (64/14)^2/6
        assert_eq!(scan.best_s, 2);
    }

    #[test]
    fn assembly_inequalities_on_grid() {
        for &n in &[16u64, 64, 256, 1024, 4096] {
            for &k in &[1.0, 2.0, 5.0] {
                for &eps in &[0.1, 0.5, 1.0, 3.0, 10.0] {
                    let input =
                        EpBoundInput::new(n, k, EntropyProfile::indicators(12).unwrap(), None).unwrap();
                    for s in 0..=input.s_max {
                        let a = constant_assembly(&input, s, eps).unwrap();
                        assert!(a.l_slack() >= 0.0 && a.tau_slack() >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn assembly_at_depth_zero() {
        let input = EpBoundInput::new(100, 1.0, flat(7), None).unwrap();
        let a = constant_assembly(&input, 0, 3.0).unwrap();
        assert!((a.l - SQRT6 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn deviation_structure() {
        let input = EpBoundInput::new(400, 1.0, EntropyProfile::indicators(9).unwrap(), None).unwrap();
        let e = expectation_bound(&input).unwrap().best;
        let small = deviation_threshold(&input, 1e-12).unwrap();
        assert!((small.threshold - (e + 36.0 / 20.0 + SPREAD_COEFFICIENT)).abs() < 1e-4);
        let lt = SQRT6 / 40.0;
        for &t in &[0.5, 1.0, 2.0] {
            let d = deviation_threshold(&input, t).unwrap();
            let spread = SPREAD_COEFFICIENT * (t.sqrt() + lt * t / 2.0);
            assert!((d.threshold - d.shift - spread).abs() < 1e-12);
            let st = deviation_threshold_with(&input, t, DeviationForm::Statement).unwrap();
            assert!((d.threshold - st.threshold - SPREAD_COEFFICIENT).abs() < 1e-12);
        }
    }

    #[test]
    fn orlicz_constant_identity() {
        assert!((ORLICZ_EXCESS_NORM - 3f64.sqrt() * SPREAD_COEFFICIENT).abs() < 1e-12);
        let input = EpBoundInput::new(400, 1.0, EntropyProfile::indicators(9).unwrap(), None).unwrap();
        let d = deviation_orlicz(&input).unwrap();
        assert!((d.orlicz_l - 3f64.sqrt() * SQRT6 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn massart_example() {
        let b = massart_threshold(1.0, 1.0, 100, 1.0, 1.0).unwrap();
        assert!((b.threshold - 8.278_427_124_746_191).abs() < 1e-12);
        assert!((b.prob_bound - (-1f64).exp()).abs() < 1e-16);
        let b = massart_threshold(1.5, 1.0, 100, 0.5, 1e-14).unwrap();
        assert!((b.threshold - 2.25).abs() < 1e-6);
        assert!(massart_threshold(1.0, 1.0, 100, 0.0, 1.0).is_err());
    }

    #[test]
    fn input_checks() {
        assert!(EpBoundInput::new(100, 0.5, flat(7), None).is_err());
        assert!(EpBoundInput::new(100, 1.0, flat(3), None).is_err());
        assert!(EpBoundInput::new(100, 1.0, flat(3), Some(3)).is_ok());
    }

    #[test]
    fn tsv_layout() {
        let input = EpBoundInput::new(4, 1.0, flat(2), None).unwrap();
        let tsv = expectation_bound(&input).unwrap().to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "S\tE_bar_S");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0\t"));
    }
}
