//! Seeded Monte Carlo engine: per-replicate ChaCha20 substreams, exact
//! empirical-process evaluation on cell models, tail reports with exact
//! binomial intervals, and the pathwise chain check.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::bracketing::TruncatedChainBuild;
use crate::class::{EvalModel, FunctionClass};
use crate::distribution::DistributionSpec;
use crate::error::{invalid, Error, Result};
use crate::numeric::fmt_sig9;
use crate::orlicz::TailBound;

/// Generator for replicate `replicate`: key from `seed`, stream id
/// `replicate`, word position 0.
pub fn substream(seed: u64, replicate: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng.set_word_pos(0);
    rng
}

/// A draw from `(0, 1)` on the grid `(k + 1/2) 2^{-53}`.
pub fn unit_draw(rng: &mut ChaCha20Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * f64::EPSILON / 2.0
}

/// Runs `f` once per replicate on its own substream and returns the results
/// in replicate order, whatever the worker count.
pub fn run_replicates<T, F>(seed: u64, replicates: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha20Rng) -> T + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|r| f(&mut substream(seed, r)))
        .collect()
}

/// Runs `f` inside a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// One draw of `dist` per replicate.
pub fn simulate_draws(seed: u64, replicates: u64, dist: &DistributionSpec) -> Result<Vec<f64>> {
    dist.validate()?;
    Ok(run_replicates(seed, replicates, |rng| dist.quantile(unit_draw(rng))))
}

/// `|n^{-1/2} sum_{i<=n} X_i|` per replicate, `X_i` i.i.d. `dist`.
pub fn simulate_normalized_sum(
    seed: u64,
    replicates: u64,
    dist: &DistributionSpec,
    n: u64,
) -> Result<Vec<f64>> {
    dist.validate()?;
    if n == 0 {
        return Err(invalid("n", "need n >= 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(run_replicates(seed, replicates, |rng| {
        let sum: f64 = (0..n).map(|_| dist.quantile(unit_draw(rng))).sum();
        (sum * scale).abs()
    }))
}

/// `max_{j<=p} |X_j|` per replicate, `X_j` i.i.d. `dist`.
pub fn simulate_finite_max(seed: u64, replicates: u64, dist: &DistributionSpec, p: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    if p == 0 {
        return Err(invalid("p", "need p >= 1"));
    }
    Ok(run_replicates(seed, replicates, |rng| {
        (0..p).fold(0.0_f64, |m, _| m.max(dist.quantile(unit_draw(rng)).abs()))
    }))
}

/// Experiment over a function class: the design law is part of the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replicates: u64,
    pub n: u64,
    pub class: FunctionClass,
    pub t_grid: Vec<f64>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates", "need R >= 1"));
        }
        if self.n == 0 {
            return Err(invalid("n", "need n >= 1"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(invalid("t_grid", "need a nonempty grid of positive reals"));
        }
        self.class.validate()
    }
}

/// Cell counts of `n` observations drawn from the model's design law.
fn cell_counts(model: &EvalModel, n: u64, rng: &mut ChaCha20Rng) -> Vec<u64> {
    let mut counts = vec![0u64; model.cells()];
    for _ in 0..n {
        counts[model.cell_of(unit_draw(rng))] += 1;
    }
    counts
}

/// `nu_n(f) = sqrt(n) (P_n f - P f)` from cell counts.
fn nu(model: &EvalModel, counts: &[u64], n: u64, f: &[f64]) -> f64 {
    let pn: f64 = counts
        .iter()
        .zip(f)
        .filter(|(c, _)| **c > 0)
        .map(|(c, x)| *c as f64 * x)
        .sum::<f64>()
        / n as f64;
    (n as f64).sqrt() * (pn - model.mean(f))
}

/// `sup_g |nu_n(g)|` per replicate.
pub fn simulate_sup(config: &SimulationConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let model = EvalModel::new(&config.class, 0)?;
    let n = config.n;
    Ok(run_replicates(config.seed, config.replicates, |rng| {
        let counts = cell_counts(&model, n, rng);
        model
            .functions()
            .iter()
            .fold(0.0_f64, |m, g| m.max(nu(&model, &counts, n, g).abs()))
    }))
}

/// Exact two-sided Clopper-Pearson interval for `k` successes in `r` trials.
pub fn clopper_pearson(k: u64, r: u64, level: f64) -> (f64, f64) {
    let alpha = 1.0 - level;
    let (kf, rf) = (k as f64, r as f64);
    // x with I_x(a, b) = target, by bisection (I_x is increasing in x)
    let inv = |a: f64, b: f64, target: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if beta_reg(a, b, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let lo = if k == 0 { 0.0 } else { inv(kf, rf - kf + 1.0, alpha / 2.0) };
    let hi = if k == r { 1.0 } else { inv(kf + 1.0, rf - kf, 1.0 - alpha / 2.0) };
    (lo, hi)
}

/// Confidence level of the reported intervals.
pub const CI_LEVEL: f64 = 0.99;

/// One tail check: exceedances of `threshold` against `bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub threshold: f64,
    pub bound: f64,
    pub exceedances: u64,
    pub freq: f64,
    /// `sqrt(bound (1 - bound) / R)`, the binomial standard error at the bound.
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// The whole interval lies above the bound.
    pub refuted: bool,
    /// `freq <= bound + 3 stderr`.
    pub within_screen: bool,
}

/// Monte Carlo mean against a one-sided upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRow {
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `mean + 3 stderr <= bound`.
    pub holds: bool,
}

impl ExpectationRow {
    pub fn one_sided(samples: &[f64], bound: f64) -> Self {
        let (mean, stderr) = mean_stderr(samples);
        Self {
            mean,
            stderr,
            bound,
            holds: mean + 3.0 * stderr <= bound,
        }
    }
}

pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub replicates: u64,
    pub rows: Vec<TailRow>,
    pub expectation: Option<ExpectationRow>,
}

impl TailReport {
    pub fn refuted(&self) -> bool {
        self.rows.iter().any(|r| r.refuted)
    }

    pub fn within_screen(&self) -> bool {
        self.rows.iter().all(|r| r.within_screen)
    }

    /// Columns `t, threshold, prob_cap, mc_freq, ci_lo, ci_hi`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("t\tthreshold\tprob_cap\tmc_freq\tci_lo\tci_hi\n");
        for r in &self.rows {
            let cols = [r.t, r.threshold, r.bound, r.freq, r.ci_lo, r.ci_hi];
            out.push_str(&cols.map(fmt_sig9).join("\t"));
            out.push('\n');
        }
        out
    }

    /// Plot data: `t`, `log_freq`, `log_bound` (natural logs, `-inf` for
    /// zero frequency).
    pub fn plot_tsv(&self) -> String {
        let mut out = String::from("t\tlog_freq\tlog_bound\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                fmt_sig9(r.t),
                fmt_sig9(r.freq.ln()),
                fmt_sig9(r.bound.ln())
            ));
        }
        out
    }
}

/// Exceedance frequencies of `{x >= threshold}` for each bound.
pub fn tail_report(samples: &[f64], bounds: &[TailBound]) -> TailReport {
    let r = samples.len() as u64;
    let rows = bounds
        .iter()
        .map(|b| {
            let k = samples.iter().filter(|&&x| x >= b.threshold).count() as u64;
            let freq = k as f64 / r as f64;
            let stderr = (b.prob_bound * (1.0 - b.prob_bound) / r as f64).sqrt();
            let (ci_lo, ci_hi) = clopper_pearson(k, r, CI_LEVEL);
            TailRow {
                t: b.t,
                threshold: b.threshold,
                bound: b.prob_bound,
                exceedances: k,
                freq,
                stderr,
                ci_lo,
                ci_hi,
                refuted: ci_lo > b.prob_bound,
                within_screen: freq <= b.prob_bound + 3.0 * stderr,
            }
        })
        .collect();
    TailReport {
        replicates: r,
        rows,
        expectation: None,
    }
}

/// Simulates `sup |nu_n|` and reports exceedances of `threshold(t)` for
/// each `t` on the grid.
pub fn mc_tail_report<F>(config: &SimulationConfig, threshold: F) -> Result<TailReport>
where
    F: Fn(f64) -> Result<TailBound>,
{
    let samples = simulate_sup(config)?;
    let bounds = config.t_grid.iter().map(|&t| threshold(t)).collect::<Result<Vec<_>>>()?;
    Ok(tail_report(&samples, &bounds))
}

/// Outcome of [`pathwise_chain_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckReport {
    pub replicates: u64,
    /// Function-replicate pairs checked.
    pub checks: u64,
    pub violations: u64,
    pub delta: f64,
    /// Largest `|nu_n(g)| - sum_branch W`, the smallest `delta` that would
    /// have sufficed.
    pub max_excess: f64,
}

/// Evaluates `|nu_n(g)| <= sum_{s} W_{j_s} + delta` along each member's
/// branch on every simulated dataset, with the build's `delta`.
pub fn pathwise_chain_check(build: &TruncatedChainBuild, config: &SimulationConfig) -> Result<ChainCheckReport> {
    pathwise_chain_check_with(build, config, build.cert.delta)
}

/// As [`pathwise_chain_check`] with `delta` replaced (negative controls).
pub fn pathwise_chain_check_with(
    build: &TruncatedChainBuild,
    config: &SimulationConfig,
    delta: f64,
) -> Result<ChainCheckReport> {
    config.validate()?;
    if config.n != build.n {
        return Err(invalid(
            "n",
            format!("config has n = {}, chain was built for n = {}", config.n, build.n),
        ));
    }
    let model = &build.model;
    let check_model = EvalModel::new(&config.class, model.resolution().unwrap_or(0))?;
    if check_model != *model {
        return Err(invalid("class", "chain was built for a different class"));
    }
    let n = config.n;
    let branches: Vec<Vec<usize>> = (0..model.functions().len()).map(|g| build.branch_of(g)).collect();
    let per_rep = run_replicates(config.seed, config.replicates, |rng| {
        let counts = cell_counts(model, n, rng);
        let w: Vec<f64> = build
            .nodes
            .iter()
            .map(|node| {
                nu(model, &counts, n, &node.increment).abs() + nu(model, &counts, n, &node.remainder).abs()
            })
            .collect();
        let mut violations = 0u64;
        let mut max_excess = f64::NEG_INFINITY;
        for (g, f) in model.functions().iter().enumerate() {
            let lhs = nu(model, &counts, n, f).abs();
            let chain: f64 = branches[g].iter().map(|&j| w[j - 1]).sum();
            max_excess = max_excess.max(lhs - chain);
            if lhs > chain + delta + 1e-9 * (1.0 + chain + delta) {
                violations += 1;
            }
        }
        (violations, max_excess)
    });
    Ok(ChainCheckReport {
        replicates: config.replicates,
        checks: config.replicates * model.functions().len() as u64,
        violations: per_rep.iter().map(|r| r.0).sum(),
        delta,
        max_excess: per_rep.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
    })
}
