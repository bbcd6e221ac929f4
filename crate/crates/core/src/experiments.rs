//! Ready-made Monte Carlo checks of each tail bound, driven by serializable
//! configs so that every run can be replayed from its JSON.

use serde::{Deserialize, Serialize};

use crate::bernstein::{bernstein_tail, check_bernstein, BernsteinProfile, DEFAULT_M_MAX};
use crate::bracketing::{
    bracket_ladder, build_tree_chain_with, entropy_profile, generalized_brackets, ChainOptions,
    EntropyProfile, GeneralizedMode, LabelVariant, TruncatedChainBuild,
};
use crate::class::{EvalModel, FunctionClass};
use crate::distribution::DistributionSpec;
use crate::ep_bounds::{
    default_s_max, deviation_threshold_with, expectation_bound, truncation_levels, DeviationForm,
    EpBoundInput,
};
use crate::error::{invalid, Result};
use crate::finite_max::{max_deviation_threshold, max_expectation_bound, MaxBoundInput};
use crate::orlicz::{orlicz_norm_quadrature, OrliczParams};
use crate::sim::{
    pathwise_chain_check_with, simulate_draws, simulate_finite_max, simulate_normalized_sum,
    simulate_sup, tail_report, ChainCheckReport, ExpectationRow, SimulationConfig, TailReport,
};

/// Entropy profile of a class to depth `depth`. Indicator classes use the
/// quantile construction's counts `4^s` for `s >= 1`; finite classes use the
/// greedy ladder. Level 0 is the generalized bracketing set at `K`.
pub fn class_entropy_profile(
    class: &FunctionClass,
    k: f64,
    m_max: u32,
    depth: usize,
    mode: GeneralizedMode,
) -> Result<EntropyProfile> {
    let model = EvalModel::new(class, 0)?;
    if class.is_indicators() {
        let n0 = generalized_brackets(&model, k, m_max, mode)?.count() as u64;
        let mut counts = EntropyProfile::indicators(depth)?.ntilde;
        counts[0] = n0;
        EntropyProfile::from_counts(&counts)
    } else {
        entropy_profile(&bracket_ladder(&model, k, m_max, depth, mode)?)
    }
}

/// The quantity simulated and the bound it is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// `|X|` against `tau (sqrt(t) + L t/2)`, with `tau` the quadrature norm.
    PsiProb {
        dist: DistributionSpec,
        #[serde(rename = "L")]
        l: f64,
    },
    /// `|n^{-1/2} sum X_i|` against `sigma sqrt(2t) + K t / sqrt(n)`.
    Bernstein {
        dist: DistributionSpec,
        sigma: f64,
        #[serde(rename = "K")]
        k: f64,
        n: u64,
    },
    /// `max_{j<=p} |X_j|` against the finite-maximum deviation threshold,
    /// plus the expectation bound.
    FiniteMax {
        dist: DistributionSpec,
        #[serde(rename = "L")]
        l: f64,
        p: u64,
    },
    /// `sup_g |nu_n(g)|` against the entropy deviation threshold, plus
    /// `min_S E_S` for the mean.
    EmpiricalProcess {
        n: u64,
        #[serde(rename = "K")]
        k: f64,
        class: FunctionClass,
        #[serde(default, rename = "S_max")]
        s_max: Option<usize>,
        #[serde(default)]
        form: DeviationForm,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub replicates: u64,
    pub t_grid: Vec<f64>,
    pub experiment: Experiment,
}

impl VerifyConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates", "need R >= 1"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(invalid("t_grid", "need a nonempty grid of positive reals"));
        }
        Ok(())
    }
}

pub fn ep_input(n: u64, k: f64, class: &FunctionClass, s_max: Option<usize>) -> Result<EpBoundInput> {
    let depth = s_max.unwrap_or_else(|| default_s_max(n));
    let profile = class_entropy_profile(class, k, DEFAULT_M_MAX, depth, GeneralizedMode::Partition)?;
    EpBoundInput::new(n, k, profile, Some(depth))
}

pub fn run_verify(config: &VerifyConfig) -> Result<TailReport> {
    config.validate()?;
    let (seed, r, grid) = (config.seed, config.replicates, &config.t_grid);
    match &config.experiment {
        Experiment::PsiProb { dist, l } => {
            let tau = orlicz_norm_quadrature(dist, *l)?;
            let statement = OrliczParams::new(*l, tau)?.tail_statement();
            let samples: Vec<f64> = simulate_draws(seed, r, dist)?.iter().map(|x| x.abs()).collect();
            let bounds: Vec<_> = grid.iter().map(|&t| statement.at(t)).collect();
            Ok(tail_report(&samples, &bounds))
        }
        Experiment::Bernstein { dist, sigma, k, n } => {
            let check = check_bernstein(std::slice::from_ref(dist), *sigma, *k, DEFAULT_M_MAX)?;
            if !check.holds {
                return Err(invalid(
                    "experiment",
                    format!("moment condition fails at m = {}", check.worst_m),
                ));
            }
            let profile = BernsteinProfile::new(*sigma, *k, *n)?;
            let samples = simulate_normalized_sum(seed, r, dist, *n)?;
            let bounds = grid
                .iter()
                .map(|&t| bernstein_tail(&profile, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(tail_report(&samples, &bounds))
        }
        Experiment::FiniteMax { dist, l, p } => {
            let tau = orlicz_norm_quadrature(dist, *l)?;
            let input = MaxBoundInput::new(OrliczParams::new(*l, tau)?, *p)?;
            let samples = simulate_finite_max(seed, r, dist, *p)?;
            let bounds = grid
                .iter()
                .map(|&t| max_deviation_threshold(&input, t))
                .collect::<Result<Vec<_>>>()?;
            let mut report = tail_report(&samples, &bounds);
            report.expectation = Some(ExpectationRow::one_sided(&samples, max_expectation_bound(&input)?));
            Ok(report)
        }
        Experiment::EmpiricalProcess {
            n,
            k,
            class,
            s_max,
            form,
        } => {
            let input = ep_input(*n, *k, class, *s_max)?;
            let sim = SimulationConfig {
                seed,
                replicates: r,
                n: *n,
                class: class.clone(),
                t_grid: grid.clone(),
            };
            let samples = simulate_sup(&sim)?;
            let bounds = grid
                .iter()
                .map(|&t| Ok(deviation_threshold_with(&input, t, *form)?.tail()))
                .collect::<Result<Vec<_>>>()?;
            let mut report = tail_report(&samples, &bounds);
            report.expectation = Some(ExpectationRow::one_sided(&samples, expectation_bound(&input)?.best));
            Ok(report)
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A chain built from the class's bracket ladder and checked pathwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainCheckConfig {
    pub seed: u64,
    pub replicates: u64,
    pub n: u64,
    pub class: FunctionClass,
    #[serde(rename = "S")]
    pub depth: usize,
    #[serde(rename = "K")]
    pub k: f64,
    /// Truncation-level parameter; 0 drops the `1/eps` term.
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub variant: LabelVariant,
    /// Multiplies the certificate's `delta` in the check (negative controls).
    #[serde(default = "one")]
    pub delta_scale: f64,
}

pub fn build_chain(config: &ChainCheckConfig) -> Result<TruncatedChainBuild> {
    let model = EvalModel::new(&config.class, config.depth)?;
    let levels = bracket_ladder(&model, config.k, DEFAULT_M_MAX, config.depth, GeneralizedMode::Partition)?;
    let profile = entropy_profile(&levels)?;
    let input = EpBoundInput::new(config.n, config.k, profile.clone(), Some(config.depth))?;
    let k_levels = truncation_levels(&input, config.depth, config.eps)?;
    build_tree_chain_with(
        &model,
        &levels,
        &profile,
        &k_levels,
        config.n,
        ChainOptions {
            variant: config.variant,
            m_max: DEFAULT_M_MAX,
        },
    )
}

pub fn run_chain_check(config: &ChainCheckConfig) -> Result<(TruncatedChainBuild, ChainCheckReport)> {
    if !(config.delta_scale.is_finite() && config.delta_scale >= 0.0) {
        return Err(invalid("delta_scale", "need a finite nonnegative scale"));
    }
    let build = build_chain(config)?;
    let sim = SimulationConfig {
        seed: config.seed,
        replicates: config.replicates,
        n: config.n,
        class: config.class.clone(),
        t_grid: vec![1.0],
    };
    let report = pathwise_chain_check_with(&build, &sim, build.cert.delta * config.delta_scale)?;
    Ok((build, report))
}
