//! One-shot verification run over every Monte Carlo check, with the resolved
//! config embedded so the run can be replayed.

use serde::{Deserialize, Serialize};

use crate::class::{EvalModel, FunctionClass};
use crate::distribution::DistributionSpec;
use crate::ep_bounds::{deviation_threshold, DeviationForm};
use crate::error::Result;
use crate::experiments::{ep_input, run_chain_check, run_verify, ChainCheckConfig, Experiment, VerifyConfig};
use crate::ep_bounds::massart_threshold;
use crate::numeric::fmt_sig9;
use crate::orlicz::TailBound;
use crate::sim::{ChainCheckReport, TailReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub seed: u64,
    /// Replicates for scalar tail checks.
    pub replicates_scalar: u64,
    /// Replicates for empirical-process suprema.
    pub replicates_process: u64,
    /// Datasets for the pathwise chain check.
    pub chain_replicates: u64,
    pub n: u64,
    pub class: FunctionClass,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "S")]
    pub depth: usize,
    pub t_grid: Vec<f64>,
    /// Massart's `eps` in the comparator rows.
    pub massart_eps: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            replicates_scalar: 10_000,
            replicates_process: 2_000,
            chain_replicates: 100,
            n: 100,
            class: FunctionClass::uniform_indicators(256),
            k: 1.0,
            depth: 3,
            t_grid: vec![0.5, 1.0, 2.0],
            massart_eps: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedTail {
    pub name: String,
    pub report: TailReport,
}

/// Massart's threshold next to the entropy deviation threshold at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparatorRow {
    pub t: f64,
    pub massart: TailBound,
    pub entropy: TailBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ReportConfig,
    pub tails: Vec<NamedTail>,
    pub chain: ChainCheckReport,
    pub comparator: Vec<ComparatorRow>,
    /// No refutation flag and no chain violation.
    pub ok: bool,
}

impl Report {
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# config {}\n",
            serde_json::to_string(&self.config).expect("json")
        );
        for t in &self.tails {
            out.push_str(&format!("# section {}\n", t.name));
            out.push_str(&t.report.to_tsv());
            if let Some(e) = t.report.expectation {
                out.push_str(&format!(
                    "# expectation mean={} stderr={} bound={} holds={}\n",
                    fmt_sig9(e.mean),
                    fmt_sig9(e.stderr),
                    fmt_sig9(e.bound),
                    e.holds
                ));
            }
        }
        out.push_str("# section chaincheck\nreplicates\tchecks\tviolations\tdelta\tmax_excess\n");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            self.chain.replicates,
            self.chain.checks,
            self.chain.violations,
            fmt_sig9(self.chain.delta),
            fmt_sig9(self.chain.max_excess)
        ));
        out.push_str("# section massart-comparator\nt\tmassart\tmassart_cap\tentropy\tentropy_cap\n");
        for r in &self.comparator {
            let cols = [
                r.t,
                r.massart.threshold,
                r.massart.prob_bound,
                r.entropy.threshold,
                r.entropy.prob_bound,
            ];
            out.push_str(&cols.map(fmt_sig9).join("\t"));
            out.push('\n');
        }
        out.push_str(&format!("# ok {}\n", self.ok));
        out
    }
}

pub fn run_report(config: &ReportConfig) -> Result<Report> {
    let verify = |name: &str, replicates: u64, experiment: Experiment| -> Result<NamedTail> {
        let report = run_verify(&VerifyConfig {
            seed: config.seed,
            replicates,
            t_grid: config.t_grid.clone(),
            experiment,
        })?;
        Ok(NamedTail {
            name: name.to_string(),
            report,
        })
    };
    let normal = DistributionSpec::StandardNormal;
    let mut tails = Vec::new();
    for l in [0.1, 1.0] {
        tails.push(verify(
            &format!("psi-prob normal L={l}"),
            config.replicates_scalar,
            Experiment::PsiProb { dist: normal.clone(), l },
        )?);
    }
    tails.push(verify(
        "bernstein centered-exponential n=20",
        config.replicates_scalar,
        Experiment::Bernstein {
            dist: DistributionSpec::CenteredExponential { rate: 1.0 },
            sigma: 1.0,
            k: 1.0,
            n: 20,
        },
    )?);
    tails.push(verify(
        "finite-max normal p=10",
        config.replicates_scalar,
        Experiment::FiniteMax { dist: normal, l: 0.0, p: 10 },
    )?);
    let ep = verify(
        &format!("empirical-process n={}", config.n),
        config.replicates_process,
        Experiment::EmpiricalProcess {
            n: config.n,
            k: config.k,
            class: config.class.clone(),
            s_max: None,
            form: DeviationForm::Proof,
        },
    )?;

    let input = ep_input(config.n, config.k, &config.class, None)?;
    let model = EvalModel::new(&config.class, 0)?;
    let k_bound = model
        .functions()
        .iter()
        .flat_map(|f| f.iter().zip(model.weights()).filter(|(_, w)| **w > 0.0).map(|(x, _)| x.abs()))
        .fold(0.0, f64::max);
    let e_sup = ep.report.expectation.map(|e| e.mean).unwrap_or(0.0);
    let comparator = config
        .t_grid
        .iter()
        .map(|&t| {
            Ok(ComparatorRow {
                t,
                massart: massart_threshold(e_sup, k_bound, config.n, config.massart_eps, t)?,
                entropy: deviation_threshold(&input, t)?.tail(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    tails.push(ep);

    let (_, chain) = run_chain_check(&ChainCheckConfig {
        seed: config.seed,
        replicates: config.chain_replicates,
        n: config.n,
        class: config.class.clone(),
        depth: config.depth,
        k: config.k,
        eps: 0.0,
        variant: Default::default(),
        delta_scale: 1.0,
    })?;
    let ok = tails.iter().all(|t| !t.report.refuted()) && chain.violations == 0;
    Ok(Report {
        config: config.clone(),
        tails,
        chain,
        comparator,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_report_runs_clean() {
        let cfg = ReportConfig {
            replicates_scalar: 500,
            replicates_process: 100,
            chain_replicates: 5,
            class: FunctionClass::uniform_indicators(32),
            depth: 2,
            ..Default::default()
        };
        let r = run_report(&cfg).unwrap();
        assert!(r.ok);
        assert_eq!(r.tails.len(), 5);
        let tsv = r.to_tsv();
        assert!(tsv.starts_with("# config {"));
        assert!(tsv.contains("# section massart-comparator"));
    }
}
