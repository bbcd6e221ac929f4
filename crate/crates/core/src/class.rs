//! Finite evaluation models of function classes.
//!
//! Every function handled by the bracketing code is constant on a finite set
//! of cells `(e_{i-1}, e_i]` of the probability scale `u = F(x)` of the design
//! law, with `e_{-1} = 0` and last edge `1`. A cell's probability is the
//! length of its interval, so `P f`, `||f||` and all moments are exact finite
//! sums. An observation `X = Q(U)` lands in the first cell whose edge is at
//! least `U`.

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{invalid, Error, Result};

/// Relative slack on the normalization `sup ||g|| <= 1`.
const NORM_SLACK: f64 = 1e-12;

/// A finite class of functions on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionClass {
    /// `p` functions given by their values on a finite design support.
    FiniteMatrix {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        support: Vec<f64>,
        /// Design probabilities of the support points; uniform when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        /// `values[g][i]` is the value of function `g` at `support[i]`.
        values: Vec<Vec<f64>>,
    },
    /// `x -> 1{x <= q}` for each threshold `q`, under a continuous design law.
    HalfLineIndicators {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        design: DistributionSpec,
        thresholds: Thresholds,
    },
}

/// Threshold rule for half-line indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Thresholds {
    Explicit(Vec<f64>),
    /// The design quantiles `Q(j/k)`, `j = 0..=k`.
    QuantileGrid { quantile_grid: usize },
}

impl FunctionClass {
    /// Half-line indicators at `j/k`, `j = 0..=k`, over `Uniform(0, 1)`.
    pub fn uniform_indicators(k: usize) -> Self {
        FunctionClass::HalfLineIndicators {
            p: None,
            design: DistributionSpec::Uniform { a: 0.0, b: 1.0 },
            thresholds: Thresholds::Explicit((0..=k).map(|j| j as f64 / k as f64).collect()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FunctionClass::FiniteMatrix { values, .. } => values.len(),
            FunctionClass::HalfLineIndicators { thresholds, .. } => match thresholds {
                Thresholds::Explicit(q) => q.len(),
                Thresholds::QuantileGrid { quantile_grid } => quantile_grid + 1,
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_indicators(&self) -> bool {
        matches!(self, FunctionClass::HalfLineIndicators { .. })
    }

    /// Probability levels `F(q_j)` of the thresholds, for indicator classes.
    pub fn indicator_levels(&self) -> Option<Vec<f64>> {
        match self {
            FunctionClass::HalfLineIndicators {
                design, thresholds, ..
            } => Some(match thresholds {
                Thresholds::Explicit(q) => q.iter().map(|&x| design.cdf(x)).collect(),
                Thresholds::QuantileGrid { quantile_grid } => (0..=*quantile_grid)
                    .map(|j| j as f64 / *quantile_grid as f64)
                    .collect(),
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionClass::FiniteMatrix {
                p,
                support,
                weights,
                values,
            } => {
                if support.is_empty() {
                    return Err(invalid("support", "empty support"));
                }
                if values.is_empty() {
                    return Err(invalid("values", "class has no functions"));
                }
                if let Some(p) = p {
                    if *p != values.len() {
                        return Err(invalid("p", format!("p = {p} but {} rows given", values.len())));
                    }
                }
                if let Some(w) = weights {
                    if w.len() != support.len() {
                        return Err(invalid("weights", "length differs from support"));
                    }
                    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                        return Err(invalid("weights", "weights must be finite and >= 0"));
                    }
                    let total: f64 = w.iter().sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(invalid("weights", format!("weights sum to {total}")));
                    }
                }
                for (g, row) in values.iter().enumerate() {
                    if row.len() != support.len() {
                        return Err(invalid(
                            "values",
                            format!("row {g} has {} entries, support has {}", row.len(), support.len()),
                        ));
                    }
                    if row.iter().any(|x| !x.is_finite()) {
                        return Err(invalid("values", format!("row {g} has a non-finite entry")));
                    }
                }
                Ok(())
            }
            FunctionClass::HalfLineIndicators {
                p,
                design,
                thresholds,
            } => {
                design.validate()?;
                if design.is_discrete() {
                    return Err(Error::Unsupported(
                        "half-line indicators need a continuous design law".into(),
                    ));
                }
                match thresholds {
                    Thresholds::Explicit(q) => {
                        if q.is_empty() {
                            return Err(invalid("thresholds", "no thresholds"));
                        }
                        if q.iter().any(|x| x.is_nan()) {
                            return Err(invalid("thresholds", "NaN threshold"));
                        }
                    }
                    Thresholds::QuantileGrid { quantile_grid } => {
                        if *quantile_grid == 0 {
                            return Err(invalid("quantile_grid", "need k >= 1"));
                        }
                    }
                }
                if let Some(p) = p {
                    if *p != self.len() {
                        return Err(invalid("p", format!("p = {p} but class has {}", self.len())));
                    }
                }
                Ok(())
            }
        }
    }
}

/// A class and auxiliary functions evaluated on finitely many cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalModel {
    edges: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<Vec<f64>>,
    /// Dyadic resolution: every `k 4^{-s}` with `s <= resolution` is an edge
    /// (indicator classes only).
    resolution: Option<usize>,
}

impl EvalModel {
    /// Builds the cell model. Indicator classes get every dyadic cut
    /// `k 4^{-s}`, `s <= resolution`, as a cell edge so that their brackets
    /// up to that level are exact cell functions.
    pub fn new(class: &FunctionClass, resolution: usize) -> Result<Self> {
        class.validate()?;
        let model = match class {
            FunctionClass::FiniteMatrix {
                support,
                weights,
                values,
                ..
            } => {
                let w = weights
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / support.len() as f64; support.len()]);
                let mut edges = Vec::with_capacity(w.len());
                let mut acc = 0.0;
                for x in &w {
                    acc += x;
                    edges.push(acc);
                }
                *edges.last_mut().expect("nonempty") = 1.0;
                Self {
                    edges,
                    weights: w,
                    values: values.clone(),
                    resolution: None,
                }
            }
            FunctionClass::HalfLineIndicators { .. } => {
                if resolution > 15 {
                    return Err(invalid("resolution", "dyadic resolution above 15 is not supported"));
                }
                let levels = class.indicator_levels().expect("indicator class");
                let cuts = 1usize << (2 * resolution);
                let mut edges: Vec<f64> = (1..=cuts).map(|k| k as f64 / cuts as f64).collect();
                edges.extend(levels.iter().copied());
                edges.sort_by(f64::total_cmp);
                edges.dedup();
                let weights = cell_weights(&edges);
                let values = levels
                    .iter()
                    .map(|&a| edges.iter().map(|&e| if e <= a { 1.0 } else { 0.0 }).collect())
                    .collect();
                Self {
                    edges,
                    weights,
                    values,
                    resolution: Some(resolution),
                }
            }
        };
        let worst = (0..model.values.len())
            .map(|g| model.norm(&model.values[g]))
            .fold(0.0, f64::max);
        if worst > 1.0 + NORM_SLACK {
            return Err(invalid(
                "class",
                format!("normalization sup ||g|| <= 1 fails: max norm {worst}"),
            ));
        }
        Ok(model)
    }

    pub fn cells(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Class members as cell vectors.
    pub fn functions(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn resolution(&self) -> Option<usize> {
        self.resolution
    }

    /// Cell containing the observation with probability level `u` in `(0, 1]`.
    pub fn cell_of(&self, u: f64) -> usize {
        self.edges
            .partition_point(|&e| e < u)
            .min(self.edges.len() - 1)
    }

    /// Cell vector of `x -> 1{F(x) <= level}`.
    pub fn indicator(&self, level: f64) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&e| if e <= level { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    pub fn abs_moment(&self, f: &[f64], m: u32) -> f64 {
        f.iter()
            .zip(&self.weights)
            .map(|(x, w)| if *w == 0.0 { 0.0 } else { w * x.abs().powi(m as i32) })
            .sum()
    }

    /// `(P f^2)^{1/2}`.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.abs_moment(f, 2).sqrt()
    }

    /// Pointwise `a <= b` on cells of positive probability.
    pub fn le(&self, a: &[f64], b: &[f64]) -> bool {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .all(|((x, y), w)| *w == 0.0 || x <= y)
    }
}

fn cell_weights(edges: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    edges
        .iter()
        .map(|&e| {
            let w = e - prev;
            prev = e;
            w
        })
        .collect()
}
