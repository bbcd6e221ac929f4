//! Finite trees with labeled nodes and the bounds for chaining and generic
//! chaining along them.
//!
//! A tree has generations `G_0, ..., G_S` of dense node ids `1..=N` and a
//! parent map sending each node of `G_s` (`s >= 1`) into `G_{s-1}`. A branch
//! is the path `j_0, ..., j_S` that ends at a node of `G_S`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, nonnegative, positive, Error, Result};
use crate::finite_max::ShiftedNormStatement;
use crate::orlicz::{OrliczParams, TailBound, PROB_TO_NORM_FACTOR};

/// Relative slack on the per-node norm condition.
pub const NORM_SLACK: f64 = 1e-12;

/// Generations and parent map. Construction does not validate, so malformed
/// trees can be inspected with [`validate_tree`]; bound evaluators call
/// [`FiniteTree::check`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTree {
    depth: usize,
    generations: Vec<Vec<usize>>,
    parent: BTreeMap<usize, usize>,
    generation_of: BTreeMap<usize, usize>,
}

impl FiniteTree {
    pub fn from_parts(
        depth: usize,
        generations: Vec<Vec<usize>>,
        parent: BTreeMap<usize, usize>,
    ) -> Self {
        let mut generation_of = BTreeMap::new();
        for (s, gen) in generations.iter().enumerate() {
            for &j in gen {
                generation_of.entry(j).or_insert(s);
            }
        }
        Self {
            depth,
            generations,
            parent,
            generation_of,
        }
    }

    /// Like [`from_parts`](Self::from_parts), rejecting invalid trees.
    pub fn new(
        depth: usize,
        generations: Vec<Vec<usize>>,
        parent: BTreeMap<usize, usize>,
    ) -> Result<Self> {
        let tree = Self::from_parts(depth, generations, parent);
        tree.check()?;
        Ok(tree)
    }

    /// Tree with the given generation sizes, ids assigned generation by
    /// generation, and the children of each generation split into contiguous
    /// blocks under consecutive parents.
    pub fn layered(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(invalid("sizes", "need at least one generation, all nonempty"));
        }
        let mut generations = Vec::with_capacity(sizes.len());
        let mut parent = BTreeMap::new();
        let mut next = 1;
        for (s, &size) in sizes.iter().enumerate() {
            let gen: Vec<usize> = (next..next + size).collect();
            if s > 0 {
                let prev: &Vec<usize> = &generations[s - 1];
                for (i, &j) in gen.iter().enumerate() {
                    parent.insert(j, prev[i * prev.len() / size]);
                }
            }
            next += size;
            generations.push(gen);
        }
        Self::new(sizes.len() - 1, generations, parent)
    }

    /// The depth `S`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn generations(&self) -> &[Vec<usize>] {
        &self.generations
    }

    pub fn parents(&self) -> &BTreeMap<usize, usize> {
        &self.parent
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent.get(&node).copied()
    }

    pub fn generation_of(&self, node: usize) -> Option<usize> {
        self.generation_of.get(&node).copied()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.generations.iter().map(Vec::len).collect()
    }

    pub fn node_count(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn end_nodes(&self) -> &[usize] {
        self.generations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// The branch `j_0, ..., j_S` ending at `end`.
    pub fn branch(&self, end: usize) -> Result<Vec<usize>> {
        let mut path = walk_up(&self.parent, end, self.depth);
        if path.len() != self.depth + 1 {
            return Err(Error::InvalidTree(format!(
                "branch of end node {end} has {} nodes, expected {}",
                path.len(),
                self.depth + 1
            )));
        }
        path.reverse();
        Ok(path)
    }

    pub fn check(&self) -> Result<()> {
        let report = validate_tree(self);
        if report.valid {
            Ok(())
        } else {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidTree(msgs.join("; ")))
        }
    }
}

/// Follows parents from `node` for at most `steps` steps (stopping early at a
/// missing parent). Returned leaf first.
fn walk_up(parent: &BTreeMap<usize, usize>, node: usize, steps: usize) -> Vec<usize> {
    let mut path = vec![node];
    let mut current = node;
    for _ in 0..steps {
        match parent.get(&current) {
            Some(&p) => {
                path.push(p);
                current = p;
            }
            None => break,
        }
    }
    path
}

/// One failed tree invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    DepthMismatch { declared: usize, generations: usize },
    EmptyGeneration { generation: usize },
    NotDisjoint { node: usize, first: usize, second: usize },
    IdOutOfRange { node: usize, n: usize },
    MissingId { node: usize },
    MissingParent { node: usize, generation: usize },
    ParentNotInPreviousGeneration {
        node: usize,
        generation: usize,
        parent: usize,
        parent_generation: Option<usize>,
    },
    RootHasParent { node: usize, parent: usize },
    UnknownNodeInParentMap { node: usize },
    BranchLength { end_node: usize, nodes: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DepthMismatch { declared, generations } => write!(
                f,
                "depth mismatch: S = {declared} but {generations} generations listed"
            ),
            Violation::EmptyGeneration { generation } => {
                write!(f, "generation {generation} is empty")
            }
            Violation::NotDisjoint { node, first, second } => write!(
                f,
                "generations not disjoint: node {node} in G_{first} and G_{second}"
            ),
            Violation::IdOutOfRange { node, n } => {
                write!(f, "node id {node} outside 1..={n}")
            }
            Violation::MissingId { node } => write!(f, "node id {node} missing from generations"),
            Violation::MissingParent { node, generation } => {
                write!(f, "node {node} in G_{generation} has no parent")
            }
            Violation::ParentNotInPreviousGeneration {
                node,
                generation,
                parent,
                parent_generation,
            } => {
                let where_ = match parent_generation {
                    Some(g) => format!("G_{g}"),
                    None => "no generation".to_string(),
                };
                write!(
                    f,
                    "parent not in previous generation: node {node} in G_{generation} has parent {parent} in {where_}"
                )
            }
            Violation::RootHasParent { node, parent } => {
                write!(f, "node {node} in G_0 has a parent ({parent})")
            }
            Violation::UnknownNodeInParentMap { node } => {
                write!(f, "parent map mentions unknown node {node}")
            }
            Violation::BranchLength {
                end_node,
                nodes,
                expected,
            } => write!(
                f,
                "branch of end node {end_node} has {nodes} nodes, expected {expected}"
            ),
        }
    }
}

/// All violations found, each naming the offending node or generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

/// Checks every tree invariant and lists the violations; never fails.
pub fn validate_tree(tree: &FiniteTree) -> ValidationReport {
    let mut violations = Vec::new();
    let gens = &tree.generations;
    if gens.len() != tree.depth + 1 {
        violations.push(Violation::DepthMismatch {
            declared: tree.depth,
            generations: gens.len(),
        });
    }
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    for (s, gen) in gens.iter().enumerate() {
        if gen.is_empty() {
            violations.push(Violation::EmptyGeneration { generation: s });
        }
        for &j in gen {
            if let Some(&first) = seen.get(&j) {
                violations.push(Violation::NotDisjoint {
                    node: j,
                    first,
                    second: s,
                });
            } else {
                seen.insert(j, s);
            }
        }
    }
    // ids must be exactly 1..=N for N distinct nodes
    let n = seen.len();
    for &j in seen.keys() {
        if j == 0 || j > n {
            violations.push(Violation::IdOutOfRange { node: j, n });
        }
    }
    for id in 1..=n {
        if !seen.contains_key(&id) {
            violations.push(Violation::MissingId { node: id });
        }
    }
    for &child in tree.parent.keys() {
        if !seen.contains_key(&child) {
            violations.push(Violation::UnknownNodeInParentMap { node: child });
        }
    }
    for (s, gen) in gens.iter().enumerate() {
        for &j in gen {
            if seen.get(&j) != Some(&s) {
                continue;
            }
            match (s, tree.parent.get(&j)) {
                (0, Some(&p)) => violations.push(Violation::RootHasParent { node: j, parent: p }),
                (0, None) => {}
                (_, None) => violations.push(Violation::MissingParent {
                    node: j,
                    generation: s,
                }),
                (_, Some(&p)) => {
                    let pg = seen.get(&p).copied();
                    if pg != Some(s - 1) {
                        violations.push(Violation::ParentNotInPreviousGeneration {
                            node: j,
                            generation: s,
                            parent: p,
                            parent_generation: pg,
                        });
                    }
                }
            }
        }
    }
    if let Some(last) = gens.last() {
        let expected = gens.len();
        for &end in last {
            let path = walk_up(&tree.parent, end, expected);
            let ok = path.len() == expected
                && path
                    .iter()
                    .rev()
                    .enumerate()
                    .all(|(s, j)| seen.get(j) == Some(&s));
            if !ok {
                violations.push(Violation::BranchLength {
                    end_node: end,
                    nodes: path.len().min(expected + 1),
                    expected,
                });
            }
        }
    }
    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

/// A tree with a norm bound `||W_j||_{Psi_{L_s}}` on every node `j` of `G_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTree {
    tree: FiniteTree,
    label_norm: BTreeMap<usize, f64>,
    ls: Vec<f64>,
}

impl LabeledTree {
    pub fn new(tree: FiniteTree, label_norm: BTreeMap<usize, f64>, ls: Vec<f64>) -> Result<Self> {
        tree.check()?;
        if ls.len() != tree.depth + 1 {
            return Err(invalid(
                "Ls",
                format!("need {} constants, got {}", tree.depth + 1, ls.len()),
            ));
        }
        for &l in &ls {
            nonnegative("Ls", l)?;
        }
        for gen in &tree.generations {
            for j in gen {
                match label_norm.get(j) {
                    Some(&v) => {
                        nonnegative("labels", v)?;
                    }
                    None => return Err(invalid("labels", format!("node {j} has no label"))),
                }
            }
        }
        Ok(Self {
            tree,
            label_norm,
            ls,
        })
    }

    /// Labels equal to `tau 2^{-s}` on generation `s`.
    pub fn uniform(tree: FiniteTree, tau: f64, ls: Vec<f64>) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (s, gen) in tree.generations.iter().enumerate() {
            for &j in gen {
                labels.insert(j, tau * 0.5f64.powi(s as i32));
            }
        }
        Self::new(tree, labels, ls)
    }

    pub fn tree(&self) -> &FiniteTree {
        &self.tree
    }

    pub fn label(&self, node: usize) -> f64 {
        self.label_norm[&node]
    }

    pub fn labels(&self) -> &BTreeMap<usize, f64> {
        &self.label_norm
    }

    pub fn ls(&self) -> &[f64] {
        &self.ls
    }
}

/// A labeled tree with scale `tau` and approximation error `delta`; valid when
/// every label on `G_s` is at most `tau 2^{-s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCertificate {
    pub labeled: LabeledTree,
    pub tau: f64,
    pub delta: f64,
}

impl ChainCertificate {
    pub fn new(labeled: LabeledTree, tau: f64, delta: f64) -> Result<Self> {
        positive("tau", tau)?;
        nonnegative("delta", delta)?;
        Ok(Self {
            labeled,
            tau,
            delta,
        })
    }

    /// Checks the per-node norm condition, naming the first violating node.
    pub fn check(&self) -> Result<()> {
        for (s, gen) in self.labeled.tree.generations.iter().enumerate() {
            let cap = self.tau * 0.5f64.powi(s as i32);
            for &j in gen {
                let v = self.labeled.label(j);
                if v > cap * (1.0 + NORM_SLACK) {
                    return Err(Error::Certificate {
                        node: j,
                        generation: s,
                        reason: format!("label norm {v} exceeds tau 2^-s = {cap}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `gamma` and the expectation bound `gamma + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBound {
    pub gamma: f64,
    pub expectation_bound: f64,
}

fn log_size(size: usize) -> f64 {
    (size as f64).ln_1p()
}

/// `tau sum_s 2^{-s} [sqrt(log(1+|G_s|)) + (L_s/2) log(1+|G_s|)]`.
fn gamma_of(tree: &FiniteTree, tau: f64, ls: &[f64]) -> f64 {
    tree.generations
        .iter()
        .zip(ls)
        .enumerate()
        .map(|(s, (gen, l))| {
            let h = log_size(gen.len());
            0.5f64.powi(s as i32) * (h.sqrt() + 0.5 * l * h)
        })
        .sum::<f64>()
        * tau
}

pub fn gamma_bound(cert: &ChainCertificate) -> Result<GammaBound> {
    cert.check()?;
    let gamma = gamma_of(&cert.labeled.tree, cert.tau, &cert.labeled.ls);
    Ok(GammaBound {
        gamma,
        expectation_bound: gamma + cert.delta,
    })
}

/// Branch-wise constants of generic chaining, maximized over end nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenericConstants {
    pub gamma1_star: f64,
    pub gamma2_star: f64,
    pub gamma_star: f64,
    pub tau_star: f64,
    #[serde(rename = "L_star")]
    pub l_star: f64,
}

#[derive(Clone, Copy)]
struct BranchSums {
    gamma1: f64,
    gamma2: f64,
    gamma: f64,
    tau: f64,
    l_tau: f64,
}

impl BranchSums {
    fn max(self, o: Self) -> Self {
        Self {
            gamma1: self.gamma1.max(o.gamma1),
            gamma2: self.gamma2.max(o.gamma2),
            gamma: self.gamma.max(o.gamma),
            tau: self.tau.max(o.tau),
            l_tau: self.l_tau.max(o.l_tau),
        }
    }

    const ZERO: Self = Self {
        gamma1: 0.0,
        gamma2: 0.0,
        gamma: 0.0,
        tau: 0.0,
        l_tau: 0.0,
    };
}

fn branch_sums(labeled: &LabeledTree, end: usize, logs: &[f64]) -> Result<BranchSums> {
    let branch = labeled.tree.branch(end)?;
    let mut sums = BranchSums::ZERO;
    for (s, j) in branch.into_iter().enumerate() {
        let norm = labeled.label(j);
        let h = logs[s];
        let l = labeled.ls[s];
        let weight = (1 + s) as f64;
        sums.gamma1 += norm * h.sqrt();
        sums.gamma2 += norm * l * h;
        sums.tau += norm * weight.sqrt();
        sums.l_tau += norm * weight * l;
    }
    sums.gamma = sums.gamma1 + 0.5 * sums.gamma2;
    Ok(sums)
}

/// Walks every branch and returns the maxima over end nodes, with
/// `L_* = (max_k sum_s norm (1+s) L_s) / tau_*`.
pub fn generic_constants(labeled: &LabeledTree) -> Result<GenericConstants> {
    let logs: Vec<f64> = labeled.tree.sizes().into_iter().map(log_size).collect();
    let sums = labeled
        .tree
        .end_nodes()
        .par_iter()
        .map(|&k| branch_sums(labeled, k, &logs))
        .try_reduce(|| BranchSums::ZERO, |a, b| Ok(a.max(b)))?;
    let l_star = if sums.tau > 0.0 {
        sums.l_tau / sums.tau
    } else if sums.l_tau == 0.0 {
        0.0
    } else {
        return Err(Error::DegenerateLabels { l_tau: sums.l_tau });
    };
    Ok(GenericConstants {
        gamma1_star: sums.gamma1,
        gamma2_star: sums.gamma2,
        gamma_star: sums.gamma,
        tau_star: sums.tau,
        l_star,
    })
}

fn check_constants(c: &GenericConstants) -> Result<()> {
    nonnegative("gamma_star", c.gamma_star)?;
    nonnegative("tau_star", c.tau_star)?;
    nonnegative("L_star", c.l_star)?;
    Ok(())
}

/// `gamma_* + delta + tau_* (1 + L_*/2) + tau_* (sqrt(t) + L_* t/2)`, cap `min(1, 2e^{-t})`.
pub fn generic_deviation_threshold(c: &GenericConstants, delta: f64, t: f64) -> Result<TailBound> {
    check_constants(c)?;
    nonnegative("delta", delta)?;
    positive("t", t)?;
    let shift = generic_shift(c, delta);
    let spread = c.tau_star * (t.sqrt() + 0.5 * c.l_star * t);
    Ok(TailBound::two_sided(t, shift + spread))
}

fn generic_shift(c: &GenericConstants, delta: f64) -> f64 {
    c.gamma_star + delta + c.tau_star * (1.0 + 0.5 * c.l_star)
}

/// Orlicz-norm form of the generic chaining deviation bound and the
/// expectation bound it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenericOrliczDeviation {
    pub statement: ShiftedNormStatement,
    pub expectation_bound: f64,
}

pub fn generic_orlicz_deviation(c: &GenericConstants, delta: f64) -> Result<GenericOrliczDeviation> {
    check_constants(c)?;
    nonnegative("delta", delta)?;
    let shift = generic_shift(c, delta);
    let params = OrliczParams {
        l: PROB_TO_NORM_FACTOR * c.l_star,
        tau: PROB_TO_NORM_FACTOR * c.tau_star,
    };
    let ln2 = std::f64::consts::LN_2;
    let expectation_bound = shift
        + PROB_TO_NORM_FACTOR
            * c.tau_star
            * (ln2.sqrt() + 0.5 * PROB_TO_NORM_FACTOR * c.l_star * ln2);
    Ok(GenericOrliczDeviation {
        statement: ShiftedNormStatement { shift, params },
        expectation_bound,
    })
}

/// The weighted sums `gamma_{1,0}`, `gamma_{2,0}` used with doubly exponential
/// generation sizes, and the resulting expectation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalagrandConstants {
    pub gamma_1_0: f64,
    pub gamma_2_0: f64,
    pub gamma_0: f64,
    /// `(3 + sqrt(3 log 2)) gamma_{1,0} + ((3 + 3 log 2)/2) gamma_{2,0} + delta`.
    pub expectation_bound: f64,
}

pub fn talagrand_constants(labeled: &LabeledTree, delta: f64) -> Result<TalagrandConstants> {
    nonnegative("delta", delta)?;
    let per_end = labeled
        .tree
        .end_nodes()
        .par_iter()
        .map(|&k| {
            let branch = labeled.tree.branch(k)?;
            let (mut g1, mut g2) = (0.0, 0.0);
            for (s, j) in branch.into_iter().enumerate() {
                let norm = labeled.label(j);
                let four_s = 4f64.powi(s as i32);
                g1 += norm * 2f64.powi(s as i32);
                g2 += norm * labeled.ls[s] * four_s;
            }
            Ok((g1, g2, g1 + 0.5 * g2))
        })
        .try_reduce(
            || (0.0, 0.0, 0.0),
            |a, b| Ok((a.0.max(b.0), a.1.max(b.1), a.2.max(b.2))),
        )?;
    let (g1, g2, g0) = per_end;
    let ln2 = std::f64::consts::LN_2;
    Ok(TalagrandConstants {
        gamma_1_0: g1,
        gamma_2_0: g2,
        gamma_0: g0,
        expectation_bound: (3.0 + (3.0 * ln2).sqrt()) * g1 + 0.5 * (3.0 + 3.0 * ln2) * g2 + delta,
    })
}

/// Deviation bound for a tree chain with uniform per-generation labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformTreeDeviation {
    pub gamma: f64,
    /// `sum_s 2^{-s} L_s (1+s) / 4`.
    #[serde(rename = "L")]
    pub l: f64,
    pub bound: TailBound,
}

/// `gamma + delta + 4 tau (1 + L/2) + 4 tau (sqrt(t) + L t/2)`, cap `min(1, 2e^{-t})`.
pub fn uniform_tree_deviation(cert: &ChainCertificate, t: f64) -> Result<UniformTreeDeviation> {
    positive("t", t)?;
    let g = gamma_bound(cert)?;
    let l = uniform_l(&cert.labeled.ls);
    let four_tau = 4.0 * cert.tau;
    let threshold = g.expectation_bound
        + four_tau * (1.0 + 0.5 * l)
        + four_tau * (t.sqrt() + 0.5 * l * t);
    Ok(UniformTreeDeviation {
        gamma: g.gamma,
        l,
        bound: TailBound::two_sided(t, threshold),
    })
}

/// `sum_s 2^{-s} L_s (1+s) / 4`.
pub fn uniform_l(ls: &[f64]) -> f64 {
    ls.iter()
        .enumerate()
        .map(|(s, l)| 0.5f64.powi(s as i32) * l * (1 + s) as f64)
        .sum::<f64>()
        / 4.0
}

/// `sum_{s=0}^{S} 2^{-s} sqrt(1+s)`, the ratio `tau_*/tau` for uniform labels.
pub fn uniform_tau_ratio(depth: usize) -> f64 {
    (0..=depth)
        .map(|s| 0.5f64.powi(s as i32) * ((1 + s) as f64).sqrt())
        .sum()
}

/// `sqrt(pi) / (log 2)^{3/2}`, the limit bound for [`uniform_tau_ratio`].
pub fn uniform_tau_ratio_limit() -> f64 {
    std::f64::consts::PI.sqrt() / std::f64::consts::LN_2.powf(1.5)
}

/// Largest depth for which `2^{2^{2S}}` fits the overflow guard `2^{2S} <= 62`.
pub const TALAGRAND_MAX_DEPTH: usize = 2;

/// Doubly exponential generation sizes and the check `log(1+|G_s|) <= 2^{2(s+1)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TalagrandSizes {
    pub sizes: Vec<u64>,
    pub log_checks: Vec<bool>,
}

pub fn talagrand_sizes(depth: usize) -> Result<TalagrandSizes> {
    if depth > TALAGRAND_MAX_DEPTH {
        return Err(Error::SizeOverflow {
            depth,
            max: TALAGRAND_MAX_DEPTH,
        });
    }
    let sizes: Vec<u64> = (0..=depth).map(|s| 1u64 << (1u32 << (2 * s))).collect();
    let log_checks = sizes
        .iter()
        .enumerate()
        .map(|(s, &g)| (g as f64).ln_1p() <= 4f64.powi(s as i32 + 1))
        .collect();
    Ok(TalagrandSizes { sizes, log_checks })
}

/// JSON form of a tree and, optionally, its labels and chain constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    #[serde(rename = "S")]
    pub depth: usize,
    pub generations: Vec<Vec<usize>>,
    #[serde(default)]
    pub parent: BTreeMap<usize, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<usize, f64>>,
    #[serde(rename = "Ls", default, skip_serializing_if = "Option::is_none")]
    pub ls: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl TreeDocument {
    pub fn tree(&self) -> FiniteTree {
        FiniteTree::from_parts(self.depth, self.generations.clone(), self.parent.clone())
    }

    pub fn labeled(&self) -> Result<LabeledTree> {
        let labels = self
            .labels
            .clone()
            .ok_or_else(|| invalid("labels", "document has no labels"))?;
        let ls = self
            .ls
            .clone()
            .ok_or_else(|| invalid("Ls", "document has no Ls"))?;
        LabeledTree::new(self.tree(), labels, ls)
    }

    pub fn certificate(&self) -> Result<ChainCertificate> {
        let tau = self.tau.ok_or_else(|| invalid("tau", "document has no tau"))?;
        ChainCertificate::new(self.labeled()?, tau, self.delta.unwrap_or(0.0))
    }

    pub fn from_certificate(cert: &ChainCertificate) -> Self {
        let tree = &cert.labeled.tree;
        Self {
            depth: tree.depth,
            generations: tree.generations.clone(),
            parent: tree.parent.clone(),
            labels: Some(cert.labeled.label_norm.clone()),
            ls: Some(cert.labeled.ls.clone()),
            tau: Some(cert.tau),
            delta: Some(cert.delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parents(pairs: &[(usize, usize)]) -> BTreeMap<usize, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn single_generation_is_valid() {
        let t = FiniteTree::from_parts(0, vec![(1..=5).collect()], BTreeMap::new());
        assert!(validate_tree(&t).valid);
        assert_eq!(t.branch(3).unwrap(), vec![3]);
    }

    #[test]
    fn cross_generation_parent_is_reported() {
        let t = FiniteTree::from_parts(
            2,
            vec![vec![1], vec![2], vec![3]],
            parents(&[(2, 1), (3, 1)]),
        );
        let r = validate_tree(&t);
        assert!(!r.valid);
        assert!(r.violations.iter().any(|v| matches!(
            v,
            Violation::ParentNotInPreviousGeneration { node: 3, parent: 1, parent_generation: Some(0), .. }
        )));
        assert!(r.violations[0].to_string().starts_with("parent not in previous generation"));
    }

    #[test]
    fn overlapping_generations_are_reported() {
        let t = FiniteTree::from_parts(
            1,
            vec![vec![1, 2, 5], vec![3, 4, 5]],
            parents(&[(3, 1), (4, 2), (5, 1)]),
        );
        let r = validate_tree(&t);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::NotDisjoint { node: 5, .. })));
        assert!(r
            .violations
            .iter()
            .any(|v| v.to_string().starts_with("generations not disjoint")));
    }

    #[test]
    fn other_violations() {
        let t = FiniteTree::from_parts(1, vec![vec![1], vec![]], BTreeMap::new());
        assert!(validate_tree(&t).violations.contains(&Violation::EmptyGeneration { generation: 1 }));
        let t = FiniteTree::from_parts(1, vec![vec![1], vec![3]], parents(&[(3, 1)]));
        let v = validate_tree(&t).violations;
        assert!(v.contains(&Violation::IdOutOfRange { node: 3, n: 2 }));
        assert!(v.contains(&Violation::MissingId { node: 2 }));
        let t = FiniteTree::from_parts(1, vec![vec![1], vec![2]], BTreeMap::new());
        assert!(validate_tree(&t)
            .violations
            .contains(&Violation::MissingParent { node: 2, generation: 1 }));
        let t = FiniteTree::from_parts(2, vec![vec![1], vec![2]], parents(&[(2, 1)]));
        assert!(matches!(validate_tree(&t).violations[0], Violation::DepthMismatch { .. }));
    }

    #[test]
    fn layered_trees_are_valid() {
        let t = FiniteTree::layered(&[2, 5, 11]).unwrap();
        assert_eq!(t.sizes(), vec![2, 5, 11]);
        assert_eq!(t.node_count(), 18);
        for &k in t.end_nodes() {
            let b = t.branch(k).unwrap();
            assert_eq!(b.len(), 3);
            for (s, j) in b.iter().enumerate() {
                assert_eq!(t.generation_of(*j), Some(s));
            }
        }
    }

    fn uniform_cert(sizes: &[usize], tau: f64, ls: Vec<f64>, delta: f64) -> ChainCertificate {
        let labeled = LabeledTree::uniform(FiniteTree::layered(sizes).unwrap(), tau, ls).unwrap();
        ChainCertificate::new(labeled, tau, delta).unwrap()
    }

    #[test]
    fn gamma_single_generation_matches_finite_max() {
        let cert = uniform_cert(&[7], 1.3, vec![0.4], 0.0);
        let g = gamma_bound(&cert).unwrap();
        let h = 8f64.ln();
        assert!((g.gamma - 1.3 * (h.sqrt() + 0.2 * h)).abs() < 1e-14);
        assert_eq!(g.expectation_bound, g.gamma);
    }

    #[test]
    fn gamma_unit_sizes() {
        let cert = uniform_cert(&[1, 1, 1], 1.0, vec![0.0; 3], 0.0);
        let g = gamma_bound(&cert).unwrap();
        assert!((g.gamma - 1.75 * std::f64::consts::LN_2.sqrt()).abs() < 1e-15);
        let cert2 = uniform_cert(&[1, 1, 1], 2.0, vec![0.0; 3], 0.0);
        assert_eq!(gamma_bound(&cert2).unwrap().gamma, 2.0 * g.gamma);
    }

    #[test]
    fn certificate_names_violating_node() {
        let tree = FiniteTree::layered(&[1, 2]).unwrap();
        let labels: BTreeMap<usize, f64> = [(1, 1.0), (2, 0.5), (3, 0.6)].into_iter().collect();
        let labeled = LabeledTree::new(tree, labels, vec![1.0, 1.0]).unwrap();
        let cert = ChainCertificate::new(labeled, 1.0, 0.0).unwrap();
        match gamma_bound(&cert).unwrap_err() {
            Error::Certificate { node, generation, .. } => {
                assert_eq!((node, generation), (3, 1));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn generic_constants_single_node() {
        let labeled = LabeledTree::uniform(FiniteTree::layered(&[1]).unwrap(), 2.0, vec![0.7]).unwrap();
        let c = generic_constants(&labeled).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((c.gamma_star - 2.0 * (ln2.sqrt() + 0.35 * ln2)).abs() < 1e-15);
        assert_eq!(c.tau_star, 2.0);
        assert!((c.l_star - 0.7).abs() < 1e-15);
    }

    #[test]
    fn generic_constants_uniform_labels() {
        let labeled =
            LabeledTree::uniform(FiniteTree::layered(&[1; 11]).unwrap(), 1.0, vec![0.0; 11]).unwrap();
        let c = generic_constants(&labeled).unwrap();
        assert!((c.tau_star - uniform_tau_ratio(10)).abs() < 1e-14);
        assert!((uniform_tau_ratio(10) - 2.690_991_202_233_79).abs() < 1e-12);
        assert!(c.tau_star <= uniform_tau_ratio_limit());
        assert!((uniform_tau_ratio_limit() - 3.071_402_580_2).abs() < 1e-9);
    }

    #[test]
    fn degenerate_labels_error() {
        let tree = FiniteTree::layered(&[1, 1]).unwrap();
        let labels: BTreeMap<usize, f64> = [(1, 0.0), (2, 0.0)].into_iter().collect();
        let labeled = LabeledTree::new(tree, labels, vec![1.0, 1.0]).unwrap();
        let c = generic_constants(&labeled).unwrap();
        assert_eq!(c.l_star, 0.0);
    }

    #[test]
    fn generic_threshold_values() {
        let c = GenericConstants {
            gamma1_star: 0.0,
            gamma2_star: 0.0,
            gamma_star: 0.0,
            tau_star: 1.0,
            l_star: 0.0,
        };
        assert!((generic_deviation_threshold(&c, 0.0, 4.0).unwrap().threshold - 3.0).abs() < 1e-15);
        let d = generic_orlicz_deviation(&c, 0.0).unwrap();
        assert!((d.expectation_bound - (1.0 + (3.0 * std::f64::consts::LN_2).sqrt())).abs() < 1e-15);
        assert!((d.expectation_bound - 2.442_026_886_6).abs() < 1e-9);
    }

    #[test]
    fn uniform_deviation_values() {
        let cert = uniform_cert(&[2, 3], 1.0, vec![0.0, 0.0], 0.5);
        let u = uniform_tree_deviation(&cert, 4.0).unwrap();
        let g = gamma_bound(&cert).unwrap();
        assert!((u.bound.threshold - (g.gamma + 0.5 + 4.0 + 8.0)).abs() < 1e-14);
        let ls = vec![0.3; 40];
        let sum: f64 = (0..40).map(|s| 0.5f64.powi(s) * (1 + s) as f64).sum();
        assert!((uniform_l(&ls) - 0.3 * sum / 4.0).abs() < 1e-15);
        assert!(uniform_l(&ls) <= 0.3 * 2.0 / std::f64::consts::LN_2.powi(2) / 4.0);
    }

    #[test]
    fn talagrand_sizes_and_guard() {
        let t = talagrand_sizes(2).unwrap();
        assert_eq!(t.sizes, vec![2, 16, 65536]);
        assert!(t.log_checks.iter().all(|&b| b));
        assert_eq!(
            talagrand_sizes(3).unwrap_err(),
            Error::SizeOverflow { depth: 3, max: 2 }
        );
    }

    #[test]
    fn talagrand_gamma_star_at_most_twice_gamma_0() {
        let sizes: Vec<usize> = talagrand_sizes(2).unwrap().sizes.iter().map(|&s| s as usize).collect();
        let tree = FiniteTree::layered(&sizes).unwrap();
        let mut labels = BTreeMap::new();
        for (s, gen) in tree.generations().iter().enumerate() {
            for (i, &j) in gen.iter().enumerate() {
                labels.insert(j, (1 + (i * 7 + s) % 5) as f64 / 5.0 * 0.5f64.powi(s as i32));
            }
        }
        let labeled = LabeledTree::new(tree, labels, vec![0.3, 1.1, 0.2]).unwrap();
        let c = generic_constants(&labeled).unwrap();
        let t = talagrand_constants(&labeled, 0.0).unwrap();
        assert!(c.gamma_star <= 2.0 * t.gamma_0);
        assert!(c.tau_star <= t.gamma_1_0);
        assert!(c.tau_star * c.l_star <= t.gamma_2_0 * (1.0 + 1e-12));
        let corollary = generic_orlicz_deviation(&c, 0.0).unwrap().expectation_bound;
        assert!(corollary <= t.expectation_bound * (1.0 + 1e-12));
    }

    #[test]
    fn document_round_trip() {
        let cert = uniform_cert(&[2, 4], 1.5, vec![0.5, 0.25], 0.1);
        let doc = TreeDocument::from_certificate(&cert);
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"S\":1"));
        assert!(json.contains("\"parent\":{\"3\":1"));
        let back: TreeDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.certificate().unwrap(), cert);
    }
}
