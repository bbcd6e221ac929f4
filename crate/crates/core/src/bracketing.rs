//! Bracketing sets, entropy accounting and the tree chain built from a ladder
//! of brackets with adaptive truncation.
//!
//! All functions are cell vectors of an [`EvalModel`], so norms, moments and
//! pointwise orderings are exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::class::EvalModel;
use crate::error::{invalid, positive, Error, Result};
use crate::numeric::factorial;
use crate::tree::{ChainCertificate, FiniteTree, LabeledTree};

/// Default highest moment order in generalized-bracket and label certificates.
pub const DEFAULT_M_MAX: u32 = 20;

const SQRT6: f64 = 2.449_489_742_783_178;
/// Scale of the chain built from brackets, `3 sqrt(6)`.
pub const CHAIN_TAU: f64 = 3.0 * SQRT6;
const SLACK: f64 = 1e-12;

/// A bracket `[lower, upper]` as cell vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketPair {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BracketPair {
    fn width(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    fn contains(&self, model: &EvalModel, g: &[f64]) -> bool {
        model.le(&self.lower, g) && model.le(g, &self.upper)
    }
}

/// How a level's widths are certified.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LevelCertificate {
    /// `||upper - lower|| <= bound` for every pair.
    Width { bound: f64, max_width: f64 },
    /// `P|upper - lower|^m <= (m!/2) (2K)^{m-2}` for `m = 2..=m_max`.
    Moment {
        #[serde(rename = "K")]
        k: f64,
        m_max: u32,
        worst_ratio: f64,
    },
}

/// The brackets of one level and the bracket assigned to each class member
/// (the lowest-index bracket containing it).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketLevel {
    pub s: usize,
    pub pairs: Vec<BracketPair>,
    pub assignment: Vec<usize>,
    pub certificate: LevelCertificate,
}

impl BracketLevel {
    pub fn count(&self) -> usize {
        self.pairs.len()
    }
}

fn assign(model: &EvalModel, pairs: &[BracketPair], s: usize) -> Result<Vec<usize>> {
    model
        .functions()
        .iter()
        .enumerate()
        .map(|(g, f)| {
            pairs
                .iter()
                .position(|p| p.contains(model, f))
                .ok_or_else(|| Error::Coverage(format!("function {g} has no bracket at level {s}")))
        })
        .collect()
}

/// Greedy covering: each still-uncovered function opens a bracket, and later
/// functions join it while `accept(width)` holds for the widened bracket.
fn greedy_pairs<F: Fn(&[f64]) -> bool>(model: &EvalModel, accept: F) -> Vec<BracketPair> {
    let funcs = model.functions();
    let mut taken = vec![false; funcs.len()];
    let mut pairs = Vec::new();
    for i in 0..funcs.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let mut pair = BracketPair {
            lower: funcs[i].clone(),
            upper: funcs[i].clone(),
        };
        for j in i + 1..funcs.len() {
            if taken[j] {
                continue;
            }
            let lower: Vec<f64> = pair.lower.iter().zip(&funcs[j]).map(|(a, b)| a.min(*b)).collect();
            let upper: Vec<f64> = pair.upper.iter().zip(&funcs[j]).map(|(a, b)| a.max(*b)).collect();
            let width: Vec<f64> = upper.iter().zip(&lower).map(|(u, l)| u - l).collect();
            if accept(&width) {
                pair = BracketPair { lower, upper };
                taken[j] = true;
            }
        }
        pairs.push(pair);
    }
    pairs
}

/// A `2^{-s}`-bracketing set (`s >= 1`). Indicator classes use the quantile
/// cuts `k 4^{-s}` of the design law; finite classes use greedy grouping.
pub fn build_brackets(model: &EvalModel, s: usize) -> Result<BracketLevel> {
    if s == 0 {
        return Err(invalid("s", "level 0 uses generalized brackets"));
    }
    let bound = 0.5f64.powi(s as i32);
    let pairs = match model.resolution() {
        Some(r) => {
            if s > r {
                return Err(Error::Coverage(format!(
                    "cell model resolves quantile cuts up to level {r}, requested {s}"
                )));
            }
            let cuts = 1usize << (2 * s);
            (0..cuts)
                .map(|i| BracketPair {
                    lower: model.indicator(i as f64 / cuts as f64),
                    upper: model.indicator((i + 1) as f64 / cuts as f64),
                })
                .collect()
        }
        None => greedy_pairs(model, |w| model.norm(w) <= bound),
    };
    let max_width = pairs
        .iter()
        .map(|p| model.norm(&p.width()))
        .fold(0.0, f64::max);
    if max_width > bound * (1.0 + SLACK) {
        return Err(Error::Internal(format!(
            "level {s} bracket width {max_width} exceeds {bound}"
        )));
    }
    let assignment = assign(model, &pairs, s)?;
    Ok(BracketLevel {
        s,
        pairs,
        assignment,
        certificate: LevelCertificate::Width { bound, max_width },
    })
}

/// Largest ratio `P|w|^m / ((m!/2)(2K)^{m-2})` over `m = 2..=m_max`.
fn moment_ratio(model: &EvalModel, width: &[f64], k: f64, m_max: u32) -> f64 {
    (2..=m_max)
        .map(|m| {
            let rhs = 0.5 * factorial(m) * (2.0 * k).powi(m as i32 - 2);
            model.abs_moment(width, m) / rhs
        })
        .fold(0.0, f64::max)
}

/// Smallest `K` for which `w` satisfies the generalized-bracket moment
/// condition up to `m_max`; `None` when `P w^2 > 1` rules out every `K`.
pub fn minimal_generalized_k(model: &EvalModel, width: &[f64], m_max: u32) -> Option<f64> {
    if model.abs_moment(width, 2) > 1.0 + SLACK {
        return None;
    }
    Some(
        (3..=m_max)
            .map(|m| {
                let a = model.abs_moment(width, m) / (0.5 * factorial(m));
                0.5 * a.powf(1.0 / (m - 2) as f64)
            })
            .fold(0.0, f64::max),
    )
}

/// What [`generalized_brackets`] may do when the envelope bracket fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GeneralizedMode {
    /// Split the class greedily, down to point brackets if needed.
    #[default]
    Partition,
    /// Only the single envelope bracket is allowed.
    EnvelopeOnly,
}

/// A generalized bracketing set (level 0): the envelope pair
/// `[min_g g, max_g g]` when its width satisfies the moment condition with
/// `2K`, otherwise a greedy partition of the class.
pub fn generalized_brackets(
    model: &EvalModel,
    k: f64,
    m_max: u32,
    mode: GeneralizedMode,
) -> Result<BracketLevel> {
    positive("K", k)?;
    if m_max < 2 {
        return Err(invalid("m_max", "need m_max >= 2"));
    }
    let funcs = model.functions();
    let cells = model.cells();
    let mut envelope = BracketPair {
        lower: vec![f64::INFINITY; cells],
        upper: vec![f64::NEG_INFINITY; cells],
    };
    for f in funcs {
        for c in 0..cells {
            envelope.lower[c] = envelope.lower[c].min(f[c]);
            envelope.upper[c] = envelope.upper[c].max(f[c]);
        }
    }
    let ok = |w: &[f64]| moment_ratio(model, w, k, m_max) <= 1.0 + SLACK;
    let pairs = if ok(&envelope.width()) {
        vec![envelope]
    } else {
        match mode {
            GeneralizedMode::EnvelopeOnly => {
                return Err(Error::GeneralizedInfeasible {
                    k,
                    minimal_k: minimal_generalized_k(model, &envelope.width(), m_max),
                })
            }
            GeneralizedMode::Partition => greedy_pairs(model, ok),
        }
    };
    let worst_ratio = pairs
        .iter()
        .map(|p| moment_ratio(model, &p.width(), k, m_max))
        .fold(0.0, f64::max);
    let assignment = assign(model, &pairs, 0)?;
    Ok(BracketLevel {
        s: 0,
        pairs,
        assignment,
        certificate: LevelCertificate::Moment {
            k,
            m_max,
            worst_ratio,
        },
    })
}

/// Levels `0..=depth`: generalized brackets, then `2^{-s}`-brackets.
pub fn bracket_ladder(
    model: &EvalModel,
    k: f64,
    m_max: u32,
    depth: usize,
    mode: GeneralizedMode,
) -> Result<Vec<BracketLevel>> {
    let mut levels = vec![generalized_brackets(model, k, m_max, mode)?];
    for s in 1..=depth {
        levels.push(build_brackets(model, s)?);
    }
    Ok(levels)
}

/// Bracket counts `N~_s`, entropies `H~_s = log(1 + N~_s)`, products
/// `N_s = prod_{k<=s} N~_k` and `H_s = log(1 + N_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    #[serde(rename = "Ntilde")]
    pub ntilde: Vec<u64>,
    #[serde(rename = "Htilde")]
    pub htilde: Vec<f64>,
    /// Exact products; `None` past the first overflow of `u128`.
    #[serde(rename = "Nprod", with = "big_counts")]
    pub nprod: Vec<Option<u128>>,
    #[serde(rename = "Hprod")]
    pub hprod: Vec<f64>,
    /// Set when some `H_s` was computed in the log domain.
    pub approximate: bool,
}

/// JSON numbers stop at `u64`; larger products are written as decimal
/// strings and read back from either form.
mod big_counts {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Count {
        Small(u64),
        Big(String),
    }

    pub fn serialize<S: Serializer>(v: &[Option<u128>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|c| {
                c.map(|c| match u64::try_from(c) {
                    Ok(small) => Count::Small(small),
                    Err(_) => Count::Big(c.to_string()),
                })
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<u128>>, D::Error> {
        Vec::<Option<Count>>::deserialize(d)?
            .into_iter()
            .map(|c| match c {
                None => Ok(None),
                Some(Count::Small(v)) => Ok(Some(v as u128)),
                Some(Count::Big(text)) => text.parse().map(Some).map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

impl EntropyProfile {
    pub fn from_counts(ntilde: &[u64]) -> Result<Self> {
        if ntilde.is_empty() {
            return Err(invalid("Ntilde", "need at least level 0"));
        }
        if ntilde.contains(&0) {
            return Err(invalid("Ntilde", "bracket counts must be >= 1"));
        }
        let htilde = ntilde.iter().map(|&c| (c as f64).ln_1p()).collect();
        let mut nprod = Vec::with_capacity(ntilde.len());
        let mut hprod = Vec::with_capacity(ntilde.len());
        let mut exact: Option<u128> = Some(1);
        let mut log_n = 0.0;
        let mut approximate = false;
        for &c in ntilde {
            exact = exact.and_then(|p| p.checked_mul(c as u128));
            log_n += (c as f64).ln();
            match exact {
                Some(p) => hprod.push((p as f64).ln_1p()),
                None => {
                    approximate = true;
                    hprod.push(log_n + (-log_n).exp().ln_1p());
                }
            }
            nprod.push(exact);
        }
        Ok(Self {
            ntilde: ntilde.to_vec(),
            htilde,
            nprod,
            hprod,
            approximate,
        })
    }

    /// Profile of half-line indicators with quantile brackets: `N~_0 = 1`,
    /// `N~_s = 4^s`.
    pub fn indicators(depth: usize) -> Result<Self> {
        if depth > 31 {
            return Err(invalid("depth", "quantile bracket counts above 4^31 overflow"));
        }
        let counts: Vec<u64> = (0..=depth)
            .map(|s| if s == 0 { 1 } else { 1u64 << (2 * s) })
            .collect();
        Self::from_counts(&counts)
    }

    /// Largest level `S` covered.
    pub fn depth(&self) -> usize {
        self.ntilde.len() - 1
    }

    /// Copy restricted to levels `0..=depth`.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth > self.depth() {
            return Err(Error::MissingLevel(depth));
        }
        Self::from_counts(&self.ntilde[..=depth])
    }
}

pub fn entropy_profile(levels: &[BracketLevel]) -> Result<EntropyProfile> {
    for (s, level) in levels.iter().enumerate() {
        if level.s != s {
            return Err(Error::MissingLevel(s));
        }
    }
    let counts: Vec<u64> = levels.iter().map(|l| l.count() as u64).collect();
    EntropyProfile::from_counts(&counts)
}

/// Both sides of `sum_{s=1}^S 2^{-s} sqrt(H_s) <= sqrt(H~_0) + 2 sum_{s=1}^S 2^{-s} sqrt(H~_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropySumBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn entropy_sum_bound(profile: &EntropyProfile, depth: usize) -> Result<EntropySumBound> {
    if depth > profile.depth() {
        return Err(Error::MissingLevel(depth));
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for s in 1..=depth {
        let w = 0.5f64.powi(s as i32);
        lhs += w * profile.hprod[s].sqrt();
        rhs += w * profile.htilde[s].sqrt();
    }
    let rhs = profile.htilde[0].sqrt() + 2.0 * rhs;
    Ok(EntropySumBound {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Which node labels the chain build records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelVariant {
    /// Increments and remainders restricted to the event that no earlier
    /// generation on the branch was truncated; the remainder at generation
    /// `s < S` is further restricted to truncation at `s`. The chain
    /// inequality then holds on every sample path.
    #[default]
    TruncationAware,
    /// `Delta^s 1{y_{s-1} = 0}` and `(g^{s,L} - g^{s-1,L}) 1{y_{s-1} = 0}`,
    /// conditioning on the previous generation only.
    Printed,
}

/// Options for [`build_tree_chain_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub variant: LabelVariant,
    pub m_max: u32,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            variant: LabelVariant::TruncationAware,
            m_max: DEFAULT_M_MAX,
        }
    }
}

/// One node of the built chain: its envelope pair, width, and the two label
/// functions whose empirical-process magnitudes make up `W_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainNode {
    pub id: usize,
    pub generation: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub delta: Vec<f64>,
    /// `g^{0,L}` at generation 0, the restricted increment afterwards.
    pub increment: Vec<f64>,
    /// The restricted width term.
    pub remainder: Vec<f64>,
    pub p_increment: f64,
    pub p_remainder: f64,
    /// `sqrt(6) (sigma_1 + sigma_2)`, a certified bound on `||W_j||_{Psi_{L_s}}`.
    pub certified_norm: f64,
    /// `P Delta^s 1{Delta^s >= K_s}` for `s < S`.
    pub truncated_mass: Option<f64>,
}

/// A tree chain for `{nu_n(g)}` built from a bracket ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChainBuild {
    pub cert: ChainCertificate,
    pub nodes: Vec<ChainNode>,
    /// End node id for each class member.
    pub end_node_of: Vec<usize>,
    /// Truncation levels `K_0, ..., K_{S-1}`.
    pub k_levels: Vec<f64>,
    /// Bernstein scale of the generalized level.
    pub k: f64,
    pub n: u64,
    pub variant: LabelVariant,
    pub model: EvalModel,
}

impl TruncatedChainBuild {
    pub fn depth(&self) -> usize {
        self.cert.labeled.tree().depth()
    }

    pub fn node(&self, id: usize) -> &ChainNode {
        &self.nodes[id - 1]
    }

    /// Branch of the end node assigned to class member `g`.
    pub fn branch_of(&self, g: usize) -> Vec<usize> {
        self.cert
            .labeled
            .tree()
            .branch(self.end_node_of[g])
            .expect("built trees are valid")
    }
}

/// `L_0 = 4 sqrt(6) K / sqrt(n)`, `L_s = 2 sqrt(6) 2^s K_{s-1} / (3 sqrt(n))`.
pub fn chain_ls(k: f64, k_levels: &[f64], n: u64) -> Vec<f64> {
    let rn = (n as f64).sqrt();
    let mut ls = vec![4.0 * SQRT6 * k / rn];
    for (i, ks) in k_levels.iter().enumerate() {
        let s = i + 1;
        ls.push(2.0 * SQRT6 * 2f64.powi(s as i32) * ks / (3.0 * rn));
    }
    ls
}

/// `delta = 4 sqrt(n) sum_{s=1}^S 2^{-2s} / K_{s-1} + sqrt(n) 2^{-S}`.
pub fn chain_delta(k_levels: &[f64], n: u64) -> f64 {
    let rn = (n as f64).sqrt();
    let depth = k_levels.len();
    let sum: f64 = k_levels
        .iter()
        .enumerate()
        .map(|(i, ks)| 4f64.powi(-(i as i32 + 1)) / ks)
        .sum();
    4.0 * rn * sum + rn * 0.5f64.powi(depth as i32)
}

pub(crate) fn check_k_levels(k_levels: &[f64]) -> Result<()> {
    for (i, &k) in k_levels.iter().enumerate() {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::TruncationLevels(format!("K_{i} = {k}")));
        }
        if i > 0 && k > k_levels[i - 1] {
            return Err(Error::TruncationLevels(format!(
                "K_{i} = {k} > K_{} = {}",
                i - 1,
                k_levels[i - 1]
            )));
        }
    }
    Ok(())
}

pub fn build_tree_chain(
    model: &EvalModel,
    levels: &[BracketLevel],
    profile: &EntropyProfile,
    k_levels: &[f64],
    n: u64,
) -> Result<TruncatedChainBuild> {
    build_tree_chain_with(model, levels, profile, k_levels, n, ChainOptions::default())
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Smallest `sigma` with `P|f - Pf|^m <= (m!/2) K'^{m-2} sigma^2` for
/// `m = 2..=m_max`, and whether the bound extends to every order
/// (`sup|f - Pf| <= (m_max + 1) K'` makes each further order follow from the
/// previous one).
fn bernstein_sigma(model: &EvalModel, f: &[f64], k_prime: f64, m_max: u32) -> (f64, bool) {
    let mean = model.mean(f);
    let centered: Vec<f64> = f.iter().map(|x| x - mean).collect();
    let sup = centered
        .iter()
        .zip(model.weights())
        .filter(|(_, w)| **w > 0.0)
        .fold(0.0_f64, |a, (x, _)| a.max(x.abs()));
    let sigma2 = (2..=m_max)
        .map(|m| {
            model.abs_moment(&centered, m) / (0.5 * factorial(m) * k_prime.powi(m as i32 - 2))
        })
        .fold(0.0, f64::max);
    (sigma2.sqrt(), sup <= (m_max + 1) as f64 * k_prime)
}

/// Builds the tree chain of a bracket ladder with truncation levels
/// `K_0 >= ... >= K_{S-1}`.
///
/// Nodes of generation `s` are the distinct envelope pairs
/// `(max_{k<=s} lower_k, min_{k<=s} upper_k)` over class members, numbered in
/// order of first appearance; a node's parent is the lowest-numbered node of
/// the previous generation whose pair contains it. Each label norm is
/// certified from exact centered moments of its two label functions.
pub fn build_tree_chain_with(
    model: &EvalModel,
    levels: &[BracketLevel],
    profile: &EntropyProfile,
    k_levels: &[f64],
    n: u64,
    options: ChainOptions,
) -> Result<TruncatedChainBuild> {
    if levels.is_empty() {
        return Err(Error::MissingLevel(0));
    }
    for (s, level) in levels.iter().enumerate() {
        if level.s != s {
            return Err(Error::MissingLevel(s));
        }
        if level.assignment.len() != model.functions().len() {
            return Err(invalid("levels", format!("level {s} was built for another class")));
        }
    }
    let depth = levels.len() - 1;
    if k_levels.len() != depth {
        return Err(Error::TruncationLevels(format!(
            "need {depth} levels for depth {depth}, got {}",
            k_levels.len()
        )));
    }
    check_k_levels(k_levels)?;
    if n == 0 {
        return Err(invalid("n", "need n >= 1"));
    }
    if profile.depth() < depth {
        return Err(Error::MissingLevel(profile.depth() + 1));
    }
    let LevelCertificate::Moment { k, .. } = levels[0].certificate else {
        return Err(invalid("levels", "level 0 must be a generalized bracketing set"));
    };
    if k < 1.0 {
        return Err(invalid("K", format!("the chain construction needs K >= 1, got {k}")));
    }

    let funcs = model.functions();
    let cells = model.cells();

    // Envelope pairs per member and generation, deduplicated into nodes.
    let mut nodes: Vec<ChainNode> = Vec::new();
    let mut generations: Vec<Vec<usize>> = vec![Vec::new(); depth + 1];
    let mut node_of: Vec<Vec<usize>> = vec![vec![0; funcs.len()]; depth + 1];
    let mut lower: Vec<Vec<f64>> = vec![vec![f64::NEG_INFINITY; cells]; funcs.len()];
    let mut upper: Vec<Vec<f64>> = vec![vec![f64::INFINITY; cells]; funcs.len()];
    for (s, level) in levels.iter().enumerate() {
        let mut index: BTreeMap<(Vec<u64>, Vec<u64>), usize> = BTreeMap::new();
        for g in 0..funcs.len() {
            let pair = &level.pairs[level.assignment[g]];
            for c in 0..cells {
                lower[g][c] = lower[g][c].max(pair.lower[c]);
                upper[g][c] = upper[g][c].min(pair.upper[c]);
            }
            let key = (bits(&lower[g]), bits(&upper[g]));
            let id = *index.entry(key).or_insert_with(|| {
                let id = nodes.len() + 1;
                let delta = upper[g].iter().zip(&lower[g]).map(|(u, l)| u - l).collect();
                nodes.push(ChainNode {
                    id,
                    generation: s,
                    lower: lower[g].clone(),
                    upper: upper[g].clone(),
                    delta,
                    increment: Vec::new(),
                    remainder: Vec::new(),
                    p_increment: 0.0,
                    p_remainder: 0.0,
                    certified_norm: 0.0,
                    truncated_mass: None,
                });
                generations[s].push(id);
                id
            });
            node_of[s][g] = id;
        }
    }

    // Parents: lowest-numbered containing node of the previous generation.
    let mut parent = BTreeMap::new();
    for s in 1..=depth {
        for &j in &generations[s] {
            let child = &nodes[j - 1];
            let p = generations[s - 1]
                .iter()
                .copied()
                .find(|&k| {
                    let cand = &nodes[k - 1];
                    model.le(&cand.lower, &child.lower) && model.le(&child.upper, &cand.upper)
                })
                .ok_or_else(|| Error::Internal(format!("node {j} has no containing parent")))?;
            parent.insert(j, p);
        }
    }
    let tree = FiniteTree::new(depth, generations.clone(), parent)?;

    for (s, gen) in generations.iter().enumerate() {
        let n_s = profile.nprod[s].map(|v| v as f64).unwrap_or(f64::INFINITY);
        if gen.len() as f64 > n_s {
            return Err(Error::Internal(format!(
                "generation {s} has {} nodes, more than N_s = {n_s}",
                gen.len()
            )));
        }
    }

    // Truncation indicators and the "not yet truncated" event along branches.
    // y_j = 1{Delta_j >= K_s}; never set at the last generation.
    let y: Vec<Vec<f64>> = nodes
        .iter()
        .map(|node| match k_levels.get(node.generation) {
            Some(&ks) => node.delta.iter().map(|&d| if d >= ks { 1.0 } else { 0.0 }).collect(),
            None => vec![0.0; cells],
        })
        .collect();
    let truncated = |j: usize| y[j - 1].clone();
    let mut alive: Vec<Vec<f64>> = vec![Vec::new(); nodes.len()];
    for gen in &generations {
        for &j in gen {
            alive[j - 1] = match tree.parent(j) {
                None => vec![1.0; cells],
                Some(p) => {
                    let y = truncated(p);
                    let survive: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
                    match options.variant {
                        LabelVariant::TruncationAware => hadamard(&alive[p - 1], &survive),
                        LabelVariant::Printed => survive,
                    }
                }
            };
        }
    }

    let ls = chain_ls(k, k_levels, n);
    let rn = (n as f64).sqrt();
    let mut labels = BTreeMap::new();
    for idx in 0..nodes.len() {
        let j = idx + 1;
        let s = nodes[idx].generation;
        let increment = match tree.parent(j) {
            None => nodes[idx].lower.clone(),
            Some(p) => {
                let diff: Vec<f64> = nodes[idx]
                    .lower
                    .iter()
                    .zip(&nodes[p - 1].lower)
                    .map(|(a, b)| a - b)
                    .collect();
                hadamard(&diff, &alive[idx])
            }
        };
        let remainder = if s < depth && options.variant == LabelVariant::TruncationAware {
            hadamard(&hadamard(&nodes[idx].delta, &truncated(j)), &alive[idx])
        } else {
            hadamard(&nodes[idx].delta, &alive[idx])
        };
        let truncated_mass = (s < depth).then(|| model.mean(&hadamard(&nodes[idx].delta, &truncated(j))));
        if let Some(mass) = truncated_mass {
            let cap = 4f64.powi(-(s as i32)) / k_levels[s];
            if mass > cap * (1.0 + SLACK) {
                return Err(Error::Internal(format!(
                    "node {j}: truncated mass {mass} exceeds 2^-2s/K_s = {cap}"
                )));
            }
        }

        // K' and the smallest sigma compatible with L_s for each label term.
        let (k1, k2) = if s == 0 {
            (8.0 * k, 4.0 * k)
        } else {
            let kp = 2.0 * k_levels[s - 1] / 3.0;
            (kp, kp)
        };
        let floor = |kp: f64| SQRT6 * kp / (rn * ls[s]);
        let (sig1, all1) = bernstein_sigma(model, &increment, k1, options.m_max);
        let (sig2, all2) = bernstein_sigma(model, &remainder, k2, options.m_max);
        let certified = SQRT6 * (sig1.max(floor(k1)) + sig2.max(floor(k2)));
        let cap = CHAIN_TAU * 0.5f64.powi(s as i32);
        if !(all1 && all2) {
            return Err(Error::Certificate {
                node: j,
                generation: s,
                reason: "label terms exceed the moment-induction range".into(),
            });
        }
        if certified > cap * (1.0 + SLACK) {
            return Err(Error::Certificate {
                node: j,
                generation: s,
                reason: format!("certified label norm {certified} exceeds 3 sqrt(6) 2^-s = {cap}"),
            });
        }
        let node = &mut nodes[idx];
        node.p_increment = model.mean(&increment);
        node.p_remainder = model.mean(&remainder);
        node.increment = increment;
        node.remainder = remainder;
        node.certified_norm = certified;
        node.truncated_mass = truncated_mass;
        labels.insert(j, certified);
    }

    let labeled = LabeledTree::new(tree, labels, ls)?;
    let cert = ChainCertificate::new(labeled, CHAIN_TAU, chain_delta(k_levels, n))?;
    cert.check()?;
    Ok(TruncatedChainBuild {
        cert,
        nodes,
        end_node_of: node_of[depth].clone(),
        k_levels: k_levels.to_vec(),
        k,
        n,
        variant: options.variant,
        model: model.clone(),
    })
}

/// Largest ratio `P|g|^m / ((m!/2) K^{m-2})` over class members and
/// `m = 2..=m_max`; the uniform Bernstein condition holds iff it is `<= 1`.
pub fn class_bernstein_ratio(model: &EvalModel, k: f64, m_max: u32) -> f64 {
    model
        .functions()
        .iter()
        .flat_map(|f| {
            (2..=m_max).map(move |m| {
                model.abs_moment(f, m) / (0.5 * factorial(m) * k.powi(m as i32 - 2))
            })
        })
        .fold(0.0, f64::max)
}
