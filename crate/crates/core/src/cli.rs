//! The `bo` command line. Every subcommand prints a TSV table (9 significant
//! digits) or JSON (full precision); configs are read from inline JSON or a
//! file and rejected with the path of the first offending field.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bernstein::{
    bernstein_orlicz_norm, bernstein_tail, check_bernstein, BernsteinProfile, DEFAULT_M_MAX,
};
use crate::bracketing::{
    bracket_ladder, entropy_profile, entropy_sum_bound, EntropyProfile, GeneralizedMode,
    LevelCertificate,
};
use crate::class::{EvalModel, FunctionClass};
use crate::distribution::DistributionSpec;
use crate::ep_bounds::{
    deviation_orlicz, deviation_threshold_with, expectation_bound, massart_threshold, DeviationForm,
    EpBoundInput,
};
use crate::error::Error;
use crate::experiments::{build_chain, run_chain_check, run_verify, ChainCheckConfig, VerifyConfig};
use crate::finite_max::{
    max_bernstein_expectation_bound, max_deviation_norm, max_deviation_threshold, max_expectation_bound,
    MaxBoundInput,
};
use crate::numeric::fmt_sig9;
use crate::orlicz::{orlicz_norm_empirical, orlicz_norm_quadrature, psi_eval, psi_inverse, OrliczParams};
use crate::report::{run_report, ReportConfig};
use crate::sim::{mean_stderr, simulate_sup, with_workers, SimulationConfig, TailReport};
use crate::tree::{
    gamma_bound, generic_constants, generic_deviation_threshold, generic_orlicz_deviation,
    talagrand_constants, uniform_tree_deviation, validate_tree, TreeDocument,
};

/// Environment variable naming the directory for relative or defaulted
/// output paths.
pub const OUTPUT_DIR_ENV: &str = "BO_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "bo", version, about = "Bernstein-Orlicz norms, chaining and empirical-process bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Output file; relative paths resolve against $BO_OUTPUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for simulations (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate Psi_L or its inverse.
    #[command(subcommand)]
    Psi(PsiCmd),
    /// Orlicz norms of a law (quadrature) or a sample.
    #[command(subcommand)]
    Norm(NormCmd),
    /// Bernstein moment check, tail bound and Orlicz form.
    #[command(subcommand)]
    Bernstein(BernsteinCmd),
    /// Maxima of finitely many variables.
    #[command(subcommand)]
    Finmax(FinmaxCmd),
    /// Trees and chaining bounds.
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Bracket ladders and entropy profiles.
    #[command(subcommand)]
    Bracket(BracketCmd),
    /// Empirical-process expectation and deviation bounds.
    #[command(subcommand)]
    Ep(EpCmd),
    /// Monte Carlo runs.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Full verification run bundled into one report.
    Report {
        /// Report config (inline JSON or file); defaults apply when omitted.
        #[arg(long)]
        config: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum PsiCmd {
    Eval {
        #[arg(long = "L")]
        l: f64,
        #[arg(long)]
        z: f64,
    },
    Inv {
        #[arg(long = "L")]
        l: f64,
        #[arg(long)]
        t: f64,
    },
}

#[derive(Subcommand, Debug)]
enum NormCmd {
    /// Norm of a distribution, e.g. --dist '{"kind":"standard-normal"}'.
    Quad {
        #[arg(long)]
        dist: String,
        #[arg(long = "L")]
        l: f64,
    },
    /// Norm of the empirical law of a sample file (JSON array or whitespace-separated).
    Emp {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long = "L")]
        l: f64,
    },
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long = "K")]
    k: f64,
    #[arg(long)]
    n: u64,
}

#[derive(Subcommand, Debug)]
enum BernsteinCmd {
    Check {
        /// One law per summand (repeatable).
        #[arg(long, required = true)]
        dist: Vec<String>,
        #[arg(long)]
        sigma: f64,
        #[arg(long = "K")]
        k: f64,
        #[arg(long, default_value_t = DEFAULT_M_MAX)]
        m_max: u32,
    },
    Tail {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    Orlicz {
        #[command(flatten)]
        profile: ProfileArgs,
    },
}

#[derive(Args, Debug)]
struct MaxArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    tau: f64,
    #[arg(long = "L")]
    l: f64,
}

#[derive(Subcommand, Debug)]
enum FinmaxCmd {
    /// `tau Psi_L^{-1}(p)`, or the Bernstein form with --sigma/--K/--n.
    Expect {
        #[arg(long)]
        p: u64,
        #[arg(long = "tau", requires = "l", conflicts_with_all = ["sigma", "k", "n"])]
        tau: Option<f64>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long, requires_all = ["k", "n"])]
        sigma: Option<f64>,
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
    },
    Deviate {
        #[command(flatten)]
        args: MaxArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum TreeCmd {
    Validate {
        #[arg(long = "in")]
        input: String,
    },
    Gamma {
        #[arg(long = "in")]
        input: String,
    },
    Generic {
        #[arg(long = "in")]
        input: String,
        /// Approximation error; defaults to the document's delta.
        #[arg(long)]
        delta: Option<f64>,
    },
    Deviate {
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Use branch-wise generic-chaining constants instead of uniform labels.
        #[arg(long)]
        generic: bool,
    },
}

#[derive(Args, Debug)]
struct LadderArgs {
    /// Function class (inline JSON or file).
    #[arg(long)]
    class: String,
    #[arg(long = "S")]
    depth: usize,
    #[arg(long = "K", default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    m_max: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Partition)]
    mode: ModeArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Partition,
    EnvelopeOnly,
}

impl From<ModeArg> for GeneralizedMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Partition => GeneralizedMode::Partition,
            ModeArg::EnvelopeOnly => GeneralizedMode::EnvelopeOnly,
        }
    }
}

#[derive(Subcommand, Debug)]
enum BracketCmd {
    /// Bracket ladder; with --n, also the certified tree chain.
    Build {
        #[command(flatten)]
        ladder: LadderArgs,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    Entropy {
        #[command(flatten)]
        ladder: LadderArgs,
    },
}

#[derive(Args, Debug)]
struct EpArgs {
    #[arg(long)]
    n: u64,
    #[arg(long = "K")]
    k: f64,
    /// Entropy profile JSON with at least `Ntilde`.
    #[arg(long)]
    profile: String,
    #[arg(long = "S-max")]
    s_max: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum EpCmd {
    Expect {
        #[command(flatten)]
        args: EpArgs,
    },
    Deviate {
        #[command(flatten)]
        args: EpArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Use the theorem's displayed shift instead of the proof's.
        #[arg(long)]
        statement: bool,
    },
    Massart {
        #[arg(long = "E")]
        e_sup: f64,
        #[arg(long = "K-bound")]
        k_bound: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// Realized `sup_g |nu_n(g)|` per replicate.
    Sup {
        #[arg(long)]
        config: String,
    },
    /// Tail frequencies against a bound, with exact 99% intervals.
    Verify {
        #[arg(long)]
        config: String,
        /// Also write plot data (t, log frequency, log bound) here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Pathwise chain inequality on simulated datasets.
    Chaincheck {
        #[arg(long)]
        config: String,
    },
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: bad flags, malformed config, invalid parameters.
    Usage(String),
    /// Exit 1: a check failed or the computation could not complete.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::TruncationLevels(_)
            | Error::MissingLevel(_)
            | Error::SizeOverflow { .. }
            | Error::DegenerateProfile
            | Error::Unsupported(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

/// A finished command: both renderings, plus whether its check passed.
struct Output {
    tsv: String,
    json: Value,
    ok: bool,
}

impl Output {
    fn pass(tsv: String, json: Value) -> Self {
        Self { tsv, json, ok: true }
    }
}

type CmdResult = std::result::Result<Output, CliError>;

fn tsv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|x| fmt_sig9(*x)).collect::<Vec<_>>().join("\t"));
        out.push('\n');
    }
    out
}

/// Reads inline JSON (text starting with `{` or `[`) or a file.
fn read_json<T: DeserializeOwned>(src: &str) -> std::result::Result<T, CliError> {
    let trimmed = src.trim_start();
    let (text, name) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        (src.to_string(), "<inline>".to_string())
    } else {
        let text = fs::read_to_string(src).map_err(|e| CliError::Usage(format!("{src}: {e}")))?;
        (text, src.to_string())
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Usage(format!("{name}: invalid config at `{path}`: {}", e.into_inner()))
    })
}

fn json_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable output")
}

/// Parses and runs `argv`, writes the output, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", match &e {
                CliError::Usage(m) | CliError::Failure(m) => m,
            });
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> std::result::Result<i32, CliError> {
    let output = match cli.workers {
        Some(w) if w > 0 => with_workers(w, || dispatch(&cli.command))?,
        Some(_) => return Err(CliError::Usage("--workers must be positive".into())),
        None => dispatch(&cli.command),
    }?;
    let text = match cli.format {
        Format::Tsv => output.tsv,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output.json).expect("json");
            s.push('\n');
            s
        }
    };
    match output_path(cli) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))?;
            }
            fs::write(&path, text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
        }
        None => print!("{text}"),
    }
    Ok(if output.ok { 0 } else { 1 })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Psi(_) => "psi",
        Command::Norm(_) => "norm",
        Command::Bernstein(_) => "bernstein",
        Command::Finmax(_) => "finmax",
        Command::Tree(_) => "tree",
        Command::Bracket(_) => "bracket",
        Command::Ep(_) => "ep",
        Command::Simulate(_) => "simulate",
        Command::Report { .. } => "report",
    }
}

/// `--out` (relative to $BO_OUTPUT_DIR when set), else `$BO_OUTPUT_DIR/<command>.<ext>`,
/// else stdout.
fn output_path(cli: &Cli) -> Option<PathBuf> {
    let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    match (&cli.out, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => {
            let ext = match cli.format {
                Format::Tsv => "tsv",
                Format::Json => "json",
            };
            Some(d.join(format!("{}.{ext}", command_name(&cli.command))))
        }
        (None, None) => None,
    }
}

fn dispatch(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Psi(c) => psi(c),
        Command::Norm(c) => norm(c),
        Command::Bernstein(c) => bernstein(c),
        Command::Finmax(c) => finmax(c),
        Command::Tree(c) => tree(c),
        Command::Bracket(c) => bracket(c),
        Command::Ep(c) => ep(c),
        Command::Simulate(c) => simulate(c),
        Command::Report { config } => report(config.as_deref()),
    }
}

fn psi(cmd: &PsiCmd) -> CmdResult {
    match *cmd {
        PsiCmd::Eval { l, z } => {
            let v = psi_eval(l, z)?;
            let mut tsv = tsv_table(&["L", "z", "psi"], &[vec![l, z, v.value]]);
            if v.saturated {
                tsv.push_str("# saturated\n");
            }
            Ok(Output::pass(tsv, json!({"L": l, "z": z, "psi": v.value, "saturated": v.saturated})))
        }
        PsiCmd::Inv { l, t } => {
            let z = psi_inverse(l, t)?;
            Ok(Output::pass(
                tsv_table(&["L", "t", "psi_inv"], &[vec![l, t, z]]),
                json!({"L": l, "t": t, "psi_inv": z}),
            ))
        }
    }
}

fn read_sample(path: &PathBuf) -> std::result::Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        return read_json(&text);
    }
    text.split_whitespace()
        .map(|w| {
            w.parse::<f64>()
                .map_err(|e| CliError::Usage(format!("{}: `{w}`: {e}", path.display())))
        })
        .collect()
}

fn norm(cmd: &NormCmd) -> CmdResult {
    match cmd {
        NormCmd::Quad { dist, l } => {
            let d: DistributionSpec = read_json(dist)?;
            let v = orlicz_norm_quadrature(&d, *l)?;
            Ok(Output::pass(
                tsv_table(&["L", "norm"], &[vec![*l, v]]),
                json!({"L": l, "dist": d, "norm": v}),
            ))
        }
        NormCmd::Emp { sample, l } => {
            let xs = read_sample(sample)?;
            let v = orlicz_norm_empirical(&xs, *l)?;
            Ok(Output::pass(
                tsv_table(&["L", "n", "norm"], &[vec![*l, xs.len() as f64, v]]),
                json!({"L": l, "n": xs.len(), "norm": v}),
            ))
        }
    }
}

fn profile_of(a: &ProfileArgs) -> std::result::Result<BernsteinProfile, CliError> {
    Ok(BernsteinProfile::new(a.sigma, a.k, a.n)?)
}

fn bernstein(cmd: &BernsteinCmd) -> CmdResult {
    match cmd {
        BernsteinCmd::Check { dist, sigma, k, m_max } => {
            let dists = dist
                .iter()
                .map(|d| read_json::<DistributionSpec>(d))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let r = check_bernstein(&dists, *sigma, *k, *m_max)?;
            let rows: Vec<Vec<f64>> = r
                .ratios
                .iter()
                .enumerate()
                .map(|(i, x)| vec![(i + 2) as f64, *x])
                .collect();
            let mut tsv = tsv_table(&["m", "ratio"], &rows);
            tsv.push_str(&format!("# holds={} worst_m={}\n", r.holds, r.worst_m));
            Ok(Output {
                tsv,
                json: json_value(&r),
                ok: r.holds,
            })
        }
        BernsteinCmd::Tail { profile, t } => {
            let p = profile_of(profile)?;
            let bounds = t.iter().map(|&t| bernstein_tail(&p, t)).collect::<Result<Vec<_>, _>>()?;
            let rows: Vec<Vec<f64>> = bounds.iter().map(|b| vec![b.t, b.threshold, b.prob_bound]).collect();
            Ok(Output::pass(
                tsv_table(&["t", "threshold", "prob_cap"], &rows),
                json!({"profile": p, "bounds": bounds}),
            ))
        }
        BernsteinCmd::Orlicz { profile } => {
            let p = profile_of(profile)?;
            let o = bernstein_orlicz_norm(&p)?;
            Ok(Output::pass(
                tsv_table(&["tau", "L"], &[vec![o.tau, o.l]]),
                json!({"profile": p, "tau": o.tau, "L": o.l}),
            ))
        }
    }
}

fn finmax(cmd: &FinmaxCmd) -> CmdResult {
    match cmd {
        FinmaxCmd::Expect { p, tau, l, sigma, k, n } => {
            let (bound, detail) = match (tau, l, sigma, k, n) {
                (Some(tau), Some(l), None, None, None) => {
                    let input = MaxBoundInput::new(OrliczParams::new(*l, *tau)?, *p)?;
                    (max_expectation_bound(&input)?, json!({"tau": tau, "L": l}))
                }
                (None, _, Some(sigma), Some(k), Some(n)) => {
                    let profile = BernsteinProfile::new(*sigma, *k, *n)?;
                    (
                        max_bernstein_expectation_bound(&profile, *p)?,
                        json!({"sigma": sigma, "K": k, "n": n}),
                    )
                }
                _ => {
                    return Err(CliError::Usage(
                        "give either --tau and --L, or --sigma, --K and --n".into(),
                    ))
                }
            };
            Ok(Output::pass(
                tsv_table(&["p", "bound"], &[vec![*p as f64, bound]]),
                json!({"p": p, "params": detail, "bound": bound}),
            ))
        }
        FinmaxCmd::Deviate { args, t } => {
            let input = MaxBoundInput::new(OrliczParams::new(args.l, args.tau)?, args.p)?;
            let bounds = t
                .iter()
                .map(|&t| max_deviation_threshold(&input, t))
                .collect::<Result<Vec<_>, _>>()?;
            let norm_form = max_deviation_norm(&input)?;
            let rows: Vec<Vec<f64>> = bounds.iter().map(|b| vec![b.t, b.threshold, b.prob_bound]).collect();
            Ok(Output::pass(
                tsv_table(&["t", "threshold", "prob_cap"], &rows),
                json!({"p": args.p, "tau": args.tau, "L": args.l, "bounds": bounds, "orlicz": norm_form}),
            ))
        }
    }
}

fn tree(cmd: &TreeCmd) -> CmdResult {
    match cmd {
        TreeCmd::Validate { input } => {
            let doc: TreeDocument = read_json(input)?;
            let report = validate_tree(&doc.tree());
            let mut tsv = format!("valid\t{}\n", report.valid);
            for v in &report.violations {
                tsv.push_str(&format!("violation\t{v}\n"));
            }
            Ok(Output {
                tsv,
                json: json_value(&report),
                ok: report.valid,
            })
        }
        TreeCmd::Gamma { input } => {
            let doc: TreeDocument = read_json(input)?;
            let g = gamma_bound(&doc.certificate()?)?;
            Ok(Output::pass(
                tsv_table(&["gamma", "delta", "expectation_bound"], &[vec![
                    g.gamma,
                    g.expectation_bound - g.gamma,
                    g.expectation_bound,
                ]]),
                json_value(&g),
            ))
        }
        TreeCmd::Generic { input, delta } => {
            let doc: TreeDocument = read_json(input)?;
            let labeled = doc.labeled()?;
            let delta = delta.or(doc.delta).unwrap_or(0.0);
            let c = generic_constants(&labeled)?;
            let orlicz = generic_orlicz_deviation(&c, delta)?;
            let tal = talagrand_constants(&labeled, delta)?;
            let tsv = tsv_table(
                &["gamma1_star", "gamma2_star", "gamma_star", "tau_star", "L_star", "expectation_bound", "gamma_1_0", "gamma_2_0", "talagrand_bound"],
                &[vec![
                    c.gamma1_star,
                    c.gamma2_star,
                    c.gamma_star,
                    c.tau_star,
                    c.l_star,
                    orlicz.expectation_bound,
                    tal.gamma_1_0,
                    tal.gamma_2_0,
                    tal.expectation_bound,
                ]],
            );
            Ok(Output::pass(
                tsv,
                json!({"delta": delta, "constants": c, "orlicz": orlicz, "talagrand": tal}),
            ))
        }
        TreeCmd::Deviate { input, t, generic } => {
            let doc: TreeDocument = read_json(input)?;
            let cert = doc.certificate()?;
            let bounds = if *generic {
                let c = generic_constants(&cert.labeled)?;
                t.iter()
                    .map(|&t| generic_deviation_threshold(&c, cert.delta, t))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                t.iter()
                    .map(|&t| uniform_tree_deviation(&cert, t).map(|d| d.bound))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let rows: Vec<Vec<f64>> = bounds.iter().map(|b| vec![b.t, b.threshold, b.prob_bound]).collect();
            Ok(Output::pass(
                tsv_table(&["t", "threshold", "prob_cap"], &rows),
                json!({"generic": generic, "bounds": bounds}),
            ))
        }
    }
}

fn ladder_of(a: &LadderArgs) -> std::result::Result<(FunctionClass, EvalModel, Vec<crate::bracketing::BracketLevel>), CliError> {
    let class: FunctionClass = read_json(&a.class)?;
    let model = EvalModel::new(&class, a.depth)?;
    let levels = bracket_ladder(&model, a.k, a.m_max, a.depth, a.mode.into())?;
    Ok((class, model, levels))
}

fn profile_rows(p: &EntropyProfile) -> String {
    let mut out = String::from("s\tNtilde\tHtilde\tNprod\tHprod\n");
    for s in 0..=p.depth() {
        let nprod = p.nprod[s].map(|v| v.to_string()).unwrap_or_else(|| "overflow".into());
        out.push_str(&format!(
            "{s}\t{}\t{}\t{nprod}\t{}\n",
            p.ntilde[s],
            fmt_sig9(p.htilde[s]),
            fmt_sig9(p.hprod[s])
        ));
    }
    out
}

fn bracket(cmd: &BracketCmd) -> CmdResult {
    match cmd {
        BracketCmd::Build { ladder, n, eps } => {
            let (class, model, levels) = ladder_of(ladder)?;
            let profile = entropy_profile(&levels)?;
            let mut tsv = String::from("s\tcount\tcertificate\n");
            for l in &levels {
                let cert = match l.certificate {
                    LevelCertificate::Width { max_width, bound } => {
                        format!("width {} <= {}", fmt_sig9(max_width), fmt_sig9(bound))
                    }
                    LevelCertificate::Moment { k, worst_ratio, .. } => {
                        format!("moment K={} ratio {}", fmt_sig9(k), fmt_sig9(worst_ratio))
                    }
                };
                tsv.push_str(&format!("{}\t{}\t{cert}\n", l.s, l.count()));
            }
            let mut doc = json!({
                "cells": {"edges": model.edges(), "weights": model.weights()},
                "levels": levels,
                "profile": profile,
            });
            if let Some(n) = n {
                let build = build_chain(&ChainCheckConfig {
                    seed: 0,
                    replicates: 1,
                    n: *n,
                    class,
                    depth: ladder.depth,
                    k: ladder.k,
                    eps: *eps,
                    variant: Default::default(),
                    delta_scale: 1.0,
                })?;
                let tree = build.cert.labeled.tree();
                tsv.push_str(&format!(
                    "# chain sizes={:?} tau={} delta={} valid={}\n",
                    tree.sizes(),
                    fmt_sig9(build.cert.tau),
                    fmt_sig9(build.cert.delta),
                    validate_tree(tree).valid
                ));
                doc["chain"] = json_value(&TreeDocument::from_certificate(&build.cert));
                doc["K_levels"] = json_value(&build.k_levels);
            }
            Ok(Output::pass(tsv, doc))
        }
        BracketCmd::Entropy { ladder } => {
            let (_, _, levels) = ladder_of(ladder)?;
            let profile = entropy_profile(&levels)?;
            let sum = entropy_sum_bound(&profile, ladder.depth)?;
            let mut tsv = profile_rows(&profile);
            tsv.push_str(&format!(
                "# entropy_sum lhs={} rhs={} holds={}\n",
                fmt_sig9(sum.lhs),
                fmt_sig9(sum.rhs),
                sum.holds
            ));
            Ok(Output {
                tsv,
                json: json!({"profile": profile, "entropy_sum": sum}),
                ok: sum.holds,
            })
        }
    }
}

/// Profile file: `Ntilde` is required; derived fields, when present, are
/// recomputed.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    #[serde(rename = "Ntilde")]
    ntilde: Vec<u64>,
    #[serde(rename = "Htilde", default)]
    _htilde: Option<Value>,
    #[serde(rename = "Nprod", default)]
    _nprod: Option<Value>,
    #[serde(rename = "Hprod", default)]
    _hprod: Option<Value>,
    #[serde(default)]
    _approximate: Option<Value>,
}

fn ep_input_of(a: &EpArgs) -> std::result::Result<EpBoundInput, CliError> {
    let doc: ProfileDoc = read_json(&a.profile)?;
    let profile = EntropyProfile::from_counts(&doc.ntilde)?;
    Ok(EpBoundInput::new(a.n, a.k, profile, a.s_max)?)
}

fn ep(cmd: &EpCmd) -> CmdResult {
    match cmd {
        EpCmd::Expect { args } => {
            let input = ep_input_of(args)?;
            let scan = expectation_bound(&input)?;
            let mut tsv = scan.to_tsv();
            tsv.push_str(&format!("# argmin S={} E={}\n", scan.best_s, fmt_sig9(scan.best)));
            Ok(Output::pass(tsv, json!({"n": input.n, "K": input.k, "S_max": input.s_max, "scan": scan})))
        }
        EpCmd::Deviate { args, t, statement } => {
            let input = ep_input_of(args)?;
            let form = if *statement {
                DeviationForm::Statement
            } else {
                DeviationForm::Proof
            };
            let rows = t
                .iter()
                .map(|&t| deviation_threshold_with(&input, t, form))
                .collect::<Result<Vec<_>, _>>()?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.t, r.threshold, r.prob_bound, r.shift])
                .collect();
            Ok(Output::pass(
                tsv_table(&["t", "threshold", "prob_cap", "shift"], &table),
                json!({"form": form, "rows": rows, "orlicz": deviation_orlicz(&input)?}),
            ))
        }
        EpCmd::Massart { e_sup, k_bound, n, eps, t } => {
            let bounds = t
                .iter()
                .map(|&t| massart_threshold(*e_sup, *k_bound, *n, *eps, t))
                .collect::<Result<Vec<_>, _>>()?;
            let rows: Vec<Vec<f64>> = bounds.iter().map(|b| vec![b.t, b.threshold, b.prob_bound]).collect();
            Ok(Output::pass(
                tsv_table(&["t", "threshold", "prob_cap"], &rows),
                json!({"E_sup": e_sup, "K_bound": k_bound, "n": n, "eps": eps, "bounds": bounds}),
            ))
        }
    }
}

fn config_line<T: Serialize>(config: &T) -> String {
    format!("# config {}\n", serde_json::to_string(config).expect("json"))
}

fn tail_output(config: Value, report: &TailReport, header: String) -> Output {
    let mut tsv = header;
    tsv.push_str(&report.to_tsv());
    if let Some(e) = report.expectation {
        tsv.push_str(&format!(
            "# expectation mean={} stderr={} bound={} holds={}\n",
            fmt_sig9(e.mean),
            fmt_sig9(e.stderr),
            fmt_sig9(e.bound),
            e.holds
        ));
    }
    Output {
        tsv,
        json: json!({"config": config, "report": report, "refuted": report.refuted()}),
        ok: !report.refuted(),
    }
}

fn simulate(cmd: &SimulateCmd) -> CmdResult {
    match cmd {
        SimulateCmd::Sup { config } => {
            let cfg: SimulationConfig = read_json(config)?;
            let sups = simulate_sup(&cfg)?;
            let (mean, stderr) = mean_stderr(&sups);
            let mut tsv = config_line(&cfg);
            tsv.push_str("replicate\tsup\n");
            for (i, s) in sups.iter().enumerate() {
                tsv.push_str(&format!("{i}\t{}\n", fmt_sig9(*s)));
            }
            Ok(Output::pass(
                tsv,
                json!({"config": cfg, "sup": sups, "mean": mean, "stderr": stderr}),
            ))
        }
        SimulateCmd::Verify { config, plot } => {
            let cfg: VerifyConfig = read_json(config)?;
            let report = run_verify(&cfg)?;
            if let Some(path) = plot {
                fs::write(path, report.plot_tsv())
                    .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            }
            Ok(tail_output(json_value(&cfg), &report, config_line(&cfg)))
        }
        SimulateCmd::Chaincheck { config } => {
            let cfg: ChainCheckConfig = read_json(config)?;
            let (build, report) = run_chain_check(&cfg)?;
            let tree = build.cert.labeled.tree();
            let mut tsv = config_line(&cfg);
            tsv.push_str("replicates\tchecks\tviolations\tdelta\tmax_excess\n");
            tsv.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                report.replicates,
                report.checks,
                report.violations,
                fmt_sig9(report.delta),
                fmt_sig9(report.max_excess)
            ));
            Ok(Output {
                tsv,
                json: json!({
                    "config": cfg,
                    "report": report,
                    "sizes": tree.sizes(),
                    "tree_valid": validate_tree(tree).valid,
                }),
                ok: report.violations == 0,
            })
        }
    }
}

fn report(config: Option<&str>) -> CmdResult {
    let cfg: ReportConfig = match config {
        Some(src) => read_json(src)?,
        None => ReportConfig::default(),
    };
    let r = run_report(&cfg)?;
    Ok(Output {
        tsv: r.to_tsv(),
        ok: r.ok,
        json: json_value(&r),
    })
}
