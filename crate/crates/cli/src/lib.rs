//! Command-line front end: simulations, bracket checks, log-Sobolev
//! experiments and law comparisons, with machine-readable reports.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 a
//! statistical check failed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use srlb_core::diffusion::SpaceModel;
use srlb_core::functionals::{bootstrap_ratio_ci, lsi_ratio, verify_transfer, TransferReport};
use srlb_core::lie::hormander_flag;
use srlb_core::stats::{ks_two_sample, moment_ci, moment_two_sample, TwoSampleResult};
use srlb_core::{
    library, project, simulate_group_endpoints, simulate_quotient_endpoints, EndpointCloud, Error, EstimateCI,
    GroupModel, QuotientKind, QuotientMode, QuotientModel, SimConfig, TestFunction,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Accepted `--model` keys.
pub const REGISTRY: &[&str] = &[
    "heisenberg",
    "heis_product:n",
    "su2",
    "su2_product:n",
    "real_line",
    "grushin",
    "nonisotropic:a1,a2,...",
    "heis_like:matrix-file",
    "compact_heis:r",
    "hopf",
    "so3",
    "so4",
];

const MODEL_HELP: &str = "Model key: heisenberg, heis_product:n, su2, su2_product:n, real_line, grushin, \
nonisotropic:a1,a2,..., heis_like:matrix-file, compact_heis:r, hopf, so3, so4";

const AFTER_HELP: &str = "Model keys:
  heisenberg              Heisenberg group
  heis_product:n          n-fold product of Heisenberg groups
  su2                     SU(2)
  su2_product:n           n-fold product of SU(2)
  real_line               real line as a quotient of the Heisenberg group
  grushin                 Grushin plane as a quotient of the Heisenberg group
  nonisotropic:a1,...,an  quotient of heis_product:n by Σ aᵢzᵢ = 0 (nondecreasing, positive)
  heis_like:matrix-file   quotient of heis_product:n by the kernel of an m×n matrix
  compact_heis:r          compact Heisenberg nilmanifold with lattice spacing r
  hopf                    S² = SU(2)/U(1)
  so3                     SO(3) = SU(2)/{±1}
  so4                     SO(4) = SU(2)×SU(2)/{±(1,1)}

Every flag can also be given in a key=value file passed with --config;
flags on the command line take precedence.";

#[derive(Parser, Debug)]
#[command(name = "srlb", version, about, after_help = AFTER_HELP, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate endpoint clouds and write them as CSV, JSON or binary.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Rank flag of the horizontal frame under iterated brackets.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Hormander {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
    },
    /// Entropy, energy and their ratio for test functions.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Lsi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fns: Functions,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Check Ent ≤ C·E within 3 standard errors.
        #[arg(long)]
        constant: Option<f64>,
        /// Replace the delta-method ratio interval by a percentile bootstrap.
        #[arg(long, value_name = "RESAMPLES")]
        bootstrap: Option<usize>,
    },
    /// Compare quotient functionals with those of the lift on the group.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Transfer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fns: Functions,
        /// Simulation mode of the independent quotient cloud.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Check that projected endpoints have the law of the quotient diffusion.
    #[command(name = "pushforward-test", after_help = AFTER_HELP, args_override_self = true)]
    PushforwardTest {
        #[command(flatten)]
        common: Common,
        /// Reject a two-sample test below this p-value.
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
    },
    /// Compare simulated moments with closed-form values.
    #[command(after_help = AFTER_HELP, args_override_self = true)]
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, help = MODEL_HELP)]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(long = "n-paths", default_value_t = 10_000)]
    n_paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "SRLB_THREADS")]
    threads: Option<usize>,
    /// key=value file of default flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Functions {
    /// Comma-separated test function ids; all shipped ones when absent.
    #[arg(long = "fn", value_name = "IDS")]
    fns: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Projected,
    Intrinsic,
}

impl From<Mode> for QuotientMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Projected => QuotientMode::Projected,
            Mode::Intrinsic => QuotientMode::Intrinsic,
        }
    }
}

enum Failure {
    Invalid(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalDomain(_) | Error::PathBlowup { .. } | Error::Io(_) => Failure::Internal(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses a model key.
pub fn parse_model(key: &str) -> srlb_core::Result<SpaceModel> {
    let unknown = || {
        Error::InvalidInput(format!("unknown model `{key}`; registry: {}", REGISTRY.join(", ")))
    };
    let (name, arg) = match key.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (key, None),
    };
    let count = |a: Option<&str>| -> srlb_core::Result<usize> {
        let a = a.ok_or_else(|| Error::InvalidInput(format!("`{name}` needs a factor count, e.g. {name}:2")))?;
        a.trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("bad factor count `{a}` in `{key}`")))
    };
    let no_arg = |m: SpaceModel| {
        if arg.is_some() {
            Err(Error::InvalidInput(format!("`{name}` takes no parameter")))
        } else {
            Ok(m)
        }
    };
    match name {
        "heisenberg" => no_arg(GroupModel::heisenberg().into()),
        "su2" => no_arg(GroupModel::su2().into()),
        "real_line" => no_arg(QuotientModel::real_line().into()),
        "grushin" => no_arg(QuotientModel::grushin().into()),
        "hopf" => no_arg(QuotientModel::hopf().into()),
        "so3" => no_arg(QuotientModel::so3().into()),
        "so4" => no_arg(QuotientModel::so4().into()),
        "heis_product" => Ok(GroupModel::heisenberg_product(count(arg)?)?.into()),
        "su2_product" => Ok(GroupModel::su2_product(count(arg)?)?.into()),
        "nonisotropic" => {
            let a = arg.ok_or_else(|| Error::InvalidInput("nonisotropic needs an α-list, e.g. nonisotropic:1,2".into()))?;
            let alpha = a
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad α entry `{s}` in `{key}`")))
                })
                .collect::<srlb_core::Result<Vec<f64>>>()?;
            Ok(QuotientModel::nonisotropic(alpha)?.into())
        }
        "heis_like" => {
            let path = arg.ok_or_else(|| Error::InvalidInput("heis_like needs a matrix file, e.g. heis_like:A.txt".into()))?;
            let text = fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read `{path}`: {e}")))?;
            Ok(QuotientModel::heis_like(parse_matrix(&text)?)?.into())
        }
        "compact_heis" => {
            let a = arg.ok_or_else(|| Error::InvalidInput("compact_heis needs r, e.g. compact_heis:1".into()))?;
            let r = a
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad lattice spacing `{a}`")))?;
            Ok(QuotientModel::compact_heis(r)?.into())
        }
        _ => Err(unknown()),
    }
}

/// Whitespace-delimited rows; blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> srlb_core::Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("`{s}` is not a number"),
                })
            })
            .collect::<srlb_core::Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {first} columns, got {}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("matrix file has no rows".into()));
    }
    Ok(rows)
}

/// Reads `key=value` lines into `--key=value` arguments.
fn config_args(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("cannot read config `{}`: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let k = k.trim().replace('_', "-");
        if k == "config" {
            return Err(Failure::Invalid("config files cannot include other config files".into()));
        }
        out.push(format!("--{k}={}", v.trim()));
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand so that later
/// command-line flags override them.
fn expand_config(args: Vec<String>) -> CliResult<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate().skip(2) {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if a == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let extra = config_args(&path)?;
    let mut out = args[..2.min(args.len())].to_vec();
    out.extend(extra);
    out.extend(args.into_iter().skip(2));
    Ok(out)
}

/// Runs the command line `args` (program name first), writing reports to
/// `stdout` (or `--out`) and diagnostics to `stderr`.
pub fn run_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(f) => return report_failure(f, stderr),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_INVALID
                }
            };
        }
    };
    let threads = cli.common().threads;
    if threads == Some(0) {
        let _ = writeln!(stderr, "error: --threads must be at least 1");
        return EXIT_INVALID;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INTERNAL;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(outcome) => {
            let common = cli.common();
            let written = match &common.out {
                Some(p) => fs::write(p, &outcome.bytes).map_err(Failure::from),
                None => stdout.write_all(&outcome.bytes).map_err(Failure::from),
            };
            if let Err(f) = written {
                return report_failure(f, stderr);
            }
            if outcome.passed {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "check failed");
                EXIT_CHECK_FAILED
            }
        }
        Err(f) => report_failure(f, stderr),
    }
}

/// [`run_with`] on the process streams.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn report_failure(f: Failure, stderr: &mut dyn Write) -> i32 {
    match f {
        Failure::Invalid(m) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_INVALID
        }
        Failure::Internal(m) => {
            let _ = writeln!(stderr, "internal error: {m}");
            EXIT_INTERNAL
        }
    }
}

impl Cli {
    fn common(&self) -> &Common {
        match &self.command {
            Command::Simulate { common, .. }
            | Command::Hormander { common, .. }
            | Command::Lsi { common, .. }
            | Command::Transfer { common, .. }
            | Command::PushforwardTest { common, .. }
            | Command::Calibrate { common } => common,
        }
    }
}

struct Outcome {
    bytes: Vec<u8>,
    passed: bool,
}

impl Outcome {
    fn ok(bytes: Vec<u8>) -> Self {
        Outcome { bytes, passed: true }
    }
}

fn dispatch(cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Simulate { common, mode } => simulate(common, *mode),
        Command::Hormander { common, max_depth } => hormander(common, *max_depth),
        Command::Lsi {
            common,
            fns,
            mode,
            constant,
            bootstrap,
        } => lsi(common, fns, *mode, *constant, *bootstrap),
        Command::Transfer { common, fns, mode } => transfer(common, fns, *mode),
        Command::PushforwardTest { common, alpha } => pushforward(common, *alpha),
        Command::Calibrate { common } => calibrate(common),
    }
}

fn space(common: &Common) -> CliResult<SpaceModel> {
    Ok(parse_model(&common.model)?)
}

fn quotient(common: &Common) -> CliResult<QuotientModel> {
    match space(common)? {
        SpaceModel::Quotient(q) => Ok(q),
        SpaceModel::Group(_) => Err(Failure::Invalid(format!("`{}` is a group; a quotient model is required", common.model))),
    }
}

fn config(common: &Common, model: impl Into<SpaceModel>, seed: u64) -> CliResult<SimConfig> {
    Ok(SimConfig::new(model, common.t, common.h, common.n_paths, seed)?)
}

/// Simulates `space`; `mode` applies to quotients only.
fn cloud(common: &Common, space: &SpaceModel, mode: Option<Mode>, seed: u64) -> CliResult<EndpointCloud> {
    match space {
        SpaceModel::Group(g) => {
            if mode == Some(Mode::Intrinsic) {
                return Err(Failure::Invalid("--mode applies to quotient models only".into()));
            }
            Ok(simulate_group_endpoints(&config(common, g.clone(), seed)?)?)
        }
        SpaceModel::Quotient(q) => {
            let mode = mode.unwrap_or(Mode::Projected);
            Ok(simulate_quotient_endpoints(&config(common, q.clone(), seed)?, mode.into())?)
        }
    }
}

fn json_lines<T: Serialize>(items: &[T]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn simulate(common: &Common, mode: Option<Mode>) -> CliResult<Outcome> {
    let space = space(common)?;
    let c = cloud(common, &space, mode, common.seed)?;
    let mut out = Vec::new();
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => c.write_csv(&mut out)?,
        Format::Bin => c.write_binary(&mut out)?,
        Format::Json => {
            let rows = c.coordinate_rows();
            let v = json!({
                "model": space.name(),
                "t": common.t,
                "h": common.h,
                "n_paths": common.n_paths,
                "seed": common.seed,
                "provenance": format!("{:?}", c.provenance).to_lowercase(),
                "columns": rows.first().map_or(0, Vec::len),
                "rows": rows,
            });
            serde_json::to_writer(&mut out, &v)?;
            out.push(b'\n');
        }
    }
    Ok(Outcome::ok(out))
}

fn hormander(common: &Common, max_depth: usize) -> CliResult<Outcome> {
    let space = space(common)?;
    let g = match &space {
        SpaceModel::Group(g) => g.clone(),
        SpaceModel::Quotient(q) => q.base().clone(),
    };
    let flag = hormander_flag(g.frame(), g.structure_constants(), max_depth)?;
    let out = match common.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let v = json!({
                "model": space.name(),
                "group": g.kind().name(),
                "algebra_dim": g.structure_constants().dim(),
                "ranks": flag.ranks,
                "satisfied_at": flag.satisfied_at,
            });
            let mut s = serde_json::to_vec(&v)?;
            s.push(b'\n');
            s
        }
        _ => {
            let depth = match flag.satisfied_at {
                Some(d) => format!("satisfied at depth {d}"),
                None => format!("not satisfied up to depth {max_depth}"),
            };
            format!(
                "model: {}\ngroup: {}\nranks: {:?}\n{depth}\n",
                space.name(),
                g.kind().name(),
                flag.ranks
            )
            .into_bytes()
        }
    };
    Ok(Outcome::ok(out))
}

fn functions(space: &SpaceModel, fns: &Functions, skip_const: bool) -> CliResult<Vec<TestFunction>> {
    Ok(match &fns.fns {
        Some(list) => list
            .split(',')
            .map(|id| library::lookup(space, id.trim()))
            .collect::<srlb_core::Result<_>>()?,
        None => library::catalog(space)
            .into_iter()
            .filter(|f| !(skip_const && f.id() == "const"))
            .collect(),
    })
}

/// Per-function report.
#[derive(Serialize)]
struct FunctionReport {
    model: String,
    t: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    function_id: String,
    entropy: EstimateCI,
    energy: EstimateCI,
    ratio: Option<EstimateCI>,
    ci: Option<[f64; 2]>,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio_normalized: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transfer: Option<TransferReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_on_shared_cloud: Option<bool>,
    note: &'static str,
}

const RATIO_NOTE: &str = "an observed ratio is a lower bound for any valid log-Sobolev constant";

fn lsi(
    common: &Common,
    fns: &Functions,
    mode: Option<Mode>,
    constant: Option<f64>,
    bootstrap: Option<usize>,
) -> CliResult<Outcome> {
    if let Some(c) = constant {
        if !(c.is_finite() && c > 0.0) {
            return Err(Failure::Invalid("--constant must be positive".into()));
        }
    }
    let space = space(common)?;
    let c = cloud(common, &space, mode, common.seed)?;
    let mut reports = Vec::new();
    for f in functions(&space, fns, true)? {
        let r = lsi_ratio(&f, &c, constant)?;
        let ratio = match bootstrap {
            Some(n) => bootstrap_ratio_ci(&f, &c, n, common.seed)?,
            None => r.ratio,
        };
        reports.push(FunctionReport {
            model: space.name(),
            t: common.t,
            h: common.h,
            n_paths: common.n_paths,
            seed: common.seed,
            function_id: f.id().to_string(),
            entropy: r.entropy,
            energy: r.energy,
            ratio: Some(ratio),
            ci: Some([ratio.ci_low, ratio.ci_high]),
            pass: r.constant_bound_satisfied.unwrap_or(true),
            ratio_normalized: Some(r.ratio_normalized),
            constant,
            transfer: None,
            exact_on_shared_cloud: None,
            note: RATIO_NOTE,
        });
    }
    let passed = reports.iter().all(|r| r.pass);
    Ok(Outcome {
        bytes: json_lines(&reports)?,
        passed,
    })
}

fn bits_equal(a: &EstimateCI, b: &EstimateCI) -> bool {
    a.value.to_bits() == b.value.to_bits() && a.std_error.to_bits() == b.std_error.to_bits()
}

fn transfer(common: &Common, fns: &Functions, mode: Option<Mode>) -> CliResult<Outcome> {
    let q = quotient(common)?;
    let space: SpaceModel = q.clone().into();
    let mode = mode.unwrap_or(if q.has_intrinsic_frame() { Mode::Intrinsic } else { Mode::Projected });
    let group = simulate_group_endpoints(&config(common, q.base().clone(), common.seed)?)?;
    let independent = simulate_quotient_endpoints(&config(common, q.clone(), common.seed.wrapping_add(1))?, mode.into())?;
    // Same seed: the projected cloud is the image of `group`.
    let shared = simulate_quotient_endpoints(&config(common, q.clone(), common.seed)?, QuotientMode::Projected)?;
    let mut reports = Vec::new();
    for f in functions(&space, fns, false)? {
        let r = verify_transfer(&f, &group, &independent, &q)?;
        let exact = verify_transfer(&f, &group, &shared, &q)?;
        let exact_ok = bits_equal(&exact.entropy_group, &exact.entropy_quotient)
            && bits_equal(&exact.energy_group, &exact.energy_quotient);
        let ratio = lsi_ratio(&f, &independent, None).ok().map(|l| l.ratio);
        reports.push(FunctionReport {
            model: space.name(),
            t: common.t,
            h: common.h,
            n_paths: common.n_paths,
            seed: common.seed,
            function_id: f.id().to_string(),
            entropy: r.entropy_quotient,
            energy: r.energy_quotient,
            ratio,
            ci: ratio.map(|r| [r.ci_low, r.ci_high]),
            pass: r.pass && exact_ok,
            ratio_normalized: None,
            constant: None,
            transfer: Some(r),
            exact_on_shared_cloud: Some(exact_ok),
            note: RATIO_NOTE,
        });
    }
    let passed = reports.iter().all(|r| r.pass);
    Ok(Outcome {
        bytes: json_lines(&reports)?,
        passed,
    })
}

#[derive(Serialize)]
struct CheckReport {
    model: String,
    check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    coordinate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<TwoSampleResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    pass: bool,
}

fn det(m: &[f64], n: usize) -> f64 {
    let mut a = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap_or(c);
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
            }
            d = -d;
        }
        d *= a[c * n + c];
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
        }
    }
    d
}

/// `max |MᵀM − I|` and `|det M − 1|` over the cloud.
fn orthogonality_defects(rows: &[Vec<f64>], n: usize) -> (f64, f64) {
    let (mut orth, mut dd) = (0.0f64, 0.0f64);
    for m in rows {
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
                orth = orth.max((s - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        dd = dd.max((det(m, n) - 1.0).abs());
    }
    (orth, dd)
}

fn pushforward(common: &Common, alpha: f64) -> CliResult<Outcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Invalid("--alpha must lie in (0, 1)".into()));
    }
    let q = quotient(common)?;
    let name = q.name();
    let mut checks = Vec::new();
    let projected = simulate_quotient_endpoints(&config(common, q.clone(), common.seed)?, QuotientMode::Projected)?;
    let defect = |check: &str, max_defect: f64, tolerance: f64| CheckReport {
        model: name.clone(),
        check: check.into(),
        coordinate: None,
        test: None,
        max_defect: Some(max_defect),
        tolerance: Some(tolerance),
        pass: max_defect <= tolerance,
    };
    if q.has_intrinsic_frame() {
        let intrinsic = simulate_quotient_endpoints(
            &config(common, q.clone(), common.seed.wrapping_add(1))?,
            QuotientMode::Intrinsic,
        )?;
        for j in 0..q.coord_dim() {
            let (a, b) = (projected.column(j), intrinsic.column(j));
            let ks = ks_two_sample(&a, &b)?;
            checks.push(CheckReport {
                model: name.clone(),
                check: "ks".into(),
                coordinate: Some(j),
                test: Some(ks),
                max_defect: None,
                tolerance: None,
                pass: ks.p_value > alpha,
            });
            let m2 = moment_two_sample(&a, &b, 2)?;
            checks.push(CheckReport {
                model: name.clone(),
                check: "moment".into(),
                coordinate: Some(j),
                test: Some(m2),
                max_defect: None,
                tolerance: None,
                pass: m2.p_value > alpha,
            });
        }
    }
    let rows = projected.coordinate_rows();
    match q.kind() {
        QuotientKind::Hopf => {
            let d = rows
                .iter()
                .map(|r| (r.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
                .fold(0.0, f64::max);
            checks.push(defect("unit_sphere", d, 1e-9));
        }
        QuotientKind::So3 | QuotientKind::So4 => {
            let n = if matches!(q.kind(), QuotientKind::So3) { 3 } else { 4 };
            let (orth, dd) = orthogonality_defects(&rows, n);
            checks.push(defect("orthogonal", orth, 1e-8));
            checks.push(defect("unit_determinant", dd, 1e-8));
            // π(−g) = π(g) bit for bit.
            let source = projected.source.as_ref().ok_or_else(|| Failure::Internal("projected cloud lacks its source".into()))?;
            let mut mismatches = 0usize;
            for (g, m) in source.iter().zip(projected.quotient_points().unwrap_or(&[])) {
                let neg = match g {
                    srlb_core::GroupPoint::Su2(p) => srlb_core::GroupPoint::Su2(p.neg()),
                    srlb_core::GroupPoint::Product(srlb_core::groups::ProductPoint::Su2(v)) => {
                        srlb_core::GroupPoint::Product(srlb_core::groups::ProductPoint::Su2(v.iter().map(|p| p.neg()).collect()))
                    }
                    _ => return Err(Failure::Internal("unexpected base point".into())),
                };
                let pn = project(&q, &neg)?;
                if pn.coords.iter().zip(&m.coords).any(|(a, b)| a.to_bits() != b.to_bits()) {
                    mismatches += 1;
                }
            }
            checks.push(defect("double_cover", mismatches as f64, 0.0));
        }
        _ if !q.has_intrinsic_frame() => {
            return Err(Failure::Invalid(format!("no pushforward check is available for {name}")));
        }
        _ => {}
    }
    let passed = checks.iter().all(|c| c.pass);
    Ok(Outcome {
        bytes: json_lines(&checks)?,
        passed,
    })
}

#[derive(Serialize)]
struct CalibrationReport {
    model: String,
    t: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    quantity: &'static str,
    estimate: EstimateCI,
    ci: [f64; 2],
    oracle: f64,
    /// Allowance for the known time-discretization bias.
    allowance: f64,
    pass: bool,
}

fn calibrate(common: &Common) -> CliResult<Outcome> {
    let space = space(common)?;
    let (t, h) = (common.t, common.h);
    let (quantity, samples, oracle, allowance): (&'static str, Vec<f64>, f64, f64) = match &space {
        SpaceModel::Group(g) if g.kind() == srlb_core::GroupKind::Heisenberg => {
            let c = cloud(common, &space, None, common.seed)?;
            ("E[z^2]", c.column(2).iter().map(|z| z * z).collect(), t * t / 4.0, h * t / 4.0)
        }
        SpaceModel::Group(g) if g.kind() == srlb_core::GroupKind::Su2 => {
            let c = cloud(common, &space, None, common.seed)?;
            ("E[Re Tr g]", c.column(0).iter().map(|a| 2.0 * a).collect(), 2.0 * (-t).exp(), 2e-3)
        }
        SpaceModel::Quotient(q) if matches!(q.kind(), QuotientKind::RealLine) => {
            let c = cloud(common, &space, Some(Mode::Intrinsic), common.seed)?;
            ("Var[u]", c.column(0).iter().map(|u| u * u).collect(), t, 0.0)
        }
        SpaceModel::Quotient(q) if matches!(q.kind(), QuotientKind::Grushin) => {
            let c = cloud(common, &space, Some(Mode::Intrinsic), common.seed)?;
            ("Var[v]", c.column(1).iter().map(|v| v * v).collect(), t * t / 2.0, h * t / 2.0)
        }
        _ => {
            return Err(Failure::Invalid(format!(
                "no calibration oracle for {}; available: heisenberg, su2, real_line, grushin",
                space.name()
            )))
        }
    };
    let estimate = moment_ci(&samples, 1)?;
    let pass = estimate.within(oracle, 3.0, allowance);
    let report = CalibrationReport {
        model: space.name(),
        t,
        h,
        n_paths: common.n_paths,
        seed: common.seed,
        quantity,
        estimate,
        ci: [estimate.ci_low, estimate.ci_high],
        oracle,
        allowance,
        pass,
    };
    Ok(Outcome {
        bytes: json_lines(&[report])?,
        passed: pass,
    })
}

/// Parses a report line produced by `lsi` or `transfer`.
pub fn parse_report(line: &str) -> Option<Value> {
    serde_json::from_str(line).ok()
}
