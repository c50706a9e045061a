//! The `nilrec` command line: evaluate and classify generalized
//! polynomials, run witness searches, simulate nilsystems and emit
//! machine-readable reports.
//!
//! Exit codes: 0 on success (including searches that end `exhausted` or
//! `budget_hit`), 1 on output failures, 2 on bad input, 3 on a misconfigured
//! budget.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::genpoly::{compose, GenPoly};
use crate::nilsys::{return_set, vip_return_test, Recurrent, Scalar, SystemDesc};
use crate::rational::{format_q, parse_q, Q};
use crate::search::{
    find_small_alpha, footnote_report, gps_search, ipstar_hit_test, skob_search, skop_search,
    DeclaredMap, SearchBudget, SkobBound,
};
use crate::setcore::{nonempty_subsets, IndexInterval};
use crate::setpoly::{SetMapping, SetPolynomial, TProducing, Value, ValueGroup};

#[derive(Parser, Debug)]
#[command(name = "nilrec", version, about = "Set-polynomials, bracket polynomials and recurrence in nilsystems")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug)]
pub struct RunArgs {
    /// Arithmetic for nilsystem commands.
    #[arg(long, global = true, value_enum, default_value = "exact")]
    pub mode: Mode,
    /// Largest admissible float-mode rounding error.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Radius, as "p/q" or a decimal.
    #[arg(long, global = true)]
    pub eps: Option<String>,
    #[arg(long, global = true)]
    pub r: Option<u32>,
    #[arg(long, global = true)]
    pub s: Option<usize>,
    #[arg(long, global = true)]
    pub horizon: Option<u64>,
    #[arg(long = "budget-subsets", global = true)]
    pub budget_subsets: Option<u64>,
    #[arg(long = "budget-subcollections", global = true)]
    pub budget_subcollections: Option<u64>,
    /// Wall-clock cap in seconds.
    #[arg(long = "time-cap", global = true)]
    pub time_cap: Option<f64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Report wall-clock times (otherwise zeroed, keeping output
    /// byte-identical across runs).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a generalized polynomial at integer points ("3" or "1,2").
    GpEval {
        file: PathBuf,
        #[arg(allow_negative_numbers = true)]
        points: Vec<String>,
    },
    /// Height, width, degree, open and constant-free flags.
    GpAttrs { file: PathBuf },
    /// First nonempty alpha in [r] with every map's value within eps of the
    /// integers.
    Witness { file: PathBuf },
    /// Subcollection on which the floor of a near-integer map is polynomial.
    Skob {
        file: PathBuf,
        /// Replace the strict 1/r^d hypothesis by this bound.
        #[arg(long)]
        bound: Option<String>,
    },
    /// Simultaneous version of skob for several maps.
    Skop { file: PathBuf },
    /// Subcollection on which generalized polynomials of set-polynomials are
    /// polynomial.
    Gps { file: PathBuf },
    /// Return times of an orbit to its base point.
    ReturnSet { system: PathBuf },
    /// IP_r* test of a return set, or the footnote fixture with --footnote.
    IpTest {
        system: Option<PathBuf>,
        #[arg(long)]
        footnote: bool,
        /// Seed pool, "1..12" or "1,2,5".
        #[arg(long, default_value = "1..10")]
        pool: String,
    },
    /// Search alpha with the orbit at phi(alpha) close to the base point.
    VipTest { system: PathBuf, phi: PathBuf },
    /// Orbit points for |n| <= horizon.
    Orbit { system: PathBuf },
    /// Generate a random instance from --seed.
    GenInstance {
        #[arg(value_enum)]
        kind: InstanceKind,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InstanceKind {
    /// Sparse rational set-polynomial.
    Setpoly,
    /// Set-polynomial whose producing values are within 1/r^d of integers.
    NearInteger,
    /// Affine skew product with rational rotation part.
    Skew,
    /// Heisenberg niltranslation with rational entries.
    Heisenberg,
}

/// A failed run: message and exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Budget(_)) { 3 } else { 2 };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses the arguments, runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Runs a parsed command, writing to `--output` or to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let cfg = &cli.run;
    if cfg.mode == Mode::Float && !(cfg.tolerance.is_finite() && cfg.tolerance > 0.0) {
        return Err(CliError::input("--tolerance must be positive in float mode"));
    }
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be positive"));
        }
        // a second configuration in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let budget = budget(cfg)?;
    let text = dispatch(cli, &budget)?;
    match &cfg.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError {
            code: 1,
            message: e.to_string(),
        }),
    }
}

fn budget(cfg: &RunArgs) -> CliResult<SearchBudget> {
    let mut b = SearchBudget::default();
    if let Some(v) = cfg.budget_subsets {
        b.max_subsets = v;
    }
    if let Some(v) = cfg.budget_subcollections {
        b.max_subcollections = v;
    }
    if let Some(v) = cfg.time_cap {
        b.time_cap = v;
    }
    if let Some(r) = cfg.r {
        b.max_r = b.max_r.max(r);
    }
    b.validate()?;
    Ok(b)
}

fn dispatch(cli: &Cli, budget: &SearchBudget) -> CliResult<String> {
    let cfg = &cli.run;
    let exact_only = |name: &str| -> CliResult<()> {
        if cfg.mode == Mode::Float {
            return Err(CliError::input(format!("{name} supports exact mode only")));
        }
        Ok(())
    };
    let format = |default: Format, allowed: &[Format]| -> CliResult<Format> {
        let f = cfg.format.unwrap_or(default);
        if !allowed.contains(&f) {
            return Err(CliError::input(format!("--format {f:?} is not available here")));
        }
        Ok(f)
    };
    match &cli.command {
        Command::GpEval { file, points } => {
            exact_only("gp-eval")?;
            let fmt = format(Format::Json, &[Format::Json, Format::Csv, Format::Text])?;
            gp_eval(&read_json(file)?, points, fmt, cfg)
        }
        Command::GpAttrs { file } => {
            exact_only("gp-attrs")?;
            let fmt = format(Format::Text, &[Format::Json, Format::Text])?;
            gp_attrs(&read_json(file)?, fmt, cfg)
        }
        Command::Witness { file } => {
            exact_only("witness")?;
            format(Format::Json, &[Format::Json])?;
            let maps = read_maps(file)?;
            let eps = required_q(&cfg.eps, "--eps")?;
            let r = match cfg.r {
                Some(r) => r,
                None => maps
                    .iter()
                    .map(|m| m.ground().len() as u32)
                    .min()
                    .ok_or_else(|| CliError::input("no mappings given"))?,
            };
            let report = find_small_alpha(&maps, IndexInterval::new(r)?, &eps, budget)?;
            emit_json(&report, cfg)
        }
        Command::Skob { file, bound } => {
            exact_only("skob")?;
            format(Format::Json, &[Format::Json])?;
            let phi: SetPolynomial = read_json(file)?;
            let s = required(cfg.s, "--s")?;
            let bound = match bound {
                Some(b) => SkobBound::Relaxed(parse_q(b)?),
                None => SkobBound::Strict,
            };
            emit_json(&skob_search(&phi, s, bound, budget)?, cfg)
        }
        Command::Skop { file } => {
            exact_only("skop")?;
            format(Format::Json, &[Format::Json])?;
            let maps = read_maps(file)?;
            let s = required(cfg.s, "--s")?;
            emit_json(&skop_search(&maps, s, budget)?, cfg)
        }
        Command::Gps { file } => {
            exact_only("gps")?;
            format(Format::Json, &[Format::Json])?;
            let inst: GpsInstance = read_json(file)?;
            let s = required(cfg.s, "--s")?;
            let mut maps = Vec::with_capacity(inst.maps.len());
            for m in &inst.maps {
                maps.push(DeclaredMap {
                    map: compose(&m.genpoly, &m.inner)?,
                    attrs: m.genpoly.attributes(),
                });
            }
            emit_json(&gps_search(&maps, s, budget)?, cfg)
        }
        Command::IpTest {
            footnote: true,
            system: None,
            ..
        } => {
            exact_only("ip-test --footnote")?;
            format(Format::Json, &[Format::Json])?;
            emit_json(&footnote_report(cfg.r.unwrap_or(5))?, cfg)
        }
        Command::IpTest { footnote: true, .. } => Err(CliError::input(
            "--footnote takes no system file",
        )),
        Command::IpTest {
            system: None, ..
        } => Err(CliError::input("ip-test needs a system file or --footnote")),
        Command::GenInstance { kind, d } => {
            format(Format::Json, &[Format::Json])?;
            let r = cfg.r.unwrap_or(6);
            match kind {
                InstanceKind::Setpoly | InstanceKind::NearInteger => {
                    emit_json(&random_setpoly(*kind, *d, r, cfg.seed)?, cfg)
                }
                InstanceKind::Skew | InstanceKind::Heisenberg => {
                    emit_json(&random_system(*kind, r as usize, cfg.seed)?, cfg)
                }
            }
        }
        _ => match cfg.mode {
            Mode::Exact => system_command::<Q>(cli, budget),
            Mode::Float => system_command::<f64>(cli, budget),
        },
    }
}

fn system_command<S: Scalar>(cli: &Cli, budget: &SearchBudget) -> CliResult<String> {
    let cfg = &cli.run;
    let scalar = |text: &Option<String>, flag: &str| -> CliResult<S> {
        let t = text
            .as_deref()
            .ok_or_else(|| CliError::input(format!("{flag} is required")))?;
        Ok(S::parse(t)?)
    };
    let check_float = |orbit: &dyn Recurrent<S>, horizon: u64| -> CliResult<()> {
        if !S::EXACT {
            let bound = orbit.float_error_bound(horizon);
            if bound > cfg.tolerance {
                return Err(CliError::input(format!(
                    "estimated float error {bound:e} exceeds --tolerance {:e}; \
                     use exact mode or a smaller horizon",
                    cfg.tolerance
                )));
            }
        }
        Ok(())
    };
    match &cli.command {
        Command::ReturnSet { system } => {
            let orbit = read_system::<S>(system)?;
            let eps = scalar(&cfg.eps, "--eps")?;
            let horizon = required(cfg.horizon, "--horizon")?;
            check_float(orbit.as_ref(), horizon)?;
            let rs = return_set(&orbit, &eps, horizon)?;
            match cfg.format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&rs, cfg),
                Format::Csv => {
                    let mut buf = Vec::new();
                    rs.write_csv(&mut buf)?;
                    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
                }
                Format::Text => Err(CliError::input("--format text is not available here")),
            }
        }
        Command::IpTest {
            system: Some(system),
            pool,
            ..
        } => {
            let orbit = read_system::<S>(system)?;
            if orbit.time_dim() != 1 {
                return Err(CliError::input("ip-test needs a system with one time variable"));
            }
            let eps = scalar(&cfg.eps, "--eps")?;
            let horizon = required(cfg.horizon, "--horizon")?;
            let r = required(cfg.r, "--r")? as usize;
            let pool = parse_pool(pool)?;
            let reach = pool.iter().map(|p| p.unsigned_abs()).max().unwrap_or(0) * r as u64;
            if reach > horizon {
                return Err(CliError::input(format!(
                    "sums reach {reach}, beyond the horizon {horizon}"
                )));
            }
            check_float(orbit.as_ref(), horizon)?;
            let rs = return_set(&orbit, &eps, horizon)?;
            let members = rs.member_set();
            let report = ipstar_hit_test(|n| members.contains(&vec![n]), &pool, r, budget)?;
            emit_json(&report, cfg)
        }
        Command::VipTest { system, phi } => {
            let orbit = read_system::<S>(system)?;
            let phi: SetPolynomial = read_json(phi)?;
            let eps = scalar(&cfg.eps, "--eps")?;
            let report = vip_return_test(&orbit, &phi, &eps, budget)?;
            emit_json(&report, cfg)
        }
        Command::Orbit { system } => {
            let orbit = read_system::<S>(system)?;
            if orbit.time_dim() != 1 {
                return Err(CliError::input("orbit needs a system with one time variable"));
            }
            let horizon = required(cfg.horizon, "--horizon")? as i64;
            let mut points = Vec::new();
            for n in -horizon..=horizon {
                let p = orbit.point(&[n])?;
                points.push(OrbitPoint {
                    n,
                    point: p.iter().map(Scalar::to_text).collect(),
                });
            }
            match cfg.format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&points, cfg),
                Format::Csv => {
                    let mut out = String::from("n,point\n");
                    for p in &points {
                        out.push_str(&format!("{},{}\n", p.n, p.point.join(";")));
                    }
                    Ok(out)
                }
                Format::Text => Err(CliError::input("--format text is not available here")),
            }
        }
        _ => unreachable!("handled by dispatch"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OrbitPoint {
    n: i64,
    point: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GpsInstance {
    pub maps: Vec<GpsMap>,
}

/// A generalized polynomial applied to an integer-valued set-polynomial.
#[derive(Debug, Serialize, Deserialize)]
pub struct GpsMap {
    pub genpoly: GenPoly,
    pub inner: SetPolynomial,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct AttrsReport {
    pub h: u32,
    pub w: u32,
    pub d: u32,
    pub open: bool,
    pub constant_free: bool,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct EvalRow {
    point: Vec<i64>,
    value: String,
}

fn gp_eval(gp: &GenPoly, points: &[String], fmt: Format, cfg: &RunArgs) -> CliResult<String> {
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let point = p
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|_| CliError::input(format!("not an integer point: {p:?}")))
            })
            .collect::<CliResult<Vec<i64>>>()?;
        let value = format_q(&gp.eval_int(&point)?);
        rows.push(EvalRow { point, value });
    }
    let joined = |r: &EvalRow| {
        r.point
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";")
    };
    Ok(match fmt {
        Format::Json => emit_json(&rows, cfg)?,
        Format::Csv => {
            let mut out = String::from("point,value\n");
            for r in &rows {
                out.push_str(&format!("{},{}\n", joined(r), r.value));
            }
            out
        }
        Format::Text => rows
            .iter()
            .map(|r| format!("{} {}\n", joined(r), r.value))
            .collect(),
    })
}

fn gp_attrs(gp: &GenPoly, fmt: Format, cfg: &RunArgs) -> CliResult<String> {
    let a = gp.attributes();
    let rep = AttrsReport {
        h: a.h,
        w: a.w,
        d: a.d,
        open: gp.is_open(),
        constant_free: gp.is_constant_free(),
    };
    match fmt {
        Format::Json => emit_json(&rep, cfg),
        _ => Ok(format!(
            "h={} w={} d={} open={} constant_free={}\n",
            rep.h, rep.w, rep.d, rep.open, rep.constant_free
        )),
    }
}

fn required<T: Copy>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::input(format!("{flag} is required")))
}

fn required_q(v: &Option<String>, flag: &str) -> CliResult<Q> {
    let t = v
        .as_deref()
        .ok_or_else(|| CliError::input(format!("{flag} is required")))?;
    Ok(parse_q(t)?)
}

fn parse_pool(text: &str) -> CliResult<Vec<i64>> {
    let bad = || CliError::input(format!("bad pool {text:?}; use \"a..b\" or \"a,b,c\""));
    if let Some((a, b)) = text.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// One set-polynomial or an array of them.
fn read_maps(path: &Path) -> CliResult<Vec<SetPolynomial>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<SetPolynomial>),
        One(SetPolynomial),
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    // parse as a generic value first so that syntax errors keep positions
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let parsed = if value.is_array() {
        serde_json::from_value::<Vec<SetPolynomial>>(value).map(OneOrMany::Many)
    } else {
        serde_json::from_value::<SetPolynomial>(value).map(OneOrMany::One)
    };
    match parsed.map_err(|e| CliError::input(format!("{}: {e}", path.display())))? {
        OneOrMany::Many(v) => Ok(v),
        OneOrMany::One(p) => Ok(vec![p]),
    }
}

fn read_system<S: Scalar>(path: &Path) -> CliResult<Box<dyn Recurrent<S>>> {
    let desc: SystemDesc = read_json(path)?;
    Ok(desc.build::<S>()?)
}

/// Serializes, checks that the output parses back to the same report, and
/// zeroes wall-clock fields unless `--timing` is given.
fn emit_json<T: Serialize + DeserializeOwned>(value: &T, cfg: &RunArgs) -> CliResult<String> {
    let internal = |e: serde_json::Error| CliError {
        code: 1,
        message: format!("serializing report: {e}"),
    };
    let mut v = serde_json::to_value(value).map_err(internal)?;
    let back: T = serde_json::from_value(v.clone()).map_err(internal)?;
    if serde_json::to_value(&back).map_err(internal)? != v {
        return Err(CliError {
            code: 1,
            message: "report does not round-trip through its schema".into(),
        });
    }
    if !cfg.timing {
        zero_timings(&mut v);
    }
    let mut text = serde_json::to_string_pretty(&v).map_err(internal)?;
    text.push('\n');
    Ok(text)
}

fn zero_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                if k == "elapsed_ms" {
                    *x = serde_json::Value::from(0);
                } else {
                    zero_timings(x);
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(zero_timings),
        _ => {}
    }
}

/// Random set-polynomial of degree `d` on `[r]`: each subset of size at most
/// `d` carries a value with probability 1/2. `NearInteger` values are
/// integers plus offsets of norm below `1/r^d`.
pub fn random_setpoly(kind: InstanceKind, d: usize, r: u32, seed: u64) -> crate::Result<SetPolynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rr = IndexInterval::new(r)?;
    let scale = 4 * (r as i64).pow(d as u32);
    let mut entries = Vec::new();
    for alpha in nonempty_subsets(rr, Some(d)) {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let v = match kind {
            InstanceKind::NearInteger => {
                let k: i64 = rng.gen_range(-3..=3);
                let off: i64 = rng.gen_range(-3..=3);
                Q::new((k * scale + off).into(), scale.into())
            }
            _ => Q::new(rng.gen_range(-12i64..=12).into(), rng.gen_range(1i64..=9).into()),
        };
        entries.push((alpha, Value::scalar(v)));
    }
    SetPolynomial::new(TProducing::new(d, rr, ValueGroup::Rationals, entries)?)
}

/// Random system: a skew product on `T^k` (`k = min(r, 3)`) or a Heisenberg
/// translation, with small-denominator rational parameters.
pub fn random_system(kind: InstanceKind, r: usize, seed: u64) -> crate::Result<SystemDesc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = |rng: &mut ChaCha8Rng| {
        let den: i64 = rng.gen_range(2..=30);
        format_q(&Q::new(rng.gen_range(0..den).into(), den.into()))
    };
    Ok(match kind {
        InstanceKind::Heisenberg => SystemDesc::Heisenberg {
            t: [q(&mut rng), q(&mut rng), q(&mut rng)],
            x0: None,
        },
        _ => {
            let k = r.clamp(1, 3);
            let alpha = (0..k).map(|_| q(&mut rng)).collect();
            let a = (0..k)
                .map(|i| (0..i).map(|_| rng.gen_range(-2..=2)).collect())
                .collect();
            SystemDesc::Skew {
                k,
                alpha,
                a,
                x0: None,
            }
        }
    })
}
