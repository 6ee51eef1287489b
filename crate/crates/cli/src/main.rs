//! `rothlab` command-line front end.
//!
//! Machine output is JSON on stdout (or `--out`); diagnostics go to stderr.
//! Exit codes: 0 success, 2 usage, 3 precondition, 4 verification, 5 budget.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rothlab::bohr::{BohrDescriptor, BohrSet, RegularityGrid, DEFAULT_ENUMERATION_GUARD};
use rothlab::constructions::{behrend, elkin, greedy_ap_free, random_set, verify_ap_free, Construction, IntegerSet};
use rothlab::group::{GMeasure, Group, SetOnGroup};
use rothlab::increment::{
    replay, roth_engine_energy, roth_engine_main, EngineOutcome, IncrementCertificate, IncrementConfig,
};
use rothlab::progressions::{count_3aps, freiman_embed};
use rothlab::spectrum::spec;
use rothlab::Error;

const GUARD_ENV: &str = "ROTHLAB_GUARD_BYTES";
/// Bytes charged per group element when converting the memory cap to an element guard.
const BYTES_PER_ELEMENT: usize = 16;

#[derive(Parser)]
#[command(name = "rothlab", version, about = "Three-term progression experiments on finite abelian groups")]
struct Cli {
    /// Worker threads for parallel scans (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count pairs (a, d) with a, a+d, a+2d in A.
    Count {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        set: SetArgs,
    },
    /// Large Fourier coefficients of 1_A relative to Haar or a Bohr measure.
    Spectrum {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        set: SetArgs,
        #[arg(long)]
        epsilon: f64,
        /// Bohr set JSON whose normalised indicator is the measure.
        #[arg(long)]
        bohr: Option<PathBuf>,
    },
    /// Size, dimension and regularity of a Bohr set.
    Bohr {
        #[command(flatten)]
        group: GroupArgs,
        /// Frequencies as character indices, comma separated.
        #[arg(long, default_value = "")]
        frequencies: String,
        /// Widths, one per frequency or a single common width.
        #[arg(long, default_value = "")]
        widths: String,
        /// Dilation factor applied before reporting.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Also search for a regular dilate.
        #[arg(long)]
        regular: bool,
        #[arg(long, default_value_t = rothlab::bohr::DEFAULT_REGULARITY_CONSTANT)]
        regularity_constant: f64,
        /// Include the member list.
        #[arg(long)]
        members: bool,
    },
    /// Generate a progression-free (or random) subset of {1..N}.
    Construct {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        n: u64,
        /// Density for the random method.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check that a subset of {1..N} has no nontrivial progression.
    Verify {
        /// Integer set JSON {"N": …, "elements": […]}.
        #[arg(long, conflicts_with_all = ["n", "set"])]
        file: Option<PathBuf>,
        #[arg(long, requires = "set")]
        n: Option<u64>,
        #[arg(long)]
        set: Option<String>,
    },
    /// Run a density-increment engine and emit its certificate.
    Engine(EngineArgs),
    /// Re-verify every step of a certificate.
    Replay {
        certificate: PathBuf,
    },
    /// Print the default run configuration.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Behrend,
    Elkin,
    Greedy,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineKind {
    Main,
    Energy,
}

#[derive(Args)]
struct GroupArgs {
    /// Order of a cyclic group.
    #[arg(long, conflicts_with = "factors")]
    modulus: Option<usize>,
    /// Invariant factors, comma separated.
    #[arg(long)]
    factors: Option<String>,
}

#[derive(Args)]
struct SetArgs {
    /// Elements as comma separated indices.
    #[arg(long, conflicts_with = "file")]
    set: Option<String>,
    /// Set JSON {"invariant_factors": […], "elements": […]}.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct EngineArgs {
    #[command(flatten)]
    group: GroupArgs,
    #[arg(long, value_enum, default_value = "main")]
    engine: EngineKind,
    /// Draw A with this density from --seed.
    #[arg(long, conflicts_with_all = ["set", "file", "behrend"])]
    density: Option<f64>,
    #[arg(long, conflicts_with_all = ["file", "behrend"])]
    set: Option<String>,
    #[arg(long, conflicts_with = "behrend")]
    file: Option<PathBuf>,
    /// Use the image of behrend(N) in Z/(4N+1).
    #[arg(long)]
    behrend: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run configuration JSON; fields left out take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    step_budget: Option<usize>,
    #[arg(long)]
    retry_halvings: Option<usize>,
}

/// Everything an engine run depends on besides its input set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    /// Overrides `increment.seed`.
    seed: u64,
    increment: IncrementConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            increment: IncrementConfig::default(),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    Budget(String),
    Replay(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Budget(_) => 5,
            Failure::Replay(_) => 4,
            Failure::Lib(e) => match e {
                Error::InvalidGroup(_) | Error::GroupMismatch | Error::OutOfRange(_) | Error::InvalidParameter(_) => 2,
                Error::Precondition(_) | Error::ZeroFunction | Error::NonUnitScalar { .. } => 3,
                Error::Verification(_) => 4,
                Error::GuardExceeded { .. } | Error::Budget(_) => 5,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Budget(m) | Failure::Replay(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("cannot parse {what} entry {s:?}"))))
        .collect()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn guard() -> Result<usize, Failure> {
    match std::env::var(GUARD_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|bytes| (bytes / BYTES_PER_ELEMENT).max(1))
            .map_err(|_| usage(format!("{GUARD_ENV} is not a byte count: {v:?}"))),
        Err(_) => Ok(DEFAULT_ENUMERATION_GUARD),
    }
}

fn check_guard(group: &Group, guard: usize) -> Outcome {
    if group.order() > guard {
        return Err(Error::GuardExceeded {
            what: "group order",
            limit: guard,
            actual: group.order(),
        }
        .into());
    }
    Ok(())
}

fn group_from(args: &GroupArgs) -> Result<Option<Group>, Failure> {
    match (&args.modulus, &args.factors) {
        (Some(m), _) => Ok(Some(Group::cyclic(*m)?)),
        (None, Some(f)) => Ok(Some(Group::new(parse_list(f, "factor")?)?)),
        (None, None) => Ok(None),
    }
}

fn set_from(group: Option<Group>, set: Option<&str>, file: Option<&Path>) -> Result<SetOnGroup, Failure> {
    if let Some(path) = file {
        let s: SetOnGroup = read_json(path)?;
        if let Some(g) = group {
            if &g != s.group() {
                return Err(usage("--file set lives on a different group than --modulus/--factors"));
            }
        }
        return Ok(s);
    }
    let group = group.ok_or_else(|| usage("one of --modulus or --factors is required"))?;
    let text = set.ok_or_else(|| usage("one of --set or --file is required"))?;
    let elements: Vec<usize> = parse_list(text, "element")?;
    Ok(SetOnGroup::from_indices(&group, elements)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| usage(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| usage(e.to_string())),
    }
}

#[derive(Serialize)]
struct BohrReport {
    descriptor: BohrDescriptor,
    rank: usize,
    size: usize,
    density: f64,
    dimension: f64,
    regular: Option<rothlab::bohr::RegularityReport>,
    members: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct ConstructReport {
    #[serde(flatten)]
    construction: Construction,
    free: bool,
}

fn run_bohr(
    group: Group,
    frequencies: &str,
    widths: &str,
    rho: f64,
    regular: bool,
    c_r: f64,
    members: bool,
) -> Result<BohrReport, Failure> {
    let freqs: Vec<usize> = parse_list(frequencies, "frequency")?;
    let mut ws: Vec<f64> = parse_list(widths, "width")?;
    if ws.len() == 1 && freqs.len() > 1 {
        ws = vec![ws[0]; freqs.len()];
    }
    if ws.len() != freqs.len() {
        return Err(usage(format!("{} frequencies but {} widths", freqs.len(), ws.len())));
    }
    let b = BohrSet::with_guard(&group, freqs, ws, guard()?)?.dilate(rho)?;
    let regular = if regular {
        Some(b.find_regular_dilate(c_r, &RegularityGrid::default())?.1)
    } else {
        None
    };
    Ok(BohrReport {
        descriptor: b.descriptor(),
        rank: b.rank(),
        size: b.len(),
        density: b.density(),
        dimension: b.dimension()?,
        regular,
        members: members.then(|| b.members().to_vec()),
    })
}

fn run_construct(method: Method, n: u64, alpha: f64, seed: u64) -> Result<ConstructReport, Failure> {
    let construction = match method {
        Method::Behrend => behrend(n, None)?,
        Method::Elkin => elkin(n, None)?,
        Method::Greedy => greedy_ap_free(n)?,
        Method::Random => {
            let set = random_set(n, alpha, seed)?;
            Construction {
                method: "random".into(),
                set,
                dimension: None,
                digits: None,
                radius: None,
                width: None,
                grid_size: 0,
                verified: false,
            }
        }
    };
    let free = verify_ap_free(&construction.set)?.free;
    Ok(ConstructReport { construction, free })
}

fn engine_set(args: &EngineArgs, group: Option<Group>) -> Result<SetOnGroup, Failure> {
    if let Some(n) = args.behrend {
        let c = behrend(n, None)?;
        let (g, a) = freiman_embed(c.set.elements(), n)?;
        if group.is_some_and(|h| h != g) {
            return Err(usage("--behrend fixes the group to Z/(4N+1)"));
        }
        return Ok(a);
    }
    if let Some(alpha) = args.density {
        let g = group.ok_or_else(|| usage("--density needs --modulus or --factors"))?;
        return Ok(SetOnGroup::random(&g, alpha, args.seed)?);
    }
    set_from(group, args.set.as_deref(), args.file.as_deref())
}

fn run_engine(args: &EngineArgs, out: Option<&Path>) -> Outcome {
    let run_config: RunConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => RunConfig::default(),
    };
    let mut config = run_config.increment;
    if std::env::var_os(GUARD_ENV).is_some() {
        config.enumeration_guard = guard()?;
    }
    config.seed = args.seed;
    if let Some(b) = args.step_budget {
        config.step_budget = b;
    }
    if let Some(r) = args.retry_halvings {
        config.retry_halvings = r;
    }
    let a = engine_set(args, group_from(&args.group)?)?;
    let group = a.group().clone();
    check_guard(&group, config.enumeration_guard)?;
    eprintln!("engine on order {} with |A| = {}", group.order(), a.len());
    let run = match args.engine {
        EngineKind::Main => roth_engine_main(&group, &a, &config)?,
        EngineKind::Energy => {
            let b = BohrSet::with_guard(&group, Vec::new(), Vec::new(), config.enumeration_guard)?;
            roth_engine_energy(&b, &a, &config)?
        }
    };
    eprintln!("{} steps recorded", run.certificate.steps.len());
    emit(&run.certificate, out)?;
    match run.outcome {
        EngineOutcome::StepBudget { budget } => Err(Failure::Budget(format!("step budget {budget} exhausted"))),
        _ => Ok(()),
    }
}

fn run_replay(path: &Path, out: Option<&Path>) -> Outcome {
    let cert: IncrementCertificate = read_json(path)?;
    let report = replay(&cert)?;
    emit(&report, out)?;
    if report.ok() {
        eprintln!("{} steps and {} checks re-verified", report.steps_checked, report.checks_checked);
        Ok(())
    } else {
        Err(Failure::Replay(format!("{} failures", report.failures.len())))
    }
}

fn run(cli: Cli) -> Outcome {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Count { group, set } => {
            let a = set_from(group_from(&group)?, set.set.as_deref(), set.file.as_deref())?;
            emit(&count_3aps(&a), out)
        }
        Command::Spectrum { group, set, epsilon, bohr } => {
            let a = set_from(group_from(&group)?, set.set.as_deref(), set.file.as_deref())?;
            check_guard(a.group(), guard()?)?;
            let mu = match bohr {
                Some(path) => {
                    let desc: BohrDescriptor = read_json(&path)?;
                    BohrSet::from_descriptor(a.group(), &desc)?.beta()
                }
                None => GMeasure::haar(a.group()),
            };
            emit(&spec(&a.indicator(), &mu, epsilon)?, out)
        }
        Command::Bohr {
            group,
            frequencies,
            widths,
            rho,
            regular,
            regularity_constant,
            members,
        } => {
            let g = group_from(&group)?.ok_or_else(|| usage("one of --modulus or --factors is required"))?;
            let report = run_bohr(g, &frequencies, &widths, rho, regular, regularity_constant, members)?;
            emit(&report, out)
        }
        Command::Construct { method, n, alpha, seed } => emit(&run_construct(method, n, alpha, seed)?, out),
        Command::Verify { file, n, set } => {
            let s = match (file, n, set) {
                (Some(path), _, _) => read_json::<IntegerSet>(&path)?,
                (None, Some(n), Some(text)) => IntegerSet::new(n, parse_list(&text, "element")?)?,
                _ => return Err(usage("give --file or both --n and --set")),
            };
            let report = verify_ap_free(&s)?;
            emit(&report, out)
        }
        Command::Engine(args) => run_engine(&args, out),
        Command::Replay { certificate } => run_replay(&certificate, out),
        Command::Config => emit(&RunConfig::default(), out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("rothlab: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rothlab: {f}");
            ExitCode::from(f.code())
        }
    }
}
