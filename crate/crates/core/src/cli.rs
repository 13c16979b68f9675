//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
//! All randomness derives from `--seed` (or `ITL_PURSUIT_SEED`).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::experiments::{
    make_trial, p_sweep, recovery_error, run_benchmark, run_classification, summarize, trial_seed, ClassTask,
    Dims, NamedSolver, NoiseKind, NoiseSpec, PSweepPoint, TrialReport,
};
use crate::pursuit::{pursuit_solve, Preset};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "solver,noise,trial,recovery_error,support_exact,runtime_ms,seed";
pub const PSWEEP_HEADER: &str = "p,noise,mean_error,std_error,trials";

#[derive(Debug, Parser)]
#[command(name = "itl-pursuit", version, about = "Robust sparse recovery benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single recovery trial, JSON report.
    Recover(RunArgs),
    /// Grid of solvers × noises × trials, CSV report.
    Bench(RunArgs),
    /// Mean recovery error of the ITL/NOK pursuit across powers p.
    Psweep(RunArgs),
    /// Synthetic occluded multi-class classification demo.
    Classify(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetName {
    Table2,
    Fig1,
    Fig2,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    #[arg(long, env = "ITL_PURSUIT_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sparsity: Option<usize>,
    /// chi2, exp, tdist, gaussian, wgn, missing or none; comma-separated for bench/psweep.
    #[arg(long, value_delimiter = ',', conflicts_with = "preset")]
    noise: Vec<String>,
    #[arg(long = "snr-db")]
    snr_db: Option<f64>,
    #[arg(long = "missing-frac", default_value_t = 0.1)]
    missing_frac: f64,
    #[arg(long)]
    outliers: Option<usize>,
    #[arg(long = "outlier-mag", default_value_t = 30.0)]
    outlier_mag: f64,
    /// omp, cmp, kns or inok; comma-separated for bench.
    #[arg(long, alias = "solvers", value_delimiter = ',')]
    solver: Vec<String>,
    #[arg(long, default_value_t = 1.7)]
    p: f64,
    /// Powers evaluated by psweep.
    #[arg(long = "p-values", value_delimiter = ',')]
    p_values: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum)]
    preset: Option<PresetName>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write measured runtimes into the CSV (otherwise 0, keeping output byte-stable).
    #[arg(long)]
    timing: bool,
}

/// Provenance block attached to every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub started_at_unix_ms: u64,
    pub finished_at_unix_ms: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Effective experiment settings after presets and overrides.
#[derive(Debug, Clone)]
struct Plan {
    dims: Dims,
    trials: usize,
    noises: Vec<NoiseSpec>,
    solvers: Vec<Preset>,
}

fn table2_noises(frac: f64, snr_db: Option<f64>) -> Vec<NoiseSpec> {
    [
        NoiseKind::Chi2,
        NoiseKind::Exp,
        NoiseKind::Tdist,
        NoiseKind::Missing { fraction: frac },
        NoiseKind::Gaussian,
        NoiseKind::Wgn {
            snr_db: snr_db.unwrap_or(2.0),
        },
    ]
    .into_iter()
    .map(NoiseSpec::new)
    .collect()
}

fn plan(args: &RunArgs, default_preset: Option<PresetName>) -> CliResult<Plan> {
    let preset = args.preset.or(if args.noise.is_empty() { default_preset } else { None });
    let (mut dims, mut trials, mut noises) = match preset {
        Some(PresetName::Table2) | Some(PresetName::Fig2) => {
            (Dims::PAPER, 20, table2_noises(args.missing_frac, args.snr_db))
        }
        Some(PresetName::Small) => (Dims::SMALL, 10, table2_noises(args.missing_frac, args.snr_db)),
        Some(PresetName::Fig1) => (
            Dims::PAPER,
            20,
            vec![NoiseSpec::new(NoiseKind::Wgn {
                snr_db: args.snr_db.unwrap_or(10.0),
            })
            .with_outliers(6, args.outlier_mag)],
        ),
        None => (Dims::PAPER, 20, Vec::new()),
    };
    if !args.noise.is_empty() {
        noises = args
            .noise
            .iter()
            .map(|label| {
                NoiseKind::parse(label, args.snr_db.unwrap_or(10.0), args.missing_frac)
                    .map(|k| NoiseSpec::new(k).with_outliers(0, args.outlier_mag))
            })
            .collect::<Result<_, _>>()?;
    }
    if noises.is_empty() {
        noises.push(NoiseSpec::new(NoiseKind::None));
    }
    for n in noises.iter_mut() {
        n.outlier_magnitude_sigmas = args.outlier_mag;
        if let Some(count) = args.outliers {
            n.outlier_count = count;
        }
        n.validate()?;
    }
    if let Some(m) = args.m {
        dims.m = m;
    }
    if let Some(n) = args.n {
        dims.n = n;
    }
    if let Some(k) = args.sparsity {
        dims.k = k;
    }
    if let Some(t) = args.trials {
        trials = t;
    }
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if dims.m == 0 || dims.n == 0 || dims.k == 0 || dims.k > dims.n {
        return Err(usage(format!(
            "need --m, --n >= 1 and 1 <= --sparsity <= --n (got m={}, n={}, sparsity={})",
            dims.m, dims.n, dims.k
        )));
    }
    if !(args.p > 0.0) || !args.p.is_finite() {
        return Err(usage(format!("--p must be positive, got {}", args.p)));
    }
    if !(args.eps >= 0.0) {
        return Err(usage("--eps must be nonnegative"));
    }
    let solvers = args
        .solver
        .iter()
        .map(|s| s.parse::<Preset>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Plan {
        dims,
        trials,
        noises,
        solvers,
    })
}

fn parameters(args: &RunArgs, plan: &Plan) -> BTreeMap<String, String> {
    let mut p = BTreeMap::new();
    p.insert("m".into(), plan.dims.m.to_string());
    p.insert("n".into(), plan.dims.n.to_string());
    p.insert("sparsity".into(), plan.dims.k.to_string());
    p.insert("trials".into(), plan.trials.to_string());
    p.insert(
        "noise".into(),
        plan.noises.iter().map(|n| n.kind.label()).collect::<Vec<_>>().join(","),
    );
    p.insert(
        "solver".into(),
        plan.solvers.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
    );
    p.insert("p".into(), args.p.to_string());
    p.insert("eps".into(), args.eps.to_string());
    p.insert("missing_frac".into(), args.missing_frac.to_string());
    p.insert("outlier_mag".into(), args.outlier_mag.to_string());
    if let Some(o) = args.outliers {
        p.insert("outliers".into(), o.to_string());
    }
    if let Some(s) = args.snr_db {
        p.insert("snr_db".into(), s.to_string());
    }
    if let Some(pr) = args.preset {
        p.insert(
            "preset".into(),
            pr.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        );
    }
    if let Some(t) = args.threads {
        p.insert("threads".into(), t.to_string());
    }
    if !args.p_values.is_empty() {
        p.insert(
            "p_values".into(),
            args.p_values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    p
}

fn manifest(command: &str, args: &RunArgs, plan: &Plan, started: u64) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        parameters: parameters(args, plan),
        seed: args.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at_unix_ms: started,
        finished_at_unix_ms: now_ms(),
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

/// Writes `body` to `out` or to `stdout`.
fn emit(out: Option<&Path>, stdout: &mut dyn Write, body: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(|e| {
                CliError::Runtime(format!("cannot write {}: {e}", path.display()))
            })?);
            f.write_all(body)?;
            f.flush()?;
        }
        None => stdout.write_all(body)?,
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// Reports as CSV. Floats use the shortest representation that parses back exactly.
pub fn reports_csv(reports: &[TrialReport], timing: bool) -> String {
    let mut s = String::with_capacity(64 * (reports.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in reports {
        let runtime = if timing { r.runtime_ms } else { 0.0 };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.solver_name, r.noise_kind, r.trial_index, r.recovery_error, r.support_exact, runtime, r.seed
        ));
    }
    s
}

pub fn psweep_csv(points: &[PSweepPoint]) -> String {
    let mut s = String::new();
    s.push_str(PSWEEP_HEADER);
    s.push('\n');
    for pt in points {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            pt.p, pt.noise, pt.mean_error, pt.std_error, pt.trials
        ));
    }
    s
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct Coefficient {
    index: usize,
    value: f64,
}

#[derive(Serialize)]
struct RecoverBody {
    report: TrialReport,
    support: Vec<usize>,
    true_support: Vec<usize>,
    estimate: Vec<Coefficient>,
    residual_norm: f64,
    outer_iterations: usize,
    converged: bool,
}

fn recover(args: &RunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let started = now_ms();
    let mut plan = plan(args, None)?;
    if plan.noises.len() != 1 {
        return Err(usage("recover takes a single --noise"));
    }
    if plan.solvers.len() > 1 {
        return Err(usage("recover takes a single --solver"));
    }
    if plan.solvers.is_empty() {
        plan.solvers.push(Preset::Inok);
    }
    let preset = plan.solvers[0];
    let noise = plan.noises[0];
    let seed = trial_seed(args.seed, 0, 0);
    let data = make_trial(plan.dims, &noise, seed)?;
    let cfg = preset.config(plan.dims.k, args.p).with_eps(args.eps);

    let t0 = std::time::Instant::now();
    let sol = pursuit_solve(&data.observed, &data.dict, &cfg)?;
    let runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
    let err = recovery_error(&sol.x, &data.x_true)?;
    let true_support: Vec<usize> = (0..plan.dims.n).filter(|&i| data.x_true[i] != 0.0).collect();
    let support = sol.support.sorted();
    let body = RecoverBody {
        report: TrialReport {
            solver_name: preset.name().to_string(),
            noise_kind: noise.kind.label().to_string(),
            trial_index: 0,
            recovery_error: err,
            support_exact: support == true_support,
            runtime_ms,
            seed,
            failure: None,
        },
        estimate: support.iter().map(|&i| Coefficient { index: i, value: sol.x[i] }).collect(),
        support,
        true_support,
        residual_norm: sol.residual_norm,
        outer_iterations: sol.outer_iterations,
        converged: sol.converged,
    };
    let m = manifest("recover", args, &plan, started);
    match args.format.unwrap_or(Format::Json) {
        Format::Json => {
            let bytes = json_bytes(&Envelope {
                schema_version: SCHEMA_VERSION,
                manifest: &m,
                body,
            })?;
            emit(args.out.as_deref(), stdout, &bytes)
        }
        Format::Csv => {
            emit(args.out.as_deref(), stdout, reports_csv(&[body.report], args.timing).as_bytes())?;
            write_sidecar(args.out.as_deref(), &m)
        }
    }
}

fn write_sidecar(out: Option<&Path>, m: &RunManifest) -> CliResult<()> {
    if let Some(path) = out {
        let bytes = json_bytes(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "manifest": m,
        }))?;
        let side = manifest_path(path);
        std::fs::write(&side, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", side.display())))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchBody<'a> {
    reports: &'a [TrialReport],
    summary: Vec<crate::experiments::CellSummary>,
}

fn bench(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let started = now_ms();
    let mut plan = plan(args, Some(PresetName::Table2))?;
    if plan.solvers.is_empty() {
        plan.solvers = vec![Preset::Omp, Preset::Inok];
    }
    let solvers: Vec<NamedSolver> = plan
        .solvers
        .iter()
        .map(|&s| NamedSolver::new(s.name(), s.config(plan.dims.k, args.p).with_eps(args.eps)))
        .collect();
    let (noises, trials, dims, seed) = (plan.noises.clone(), plan.trials, plan.dims, args.seed);
    let reports = with_pool(args.threads, move || run_benchmark(&solvers, &noises, trials, dims, seed))??;
    let summary = summarize(&reports);
    for c in &summary {
        writeln!(
            stderr,
            "{:<6} {:<9} mean={:<12.6e} std={:<12.6e} exact_support={}/{} failures={}",
            c.solver, c.noise, c.mean_error, c.std_error, c.support_exact, c.trials, c.failures
        )?;
    }
    let m = manifest("bench", args, &plan, started);
    match args.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            emit(args.out.as_deref(), stdout, reports_csv(&reports, args.timing).as_bytes())?;
            write_sidecar(args.out.as_deref(), &m)
        }
        Format::Json => {
            let bytes = json_bytes(&Envelope {
                schema_version: SCHEMA_VERSION,
                manifest: &m,
                body: BenchBody {
                    reports: &reports,
                    summary,
                },
            })?;
            emit(args.out.as_deref(), stdout, &bytes)
        }
    }
}

/// `{1.1, 1.2, …, 2.0}`.
pub fn default_p_grid() -> Vec<f64> {
    (11..=20).map(|i| i as f64 / 10.0).collect()
}

fn psweep(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let started = now_ms();
    let plan = plan(args, Some(PresetName::Fig2))?;
    let ps = if args.p_values.is_empty() {
        default_p_grid()
    } else {
        args.p_values.clone()
    };
    if let Some(bad) = ps.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(usage(format!("--p-values must be positive, got {bad}")));
    }
    let (noises, trials, dims, seed) = (plan.noises.clone(), plan.trials, plan.dims, args.seed);
    let points = with_pool(args.threads, move || p_sweep(&ps, &noises, trials, dims, seed))??;
    for n in &plan.noises {
        let best = points
            .iter()
            .filter(|pt| pt.noise == n.kind.label())
            .min_by(|a, b| a.mean_error.total_cmp(&b.mean_error));
        if let Some(b) = best {
            writeln!(stderr, "{:<9} best p={} mean={:.6e}", n.kind.label(), b.p, b.mean_error)?;
        }
    }
    let m = manifest("psweep", args, &plan, started);
    match args.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            emit(args.out.as_deref(), stdout, psweep_csv(&points).as_bytes())?;
            write_sidecar(args.out.as_deref(), &m)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                points: &'a [PSweepPoint],
            }
            let bytes = json_bytes(&Envelope {
                schema_version: SCHEMA_VERSION,
                manifest: &m,
                body: Body { points: &points },
            })?;
            emit(args.out.as_deref(), stdout, &bytes)
        }
    }
}

fn classify_cmd(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let started = now_ms();
    if args.format == Some(Format::Csv) {
        return Err(usage("classify only emits JSON"));
    }
    let mut plan = plan(args, None)?;
    plan.trials = args.trials.unwrap_or(50);
    let robust = match plan.solvers.as_slice() {
        [] => Preset::Inok,
        [one] => *one,
        _ => return Err(usage("classify takes a single --solver")),
    };
    let l = args.sparsity.unwrap_or(5);
    plan.dims.k = l;
    plan.solvers = vec![robust];
    let task = ClassTask::default();
    let summary = run_classification(
        &task,
        &robust.config(l, args.p).with_eps(args.eps),
        &Preset::Omp.config(l, 2.0).with_eps(args.eps),
        args.p,
        plan.trials,
        args.seed,
    )?;
    writeln!(
        stderr,
        "{} + NOK rule: {}/{}   omp + Euclidean rule: {}/{}",
        robust.name(),
        summary.robust_correct,
        summary.trials,
        summary.baseline_correct,
        summary.trials
    )?;
    let m = manifest("classify", args, &plan, started);
    #[derive(Serialize)]
    struct Body {
        task: ClassTask,
        summary: crate::experiments::ClassificationSummary,
    }
    let bytes = json_bytes(&Envelope {
        schema_version: SCHEMA_VERSION,
        manifest: &m,
        body: Body { task, summary },
    })?;
    emit(args.out.as_deref(), stdout, &bytes)
}

/// Parses `argv` (program name first) and runs the command.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    1
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Recover(a) => recover(a, stdout),
        Command::Bench(a) => bench(a, stdout, stderr),
        Command::Psweep(a) => psweep(a, stdout, stderr),
        Command::Classify(a) => classify_cmd(a, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
    }
}
