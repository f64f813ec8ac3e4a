//! `qdslab` command line: config loading, dispatch, report emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use qdslab::catalog::{self, Built, RefOverrides};
use qdslab::deficiency;
use qdslab::parallel::configure_threads;
use qdslab::report::{
    self, Diagnosis, EvolutionSummary, ModelSource, OutputFormat, OutputSpec, ReportEnvelope, RunConfig, TaskReport,
    TaskResult,
};
use qdslab::resolvent::{self, LaplaceContext, Trend, Verdict};
use qdslab::semigroup;
use qdslab::{validate_model, Error, Execution, HermitianForm, ModelSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Annihilator checks build an `n² × n²` real system; skip them above this.
pub const ANNIHILATOR_MAX_DIM: usize = 24;

const COLUMNS_HELP: &str = "\
Tabular output (--format csv|tsv), fixed column order:
  diagnose, sweep:  dim, lambda, ell_norm, q_limit_norm, explosion_mass, verdict
  evolve:           t, p00, trace_p, explosion_min_eig, explosion_max_eig, explosion_00
  deficiency:       x, abs_u_plus, abs_u_minus

Exit status: 0 conclusive, 1 error, 2 inconclusive.
QDSLAB_THREADS caps the worker pool.";

#[derive(Parser, Debug)]
#[command(name = "qdslab", version, about = "Explosion and deficiency diagnostics for truncated quantum dynamical semigroups", after_help = COLUMNS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check structural conditions of a generator
    Validate(CommonArgs),
    /// Explosion certificate per lambda
    Diagnose(CommonArgs),
    /// Certificates across a truncation ladder
    Sweep(CommonArgs),
    /// Evolve the identity observable
    Evolve(CommonArgs),
    /// Deficiency indices (transport models, shift isometries)
    Deficiency(CommonArgs),
    /// List catalog model references
    ListModels(OutputArgs),
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    /// Report path; JSON goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// json | csv | tsv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML or JSON run config (a previous JSON report also works)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog reference, e.g. pure-birth:quadratic
    #[arg(long)]
    model: Option<String>,
    /// Truncation size of the referenced model
    #[arg(long)]
    dim: Option<usize>,
    /// Laplace parameter; repeatable
    #[arg(long = "lambda")]
    lambdas: Vec<f64>,
    /// Comma-separated sweep sizes
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Comma-separated evolution times
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Transport grid start:end:intervals
    #[arg(long)]
    grid: Option<String>,
    /// Deficiency-vector normalization
    #[arg(long)]
    c1: Option<f64>,
    /// Run every task on the calling thread
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    output: OutputArgs,
}

enum Failure {
    Error(String),
    Inconclusive(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconclusive(msg) => Failure::Inconclusive(msg),
            other => Failure::Error(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Parse a TOML or JSON config. A JSON report is accepted and its `config`
/// echo is used. Errors carry `path:line:col`.
pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        let anchored = |e: serde_json::Error| format!("{}:{}:{}: {e}", path.display(), e.line(), e.column());
        let value: serde_json::Value = serde_json::from_str(&text).map_err(anchored)?;
        if value.get("schema").is_some() {
            let config = value.get("config").cloned().ok_or_else(|| format!("{}: report has no config echo", path.display()))?;
            return serde_json::from_value(config).map_err(|e| format!("{}: config echo: {e}", path.display()));
        }
        serde_json::from_str(&text).map_err(anchored)
    } else {
        toml::from_str(&text).map_err(|e: toml::de::Error| {
            let (line, col) = e.span().map_or((1, 1), |s| line_col(&text, s.start));
            format!("{}:{line}:{col}: {}", path.display(), e.message())
        })
    }
}

fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, m] = parts.as_slice() else {
        return Err(format!("grid must be start:end:intervals, got '{s}'"));
    };
    let bad = |what: &str| format!("bad {what} in grid '{s}'");
    Ok((a.parse().map_err(|_| bad("start"))?, b.parse().map_err(|_| bad("end"))?, m.parse().map_err(|_| bad("intervals"))?))
}

/// Merge file and flags, then pin textual references to catalog entries so
/// the echoed config re-runs identically.
fn resolve_config(args: &CommonArgs) -> Outcome<RunConfig> {
    let mut cfg = match (&args.config, &args.model) {
        (Some(path), _) => load_config(path).map_err(Failure::Error)?,
        (None, Some(reference)) => RunConfig::new(ModelSource::Reference(reference.clone())),
        (None, None) => return Err(Failure::Error("either --config or --model is required".into())),
    };
    if let (Some(_), Some(reference)) = (&args.config, &args.model) {
        cfg.model = ModelSource::Reference(reference.clone());
    }
    if !args.lambdas.is_empty() {
        cfg.lambdas = args.lambdas.clone();
    }
    if args.dims.is_some() {
        cfg.dims = args.dims.clone();
    }
    if args.times.is_some() {
        cfg.times = args.times.clone();
    }
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    if args.output.out.is_some() || args.output.format.is_some() {
        let format = match &args.output.format {
            Some(f) => f.parse().map_err(Error::from)?,
            None => cfg.output.as_ref().map(|o| o.format).unwrap_or_default(),
        };
        let path = match &args.output.out {
            Some(p) => p.display().to_string(),
            None => cfg.output.as_ref().map(|o| o.path.clone()).unwrap_or_default(),
        };
        cfg.output = Some(OutputSpec { path, format });
    }
    let overrides = RefOverrides {
        dim: args.dim,
        grid: args.grid.as_deref().map(parse_grid).transpose().map_err(Failure::Error)?,
        c1: args.c1,
    };
    cfg.model = match cfg.model {
        ModelSource::Reference(r) => ModelSource::Catalog(catalog::parse_model_ref(&r, &overrides)?),
        ModelSource::Catalog(entry) => match args.dim {
            Some(d) => ModelSource::Catalog(entry.with_size(d)?),
            None => ModelSource::Catalog(entry),
        },
        inline => inline,
    };
    cfg.check()?;
    Ok(cfg)
}

fn model_of(cfg: &RunConfig) -> Outcome<ModelSpec> {
    match &cfg.model {
        ModelSource::Catalog(entry) => match entry.build()? {
            Built::Model(m) => Ok(m),
            Built::Isometry(_) => Err(Failure::Error("this command needs a generator model, not an isometry".into())),
        },
        ModelSource::Inline(spec) => {
            spec.check_structure()?;
            Ok(spec.clone())
        }
        ModelSource::Reference(_) => unreachable!("references are resolved before dispatch"),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

struct Run {
    tasks: Vec<TaskReport>,
    inconclusive: Vec<String>,
    summary: Vec<String>,
}

impl Run {
    fn new() -> Self {
        Run { tasks: Vec::new(), inconclusive: Vec::new(), summary: Vec::new() }
    }

    fn push(&mut self, name: String, wall_clock_s: f64, result: TaskResult) {
        self.tasks.push(TaskReport { name, wall_clock_s, result });
    }
}

fn validate(cfg: &RunConfig, run: &mut Run) -> Outcome<()> {
    let spec = model_of(cfg)?;
    let (report, secs) = timed(|| validate_model(&spec, &cfg.tolerances));
    let report = report?;
    run.summary.push(format!("{}: {}", spec.name, if report.is_valid() { "valid" } else { "conditions fail" }));
    run.push(format!("validate {}", spec.name), secs, TaskResult::Validate(report));
    Ok(())
}

fn diagnose_one(spec: &ModelSpec, lambda: f64, cfg: &RunConfig) -> Result<Diagnosis, Error> {
    let ctx = LaplaceContext::new(spec, lambda, cfg.tolerances)?.with_execution(Execution::Sequential);
    let certificate = resolvent::conservativity_verdict(&ctx)?;
    let solution_check = resolvent::verify_explosion_solution(&ctx, &certificate)?;
    let annihilator = if spec.dim() <= ANNIHILATOR_MAX_DIM { Some(resolvent::predual_annihilator_check(&ctx)?) } else { None };
    Ok(Diagnosis { certificate, solution_check, annihilator })
}

fn diagnose(cfg: &RunConfig, run: &mut Run) -> Outcome<()> {
    let spec = model_of(cfg)?;
    let results = cfg.execution.map(&cfg.lambdas, |&lambda| timed(|| diagnose_one(&spec, lambda, cfg)));
    for (lambda, (result, secs)) in cfg.lambdas.iter().zip(results) {
        let d = result?;
        let verdict = d.certificate.verdict;
        if verdict == Verdict::Inconclusive {
            run.inconclusive.push(format!("lambda={lambda}: {}", d.certificate.note));
        }
        run.summary.push(format!("{} lambda={lambda}: {}", spec.name, verdict_name(verdict)));
        run.push(format!("diagnose {} lambda={lambda}", spec.name), secs, TaskResult::Diagnose(Box::new(d)));
    }
    Ok(())
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Conservative => "conservative",
        Verdict::Explosive => "explosive",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn trend_name(t: Trend) -> &'static str {
    match t {
        Trend::DecayingToZero => "decaying_to_zero",
        Trend::StabilizingPositive => "stabilizing_positive",
        Trend::Undetermined => "undetermined",
    }
}

fn sweep(cfg: &RunConfig, run: &mut Run) -> Outcome<()> {
    let ModelSource::Catalog(family) = &cfg.model else {
        return Err(Failure::Error("sweep needs a catalog model family, not an inline model".into()));
    };
    let dims = cfg.dims.as_ref().ok_or_else(|| Failure::Error("sweep needs --dims".into()))?;
    for &lambda in &cfg.lambdas {
        let (result, secs) = timed(|| resolvent::truncation_sweep(family, lambda, dims, &cfg.tolerances, cfg.execution));
        let result = result?;
        if result.trend == Trend::Undetermined {
            run.inconclusive.push(format!("lambda={lambda}: trend undetermined"));
        }
        run.summary.push(format!("{} lambda={lambda}: {}", family.kind(), trend_name(result.trend)));
        run.push(format!("sweep {} lambda={lambda}", family.kind()), secs, TaskResult::Sweep(result));
    }
    Ok(())
}

fn evolve(cfg: &RunConfig, run: &mut Run) -> Outcome<()> {
    let spec = model_of(cfg)?;
    let times = cfg.times.as_ref().ok_or_else(|| Failure::Error("evolve needs --times".into()))?;
    let (result, secs) = timed(|| semigroup::evolve_observable(&spec, &HermitianForm::identity(spec.dim()), times, &cfg.tolerances));
    let summary = EvolutionSummary::from_result(&result?, cfg.tolerances.psd_tol);
    if let Some(m) = summary.explosion_max_eig.last() {
        run.summary.push(format!("{}: max explosion eigenvalue {m:.3e} at t={}", spec.name, times.last().unwrap_or(&0.0)));
    }
    run.push(format!("evolve {}", spec.name), secs, TaskResult::Evolve(summary));
    Ok(())
}

fn deficiency(cfg: &RunConfig, run: &mut Run) -> Outcome<()> {
    let ModelSource::Catalog(entry) = &cfg.model else {
        return Err(Failure::Error("deficiency needs a transport model or a shift isometry".into()));
    };
    if let Some(model) = entry.tau_f_model() {
        let (result, secs) = timed(|| deficiency::deficiency_indices_tau_f(&model, cfg.tolerances.quad_tol));
        let result = result?;
        run.summary.push(format!("{}: indices ({}, {})", entry.kind(), result.n_plus, result.n_minus));
        run.push(format!("deficiency {}", entry.kind()), secs, TaskResult::Deficiency(Box::new(result)));
        return Ok(());
    }
    match entry.build()? {
        Built::Isometry(iso) => {
            let (result, secs) = timed(|| deficiency::cayley_deficiency_from_isometry(&iso));
            let result = result?;
            run.summary.push(format!("{}: indices ({}, {})", entry.kind(), result.n_plus, result.n_minus));
            run.push(format!("cayley {}", entry.kind()), secs, TaskResult::Cayley(result));
            Ok(())
        }
        Built::Model(_) => Err(Failure::Error(format!("deficiency indices are not available for {}", entry.kind()))),
    }
}

fn table(run: &Run, delimiter: u8) -> Outcome<String> {
    let Some(first) = run.tasks.first() else {
        return Err(Failure::Error("nothing to tabulate".into()));
    };
    let text = match &first.result {
        TaskResult::Diagnose(_) => {
            let rows: Vec<(usize, &resolvent::ExplosionCertificate)> = run
                .tasks
                .iter()
                .filter_map(|t| match &t.result {
                    TaskResult::Diagnose(d) => Some((d.certificate.explosion_transform.as_ref().map_or(0, |x| x.dim()), &d.certificate)),
                    _ => None,
                })
                .collect();
            report::certificates_table(&rows, delimiter)?
        }
        TaskResult::Sweep(_) => {
            let rows: Vec<(usize, &resolvent::ExplosionCertificate)> = run
                .tasks
                .iter()
                .filter_map(|t| match &t.result {
                    TaskResult::Sweep(s) => Some(s.dims.iter().copied().zip(s.certificates.iter()).collect::<Vec<_>>()),
                    _ => None,
                })
                .flatten()
                .collect();
            report::certificates_table(&rows, delimiter)?
        }
        TaskResult::Evolve(s) => report::evolution_table(s, delimiter)?,
        TaskResult::Deficiency(r) => report::deficiency_table(r, delimiter)?,
        _ => return Err(Failure::Error("tabular output is available for diagnose, sweep, evolve and deficiency".into())),
    };
    Ok(text)
}

fn emit(command: &str, cfg: RunConfig, run: Run) -> Outcome<()> {
    let output = cfg.output.clone();
    let format = output.as_ref().map(|o| o.format).unwrap_or_default();
    let body = match format {
        OutputFormat::Csv => table(&run, b',')?,
        OutputFormat::Tsv => table(&run, b'\t')?,
        OutputFormat::Json => {
            let mut envelope = ReportEnvelope::new(command, cfg);
            envelope.summary = if run.summary.is_empty() { "no tasks".into() } else { run.summary.join("; ") };
            envelope.tasks = run.tasks;
            envelope.to_json()? + "\n"
        }
    };
    match output.filter(|o| !o.path.is_empty()) {
        Some(o) => report::write_atomic(Path::new(&o.path), body.as_bytes())
            .map_err(|e| Failure::Error(format!("{}: {e}", o.path)))?,
        None => print!("{body}"),
    }
    Ok(())
}

fn list_models(args: &OutputArgs) -> Outcome<()> {
    let mut cfg = RunConfig::new(ModelSource::Reference(String::new()));
    if let Some(path) = &args.out {
        cfg.output = Some(OutputSpec { path: path.display().to_string(), format: OutputFormat::Json });
    }
    if args.format.as_deref().is_some_and(|f| f != "json") {
        return Err(Failure::Error("list-models only writes json".into()));
    }
    let mut run = Run::new();
    run.summary.push(format!("{} model kinds", catalog::model_schemas().len()));
    run.push("list-models".into(), 0.0, TaskResult::ListModels(catalog::model_schemas()));
    emit("list-models", cfg, run)
}

fn threads_from_env() {
    if let Some(n) = std::env::var("QDSLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        configure_threads(n);
    }
}

fn execute(cli: Cli) -> Outcome<Vec<String>> {
    let (name, args) = match &cli.command {
        Command::ListModels(out) => {
            list_models(out)?;
            return Ok(Vec::new());
        }
        Command::Validate(a) => ("validate", a),
        Command::Diagnose(a) => ("diagnose", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Deficiency(a) => ("deficiency", a),
    };
    let cfg = resolve_config(args)?;
    let mut run = Run::new();
    match name {
        "validate" => validate(&cfg, &mut run)?,
        "diagnose" => diagnose(&cfg, &mut run)?,
        "sweep" => sweep(&cfg, &mut run)?,
        "evolve" => evolve(&cfg, &mut run)?,
        _ => deficiency(&cfg, &mut run)?,
    }
    eprintln!("{}", run.summary.join("\n"));
    let inconclusive = std::mem::take(&mut run.inconclusive);
    emit(name, cfg, run)?;
    Ok(inconclusive)
}

/// Run one command line (`argv[0]` is the program name) and return the exit status.
pub fn run_command(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    threads_from_env();
    match execute(cli) {
        Ok(inconclusive) if inconclusive.is_empty() => EXIT_OK,
        Ok(inconclusive) => {
            for msg in inconclusive {
                eprintln!("inconclusive: {msg}");
            }
            EXIT_INCONCLUSIVE
        }
        Err(Failure::Inconclusive(msg)) => {
            eprintln!("inconclusive: {msg}");
            EXIT_INCONCLUSIVE
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}
