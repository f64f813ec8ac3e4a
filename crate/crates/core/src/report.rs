//! Run configuration, the versioned report envelope, and CSV/TSV/JSON writers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogEntry, ModelSchema};
use crate::deficiency::{CayleyDeficiency, DeficiencyResult};
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{ModelSpec, ValidationReport};
use crate::parallel::Execution;
use crate::resolvent::{AnnihilatorReport, ExplosionCertificate, SolutionCheck, SweepResult};
use crate::semigroup::EvolutionResult;
use crate::tolerance::Tolerances;

pub const SCHEMA: &str = "qdslab.report/v1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    /// Textual reference such as `pure-birth:quadratic`.
    Reference(String),
    Catalog(CatalogEntry),
    Inline(ModelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Tsv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "tsv" => Ok(OutputFormat::Tsv),
            other => Err(Error::Parse(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: String,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub execution: Execution,
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0]
}

impl RunConfig {
    pub fn new(model: ModelSource) -> Self {
        RunConfig {
            model,
            lambdas: default_lambdas(),
            dims: None,
            times: None,
            tolerances: Tolerances::default(),
            output: None,
            execution: Execution::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::InvalidArgument("at least one lambda is required".into()));
        }
        if let Some(bad) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {bad}")));
        }
        if let Some(dims) = &self.dims {
            if dims.is_empty() || dims.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument("dims must be nonempty and strictly increasing".into()));
            }
        }
        if let Some(times) = &self.times {
            if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidArgument("times must be nonnegative and nondecreasing".into()));
            }
        }
        Ok(())
    }
}

/// Per-sample summary of an evolution from `x = I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub times: Vec<f64>,
    pub p00: Vec<f64>,
    pub trace_p: Vec<f64>,
    pub explosion_min_eig: Vec<f64>,
    pub explosion_max_eig: Vec<f64>,
    pub explosion_00: Vec<f64>,
    pub psd_tol: f64,
}

impl EvolutionSummary {
    pub fn from_result(r: &EvolutionResult, psd_tol: f64) -> Self {
        let mut s = EvolutionSummary {
            times: r.times.clone(),
            p00: Vec::new(),
            trace_p: Vec::new(),
            explosion_min_eig: Vec::new(),
            explosion_max_eig: Vec::new(),
            explosion_00: Vec::new(),
            psd_tol,
        };
        for p in &r.observables {
            s.p00.push(p.matrix[(0, 0)].re);
            s.trace_p.push(linalg::trace(&p.matrix).re);
        }
        if let Some(ex) = &r.explosion {
            for e in ex {
                let ev = linalg::eigvalsh(&e.matrix);
                s.explosion_min_eig.push(ev.first().copied().unwrap_or(0.0));
                s.explosion_max_eig.push(ev.last().copied().unwrap_or(0.0));
                s.explosion_00.push(e.matrix[(0, 0)].re);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub certificate: ExplosionCertificate,
    pub solution_check: SolutionCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annihilator: Option<AnnihilatorReport>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "task", content = "result", rename_all = "snake_case")]
pub enum TaskResult {
    Validate(ValidationReport),
    Diagnose(Box<Diagnosis>),
    Sweep(SweepResult),
    Evolve(EvolutionSummary),
    Deficiency(Box<DeficiencyResult>),
    Cayley(CayleyDeficiency),
    ListModels(Vec<ModelSchema>),
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub name: String,
    pub wall_clock_s: f64,
    #[serde(flatten)]
    pub result: TaskResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportEnvelope {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub tasks: Vec<TaskReport>,
    pub summary: String,
}

impl ReportEnvelope {
    pub fn new(command: &str, config: RunConfig) -> Self {
        ReportEnvelope {
            schema: SCHEMA,
            tool_version: TOOL_VERSION,
            command: command.to_string(),
            config,
            tasks: Vec::new(),
            summary: String::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Write `contents` to a temporary sibling and rename it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

fn delimited<F>(delimiter: u8, header: &[&str], fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> std::result::Result<(), csv::Error>,
{
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Parse(e.to_string()))?;
    fill(&mut w).map_err(|e| Error::Parse(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub const CERTIFICATE_COLUMNS: [&str; 6] = ["dim", "lambda", "ell_norm", "q_limit_norm", "explosion_mass", "verdict"];
pub const EVOLUTION_COLUMNS: [&str; 6] =
    ["t", "p00", "trace_p", "explosion_min_eig", "explosion_max_eig", "explosion_00"];
pub const DEFICIENCY_COLUMNS: [&str; 3] = ["x", "abs_u_plus", "abs_u_minus"];

fn verdict_label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_string)).unwrap_or_default()
}

/// One row per (size, λ) certificate.
pub fn certificates_table(rows: &[(usize, &ExplosionCertificate)], delimiter: u8) -> Result<String> {
    delimited(delimiter, &CERTIFICATE_COLUMNS, |w| {
        for (dim, c) in rows {
            w.write_record([
                dim.to_string(),
                c.lambda.to_string(),
                format!("{:e}", c.ell_norm),
                format!("{:e}", c.q_limit_norm),
                format!("{:.15e}", c.explosion_mass),
                verdict_label(&c.verdict),
            ])?;
        }
        Ok(())
    })
}

pub fn evolution_table(s: &EvolutionSummary, delimiter: u8) -> Result<String> {
    delimited(delimiter, &EVOLUTION_COLUMNS, |w| {
        for i in 0..s.times.len() {
            let get = |v: &Vec<f64>| v.get(i).map(|x| format!("{x:.15e}")).unwrap_or_default();
            w.write_record([
                s.times[i].to_string(),
                get(&s.p00),
                get(&s.trace_p),
                get(&s.explosion_min_eig),
                get(&s.explosion_max_eig),
                get(&s.explosion_00),
            ])?;
        }
        Ok(())
    })
}

pub fn deficiency_table(r: &DeficiencyResult, delimiter: u8) -> Result<String> {
    delimited(delimiter, &DEFICIENCY_COLUMNS, |w| {
        for ((x, p), m) in r.x.iter().zip(&r.u_plus_samples).zip(&r.u_minus_samples) {
            w.write_record([x.to_string(), format!("{:e}", p.abs()), format!("{:e}", m.abs())])?;
        }
        Ok(())
    })
}
