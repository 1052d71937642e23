//! Command-line pipelines: load a problem file, run a command, render a report.
//!
//! Exit status: 0 verdict produced (or check passed), 2 NonExistence, 1 error
//! or failed check.

pub mod field;
pub mod report;
pub mod spec_file;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classify::{classify, ClassifyError, Payload, Verdict};
use crate::model::{ModelError, ProblemSpec, TrigSeries};
use crate::verify::{oracle_convergence, verify, VerifyError, VerifyOptions};

pub use field::{audit_field, read_field, FieldError, SampledField};
pub use report::{field_csv, Report, SolutionBlock, REPORT_SCHEMA};
pub use spec_file::{parse_spec, LoadedSpec, SpecFileError, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NONEXISTENCE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Classify,
    Solve,
    Verify,
    Audit,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Audit => "audit",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

/// Command-line values that replace fields of the problem file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tol_zero: Option<f64>,
    pub tol_res: Option<f64>,
    pub grid: Option<usize>,
    pub periods: Option<usize>,
    pub oracle_r: Option<f64>,
    pub oracle_h: Option<f64>,
    pub bbox: Option<Vec<(f64, f64)>>,
}

impl Overrides {
    pub fn validate(&self) -> Result<(), CliError> {
        let pos = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(CliError::Override(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        pos("--tol-zero", self.tol_zero)?;
        pos("--tol-res", self.tol_res)?;
        pos("--oracle-R", self.oracle_r)?;
        pos("--oracle-h", self.oracle_h)?;
        if let Some(g) = self.grid {
            if g < 2 {
                return Err(CliError::Override(format!("--grid must be at least 2, got {g}")));
            }
        }
        if self.periods == Some(0) {
            return Err(CliError::Override("--periods must be at least 1".into()));
        }
        if let Some(b) = &self.bbox {
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return Err(CliError::Override(format!("--box ranges must satisfy lo < hi, got {b:?}")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, p: &mut ProblemSpec) -> Result<(), CliError> {
        self.validate()?;
        if let Some(v) = self.tol_zero {
            p.tolerances.zero = v;
        }
        if let Some(v) = self.tol_res {
            p.tolerances.residual = v;
        }
        if let Some(v) = self.grid {
            p.verification.grid = v;
        }
        if let Some(v) = self.periods {
            p.verification.periods = v;
        }
        if let Some(v) = self.oracle_r {
            p.verification.oracle.r = v;
        }
        if let Some(v) = self.oracle_h {
            p.verification.oracle.h = v;
        }
        if let Some(b) = &self.bbox {
            p.verification.bbox = b.clone();
        }
        p.check()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub overrides: Overrides,
    /// Sampled field for `audit`.
    pub field: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Spec { path: PathBuf, source: SpecFileError },
    #[error("invalid override: {0}")]
    Override(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("{path}: {source}")]
    Field { path: PathBuf, source: FieldError },
    #[error("{0}")]
    Usage(String),
}

/// Rendered output of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Report,
    /// Main document in the requested format.
    pub primary: String,
    /// Extra files: `(path, contents)`.
    pub artifacts: Vec<(PathBuf, String)>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Series checked by `verify` and `oracle`: the file's candidate, else the payload.
fn subject(loaded: &LoadedSpec, report: &mut Report) -> Result<TrigSeries, CliError> {
    if let Some(c) = &loaded.candidate {
        return Ok(c.clone());
    }
    let c = classify(&loaded.problem)?;
    let u = match &c.payload {
        Payload::Series { series, .. } => Some(series.clone()),
        Payload::Family(f) => Some(f.member(0.0)),
        _ => None,
    };
    let verdict = c.verdict;
    report.classification = Some(c);
    u.ok_or_else(|| {
        CliError::Usage(format!("no candidate in the problem file and the classifier produced none (verdict {verdict:?})"))
    })
}

/// Runs a command on problem text; no files are touched except `--field`.
pub fn execute(cfg: &RunConfig, text: &str) -> Result<Outcome, CliError> {
    let mut loaded = parse_spec(text).map_err(|source| CliError::Spec { path: cfg.input.clone(), source })?;
    cfg.overrides.apply(&mut loaded.problem)?;
    let p = &loaded.problem;
    let mut report = Report::new(cfg.command.name(), p);
    let mut artifacts = Vec::new();
    let mut field = None;
    let exit_code = match cfg.command {
        Command::Classify | Command::Solve => {
            let c = classify(p)?;
            let code = if c.verdict == Verdict::NonExistence { EXIT_NONEXISTENCE } else { EXIT_OK };
            if cfg.command == Command::Solve {
                let mut block = SolutionBlock::from_classification(&c);
                let sampled = match &c.payload {
                    Payload::Series { series, .. } => Some(series.clone()),
                    Payload::Family(f) => Some(f.member(0.0)),
                    _ => None,
                };
                if let Some(u) = sampled {
                    let csv = field_csv(&u, &p.verification).map_err(|source| VerifyError::Eval { point: vec![], source })?;
                    if let (Some(out), Some(b), false) = (&cfg.output, block.as_mut(), cfg.format == Format::Csv) {
                        let path = out.with_extension("csv");
                        b.field_csv = Some(path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()));
                        artifacts.push((path, csv.clone()));
                    }
                    field = Some(csv);
                }
                report.solution = block;
            }
            report.classification = Some(c);
            code
        }
        Command::Verify => {
            let u = subject(&loaded, &mut report)?;
            let v = verify(&u, p, VerifyOptions { oracle: false, audit: true })?;
            let code = if v.passed { EXIT_OK } else { EXIT_ERROR };
            report.verification = Some(v);
            code
        }
        Command::Audit => {
            let a = match &cfg.field {
                Some(path) => {
                    let f = read_field(&read(path)?, p.n_tangential())
                        .map_err(|source| CliError::Field { path: path.clone(), source })?;
                    audit_field(&f, p.tolerances.zero).map_err(|source| CliError::Field { path: path.clone(), source })?
                }
                None => {
                    let u = subject(&loaded, &mut report)?;
                    if u.affine().is_some() {
                        return Err(CliError::Usage("the audit needs a 2pi-periodic field; the candidate has an xN term".into()));
                    }
                    let v = verify(&u, p, VerifyOptions { oracle: false, audit: true })?;
                    v.audit.expect("audit requested for a periodic series")
                }
            };
            let code = if a.passed { EXIT_OK } else { EXIT_ERROR };
            report.audit = Some(a);
            code
        }
        Command::Oracle => {
            let u = subject(&loaded, &mut report)?;
            let o = p.verification.oracle;
            let conv = oracle_convergence(p, &u, o.r, o.h).map_err(VerifyError::from)?;
            report.oracle = Some(conv);
            EXIT_OK
        }
    };
    report.exit_code = exit_code;
    let primary = match cfg.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
        Format::Csv => field.ok_or_else(|| {
            CliError::Usage(format!("--format csv needs a sampled field; `{}` produced none", cfg.command.name()))
        })?,
    };
    Ok(Outcome { exit_code, report, primary, artifacts })
}

/// Runs a command end to end: reads the input, writes `--out` (or stdout) and artifacts.
pub fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    let text = read(&cfg.input)?;
    let out = execute(cfg, &text)?;
    let write = |path: &Path, s: &str| std::fs::write(path, s).map_err(|source| CliError::Io { path: path.to_path_buf(), source });
    match &cfg.output {
        Some(path) => write(path, &out.primary)?,
        None => print!("{}", out.primary),
    }
    for (path, s) in &out.artifacts {
        write(path, s)?;
    }
    Ok(out.exit_code)
}

/// Parses `lo:hi[,lo:hi...]`.
pub fn parse_box(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|r| {
            let (lo, hi) = r.split_once(':').ok_or_else(|| format!("range `{r}` is not lo:hi"))?;
            let lo: f64 = lo.trim().parse().map_err(|_| format!("`{lo}` is not a number"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| format!("`{hi}` is not a number"))?;
            Ok((lo, hi))
        })
        .collect()
}
