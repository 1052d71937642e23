//! Report documents and their renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::classify::{format_series, Classification, Payload};
use crate::expr::EvalError;
use crate::fourier::AuditReport;
use crate::model::{DiffusionMatrix, ProblemSpec, Tolerances, TrigSeries, VerificationSettings};
use crate::verify::residual::xn_samples;
use crate::verify::{ConvergenceReport, VerificationReport};

pub const REPORT_SCHEMA: &str = "halfspace-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct ProblemEcho {
    pub dimension: usize,
    pub diffusion: DiffusionMatrix,
    pub source: TrigSeries,
    pub source_text: String,
    pub tolerances: Tolerances,
    pub verification: VerificationSettings,
    pub assume_base_step: bool,
}

impl ProblemEcho {
    pub fn new(p: &ProblemSpec) -> ProblemEcho {
        ProblemEcho {
            dimension: p.dimension,
            diffusion: p.diffusion.clone(),
            source: p.source.clone(),
            source_text: format_series(&p.source),
            tolerances: p.tolerances,
            verification: p.verification.clone(),
            assume_base_step: p.assume_base_step,
        }
    }
}

/// Printed coefficients of a series, keyed `a0`, `a1`, `b1`, ..., `affine_xn`.
pub fn coefficient_table(u: &TrigSeries) -> BTreeMap<String, String> {
    let mut t = BTreeMap::new();
    for (m, e) in u.cos_modes() {
        t.insert(format!("a{m}"), e.to_string());
    }
    for (m, e) in u.sin_modes() {
        t.insert(format!("b{m}"), e.to_string());
    }
    if let Some(a) = u.affine() {
        t.insert("affine_xn".into(), a.to_string());
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionBlock {
    /// `series` or `family`.
    pub kind: &'static str,
    pub text: String,
    pub coefficients: BTreeMap<String, String>,
    /// Family direction; the family is `coefficients + A·direction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<BTreeMap<String, String>>,
    /// File holding the sampled field, when one was written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_csv: Option<String>,
}

impl SolutionBlock {
    pub fn from_classification(c: &Classification) -> Option<SolutionBlock> {
        match &c.payload {
            Payload::Series { series, text } => Some(SolutionBlock {
                kind: "series",
                text: text.clone(),
                coefficients: coefficient_table(series),
                direction: None,
                field_csv: None,
            }),
            Payload::Family(f) => Some(SolutionBlock {
                kind: "family",
                text: f.text.clone(),
                coefficients: coefficient_table(&f.base),
                direction: Some(coefficient_table(&f.direction)),
                field_csv: None,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: &'static str,
    pub problem: ProblemEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<ConvergenceReport>,
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: &'static str, p: &ProblemSpec) -> Report {
        Report {
            schema: REPORT_SCHEMA,
            command,
            problem: ProblemEcho::new(p),
            classification: None,
            solution: None,
            verification: None,
            audit: None,
            oracle: None,
            exit_code: 0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports contain only serializable data");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.problem;
        let _ = writeln!(out, "{} (N = {}): g = {}", self.command, p.dimension, p.source_text);
        if let Some(c) = &self.classification {
            let _ = writeln!(out, "verdict: {:?}", c.verdict);
            let _ = writeln!(out, "rule: {}", c.rule_id.unwrap_or("none"));
            let _ = writeln!(out, "statement: {}", c.statement);
            if let Some(t) = c.payload_text() {
                let _ = writeln!(out, "payload: {t}");
            }
            if let Payload::Family(f) = &c.payload {
                let _ = writeln!(out, "parameter range: [{}, {}]", f.parameter_range.0, f.parameter_range.1);
                let _ = writeln!(
                    out,
                    "sampled nonnegative for A in [{}, {}]",
                    f.sampled_nonnegative.0, f.sampled_nonnegative.1
                );
            }
            if let Some(cert) = &c.evidence.certificate {
                let _ = writeln!(out, "certificate ({}): {}", cert.level, cert.condition);
            }
            for a in &c.assumptions {
                let _ = writeln!(out, "assumption: {a}");
            }
            for o in &c.obstructions {
                let _ = writeln!(out, "obstruction: {o}");
            }
            for f in &c.evidence.findings {
                let _ = writeln!(out, "finding: {}", f.message);
            }
        }
        if let Some(s) = &self.solution {
            for (k, v) in &s.coefficients {
                let _ = writeln!(out, "  {k} = {v}");
            }
            if let Some(f) = &s.field_csv {
                let _ = writeln!(out, "field: {f}");
            }
        }
        if let Some(v) = &self.verification {
            let _ = writeln!(
                out,
                "verification: {} (residual {:e}, min u {:e}, |u(.,0)| {:e})",
                if v.passed { "passed" } else { "failed" },
                v.residual_sup,
                v.nonnegativity.min,
                v.boundary.u_at_0
            );
            for f in &v.failures {
                let _ = writeln!(out, "  failure: {f}");
            }
        }
        if let Some(a) = &self.audit {
            let _ = writeln!(
                out,
                "audit: {} ({} points, modes up to {}, Q = {})",
                if a.passed { "passed" } else { "failed" },
                a.points,
                a.max_mode,
                a.resolution
            );
            for c in &a.checks {
                let _ = writeln!(out, "  {}: {} ({} violations)", c.name, c.description, c.violations);
            }
        }
        if let Some(o) = &self.oracle {
            let _ = writeln!(
                out,
                "oracle: error {:e} at h = {:.6}, {:e} at h = {:.6}, ratio {}",
                o.coarse.sup_error,
                o.coarse.hn,
                o.fine.sup_error,
                o.fine.hn,
                o.ratio.map_or("n/a".to_string(), |r| format!("{r:.4}"))
            );
        }
        let _ = writeln!(out, "exit code: {}", self.exit_code);
        out
    }
}

/// `x1[,x2],xN,value` rows over the verification grid, `x_N` fastest.
pub fn field_csv(u: &TrigSeries, v: &VerificationSettings) -> Result<String, EvalError> {
    let n = v.bbox.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("xN".into());
    header.push("value".into());
    w.write_record(&header).expect("in-memory write");
    let xn = xn_samples(v.periods, v.grid);
    for x in v.xp_grid().points() {
        let s = u.at(&x)?;
        for &t in &xn {
            let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            row.push(t.to_string());
            row.push(s.eval(t).to_string());
            w.write_record(&row).expect("in-memory write");
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8"))
}
