//! JSON problem files.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{parse_expr, Expr, ParseError};
use crate::model::{DiffusionMatrix, ModelError, OracleSettings, ProblemSpec, Tolerances, TrigSeries};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("{field}: {source} (text `{text}`)")]
    Expr { field: String, text: String, source: ParseError },
    #[error("{field}: mode key `{key}` is not a nonnegative integer")]
    ModeKey { field: String, key: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Expression given as text or as a bare number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ExprText {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixFile {
    Identity,
    ScalarExpr { expr: ExprText },
    MatrixExpr { entries: Vec<Vec<ExprText>> },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFile {
    #[serde(default)]
    pub c: BTreeMap<String, ExprText>,
    #[serde(default)]
    pub d: BTreeMap<String, ExprText>,
    #[serde(default)]
    pub affine_xn: Option<ExprText>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesFile {
    pub zero: Option<f64>,
    pub residual: Option<f64>,
    pub pd: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationFile {
    #[serde(rename = "box")]
    pub bbox: Option<Vec<(f64, f64)>>,
    pub grid: Option<usize>,
    pub periods: Option<usize>,
    pub oracle: Option<OracleFile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub schema_version: u32,
    pub dimension: usize,
    #[serde(rename = "A", default = "identity")]
    pub a: MatrixFile,
    pub g: SeriesFile,
    #[serde(default)]
    pub tolerances: TolerancesFile,
    #[serde(default)]
    pub verification: VerificationFile,
    #[serde(default)]
    pub assume_base_step: bool,
    /// Series checked by `verify`, `audit` and `oracle` instead of the classifier payload.
    #[serde(default)]
    pub candidate: Option<SeriesFile>,
}

fn identity() -> MatrixFile {
    MatrixFile::Identity
}

/// A parsed problem plus the optional candidate.
#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub problem: ProblemSpec,
    pub candidate: Option<TrigSeries>,
}

fn expr(field: &str, t: &ExprText, n: usize) -> Result<Expr, SpecFileError> {
    match t {
        ExprText::Number(v) => Ok(Expr::constant(*v)),
        ExprText::Text(s) => parse_expr(s, n).map_err(|source| SpecFileError::Expr {
            field: field.to_string(),
            text: s.clone(),
            source,
        }),
    }
}

fn modes(field: &str, map: &BTreeMap<String, ExprText>, n: usize) -> Result<Vec<(u32, Expr)>, SpecFileError> {
    map.iter()
        .map(|(k, v)| {
            let m: u32 = k.trim().parse().map_err(|_| SpecFileError::ModeKey { field: field.into(), key: k.clone() })?;
            Ok((m, expr(&format!("{field}.{k}"), v, n)?))
        })
        .collect()
}

impl SeriesFile {
    pub fn to_series(&self, field: &str, n: usize) -> Result<TrigSeries, SpecFileError> {
        let c = modes(&format!("{field}.c"), &self.c, n)?;
        let d = modes(&format!("{field}.d"), &self.d, n)?;
        if d.iter().any(|(m, _)| *m == 0) {
            return Err(SpecFileError::Field { field: format!("{field}.d"), message: "sine modes start at 1".into() });
        }
        let mut s = TrigSeries::from_modes(c, d)?;
        if let Some(a) = &self.affine_xn {
            s.set_affine(Some(expr(&format!("{field}.affine_xn"), a, n)?));
        }
        Ok(s)
    }
}

impl MatrixFile {
    fn to_matrix(&self, n: usize) -> Result<DiffusionMatrix, SpecFileError> {
        Ok(match self {
            MatrixFile::Identity => DiffusionMatrix::identity(n),
            MatrixFile::ScalarExpr { expr: e } => {
                let a = expr("A.expr", e, n)?;
                let rows = (0..n)
                    .map(|i| (0..n).map(|j| if i == j { a.clone() } else { Expr::zero() }).collect())
                    .collect();
                DiffusionMatrix::from_rows(rows)?
            }
            MatrixFile::MatrixExpr { entries } => {
                let rows = entries
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, e)| expr(&format!("A.entries[{i}][{j}]"), e, n))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                DiffusionMatrix::from_rows(rows)?
            }
        })
    }
}

pub fn parse_spec(text: &str) -> Result<LoadedSpec, SpecFileError> {
    let file: SpecFile = serde_json::from_str(text).map_err(|e| SpecFileError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(SpecFileError::Schema(file.schema_version));
    }
    if file.dimension < 2 {
        return Err(ModelError::Dimension(file.dimension).into());
    }
    let n = file.dimension - 1;
    let source = file.g.to_series("g", n)?;
    let mut p = ProblemSpec::new(file.dimension, file.a.to_matrix(n)?, source)?;
    let t = &file.tolerances;
    let d = Tolerances::default();
    p.tolerances = Tolerances {
        zero: t.zero.unwrap_or(d.zero),
        residual: t.residual.unwrap_or(d.residual),
        pd: t.pd.unwrap_or(d.pd),
    };
    let v = &file.verification;
    if let Some(b) = &v.bbox {
        p.verification.bbox = b.clone();
    }
    if let Some(g) = v.grid {
        p.verification.grid = g;
    }
    if let Some(k) = v.periods {
        p.verification.periods = k;
    }
    if let Some(o) = &v.oracle {
        let d = OracleSettings::default();
        p.verification.oracle = OracleSettings { r: o.r.unwrap_or(d.r), h: o.h.unwrap_or(d.h) };
    }
    p.assume_base_step = file.assume_base_step;
    p.check()?;
    let candidate = file.candidate.as_ref().map(|c| c.to_series("candidate", n)).transpose()?;
    Ok(LoadedSpec { problem: p, candidate })
}
