//! JSON schema for points and covectors, and CSV formatting.

use std::fs;
use std::io::Read;

use carnot_cut::{Covector, GroupPoint, GroupShape, Mat, Vector};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `{"q", "p", "x": [[column], ...], "y", "t"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub q: usize,
    pub p: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
}

/// `{"xi": [[column], ...], "eta", "tau"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovectorJson {
    pub xi: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
}

fn columns(m: &Mat) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn from_columns(what: &str, q: usize, cols: &[Vec<f64>]) -> Result<Mat, CliError> {
    if let Some(bad) = cols.iter().find(|c| c.len() != q) {
        return Err(CliError::Input(format!("{what}: column of length {} where {q} was expected", bad.len())));
    }
    Ok(Mat::from_fn(q, cols.len(), |a, k| cols[k][a]))
}

fn check_shape(found: GroupShape, expected: Option<GroupShape>) -> Result<(), CliError> {
    match expected {
        Some(s) if s != found => Err(CliError::Input(format!(
            "--shape {},{} does not match input of shape {},{}",
            s.q, s.p, found.q, found.p
        ))),
        _ => Ok(()),
    }
}

impl PointJson {
    pub fn from_point(g: &GroupPoint) -> Self {
        let shape = g.shape();
        Self {
            q: shape.q,
            p: shape.p,
            x: columns(&g.x),
            y: g.y.iter().copied().collect(),
            t: g.t.iter().copied().collect(),
        }
    }

    pub fn to_point(&self, expected: Option<GroupShape>) -> Result<GroupPoint, CliError> {
        let shape = GroupShape::new(self.q, self.p).map_err(|e| CliError::Input(e.to_string()))?;
        check_shape(shape, expected)?;
        if self.x.len() != self.p || self.y.len() != self.p || self.t.len() != self.q {
            return Err(CliError::Input(format!(
                "point of shape {},{} needs {} x columns, {} y entries and {} t entries",
                self.q, self.p, self.p, self.p, self.q
            )));
        }
        let x = from_columns("x", self.q, &self.x)?;
        let g = GroupPoint::new(x, Vector::from_vec(self.y.clone()), Vector::from_vec(self.t.clone()))
            .map_err(|e| CliError::Input(e.to_string()))?;
        if !g.is_finite() {
            return Err(CliError::Input("point has non-finite entries".into()));
        }
        Ok(g)
    }
}

impl CovectorJson {
    pub fn from_covector(c: &Covector) -> Self {
        Self {
            xi: columns(&c.xi),
            eta: c.eta.iter().copied().collect(),
            tau: c.tau.iter().copied().collect(),
        }
    }

    pub fn to_covector(&self, expected: Option<GroupShape>) -> Result<Covector, CliError> {
        let (q, p) = (self.tau.len(), self.eta.len());
        let shape = GroupShape::new(q, p).map_err(|e| CliError::Input(e.to_string()))?;
        check_shape(shape, expected)?;
        if self.xi.len() != p {
            return Err(CliError::Input(format!("xi needs {p} columns, found {}", self.xi.len())));
        }
        let xi = from_columns("xi", q, &self.xi)?;
        let c = Covector::new(xi, Vector::from_vec(self.eta.clone()), Vector::from_vec(self.tau.clone()))
            .map_err(|e| CliError::Input(e.to_string()))?;
        if !c.to_flat().iter().all(|v| v.is_finite()) {
            return Err(CliError::Input("covector has non-finite entries".into()));
        }
        Ok(c)
    }
}

/// Reads a JSON argument: inline text, `@path`, or `-` for standard input.
pub fn read_json<T: for<'de> Deserialize<'de>>(what: &str, arg: &str) -> Result<T, CliError> {
    let text = if arg == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Input(format!("{what}: cannot read standard input: {e}")))?;
        s
    } else if let Some(path) = arg.strip_prefix('@') {
        fs::read_to_string(path).map_err(|e| CliError::Input(format!("{what}: cannot read {path}: {e}")))?
    } else {
        arg.to_owned()
    };
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

/// Coordinate column names: `x_{a}{k}` in column-major order, then `y_k`, `t_a`.
pub fn coordinate_header(shape: GroupShape) -> Vec<String> {
    let sep = if shape.q > 9 || shape.p > 9 { "_" } else { "" };
    let mut h = Vec::with_capacity(shape.dim());
    for k in 1..=shape.p {
        for a in 1..=shape.q {
            h.push(format!("x_{a}{sep}{k}"));
        }
    }
    h.extend((1..=shape.p).map(|k| format!("y_{k}")));
    h.extend((1..=shape.q).map(|a| format!("t_{a}")));
    h
}

/// 17 significant digits, round-trips every double.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn coordinates(g: &GroupPoint) -> Vec<String> {
    g.to_flat().iter().map(|&v| num(v)).collect()
}

/// CSV text with LF line endings.
pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

pub fn json_text<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
