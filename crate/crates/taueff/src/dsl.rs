//! Text formats: the line-oriented graph description language (`.pd`) and
//! the covariance JSON document.
//!
//! Graph grammar, one statement per line:
//!
//! ```text
//! observed NAME ...
//! latent NAME ...
//! NAME -> NAME [: REAL]     # directed edge, optional path coefficient
//! NAME <-> NAME [: REAL]    # bidirected edge, optional error covariance
//! ```
//!
//! `#` starts a comment; blank lines are ignored. Names must be declared
//! before use. Parse errors carry a 1-based line and column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cov::LabeledCovariance;
use crate::error::{CovError, SemError};
use crate::graph::{Observability, PathDiagram, VertexId};
use crate::sim::LinearSEM;

/// A parse failure with its 1-based source location.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// A parsed graph file: the diagram plus whatever coefficient annotations
/// the file carried. Annotations may be partial; building a model requires
/// them to be complete.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDocument {
    pub diagram: PathDiagram,
    pub coefficients: BTreeMap<(VertexId, VertexId), f64>,
    pub error_covariances: BTreeMap<(VertexId, VertexId), f64>,
}

/// One whitespace-separated token with its 1-based column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

impl GraphDocument {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut vertices: BTreeMap<VertexId, Observability> = BTreeMap::new();
        let mut directed: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        let mut bidirected: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        let mut directed_lines: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
        let mut coefficients = BTreeMap::new();
        let mut error_covariances = BTreeMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            };
            let toks = tokens(line);
            if toks.is_empty() {
                continue;
            }
            match toks[0].1 {
                kw @ ("observed" | "latent") => {
                    if toks.len() < 2 {
                        return Err(ParseError::new(
                            lineno,
                            toks[0].0,
                            format!("`{kw}` needs at least one name"),
                        ));
                    }
                    let obs = if kw == "observed" {
                        Observability::Observed
                    } else {
                        Observability::Latent
                    };
                    for (col, name) in &toks[1..] {
                        let v = VertexId::new(name).map_err(|e| {
                            ParseError::new(lineno, *col, e.to_string())
                        })?;
                        if vertices.insert(v.clone(), obs).is_some() {
                            return Err(ParseError::new(
                                lineno,
                                *col,
                                format!("vertex `{name}` declared twice"),
                            ));
                        }
                    }
                }
                _ => {
                    // edge statement: NAME (->|<->) NAME [: REAL]
                    if toks.len() < 3 {
                        return Err(ParseError::new(
                            lineno,
                            toks[0].0,
                            "expected `observed`, `latent`, or an edge statement",
                        ));
                    }
                    let lookup = |col: usize, name: &str| -> Result<VertexId, ParseError> {
                        let v = VertexId::new(name)
                            .map_err(|e| ParseError::new(lineno, col, e.to_string()))?;
                        if !vertices.contains_key(&v) {
                            return Err(ParseError::new(
                                lineno,
                                col,
                                format!("undeclared name `{name}`"),
                            ));
                        }
                        Ok(v)
                    };
                    let from = lookup(toks[0].0, toks[0].1)?;
                    let arrow = toks[1];
                    let to = lookup(toks[2].0, toks[2].1)?;
                    if from == to {
                        return Err(ParseError::new(
                            lineno,
                            toks[2].0,
                            format!("self-loop at `{from}`"),
                        ));
                    }
                    let value = match toks.len() {
                        3 => None,
                        5 if toks[3].1 == ":" => {
                            let (col, lit) = toks[4];
                            Some(lit.parse::<f64>().map_err(|_| {
                                ParseError::new(
                                    lineno,
                                    col,
                                    format!("malformed number `{lit}`"),
                                )
                            })?)
                        }
                        _ => {
                            let (col, tok) = toks[3];
                            return Err(ParseError::new(
                                lineno,
                                col,
                                format!("unexpected token `{tok}` (expected `: REAL`)"),
                            ));
                        }
                    };
                    match arrow.1 {
                        "->" => {
                            let key = (from.clone(), to.clone());
                            if !directed.insert(key.clone()) {
                                return Err(ParseError::new(
                                    lineno,
                                    toks[0].0,
                                    format!("duplicate edge `{from} -> {to}`"),
                                ));
                            }
                            // reject a cycle as soon as the closing edge
                            // appears, naming the lines of the edges that
                            // complete it
                            if let Some(back) = directed_path(&directed, &to, &from) {
                                let lines: Vec<String> = back
                                    .iter()
                                    .map(|e| directed_lines[e].to_string())
                                    .collect();
                                return Err(ParseError::new(
                                    lineno,
                                    toks[0].0,
                                    format!(
                                        "edge `{from} -> {to}` closes a cycle with the edge(s) on line(s) {}",
                                        lines.join(", ")
                                    ),
                                ));
                            }
                            directed_lines.insert(key.clone(), lineno);
                            if let Some(c) = value {
                                coefficients.insert(key, c);
                            }
                        }
                        "<->" => {
                            let key = if from <= to {
                                (from.clone(), to.clone())
                            } else {
                                (to.clone(), from.clone())
                            };
                            if !bidirected.insert(key.clone()) {
                                return Err(ParseError::new(
                                    lineno,
                                    toks[0].0,
                                    format!("duplicate edge `{from} <-> {to}`"),
                                ));
                            }
                            if let Some(c) = value {
                                error_covariances.insert(key, c);
                            }
                        }
                        other => {
                            return Err(ParseError::new(
                                lineno,
                                arrow.0,
                                format!("expected `->` or `<->`, found `{other}`"),
                            ));
                        }
                    }
                }
            }
        }

        let diagram = PathDiagram::new(vertices, directed, bidirected)
            .map_err(|e| ParseError::new(1, 1, e.to_string()))?;
        Ok(GraphDocument {
            diagram,
            coefficients,
            error_covariances,
        })
    }

    /// Whether every edge carries an annotation, as simulation requires.
    pub fn is_fully_annotated(&self) -> bool {
        self.diagram
            .directed_edges()
            .all(|e| self.coefficients.contains_key(e))
            && self
                .diagram
                .bidirected_edges()
                .all(|e| self.error_covariances.contains_key(e))
    }

    /// Builds the unit-variance model from the annotations.
    pub fn to_sem(&self) -> Result<LinearSEM, SemError> {
        if let Some((a, b)) = self
            .diagram
            .directed_edges()
            .find(|e| !self.coefficients.contains_key(e))
        {
            return Err(SemError::MissingCoefficient(a.to_string(), b.to_string()));
        }
        LinearSEM::with_unit_variances(
            self.diagram.clone(),
            self.coefficients.clone(),
            self.error_covariances.clone(),
        )
    }

    /// Canonical text form; `parse` of the output reproduces the document.
    pub fn print(&self) -> String {
        let mut out = String::new();
        let observed = self.diagram.observed_vertices();
        let latent = self.diagram.latent_vertices();
        if !observed.is_empty() {
            out.push_str("observed");
            for v in &observed {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        if !latent.is_empty() {
            out.push_str("latent");
            for v in &latent {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out.push('\n');
        for (a, b) in self.diagram.directed_edges() {
            match self.coefficients.get(&(a.clone(), b.clone())) {
                Some(c) => {
                    let _ = writeln!(out, "{a} -> {b} : {}", format_f64(*c));
                }
                None => {
                    let _ = writeln!(out, "{a} -> {b}");
                }
            }
        }
        for (a, b) in self.diagram.bidirected_edges() {
            match self.error_covariances.get(&(a.clone(), b.clone())) {
                Some(c) => {
                    let _ = writeln!(out, "{a} <-> {b} : {}", format_f64(*c));
                }
                None => {
                    let _ = writeln!(out, "{a} <-> {b}");
                }
            }
        }
        out
    }
}

/// Edges along some directed path from `from` to `to`, if one exists.
fn directed_path(
    edges: &BTreeSet<(VertexId, VertexId)>,
    from: &VertexId,
    to: &VertexId,
) -> Option<Vec<(VertexId, VertexId)>> {
    let mut stack = vec![from.clone()];
    let mut came_from: BTreeMap<VertexId, (VertexId, VertexId)> = BTreeMap::new();
    let mut seen = BTreeSet::from([from.clone()]);
    while let Some(v) = stack.pop() {
        if &v == to {
            let mut path = Vec::new();
            let mut cur = v;
            while let Some(e) = came_from.get(&cur) {
                cur = e.0.clone();
                path.push(e.clone());
            }
            path.reverse();
            return Some(path);
        }
        for (a, b) in edges {
            if a == &v && seen.insert(b.clone()) {
                came_from.insert(b.clone(), (a.clone(), b.clone()));
                stack.push(b.clone());
            }
        }
    }
    None
}

/// 17 significant decimal digits: enough to reproduce any f64 exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialized covariance matrix: `labels` plus row-major `matrix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDocument {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl CovarianceDocument {
    pub fn from_cov(cov: &LabeledCovariance) -> Self {
        let n = cov.labels().len();
        CovarianceDocument {
            labels: cov.labels().iter().map(|l| l.to_string()).collect(),
            matrix: (0..n)
                .map(|i| (0..n).map(|j| cov.matrix()[(i, j)]).collect())
                .collect(),
        }
    }

    /// Validates and converts to a labeled covariance (symmetry and
    /// positive definiteness are enforced there).
    pub fn to_cov(&self) -> Result<LabeledCovariance, CovError> {
        let labels: Vec<VertexId> = self
            .labels
            .iter()
            .map(|l| VertexId::new(l).map_err(|_| CovError::UnknownLabel(l.clone())))
            .collect::<Result<_, _>>()?;
        let n = labels.len();
        if self.matrix.len() != n || self.matrix.iter().any(|row| row.len() != n) {
            return Err(CovError::DimensionMismatch {
                rows: self.matrix.len(),
                cols: self.matrix.first().map_or(0, |r| r.len()),
                labels: n,
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| self.matrix[i][j]);
        LabeledCovariance::new(labels, m)
    }

    pub fn parse_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Deterministic JSON with numbers at 17 significant digits.
    pub fn to_json_string(&self) -> String {
        let mut out = String::from("{\n  \"labels\": [");
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&serde_json::to_string(l).expect("string serialization"));
        }
        out.push_str("],\n  \"matrix\": [\n");
        for (i, row) in self.matrix.iter().enumerate() {
            out.push_str("    [");
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format_f64(*x));
            }
            out.push(']');
            if i + 1 < self.matrix.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("  ]\n}\n");
        out
    }
}
