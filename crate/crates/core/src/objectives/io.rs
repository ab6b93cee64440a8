//! Plain-text problem format.
//!
//! ```text
//! problem huber
//! agents 2
//! dim 3
//! threshold 1
//! ridge 0.01
//! agent 0
//! A 4 3
//! <4 lines of 3 numbers>
//! b 4
//! <one line of 4 numbers>
//! agent 1
//! ...
//! ```
//!
//! Quadratic agents use `Q p p` / `c p`, least-squares agents `A m p` / `b m`.
//! Numbers are written in shortest round-trip form, so reading back is exact.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{LocalObjective, ProblemInstance, ProblemKind};
use crate::error::{Error, Result};

pub(super) fn write_problem(inst: &ProblemInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "problem {}", inst.kind().name());
    let _ = writeln!(out, "agents {}", inst.agents());
    let _ = writeln!(out, "dim {}", inst.dim());
    if let LocalObjective::Huber {
        threshold, ridge, ..
    } = &inst.locals()[0]
    {
        let _ = writeln!(out, "threshold {threshold:?}");
        let _ = writeln!(out, "ridge {ridge:?}");
    }
    for (i, local) in inst.locals().iter().enumerate() {
        let _ = writeln!(out, "agent {i}");
        match local {
            LocalObjective::Quadratic { q, c } => {
                write_matrix(&mut out, "Q", q);
                write_vector(&mut out, "c", c);
            }
            LocalObjective::LeastSquares { a, b } | LocalObjective::Huber { a, b, .. } => {
                write_matrix(&mut out, "A", a);
                write_vector(&mut out, "b", b);
            }
        }
    }
    out
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_matrix(out: &mut String, tag: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{tag} {} {}", m.nrows(), m.ncols());
    for r in m.row_iter() {
        let _ = writeln!(out, "{}", join(r.iter().copied()));
    }
}

fn write_vector(out: &mut String, tag: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "{tag} {}", v.len());
    let _ = writeln!(out, "{}", join(v.iter().copied()));
}

struct Lines<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: Box::new(
                text.lines()
                    .enumerate()
                    .map(|(i, l)| (i + 1, l.trim()))
                    .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
            ),
            last: 0,
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        let (no, line) = self
            .inner
            .next()
            .ok_or_else(|| Error::parse(self.last + 1, "unexpected end of input"))?;
        self.last = no;
        Ok((no, line))
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn keyed(&mut self, key: &str, count: usize) -> Result<(usize, Vec<&'a str>)> {
        let (no, line) = self.next_line()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => {}
            other => {
                return Err(Error::parse(
                    no,
                    format!("expected `{key}`, found `{}`", other.unwrap_or("")),
                ))
            }
        }
        let vals: Vec<_> = parts.collect();
        if vals.len() != count {
            return Err(Error::parse(
                no,
                format!("`{key}` takes {count} value(s), found {}", vals.len()),
            ));
        }
        Ok((no, vals))
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next_line()?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(no, format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != count {
            return Err(Error::parse(
                no,
                format!("expected {count} numbers, found {}", vals.len()),
            ));
        }
        Ok(vals)
    }
}

fn parse_usize(no: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|e| Error::parse(no, format!("bad count `{s}`: {e}")))
}

fn parse_f64(no: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|e| Error::parse(no, format!("bad number `{s}`: {e}")))
}

pub(super) fn read_problem(text: &str) -> Result<ProblemInstance> {
    let mut lines = Lines::new(text);
    let (no, kind) = lines.keyed("problem", 1)?;
    let kind = match kind[0] {
        "quadratic" => ProblemKind::Quadratic,
        "least_squares" => ProblemKind::LeastSquares,
        "huber" => ProblemKind::Huber,
        other => return Err(Error::parse(no, format!("unknown problem kind `{other}`"))),
    };
    let (no, v) = lines.keyed("agents", 1)?;
    let agents = parse_usize(no, v[0])?;
    let (no, v) = lines.keyed("dim", 1)?;
    let dim = parse_usize(no, v[0])?;
    let huber_params = if kind == ProblemKind::Huber {
        let (no, v) = lines.keyed("threshold", 1)?;
        let threshold = parse_f64(no, v[0])?;
        let (no, v) = lines.keyed("ridge", 1)?;
        Some((threshold, parse_f64(no, v[0])?))
    } else {
        None
    };

    let mut locals = Vec::with_capacity(agents);
    for i in 0..agents {
        let (no, v) = lines.keyed("agent", 1)?;
        if parse_usize(no, v[0])? != i {
            return Err(Error::parse(no, format!("expected agent {i}")));
        }
        let (mat_key, vec_key) = match kind {
            ProblemKind::Quadratic => ("Q", "c"),
            _ => ("A", "b"),
        };
        let (no, v) = lines.keyed(mat_key, 2)?;
        let (rows, cols) = (parse_usize(no, v[0])?, parse_usize(no, v[1])?);
        if cols != dim {
            return Err(Error::parse(
                no,
                format!("expected {dim} columns, found {cols}"),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(lines.numbers(cols)?);
        }
        let m = DMatrix::from_row_slice(rows, cols, &data);
        let (no, v) = lines.keyed(vec_key, 1)?;
        let len = parse_usize(no, v[0])?;
        let v = DVector::from_vec(lines.numbers(len)?);
        locals.push(match (kind, huber_params) {
            (ProblemKind::Quadratic, _) => LocalObjective::Quadratic { q: m, c: v },
            (ProblemKind::LeastSquares, _) => LocalObjective::LeastSquares { a: m, b: v },
            (ProblemKind::Huber, Some((threshold, ridge))) => LocalObjective::Huber {
                a: m,
                b: v,
                threshold,
                ridge,
            },
            (ProblemKind::Huber, None) => unreachable!(),
        });
    }
    if let Ok((no, _)) = lines.next_line() {
        return Err(Error::parse(no, "trailing content after last agent"));
    }
    ProblemInstance::new(locals)
}
