//! The POLY1 instance format.
//!
//! ```text
//! poly1
//! vars 2
//! bound 0 0 1
//! bound 1 -1 1          # negative lower bounds are shifted away on parse
//! objective min
//!   -1 x0 x1
//! constraint ge -1      # also `eq`, and `le` (negated on parse)
//!   -1 x0
//!   -1 x1^2
//! end
//! ```

use std::fmt::Write as _;

use polyrlt_core::{Bounds, Constraint, Monomial, Polynomial, Problem, Sense};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

/// A parsed file. Variables with negative lower bounds are translated to
/// `y = x − l` so the internal box is nonnegative; `offset` maps back.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub problem: Problem,
    /// `x = y + offset` componentwise; all zeros when nothing was shifted.
    pub offset: Vec<f64>,
}

impl Instance {
    pub fn to_original(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.offset).map(|(a, b)| a + b).collect()
    }
}

/// A whitespace-separated token with its 1-based column.
#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

struct Line<'a> {
    no: usize,
    toks: Vec<Tok<'a>>,
    /// Column just past the content, for "missing token" errors.
    end: usize,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start = None;
        for (k, ch) in content.char_indices().chain(std::iter::once((content.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(k),
                (true, Some(s)) => {
                    toks.push(Tok { text: &content[s..k], col: s + 1 });
                    start = None;
                }
                _ => {}
            }
        }
        if !toks.is_empty() {
            out.push(Line { no: i + 1, toks, end: content.trim_end().len() + 1 });
        }
    }
    out
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn err(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError { line, col, msg: msg.into() }
    }

    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    fn next_line(&mut self, what: &str) -> Result<&Line<'a>, ParseError> {
        let l = self.lines.get(self.pos).ok_or_else(|| Self::err(self.last_line + 1, 1, format!("expected {what}, found end of file")))?;
        self.pos += 1;
        Ok(l)
    }
}

fn tok<'a>(line: &Line<'a>, k: usize, what: &str) -> Result<Tok<'a>, ParseError> {
    line.toks.get(k).copied().ok_or_else(|| Parser::err(line.no, line.end, format!("expected {what}")))
}

fn no_more(line: &Line<'_>, k: usize) -> Result<(), ParseError> {
    match line.toks.get(k) {
        Some(t) => Err(Parser::err(line.no, t.col, format!("unexpected `{}`", t.text))),
        None => Ok(()),
    }
}

fn number(line: &Line<'_>, t: Tok<'_>) -> Result<f64, ParseError> {
    let v: f64 = t.text.parse().map_err(|_| Parser::err(line.no, t.col, format!("expected a number, found `{}`", t.text)))?;
    if v.is_nan() {
        return Err(Parser::err(line.no, t.col, "NaN is not allowed"));
    }
    Ok(v)
}

fn index(line: &Line<'_>, t: Tok<'_>, n: usize) -> Result<usize, ParseError> {
    let j: usize = t.text.parse().map_err(|_| Parser::err(line.no, t.col, format!("expected a variable index, found `{}`", t.text)))?;
    if j >= n {
        return Err(Parser::err(line.no, t.col, format!("variable index {j} out of range (vars {n})")));
    }
    Ok(j)
}

/// `x<j>` or `x<j>^<p>`.
fn factor(line: &Line<'_>, t: Tok<'_>, n: usize) -> Result<(usize, u32), ParseError> {
    let bad = || Parser::err(line.no, t.col, format!("expected `x<j>` or `x<j>^<p>`, found `{}`", t.text));
    let body = t.text.strip_prefix('x').ok_or_else(bad)?;
    let (var, pow) = match body.split_once('^') {
        Some((v, p)) => (v, p.parse::<u32>().map_err(|_| bad())?),
        None => (body, 1),
    };
    if pow == 0 {
        return Err(Parser::err(line.no, t.col, "powers must be positive"));
    }
    let j: usize = var.parse().map_err(|_| bad())?;
    if j >= n {
        return Err(Parser::err(line.no, t.col, format!("variable x{j} out of range (vars {n})")));
    }
    Ok((j, pow))
}

fn is_keyword(line: &Line<'_>) -> bool {
    matches!(line.toks[0].text, "poly1" | "vars" | "bound" | "objective" | "constraint" | "end")
}

/// Term lines up to the next keyword.
fn terms(p: &mut Parser<'_>, n: usize) -> Result<Polynomial, ParseError> {
    let mut poly = Polynomial::zero();
    while let Some(line) = p.peek() {
        if is_keyword(line) {
            break;
        }
        let coef = number(line, line.toks[0])?;
        if !coef.is_finite() {
            return Err(Parser::err(line.no, line.toks[0].col, "coefficients must be finite"));
        }
        let mut exps = Vec::new();
        for &t in &line.toks[1..] {
            exps.push(factor(line, t, n)?);
        }
        poly.add_term(Monomial::from_pairs(exps), coef);
        p.pos += 1;
    }
    Ok(poly)
}

pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let lines = tokenize(text);
    let last_line = text.lines().count();
    let mut p = Parser { lines, pos: 0, last_line };

    let l = p.next_line("`poly1` header")?;
    let t = tok(l, 0, "`poly1`")?;
    if t.text != "poly1" {
        return Err(Parser::err(l.no, t.col, format!("expected `poly1` header, found `{}`", t.text)));
    }
    no_more(l, 1)?;

    let l = p.next_line("`vars <n>`")?;
    let t = tok(l, 0, "`vars`")?;
    if t.text != "vars" {
        return Err(Parser::err(l.no, t.col, format!("expected `vars`, found `{}`", t.text)));
    }
    let nt = tok(l, 1, "variable count")?;
    let n: usize = nt.text.parse().map_err(|_| Parser::err(l.no, nt.col, format!("expected a variable count, found `{}`", nt.text)))?;
    no_more(l, 2)?;

    let mut lower: Vec<Option<f64>> = vec![None; n];
    let mut upper = vec![0.0; n];
    let mut objective = None;
    let mut constraints: Vec<(Polynomial, Sense, f64, bool)> = Vec::new();
    let end_line = loop {
        let l = p.next_line("`end`")?;
        let kw = l.toks[0];
        match kw.text {
            "bound" => {
                let j = index(l, tok(l, 1, "variable index")?, n)?;
                let lt = tok(l, 2, "lower bound")?;
                let ut = tok(l, 3, "upper bound")?;
                let (lo, hi) = (number(l, lt)?, number(l, ut)?);
                no_more(l, 4)?;
                if lower[j].is_some() {
                    return Err(Parser::err(l.no, kw.col, format!("duplicate bound for x{j}")));
                }
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Parser::err(l.no, if lo.is_finite() { ut.col } else { lt.col }, format!("variable x{j} is unbounded; finite bounds are required")));
                }
                if lo > hi {
                    return Err(Parser::err(l.no, lt.col, format!("empty range [{lo}, {hi}] for x{j}")));
                }
                lower[j] = Some(lo);
                upper[j] = hi;
            }
            "objective" => {
                let s = tok(l, 1, "`min`")?;
                if s.text != "min" {
                    return Err(Parser::err(l.no, s.col, format!("only `objective min` is supported, found `{}`", s.text)));
                }
                no_more(l, 2)?;
                if objective.is_some() {
                    return Err(Parser::err(l.no, kw.col, "duplicate objective"));
                }
                objective = Some(terms(&mut p, n)?);
            }
            "constraint" => {
                let s = tok(l, 1, "`ge`, `le` or `eq`")?;
                let (sense, flip) = match s.text {
                    "ge" => (Sense::Ge, false),
                    "le" => (Sense::Ge, true),
                    "eq" => (Sense::Eq, false),
                    other => return Err(Parser::err(l.no, s.col, format!("expected `ge`, `le` or `eq`, found `{other}`"))),
                };
                let rt = tok(l, 2, "right-hand side")?;
                let rhs = number(l, rt)?;
                if !rhs.is_finite() {
                    return Err(Parser::err(l.no, rt.col, "right-hand side must be finite"));
                }
                no_more(l, 3)?;
                let body = terms(&mut p, n)?;
                constraints.push((body, sense, rhs, flip));
            }
            "end" => {
                no_more(l, 1)?;
                break l.no;
            }
            other => {
                let msg = if is_keyword(l) {
                    format!("`{other}` is not allowed here")
                } else {
                    format!("term line outside an objective or constraint: `{other}`")
                };
                return Err(Parser::err(l.no, kw.col, msg));
            }
        }
    };
    if let Some(l) = p.peek() {
        return Err(Parser::err(l.no, l.toks[0].col, "content after `end`"));
    }
    if let Some(j) = lower.iter().position(Option::is_none) {
        return Err(Parser::err(end_line, 1, format!("variable x{j} has no bound line; finite bounds are required")));
    }
    let objective = objective.ok_or_else(|| Parser::err(end_line, 1, "missing `objective min` section"))?;
    let lower: Vec<f64> = lower.into_iter().map(Option::unwrap).collect();

    let offset: Vec<f64> = lower.iter().map(|&l| l.min(0.0)).collect();
    let shift = |q: &Polynomial| if offset.iter().any(|&o| o != 0.0) { q.shifted(&offset) } else { q.clone() };
    let constraints = constraints
        .into_iter()
        .map(|(body, sense, rhs, flip)| {
            let body = shift(&body);
            if flip {
                Constraint::less_equal(body, rhs)
            } else {
                Constraint::new(body, sense, rhs)
            }
        })
        .collect();
    let bounds = Bounds::new(
        lower.iter().zip(&offset).map(|(l, o)| l - o).collect(),
        upper.iter().zip(&offset).map(|(u, o)| u - o).collect(),
    );
    let problem = Problem::new(n, shift(&objective), constraints, bounds)
        .map_err(|e| Parser::err(end_line, 1, e.to_string()))?;
    Ok(Instance { problem, offset })
}

fn render_terms(out: &mut String, p: &Polynomial) {
    for (m, c) in p.terms() {
        if m.is_constant() {
            let _ = writeln!(out, "  {c:?}");
        } else {
            let _ = writeln!(out, "  {c:?} {m}");
        }
    }
}

/// Canonical text for `prob`; `parse_instance` reads it back exactly.
pub fn render_instance(prob: &Problem) -> String {
    let mut out = String::from("poly1\n");
    let _ = writeln!(out, "vars {}", prob.num_vars());
    for j in 0..prob.num_vars() {
        let _ = writeln!(out, "bound {j} {:?} {:?}", prob.bounds.lower[j], prob.bounds.upper[j]);
    }
    out.push_str("objective min\n");
    render_terms(&mut out, &prob.objective);
    for c in &prob.constraints {
        let sense = match c.sense {
            Sense::Ge => "ge",
            Sense::Eq => "eq",
        };
        let _ = writeln!(out, "constraint {sense} {:?}", c.rhs);
        render_terms(&mut out, &c.body);
    }
    out.push_str("end\n");
    out
}
