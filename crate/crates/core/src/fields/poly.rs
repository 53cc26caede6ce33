//! Polynomials in `(x, y, t)` as term lists.
//!
//! Grammar: `expr := ['+'|'-'] term (('+'|'-') term)*`,
//! `term := factor ('*'? factor)*`, `factor := number | var ['^' int]`.
//! Variables are `x1..xn`, `y1..yn`, `t`; bare `x`/`y` mean `x1`/`y1`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{HmvpError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    /// Exponents in the flat layout `(x_1..x_n, y_1..y_n, t)`.
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolySpec {
    pub n: usize,
    pub terms: Vec<Term>,
}

fn powu(base: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => base,
        _ => base.powi(e as i32),
    }
}

impl Term {
    fn eval_with(&self, c: &[f64], lowered: &[(usize, u32)]) -> f64 {
        let mut acc = self.coefficient;
        for (k, &e) in self.exponents.iter().enumerate() {
            let mut e = e;
            for &(j, by) in lowered {
                if j == k {
                    if e < by {
                        return 0.0;
                    }
                    // falling factorial from differentiation
                    for m in 0..by {
                        acc *= (e - m) as f64;
                    }
                    e -= by;
                }
            }
            acc *= powu(c[k], e);
        }
        acc
    }
}

impl PolySpec {
    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(HmvpError::DimensionMismatch {
                expected: n,
                found: self.n,
            });
        }
        let bad = self
            .terms
            .iter()
            .any(|t| t.exponents.len() != 2 * n + 1 || !t.coefficient.is_finite());
        if bad {
            return Err(HmvpError::InvalidArgument("malformed polynomial term".into()));
        }
        Ok(())
    }

    pub fn value(&self, c: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval_with(c, &[])).sum()
    }

    pub fn gradient(&self, c: &[f64]) -> Vec<f64> {
        (0..c.len())
            .map(|k| self.terms.iter().map(|t| t.eval_with(c, &[(k, 1)])).sum())
            .collect()
    }

    pub fn hessian(&self, c: &[f64]) -> DMatrix<f64> {
        let d = c.len();
        DMatrix::from_fn(d, d, |i, j| {
            let lowered: &[(usize, u32)] = if i == j { &[(i, 2)] } else { &[(i, 1), (j, 1)] };
            self.terms.iter().map(|t| t.eval_with(c, lowered)).sum()
        })
    }

    fn var_name(&self, k: usize) -> String {
        let n = self.n;
        let base = if k < n {
            ("x", k + 1)
        } else if k < 2 * n {
            ("y", k - n + 1)
        } else {
            return "t".into();
        };
        if n == 1 {
            base.0.into()
        } else {
            format!("{}{}", base.0, base.1)
        }
    }
}

impl fmt::Display for PolySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, term) in self.terms.iter().enumerate() {
            let mut parts = Vec::new();
            let c = term.coefficient;
            let all_zero = term.exponents.iter().all(|&e| e == 0);
            if c.abs() != 1.0 || all_zero {
                parts.push(format!("{}", c.abs()));
            }
            for (k, &e) in term.exponents.iter().enumerate() {
                match e {
                    0 => {}
                    1 => parts.push(self.var_name(k)),
                    _ => parts.push(format!("{}^{e}", self.var_name(k))),
                }
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if i == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Caret,
}

fn tokenize(n: usize, s: &str) -> std::result::Result<Vec<Token>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1
            }
            '-' => {
                out.push(Token::Minus);
                i += 1
            }
            '*' => {
                out.push(Token::Star);
                i += 1
            }
            '^' => {
                out.push(Token::Caret);
                i += 1
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part, e.g. 1e-3
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let save = i;
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    if i < chars.len() && chars[i].is_ascii_digit() {
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse().map_err(|_| format!("bad number `{text}`"))?;
                out.push(Token::Num(v));
            }
            'x' | 'y' | 't' => {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let idx = if digits.is_empty() {
                    1
                } else {
                    digits.parse::<usize>().map_err(|_| "bad index".to_string())?
                };
                let k = match c {
                    't' if digits.is_empty() => 2 * n,
                    't' => return Err("t takes no index".into()),
                    _ if idx == 0 || idx > n => {
                        return Err(format!("variable {c}{idx} out of range for n = {n}"))
                    }
                    'x' => idx - 1,
                    _ => n + idx - 1,
                };
                out.push(Token::Var(k));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

/// Parses a polynomial such as `"x + x^2"` or `"3*x1*y2 - t^2"`.
pub fn parse_polynomial(n: usize, input: &str) -> Result<PolySpec> {
    if n == 0 {
        return Err(HmvpError::InvalidArgument("n must be at least 1".into()));
    }
    let fail = |reason: String| HmvpError::Parse {
        input: input.to_string(),
        reason,
    };
    let tokens = tokenize(n, input).map_err(fail)?;
    if tokens.is_empty() {
        return Err(fail("empty polynomial".into()));
    }
    let d = 2 * n + 1;
    let mut terms = Vec::new();
    let mut pos = 0;
    let mut first = true;
    while pos < tokens.len() {
        let mut sign = 1.0;
        match tokens[pos] {
            Token::Plus => pos += 1,
            Token::Minus => {
                sign = -1.0;
                pos += 1
            }
            _ if first => {}
            _ => return Err(fail(format!("expected + or - at token {pos}"))),
        }
        first = false;
        let mut term = Term {
            coefficient: sign,
            exponents: vec![0; d],
        };
        let mut factors = 0;
        loop {
            match tokens.get(pos) {
                Some(Token::Num(v)) => {
                    term.coefficient *= v;
                    pos += 1;
                }
                Some(Token::Var(k)) => {
                    let k = *k;
                    pos += 1;
                    let mut e = 1u32;
                    if tokens.get(pos) == Some(&Token::Caret) {
                        match tokens.get(pos + 1) {
                            Some(Token::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && *v < 64.0 => {
                                e = *v as u32;
                                pos += 2;
                            }
                            _ => return Err(fail("exponent must be a small nonnegative integer".into())),
                        }
                    }
                    term.exponents[k] += e;
                }
                _ => return Err(fail(format!("expected a factor at token {pos}"))),
            }
            factors += 1;
            match tokens.get(pos) {
                Some(Token::Star) => pos += 1,
                Some(Token::Num(_)) | Some(Token::Var(_)) => {}
                _ => break,
            }
        }
        debug_assert!(factors > 0);
        terms.push(term);
    }
    Ok(PolySpec { n, terms })
}
