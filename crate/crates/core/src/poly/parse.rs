use std::fmt;

use super::{Monomial, PolyError, PolynomialSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    UnknownVariable {
        line: usize,
        column: usize,
        name: String,
    },
    NonFinite {
        line: usize,
        column: usize,
    },
    Structure(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax {
                line,
                column,
                message,
            } => write!(f, "{line}:{column}: syntax error: {message}"),
            ParseError::UnknownVariable { line, column, name } => {
                write!(f, "{line}:{column}: unknown variable `{name}`")
            }
            ParseError::NonFinite { line, column } => {
                write!(f, "{line}:{column}: non-finite coefficient")
            }
            ParseError::Structure(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ParseError {}

impl From<PolyError> for ParseError {
    fn from(e: PolyError) -> Self {
        ParseError::Structure(e.to_string())
    }
}

/// Parses a system definition.
///
/// Documents whose first non-blank character is `{` are read as the
/// structured JSON form; everything else as `dx<k>/dt = <polynomial>` lines.
pub fn parse_system(text: &str) -> Result<PolynomialSystem, ParseError> {
    if text.trim_start().starts_with('{') {
        return PolynomialSystem::from_json(text).map_err(ParseError::from);
    }

    let mut heads: Vec<(usize, usize, &str, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let eq = line.find('=').ok_or_else(|| ParseError::Syntax {
            line: lineno,
            column: line.len() + 1,
            message: "expected `dx<k>/dt = <polynomial>`".into(),
        })?;
        let lhs = &line[..eq];
        let k = parse_head(lhs).ok_or_else(|| ParseError::Syntax {
            line: lineno,
            column: lhs.len() - lhs.trim_start().len() + 1,
            message: format!("malformed left-hand side `{}`", lhs.trim()),
        })?;
        heads.push((lineno, k, &line[eq + 1..], eq + 1));
    }

    let n_vars = heads.iter().map(|h| h.1).max().unwrap_or(0);
    if n_vars == 0 {
        return Err(ParseError::Structure("no equations found".into()));
    }
    let mut equations: Vec<Option<Vec<Monomial>>> = vec![None; n_vars];
    for (lineno, k, rhs, offset) in heads {
        if equations[k - 1].is_some() {
            return Err(ParseError::Structure(format!(
                "line {lineno}: duplicate equation for dx{k}/dt"
            )));
        }
        let mut parser = Parser {
            chars: rhs.char_indices().collect(),
            pos: 0,
            line: lineno,
            col_offset: offset,
            n_vars,
        };
        let poly = parser.parse_rhs()?;
        equations[k - 1] = Some(poly.into_monomials(n_vars));
    }
    let equations = equations
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| ParseError::Structure(format!("missing equation for dx{}/dt", i + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolynomialSystem::new(equations, None)?)
}

fn parse_head(lhs: &str) -> Option<usize> {
    let compact: String = lhs.chars().filter(|c| !c.is_whitespace()).collect();
    let rest = compact.strip_prefix("dx")?.strip_suffix("/dt")?;
    let k: usize = rest.parse().ok()?;
    (k >= 1 && rest.chars().all(|c| c.is_ascii_digit())).then_some(k)
}

/// Polynomial as (exponents, coefficient) terms in first-appearance order.
#[derive(Debug, Clone)]
struct Poly(Vec<(Vec<u32>, f64)>);

impl Poly {
    fn constant(v: f64) -> Self {
        Poly(vec![(Vec::new(), v)])
    }

    fn variable(i: usize) -> Self {
        let mut e = vec![0; i + 1];
        e[i] = 1;
        Poly(vec![(e, 1.0)])
    }

    fn push(&mut self, mut exps: Vec<u32>, c: f64) {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        match self.0.iter_mut().find(|(e, _)| *e == exps) {
            Some(t) => t.1 += c,
            None => self.0.push((exps, c)),
        }
    }

    fn add(mut self, other: Poly, sign: f64) -> Self {
        for (e, c) in other.0 {
            self.push(e, sign * c);
        }
        self
    }

    fn mul(&self, other: &Poly) -> Self {
        let mut out = Poly(Vec::new());
        for (ea, ca) in &self.0 {
            for (eb, cb) in &other.0 {
                let n = ea.len().max(eb.len());
                let e = (0..n)
                    .map(|i| ea.get(i).copied().unwrap_or(0) + eb.get(i).copied().unwrap_or(0))
                    .collect();
                out.push(e, ca * cb);
            }
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|(_, c)| c.is_finite())
    }

    fn into_monomials(self, n_vars: usize) -> Vec<Monomial> {
        self.0
            .into_iter()
            .map(|(mut e, c)| {
                e.resize(n_vars, 0);
                Monomial::new(c, e)
            })
            .collect()
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    col_offset: usize,
    n_vars: usize,
}

impl Parser {
    fn column(&self) -> usize {
        let byte = self
            .chars
            .get(self.pos)
            .map(|c| c.0)
            .unwrap_or_else(|| self.chars.last().map(|c| c.0 + c.1.len_utf8()).unwrap_or(0));
        self.col_offset + byte + 1
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.1.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn parse_rhs(&mut self) -> Result<Poly, ParseError> {
        let p = self.expr()?;
        if let Some(c) = self.peek() {
            return Err(self.error(format!("unexpected `{c}`")));
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = acc.add(rhs, if op == '+' { 1.0 } else { -1.0 });
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.unary()?;
        while let Some('*') = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = acc.mul(&rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Poly, ParseError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Poly(Vec::new()).add(self.unary()?, -1.0))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ParseError> {
        let base = self.atom()?;
        if let Some('^') = self.peek() {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.chars.get(self.pos).is_some_and(|c| c.1.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected a non-negative integer exponent"));
            }
            let digits: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
            let n: u32 = digits
                .parse()
                .map_err(|_| self.error("exponent out of range"))?;
            let mut out = Poly::constant(1.0);
            for _ in 0..n {
                out = out.mul(&base);
            }
            return Ok(out);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly, ParseError> {
        self.skip_ws();
        let col = self.column();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while let Some(&(_, ch)) = self.chars.get(self.pos) {
                    let prev = if self.pos > start { self.chars[self.pos - 1].1 } else { ' ' };
                    let ok = ch.is_ascii_digit()
                        || ch == '.'
                        || ch == 'e'
                        || ch == 'E'
                        || ((ch == '+' || ch == '-') && (prev == 'e' || prev == 'E'));
                    if !ok {
                        break;
                    }
                    self.pos += 1;
                }
                let lit: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    line: self.line,
                    column: col,
                    message: format!("invalid number `{lit}`"),
                })?;
                if !v.is_finite() {
                    return Err(ParseError::NonFinite {
                        line: self.line,
                        column: col,
                    });
                }
                Ok(Poly::constant(v))
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.1.is_alphanumeric() || c.1 == '_')
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                let index = name
                    .strip_prefix('x')
                    .filter(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| k >= 1 && k <= self.n_vars);
                match index {
                    Some(k) => Ok(Poly::variable(k - 1)),
                    None => Err(ParseError::UnknownVariable {
                        line: self.line,
                        column: col,
                        name,
                    }),
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of expression")),
        }
        .and_then(|p| {
            if p.is_finite() {
                Ok(p)
            } else {
                Err(ParseError::NonFinite {
                    line: self.line,
                    column: col,
                })
            }
        })
    }
}
