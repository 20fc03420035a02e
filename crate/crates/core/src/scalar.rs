//! Scalar functions of one real variable, used both as time coefficients
//! λ(t) and as spatial multipliers f(x).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::galerkin::quadrature::gauss_legendre;
use crate::linalg::{re, C64};

type Callable = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// A complex-valued function of one real variable.
///
/// Polynomials keep their coefficient list (lowest degree first) so callers
/// can exploit the structure; everything else is an opaque callable, with
/// optional breakpoints marking kinks or jumps for quadrature.
#[derive(Clone)]
pub enum ScalarFn {
    Poly(Vec<C64>),
    Func { f: Callable, breaks: Vec<f64> },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Poly(c) => write!(f, "Poly({c:?})"),
            ScalarFn::Func { breaks, .. } => write!(f, "Func(breaks={breaks:?})"),
        }
    }
}

impl From<f64> for ScalarFn {
    fn from(v: f64) -> Self {
        ScalarFn::constant(re(v))
    }
}

impl From<C64> for ScalarFn {
    fn from(v: C64) -> Self {
        ScalarFn::constant(v)
    }
}

impl ScalarFn {
    pub fn constant(v: C64) -> Self {
        ScalarFn::Poly(vec![v])
    }

    pub fn one() -> Self {
        ScalarFn::constant(re(1.0))
    }

    pub fn zero() -> Self {
        ScalarFn::Poly(vec![])
    }

    /// Identity function x ↦ x.
    pub fn linear() -> Self {
        ScalarFn::Poly(vec![re(0.0), re(1.0)])
    }

    pub fn poly(coeffs: Vec<C64>) -> Self {
        ScalarFn::Poly(coeffs).trimmed()
    }

    pub fn real_poly(coeffs: &[f64]) -> Self {
        ScalarFn::poly(coeffs.iter().map(|&x| re(x)).collect())
    }

    /// Monomial c·x^k.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut v = vec![re(0.0); k + 1];
        v[k] = re(c);
        ScalarFn::Poly(v)
    }

    pub fn from_fn(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        ScalarFn::Func {
            f: Arc::new(f),
            breaks: vec![],
        }
    }

    pub fn from_real_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::from_fn(move |x| re(f(x)))
    }

    /// Same function with declared non-smooth points.
    pub fn with_breaks(self, breaks: Vec<f64>) -> Self {
        match self {
            ScalarFn::Func { f, .. } => ScalarFn::Func { f, breaks },
            p => p,
        }
    }

    fn trimmed(self) -> Self {
        match self {
            ScalarFn::Poly(mut c) => {
                while c.last().is_some_and(|z| *z == re(0.0)) {
                    c.pop();
                }
                ScalarFn::Poly(c)
            }
            f => f,
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        match self {
            ScalarFn::Poly(c) => c.iter().rev().fold(re(0.0), |acc, &a| acc * x + a),
            ScalarFn::Func { f, .. } => f(x),
        }
    }

    pub fn eval_re(&self, x: f64) -> f64 {
        self.eval(x).re
    }

    pub fn coefficients(&self) -> Option<&[C64]> {
        match self {
            ScalarFn::Poly(c) => Some(c),
            ScalarFn::Func { .. } => None,
        }
    }

    /// Polynomial degree (0 for constants and the zero polynomial).
    pub fn degree(&self) -> Option<usize> {
        self.coefficients().map(|c| c.len().saturating_sub(1))
    }

    pub fn breaks(&self) -> &[f64] {
        match self {
            ScalarFn::Poly(_) => &[],
            ScalarFn::Func { breaks, .. } => breaks,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarFn::Poly(c) if c.is_empty())
    }

    /// True when the function is known to be real (polynomials with real
    /// coefficients); opaque callables are probed on a few points.
    pub fn is_real(&self) -> bool {
        match self {
            ScalarFn::Poly(c) => c.iter().all(|z| z.im == 0.0),
            ScalarFn::Func { f, .. } => [-1.3, -0.4, 0.0, 0.37, 0.9, 2.2].iter().all(|&x| f(x).im == 0.0),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            ScalarFn::Poly(c) => ScalarFn::Poly(c.iter().map(|z| z.conj()).collect()),
            ScalarFn::Func { f, breaks } => {
                let f = f.clone();
                ScalarFn::Func {
                    f: Arc::new(move |x| f(x).conj()),
                    breaks: breaks.clone(),
                }
            }
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        match self {
            ScalarFn::Poly(c) => ScalarFn::poly(c.iter().map(|z| z * s).collect()),
            ScalarFn::Func { f, breaks } => {
                let f = f.clone();
                ScalarFn::Func {
                    f: Arc::new(move |x| f(x) * s),
                    breaks: breaks.clone(),
                }
            }
        }
    }

    pub fn add(&self, other: &ScalarFn) -> Self {
        match (self, other) {
            (ScalarFn::Poly(a), ScalarFn::Poly(b)) => {
                let n = a.len().max(b.len());
                let v = (0..n)
                    .map(|k| a.get(k).copied().unwrap_or_default() + b.get(k).copied().unwrap_or_default())
                    .collect();
                ScalarFn::poly(v)
            }
            _ => {
                let (f, g) = (self.clone(), other.clone());
                let breaks = merge_breaks(self.breaks(), other.breaks());
                ScalarFn::from_fn(move |x| f.eval(x) + g.eval(x)).with_breaks(breaks)
            }
        }
    }

    pub fn mul(&self, other: &ScalarFn) -> Self {
        match (self, other) {
            (ScalarFn::Poly(a), ScalarFn::Poly(b)) => {
                if a.is_empty() || b.is_empty() {
                    return ScalarFn::zero();
                }
                let mut v = vec![re(0.0); a.len() + b.len() - 1];
                for (i, x) in a.iter().enumerate() {
                    for (j, y) in b.iter().enumerate() {
                        v[i + j] += x * y;
                    }
                }
                ScalarFn::poly(v)
            }
            _ => {
                let (f, g) = (self.clone(), other.clone());
                let breaks = merge_breaks(self.breaks(), other.breaks());
                ScalarFn::from_fn(move |x| f.eval(x) * g.eval(x)).with_breaks(breaks)
            }
        }
    }

    pub fn powi(&self, k: u32) -> Self {
        (0..k).fold(ScalarFn::one(), |acc, _| acc.mul(self))
    }

    /// Derivative; exact for polynomials, fourth-order central differences otherwise.
    pub fn derivative(&self) -> Self {
        match self {
            ScalarFn::Poly(c) => ScalarFn::poly(c.iter().enumerate().skip(1).map(|(k, z)| z * k as f64).collect()),
            ScalarFn::Func { f, breaks } => {
                let f = f.clone();
                ScalarFn::Func {
                    f: Arc::new(move |x| {
                        let h = 1e-3 * x.abs().max(1.0);
                        (f(x - 2.0 * h) - f(x - h) * 8.0 + f(x + h) * 8.0 - f(x + 2.0 * h)) / (12.0 * h)
                    }),
                    breaks: breaks.clone(),
                }
            }
        }
    }

    /// ∫_a^b f(x) dx; exact for polynomials, adaptive Gauss–Legendre otherwise.
    pub fn integrate(&self, a: f64, b: f64) -> C64 {
        match self {
            ScalarFn::Poly(c) => {
                let anti = |x: f64| {
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(re(0.0), |acc, (k, &z)| acc * x + z / (k as f64 + 1.0))
                        * x
                };
                anti(b) - anti(a)
            }
            ScalarFn::Func { .. } => {
                let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
                let mut edges = vec![lo];
                edges.extend(self.breaks().iter().copied().filter(|&x| x > lo && x < hi));
                edges.push(hi);
                edges.sort_by(|x, y| x.total_cmp(y));
                let total: C64 = edges.windows(2).map(|w| adaptive_legendre(self, w[0], w[1], 0)).sum();
                total * sign
            }
        }
    }

    /// Antiderivative from 0, as a new function.
    pub fn antiderivative(&self) -> Self {
        match self {
            ScalarFn::Poly(c) => {
                let mut v = vec![re(0.0)];
                v.extend(c.iter().enumerate().map(|(k, z)| z / (k as f64 + 1.0)));
                ScalarFn::poly(v)
            }
            ScalarFn::Func { .. } => {
                let f = self.clone();
                ScalarFn::from_fn(move |x| f.integrate(0.0, x))
            }
        }
    }

    /// Parse a polynomial expression in `var`, e.g. "0.5*t^3 - t + 1" or "(1-s)*s".
    pub fn parse_poly(src: &str, var: &str) -> Result<Self> {
        let mut p = Parser {
            toks: tokenize(src)?,
            pos: 0,
            var,
        };
        let v = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::invalid(format!("trailing input in expression `{src}`")));
        }
        Ok(v)
    }
}

fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v.dedup();
    v
}

fn adaptive_legendre(f: &ScalarFn, a: f64, b: f64, depth: u32) -> C64 {
    let rule = gauss_legendre(16);
    let quad = |lo: f64, hi: f64| -> C64 {
        let h = 0.5 * (hi - lo);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| f.eval(lo + h * (x + 1.0)) * (w * h))
            .sum()
    };
    let whole = quad(a, b);
    let mid = 0.5 * (a + b);
    let halves = quad(a, mid) + quad(mid, b);
    if depth >= 30 || (whole - halves).norm() <= 1e-14 * halves.norm().max(1e-300) + 1e-15 * (b - a) {
        halves
    } else {
        adaptive_legendre(f, a, mid, depth + 1) + adaptive_legendre(f, mid, b, depth + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || ((chars[i] == 'e' || chars[i] == 'E')
                        && i + 1 < chars.len()
                        && (chars[i + 1].is_ascii_digit() || chars[i + 1] == '-' || chars[i + 1] == '+'))
                    || ((chars[i] == '-' || chars[i] == '+') && i > start && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number `{s}`")))?;
            toks.push(Tok::Num(v));
        } else if ch.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*^()".contains(ch) {
            toks.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(Error::invalid(format!("unexpected character `{ch}` in expression")));
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn expr(&mut self) -> Result<ScalarFn> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc.add(&rhs) } else { acc.add(&rhs.scale(re(-1.0))) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<ScalarFn> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    acc = acc.mul(&self.power()?);
                }
                // implicit multiplication such as "0.5t" or "2(t+1)"
                Some(Tok::Ident(_)) | Some(Tok::Op('(')) => acc = acc.mul(&self.power()?),
                _ => break,
            }
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<ScalarFn> {
        let base = self.unary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Num(k)) if k >= 0.0 && k.fract() == 0.0 => {
                    self.pos += 1;
                    return Ok(base.powi(k as u32));
                }
                _ => return Err(Error::invalid("exponent must be a nonnegative integer")),
            }
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<ScalarFn> {
        match self.peek().cloned() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(self.power()?.scale(re(-1.0)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.power()
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(ScalarFn::from(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == self.var {
                    Ok(ScalarFn::linear())
                } else {
                    Err(Error::invalid(format!(
                        "unknown symbol `{name}` (expected variable `{}`)",
                        self.var
                    )))
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return Err(Error::invalid("missing `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            other => Err(Error::invalid(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_polynomials() {
        let p = ScalarFn::parse_poly("0.5*t^3 - t + 1", "t").unwrap();
        assert_eq!(p.degree(), Some(3));
        assert!((p.eval_re(2.0) - 3.0).abs() < 1e-15);
        let q = ScalarFn::parse_poly("(1-s)*s", "s").unwrap();
        assert!((q.eval_re(0.25) - 0.1875).abs() < 1e-15);
        let r = ScalarFn::parse_poly("-2e-1t^2", "t").unwrap();
        assert!((r.eval_re(3.0) + 1.8).abs() < 1e-15);
        assert!(ScalarFn::parse_poly("sin(t)", "t").is_err());
    }

    #[test]
    fn integrals_agree() {
        let p = ScalarFn::real_poly(&[1.0, -2.0, 0.5]);
        let pf = {
            let q = p.clone();
            ScalarFn::from_fn(move |x| q.eval(x))
        };
        let a = p.integrate(-0.3, 1.7);
        let b = pf.integrate(-0.3, 1.7);
        assert!((a - b).norm() < 1e-13);
        let anti = p.antiderivative();
        assert!((anti.eval(1.7) - anti.eval(-0.3) - a).norm() < 1e-14);
    }

    #[test]
    fn derivative_of_callable() {
        let f = ScalarFn::from_real_fn(f64::sin);
        assert!((f.derivative().eval_re(0.4) - 0.4f64.cos()).abs() < 1e-10);
    }
}
