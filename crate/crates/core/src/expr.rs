//! Closed-form scalar expressions in one variable `t`.
//!
//! The grammar covers constants, `t`, `abs`, real powers, `exp`, `ln`,
//! `min`/`max`, and arithmetic. Keeping the grammar closed-form lets us
//! compute exact antiderivatives for most pieces and decide tail growth
//! symbolically; everything else falls back to quadrature or sampling.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a fixed real exponent.
    Pow(Box<Expr>, f64),
    Abs(Box<Expr>),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

/// Direction of a one-sided tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    PlusInf,
    MinusInf,
}

/// Classified limit of an expression as `t` runs to an infinite tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitClass {
    PlusInf,
    MinusInf,
    Finite(f64),
    Unknown,
}

/// Upper bound on the asymptotic size of `|e(t)|` along a tail.
///
/// `Poly { deg, log }` means `|e(t)| <= C |t|^deg (log |t|)^k` for some k
/// (k = 0 when `log` is false). The classification is conservative: when a
/// rule does not apply we return `Unknown` rather than guessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthClass {
    Bounded,
    Poly { deg: f64, log: bool },
    ExpGrowth,
    Unknown,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        Parser::new(src).parse()
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => t,
            Expr::Neg(e) => -e.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(e, g) => e.eval(t).powf(*g),
            Expr::Abs(e) => e.eval(t).abs(),
            Expr::Exp(e) => e.eval(t).exp(),
            Expr::Ln(e) => e.eval(t).ln(),
            Expr::Min(a, b) => a.eval(t).min(b.eval(t)),
            Expr::Max(a, b) => a.eval(t).max(b.eval(t)),
        }
    }

    /// Branch-wise derivative at `t`. At kinks of `abs`/`min`/`max` an
    /// arbitrary admissible branch is taken.
    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Expr::Const(_) => 0.0,
            Expr::Var => 1.0,
            Expr::Neg(e) => -e.deriv(t),
            Expr::Add(a, b) => a.deriv(t) + b.deriv(t),
            Expr::Sub(a, b) => a.deriv(t) - b.deriv(t),
            Expr::Mul(a, b) => a.deriv(t) * b.eval(t) + a.eval(t) * b.deriv(t),
            Expr::Div(a, b) => {
                let bv = b.eval(t);
                (a.deriv(t) * bv - a.eval(t) * b.deriv(t)) / (bv * bv)
            }
            Expr::Pow(e, g) => {
                let v = e.eval(t);
                g * v.powf(g - 1.0) * e.deriv(t)
            }
            Expr::Abs(e) => e.eval(t).signum() * e.deriv(t),
            Expr::Exp(e) => e.eval(t).exp() * e.deriv(t),
            Expr::Ln(e) => e.deriv(t) / e.eval(t),
            Expr::Min(a, b) => {
                if a.eval(t) <= b.eval(t) {
                    a.deriv(t)
                } else {
                    b.deriv(t)
                }
            }
            Expr::Max(a, b) => {
                if a.eval(t) >= b.eval(t) {
                    a.deriv(t)
                } else {
                    b.deriv(t)
                }
            }
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var => None,
            Expr::Neg(e) => e.as_const().map(|v| -v),
            Expr::Add(a, b) => Some(a.as_const()? + b.as_const()?),
            Expr::Sub(a, b) => Some(a.as_const()? - b.as_const()?),
            Expr::Mul(a, b) => Some(a.as_const()? * b.as_const()?),
            Expr::Div(a, b) => Some(a.as_const()? / b.as_const()?),
            Expr::Pow(e, g) => Some(e.as_const()?.powf(*g)),
            Expr::Abs(e) => e.as_const().map(f64::abs),
            Expr::Exp(e) => e.as_const().map(f64::exp),
            Expr::Ln(e) => e.as_const().map(f64::ln),
            Expr::Min(a, b) => Some(a.as_const()?.min(b.as_const()?)),
            Expr::Max(a, b) => Some(a.as_const()?.max(b.as_const()?)),
        }
    }

    /// Decompose as `k*t + c` when the expression is affine in `t`.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match self {
            Expr::Const(c) => Some((0.0, *c)),
            Expr::Var => Some((1.0, 0.0)),
            Expr::Neg(e) => e.as_affine().map(|(k, c)| (-k, -c)),
            Expr::Add(a, b) => {
                let (ka, ca) = a.as_affine()?;
                let (kb, cb) = b.as_affine()?;
                Some((ka + kb, ca + cb))
            }
            Expr::Sub(a, b) => {
                let (ka, ca) = a.as_affine()?;
                let (kb, cb) = b.as_affine()?;
                Some((ka - kb, ca - cb))
            }
            Expr::Mul(a, b) => {
                if let Some(c) = a.as_const() {
                    let (k, c0) = b.as_affine()?;
                    Some((c * k, c * c0))
                } else if let Some(c) = b.as_const() {
                    let (k, c0) = a.as_affine()?;
                    Some((c * k, c * c0))
                } else {
                    None
                }
            }
            Expr::Div(a, b) => {
                let c = b.as_const()?;
                let (k, c0) = a.as_affine()?;
                Some((k / c, c0 / c))
            }
            _ => None,
        }
    }

    /// Closed-form antiderivative, when the rule set covers the expression.
    ///
    /// The rules are linearity, powers/exp/ln/abs of affine arguments, and
    /// constant factors. Anything else (products, min/max, compositions)
    /// returns `None` and is handled by quadrature.
    pub fn antiderivative(&self) -> Option<Expr> {
        if let Some(c) = self.as_const() {
            return Some(Expr::Mul(Box::new(Expr::Const(c)), Box::new(Expr::Var)));
        }
        match self {
            Expr::Var => Some(Expr::Mul(
                Box::new(Expr::Const(0.5)),
                Box::new(Expr::Pow(Box::new(Expr::Var), 2.0)),
            )),
            Expr::Neg(e) => e.antiderivative().map(|a| Expr::Neg(Box::new(a))),
            Expr::Add(a, b) => Some(Expr::Add(
                Box::new(a.antiderivative()?),
                Box::new(b.antiderivative()?),
            )),
            Expr::Sub(a, b) => Some(Expr::Sub(
                Box::new(a.antiderivative()?),
                Box::new(b.antiderivative()?),
            )),
            Expr::Mul(a, b) => {
                if let Some(c) = a.as_const() {
                    Some(Expr::Mul(Box::new(Expr::Const(c)), Box::new(b.antiderivative()?)))
                } else if let Some(c) = b.as_const() {
                    Some(Expr::Mul(Box::new(Expr::Const(c)), Box::new(a.antiderivative()?)))
                } else {
                    None
                }
            }
            Expr::Div(a, b) => {
                let c = b.as_const()?;
                Some(Expr::Mul(
                    Box::new(Expr::Const(1.0 / c)),
                    Box::new(a.antiderivative()?),
                ))
            }
            Expr::Pow(base, g) => {
                let (k, _) = base.as_affine()?;
                if k == 0.0 {
                    return None; // constant base handled above
                }
                if (*g - (-1.0)).abs() < 1e-300 {
                    // 1/(kt+c) -> ln|kt+c| / k
                    Some(Expr::Div(
                        Box::new(Expr::Ln(Box::new(Expr::Abs(base.clone())))),
                        Box::new(Expr::Const(k)),
                    ))
                } else {
                    // (kt+c)^g -> (kt+c)^{g+1} / (k (g+1))
                    Some(Expr::Div(
                        Box::new(Expr::Pow(base.clone(), g + 1.0)),
                        Box::new(Expr::Const(k * (g + 1.0))),
                    ))
                }
            }
            Expr::Exp(arg) => {
                let (k, _) = arg.as_affine()?;
                if k == 0.0 {
                    return None;
                }
                Some(Expr::Div(Box::new(self.clone()), Box::new(Expr::Const(k))))
            }
            Expr::Ln(arg) => {
                // ln(kt+c) -> ((kt+c) ln(kt+c) - (kt+c)) / k
                let (k, _) = arg.as_affine()?;
                if k == 0.0 {
                    return None;
                }
                let u = arg.clone();
                Some(Expr::Div(
                    Box::new(Expr::Sub(
                        Box::new(Expr::Mul(u.clone(), Box::new(Expr::Ln(u.clone())))),
                        u,
                    )),
                    Box::new(Expr::Const(k)),
                ))
            }
            Expr::Abs(arg) => {
                // |kt+c| -> (kt+c)|kt+c| / (2k)
                let (k, _) = arg.as_affine()?;
                if k == 0.0 {
                    return None;
                }
                Some(Expr::Div(
                    Box::new(Expr::Mul(arg.clone(), Box::new(Expr::Abs(arg.clone())))),
                    Box::new(Expr::Const(2.0 * k)),
                ))
            }
            _ => None,
        }
    }

    /// Limit classification along an infinite tail.
    pub fn limit(&self, dir: Dir) -> LimitClass {
        use LimitClass::*;
        match self {
            Expr::Const(c) => Finite(*c),
            Expr::Var => match dir {
                Dir::PlusInf => PlusInf,
                Dir::MinusInf => MinusInf,
            },
            Expr::Neg(e) => match e.limit(dir) {
                PlusInf => MinusInf,
                MinusInf => PlusInf,
                Finite(v) => Finite(-v),
                Unknown => Unknown,
            },
            Expr::Add(a, b) => match (a.limit(dir), b.limit(dir)) {
                (Finite(x), Finite(y)) => Finite(x + y),
                (PlusInf, PlusInf) | (PlusInf, Finite(_)) | (Finite(_), PlusInf) => PlusInf,
                (MinusInf, MinusInf) | (MinusInf, Finite(_)) | (Finite(_), MinusInf) => MinusInf,
                _ => Unknown,
            },
            Expr::Sub(a, b) => Expr::Add(a.clone(), Box::new(Expr::Neg(b.clone()))).limit(dir),
            Expr::Mul(a, b) => match (a.limit(dir), b.limit(dir)) {
                (Finite(x), Finite(y)) => Finite(x * y),
                (PlusInf, PlusInf) | (MinusInf, MinusInf) => PlusInf,
                (PlusInf, MinusInf) | (MinusInf, PlusInf) => MinusInf,
                (PlusInf, Finite(c)) | (Finite(c), PlusInf) => {
                    if c > 0.0 {
                        PlusInf
                    } else if c < 0.0 {
                        MinusInf
                    } else {
                        Unknown
                    }
                }
                (MinusInf, Finite(c)) | (Finite(c), MinusInf) => {
                    if c > 0.0 {
                        MinusInf
                    } else if c < 0.0 {
                        PlusInf
                    } else {
                        Unknown
                    }
                }
                _ => Unknown,
            },
            Expr::Div(a, b) => match (a.limit(dir), b.limit(dir)) {
                (Finite(x), Finite(y)) if y != 0.0 => Finite(x / y),
                (Finite(_), PlusInf) | (Finite(_), MinusInf) => Finite(0.0),
                (PlusInf, Finite(c)) if c > 0.0 => PlusInf,
                (PlusInf, Finite(c)) if c < 0.0 => MinusInf,
                (MinusInf, Finite(c)) if c > 0.0 => MinusInf,
                (MinusInf, Finite(c)) if c < 0.0 => PlusInf,
                _ => Unknown,
            },
            Expr::Pow(e, g) => match e.limit(dir) {
                PlusInf => {
                    if *g > 0.0 {
                        PlusInf
                    } else if *g < 0.0 {
                        Finite(0.0)
                    } else {
                        Finite(1.0)
                    }
                }
                Finite(v) => {
                    let r = v.powf(*g);
                    if r.is_finite() {
                        Finite(r)
                    } else {
                        Unknown
                    }
                }
                MinusInf => Unknown,
                Unknown => Unknown,
            },
            Expr::Abs(e) => match e.limit(dir) {
                PlusInf | MinusInf => PlusInf,
                Finite(v) => Finite(v.abs()),
                Unknown => Unknown,
            },
            Expr::Exp(e) => match e.limit(dir) {
                PlusInf => PlusInf,
                MinusInf => Finite(0.0),
                Finite(v) => Finite(v.exp()),
                Unknown => Unknown,
            },
            Expr::Ln(e) => match e.limit(dir) {
                PlusInf => PlusInf,
                Finite(v) if v > 0.0 => Finite(v.ln()),
                Finite(v) if v == 0.0 => MinusInf,
                _ => Unknown,
            },
            Expr::Min(a, b) => match (a.limit(dir), b.limit(dir)) {
                (Finite(x), Finite(y)) => Finite(x.min(y)),
                (MinusInf, _) | (_, MinusInf) => MinusInf,
                (PlusInf, o) | (o, PlusInf) => o,
                _ => Unknown,
            },
            Expr::Max(a, b) => match (a.limit(dir), b.limit(dir)) {
                (Finite(x), Finite(y)) => Finite(x.max(y)),
                (PlusInf, _) | (_, PlusInf) => PlusInf,
                (MinusInf, o) | (o, MinusInf) => o,
                _ => Unknown,
            },
        }
    }

    /// Symbolic upper bound on the tail growth of `|self|`.
    pub fn growth(&self, dir: Dir) -> GrowthClass {
        use GrowthClass::*;
        match self {
            Expr::Const(_) => Bounded,
            Expr::Var => Poly { deg: 1.0, log: false },
            Expr::Neg(e) | Expr::Abs(e) => e.growth(dir),
            Expr::Add(a, b) | Expr::Sub(a, b) => growth_join_max(a.growth(dir), b.growth(dir)),
            Expr::Mul(a, b) => match (a.growth(dir), b.growth(dir)) {
                (Unknown, _) | (_, Unknown) => Unknown,
                (ExpGrowth, _) | (_, ExpGrowth) => ExpGrowth,
                (Bounded, g) | (g, Bounded) => g,
                (Poly { deg: p, log: lp }, Poly { deg: q, log: lq }) => {
                    Poly { deg: p + q, log: lp || lq }
                }
            },
            Expr::Div(a, b) => {
                // Only divide by constants symbolically; a positive lower
                // bound for a general denominator is out of the rules' reach.
                if let Some(c) = b.as_const() {
                    if c != 0.0 {
                        a.growth(dir)
                    } else {
                        Unknown
                    }
                } else {
                    Unknown
                }
            }
            Expr::Pow(e, g) => match e.growth(dir) {
                Bounded => {
                    if *g >= 0.0 {
                        // guard against blow-up of x^{-g} near a zero
                        match e.limit(dir) {
                            LimitClass::Finite(_) => Bounded,
                            _ => Unknown,
                        }
                    } else {
                        Unknown
                    }
                }
                Poly { deg, log } => {
                    if *g >= 0.0 {
                        Poly { deg: deg * g, log }
                    } else {
                        // decaying power of a growing base stays bounded
                        match e.limit(dir) {
                            LimitClass::PlusInf => Bounded,
                            _ => Unknown,
                        }
                    }
                }
                ExpGrowth => {
                    if *g > 0.0 {
                        ExpGrowth
                    } else {
                        Unknown
                    }
                }
                Unknown => Unknown,
            },
            Expr::Exp(e) => match e.limit(dir) {
                LimitClass::MinusInf => Bounded,
                LimitClass::Finite(_) => Bounded,
                LimitClass::PlusInf => ExpGrowth,
                LimitClass::Unknown => Unknown,
            },
            Expr::Ln(e) => match e.limit(dir) {
                LimitClass::PlusInf => Poly { deg: 0.0, log: true },
                LimitClass::Finite(v) if v > 0.0 => Bounded,
                _ => Unknown,
            },
            Expr::Min(a, b) => growth_join_min(a.growth(dir), b.growth(dir)),
            Expr::Max(a, b) => growth_join_max(a.growth(dir), b.growth(dir)),
        }
    }
}

fn growth_rank(g: GrowthClass) -> (u8, f64, bool) {
    match g {
        GrowthClass::Bounded => (0, 0.0, false),
        GrowthClass::Poly { deg, log } => (1, deg, log),
        GrowthClass::ExpGrowth => (2, 0.0, false),
        GrowthClass::Unknown => (3, 0.0, false),
    }
}

fn growth_join_max(a: GrowthClass, b: GrowthClass) -> GrowthClass {
    use GrowthClass::*;
    if matches!(a, Unknown) || matches!(b, Unknown) {
        return Unknown;
    }
    let (ra, da, la) = growth_rank(a);
    let (rb, db, lb) = growth_rank(b);
    if ra != rb {
        return if ra > rb { a } else { b };
    }
    match a {
        Poly { .. } => {
            if (da - db).abs() < 1e-12 {
                Poly { deg: da.max(db), log: la || lb }
            } else if da > db {
                a
            } else {
                b
            }
        }
        other => other,
    }
}

fn growth_join_min(a: GrowthClass, b: GrowthClass) -> GrowthClass {
    use GrowthClass::*;
    // min(|a|,|b|) is not bounded by min of bounds in general (signs), but
    // it is bounded by either bound, so take the smaller conservative one.
    if matches!(a, Unknown) {
        return b;
    }
    if matches!(b, Unknown) {
        return a;
    }
    let (ra, ..) = growth_rank(a);
    let (rb, ..) = growth_rank(b);
    if ra != rb {
        if ra < rb {
            a
        } else {
            b
        }
    } else {
        match (a, b) {
            (Poly { deg: da, log: la }, Poly { deg: db, log: lb }) => {
                if da < db || (da == db && !la && lb) {
                    Poly { deg: da, log: la }
                } else {
                    Poly { deg: db, log: lb }
                }
            }
            _ => a,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(e, g) => write!(f, "({e}^{g})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
            Expr::Ln(e) => write!(f, "ln({e})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn parse(mut self) -> Result<Expr> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.err("trailing input"));
        }
        Ok(e)
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: format!("{msg} in {:?}", self.src) }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // exponent must fold to a constant
            let exp = self.unary()?;
            let g = exp
                .as_const()
                .ok_or_else(|| self.err("exponent must be a constant"))?;
            Ok(Expr::Pow(Box::new(base), g))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .bytes
                    .get(self.pos + 1)
                    .is_some_and(|&n| n.is_ascii_digit() || n == b'+' || n == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.err("bad number"))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "t" | "x" => Ok(Expr::Var),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            "sqrt" => Ok(Expr::Pow(Box::new(self.paren_arg()?), 0.5)),
            "abs" => Ok(Expr::Abs(Box::new(self.paren_arg()?))),
            "exp" => Ok(Expr::Exp(Box::new(self.paren_arg()?))),
            "ln" | "log" => Ok(Expr::Ln(Box::new(self.paren_arg()?))),
            "min" => {
                let (a, b) = self.paren_args2()?;
                Ok(Expr::Min(Box::new(a), Box::new(b)))
            }
            "max" => {
                let (a, b) = self.paren_args2()?;
                Ok(Expr::Max(Box::new(a), Box::new(b)))
            }
            _ => Err(self.err("unknown identifier")),
        }
    }

    fn paren_arg(&mut self) -> Result<Expr> {
        if self.peek() != Some(b'(') {
            return Err(self.err("expected '('"));
        }
        self.pos += 1;
        let e = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(self.err("expected ')'"));
        }
        self.pos += 1;
        Ok(e)
    }

    fn paren_args2(&mut self) -> Result<(Expr, Expr)> {
        if self.peek() != Some(b'(') {
            return Err(self.err("expected '('"));
        }
        self.pos += 1;
        let a = self.expr()?;
        if self.peek() != Some(b',') {
            return Err(self.err("expected ','"));
        }
        self.pos += 1;
        let b = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(self.err("expected ')'"));
        }
        self.pos += 1;
        Ok((a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        let e = Expr::parse("t^2 + 3*t - 1").unwrap();
        assert_eq!(e.eval(2.0), 9.0);
        let e = Expr::parse("sqrt(t)").unwrap();
        assert_eq!(e.eval(4.0), 2.0);
        let e = Expr::parse("min(exp(t), 2)").unwrap();
        assert_eq!(e.eval(0.0), 1.0);
        assert_eq!(e.eval(10.0), 2.0);
        let e = Expr::parse("t^(3/2)").unwrap();
        assert!((e.eval(4.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Expr::parse("t +").is_err());
        assert!(Expr::parse("foo(t)").is_err());
        assert!(Expr::parse("t^t").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn display_round_trip() {
        for src in ["t^2", "sqrt(t)", "exp(-t) + min(t, 1)", "abs(t - 3) / 2"] {
            let e = Expr::parse(src).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            for i in 0..50 {
                let t = -2.0 + 0.1 * i as f64;
                let (a, b) = (e.eval(t), back.eval(t));
                if a.is_nan() && b.is_nan() {
                    continue; // outside the domain on both sides
                }
                assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()), "{src} at {t}");
            }
        }
    }

    #[test]
    fn antiderivatives() {
        // t^2 -> t^3/3
        let a = Expr::parse("t^2").unwrap().antiderivative().unwrap();
        assert!((a.eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        // sqrt(t) -> 2/3 t^{3/2}
        let a = Expr::parse("sqrt(t)").unwrap().antiderivative().unwrap();
        assert!((a.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        // exp(t)
        let a = Expr::parse("exp(t)").unwrap().antiderivative().unwrap();
        assert!((a.eval(1.0) - a.eval(0.0) - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        // ln(t) -> t ln t - t
        let a = Expr::parse("ln(t)").unwrap().antiderivative().unwrap();
        assert!((a.eval(std::f64::consts::E) - a.eval(1.0) - 1.0).abs() < 1e-14);
        // min has no closed form in the rule set
        assert!(Expr::parse("min(t, 1)").unwrap().antiderivative().is_none());
    }

    #[test]
    fn derivative_matches_fd() {
        let exprs = ["t^3 - 2*t", "exp(2*t)", "ln(t + 3)", "abs(t) * t", "sqrt(t + 5)"];
        for src in exprs {
            let e = Expr::parse(src).unwrap();
            for i in 1..20 {
                let t = 0.3 * i as f64;
                let h = 1e-6;
                let fd = (e.eval(t + h) - e.eval(t - h)) / (2.0 * h);
                assert!(
                    (e.deriv(t) - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                    "{src} at {t}: {} vs {}",
                    e.deriv(t),
                    fd
                );
            }
        }
    }

    #[test]
    fn growth_classification() {
        let g = Expr::parse("t^2").unwrap().growth(Dir::PlusInf);
        assert_eq!(g, GrowthClass::Poly { deg: 2.0, log: false });
        let g = Expr::parse("exp(t)").unwrap().growth(Dir::PlusInf);
        assert_eq!(g, GrowthClass::ExpGrowth);
        let g = Expr::parse("exp(t)").unwrap().growth(Dir::MinusInf);
        assert_eq!(g, GrowthClass::Bounded);
        let g = Expr::parse("ln(t)").unwrap().growth(Dir::PlusInf);
        assert_eq!(g, GrowthClass::Poly { deg: 0.0, log: true });
        let g = Expr::parse("sqrt(t)").unwrap().growth(Dir::PlusInf);
        assert_eq!(g, GrowthClass::Poly { deg: 0.5, log: false });
    }

    #[test]
    fn limits() {
        assert_eq!(Expr::parse("exp(-t)").unwrap().limit(Dir::PlusInf), LimitClass::Finite(0.0));
        assert_eq!(Expr::parse("exp(t)").unwrap().limit(Dir::MinusInf), LimitClass::Finite(0.0));
        assert_eq!(Expr::parse("t^2 + 1").unwrap().limit(Dir::MinusInf), LimitClass::Unknown);
        assert_eq!(Expr::parse("ln(t)").unwrap().limit(Dir::PlusInf), LimitClass::PlusInf);
    }
}
