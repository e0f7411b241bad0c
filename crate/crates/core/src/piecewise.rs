//! Piecewise closed-form scalar functions with breakpoint metadata.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad;

/// Relative tolerance for the quadrature fallback of piece integrals.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// A scalar function given by closed-form expressions on the open
/// subintervals between strictly increasing breakpoints. Evaluation at a
/// breakpoint uses the declared point value when present, otherwise the
/// right-hand piece (matching the `t >= b` convention of piecewise case
/// definitions).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseScalar {
    breakpoints: Vec<f64>,
    pieces: Vec<Expr>,
    point_values: BTreeMap<usize, f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<f64>,
    pieces: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    point_values: BTreeMap<String, f64>,
}

impl Serialize for PiecewiseScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawPiecewise {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|e| e.to_string()).collect(),
            point_values: self
                .point_values
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseScalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPiecewise::deserialize(d)?;
        let pieces: Vec<Expr> = raw
            .pieces
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<_>>()
            .map_err(serde::de::Error::custom)?;
        let point_values = raw
            .point_values
            .iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|i| (i, *v))
                    .map_err(|_| serde::de::Error::custom(format!("bad point_values key {k:?}")))
            })
            .collect::<std::result::Result<_, D::Error>>()?;
        PiecewiseScalar::with_point_values(raw.breakpoints, pieces, point_values)
            .map_err(serde::de::Error::custom)
    }
}

impl PiecewiseScalar {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Expr>) -> Result<Self> {
        Self::with_point_values(breakpoints, pieces, BTreeMap::new())
    }

    pub fn with_point_values(
        breakpoints: Vec<f64>,
        pieces: Vec<Expr>,
        point_values: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::Piecewise(format!(
                "{} breakpoints require {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Piecewise("breakpoints must be strictly increasing".into()));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Piecewise("breakpoints must be finite".into()));
        }
        if let Some((&k, _)) = point_values.iter().find(|(&k, _)| k >= breakpoints.len()) {
            return Err(Error::Piecewise(format!("point value index {k} out of range")));
        }
        Ok(PiecewiseScalar { breakpoints, pieces, point_values })
    }

    pub fn constant(c: f64) -> Self {
        PiecewiseScalar {
            breakpoints: vec![],
            pieces: vec![Expr::Const(c)],
            point_values: BTreeMap::new(),
        }
    }

    pub fn from_expr(e: Expr) -> Self {
        PiecewiseScalar { breakpoints: vec![], pieces: vec![e], point_values: BTreeMap::new() }
    }

    pub fn parse_single(src: &str) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse(src)?))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Expr] {
        &self.pieces
    }

    pub fn point_values(&self) -> &BTreeMap<usize, f64> {
        &self.point_values
    }

    /// Index of the piece whose open interval contains `t`; at a breakpoint
    /// the right piece is returned.
    fn piece_index(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if let Ok(i) = self.breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            if let Some(&v) = self.point_values.get(&i) {
                return v;
            }
        }
        self.pieces[self.piece_index(t)].eval(t)
    }

    /// Branch-wise derivative (the right piece at breakpoints).
    pub fn deriv(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].deriv(t)
    }

    fn one_sided(&self, piece: usize, at: f64) -> Result<f64> {
        let e = &self.pieces[piece];
        let v = e.eval(at);
        if v.is_finite() {
            return Ok(v);
        }
        // the piece may be undefined exactly at the endpoint; step inside
        let toward = if piece > 0 && piece - 1 < self.breakpoints.len() && self.breakpoints[piece - 1] == at
        {
            1.0
        } else {
            -1.0
        };
        let scale = at.abs().max(1.0);
        for k in [1e-9, 1e-10, 1e-11] {
            let v = e.eval(at + toward * k * scale);
            if v.is_finite() && v.abs() < 1e12 {
                return Ok(v);
            }
        }
        Err(Error::Eval { t: at, piece: e.to_string(), msg: "one-sided limit not finite".into() })
    }

    /// Limit from the left at breakpoint `i`.
    pub fn left_limit(&self, i: usize) -> Result<f64> {
        self.one_sided(i, self.breakpoints[i])
    }

    /// Limit from the right at breakpoint `i`.
    pub fn right_limit(&self, i: usize) -> Result<f64> {
        self.one_sided(i + 1, self.breakpoints[i])
    }

    /// The value used at breakpoint `i` (declared, or the right limit).
    pub fn breakpoint_value(&self, i: usize) -> Result<f64> {
        if let Some(&v) = self.point_values.get(&i) {
            Ok(v)
        } else {
            self.right_limit(i)
        }
    }

    /// Piece segments clipped to `[lo, hi]` (either may be infinite):
    /// `(left, right, piece_index)` with `left < right`.
    pub fn segments(&self, lo: f64, hi: f64) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::new();
        let n = self.breakpoints.len();
        for i in 0..=n {
            let l = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
            let r = if i == n { f64::INFINITY } else { self.breakpoints[i] };
            let (a, b) = (l.max(lo), r.min(hi));
            if a < b {
                out.push((a, b, i));
            }
        }
        out
    }

    /// Definite integral over `[t0, t1]` (signed), closed-form per piece
    /// where the grammar permits, Gauss-Kronrod fallback otherwise.
    pub fn integrate(&self, t0: f64, t1: f64) -> Result<f64> {
        if t0 == t1 {
            return Ok(0.0);
        }
        let (a, b, sign) = if t0 <= t1 { (t0, t1, 1.0) } else { (t1, t0, -1.0) };
        let mut total = 0.0;
        for (l, r, i) in self.segments(a, b) {
            let e = &self.pieces[i];
            let v = match e.antiderivative() {
                Some(anti) => {
                    let v = anti.eval(r) - anti.eval(l);
                    if !v.is_finite() {
                        return Err(Error::Eval {
                            t: l,
                            piece: e.to_string(),
                            msg: "antiderivative not finite".into(),
                        });
                    }
                    v
                }
                None => quad::integrate(|t| e.eval(t), l, r, QUAD_REL_TOL),
            };
            total += v;
        }
        Ok(sign * total)
    }

    /// Essential extremum over the bounded window `[lo, hi]`: one-sided
    /// limits at piece edges count, isolated declared point values do not
    /// (they carry zero measure). Dense sampling per piece plus
    /// golden-section refinement to ~1e-12.
    pub fn extremum_on(&self, lo: f64, hi: f64, minimize: bool) -> Result<f64> {
        assert!(lo.is_finite() && hi.is_finite() && lo <= hi);
        let sgn = if minimize { 1.0 } else { -1.0 };
        let mut best = f64::INFINITY;
        for (l, r, i) in self.segments(lo, hi) {
            let e = &self.pieces[i];
            // edge limits
            for edge in [l, r] {
                let v = self.one_sided(i, edge)?;
                best = best.min(sgn * v);
            }
            let n = 512;
            let mut best_j = 0;
            let mut best_seg = f64::INFINITY;
            for j in 0..=n {
                let t = l + (r - l) * j as f64 / n as f64;
                let v = sgn * e.eval(t);
                if v < best_seg {
                    best_seg = v;
                    best_j = j;
                }
            }
            best = best.min(best_seg);
            // golden-section refinement around the best sample
            let h = (r - l) / n as f64;
            let (mut x0, mut x1) = (
                (l + (best_j as f64 - 1.0) * h).max(l),
                (l + (best_j as f64 + 1.0) * h).min(r),
            );
            let inv_phi = 0.618_033_988_749_894_9;
            let mut xa = x1 - inv_phi * (x1 - x0);
            let mut xb = x0 + inv_phi * (x1 - x0);
            let (mut fa, mut fb) = (sgn * e.eval(xa), sgn * e.eval(xb));
            while x1 - x0 > 1e-13 * (1.0 + x0.abs()) {
                if fa <= fb {
                    x1 = xb;
                    xb = xa;
                    fb = fa;
                    xa = x1 - inv_phi * (x1 - x0);
                    fa = sgn * e.eval(xa);
                } else {
                    x0 = xa;
                    xa = xb;
                    fa = fb;
                    xb = x0 + inv_phi * (x1 - x0);
                    fb = sgn * e.eval(xb);
                }
            }
            best = best.min(fa.min(fb));
        }
        if !best.is_finite() {
            return Err(Error::Eval {
                t: lo,
                piece: format!("extremum over [{lo}, {hi}]"),
                msg: "non-finite values in window".into(),
            });
        }
        Ok(sgn * best)
    }

    /// Combine two piecewise functions over the union of their breakpoints.
    pub fn merge(
        a: &PiecewiseScalar,
        b: &PiecewiseScalar,
        expr_comb: impl Fn(&Expr, &Expr) -> Expr,
        val_comb: impl Fn(f64, f64) -> f64,
    ) -> PiecewiseScalar {
        let mut bps: Vec<f64> = a.breakpoints.iter().chain(b.breakpoints.iter()).copied().collect();
        bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
        bps.dedup();
        let mut pieces = Vec::with_capacity(bps.len() + 1);
        for i in 0..=bps.len() {
            // any interior point of the subinterval selects the right pieces
            let probe = if bps.is_empty() {
                0.0
            } else if i == 0 {
                bps[0] - 1.0
            } else if i == bps.len() {
                bps[i - 1] + 1.0
            } else {
                0.5 * (bps[i - 1] + bps[i])
            };
            let pa = &a.pieces[a.piece_index(probe)];
            let pb = &b.pieces[b.piece_index(probe)];
            pieces.push(expr_comb(pa, pb));
        }
        let mut point_values = BTreeMap::new();
        for (i, &bp) in bps.iter().enumerate() {
            let a_has = a.breakpoints.binary_search_by(|x| x.partial_cmp(&bp).unwrap()).is_ok();
            let b_has = b.breakpoints.binary_search_by(|x| x.partial_cmp(&bp).unwrap()).is_ok();
            let a_declared = a_has
                && a.point_values.contains_key(
                    &a.breakpoints.binary_search_by(|x| x.partial_cmp(&bp).unwrap()).unwrap(),
                );
            let b_declared = b_has
                && b.point_values.contains_key(
                    &b.breakpoints.binary_search_by(|x| x.partial_cmp(&bp).unwrap()).unwrap(),
                );
            if a_declared || b_declared {
                point_values.insert(i, val_comb(a.eval(bp), b.eval(bp)));
            }
        }
        PiecewiseScalar { breakpoints: bps, pieces, point_values }
    }

    /// Stitch `neg` (used for t < 0) and `pos` (used for t >= 0).
    pub fn splice_at_zero(neg: &PiecewiseScalar, pos: &PiecewiseScalar) -> PiecewiseScalar {
        let mut bps = Vec::new();
        let mut pieces = Vec::new();
        let mut point_values = BTreeMap::new();
        for (l, r, i) in neg.segments(f64::NEG_INFINITY, 0.0) {
            if l > f64::NEG_INFINITY {
                bps.push(l);
                if let Some(v) = neg
                    .breakpoints
                    .binary_search_by(|x| x.partial_cmp(&l).unwrap())
                    .ok()
                    .and_then(|j| neg.point_values.get(&j))
                {
                    point_values.insert(bps.len() - 1, *v);
                }
            }
            let _ = r;
            pieces.push(neg.pieces[i].clone());
        }
        bps.push(0.0);
        // value at 0 follows the t >= 0 branch
        point_values.insert(bps.len() - 1, pos.eval(0.0));
        for (l, _r, i) in pos.segments(0.0, f64::INFINITY) {
            if l > 0.0 {
                bps.push(l);
                if let Some(v) = pos
                    .breakpoints
                    .binary_search_by(|x| x.partial_cmp(&l).unwrap())
                    .ok()
                    .and_then(|j| pos.point_values.get(&j))
                {
                    point_values.insert(bps.len() - 1, *v);
                }
            }
            pieces.push(pos.pieces[i].clone());
        }
        PiecewiseScalar { breakpoints: bps, pieces, point_values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1_lo() -> PiecewiseScalar {
        PiecewiseScalar::new(
            vec![0.0, 1.0],
            vec![
                Expr::parse("0").unwrap(),
                Expr::parse("t^2").unwrap(),
                Expr::parse("sqrt(t)").unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn eval_breakpoint_convention() {
        let f = ex1_lo();
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(0.5), 0.25);
        assert_eq!(f.eval(4.0), 2.0);
        // at t = 1 the right piece applies: sqrt(1) = 1
        assert_eq!(f.eval(1.0), 1.0);
        // declared point value wins
        let mut pv = BTreeMap::new();
        pv.insert(1usize, 7.0);
        let g = PiecewiseScalar::with_point_values(
            f.breakpoints.clone(),
            f.pieces.clone(),
            pv,
        )
        .unwrap();
        assert_eq!(g.eval(1.0), 7.0);
        assert_eq!(g.eval(1.0 + 1e-12), (1.0f64 + 1e-12).sqrt());
    }

    #[test]
    fn invalid_definitions_rejected() {
        assert!(PiecewiseScalar::new(vec![1.0, 0.0], vec![Expr::Var, Expr::Var, Expr::Var]).is_err());
        assert!(PiecewiseScalar::new(vec![0.0], vec![Expr::Var]).is_err());
    }

    #[test]
    fn one_sided_limits() {
        let f = ex1_lo();
        assert_eq!(f.left_limit(1).unwrap(), 1.0); // t^2 at 1
        assert_eq!(f.right_limit(1).unwrap(), 1.0); // sqrt at 1
        assert_eq!(f.left_limit(0).unwrap(), 0.0);
        assert_eq!(f.right_limit(0).unwrap(), 0.0);
    }

    #[test]
    fn integrate_closed_form() {
        let f = ex1_lo();
        // J_min(1) = int_0^1 t^2 = 1/3
        assert!((f.integrate(0.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        // crossing two breakpoints: int_{-1}^{4} = 0 + 1/3 + 2/3 (4^{3/2}-1)
        let expect = 1.0 / 3.0 + 2.0 / 3.0 * (8.0 - 1.0);
        assert!((f.integrate(-1.0, 4.0).unwrap() - expect).abs() < 1e-12);
        // orientation
        assert!((f.integrate(1.0, 0.0).unwrap() + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_quadrature_fallback() {
        let f = PiecewiseScalar::parse_single("min(t, 1)").unwrap();
        // int_0^2 min(t,1) = 1/2 + 1 = 3/2
        assert!((f.integrate(0.0, 2.0).unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn extremum() {
        let f = PiecewiseScalar::parse_single("(t - 1)^2 + 2").unwrap();
        assert!((f.extremum_on(0.0, 3.0, true).unwrap() - 2.0).abs() < 1e-11);
        assert!((f.extremum_on(0.0, 3.0, false).unwrap() - 6.0).abs() < 1e-11);
        // essential extremum ignores isolated declared point values
        let mut pv = BTreeMap::new();
        pv.insert(0usize, -5.0);
        let g = PiecewiseScalar::with_point_values(
            vec![1.0],
            vec![Expr::Const(0.0), Expr::Const(0.0)],
            pv,
        )
        .unwrap();
        assert_eq!(g.extremum_on(0.0, 2.0, true).unwrap(), 0.0);
    }

    #[test]
    fn merge_mid() {
        let lo = ex1_lo();
        let hi = PiecewiseScalar::new(
            vec![0.0, 1.0],
            vec![
                Expr::parse("0").unwrap(),
                Expr::parse("sqrt(t)").unwrap(),
                Expr::parse("t^2").unwrap(),
            ],
        )
        .unwrap();
        let mid = PiecewiseScalar::merge(
            &lo,
            &hi,
            |a, b| {
                Expr::Mul(
                    Box::new(Expr::Const(0.5)),
                    Box::new(Expr::Add(Box::new(a.clone()), Box::new(b.clone()))),
                )
            },
            |a, b| 0.5 * (a + b),
        );
        assert!((mid.eval(0.25) - 0.5 * (0.0625 + 0.5)).abs() < 1e-15);
        assert!((mid.integrate(0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let f = ex1_lo();
        let s = serde_json::to_string(&f).unwrap();
        let g: PiecewiseScalar = serde_json::from_str(&s).unwrap();
        for i in 0..100 {
            let t = -1.0 + 0.05 * i as f64;
            assert!((f.eval(t) - g.eval(t)).abs() < 1e-14);
        }
    }
}
