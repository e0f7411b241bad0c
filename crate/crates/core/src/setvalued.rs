//! Interval-valued reaction maps, their selections, potentials, and the
//! convexified envelope of a discontinuous single-valued nonlinearity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::piecewise::PiecewiseScalar;
use crate::quad;

/// Grid density per bounded window for sampled checks. Pieces are
/// continuous inside subintervals by the grammar, so only breakpoints can
/// actually fail; the grid guards against malformed custom input.
const CHECK_GRID: usize = 10_000;

const LIMIT_TOL: f64 = 1e-10;

/// Default refinement ladder for the envelope's essential limits.
pub const DELTA_SCHEDULE: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// The set-valued reaction `F(t) = [lo(t), hi(t)]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IntervalMap {
    lo: PiecewiseScalar,
    hi: PiecewiseScalar,
}

/// Catalog of measurable selections of an `IntervalMap`.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionKind {
    Min,
    Max,
    Mid,
    /// `max F` for t < 0, `min F` for t >= 0.
    SignSwitch,
    Custom(PiecewiseScalar),
}

/// Per-breakpoint semicontinuity verdicts for an `IntervalMap`.
#[derive(Debug, Clone, Serialize)]
pub struct SemicontinuityReport {
    pub breakpoints: Vec<BreakpointCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakpointCheck {
    pub t: f64,
    pub lo_lsc: bool,
    pub hi_usc: bool,
    pub lo_value: f64,
    pub lo_limits: (f64, f64),
    pub hi_value: f64,
    pub hi_limits: (f64, f64),
}

/// A resolved selection together with its potential `J(t) = ∫₀ᵗ f`.
#[derive(Debug, Clone)]
pub struct PotentialEval {
    f: PiecewiseScalar,
    /// Cached antiderivative per piece, `None` where quadrature is used.
    anti: Vec<Option<Expr>>,
    /// Cumulative integral from 0 to each breakpoint.
    cum: Vec<f64>,
}

impl IntervalMap {
    /// Build and validate `lo <= hi` on a dense grid plus all breakpoints
    /// and one-sided limits.
    pub fn new(lo: PiecewiseScalar, hi: PiecewiseScalar) -> Result<Self> {
        let m = IntervalMap { lo, hi };
        m.validate_order()?;
        Ok(m)
    }

    pub fn single_valued(f: PiecewiseScalar) -> Result<Self> {
        Self::new(f.clone(), f)
    }

    pub fn lo(&self) -> &PiecewiseScalar {
        &self.lo
    }

    pub fn hi(&self) -> &PiecewiseScalar {
        &self.hi
    }

    /// Compact value set at `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.lo.eval(t), self.hi.eval(t))
    }

    /// Hull of both functions' breakpoints, padded by one unit; used as the
    /// default window for sampled checks.
    pub fn check_window(&self) -> (f64, f64) {
        let mut lo = -1.0f64;
        let mut hi = 1.0f64;
        for b in self.lo.breakpoints().iter().chain(self.hi.breakpoints()) {
            lo = lo.min(b - 1.0);
            hi = hi.max(b + 1.0);
        }
        (lo, hi)
    }

    fn validate_order(&self) -> Result<()> {
        let (wl, wh) = self.check_window();
        for i in 0..=CHECK_GRID {
            let t = wl + (wh - wl) * i as f64 / CHECK_GRID as f64;
            let (l, h) = self.at(t);
            if !(l.is_finite() && h.is_finite()) {
                return Err(Error::Piecewise(format!("non-finite interval value at t = {t}")));
            }
            if l > h + LIMIT_TOL * (1.0 + h.abs()) {
                return Err(Error::Piecewise(format!("lo({t}) = {l} exceeds hi({t}) = {h}")));
            }
        }
        for side in [&self.lo, &self.hi] {
            for i in 0..side.breakpoints().len() {
                side.left_limit(i)?;
                side.right_limit(i)?;
            }
        }
        Ok(())
    }
}

/// Check that `min F` is l.s.c. and `max F` is u.s.c. at every breakpoint,
/// via one-sided limits against the breakpoint value.
pub fn check_usc(f: &IntervalMap) -> Result<SemicontinuityReport> {
    let mut bps: Vec<f64> = f
        .lo
        .breakpoints()
        .iter()
        .chain(f.hi.breakpoints())
        .copied()
        .collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();

    let mut checks = Vec::new();
    let mut pass = true;
    for &t in &bps {
        let lims = |g: &PiecewiseScalar| -> Result<(f64, f64, f64)> {
            match g.breakpoints().binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                Ok(i) => Ok((g.left_limit(i)?, g.right_limit(i)?, g.eval(t))),
                Err(_) => {
                    let v = g.eval(t);
                    Ok((v, v, v))
                }
            }
        };
        let (ll, lr, lv) = lims(&f.lo)?;
        let (hl, hr, hv) = lims(&f.hi)?;
        let tol = |v: f64| LIMIT_TOL * (1.0 + v.abs());
        let lo_lsc = lv <= ll.min(lr) + tol(lv);
        let hi_usc = hv >= hl.max(hr) - tol(hv);
        pass &= lo_lsc && hi_usc;
        checks.push(BreakpointCheck {
            t,
            lo_lsc,
            hi_usc,
            lo_value: lv,
            lo_limits: (ll, lr),
            hi_value: hv,
            hi_limits: (hl, hr),
        });
    }
    Ok(SemicontinuityReport { breakpoints: checks, pass })
}

impl PotentialEval {
    /// Potential of a single-valued function, bypassing any interval map.
    pub fn from_scalar(f: PiecewiseScalar) -> Result<Self> {
        Self::build(f)
    }

    fn build(f: PiecewiseScalar) -> Result<Self> {
        let anti: Vec<Option<Expr>> = f.pieces().iter().map(|e| e.antiderivative()).collect();
        // cumulative integrals from 0 to each breakpoint
        let mut cum = Vec::with_capacity(f.breakpoints().len());
        for &b in f.breakpoints() {
            cum.push(f.integrate(0.0, b)?);
        }
        Ok(PotentialEval { f, anti, cum })
    }

    pub fn f(&self) -> &PiecewiseScalar {
        &self.f
    }

    pub fn f_eval(&self, t: f64) -> f64 {
        self.f.eval(t)
    }

    pub fn f_deriv(&self, t: f64) -> f64 {
        self.f.deriv(t)
    }

    /// One-sided jump `f(t⁻) - f(t⁺)` of the selection at a discontinuity
    /// level; zero away from breakpoints or when a limit fails.
    pub fn f_jump(&self, t: f64) -> f64 {
        match self.f.breakpoints().iter().position(|&b| b == t) {
            Some(i) => match (self.f.left_limit(i), self.f.right_limit(i)) {
                (Ok(l), Ok(r)) if l.is_finite() && r.is_finite() => l - r,
                _ => 0.0,
            },
            None => 0.0,
        }
    }

    /// `J(t) = ∫₀ᵗ f(τ) dτ`.
    pub fn j(&self, t: f64) -> f64 {
        let bps = self.f.breakpoints();
        // nearest cached anchor between 0 and t
        let (anchor, base) = if t >= 0.0 {
            match bps.iter().rposition(|&b| b <= t && b >= 0.0) {
                Some(i) => (bps[i], self.cum[i]),
                None => (0.0, 0.0),
            }
        } else {
            match bps.iter().position(|&b| b >= t && b <= 0.0) {
                Some(i) => (bps[i], self.cum[i]),
                None => (0.0, 0.0),
            }
        };
        let idx = self.piece_between(anchor, t);
        let seg = match &self.anti[idx] {
            Some(a) => a.eval(t) - a.eval(anchor),
            None => {
                let e = &self.f.pieces()[idx];
                if t >= anchor {
                    quad::integrate(|x| e.eval(x), anchor, t, crate::piecewise::QUAD_REL_TOL)
                } else {
                    -quad::integrate(|x| e.eval(x), t, anchor, crate::piecewise::QUAD_REL_TOL)
                }
            }
        };
        base + seg
    }

    fn piece_between(&self, a: f64, b: f64) -> usize {
        let mid = 0.5 * (a + b);
        let bps = self.f.breakpoints();
        bps.partition_point(|&x| x <= mid)
    }
}

/// Resolve a selection of `F` into a single-valued `f` with its potential.
///
/// `SignSwitch` is additionally checked against the Aumann bounds: its
/// potential realizes the minimum of the set-valued integral.
pub fn resolve_selection(f: &IntervalMap, kind: &SelectionKind) -> Result<PotentialEval> {
    let report = check_usc(f)?;
    if !report.pass {
        return Err(Error::Semicontinuity(
            "interval map fails l.s.c./u.s.c. requirements".into(),
        ));
    }
    let selected = match kind {
        SelectionKind::Min => f.lo.clone(),
        SelectionKind::Max => f.hi.clone(),
        SelectionKind::Mid => PiecewiseScalar::merge(
            &f.lo,
            &f.hi,
            |a, b| {
                Expr::Mul(
                    Box::new(Expr::Const(0.5)),
                    Box::new(Expr::Add(Box::new(a.clone()), Box::new(b.clone()))),
                )
            },
            |a, b| 0.5 * (a + b),
        ),
        SelectionKind::SignSwitch => PiecewiseScalar::splice_at_zero(&f.hi, &f.lo),
        SelectionKind::Custom(g) => g.clone(),
    };
    // sandwich check lo <= f <= hi at breakpoints and a dense grid
    let (wl, wh) = f.check_window();
    let mut probes: Vec<f64> = (0..=CHECK_GRID)
        .map(|i| wl + (wh - wl) * i as f64 / CHECK_GRID as f64)
        .collect();
    probes.extend_from_slice(selected.breakpoints());
    for t in probes {
        let (l, h) = f.at(t);
        let v = selected.eval(t);
        let tol = LIMIT_TOL * (1.0 + v.abs());
        if v < l - tol || v > h + tol {
            return Err(Error::SelectionBounds { t, f: v, lo: l, hi: h });
        }
    }
    let pe = PotentialEval::build(selected)?;
    if matches!(kind, SelectionKind::SignSwitch) {
        // J_{f4}(t) must be the minimum of the Aumann integral
        for i in -8..=8 {
            let t = 0.5 * i as f64;
            let (amin, _) = aumann_bounds(f, t)?;
            if (pe.j(t) - amin).abs() > 1e-8 * (1.0 + amin.abs()) {
                return Err(Error::Internal(format!(
                    "sign-switch potential J({t}) = {} misses the Aumann minimum {amin}",
                    pe.j(t)
                )));
            }
        }
    }
    Ok(pe)
}

/// Endpoints of the Aumann integral `∫₀ᵗ F`: every measurable selection's
/// potential lands in this interval. For t < 0 the orientation flips, so
/// the minimum is realized by `max F` and vice versa.
pub fn aumann_bounds(f: &IntervalMap, t: f64) -> Result<(f64, f64)> {
    let a = f.lo.integrate(0.0, t)?;
    let b = f.hi.integrate(0.0, t)?;
    Ok(if a <= b { (a, b) } else { (b, a) })
}

/// Convexified envelope `[g̲, ḡ]` of an a.e. continuous `g`, per essential
/// one-sided limits. At continuity points lo = g = hi; at each breakpoint
/// the declared values are the min/max of the two one-sided limits,
/// cross-checked against inf/sup over shrinking δ-windows from `schedule`
/// (convergence: two consecutive levels within 1e-8).
pub fn filippov_envelope(g: &PiecewiseScalar, schedule: &[f64]) -> Result<IntervalMap> {
    let mut lo_vals = std::collections::BTreeMap::new();
    let mut hi_vals = std::collections::BTreeMap::new();
    for i in 0..g.breakpoints().len() {
        let b = g.breakpoints()[i];
        let ll = g.left_limit(i)?;
        let rl = g.right_limit(i)?;
        let exact_lo = ll.min(rl);
        let exact_hi = ll.max(rl);
        // refinement ladder over the δ-windows, excluding the point itself
        let mut conv_lo = None;
        let mut conv_hi = None;
        let mut prev: Option<(f64, f64)> = None;
        for &delta in schedule {
            let inf = window_extremum(g, b, delta, true)?;
            let sup = window_extremum(g, b, delta, false)?;
            if let Some((pi, ps)) = prev {
                if (inf - pi).abs() <= 1e-8 && (sup - ps).abs() <= 1e-8 {
                    conv_lo = Some(inf);
                    conv_hi = Some(sup);
                    break;
                }
            }
            prev = Some((inf, sup));
        }
        let lo_v = conv_lo.unwrap_or(exact_lo);
        let hi_v = conv_hi.unwrap_or(exact_hi);
        // the ladder can only see values at or below the one-sided limits
        // near a breakpoint of a monotone piece; trust the exact limits but
        // keep any genuine interior dip the ladder found
        lo_vals.insert(i, lo_v.min(exact_lo));
        hi_vals.insert(i, hi_v.max(exact_hi));
    }
    let lo = PiecewiseScalar::with_point_values(
        g.breakpoints().to_vec(),
        g.pieces().to_vec(),
        lo_vals,
    )?;
    let hi = PiecewiseScalar::with_point_values(
        g.breakpoints().to_vec(),
        g.pieces().to_vec(),
        hi_vals,
    )?;
    IntervalMap::new(lo, hi)
}

fn window_extremum(g: &PiecewiseScalar, b: f64, delta: f64, minimize: bool) -> Result<f64> {
    // essential extremum ignores the single point at b, so take the two
    // one-sided closed windows whose endpoint values are one-sided limits
    let left = g.extremum_on(b - delta, b, minimize)?;
    let right = g.extremum_on(b, b + delta, minimize)?;
    // remove the influence of a declared point value at b
    let sided = |side: f64| side;
    Ok(if minimize {
        sided(left).min(sided(right))
    } else {
        sided(left).max(sided(right))
    })
}
