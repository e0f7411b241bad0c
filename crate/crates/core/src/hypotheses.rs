//! Hypothesis verification and the explicit multiplicity window.
//!
//! Checks the growth, positivity and ratio conditions on the reaction
//! term, computes the constants K and r, and derives the open interval of
//! parameters for which three critical points are guaranteed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Dir, GrowthClass};
use crate::piecewise::PiecewiseScalar;
use crate::quad;
use crate::setvalued::{resolve_selection, IntervalMap, PotentialEval, SelectionKind};

/// Margin for strict inequalities evaluated in floating point. The window
/// degenerates exactly at equality, so ties count as failures.
const STRICT_MARGIN: f64 = 1e-12;

/// Growth data `|f(t)| <= alpha (1 + |t|^{s-1})` with `s` subquadratic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthBound {
    pub alpha: f64,
    pub s: f64,
}

impl GrowthBound {
    pub fn new(alpha: f64, s: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Hypothesis(format!("alpha must be positive, got {alpha}")));
        }
        if !(s > 1.0 && s < 2.0) {
            return Err(Error::Hypothesis(format!("s must lie in (1, 2), got {s}")));
        }
        Ok(GrowthBound { alpha, s })
    }

    /// Conjugate exponent s/(s-1).
    pub fn s_conj(&self) -> f64 {
        self.s / (self.s - 1.0)
    }

    pub fn bound(&self, t: f64) -> f64 {
        self.alpha * (1.0 + t.abs().powf(self.s - 1.0))
    }
}

/// Essential bounds of the coefficients over `[a, b]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EssentialBounds {
    pub p0: f64,
    pub p_sup: f64,
    pub q_inf: f64,
    pub q_sup: f64,
}

/// Outcome of a sampled-plus-symbolic check. `Inconclusive` is distinct
/// from `Fail`: the rule set could not decide, nothing was violated.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { witness_t: f64 },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// All intermediate values of a hypothesis check.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub bounds: EssentialBounds,
    pub k: f64,
    pub growth: Verdict,
    /// H1: `J_f >= 0` on `[0, d]`; H2: `ess inf g > 0`.
    pub positivity: Verdict,
    /// `max_{|t|<=c} J_f(t)`.
    pub m_c: f64,
    pub jf_d: f64,
    /// `m_c / c^2` vs `K J_f(d) / d^2`, tested strictly.
    pub ratio_lhs: f64,
    pub ratio_rhs: f64,
    pub ratio_ok: bool,
    pub pass: bool,
}

/// The constants of the three-solution theorem and the parameter interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MultiplicityWindow {
    pub c: f64,
    pub d: f64,
    pub k: f64,
    /// Small-ball energy level `c^2 p0 / (2 (b - a))`.
    pub r: f64,
    pub lambda_lo: f64,
    /// `+inf` (serialized as null) when `m_c = 0`, by the `0^{-1} = inf`
    /// convention.
    pub lambda_hi: f64,
}

impl MultiplicityWindow {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda > self.lambda_lo && lambda < self.lambda_hi
    }
}

/// Profile of the wedge-shaped test function ū rising linearly to `d` over
/// the left half of the interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestFunctionProfile {
    pub d: f64,
    pub phi_bar: f64,
    pub psi_bar: f64,
    pub psi_bar_lower: f64,
    pub phi_lower: f64,
    pub phi_upper: f64,
}

/// Essential inf/sup of `p` and `q` over `[a, b]`; rejects non-elliptic
/// principal parts and sign-changing zero-order coefficients.
pub fn essential_bounds(
    p: &PiecewiseScalar,
    q: &PiecewiseScalar,
    a: f64,
    b: f64,
) -> Result<EssentialBounds> {
    let p0 = p.extremum_on(a, b, true)?;
    let p_sup = p.extremum_on(a, b, false)?;
    let q_inf = q.extremum_on(a, b, true)?;
    let q_sup = q.extremum_on(a, b, false)?;
    if p0 <= 0.0 {
        return Err(Error::Ellipticity(p0));
    }
    if q_inf < 0.0 {
        return Err(Error::SignCondition(q_inf));
    }
    Ok(EssentialBounds { p0, p_sup, q_inf, q_sup })
}

/// `K = 3 p0 (12 ||p||_inf + 4 (b-a)^2 ||q||_inf)^{-1}`; always <= 1/4.
pub fn compute_k(p0: f64, p_sup: f64, q_sup: f64, a: f64, b: f64) -> f64 {
    3.0 * p0 / (12.0 * p_sup + 4.0 * (b - a) * (b - a) * q_sup)
}

/// Verify `|f(t)| <= alpha (1 + |t|^{s-1})` on `[-window, window]` plus a
/// symbolic tail-dominance check on each unbounded piece.
pub fn check_growth(f: &PiecewiseScalar, gb: &GrowthBound, window: f64) -> Verdict {
    check_growth_inner(f, gb, window, true)
}

/// One-sided variant (`f(t) <= alpha (1 + |t|^{s-1})` without absolute
/// value on the left), as the discontinuous-ODE hypotheses state it.
pub fn check_growth_upper(f: &PiecewiseScalar, gb: &GrowthBound, window: f64) -> Verdict {
    check_growth_inner(f, gb, window, false)
}

fn check_growth_inner(f: &PiecewiseScalar, gb: &GrowthBound, window: f64, two_sided: bool) -> Verdict {
    let value = |t: f64| {
        let v = f.eval(t);
        if two_sided {
            v.abs()
        } else {
            v
        }
    };
    let tol = 1e-12;
    // dense grid over the window plus breakpoints
    let n = 10_000;
    let mut probes: Vec<f64> = (0..=n).map(|i| -window + 2.0 * window * i as f64 / n as f64).collect();
    probes.extend(f.breakpoints().iter().copied().filter(|b| b.abs() <= window));
    for t in probes {
        if value(t) > gb.bound(t) * (1.0 + tol) + tol {
            return Verdict::Fail { witness_t: t };
        }
    }
    // symbolic dominance on the two tails
    for dir in [Dir::MinusInf, Dir::PlusInf] {
        let piece = match dir {
            Dir::MinusInf => f.pieces().first(),
            Dir::PlusInf => f.pieces().last(),
        };
        let unbounded = match dir {
            Dir::MinusInf => f.breakpoints().first().copied().unwrap_or(f64::NEG_INFINITY) > -window,
            Dir::PlusInf => f.breakpoints().last().copied().unwrap_or(f64::INFINITY) < window,
        } || f.breakpoints().is_empty();
        if !unbounded {
            // the window grid already covered everything this tail reaches
        }
        let piece = match piece {
            Some(p) => p,
            None => continue,
        };
        let sgn = if dir == Dir::PlusInf { 1.0 } else { -1.0 };
        let tail_probe = |ok_margin: f64| -> Option<f64> {
            // geometric probes out to 1e9, witness on first violation
            let mut t = window.max(1.0);
            while t <= 1e9 {
                let v = if two_sided { piece.eval(sgn * t).abs() } else { piece.eval(sgn * t) };
                if v > gb.bound(sgn * t) * (1.0 + ok_margin) {
                    return Some(sgn * t);
                }
                t *= 1.5;
            }
            None
        };
        match piece.growth(dir) {
            GrowthClass::Bounded => {
                if let Some(w) = tail_probe(tol) {
                    return Verdict::Fail { witness_t: w };
                }
            }
            GrowthClass::Poly { deg, log } => {
                let target = gb.s - 1.0;
                if deg < target - 1e-12 {
                    if let Some(w) = tail_probe(tol) {
                        return Verdict::Fail { witness_t: w };
                    }
                } else if (deg - target).abs() <= 1e-12 && !log {
                    // equal degree: coefficient decided on the sampled tail
                    if let Some(w) = tail_probe(tol) {
                        return Verdict::Fail { witness_t: w };
                    }
                } else {
                    // degree too large (or an extra log factor): must fail
                    match tail_probe(0.0) {
                        Some(w) => return Verdict::Fail { witness_t: w },
                        None => {
                            return Verdict::Inconclusive {
                                reason: format!(
                                    "tail degree {deg} (log: {log}) exceeds s-1 = {target} but no sampled witness found"
                                ),
                            }
                        }
                    }
                }
            }
            GrowthClass::ExpGrowth => match tail_probe(0.0) {
                Some(w) => return Verdict::Fail { witness_t: w },
                None => {
                    return Verdict::Inconclusive {
                        reason: "exponential tail growth without a sampled witness".into(),
                    }
                }
            },
            GrowthClass::Unknown => {
                if let Some(w) = tail_probe(tol) {
                    return Verdict::Fail { witness_t: w };
                }
                return Verdict::Inconclusive {
                    reason: "tail dominance undecidable by the symbolic rules".into(),
                };
            }
        }
    }
    Verdict::Pass
}

/// Zeros of `f` inside `[lo, hi]` (stationary points of its potential),
/// located by sign changes on a fine grid plus bisection.
fn selection_zeros(f: &PiecewiseScalar, lo: f64, hi: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    for (l, r, _) in f.segments(lo, hi) {
        let n = 512;
        let mut prev_t = l;
        let mut prev_v = f.eval(l + 1e-15 * (1.0 + l.abs()));
        for j in 1..=n {
            let t = l + (r - l) * j as f64 / n as f64;
            let v = f.eval(t);
            if prev_v == 0.0 {
                zeros.push(prev_t);
            } else if prev_v * v < 0.0 {
                let (mut x0, mut x1, mut v0) = (prev_t, t, prev_v);
                for _ in 0..80 {
                    let xm = 0.5 * (x0 + x1);
                    let vm = f.eval(xm);
                    if v0 * vm <= 0.0 {
                        x1 = xm;
                    } else {
                        x0 = xm;
                        v0 = vm;
                    }
                }
                zeros.push(0.5 * (x0 + x1));
            }
            prev_t = t;
            prev_v = v;
        }
    }
    zeros
}

/// Extremum of the potential `J` over `[lo, hi]`: candidates are the
/// endpoints, the selection's breakpoints, the zeros of `f` (stationary
/// points of `J`), and a safety grid with golden refinement.
fn potential_extremum(pe: &PotentialEval, lo: f64, hi: f64, minimize: bool) -> f64 {
    let sgn = if minimize { 1.0 } else { -1.0 };
    let mut best = f64::INFINITY;
    let mut consider = |t: f64| {
        if t >= lo && t <= hi {
            best = best.min(sgn * pe.j(t));
        }
    };
    consider(lo);
    consider(hi);
    for &b in pe.f().breakpoints() {
        consider(b);
    }
    for z in selection_zeros(pe.f(), lo, hi) {
        consider(z);
    }
    // grid + golden refinement as a backstop
    let n = 2000;
    let mut best_j = 0;
    let mut best_v = f64::INFINITY;
    for j in 0..=n {
        let t = lo + (hi - lo) * j as f64 / n as f64;
        let v = sgn * pe.j(t);
        if v < best_v {
            best_v = v;
            best_j = j;
        }
    }
    best = best.min(best_v);
    let h = (hi - lo) / n as f64;
    let (mut x0, mut x1) = (
        (lo + (best_j as f64 - 1.0) * h).max(lo),
        (lo + (best_j as f64 + 1.0) * h).min(hi),
    );
    let inv_phi = 0.618_033_988_749_894_9;
    let mut xa = x1 - inv_phi * (x1 - x0);
    let mut xb = x0 + inv_phi * (x1 - x0);
    let (mut fa, mut fb) = (sgn * pe.j(xa), sgn * pe.j(xb));
    while x1 - x0 > 1e-13 * (1.0 + x0.abs()) {
        if fa <= fb {
            x1 = xb;
            xb = xa;
            fb = fa;
            xa = x1 - inv_phi * (x1 - x0);
            fa = sgn * pe.j(xa);
        } else {
            x0 = xa;
            xa = xb;
            fa = fb;
            xb = x0 + inv_phi * (x1 - x0);
            fb = sgn * pe.j(xb);
        }
    }
    best = best.min(fa.min(fb));
    sgn * best
}

#[allow(clippy::too_many_arguments)]
pub fn check_h1(
    fmap: &IntervalMap,
    kind: &SelectionKind,
    gb: &GrowthBound,
    c: f64,
    d: f64,
    p: &PiecewiseScalar,
    q: &PiecewiseScalar,
    a: f64,
    b: f64,
) -> Result<HypothesisReport> {
    if !(c > 0.0 && c < d) {
        return Err(Error::Hypothesis(format!("requires 0 < c < d, got c = {c}, d = {d}")));
    }
    let pe = resolve_selection(fmap, kind)?;
    let bounds = essential_bounds(p, q, a, b)?;
    let k = compute_k(bounds.p0, bounds.p_sup, bounds.q_sup, a, b);
    let growth = check_growth(pe.f(), gb, 2.0 * d.max(1.0));

    // H1(ii): J_f >= 0 on [0, d]
    let j_min = potential_extremum(&pe, 0.0, d, true);
    let positivity = if j_min >= -1e-12 {
        Verdict::Pass
    } else {
        // locate a witness on the grid
        let mut witness = 0.0;
        for i in 0..=2000 {
            let t = d * i as f64 / 2000.0;
            if pe.j(t) < -1e-12 {
                witness = t;
                break;
            }
        }
        Verdict::Fail { witness_t: witness }
    };

    // H1(iii)
    let m_c = potential_extremum(&pe, -c, c, false);
    let jf_d = pe.j(d);
    let ratio_lhs = m_c / (c * c);
    let ratio_rhs = k * jf_d / (d * d);
    let ratio_ok = ratio_lhs < ratio_rhs - STRICT_MARGIN * ratio_rhs.abs().max(1.0);

    let pass = growth.is_pass() && positivity.is_pass() && ratio_ok;
    Ok(HypothesisReport {
        a,
        b,
        c,
        d,
        bounds,
        k,
        growth,
        positivity,
        m_c,
        jf_d,
        ratio_lhs,
        ratio_rhs,
        ratio_ok,
        pass,
    })
}

/// The explicit parameter interval, from a passing hypothesis report.
pub fn compute_window(report: &HypothesisReport) -> Result<MultiplicityWindow> {
    if !report.pass {
        return Err(Error::Hypothesis("window requested for a failing hypothesis report".into()));
    }
    let (a, b, c, d) = (report.a, report.b, report.c, report.d);
    let p0 = report.bounds.p0;
    let len2 = (b - a) * (b - a);
    let lambda_lo = p0 * d * d / (2.0 * report.k * len2 * report.jf_d);
    let lambda_hi = if report.m_c <= 0.0 {
        f64::INFINITY
    } else {
        p0 * c * c / (2.0 * len2 * report.m_c)
    };
    Ok(MultiplicityWindow {
        c,
        d,
        k: report.k,
        r: c * c * p0 / (2.0 * (b - a)),
        lambda_lo,
        lambda_hi,
    })
}

/// Evaluate Phi and Psi at the wedge test function and verify the analytic
/// bounds and the window containment they imply.
pub fn profile_test_function(
    p: &PiecewiseScalar,
    q: &PiecewiseScalar,
    a: f64,
    b: f64,
    pe: &PotentialEval,
    w: &MultiplicityWindow,
) -> Result<TestFunctionProfile> {
    let d = w.d;
    let len = b - a;
    let mid = 0.5 * (a + b);
    let slope_sq = 2.0 * d * d / (len * len);

    // Phi(ū): gradient part + the two zero-order integrals
    let int_p = p.integrate(a, mid)?;
    let mut int_q_x2 = 0.0;
    for (l, r, i) in q.segments(a, mid) {
        let e = &q.pieces()[i];
        int_q_x2 += quad::integrate(|x| e.eval(x) * (x - a) * (x - a), l, r, 1e-12);
    }
    let int_q_right = q.integrate(mid, b)?;
    let phi_bar = slope_sq * int_p + slope_sq * int_q_x2 + 0.5 * d * d * int_q_right;

    // Psi(ū) = (b-a)/(2d) ∫₀^d J + (b-a)/2 J(d), by substitution on the ramp
    let mut int_j = 0.0;
    let mut cuts: Vec<f64> = vec![0.0, d];
    cuts.extend(pe.f().breakpoints().iter().copied().filter(|&t| t > 0.0 && t < d));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for pair in cuts.windows(2) {
        int_j += quad::integrate(|t| pe.j(t), pair[0], pair[1], 1e-12);
    }
    let psi_bar = len / (2.0 * d) * int_j + 0.5 * len * pe.j(d);

    let bounds = essential_bounds(p, q, a, b)?;
    let phi_lower = d * d * bounds.p0 / len;
    let phi_upper = d * d * bounds.p0 / (4.0 * w.k * len);
    let psi_bar_lower = 0.5 * len * pe.j(d);

    let tol = 1e-9;
    let rel = |x: f64| tol * (1.0 + x.abs());
    if phi_bar < phi_lower - rel(phi_lower) || phi_bar > phi_upper + rel(phi_upper) {
        return Err(Error::Internal(format!(
            "Phi(ū) = {phi_bar} outside [{phi_lower}, {phi_upper}]"
        )));
    }
    if phi_bar <= w.r {
        return Err(Error::Internal(format!("Phi(ū) = {phi_bar} must exceed r = {}", w.r)));
    }
    if psi_bar < psi_bar_lower - rel(psi_bar_lower) {
        return Err(Error::Internal(format!(
            "Psi(ū) = {psi_bar} below its lower bound {psi_bar_lower}"
        )));
    }
    // containment: the window sits inside (Phi(ū)/Psi(ū), 1/φ̂(r)), where
    // 1/φ̂(r) coincides with the window's upper endpoint by construction
    if w.lambda_lo < phi_bar / psi_bar - rel(phi_bar / psi_bar) {
        return Err(Error::Internal(format!(
            "window lower endpoint {} undercuts Phi(ū)/Psi(ū) = {}",
            w.lambda_lo,
            phi_bar / psi_bar
        )));
    }
    Ok(TestFunctionProfile { d, phi_bar, psi_bar, psi_bar_lower, phi_lower, phi_upper })
}

/// Hypotheses for the discontinuous-ODE front end (p = 1, q = 0). On pass,
/// the returned report feeds `compute_window`, which then reproduces the
/// dedicated two-endpoint formula with K = 1/4.
pub fn check_h2(
    g: &PiecewiseScalar,
    gb: &GrowthBound,
    c: f64,
    d: f64,
    a: f64,
    b: f64,
) -> Result<HypothesisReport> {
    if !(c > 0.0 && c < d) {
        return Err(Error::Hypothesis(format!("requires 0 < c < d, got c = {c}, d = {d}")));
    }
    let growth = check_growth_upper(g, gb, 2.0 * d.max(1.0));
    let positivity = essinf_positive(g)?;
    let pe = PotentialEval::from_scalar(g.clone())?;
    let jg_c = pe.j(c);
    let jg_d = pe.j(d);
    let k = 0.25;
    // H2(iii) is the m_c/c^2 < K J(d)/d^2 condition with m_c = J_g(c):
    // positivity makes J_g increasing on [0, c], so the max sits at c.
    let ratio_lhs = jg_c / (c * c);
    let ratio_rhs = k * jg_d / (d * d);
    let ratio_ok = ratio_lhs < ratio_rhs - STRICT_MARGIN * ratio_rhs.abs().max(1.0);
    let pass = growth.is_pass() && positivity.is_pass() && ratio_ok;
    Ok(HypothesisReport {
        a,
        b,
        c,
        d,
        bounds: EssentialBounds { p0: 1.0, p_sup: 1.0, q_inf: 0.0, q_sup: 0.0 },
        k,
        growth,
        positivity,
        m_c: jg_c,
        jf_d: jg_d,
        ratio_lhs,
        ratio_rhs,
        ratio_ok,
        pass,
    })
}

/// Positivity of `g` over the whole line: per-piece infima on the bounded
/// hull, monotonicity/limit rules on the tails. A tail whose infimum is a
/// positive-limit zero reached only at infinity still counts as a pass
/// (the values themselves stay strictly positive); an undecidable tail
/// yields `Inconclusive`.
fn essinf_positive(g: &PiecewiseScalar) -> Result<Verdict> {
    let hull = 1.0f64
        .max(g.breakpoints().first().map_or(0.0, |b| b.abs()) + 1.0)
        .max(g.breakpoints().last().map_or(0.0, |b| b.abs()) + 1.0);
    let interior_inf = g.extremum_on(-hull, hull, true)?;
    if interior_inf <= 0.0 {
        // locate a witness
        let mut witness = 0.0;
        for i in 0..=4000 {
            let t = -hull + 2.0 * hull * i as f64 / 4000.0;
            if g.eval(t) <= 0.0 {
                witness = t;
                break;
            }
        }
        return Ok(Verdict::Fail { witness_t: witness });
    }
    for dir in [Dir::MinusInf, Dir::PlusInf] {
        let (piece, sgn) = match dir {
            Dir::MinusInf => (g.pieces().first().unwrap(), -1.0),
            Dir::PlusInf => (g.pieces().last().unwrap(), 1.0),
        };
        let limit = piece.limit(dir);
        // a decaying tail can underflow to an exact 0.0 in f64; when the
        // classified limit is a non-attained zero, treat sampled zeros as
        // underflow rather than failures
        let zero_ok = limit == crate::expr::LimitClass::Finite(0.0);
        // sampled tail out to 1e8
        let mut t = hull;
        while t <= 1e8 {
            let v = piece.eval(sgn * t);
            if v < 0.0 || (v == 0.0 && !zero_ok) {
                return Ok(Verdict::Fail { witness_t: sgn * t });
            }
            t *= 2.0;
        }
        match limit {
            crate::expr::LimitClass::PlusInf => {}
            crate::expr::LimitClass::Finite(v) if v > 0.0 => {}
            crate::expr::LimitClass::Finite(v) if v == 0.0 => {
                // infimum zero but never attained: strictly positive values
            }
            crate::expr::LimitClass::Finite(v) => {
                return Ok(Verdict::Fail { witness_t: sgn * 1e9 * (1.0 + v.abs()) })
            }
            crate::expr::LimitClass::MinusInf => {
                return Ok(Verdict::Fail { witness_t: sgn * 1e9 })
            }
            crate::expr::LimitClass::Unknown => {
                return Ok(Verdict::Inconclusive {
                    reason: format!("tail infimum of piece {piece} undecidable"),
                })
            }
        }
    }
    Ok(Verdict::Pass)
}
