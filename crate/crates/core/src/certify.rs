//! A posteriori certification of computed critical points as weak
//! solutions of the differential inclusion.
//!
//! A certificate packages the multiplier found by the stationarity
//! program together with the dual-norm residual of the weak form, the
//! multiplier's distance to the admissible intervals, and boundary
//! residuals. The verdict is the conjunction of those checks against
//! fixed tolerances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{DiscreteFunction, DiscreteSpace};
use crate::solver::{polish_point, CriticalPoint, DiscreteProblem, SolverOptions};

#[derive(Debug, Clone, Serialize)]
pub struct SolutionCertificate {
    pub lambda: f64,
    pub energy: f64,
    pub phi: f64,
    pub psi: f64,
    pub sup_norm: f64,
    /// Dual norm of `A u - lambda B w` at the optimal multiplier.
    pub weak_residual: f64,
    /// Largest distance of a multiplier value from its admissible
    /// interval; zero by construction of the projection.
    pub membership_violation: f64,
    /// Essential boundary value `u(a)`; zero by construction.
    pub bc_left: f64,
    /// Discrete slope on the last element against the natural condition
    /// `u'(b) = 0`; compared to `bc_gate`, an O(h) consistency bound.
    pub bc_residual: f64,
    pub bc_gate: f64,
    /// L2 norm of the reconstructed classical residual
    /// `-(p u')' + q u - lambda w`; an O(h) diagnostic, not gated.
    pub classical_residual: f64,
    /// Total length of the region where `u_h` sits on a discontinuity
    /// level of the reaction; flagged when it exceeds `10 h`.
    pub sticking_measure: f64,
    pub sticking_flagged: bool,
    pub verdict: bool,
}

/// Certify a converged critical point. Refuses points whose search did
/// not converge rather than issuing a failing certificate for them.
pub fn certify(
    problem: &DiscreteProblem,
    point: &CriticalPoint,
    p: &crate::piecewise::PiecewiseScalar,
    q: &crate::piecewise::PiecewiseScalar,
    tol_weak: f64,
) -> Result<SolutionCertificate> {
    if !point.converged {
        return Err(Error::Certify(
            "refusing to certify a point whose search did not converge".into(),
        ));
    }
    let sp = problem.space;
    let u = DiscreteFunction { coeffs: point.u.clone() };
    let stat = problem.stationarity(&point.u);

    // multiplier box distances (the projection keeps these at zero; any
    // nonzero value indicates an internal fault worth surfacing)
    let mut membership: f64 = 0.0;
    for (&(_, x, _), &w) in stat.quad.iter().zip(&stat.multiplier) {
        let t = sp.eval(&u, x);
        let (l, h) = problem.map.at(t);
        let (lo, hi) = (l.min(h), l.max(h));
        membership = membership.max((lo - w).max(w - hi).max(0.0));
    }

    let energy = sp.energy(&u, problem.pe, problem.lambda);
    let (bc_residual, bc_gate) = natural_bc_residual(sp, &u, &stat, p, q, problem.lambda);
    let classical = classical_residual(sp, &u, &stat, p, q, problem.lambda);
    let (sticking, flagged) = discontinuity_diagnostic(sp, &u, problem.pe.f().breakpoints());

    let verdict = stat.measure <= tol_weak && membership <= tol_weak && bc_residual <= bc_gate;
    Ok(SolutionCertificate {
        lambda: problem.lambda,
        energy: energy.total,
        phi: energy.phi,
        psi: energy.psi,
        sup_norm: sp.sup_norm(&u),
        weak_residual: stat.measure,
        membership_violation: membership,
        bc_left: 0.0,
        bc_residual,
        bc_gate,
        classical_residual: classical,
        sticking_measure: sticking,
        sticking_flagged: flagged,
        verdict,
    })
}

/// Natural boundary condition check: the slope of `u_h` on the last
/// element should vanish up to the local consistency error
/// `h/2 * |q u - lambda w| / p` (plus slack for quadrature noise).
fn natural_bc_residual(
    sp: &DiscreteSpace,
    u: &DiscreteFunction,
    stat: &crate::solver::StationarityResult,
    p: &crate::piecewise::PiecewiseScalar,
    q: &crate::piecewise::PiecewiseScalar,
    lambda: f64,
) -> (f64, f64) {
    let nodes = sp.nodes();
    let n = nodes.len();
    let (x0, x1) = (nodes[n - 2], nodes[n - 1]);
    let h = x1 - x0;
    let slope = (sp.eval(u, x1) - sp.eval(u, x0)) / h;

    // strength of the right-hand side on the last element
    let last_elem = n - 2;
    let mut source: f64 = 0.0;
    for (&(e, x, _), &w) in stat.quad.iter().zip(&stat.multiplier) {
        if e == last_elem {
            source = source.max((q.eval(x) * sp.eval(u, x) - lambda * w).abs());
        }
    }
    let p_last = p.eval(0.5 * (x0 + x1)).max(1e-300);
    let gate = 2.0 * h * source / p_last + 1e-10;
    (slope.abs(), gate)
}

/// L2 norm of `-(p u')' + q u - lambda w` with the derivative of `p u'`
/// reconstructed from nodal-averaged slopes. First order in `h`.
pub fn classical_residual(
    sp: &DiscreteSpace,
    u: &DiscreteFunction,
    stat: &crate::solver::StationarityResult,
    p: &crate::piecewise::PiecewiseScalar,
    q: &crate::piecewise::PiecewiseScalar,
    lambda: f64,
) -> f64 {
    let nodes = sp.nodes();
    let n_el = nodes.len() - 1;
    // flux p u' per element (constant slopes)
    let flux: Vec<f64> = (0..n_el)
        .map(|e| {
            let (x0, x1) = (nodes[e], nodes[e + 1]);
            let slope = (sp.eval(u, x1) - sp.eval(u, x0)) / (x1 - x0);
            p.eval(0.5 * (x0 + x1)) * slope
        })
        .collect();
    // d(p u')/dx at interior nodes from flux jumps, interpolated back to
    // element midpoints
    let mut dflux = vec![0.0; n_el];
    for e in 0..n_el {
        let left = if e > 0 {
            (flux[e] - flux[e - 1]) / (0.5 * (nodes[e + 1] - nodes[e - 1]))
        } else {
            0.0
        };
        let right = if e + 1 < n_el {
            (flux[e + 1] - flux[e]) / (0.5 * (nodes[e + 2] - nodes[e]))
        } else {
            0.0
        };
        dflux[e] = match (e > 0, e + 1 < n_el) {
            (true, true) => 0.5 * (left + right),
            (true, false) => left,
            (false, true) => right,
            (false, false) => 0.0,
        };
    }
    // L2 of the pointwise residual at the multiplier's quadrature points
    let mut acc = 0.0;
    for (&(e, x, wt), &w) in stat.quad.iter().zip(&stat.multiplier) {
        let r = -dflux[e] + q.eval(x) * sp.eval(u, x) - lambda * w;
        acc += wt * r * r;
    }
    acc.max(0.0).sqrt()
}

/// Measure of the set where `u_h` sits within `1e-9` of a discontinuity
/// level of the reaction; flagged when it exceeds ten mesh widths.
pub fn discontinuity_diagnostic(
    sp: &DiscreteSpace,
    u: &DiscreteFunction,
    levels: &[f64],
) -> (f64, bool) {
    let nodes = sp.nodes();
    let tol = 1e-9;
    let mut measure = 0.0;
    for e in 0..nodes.len() - 1 {
        let (x0, x1) = (nodes[e], nodes[e + 1]);
        let (u0, u1) = (sp.eval(u, x0), sp.eval(u, x1));
        for &lev in levels {
            let (d0, d1) = (u0 - lev, u1 - lev);
            if d0.abs() <= tol && d1.abs() <= tol {
                // flat on the level across the whole element
                measure += x1 - x0;
            } else if (u1 - u0).abs() > 0.0 {
                // fraction of the element where |u_h - lev| <= tol
                let slope = (u1 - u0) / (x1 - x0);
                let width = 2.0 * tol / slope.abs();
                let cross = x0 + (lev - u0) / slope;
                let lo = (cross - 0.5 * width).max(x0);
                let hi = (cross + 0.5 * width).min(x1);
                if hi > lo {
                    measure += hi - lo;
                }
            }
        }
    }
    (measure, measure > 10.0 * sp.h_max())
}

/// Stability re-check: prolong the point to a mesh with twice as many
/// elements, allow at most `polish_iters` Newton corrections, and
/// certify there against the relaxed tolerance.
#[allow(clippy::too_many_arguments)]
pub fn certify_refined(
    problem: &DiscreteProblem,
    point: &CriticalPoint,
    p: &crate::piecewise::PiecewiseScalar,
    q: &crate::piecewise::PiecewiseScalar,
    fine: &DiscreteSpace,
    tol_weak: f64,
    polish_iters: usize,
) -> Result<SolutionCertificate> {
    let coarse_u = DiscreteFunction { coeffs: point.u.clone() };
    let prolonged = fine.interpolate(|x| problem.space.eval(&coarse_u, x));
    let fine_problem = DiscreteProblem {
        space: fine,
        map: problem.map,
        pe: problem.pe,
        lambda: problem.lambda,
    };
    let opts = SolverOptions {
        max_iters: polish_iters,
        tol_stat: tol_weak,
        ..Default::default()
    };
    let refined = polish_point(&fine_problem, prolonged.coeffs, point.kind, &opts);
    certify(&fine_problem, &refined, p, q, 10.0 * tol_weak)
}
