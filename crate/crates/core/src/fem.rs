//! P1 finite elements on `[a, b]` with the essential condition `u(a) = 0`
//! and the natural condition `u'(b) = 0`.
//!
//! The free coefficients are the nodal values at every node except `a`.
//! The quadratic part `Phi(u) = 1/2 ∫ p u'^2 + q u^2` is stored as a
//! tridiagonal matrix; nonlinear terms integrate `f(u_h)` per element with
//! Gauss quadrature, splitting elements where the linear `u_h` crosses a
//! discontinuity level of `f`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseScalar;
use crate::setvalued::PotentialEval;

/// Gauss-Legendre points/weights on [-1, 1] for orders 1..=5.
fn gauss_rule(order: usize) -> (&'static [f64], &'static [f64]) {
    const X1: [f64; 1] = [0.0];
    const W1: [f64; 1] = [2.0];
    const X2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
    const W2: [f64; 2] = [1.0, 1.0];
    const X3: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    const X4: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W4: [f64; 4] = [
        0.347_854_845_137_453_85,
        0.652_145_154_862_546_2,
        0.652_145_154_862_546_2,
        0.347_854_845_137_453_85,
    ];
    const X5: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W5: [f64; 5] = [
        0.236_926_885_056_189_08,
        0.478_628_670_499_366_47,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
    ];
    match order {
        1 => (&X1, &W1),
        2 => (&X2, &W2),
        3 => (&X3, &W3),
        5 => (&X5, &W5),
        _ => (&X4, &W4),
    }
}

/// Nodal coefficients of a discrete function (node `a` excluded, its
/// value is pinned to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    pub coeffs: Vec<f64>,
}

impl DiscreteFunction {
    pub fn zeros(dim: usize) -> Self {
        DiscreteFunction { coeffs: vec![0.0; dim] }
    }
}

/// Energy split at a discrete function.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyReport {
    pub phi: f64,
    pub psi: f64,
    pub lambda: f64,
    pub total: f64,
}

/// Element matrix of the quadratic form: stiffness coefficient and the
/// three distinct mass entries on the local nodal pair.
#[derive(Debug, Clone, Copy)]
struct ElemMat {
    kp: f64,
    m00: f64,
    m01: f64,
    m11: f64,
}

#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    a: f64,
    b: f64,
    /// All mesh nodes including `a`; strictly increasing.
    nodes: Vec<f64>,
    quad_order: usize,
    p0: f64,
    elems: Vec<ElemMat>,
    /// Tridiagonal stiffness over the free dofs: `diag[i]` couples node
    /// `i+1` with itself, `off[i]` couples nodes `i+1` and `i+2`.
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl DiscreteSpace {
    /// Uniform mesh with `n` elements, refined so that every breakpoint of
    /// `p` or `q` inside `(a, b)` lands on a node.
    pub fn new(
        a: f64,
        b: f64,
        n: usize,
        quad_order: usize,
        p: &PiecewiseScalar,
        q: &PiecewiseScalar,
    ) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!("invalid interval [{a}, {b}]")));
        }
        if n == 0 {
            return Err(Error::Config("mesh needs at least one element".into()));
        }
        if !(1..=5).contains(&quad_order) {
            return Err(Error::Config(format!("quadrature order {quad_order} outside 1..=5")));
        }
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let snap = 1e-12 * (b - a);
        for &bp in p.breakpoints().iter().chain(q.breakpoints()) {
            if bp > a + snap && bp < b - snap && nodes.iter().all(|&x| (x - bp).abs() > snap) {
                nodes.push(bp);
            }
        }
        nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

        let p0 = p.extremum_on(a, b, true)?;
        if p0 <= 0.0 {
            return Err(Error::Ellipticity(p0));
        }

        let dim = nodes.len() - 1;
        let mut elems = Vec::with_capacity(dim);
        let mut diag = vec![0.0; dim];
        let mut off = vec![0.0; dim.saturating_sub(1)];
        let (gx, gw) = gauss_rule(quad_order);
        for e in 0..nodes.len() - 1 {
            let (x0, x1) = (nodes[e], nodes[e + 1]);
            let h = x1 - x0;
            let (mut kp, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
            for (&xi, &wi) in gx.iter().zip(gw) {
                let x = 0.5 * (x0 + x1) + 0.5 * h * xi;
                let w = 0.5 * h * wi;
                let pv = p.eval(x);
                let qv = q.eval(x);
                let s = (x - x0) / h; // local coordinate, phi_left = 1-s
                kp += w * pv / (h * h);
                m00 += w * qv * (1.0 - s) * (1.0 - s);
                m01 += w * qv * (1.0 - s) * s;
                m11 += w * qv * s * s;
            }
            elems.push(ElemMat { kp, m00, m01, m11 });
            // local matrix [[kp+m00, -kp+m01], [-kp+m01, kp+m11]] on the
            // nodal pair (e, e+1); node 0 is constrained to zero
            if e > 0 {
                diag[e - 1] += kp + m00;
            }
            diag[e] += kp + m11;
            if e > 0 {
                off[e - 1] += -kp + m01;
            }
        }
        Ok(DiscreteSpace { a, b, nodes, quad_order, p0, elems, diag, off })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn h_max(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Nodal value of `u` at mesh node `i` (0 at the constrained node).
    fn nodal(&self, u: &DiscreteFunction, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            u.coeffs[i - 1]
        }
    }

    pub fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> DiscreteFunction {
        DiscreteFunction { coeffs: self.nodes[1..].iter().map(|&x| f(x)).collect() }
    }

    /// The wedge profile: linear from 0 to `d` over the left half of the
    /// interval, constant `d` afterwards.
    pub fn wedge(&self, d: f64) -> DiscreteFunction {
        let mid = 0.5 * (self.a + self.b);
        self.interpolate(|x| if x < mid { 2.0 * d * (x - self.a) / (self.b - self.a) } else { d })
    }

    pub fn eval(&self, u: &DiscreteFunction, x: f64) -> f64 {
        let x = x.clamp(self.a, self.b);
        let e = match self.nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.nodal(u, i),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        };
        let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
        let s = (x - x0) / (x1 - x0);
        self.nodal(u, e) * (1.0 - s) + self.nodal(u, e + 1) * s
    }

    /// Matrix-vector product with the stiffness matrix.
    pub fn a_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = self.diag[i] * v[i];
            if i > 0 {
                out[i] += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                out[i] += self.off[i] * v[i + 1];
            }
        }
        out
    }

    /// Solve `A x = rhs` by the Thomas algorithm.
    pub fn a_solve(&self, rhs: &[f64]) -> Vec<f64> {
        thomas(&self.diag, &self.off, &self.off, rhs)
    }

    /// `Phi(u) = 1/2 u^T A u`, accumulated element by element. Each
    /// element contributes `kp (u1 - u0)^2` plus the mass terms, which
    /// avoids the large cancelling products of the assembled `u^T A u`.
    pub fn phi(&self, u: &DiscreteFunction) -> f64 {
        let mut total = 0.0;
        for (e, m) in self.elems.iter().enumerate() {
            let u0 = self.nodal(u, e);
            let u1 = self.nodal(u, e + 1);
            let du = u1 - u0;
            total += m.kp * du * du + m.m00 * u0 * u0 + 2.0 * m.m01 * u0 * u1 + m.m11 * u1 * u1;
        }
        0.5 * total
    }

    /// Energy norm `sqrt(u^T A u)`; equivalent to the problem's native
    /// `H^1` norm since `p` is bounded away from zero.
    pub fn energy_norm(&self, u: &DiscreteFunction) -> f64 {
        (2.0 * self.phi(u)).max(0.0).sqrt()
    }

    /// Dual norm `sqrt(g^T A^{-1} g)` of a gradient vector.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        dot(g, &self.a_solve(g)).max(0.0).sqrt()
    }

    pub fn sup_norm(&self, u: &DiscreteFunction) -> f64 {
        u.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Subdivision points of element `e` induced by the discontinuity
    /// levels of `f` crossed by the linear `u_h`.
    fn element_cuts(&self, u: &DiscreteFunction, e: usize, levels: &[f64]) -> Vec<f64> {
        let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
        let (u0, u1) = (self.nodal(u, e), self.nodal(u, e + 1));
        let mut cuts = vec![x0, x1];
        if (u1 - u0).abs() > 0.0 {
            let (lo, hi) = (u0.min(u1), u0.max(u1));
            for &lev in levels {
                if lev > lo && lev < hi {
                    cuts.push(x0 + (x1 - x0) * (lev - u0) / (u1 - u0));
                }
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts
    }

    /// `Psi(u) = ∫ J(u_h)` with crossing-aware quadrature.
    pub fn psi(&self, u: &DiscreteFunction, pe: &PotentialEval) -> f64 {
        let levels = pe.f().breakpoints();
        let (gx, gw) = gauss_rule(self.quad_order);
        let mut total = 0.0;
        for e in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            let (u0, u1) = (self.nodal(u, e), self.nodal(u, e + 1));
            let h = x1 - x0;
            for seg in self.element_cuts(u, e, levels).windows(2) {
                let hs = seg[1] - seg[0];
                if hs <= 0.0 {
                    continue;
                }
                for (&xi, &wi) in gx.iter().zip(gw) {
                    let x = 0.5 * (seg[0] + seg[1]) + 0.5 * hs * xi;
                    let s = (x - x0) / h;
                    total += 0.5 * hs * wi * pe.j(u0 * (1.0 - s) + u1 * s);
                }
            }
        }
        total
    }

    /// Gradient of `Psi`: entries `∫ f(u_h) phi_i`.
    pub fn psi_grad(&self, u: &DiscreteFunction, pe: &PotentialEval) -> Vec<f64> {
        let levels = pe.f().breakpoints();
        let (gx, gw) = gauss_rule(self.quad_order);
        let mut g = vec![0.0; self.dim()];
        for e in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            let (u0, u1) = (self.nodal(u, e), self.nodal(u, e + 1));
            let h = x1 - x0;
            for seg in self.element_cuts(u, e, levels).windows(2) {
                let hs = seg[1] - seg[0];
                if hs <= 0.0 {
                    continue;
                }
                for (&xi, &wi) in gx.iter().zip(gw) {
                    let x = 0.5 * (seg[0] + seg[1]) + 0.5 * hs * xi;
                    let s = (x - x0) / h;
                    let fv = pe.f_eval(u0 * (1.0 - s) + u1 * s);
                    let w = 0.5 * hs * wi * fv;
                    if e > 0 {
                        g[e - 1] += w * (1.0 - s);
                    }
                    g[e] += w * s;
                }
            }
        }
        g
    }

    /// Tridiagonal Hessian of `Psi`: entries `∫ f'(u_h) phi_i phi_j`,
    /// using the branch-wise derivative of the selection.
    pub fn psi_hess(&self, u: &DiscreteFunction, pe: &PotentialEval) -> (Vec<f64>, Vec<f64>) {
        let levels = pe.f().breakpoints();
        let (gx, gw) = gauss_rule(self.quad_order);
        let dim = self.dim();
        let mut diag = vec![0.0; dim];
        let mut off = vec![0.0; dim.saturating_sub(1)];
        for e in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            let (u0, u1) = (self.nodal(u, e), self.nodal(u, e + 1));
            let h = x1 - x0;
            for seg in self.element_cuts(u, e, levels).windows(2) {
                let hs = seg[1] - seg[0];
                if hs <= 0.0 {
                    continue;
                }
                for (&xi, &wi) in gx.iter().zip(gw) {
                    let x = 0.5 * (seg[0] + seg[1]) + 0.5 * hs * xi;
                    let s = (x - x0) / h;
                    let dv = pe.f_deriv(u0 * (1.0 - s) + u1 * s);
                    if !dv.is_finite() {
                        continue;
                    }
                    let w = 0.5 * hs * wi * dv;
                    if e > 0 {
                        diag[e - 1] += w * (1.0 - s) * (1.0 - s);
                        off[e - 1] += w * (1.0 - s) * s;
                    }
                    diag[e] += w * s * s;
                }
            }
            // Jump contribution of each moving crossing point: when `u_h`
            // crosses a discontinuity level of `f` inside the element, the
            // gradient entries pick up `-h [f] phi_i(xi) phi_j(xi) / (u1 - u0)`
            // from the cut displacement, with `[f]` the one-sided jump of
            // `f` at the level in the direction of increasing `u_h`.
            let du = u1 - u0;
            if du.abs() > 1e-12 * (1.0 + u0.abs().max(u1.abs())) {
                let (lo_v, hi_v) = (u0.min(u1), u0.max(u1));
                for &lev in levels {
                    if lev > lo_v && lev < hi_v {
                        let sig = (lev - u0) / du;
                        let jump = pe.f_jump(lev);
                        let scale = -h * jump / du.abs();
                        if !scale.is_finite() {
                            continue;
                        }
                        if e > 0 {
                            diag[e - 1] += scale * (1.0 - sig) * (1.0 - sig);
                            off[e - 1] += scale * (1.0 - sig) * sig;
                        }
                        diag[e] += scale * sig * sig;
                    }
                }
            }
        }
        (diag, off)
    }

    /// Full energy `I(u) = Phi(u) - lambda Psi(u)`.
    pub fn energy(&self, u: &DiscreteFunction, pe: &PotentialEval, lambda: f64) -> EnergyReport {
        let phi = self.phi(u);
        let psi = self.psi(u, pe);
        EnergyReport { phi, psi, lambda, total: phi - lambda * psi }
    }

    /// Gradient `A u - lambda ∫ f(u_h) phi_i` of the energy.
    pub fn gradient(&self, u: &DiscreteFunction, pe: &PotentialEval, lambda: f64) -> Vec<f64> {
        let mut g = self.a_apply(&u.coeffs);
        for (gi, pi) in g.iter_mut().zip(self.psi_grad(u, pe)) {
            *gi -= lambda * pi;
        }
        g
    }

    /// Galerkin solution of the linear problem with right-hand side `f`.
    pub fn galerkin_solve<F: Fn(f64) -> f64>(&self, f: F) -> DiscreteFunction {
        let (gx, gw) = gauss_rule(self.quad_order.max(4));
        let mut rhs = vec![0.0; self.dim()];
        for e in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            let h = x1 - x0;
            for (&xi, &wi) in gx.iter().zip(gw) {
                let x = 0.5 * (x0 + x1) + 0.5 * h * xi;
                let s = (x - x0) / h;
                let w = 0.5 * h * wi * f(x);
                if e > 0 {
                    rhs[e - 1] += w * (1.0 - s);
                }
                rhs[e] += w * s;
            }
        }
        DiscreteFunction { coeffs: self.a_solve(&rhs) }
    }

    /// Largest relative discrepancy between the analytic gradient and
    /// central finite differences of the energy.
    pub fn fd_gradient_check(
        &self,
        u: &DiscreteFunction,
        pe: &PotentialEval,
        lambda: f64,
        eps: f64,
    ) -> f64 {
        let g = self.gradient(u, pe, lambda);
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up.coeffs[i] += eps;
            dn.coeffs[i] -= eps;
            let fd = (self.energy(&up, pe, lambda).total - self.energy(&dn, pe, lambda).total)
                / (2.0 * eps);
            worst = worst.max((g[i] - fd).abs() / (1.0 + g[i].abs()));
        }
        worst
    }

    /// Raw stiffness bands (diagonal, off-diagonal) for inspection.
    pub fn stiffness(&self) -> (&[f64], &[f64]) {
        (&self.diag, &self.off)
    }

    /// Per-element Gauss points as `(element, x, weight)`, the nodes used
    /// by the nonlinear quadrature when no crossing split is active.
    pub fn quad_points(&self) -> Vec<(usize, f64, f64)> {
        let (gx, gw) = gauss_rule(self.quad_order);
        let mut pts = Vec::with_capacity((self.nodes.len() - 1) * gx.len());
        for e in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            let h = x1 - x0;
            for (&xi, &wi) in gx.iter().zip(gw) {
                pts.push((e, 0.5 * (x0 + x1) + 0.5 * h * xi, 0.5 * h * wi));
            }
        }
        pts
    }

    /// Gauss points refined by the crossing split the nonlinear terms use
    /// at `u`: every element is subdivided where the linear `u_h` crosses
    /// one of the given levels, so a multiplier sampled at these points
    /// can represent any selection exactly as the gradient quadrature
    /// sees it.
    pub fn quad_points_for(&self, u: &DiscreteFunction, levels: &[f64]) -> Vec<(usize, f64, f64)> {
        let (gx, gw) = gauss_rule(self.quad_order);
        let mut pts = Vec::new();
        for e in 0..self.nodes.len() - 1 {
            for seg in self.element_cuts(u, e, levels).windows(2) {
                let hs = seg[1] - seg[0];
                if hs <= 0.0 {
                    continue;
                }
                for (&xi, &wi) in gx.iter().zip(gw) {
                    pts.push((e, 0.5 * (seg[0] + seg[1]) + 0.5 * hs * xi, 0.5 * hs * wi));
                }
            }
        }
        pts
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thomas solve for a tridiagonal system (lower, diag, upper bands).
fn thomas(diag: &[f64], lower: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Solve a general tridiagonal system (used by Newton steps where the
/// matrix is `A - lambda B` and not necessarily definite).
pub fn tridiag_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    // fail out on near-singular pivots rather than returning garbage
    let scale = diag.iter().chain(off).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0].abs() < 1e-14 * scale {
        return None;
    }
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off[i - 1] * c[i - 1];
        if m.abs() < 1e-14 * scale {
            return None;
        }
        if i + 1 < n {
            c[i] = off[i] / m;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Some(x)
}
