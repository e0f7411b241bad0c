//! Critical point search for the discretized energy `I = Phi - lambda Psi`.
//!
//! Three mechanisms cover the three guaranteed critical points: a
//! constrained minimization inside the small energy ball, unconstrained
//! descent from wedge-shaped starts, and a string/climbing-image mountain
//! pass between two distinct minimizers. Deflation barriers steer repeated
//! descents away from already-found points; every accepted point is
//! re-checked with the interval-valued stationarity measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fem::{tridiag_solve, DiscreteFunction, DiscreteSpace};
use crate::setvalued::{IntervalMap, PotentialEval};

/// Abstract energy with a metric that defines norms, preconditioning and
/// dual norms. The discrete problem uses its stiffness matrix; test
/// models can use the identity.
pub trait EnergyModel {
    fn dim(&self) -> usize;
    fn energy(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;
    /// Tridiagonal Hessian bands `(diag, off)`, when available.
    fn hessian(&self, u: &[f64]) -> Option<(Vec<f64>, Vec<f64>)>;
    fn metric_apply(&self, v: &[f64]) -> Vec<f64>;
    fn metric_solve(&self, v: &[f64]) -> Vec<f64>;
    fn sup_norm(&self, u: &[f64]) -> f64 {
        u.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn norm(&self, u: &[f64]) -> f64 {
        dot(u, &self.metric_apply(u)).max(0.0).sqrt()
    }

    fn dual_norm(&self, g: &[f64]) -> f64 {
        dot(g, &self.metric_solve(g)).max(0.0).sqrt()
    }

    /// Upper bound on the stationarity measure: the dual norm of the
    /// (selection) gradient, which corresponds to one admissible choice
    /// of the multiplier.
    fn stationarity_bound(&self, u: &[f64]) -> f64 {
        self.dual_norm(&self.gradient(u))
    }
}

/// Solver parameters; the defaults are the reference configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SolverOptions {
    pub tol_stat: f64,
    pub sep_tol: f64,
    pub budget: usize,
    pub seed: u64,
    pub path_points: usize,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_stat: 1e-8,
            sep_tol: 1e-3,
            budget: 50,
            seed: 42,
            path_points: 17,
            max_iters: 200,
        }
    }
}

/// How a critical point was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointKind {
    #[serde(rename = "BALL_MIN")]
    BallMinimizer,
    #[serde(rename = "GLOBAL_MIN")]
    Minimizer,
    #[serde(rename = "MOUNTAIN_PASS")]
    MountainPass,
    #[serde(rename = "DEFLATED")]
    Deflated,
}

impl PointKind {
    pub fn label(&self) -> &'static str {
        match self {
            PointKind::BallMinimizer => "BALL_MIN",
            PointKind::Minimizer => "GLOBAL_MIN",
            PointKind::MountainPass => "MOUNTAIN_PASS",
            PointKind::Deflated => "DEFLATED",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub u: Vec<f64>,
    pub energy: f64,
    pub stationarity_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kind: PointKind,
}

/// Measure plus the optimal multiplier values at the quadrature points.
#[derive(Debug, Clone)]
pub struct StationarityResult {
    pub measure: f64,
    /// Crossing-aware quadrature points `(element, x, weight)` the
    /// multiplier lives on.
    pub quad: Vec<(usize, f64, f64)>,
    /// One multiplier value per quadrature point.
    pub multiplier: Vec<f64>,
    /// Assembled load vector of the optimal multiplier.
    pub load: Vec<f64>,
}

/// The concrete energy on a finite element space.
pub struct DiscreteProblem<'a> {
    pub space: &'a DiscreteSpace,
    pub map: &'a IntervalMap,
    pub pe: &'a PotentialEval,
    pub lambda: f64,
}

impl<'a> DiscreteProblem<'a> {
    fn df(&self, u: &[f64]) -> DiscreteFunction {
        DiscreteFunction { coeffs: u.to_vec() }
    }

    pub fn phi(&self, u: &[f64]) -> f64 {
        self.space.phi(&self.df(u))
    }

    /// Stationarity measure: minimize `||A u - lambda B w||` in the dual
    /// norm over multipliers `w` confined, at each quadrature point, to
    /// the interval the set-valued reaction prescribes at `u_h(x)`.
    /// Solved as a box-constrained quadratic program by projected
    /// gradient with a power-iteration step size.
    pub fn stationarity(&self, u: &[f64]) -> StationarityResult {
        let df = self.df(u);
        let qp = self.space.quad_points_for(&df, self.pe.f().breakpoints());
        let nodes = self.space.nodes();
        let dim = self.space.dim();
        let g0 = self.space.a_apply(u);

        // boxes and a feasible start from the selection
        let mut lo = Vec::with_capacity(qp.len());
        let mut hi = Vec::with_capacity(qp.len());
        let mut w = Vec::with_capacity(qp.len());
        for &(_, x, _) in &qp {
            let t = self.space.eval(&df, x);
            let (l, h) = self.map.at(t);
            lo.push(l.min(h));
            hi.push(l.max(h));
            w.push(self.pe.f_eval(t).clamp(l.min(h), l.max(h)));
        }

        // B maps quadrature values to the load vector
        let apply_b = |w: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; dim];
            for (q, &(e, x, wt)) in qp.iter().enumerate() {
                let h = nodes[e + 1] - nodes[e];
                let s = (x - nodes[e]) / h;
                if e > 0 {
                    out[e - 1] += wt * w[q] * (1.0 - s);
                }
                out[e] += wt * w[q] * s;
            }
            out
        };
        let apply_bt = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; qp.len()];
            for (q, &(e, x, wt)) in qp.iter().enumerate() {
                let h = nodes[e + 1] - nodes[e];
                let s = (x - nodes[e]) / h;
                let mut acc = wt * s * v[e];
                if e > 0 {
                    acc += wt * (1.0 - s) * v[e - 1];
                }
                out[q] = acc;
            }
            out
        };

        let objective = |w: &[f64]| -> (f64, Vec<f64>) {
            let mut r = g0.clone();
            for (ri, bi) in r.iter_mut().zip(apply_b(w)) {
                *ri -= self.lambda * bi;
            }
            let ainv_r = self.space.a_solve(&r);
            let val = dot(&r, &ainv_r).max(0.0);
            // dJ/dw = -2 lambda B^T A^{-1} r
            let mut grad = apply_bt(&ainv_r);
            for g in grad.iter_mut() {
                *g *= -2.0 * self.lambda;
            }
            (val, grad)
        };

        if self.lambda == 0.0 || qp.is_empty() {
            let r = self.space.a_solve(&g0);
            let load = apply_b(&w);
            return StationarityResult {
                measure: dot(&g0, &r).max(0.0).sqrt(),
                quad: qp,
                multiplier: w,
                load,
            };
        }

        // Lipschitz constant of the gradient via power iteration on
        // 2 lambda^2 B^T A^{-1} B
        let mut v: Vec<f64> = (0..qp.len()).map(|i| ((i as f64) * 0.37).sin() + 0.5).collect();
        let mut lip = 1.0;
        for _ in 0..60 {
            let bv = apply_b(&v);
            let mut mv = apply_bt(&self.space.a_solve(&bv));
            for m in mv.iter_mut() {
                *m *= 2.0 * self.lambda * self.lambda;
            }
            let nrm = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm <= 1e-300 {
                break;
            }
            lip = nrm / v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            for (vi, mi) in v.iter_mut().zip(&mv) {
                *vi = mi / nrm;
            }
        }
        let step = 1.0 / lip.max(1e-300);

        let project = |w: &mut [f64]| {
            for ((wi, &l), &h) in w.iter_mut().zip(&lo).zip(&hi) {
                *wi = wi.clamp(l, h);
            }
        };
        project(&mut w);
        let mut best = objective(&w).0;
        for _ in 0..5000 {
            let (_, grad) = objective(&w);
            let mut w_new = w.clone();
            for (wi, gi) in w_new.iter_mut().zip(&grad) {
                *wi -= step * gi;
            }
            project(&mut w_new);
            let moved: f64 = w_new
                .iter()
                .zip(&w)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let val = objective(&w_new).0;
            w = w_new;
            best = val;
            if moved <= 1e-12 * (1.0 + w.iter().map(|x| x * x).sum::<f64>().sqrt()) {
                break;
            }
        }
        let load = apply_b(&w);
        StationarityResult { measure: best.max(0.0).sqrt(), quad: qp, multiplier: w, load }
    }
}

impl<'a> EnergyModel for DiscreteProblem<'a> {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.space.energy(&self.df(u), self.pe, self.lambda).total
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.space.gradient(&self.df(u), self.pe, self.lambda)
    }

    fn hessian(&self, u: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (sd, so) = self.space.stiffness();
        let (hd, ho) = self.space.psi_hess(&self.df(u), self.pe);
        let diag: Vec<f64> = sd.iter().zip(&hd).map(|(s, h)| s - self.lambda * h).collect();
        let off: Vec<f64> = so.iter().zip(&ho).map(|(s, h)| s - self.lambda * h).collect();
        Some((diag, off))
    }

    fn metric_apply(&self, v: &[f64]) -> Vec<f64> {
        self.space.a_apply(v)
    }

    fn metric_solve(&self, v: &[f64]) -> Vec<f64> {
        self.space.a_solve(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Residual deflation: the gradient is multiplied by shifted-inverse
/// factors `1/||u - u_k||^2 + 1`, so the deflated residual cannot vanish
/// at an already-found point while the zeros elsewhere are unchanged.
struct Deflation<'a, M: EnergyModel> {
    model: &'a M,
    known: Vec<Vec<f64>>,
    eps: f64,
}

impl<'a, M: EnergyModel> Deflation<'a, M> {
    fn new(model: &'a M, known: &[Vec<f64>]) -> Self {
        Deflation { model, known: known.to_vec(), eps: 1e-12 }
    }

    /// Product of the deflation factors at `u`.
    fn factor(&self, u: &[f64]) -> f64 {
        let mut m = 1.0;
        for k in &self.known {
            let d: Vec<f64> = u.iter().zip(k).map(|(a, b)| a - b).collect();
            let n2 = dot(&d, &self.model.metric_apply(&d)) + self.eps;
            m *= 1.0 / n2 + 1.0;
        }
        m
    }

    /// Deflated residual norm `factor * ||grad||_*`.
    fn residual(&self, u: &[f64]) -> f64 {
        self.factor(u) * self.model.dual_norm(&self.model.gradient(u))
    }

    /// Scale factor for a Newton direction `d`: the exact Newton step of
    /// the deflated residual is the plain step times `M / (M - dM . d)`
    /// (a rank-one Sherman-Morrison identity).
    fn newton_scale(&self, u: &[f64], d: &[f64]) -> f64 {
        let m = self.factor(u);
        // dM^T d = M * sum_k (dm_k^T d) / m_k with
        // dm_k = -2 A (u - u_k) / n2^2
        let mut acc = 0.0;
        for k in &self.known {
            let diff: Vec<f64> = u.iter().zip(k).map(|(a, b)| a - b).collect();
            let ad = self.model.metric_apply(&diff);
            let n2 = dot(&diff, &ad) + self.eps;
            let mk = 1.0 / n2 + 1.0;
            let dmk_d = -2.0 * dot(&ad, d) / (n2 * n2);
            acc += dmk_d / mk;
        }
        let dm_d = m * acc;
        let den = m - dm_d;
        if den.abs() < 1e-14 * m.abs().max(1e-300) {
            1.0
        } else {
            (m / den).clamp(-1e3, 1e3)
        }
    }
}

/// Damped (semismooth) Newton descent with an Armijo line search. With
/// known points supplied, a deflation phase first steers away from them;
/// the final iterations always polish the undeflated energy. Never
/// panics: on iteration cap it returns with `converged = false`.
pub fn descend<M: EnergyModel>(
    model: &M,
    start: &[f64],
    known: &[Vec<f64>],
    opts: &SolverOptions,
) -> CriticalPoint {
    let mut u = start.to_vec();
    let mut iters = 0;
    if !known.is_empty() {
        let defl = Deflation::new(model, known);
        let phase = opts.max_iters / 2;
        let mut res = defl.residual(&u);
        while res > opts.tol_stat && iters < phase {
            iters += 1;
            let g = model.gradient(&u);
            let d = model
                .hessian(&u)
                .and_then(|(hd, ho)| {
                    let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
                    tridiag_solve(&hd, &ho, &rhs)
                })
                .filter(|d| d.iter().all(|x| x.is_finite()))
                .unwrap_or_else(|| {
                    let mut d = model.metric_solve(&g);
                    for x in d.iter_mut() {
                        *x = -*x;
                    }
                    d
                });
            let scale = defl.newton_scale(&u, &d);
            let mut t = 1.0;
            let mut moved = false;
            while t >= 1e-10 {
                let mut cand = u.clone();
                axpy(&mut cand, t * scale, &d);
                let nr = defl.residual(&cand);
                if nr < res * (1.0 - 1e-4 * t) {
                    u = cand;
                    res = nr;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    let kind = if known.is_empty() { PointKind::Minimizer } else { PointKind::Deflated };
    polish(model, u, iters, kind, opts)
}

/// Newton polish from a given iterate, e.g. after prolongation onto a
/// finer mesh.
pub fn polish_point<M: EnergyModel>(
    model: &M,
    u: Vec<f64>,
    kind: PointKind,
    opts: &SolverOptions,
) -> CriticalPoint {
    polish(model, u, 0, kind, opts)
}

/// Undeflated Newton polish from `u`.
fn polish<M: EnergyModel>(
    model: &M,
    mut u: Vec<f64>,
    mut iters: usize,
    kind: PointKind,
    opts: &SolverOptions,
) -> CriticalPoint {
    let mut bound = model.stationarity_bound(&u);
    while bound > opts.tol_stat && iters < opts.max_iters {
        iters += 1;
        let g = model.gradient(&u);
        let newton = model
            .hessian(&u)
            .and_then(|(hd, ho)| {
                let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
                tridiag_solve(&hd, &ho, &rhs)
            })
            .filter(|d| {
                let slope = dot(&g, d);
                d.iter().all(|x| x.is_finite()) && slope < 0.0
            });
        let d = match newton {
            Some(d) => d,
            None => {
                let mut d = model.metric_solve(&g);
                for x in d.iter_mut() {
                    *x = -*x;
                }
                d
            }
        };
        let slope = dot(&g, &d);
        if slope >= 0.0 {
            break;
        }
        let e0 = model.energy(&u);
        let mut t = 1.0;
        let mut stepped = false;
        while t >= 1e-14 {
            let mut cand = u.clone();
            axpy(&mut cand, t, &d);
            if model.energy(&cand) <= e0 + 1e-4 * t * slope {
                u = cand;
                stepped = true;
                break;
            }
            t *= 0.5;
        }
        if !stepped {
            break;
        }
        bound = model.stationarity_bound(&u);
    }
    // Near a minimum the verifiable energy decrease per step drops below
    // the floating point resolution of the energy itself long before the
    // residual reaches the tolerance; finish on the residual instead.
    if bound > opts.tol_stat {
        let mut cp = residual_polish(model, u, opts);
        cp.iterations += iters;
        cp.kind = kind;
        return cp;
    }
    let energy = model.energy(&u);
    CriticalPoint {
        u,
        energy,
        stationarity_bound: bound,
        iterations: iters,
        converged: bound <= opts.tol_stat,
        kind,
    }
}

/// Minimize inside the metric ball `Phi <= r` (i.e. `||u|| <= sqrt(2r)`)
/// by projected preconditioned gradient. A point pinned to the boundary
/// that cannot descend tangentially is reported with `converged = false`.
pub fn ball_minimize<M: EnergyModel>(
    model: &M,
    start: &[f64],
    r: f64,
    opts: &SolverOptions,
) -> CriticalPoint {
    let radius = (2.0 * r).max(0.0).sqrt();
    let project = |u: &[f64]| -> Vec<f64> {
        let n = dot(u, &model.metric_apply(u)).max(0.0).sqrt();
        if n <= radius || n == 0.0 {
            u.to_vec()
        } else {
            u.iter().map(|x| x * radius / n).collect()
        }
    };
    let mut u = project(start);
    let mut iters = 0;
    let mut bound = model.stationarity_bound(&u);
    let mut pinned = false;
    while iters < opts.max_iters {
        iters += 1;
        let interior = model.norm(&u) < radius * (1.0 - 1e-9);
        if interior && bound <= opts.tol_stat {
            pinned = false;
            break;
        }
        let g = model.gradient(&u);
        let mut d = model.metric_solve(&g);
        for x in d.iter_mut() {
            *x = -*x;
        }
        let e0 = model.energy(&u);
        let mut t = 1.0;
        let mut moved = false;
        while t >= 1e-14 {
            let mut cand = u.clone();
            axpy(&mut cand, t, &d);
            let cand = project(&cand);
            if model.energy(&cand) < e0 - 1e-12 * (1.0 + e0.abs()) {
                u = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        bound = model.stationarity_bound(&u);
        if !moved {
            pinned = !interior || bound > opts.tol_stat;
            break;
        }
    }
    let interior = model.norm(&u) < radius * (1.0 - 1e-9);
    let energy = model.energy(&u);
    CriticalPoint {
        u,
        energy,
        stationarity_bound: bound,
        iterations: iters,
        converged: interior && bound <= opts.tol_stat && !pinned,
        kind: PointKind::BallMinimizer,
    }
}

/// String method with a climbing image, then a Newton polish on the
/// saddle estimate. The path is re-parametrized to equal metric arc
/// length after each relaxation sweep; a collapsed path is retried once
/// with twice as many images.
pub fn mountain_pass<M: EnergyModel>(
    model: &M,
    left: &[f64],
    right: &[f64],
    opts: &SolverOptions,
) -> crate::Result<CriticalPoint> {
    let gap: Vec<f64> = left.iter().zip(right).map(|(a, b)| a - b).collect();
    if model.sup_norm(&gap) < opts.sep_tol {
        return Err(crate::Error::Config(
            "mountain pass endpoints must be separated critical points".into(),
        ));
    }
    let attempt = |points: usize| -> CriticalPoint {
        let np = points.max(5);
        let mut path: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let s = i as f64 / (np - 1) as f64;
                left.iter().zip(right).map(|(l, r)| l * (1.0 - s) + r * s).collect()
            })
            .collect();
        let sweeps = 400;
        for sweep in 0..sweeps {
            // index of the current maximum (climbing image)
            let energies: Vec<f64> = path.iter().map(|z| model.energy(z)).collect();
            let i_max = (1..np - 1)
                .max_by(|&i, &j| energies[i].partial_cmp(&energies[j]).unwrap())
                .unwrap_or(np / 2);
            let climb = sweep > sweeps / 4;
            for i in 1..np - 1 {
                let g = model.gradient(&path[i]);
                let mut d = model.metric_solve(&g);
                for x in d.iter_mut() {
                    *x = -*x;
                }
                if climb && i == i_max {
                    // flip the tangential component to ascend along the path
                    let tau: Vec<f64> = path[i + 1]
                        .iter()
                        .zip(&path[i - 1])
                        .map(|(a, b)| a - b)
                        .collect();
                    let tn = dot(&tau, &model.metric_apply(&tau)).max(1e-300).sqrt();
                    let tau: Vec<f64> = tau.iter().map(|x| x / tn).collect();
                    let along = -dot(&g, &tau);
                    axpy(&mut d, -2.0 * along, &tau);
                }
                // conservative step: backtrack on the plain energy except
                // for the climbing image, which takes a bounded raw step
                if climb && i == i_max {
                    let dn = model.norm(&d);
                    let cap = 0.5 * model.norm(&path[i]).max(1.0);
                    let t = if dn > cap { cap / dn } else { 1.0 };
                    axpy(&mut path[i], 0.2 * t, &d);
                } else {
                    let e0 = energies[i];
                    let slope = dot(&g, &d);
                    let mut t = 0.5f64;
                    while t >= 1e-10 {
                        let mut cand = path[i].clone();
                        axpy(&mut cand, t, &d);
                        if model.energy(&cand) <= e0 + 1e-4 * t * slope.min(0.0) {
                            path[i] = cand;
                            break;
                        }
                        t *= 0.5;
                    }
                }
            }
            // equal arc length re-parametrization (skip the climbing image
            // once climbing is active so it can straddle the ridge)
            let mut lens = vec![0.0; np];
            for i in 1..np {
                let d: Vec<f64> =
                    path[i].iter().zip(&path[i - 1]).map(|(a, b)| a - b).collect();
                lens[i] = lens[i - 1] + model.norm(&d);
            }
            let total = lens[np - 1];
            if total > 1e-300 {
                let old = path.clone();
                for i in 1..np - 1 {
                    if climb && i == i_max {
                        continue;
                    }
                    let target = total * i as f64 / (np - 1) as f64;
                    let j = lens.partition_point(|&l| l < target).clamp(1, np - 1);
                    let seg = (lens[j] - lens[j - 1]).max(1e-300);
                    let s = (target - lens[j - 1]) / seg;
                    path[i] = old[j - 1]
                        .iter()
                        .zip(&old[j])
                        .map(|(a, b)| a * (1.0 - s) + b * s)
                        .collect();
                }
            }
        }
        let energies: Vec<f64> = path.iter().map(|z| model.energy(z)).collect();
        let i_max = (0..np)
            .max_by(|&i, &j| energies[i].partial_cmp(&energies[j]).unwrap())
            .unwrap();
        let saddle = path[i_max.clamp(1, np - 2)].clone();
        let mut cp = residual_polish(model, saddle, opts);
        cp.kind = PointKind::MountainPass;
        // a pass point should not fall below either endpoint energy
        let floor = model.energy(left).max(model.energy(right));
        if cp.energy < floor - 1e-9 * (1.0 + floor.abs()) {
            cp.converged = false;
        }
        cp
    };
    let first = attempt(opts.path_points);
    if first.converged {
        return Ok(first);
    }
    let second = attempt(opts.path_points * 2);
    Ok(if second.converged {
        second
    } else if first.stationarity_bound <= second.stationarity_bound {
        first
    } else {
        second
    })
}

/// Newton iteration on `grad = 0` without a descent requirement;
/// accepts steps only while the residual shrinks. Suitable for refining
/// saddle points, where energy descent would walk away.
pub fn residual_polish<M: EnergyModel>(model: &M, mut u: Vec<f64>, opts: &SolverOptions) -> CriticalPoint {
    let mut bound = model.stationarity_bound(&u);
    let mut iters = 0;
    while bound > opts.tol_stat && iters < opts.max_iters {
        iters += 1;
        let g = model.gradient(&u);
        let step = model.hessian(&u).and_then(|(hd, ho)| {
            let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
            tridiag_solve(&hd, &ho, &rhs)
        });
        let d = match step {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => break,
        };
        let mut t = 1.0;
        let mut improved = false;
        while t >= 1e-10 {
            let mut cand = u.clone();
            axpy(&mut cand, t, &d);
            let nb = model.stationarity_bound(&cand);
            if nb < bound {
                u = cand;
                bound = nb;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let energy = model.energy(&u);
    CriticalPoint {
        u,
        energy,
        stationarity_bound: bound,
        iterations: iters,
        converged: bound <= opts.tol_stat,
        kind: PointKind::MountainPass,
    }
}

/// Result of the multistart search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub points: Vec<CriticalPoint>,
    /// True when fewer than three distinct critical points were found
    /// within the multistart budget.
    pub shortfall: bool,
    pub starts_used: usize,
}

/// Find at least three distinct critical points: ball minimizer from
/// zero, descent minimizer from wedge starts, mountain pass between them,
/// then deflated descents from the remaining multistart budget.
pub fn find_three(
    problem: &DiscreteProblem,
    ball_radius: f64,
    d_scale: f64,
    opts: &SolverOptions,
) -> SearchResult {
    let dim = problem.dim();
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut starts_used = 0;
    let distinct = |points: &[CriticalPoint], u: &[f64], model: &DiscreteProblem| {
        points.iter().all(|p| {
            let d: Vec<f64> = p.u.iter().zip(u).map(|(a, b)| a - b).collect();
            model.sup_norm(&d) > opts.sep_tol
        })
    };

    // 1. constrained minimizer in the small ball
    starts_used += 1;
    let ball = ball_minimize(problem, &vec![0.0; dim], ball_radius, opts);
    if ball.converged {
        points.push(ball);
    }

    // 2. descent from wedge-shaped starts
    let wedge = problem.space.wedge(d_scale).coeffs;
    let mut wedge_starts: Vec<Vec<f64>> = Vec::new();
    for scale in [1.0, 0.5, 2.0, 0.25, -1.0, -0.5, -2.0, -0.25] {
        wedge_starts.push(wedge.iter().map(|x| x * scale).collect());
    }
    for start in &wedge_starts {
        if points.len() >= 3 || starts_used >= opts.budget {
            break;
        }
        starts_used += 1;
        let cp = descend(problem, start, &[], opts);
        if cp.converged && distinct(&points, &cp.u, problem) {
            points.push(cp);
        }
    }

    // 3. mountain pass between the two lowest distinct points
    if points.len() >= 2 && starts_used < opts.budget {
        starts_used += 1;
        let (a, b) = (points[0].u.clone(), points[1].u.clone());
        if let Ok(cp) = mountain_pass(problem, &a, &b, opts) {
            if cp.converged && distinct(&points, &cp.u, problem) {
                points.push(cp);
            }
        }
    }

    // 4. deflated random multistarts for whatever is still missing
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while points.len() < 3 && starts_used < opts.budget {
        starts_used += 1;
        let start: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(-2.0 * d_scale..2.0 * d_scale))
            .collect();
        let known: Vec<Vec<f64>> = points.iter().map(|p| p.u.clone()).collect();
        let cp = descend(problem, &start, &known, opts);
        if cp.converged && distinct(&points, &cp.u, problem) {
            points.push(cp);
        }
    }

    points.sort_by(|x, y| x.energy.partial_cmp(&y.energy).unwrap());
    let shortfall = points.len() < 3;
    SearchResult { points, shortfall, starts_used }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::piecewise::PiecewiseScalar;
    use crate::setvalued::{resolve_selection, SelectionKind};

    /// One-dimensional double well `(u^2 - 1)^2` with identity metric.
    struct DoubleWell;

    impl EnergyModel for DoubleWell {
        fn dim(&self) -> usize {
            1
        }
        fn energy(&self, u: &[f64]) -> f64 {
            let v = u[0] * u[0] - 1.0;
            v * v
        }
        fn gradient(&self, u: &[f64]) -> Vec<f64> {
            vec![4.0 * u[0] * (u[0] * u[0] - 1.0)]
        }
        fn hessian(&self, u: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
            Some((vec![12.0 * u[0] * u[0] - 4.0], vec![]))
        }
        fn metric_apply(&self, v: &[f64]) -> Vec<f64> {
            v.to_vec()
        }
        fn metric_solve(&self, v: &[f64]) -> Vec<f64> {
            v.to_vec()
        }
    }

    fn one() -> PiecewiseScalar {
        PiecewiseScalar::constant(1.0)
    }

    fn ex1_map() -> IntervalMap {
        let lo = PiecewiseScalar::new(
            vec![0.0, 1.0],
            vec![
                Expr::parse("0").unwrap(),
                Expr::parse("t^2").unwrap(),
                Expr::parse("sqrt(t)").unwrap(),
            ],
        )
        .unwrap();
        let hi = PiecewiseScalar::new(
            vec![0.0, 1.0],
            vec![
                Expr::parse("0").unwrap(),
                Expr::parse("sqrt(t)").unwrap(),
                Expr::parse("t^2").unwrap(),
            ],
        )
        .unwrap();
        IntervalMap::new(lo, hi).unwrap()
    }

    #[test]
    fn descend_double_well_finds_minimum() {
        let opts = SolverOptions::default();
        let cp = descend(&DoubleWell, &[0.6], &[], &opts);
        assert!(cp.converged);
        assert!((cp.u[0].abs() - 1.0).abs() < 1e-7, "{}", cp.u[0]);
        assert!(cp.energy.abs() < 1e-12);
    }

    #[test]
    fn mountain_pass_double_well_saddle() {
        let opts = SolverOptions::default();
        let cp = mountain_pass(&DoubleWell, &[-1.0], &[1.0], &opts).unwrap();
        assert!(cp.converged, "bound {}", cp.stationarity_bound);
        assert!(cp.u[0].abs() < 1e-6, "{}", cp.u[0]);
        assert!((cp.energy - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mountain_pass_rejects_coincident_endpoints() {
        let opts = SolverOptions::default();
        assert!(mountain_pass(&DoubleWell, &[1.0], &[1.0], &opts).is_err());
    }

    #[test]
    fn deflation_finds_a_second_minimum() {
        let opts = SolverOptions::default();
        let first = descend(&DoubleWell, &[0.6], &[], &opts);
        let second = descend(&DoubleWell, &[0.6], &[first.u.clone()], &opts);
        assert!(second.converged);
        assert!((second.u[0] - first.u[0]).abs() > opts.sep_tol, "{} vs {}", second.u[0], first.u[0]);
    }

    #[test]
    fn stationarity_qp_matches_brute_force() {
        // tiny space: 3 elements, midpoint quadrature -> 3 multiplier
        // variables, small enough for a dense grid scan of the boxes
        let map = ex1_map();
        let pe = resolve_selection(&map, &SelectionKind::Min).unwrap();
        let sp = DiscreteSpace::new(0.0, 1.0, 3, 1, &one(), &one()).unwrap();
        let problem = DiscreteProblem { space: &sp, map: &map, pe: &pe, lambda: 10.0 };
        let u = vec![0.5, 1.0, 1.5];
        let result = problem.stationarity(&u);

        let qp = sp.quad_points_for(&DiscreteFunction { coeffs: u.clone() }, pe.f().breakpoints());
        assert_eq!(qp.len(), 3);
        let df = DiscreteFunction { coeffs: u.clone() };
        let g0 = sp.a_apply(&u);
        let nodes = sp.nodes();
        let boxes: Vec<(f64, f64)> = qp
            .iter()
            .map(|&(_, x, _)| {
                let (l, h) = map.at(sp.eval(&df, x));
                (l.min(h), l.max(h))
            })
            .collect();
        let mut best = f64::INFINITY;
        let grid = 50;
        for i in 0..=grid {
            for j in 0..=grid {
                for k in 0..=grid {
                    let w = [
                        boxes[0].0 + (boxes[0].1 - boxes[0].0) * i as f64 / grid as f64,
                        boxes[1].0 + (boxes[1].1 - boxes[1].0) * j as f64 / grid as f64,
                        boxes[2].0 + (boxes[2].1 - boxes[2].0) * k as f64 / grid as f64,
                    ];
                    let mut r = g0.clone();
                    for (q, &(e, x, wt)) in qp.iter().enumerate() {
                        let h = nodes[e + 1] - nodes[e];
                        let s = (x - nodes[e]) / h;
                        if e > 0 {
                            r[e - 1] -= 10.0 * wt * w[q] * (1.0 - s);
                        }
                        r[e] -= 10.0 * wt * w[q] * s;
                    }
                    let v = super::dot(&r, &sp.a_solve(&r)).max(0.0).sqrt();
                    best = best.min(v);
                }
            }
        }
        assert!(
            (result.measure - best).abs() <= 1e-3 * (1.0 + best),
            "qp {} vs brute {best}",
            result.measure
        );
        assert!(result.measure <= best + 1e-9);
    }

    #[test]
    fn stationarity_bounded_by_selection_residual() {
        let map = ex1_map();
        let pe = resolve_selection(&map, &SelectionKind::Min).unwrap();
        let sp = DiscreteSpace::new(0.0, 1.0, 16, 4, &one(), &one()).unwrap();
        let problem = DiscreteProblem { space: &sp, map: &map, pe: &pe, lambda: 10.0 };
        let u: Vec<f64> = (0..sp.dim()).map(|i| 0.1 * i as f64).collect();
        let measure = problem.stationarity(&u).measure;
        let bound = problem.stationarity_bound(&u);
        assert!(measure <= bound * (1.0 + 1e-9), "measure {measure} bound {bound}");
    }

    #[test]
    fn zero_reaction_yields_single_point_and_shortfall() {
        let zero_map = crate::setvalued::IntervalMap::single_valued(PiecewiseScalar::constant(0.0))
            .unwrap();
        let pe = resolve_selection(&zero_map, &SelectionKind::Min).unwrap();
        let sp = DiscreteSpace::new(0.0, 1.0, 16, 4, &one(), &one()).unwrap();
        let problem = DiscreteProblem { space: &sp, map: &zero_map, pe: &pe, lambda: 10.0 };
        let opts = SolverOptions { budget: 12, ..Default::default() };
        let res = find_three(&problem, 0.005, 1.0, &opts);
        assert!(res.shortfall);
        assert_eq!(res.points.len(), 1);
        assert!(problem.sup_norm(&res.points[0].u) < 1e-7);
    }

    #[test]
    fn odd_reaction_gives_negated_critical_points() {
        // f(t) = t - t^3 is odd, so the critical set is symmetric
        let fmap =
            crate::setvalued::IntervalMap::single_valued(PiecewiseScalar::parse_single("t - t^3").unwrap())
                .unwrap();
        let pe = resolve_selection(&fmap, &SelectionKind::Min).unwrap();
        let sp = DiscreteSpace::new(0.0, 1.0, 32, 4, &one(), &one()).unwrap();
        let problem = DiscreteProblem { space: &sp, map: &fmap, pe: &pe, lambda: 8.0 };
        let opts = SolverOptions::default();
        let start = sp.wedge(0.8).coeffs;
        let neg: Vec<f64> = start.iter().map(|x| -x).collect();
        let cp_pos = descend(&problem, &start, &[], &opts);
        let cp_neg = descend(&problem, &neg, &[], &opts);
        assert!(cp_pos.converged && cp_neg.converged);
        for (a, b) in cp_pos.u.iter().zip(&cp_neg.u) {
            assert!((a + b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn ball_minimizer_stays_inside() {
        let map = ex1_map();
        let pe = resolve_selection(&map, &SelectionKind::Min).unwrap();
        let sp = DiscreteSpace::new(0.0, 1.0, 32, 4, &one(), &one()).unwrap();
        let problem = DiscreteProblem { space: &sp, map: &map, pe: &pe, lambda: 10.0 };
        let opts = SolverOptions::default();
        let r = 0.005;
        let cp = ball_minimize(&problem, &vec![0.0; sp.dim()], r, &opts);
        assert!(problem.phi(&cp.u) <= r * (1.0 + 1e-9));
    }
}
