//! Batch front-end: load a config, run one of the pipelines
//! (check / window / solve / sweep / certify) and write machine-readable
//! artifacts under `out/<run-id>/`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::certify::{certify, SolutionCertificate};
use crate::config::{LambdaSpec, Mode, Problem, RunConfig};
use crate::error::{Error, Result};
use crate::fem::{DiscreteFunction, DiscreteSpace};
use crate::hypotheses::{
    check_h1, check_h2, compute_window, profile_test_function, HypothesisReport,
    MultiplicityWindow, TestFunctionProfile, Verdict,
};
use crate::jsonout::{csv_row, fmt_f64, J};
use crate::setvalued::{resolve_selection, PotentialEval};
use crate::solver::{find_three, CriticalPoint, DiscreteProblem, SolverOptions};

/// Command line flag values that override config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub require_three: bool,
    pub inside_window: bool,
    pub out: Option<PathBuf>,
}

/// Exit codes: 0 all requested verdicts pass, 1 numerical shortfall or
/// failed verdicts (diagnostics as JSON on stderr), 2 config violations.
pub fn run(mode: &str, config_path: &Path, ov: &Overrides) -> i32 {
    match run_inner(mode, config_path, ov) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) | Err(e @ Error::Json(_)) => {
            eprintln!("{}: {e}", config_path.display());
            2
        }
        Err(e) => {
            eprintln!(
                "{}",
                J::Obj(vec![("error", J::s(e.to_string()))]).render().trim_end()
            );
            1
        }
    }
}

fn run_inner(mode: &str, config_path: &Path, ov: &Overrides) -> Result<i32> {
    let mode: Mode = mode.parse()?;
    let src = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read config: {e}")))?;
    let mut cfg = RunConfig::from_json(&src)?;
    if let Some(l) = ov.lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("--lambda: requires lambda > 0, got {l}")));
        }
        cfg.lambda = Some(LambdaSpec::Scalar(l));
    }
    if let Some(n) = ov.n {
        if n == 0 {
            return Err(Error::Config("--n: requires at least one element".into()));
        }
        cfg.mesh.n = n;
    }
    if let Some(seed) = ov.seed {
        cfg.solver.seed = seed;
    }
    if let Some(out) = &ov.out {
        cfg.output.dir = out.clone();
    }

    let stem = config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run");
    let run_id = format!("{stem}-{}", mode.name());
    let dir = cfg.output.dir.join(&run_id);
    fs::create_dir_all(&dir)?;

    let pipeline = Pipeline::new(&cfg)?;
    match mode {
        Mode::Check => {
            write(&dir.join("check.json"), &hyp_json(&pipeline.report).render())?;
            Ok(if pipeline.report.pass { 0 } else { 1 })
        }
        Mode::Window => {
            let body = pipeline.window_artifact();
            write(&dir.join("window.json"), &body.render())?;
            Ok(if pipeline.report.pass && pipeline.window.is_some() { 0 } else { 1 })
        }
        Mode::Solve => {
            let lambda = pipeline.single_lambda(&cfg)?;
            write(&dir.join("window.json"), &pipeline.window_artifact().render())?;
            if ov.inside_window && !pipeline.lambda_inside(lambda) {
                return Err(Error::Config(format!(
                    "lambda: {lambda} is outside the computed window \
                     (--inside-window)"
                )));
            }
            let outcome = pipeline.solve(&cfg, lambda, &dir)?;
            summary_csv(&dir.join("summary.csv"), &[(lambda, &outcome)])?;
            Ok(exit_for(&[outcome], ov.require_three))
        }
        Mode::Sweep => {
            let spec = cfg
                .lambda
                .clone()
                .ok_or_else(|| Error::Config("lambda: required in sweep mode".into()))?;
            if ov.inside_window {
                let (lo, hi) = spec.bounds();
                match &pipeline.window {
                    Some(w) if w.contains(lo) && w.contains(hi) => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "lambda: sweep bounds [{lo}, {hi}] must lie inside the \
                             computed window (--inside-window)"
                        )))
                    }
                }
            }
            write(&dir.join("window.json"), &pipeline.window_artifact().render())?;
            let samples = spec.samples();
            let outcomes = run_sweep(&pipeline, &cfg, &samples, &dir)?;
            let rows: Vec<(f64, &SolveOutcome)> =
                samples.iter().copied().zip(outcomes.iter()).collect();
            summary_csv(&dir.join("summary.csv"), &rows)?;
            Ok(exit_for(&outcomes, ov.require_three))
        }
        Mode::Certify => {
            let lambda = pipeline.single_lambda(&cfg)?;
            let solve_dir = cfg.output.dir.join(format!("{stem}-solve"));
            pipeline.recertify(&cfg, lambda, &solve_dir, &dir, ov.require_three)
        }
    }
}

/// Shared per-run state: hypotheses, window and the resolved selection.
struct Pipeline<'a> {
    problem: &'a Problem,
    pe: PotentialEval,
    report: HypothesisReport,
    window: Option<MultiplicityWindow>,
    profile: Option<TestFunctionProfile>,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Pipeline<'a>> {
        let pr = &cfg.problem;
        let pe = resolve_selection(&pr.map, &pr.selection)?;
        let report = match &pr.discontinuous {
            Some(g) => check_h2(g, &pr.growth, pr.c, pr.d, pr.a, pr.b)?,
            None => check_h1(
                &pr.map,
                &pr.selection,
                &pr.growth,
                pr.c,
                pr.d,
                &pr.p,
                &pr.q,
                pr.a,
                pr.b,
            )?,
        };
        let window = if report.pass { Some(compute_window(&report)?) } else { None };
        let profile = match &window {
            Some(w) => Some(profile_test_function(&pr.p, &pr.q, pr.a, pr.b, &pe, w)?),
            None => None,
        };
        Ok(Pipeline { problem: pr, pe, report, window, profile })
    }

    fn single_lambda(&self, cfg: &RunConfig) -> Result<f64> {
        match &cfg.lambda {
            Some(LambdaSpec::Scalar(x)) => Ok(*x),
            Some(LambdaSpec::Range { .. }) => {
                Err(Error::Config("lambda: this mode needs a scalar lambda".into()))
            }
            None => Err(Error::Config("lambda: required in this mode".into())),
        }
    }

    fn lambda_inside(&self, lambda: f64) -> bool {
        self.window.as_ref().map_or(false, |w| w.contains(lambda))
    }

    fn space(&self, cfg: &RunConfig) -> Result<DiscreteSpace> {
        DiscreteSpace::new(
            self.problem.a,
            self.problem.b,
            cfg.mesh.n,
            cfg.mesh.quad_order,
            &self.problem.p,
            &self.problem.q,
        )
    }

    fn solver_options(&self, cfg: &RunConfig) -> SolverOptions {
        SolverOptions {
            tol_stat: cfg.solver.tol_stat,
            sep_tol: cfg.solver.sep_tol,
            budget: cfg.solver.budget,
            seed: cfg.solver.seed,
            path_points: cfg.solver.path_points,
            max_iters: cfg.solver.max_iters,
        }
    }

    fn ball_radius(&self) -> f64 {
        match &self.window {
            Some(w) => w.r,
            None => {
                let p0 = self.report.bounds.p0;
                self.problem.c * self.problem.c * p0
                    / (2.0 * (self.problem.b - self.problem.a))
            }
        }
    }

    fn window_artifact(&self) -> J {
        let mut fields = vec![("hypotheses", hyp_json(&self.report))];
        match &self.window {
            Some(w) => fields.push(("window", window_json(w))),
            None => fields.push(("window", J::Null)),
        }
        match &self.profile {
            Some(p) => fields.push(("test_function", profile_json(p))),
            None => fields.push(("test_function", J::Null)),
        }
        J::Obj(fields)
    }

    /// One full solve at a fixed lambda, writing the per-point artifacts.
    fn solve(&self, cfg: &RunConfig, lambda: f64, dir: &Path) -> Result<SolveOutcome> {
        let space = self.space(cfg)?;
        let dp = DiscreteProblem {
            space: &space,
            map: &self.problem.map,
            pe: &self.pe,
            lambda,
        };
        let opts = self.solver_options(cfg);
        let search = find_three(&dp, self.ball_radius(), self.problem.d, &opts);
        let csv = cfg.output.formats.iter().any(|f| f == "csv");

        let mut certs = Vec::new();
        for (k, point) in search.points.iter().enumerate() {
            let cert = if point.converged {
                Some(certify(&dp, point, &self.problem.p, &self.problem.q, cfg.solver.tol_weak)?)
            } else {
                None
            };
            let stat = match &cert {
                Some(c) => c.weak_residual,
                None => dp.stationarity(&point.u).measure,
            };
            write(
                &dir.join(format!("report-{k}.json")),
                &point_json(point, stat, k).render(),
            )?;
            if let Some(c) = &cert {
                write(&dir.join(format!("certificate-{k}.json")), &cert_json(c).render())?;
            }
            if csv {
                write(
                    &dir.join(format!("profile-{k}.csv")),
                    &profile_csv(&space, point),
                )?;
            }
            certs.push(cert);
        }
        Ok(SolveOutcome {
            found: search.points.len(),
            certified: certs.iter().flatten().filter(|c| c.verdict).count(),
            shortfall: search.shortfall,
            all_verdicts_pass: certs.iter().flatten().all(|c| c.verdict)
                && certs.iter().all(|c| c.is_some()),
            energies: search.points.iter().map(|p| p.energy).collect(),
        })
    }

    /// Re-certify stored solve profiles against the current mesh.
    fn recertify(
        &self,
        cfg: &RunConfig,
        lambda: f64,
        solve_dir: &Path,
        dir: &Path,
        require_three: bool,
    ) -> Result<i32> {
        let space = self.space(cfg)?;
        let dp = DiscreteProblem {
            space: &space,
            map: &self.problem.map,
            pe: &self.pe,
            lambda,
        };
        let mut k = 0usize;
        let mut certified = 0usize;
        let mut all_pass = true;
        loop {
            let profile = solve_dir.join(format!("profile-{k}.csv"));
            if !profile.is_file() {
                break;
            }
            let samples = read_profile_csv(&profile)?;
            let u = space.interpolate(|x| interp_samples(&samples, x));
            let point = CriticalPoint {
                u: u.coeffs,
                energy: 0.0,
                stationarity_bound: 0.0,
                iterations: 0,
                converged: true,
                kind: crate::solver::PointKind::Minimizer,
            };
            let cert = certify(&dp, &point, &self.problem.p, &self.problem.q, cfg.solver.tol_weak)?;
            write(&dir.join(format!("certificate-{k}.json")), &cert_json(&cert).render())?;
            if cert.verdict {
                certified += 1;
            } else {
                all_pass = false;
            }
            k += 1;
        }
        if k == 0 {
            return Err(Error::Config(format!(
                "certify mode found no stored profiles under {}",
                solve_dir.display()
            )));
        }
        Ok(if all_pass && (!require_three || certified >= 3) { 0 } else { 1 })
    }
}

#[derive(Debug, Clone)]
struct SolveOutcome {
    found: usize,
    certified: usize,
    shortfall: bool,
    all_verdicts_pass: bool,
    energies: Vec<f64>,
}

fn exit_for(outcomes: &[SolveOutcome], require_three: bool) -> i32 {
    let ok = outcomes.iter().all(|o| {
        o.all_verdicts_pass && (!require_three || (o.certified >= 3 && !o.shortfall))
    });
    if ok {
        0
    } else {
        for o in outcomes.iter().filter(|o| !o.all_verdicts_pass || o.shortfall) {
            eprintln!(
                "{}",
                J::Obj(vec![
                    ("error", J::s("numerical shortfall")),
                    ("found", J::Int(o.found as i64)),
                    ("certified", J::Int(o.certified as i64)),
                    ("shortfall", J::Bool(o.shortfall)),
                ])
                .render()
                .trim_end()
            );
        }
        1
    }
}

/// Sweep samples on a worker pool capped by `ODI_SOLVE_THREADS`.
fn run_sweep(
    pipeline: &Pipeline,
    cfg: &RunConfig,
    samples: &[f64],
    dir: &Path,
) -> Result<Vec<SolveOutcome>> {
    use rayon::prelude::*;
    let threads = std::env::var("ODI_SOLVE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let work = |(i, &lambda): (usize, &f64)| -> Result<SolveOutcome> {
        let sub = dir.join(format!("sample-{i:02}"));
        fs::create_dir_all(&sub)?;
        pipeline.solve(cfg, lambda, &sub)
    };
    let results: Vec<Result<SolveOutcome>> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(|| samples.par_iter().enumerate().map(work).collect()),
        None => samples.par_iter().enumerate().map(work).collect(),
    };
    results.into_iter().collect()
}

fn summary_csv(path: &Path, rows: &[(f64, &SolveOutcome)]) -> Result<()> {
    let mut body = String::from("lambda,found,certified,shortfall,e0,e1,e2\n");
    for (lambda, o) in rows {
        let mut cells = vec![fmt_f64(*lambda), o.found.to_string(), o.certified.to_string()];
        cells.push(if o.shortfall { "1".into() } else { "0".into() });
        for k in 0..3 {
            cells.push(o.energies.get(k).map(|&e| fmt_f64(e)).unwrap_or_default());
        }
        body.push_str(&cells.join(","));
        body.push('\n');
    }
    write(path, &body)
}

fn profile_csv(space: &DiscreteSpace, point: &CriticalPoint) -> String {
    let u = DiscreteFunction { coeffs: point.u.clone() };
    let nodes = space.nodes();
    let mut body = String::from("x,u,du_left\n");
    for (i, &x) in nodes.iter().enumerate() {
        // left one-sided slope; the first node reports the first element's
        let e = if i == 0 { 0 } else { i - 1 };
        let slope =
            (space.eval(&u, nodes[e + 1]) - space.eval(&u, nodes[e])) / (nodes[e + 1] - nodes[e]);
        body.push_str(&csv_row(&[x, space.eval(&u, x), slope]));
    }
    body
}

fn read_profile_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let src = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate().skip(1) {
        let mut cols = line.split(',');
        let x = cols.next().and_then(|c| c.parse::<f64>().ok());
        let u = cols.next().and_then(|c| c.parse::<f64>().ok());
        match (x, u) {
            (Some(x), Some(u)) => out.push((x, u)),
            _ => {
                return Err(Error::Parse {
                    pos: ln,
                    msg: format!("{}: malformed profile row", path.display()),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Parse { pos: 0, msg: format!("{}: empty profile", path.display()) });
    }
    Ok(out)
}

fn interp_samples(samples: &[(f64, f64)], x: f64) -> f64 {
    let n = samples.len();
    if x <= samples[0].0 {
        return samples[0].1;
    }
    if x >= samples[n - 1].0 {
        return samples[n - 1].1;
    }
    let j = samples.partition_point(|&(sx, _)| sx < x).clamp(1, n - 1);
    let (x0, u0) = samples[j - 1];
    let (x1, u1) = samples[j];
    let s = (x - x0) / (x1 - x0).max(1e-300);
    u0 * (1.0 - s) + u1 * s
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body)?;
    Ok(())
}

fn verdict_json(v: &Verdict) -> J {
    match v {
        Verdict::Pass => J::Obj(vec![("verdict", J::s("pass"))]),
        Verdict::Fail { witness_t } => J::Obj(vec![
            ("verdict", J::s("fail")),
            ("witness_t", J::Num(*witness_t)),
        ]),
        Verdict::Inconclusive { reason } => J::Obj(vec![
            ("verdict", J::s("inconclusive")),
            ("reason", J::s(reason.clone())),
        ]),
    }
}

fn hyp_json(r: &HypothesisReport) -> J {
    J::Obj(vec![
        ("a", J::Num(r.a)),
        ("b", J::Num(r.b)),
        ("c", J::Num(r.c)),
        ("d", J::Num(r.d)),
        (
            "bounds",
            J::Obj(vec![
                ("p0", J::Num(r.bounds.p0)),
                ("p_sup", J::Num(r.bounds.p_sup)),
                ("q_inf", J::Num(r.bounds.q_inf)),
                ("q_sup", J::Num(r.bounds.q_sup)),
            ]),
        ),
        ("k", J::Num(r.k)),
        ("growth", verdict_json(&r.growth)),
        ("positivity", verdict_json(&r.positivity)),
        ("m_c", J::Num(r.m_c)),
        ("jf_d", J::Num(r.jf_d)),
        ("ratio_lhs", J::Num(r.ratio_lhs)),
        ("ratio_rhs", J::Num(r.ratio_rhs)),
        ("ratio_ok", J::Bool(r.ratio_ok)),
        ("pass", J::Bool(r.pass)),
    ])
}

fn window_json(w: &MultiplicityWindow) -> J {
    J::Obj(vec![
        ("c", J::Num(w.c)),
        ("d", J::Num(w.d)),
        ("k", J::Num(w.k)),
        ("r", J::Num(w.r)),
        ("lambda_lo", J::Num(w.lambda_lo)),
        ("lambda_hi", J::Num(w.lambda_hi)),
    ])
}

fn profile_json(p: &TestFunctionProfile) -> J {
    J::Obj(vec![
        ("d", J::Num(p.d)),
        ("phi_bar", J::Num(p.phi_bar)),
        ("psi_bar", J::Num(p.psi_bar)),
        ("psi_bar_lower", J::Num(p.psi_bar_lower)),
        ("phi_lower", J::Num(p.phi_lower)),
        ("phi_upper", J::Num(p.phi_upper)),
    ])
}

fn point_json(p: &CriticalPoint, stationarity: f64, k: usize) -> J {
    J::Obj(vec![
        ("kind", J::s(p.kind.label())),
        ("energy", J::Num(p.energy)),
        ("stationarity", J::Num(stationarity)),
        ("iterations", J::Int(p.iterations as i64)),
        ("converged", J::Bool(p.converged)),
        ("coefficients", J::s(format!("profile-{k}.csv"))),
    ])
}

fn cert_json(c: &SolutionCertificate) -> J {
    J::Obj(vec![
        ("lambda", J::Num(c.lambda)),
        ("energy", J::Num(c.energy)),
        ("phi", J::Num(c.phi)),
        ("psi", J::Num(c.psi)),
        ("sup_norm", J::Num(c.sup_norm)),
        ("weak_residual", J::Num(c.weak_residual)),
        ("membership_violation", J::Num(c.membership_violation)),
        ("bc_left", J::Num(c.bc_left)),
        ("bc_residual", J::Num(c.bc_residual)),
        ("bc_gate", J::Num(c.bc_gate)),
        ("classical_residual", J::Num(c.classical_residual)),
        ("sticking_measure", J::Num(c.sticking_measure)),
        ("sticking_flagged", J::Bool(c.sticking_flagged)),
        ("verdict", J::Bool(c.verdict)),
    ])
}
