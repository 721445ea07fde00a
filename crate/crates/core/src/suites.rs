//! Property suites run by `ddetc verify` and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::DataWindow;
use crate::error::{Error, Result};
use crate::experiment::{simulate, RunSummary};
use crate::hybrid::{ControlMode, EngineConfig, Trajectory};
use crate::linalg::{Mat, SymMat};
use crate::monitor::DiagnosticsReport;
use crate::plant::LtvPlant;
use crate::proximity::{contains, ellipsoid_params, min_inflation};
use crate::sdp::{solve_feasibility, solve_maxdet, AffineMatFn, SdpProblem, SdpStatus, SolverOptions};
use crate::synthesis::{solver_margins, verify_property, ControllerBundle};

pub const SUITES: &[&str] = &["lemma3", "property1", "lemma5", "prop3", "solver"];

/// Seed and initial state shared by the reference scenarios.
pub const REFERENCE_SEED: u64 = 42;
pub const REFERENCE_X0: [f64; 2] = [1.0, 1.0];
/// Seeds of the time-triggered comparison.
pub const TT_SEEDS: [u64; 5] = [42, 43, 44, 45, 46];

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport { suite: suite.to_string(), checks: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("[{}] {}/{}: {}\n", if c.passed { "PASS" } else { "FAIL" }, self.suite, c.name, c.detail));
        }
        s
    }
}

/// One simulated reference scenario.
#[derive(Clone, Debug)]
pub struct ReferenceRun {
    pub name: String,
    pub plant: LtvPlant,
    pub cfg: EngineConfig,
    pub traj: Trajectory,
    pub diag: DiagnosticsReport,
    pub summary: RunSummary,
}

fn reference_cfg(mode: ControlMode, seed: u64) -> EngineConfig {
    let mut cfg = EngineConfig::new(4, REFERENCE_X0.to_vec());
    cfg.seed = seed;
    cfg.mode = mode;
    cfg
}

/// Scenario definitions: (name, plant, engine config).
pub fn reference_scenarios() -> Result<Vec<(String, LtvPlant, EngineConfig)>> {
    let et = ControlMode::EventTriggered;
    let s = REFERENCE_SEED;
    let mut out = vec![
        ("switching_l1_event".to_string(), LtvPlant::switching(12, 1.0)?, reference_cfg(et, s)),
        ("switching_l1_fixed".to_string(), LtvPlant::switching(12, 1.0)?, reference_cfg(ControlMode::Fixed, s)),
        ("switching_l2.5_fixed".to_string(), LtvPlant::switching(12, 2.5)?, reference_cfg(ControlMode::Fixed, s)),
    ];
    for p in [10.0, 20.0, 40.0] {
        out.push((format!("sinusoidal_p{p}_event"), LtvPlant::sinusoidal(p, 0.8)?, reference_cfg(et, s)));
    }
    out.push(("vanishing_p10_event".to_string(), LtvPlant::vanishing(10.0, 30.0)?, reference_cfg(et, s)));
    for np in [8u64, 12, 16] {
        for seed in TT_SEEDS {
            out.push((
                format!("switching_l1_time{np}_seed{seed}"),
                LtvPlant::switching(12, 1.0)?,
                reference_cfg(ControlMode::TimeTriggered { period: np }, seed),
            ));
        }
    }
    Ok(out)
}

/// Simulates every reference scenario in parallel, in definition order.
pub fn reference_runs() -> Result<Vec<ReferenceRun>> {
    reference_scenarios()?
        .into_par_iter()
        .map(|(name, plant, cfg)| {
            let (traj, diag, summary) = simulate(&name, &plant, &cfg)?;
            Ok(ReferenceRun { name, plant, cfg, traj, diag, summary })
        })
        .collect()
}

fn bundles(runs: &[ReferenceRun]) -> Vec<(&str, usize, &ControllerBundle)> {
    runs.iter()
        .flat_map(|r| r.traj.bundles.iter().enumerate().filter(|(_, b)| !b.is_fallback()).map(move |(i, b)| (r.name.as_str(), i, b)))
        .collect()
}

/// Full windows (every column generated by the plant) with the `F` in force.
fn full_windows(r: &ReferenceRun) -> Vec<(&DataWindow, &SymMat)> {
    let t = r.traj.window_width as u64;
    r.traj
        .windows
        .iter()
        .zip(&r.traj.records)
        .filter(|(w, rec)| w.kappa() >= t + r.cfg.kappa0 && !r.traj.bundles[rec.bundle].is_fallback())
        .map(|(w, rec)| (w, &r.traj.bundles[rec.bundle].f))
        .collect()
}

fn event_runs(runs: &[ReferenceRun]) -> Vec<&ReferenceRun> {
    runs.iter().filter(|r| r.cfg.mode == ControlMode::EventTriggered).collect()
}

/// Data consistency, hand values, set membership and inflation certificates.
pub fn suite_lemma3(runs: &[ReferenceRun], samples_per_window: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lemma3");

    let w = DataWindow::from_parts(0, Mat::from_rows(&[&[1.0, 0.5]]), Mat::from_rows(&[&[0.5, 0.25]]), Mat::zeros(1, 2))?;
    let f = SymMat::from_diag(&[0.01]);
    let e = ellipsoid_params(&w, &f)?;
    let eps = min_inflation(&w, &f, &SymMat::identity(1), &Mat::from_rows(&[&[0.7]]), &Mat::from_rows(&[&[0.3]]))?;
    let dz = (e.zc[(0, 0)] - 0.5).abs().max(e.zc[(1, 0)].abs());
    let dd = (e.delta.get(0, 0) - 0.01).abs();
    let de = (eps - 0.04).abs();
    rep.check("hand_values", dz <= 1e-12 && dd <= 1e-12 && de <= 1e-12, format!("|dZc|={dz:e} |dDelta|={dd:e} |deps|={de:e}"));

    let mut worst = 0.0f64;
    let mut count = 0usize;
    for r in runs {
        let t = r.traj.window_width;
        for w in &r.traj.windows {
            if w.kappa() < t as u64 + r.cfg.kappa0 {
                continue;
            }
            let res = w.consistency_residual(&r.plant.stacked(w.kappa(), t)?)?;
            worst = worst.max(res / (1.0 + w.x().norm2()));
            count += 1;
        }
    }
    rep.check("consistency_residual", worst <= 1e-9, format!("{count} windows, worst relative residual {worst:e}"));

    let jobs: Vec<(usize, &DataWindow, &SymMat, &ReferenceRun)> = event_runs(runs)
        .into_iter()
        .flat_map(|r| full_windows(r).into_iter().map(move |(w, f)| (w, f, r)))
        .enumerate()
        .map(|(i, (w, f, r))| (i, w, f, r))
        .collect();
    let results: Vec<Result<(usize, usize, usize)>> = jobs
        .par_iter()
        .map(|&(i, w, f, r)| {
            let e = ellipsoid_params(w, f)?;
            let sampler = e.sampler()?;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
            let mut disagree = 0;
            for s in 0..samples_per_window {
                let rho = match s % 4 {
                    0 => 1.0,
                    1 => rng.gen_range(0.0..1.0),
                    2 => rng.gen_range(1.0..3.0),
                    _ => rng.gen_range(0.0..3.0),
                };
                let (ma, mb) = sampler.sample(rho, if s % 2 == 0 { 1.0 } else { 0.0 }, &mut rng);
                if contains(w, f, &ma, &mb)? != e.contains_hat(&ma, &mb)? {
                    disagree += 1;
                }
            }
            // Certificate: inflating by eps admits the true pair, deflating does not.
            let rec = r.traj.records.iter().rev().find(|rec| rec.kappa == w.kappa()).ok_or_else(|| Error::Internal("window without record".into()))?;
            let b = &r.traj.bundles[rec.bundle];
            let (a, bm) = r.plant.eval(w.kappa());
            let eps = min_inflation(w, f, &b.s, &a, &bm)?;
            let s_inv = b.s.inverse_pd()?;
            let up = contains(w, &f.add(&s_inv.scale(eps * (1.0 + 1e-6) + 1e-300)), &a, &bm)?;
            let tol = crate::proximity::membership_tol(w, f)?;
            let down_testable = eps * 1e-3 * s_inv.lambda_min()? > 10.0 * tol;
            let down = !down_testable || !contains(w, &f.add(&s_inv.scale(eps * (1.0 - 1e-3))), &a, &bm)?;
            Ok((disagree, usize::from(!(up && down)), usize::from(down_testable)))
        })
        .collect();
    let (mut disagree, mut cert_fail, mut deflation_tested) = (0, 0, 0);
    for r in results {
        let (d, c, t) = r?;
        disagree += d;
        cert_fail += c;
        deflation_tested += t;
    }
    rep.check(
        "membership_agreement",
        disagree == 0,
        format!("{} windows x {samples_per_window} samples, {disagree} disagreements", jobs.len()),
    );
    rep.check(
        "inflation_certificate",
        cert_fail == 0,
        format!("{} windows ({deflation_tested} with a resolvable deflation), {cert_fail} failures", jobs.len()),
    );
    Ok(rep)
}

/// Contraction of sampled set members for every synthesized bundle.
pub fn suite_property1(runs: &[ReferenceRun], num_samples: usize) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("property1");
    let all = bundles(runs);
    let results: Vec<Result<crate::synthesis::PropertyReport>> = all
        .par_iter()
        .enumerate()
        .map(|(i, (_, _, b))| {
            let eps = [0.0, b.a / (2.0 * b.a2), 2.0 * b.a / b.a2];
            verify_property(b, &eps, num_samples, 7000 + i as u64)
        })
        .collect();
    let (mut samples, mut violations, mut vacuous) = (0, 0, 0);
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    for (r, (name, idx, _)) in results.into_iter().zip(&all) {
        let r = r?;
        samples += r.samples;
        violations += r.violations;
        vacuous += usize::from(r.vacuous);
        if r.worst_slack < worst {
            worst = r.worst_slack;
            worst_at = format!("{name}#{idx}");
        }
    }
    rep.check(
        "contraction",
        violations == 0 && samples > 0,
        format!(
            "{} bundles, {samples} samples, {violations} violations, worst slack {worst:e} at {worst_at}, {vacuous} bundles with an empty inflated set",
            all.len()
        ),
    );
    Ok(rep)
}

/// `V <= pi V0` along every run, and the data-based product dominating the exact one.
pub fn suite_lemma5(runs: &[ReferenceRun]) -> SuiteReport {
    let mut rep = SuiteReport::new("lemma5");
    for r in runs {
        let recs = r.diag.records.iter().filter(|d| d.bound_ok.is_some()).count();
        rep.check(format!("{}_bound", r.name), r.diag.bound_all_ok() && recs > 0, format!("{recs} records checked"));
        rep.check(format!("{}_databased_dominates", r.name), r.diag.databased_dominates(crate::monitor::BOUND_TOL), "");
    }
    rep
}

/// No two episodes back to back and `tau = 0` exactly after episodes.
pub fn suite_prop3(runs: &[ReferenceRun]) -> SuiteReport {
    let mut rep = SuiteReport::new("prop3");
    for r in runs {
        let recs = &r.traj.records;
        let back_to_back = recs.windows(3).filter(|w| w[0].k == w[1].k && w[1].k == w[2].k).count();
        let tau_bad = recs
            .iter()
            .enumerate()
            .filter(|(i, rec)| {
                let post = *i > 0 && recs[i - 1].k == rec.k && recs[i - 1].j + 1 == rec.j;
                (rec.tau == 0) != post
            })
            .count();
        let monotone = recs.windows(2).all(|w| (w[1].k == w[0].k + 1 && w[1].j == w[0].j) || (w[1].k == w[0].k && w[1].j == w[0].j + 1));
        rep.check(
            format!("{}_dwell", r.name),
            back_to_back == 0 && tau_bad == 0 && monotone,
            format!("{back_to_back} repeated episodes, {tau_bad} tau mismatches, time domain ok: {monotone}"),
        );
    }
    rep
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = rng.gen_range(-1.0..1.0);
        }
    }
    SymMat::from_mat(&m)
}

/// Random symmetric matrix whose eigenvalues stay at least `gap` away from zero.
fn random_sym_with_gap(n: usize, gap: f64, rng: &mut ChaCha8Rng) -> Result<SymMat> {
    let q = random_sym(n, rng).eig()?.vectors;
    let d: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.gen_range(gap..2.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Ok(SymMat::from_diag(&d).congruence(&q.transpose()))
}

fn logdet_or_nan(s: &SymMat) -> f64 {
    match crate::linalg::cholesky(s) {
        Some(l) => (0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum(),
        None => f64::NEG_INFINITY,
    }
}

/// Maximizes a concave function on a box by repeated grid refinement.
fn grid_maximize(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut cx, mut cy, mut half) = ((lo + hi) / 2.0, (lo + hi) / 2.0, (hi - lo) / 2.0);
    let mut best = f64::NEG_INFINITY;
    let n = 40;
    for _ in 0..12 {
        let step = 2.0 * half / n as f64;
        let (mut bx, mut by) = (cx, cy);
        for i in 0..=n {
            for j in 0..=n {
                let x = (cx - half + i as f64 * step).clamp(lo, hi);
                let y = (cy - half + j as f64 * step).clamp(lo, hi);
                let v = f(x, y);
                if v > best {
                    best = v;
                    bx = x;
                    by = y;
                }
            }
        }
        cx = bx;
        cy = by;
        half = 2.0 * step;
    }
    best
}

/// Interior-point checks against exact rules and brute-force oracles.
pub fn suite_solver(runs: &[ReferenceRun], seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("solver");
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let f0 = random_sym_with_gap(n, 1e-2, &mut rng)?;
        let exact = f0.lambda_min()? >= opts.strict_margin;
        let p = SdpProblem::new(1, vec![AffineMatFn::new(f0, vec![SymMat::zeros(n)])?]);
        let sol = solve_feasibility(&p, &opts)?;
        if (sol.status == SdpStatus::Feasible) != exact {
            mismatches += 1;
        }
    }
    rep.check("feasibility_rule", mismatches == 0, format!("100 constant-block problems, {mismatches} mismatches"));

    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..20 {
        let s1 = random_sym(3, &mut rng);
        let s2 = random_sym(3, &mut rng);
        let g = AffineMatFn::new(SymMat::identity(3).scale(2.0), vec![s1.clone(), s2.clone()])?;
        let bound = |i: usize, sign: f64| {
            let mut c = vec![SymMat::zeros(1), SymMat::zeros(1)];
            c[i] = SymMat::from_diag(&[sign]);
            AffineMatFn::new(SymMat::from_diag(&[1.0]), c)
        };
        let p = SdpProblem::new(2, vec![g.clone(), bound(0, 1.0)?, bound(0, -1.0)?, bound(1, 1.0)?, bound(1, -1.0)?]).with_det_block(0);
        let sol = solve_maxdet(&p, &opts)?;
        let oracle = grid_maximize(|x, y| logdet_or_nan(&g.eval(&[x, y])), -1.0, 1.0);
        match sol.logdet_value {
            Some(v) if sol.status == SdpStatus::Optimal => worst = worst.max((v - oracle).abs()),
            _ => failures += 1,
        }
    }
    rep.check("maxdet_vs_grid", failures == 0 && worst <= 1e-3, format!("20 instances, {failures} unsolved, worst gap {worst:e}"));

    let all = bundles(runs);
    let margins: Vec<Result<f64>> = all
        .par_iter()
        .map(|(_, _, b)| Ok(solver_margins(b)?.into_iter().fold(f64::INFINITY, f64::min)))
        .collect();
    let mut worst_margin = f64::INFINITY;
    for m in margins {
        worst_margin = worst_margin.min(m?);
    }
    rep.check(
        "accepted_margins",
        worst_margin >= opts.strict_margin / 2.0,
        format!("{} bundles, smallest margin {worst_margin:e}", all.len()),
    );

    let mut worst_id = 0.0f64;
    for (_, _, b) in &all {
        let lhs = b.h.sub(&b.f.scale(1.0 + 1.0 / b.varsigma));
        let rhs = b.h.scale(crate::synthesis::SynthesisOptions::default().eps_f);
        let err = (lhs.as_mat() - rhs.as_mat()).max_abs() / b.h.as_mat().max_abs().max(1.0);
        worst_id = worst_id.max(err);
    }
    rep.check("parameter_identity", worst_id <= 1e-12, format!("worst relative error {worst_id:e}"));
    Ok(rep)
}

/// Runs one named suite over freshly simulated reference runs.
pub fn run_suite(name: &str, runs: &[ReferenceRun]) -> Result<SuiteReport> {
    match name {
        "lemma3" => suite_lemma3(runs, 500),
        "property1" => suite_property1(runs, 500),
        "lemma5" => Ok(suite_lemma5(runs)),
        "prop3" => Ok(suite_prop3(runs)),
        "solver" => suite_solver(runs, 2024),
        other => Err(Error::Config(format!("unknown suite {other:?}; expected one of {}", SUITES.join(", ")))),
    }
}
