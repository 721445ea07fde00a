//! Worked examples checked against independent oracles written here.

use ddetc::data::DataWindow;
use ddetc::hybrid::{run, ControlMode, EngineConfig, RunStatus, Trajectory};
use ddetc::linalg::{gen_eig_max, gen_eig_min, n_map, shift_append, Mat, SymMat};
use ddetc::monitor::{analyze, theta_databased, theta_exact, StepFactor};
use ddetc::plant::{a0, b0, LtvPlant};
use ddetc::proximity::{contains, ellipsoid_params, min_inflation};
use ddetc::synthesis::{synthesize, verify_property, ControllerBundle, SynthesisOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
    let m = Mat::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    SymMat::from_mat(&(&m + &m.transpose()).scale(0.5))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SymMat {
    let m = Mat::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    SymMat::gram(&m).add(&SymMat::identity(n).scale(0.5))
}

fn det3(m: &Mat) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)]) - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Roots of `t -> det(A - t B)` located by sign changes on a grid, then bisected.
fn det_roots(a: &SymMat, b: &SymMat, bound: f64) -> Vec<f64> {
    let f = |t: f64| det3(&(a.as_mat() - &b.as_mat().scale(t)));
    let n = 200_000;
    let mut roots = Vec::new();
    let mut prev = (-bound, f(-bound));
    for i in 1..=n {
        let t = -bound + 2.0 * bound * i as f64 / n as f64;
        let cur = (t, f(t));
        if prev.1 == 0.0 || prev.1.signum() != cur.1.signum() {
            let (mut lo, mut hi) = (prev.0, cur.0);
            let flo = f(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    roots
}

#[test]
fn generalized_eigenvalues_match_bisection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let a = random_sym(3, &mut rng);
        let b = random_spd(3, &mut rng);
        let roots = det_roots(&a, &b, 50.0);
        assert_eq!(roots.len(), 3, "{roots:?}");
        let hi = gen_eig_max(&a, &b).unwrap();
        let lo = gen_eig_min(&a, &b).unwrap();
        assert!((hi - roots[2]).abs() <= 1e-10, "{hi} vs {}", roots[2]);
        assert!((lo - roots[0]).abs() <= 1e-10, "{lo} vs {}", roots[0]);
    }
}

#[test]
fn symmetric_eigenvalues_by_hand() {
    let s = SymMat::from_mat(&Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]));
    assert!(close(s.lambda_min().unwrap(), 1.0, 1e-12));
    assert!(close(s.lambda_max().unwrap(), 3.0, 1e-12));
}

#[test]
fn n_map_display_example() {
    let z = Mat::from_rows(&[&[1.0, 3.0], &[2.0, 4.0]]);
    let expected = Mat::from_rows(&[&[1.0, 0.0], &[2.0, 0.0], &[0.0, 3.0], &[0.0, 4.0]]);
    assert_eq!(n_map(&z).unwrap(), expected);
}

#[test]
fn shift_append_drops_oldest_column() {
    let m = Mat::from_rows(&[&[1.0, 2.0, 3.0]]);
    assert_eq!(shift_append(&m, &[4.0]).unwrap(), Mat::from_rows(&[&[2.0, 3.0, 4.0]]));
}

#[test]
fn benchmark_plant_values() {
    let p = LtvPlant::switching(12, 1.0).unwrap();
    assert_eq!(p.eval(5).1, Mat::from_rows(&[&[0.5, 1.0], &[0.1, 0.2]]));
    assert_eq!(p.eval(13).1, Mat::from_rows(&[&[0.5, -1.0], &[0.1, -0.2]]));
    let s = LtvPlant::sinusoidal(10.0, 0.8).unwrap();
    let a = s.eval(0).0;
    let expected = a0().matmul(&Mat::from_diag(&[1.8, 0.2]));
    assert!((&a - &Mat::from_rows(&[&[1.98, 0.02], &[0.18, 0.04]])).max_abs() < 1e-12);
    assert!((&a - &expected).max_abs() < 1e-15);
    let c = LtvPlant::constant(a0(), b0()).unwrap();
    let x = c.step(0, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
    assert!(close(x[0], 1.1, 1e-15) && close(x[1], 0.1, 1e-15));
}

#[test]
fn stacked_blocks_follow_the_loop_oracle_across_a_switch() {
    let p = LtvPlant::switching(12, 1.0).unwrap();
    let (kappa, t) = (15u64, 4usize);
    let st = p.stacked(kappa, t).unwrap();
    let mut changed = Vec::new();
    for i in 0..t {
        let k = kappa - t as u64 + i as u64;
        let (a, b) = p.eval(k);
        assert_eq!(st.cal_a.submatrix(0, 2 * i, 2, 2), a);
        assert_eq!(st.cal_b.submatrix(0, 2 * i, 2, 2), b);
        if i > 0 && st.cal_b.submatrix(0, 2 * i, 2, 2) != st.cal_b.submatrix(0, 2 * (i - 1), 2, 2) {
            changed.push(k);
        }
    }
    // The second branch starts at k = 13.
    assert_eq!(changed, vec![13]);
}

fn explore(plant: &LtvPlant, t: usize, seed: u64) -> DataWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DataWindow::zeros(plant.nx(), plant.nu(), t).unwrap();
    let mut x: Vec<f64> = (0..plant.nx()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for k in 0..t {
        let u: Vec<f64> = (0..plant.nu()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xn = plant.step(k as u64, &x, &u).unwrap();
        w = w.push(&x, &xn, &u).unwrap();
        x = xn;
    }
    w
}

#[test]
fn random_input_experiments_are_exciting() {
    let p = LtvPlant::constant(a0(), b0()).unwrap();
    for t in 4..=8 {
        for seed in 0..20 {
            assert_eq!(explore(&p, t, seed).z_matrix().1, 4, "T = {t}, seed = {seed}");
        }
    }
}

fn seeded(mode: ControlMode) -> EngineConfig {
    let mut c = EngineConfig::new(4, vec![1.0, 1.0]);
    c.seed = 42;
    c.mode = mode;
    c
}

/// Per physical time: state and the input applied on the flow leaving it.
fn physical(traj: &Trajectory) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for r in &traj.records {
        if r.k as usize == out.len() {
            out.push((r.x.clone(), r.u.clone()));
        } else {
            out[r.k as usize] = (r.x.clone(), r.u.clone());
        }
    }
    out
}

#[test]
fn windows_match_a_brute_force_replay() {
    let plant = LtvPlant::switching(12, 1.0).unwrap();
    let traj = run(&plant, &seeded(ControlMode::EventTriggered)).unwrap();
    let phys = physical(&traj);
    let t = traj.window_width;
    for (rec, w) in traj.records.iter().zip(&traj.windows) {
        assert_eq!(w.kappa(), rec.kappa);
        for c in 0..t {
            let s = rec.k as i64 - t as i64 + c as i64;
            for i in 0..2 {
                let (xh, xp, u) = if s < 0 { (0.0, 0.0, 0.0) } else { (phys[s as usize].0[i], phys[s as usize + 1].0[i], phys[s as usize].1[i]) };
                assert_eq!(w.xhat()[(i, c)], xh, "xhat k={} col={c}", rec.k);
                assert_eq!(w.x()[(i, c)], xp, "X k={} col={c}", rec.k);
                assert_eq!(w.u()[(i, c)], u, "U k={} col={c}", rec.k);
            }
        }
        if rec.k >= t as u64 {
            let st = plant.stacked(rec.kappa, t).unwrap();
            assert!(w.consistency_residual(&st).unwrap() <= 1e-9 * (1.0 + w.x().norm2()));
        }
    }
}

fn one_d_window() -> DataWindow {
    DataWindow::from_parts(2, Mat::from_rows(&[&[1.0, 0.5]]), Mat::from_rows(&[&[0.5, 0.25]]), Mat::from_rows(&[&[0.0, 0.0]])).unwrap()
}

#[test]
fn one_d_hand_values() {
    let w = one_d_window();
    let (z, rank) = w.z_matrix();
    assert_eq!(z, Mat::from_rows(&[&[1.0, 0.5], &[0.0, 0.0]]));
    assert_eq!(rank, 1);
    let f = SymMat::from_diag(&[0.01]);
    let e = ellipsoid_params(&w, &f).unwrap();
    assert!((e.m.as_mat() - &Mat::from_rows(&[&[1.25, 0.0], &[0.0, 0.0]])).max_abs() <= 1e-12);
    assert!((&e.zc - &Mat::from_rows(&[&[0.5], &[0.0]])).max_abs() <= 1e-12);
    assert!(close(e.delta.get(0, 0), 0.01, 1e-12));
    assert!(!e.is_bounded());
    let a_true = Mat::from_rows(&[&[0.7]]);
    let b_any = Mat::from_rows(&[&[0.0]]);
    assert!(!contains(&w, &f, &a_true, &b_any).unwrap());
    let s = SymMat::from_diag(&[1.0]);
    let eps = min_inflation(&w, &f, &s, &a_true, &b_any).unwrap();
    assert!(close(eps, 0.04, 1e-12), "{eps}");
    let eps2 = min_inflation(&w, &f, &s.scale(2.0), &a_true, &b_any).unwrap();
    assert!(close(eps2, 2.0 * eps, 1e-12), "{eps2}");
}

#[test]
fn lti_windows_contain_the_true_pair() {
    let p = LtvPlant::constant(a0(), b0()).unwrap();
    let w = explore(&p, 6, 3);
    assert!(ellipsoid_params(&w, &SymMat::identity(2)).unwrap().is_bounded());
    for f in [1e-6, 1.0, 100.0] {
        let f = SymMat::identity(2).scale(f);
        assert!(contains(&w, &f, &a0(), &b0()).unwrap());
        assert_eq!(min_inflation(&w, &f, &SymMat::identity(2), &a0(), &b0()).unwrap(), 0.0);
    }
}

#[test]
fn benchmark_gain_is_stabilizing() {
    let p = LtvPlant::constant(a0(), b0()).unwrap();
    for seed in 0..5 {
        let b = synthesize(&explore(&p, 4, seed), &SynthesisOptions::default()).expect("feasible");
        let th = theta_exact(&a0(), &b0(), &b.k, &b.s).unwrap();
        assert!(th < 1.0 && th <= b.a1 * (1.0 + 1e-7), "seed {seed}: theta {th}, a1 {}", b.a1);
    }
}

fn scalar_bundle() -> (DataWindow, ControllerBundle) {
    let p = LtvPlant::constant(Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[1.0]])).unwrap();
    let w = explore(&p, 3, 11);
    let b = synthesize(&w, &SynthesisOptions::default()).expect("feasible");
    (w, b)
}

/// Grid over a box around the least-squares pair, keeping the members of
/// the proximity set by the direct mismatch test `D D^T <= f`.
fn scalar_members(w: &DataWindow, f: f64, n: usize) -> Vec<(f64, f64)> {
    let (xh, x, u) = (w.xhat().row(0).to_vec(), w.x().row(0).to_vec(), w.u().row(0).to_vec());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (g11, g12, g22) = (dot(&xh, &xh), dot(&xh, &u), dot(&u, &u));
    let (r1, r2) = (dot(&xh, &x), dot(&u, &x));
    let det = g11 * g22 - g12 * g12;
    let (ca, cb) = ((g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det);
    let lmin = 0.5 * (g11 + g22 - ((g11 - g22).powi(2) + 4.0 * g12 * g12).sqrt());
    let r = (f / lmin).sqrt() * 1.05;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let ma = ca - r + 2.0 * r * i as f64 / n as f64;
            let mb = cb - r + 2.0 * r * j as f64 / n as f64;
            let d: f64 = (0..xh.len()).map(|c| (ma * xh[c] + mb * u[c] - x[c]).powi(2)).sum();
            if d <= f {
                out.push((ma, mb));
            }
        }
    }
    out
}

#[test]
fn scalar_synthesis_against_grid_oracle() {
    let (w, b) = scalar_bundle();
    let (k, s) = (b.k[(0, 0)], b.s.get(0, 0));
    assert!((0.5 + k).powi(2) * s <= b.a1 * s * (1.0 + 1e-9));
    let members = scalar_members(&w, b.f.get(0, 0), 400);
    assert!(members.len() > 100, "grid found {} members", members.len());
    for (ma, mb) in members {
        let ratio = (ma + mb * k).powi(2);
        assert!(ratio <= b.a1 * (1.0 + 1e-9), "member ({ma}, {mb}) gives {ratio} > a1 = {}", b.a1);
    }
}

#[test]
fn scalar_property_sampling_and_negative_control() {
    let (_, b) = scalar_bundle();
    let eps = [0.0, b.a / (2.0 * b.a2), 2.0 * b.a / b.a2];
    let rep = verify_property(&b, &eps, 500, 5).unwrap();
    assert!(rep.samples > 0);
    assert_eq!(rep.violations, 0, "{rep:?}");
    let mut bad = b.clone();
    bad.k = &bad.k + &Mat::from_rows(&[&[1.5]]);
    assert!(verify_property(&bad, &[0.0], 500, 5).unwrap().violations > 0);
}

#[test]
fn large_inflation_enters_growth_regime() {
    let (_, b) = scalar_bundle();
    assert!(b.decay_rate_bound((1.0 - b.a1) / b.a2 * 2.0) > 1.0);
}

/// Maximum of `V(M x) / V(x)` over the unit circle: grid, then golden section.
fn circle_oracle(m: &Mat, s: &SymMat) -> f64 {
    let ratio = |phi: f64| {
        let x = [phi.cos(), phi.sin()];
        s.quad(&m.mul_vec(&x)) / s.quad(&x)
    };
    let n = 20_000;
    let h = std::f64::consts::PI / n as f64;
    let best = (0..n).map(|i| i as f64 * h).max_by(|a, b| ratio(*a).total_cmp(&ratio(*b))).unwrap();
    let (mut lo, mut hi) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if ratio(c) > ratio(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    ratio(0.5 * (lo + hi))
}

#[test]
fn theta_matches_circle_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let a = Mat::from_vec(2, 2, (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
        let b = Mat::from_vec(2, 1, (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let k = Mat::from_vec(1, 2, (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let s = random_spd(2, &mut rng);
        let th = theta_exact(&a, &b, &k, &s).unwrap();
        let oracle = circle_oracle(&(&a + &b.matmul(&k)), &s);
        assert!(close(th, oracle, 1e-8), "{th} vs {oracle}");
    }
}

#[test]
fn data_based_growth_bounds_the_exact_one() {
    let (w, b) = scalar_bundle();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let a = Mat::from_rows(&[&[rng.gen_range(-1.0..2.0)]]);
        let bb = Mat::from_rows(&[&[rng.gen_range(-1.0..2.0)]]);
        let eps = min_inflation(&w, &b.f, &b.s, &a, &bb).unwrap();
        let db = theta_databased(eps, b.a1, b.a2);
        let ex = theta_exact(&a, &bb, &b.k, &b.s).unwrap();
        assert!(ex <= db * (1.0 + 1e-9), "exact {ex} > data-based {db}");
    }
    // The true LTI pair needs no inflation.
    let ex = theta_exact(&Mat::from_rows(&[&[0.5]]), &Mat::from_rows(&[&[1.0]]), &b.k, &b.s).unwrap();
    assert!(ex <= b.a1 * (1.0 + 1e-9));
}

#[test]
fn one_d_worked_instance_bounds_theta() {
    let w = one_d_window();
    let b = synthesize(&w, &SynthesisOptions::default()).expect("feasible");
    let (a, bb) = (Mat::from_rows(&[&[0.7]]), Mat::from_rows(&[&[0.0]]));
    let eps = min_inflation(&w, &b.f, &b.s, &a, &bb).unwrap();
    assert!(eps > 0.0);
    assert!(theta_exact(&a, &bb, &b.k, &b.s).unwrap() <= theta_databased(eps, b.a1, b.a2) * (1.0 + 1e-9));
}

#[test]
fn pi_is_a_power_of_sigma_when_every_flow_decreases() {
    let plant = LtvPlant::constant(Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[1.0]])).unwrap();
    let mut cfg = EngineConfig::new(3, vec![1.0]);
    cfg.seed = 11;
    cfg.horizon = 30;
    let traj = run(&plant, &cfg).unwrap();
    assert_eq!(traj.episodes.len(), 1);
    let rep = analyze(&traj, &plant, cfg.c_sigma).unwrap();
    let s0 = rep.start.unwrap();
    let sig = match rep.factors[0] {
        StepFactor::Decrease(s) => s,
        other => panic!("unexpected factor {other:?}"),
    };
    for r in &rep.records[s0..] {
        let expected = sig.powi((r.k - rep.records[s0].k) as i32);
        assert!(close(r.pi_exact.unwrap(), expected, 1e-12));
        assert_eq!(r.in_c1.unwrap_or(true), true);
    }
}

#[test]
fn pi_equals_a_rewalk_of_the_recorded_factors() {
    let plant = LtvPlant::switching(12, 1.0).unwrap();
    let cfg = seeded(ControlMode::EventTriggered);
    let traj = run(&plant, &cfg).unwrap();
    let rep = analyze(&traj, &plant, cfg.c_sigma).unwrap();
    let s0 = rep.start.unwrap();
    let (mut pe, mut pd) = (1.0, 1.0);
    let mut kinds = (0, 0, 0);
    for (i, f) in rep.factors.iter().enumerate() {
        let (cur, next) = (&traj.records[s0 + i], &traj.records[s0 + i + 1]);
        let s = &traj.bundles[cur.bundle].s;
        match *f {
            StepFactor::Jump(nu) => {
                assert_eq!(next.j, cur.j + 1);
                kinds.0 += 1;
                let ns = &traj.bundles[next.bundle].s;
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                for _ in 0..100 {
                    let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    assert!(ns.quad(&x) <= nu * s.quad(&x) * (1.0 + 1e-9));
                }
            }
            StepFactor::Decrease(sig) => {
                kinds.1 += 1;
                assert!(s.quad(&next.x) <= sig * s.quad(&cur.x));
            }
            StepFactor::Growth { exact, databased } => {
                kinds.2 += 1;
                assert!(s.quad(&next.x) <= exact * s.quad(&cur.x) * (1.0 + 1e-9));
                assert!(exact <= databased * (1.0 + 1e-9));
            }
        }
        pe *= f.exact();
        pd *= f.databased();
        let r = &rep.records[s0 + i + 1];
        assert!(close(r.pi_exact.unwrap(), pe, 1e-12));
        assert!(close(r.pi_databased.unwrap(), pd, 1e-12), "{} vs {pd}", r.pi_databased.unwrap());
    }
    assert!(kinds.0 > 0 && kinds.1 > 0 && kinds.2 > 0, "{kinds:?}");
    assert!(rep.bound_all_ok());
}

#[test]
fn switching_reference_run_is_pinned() {
    let plant = LtvPlant::switching(12, 1.0).unwrap();
    let cfg = seeded(ControlMode::EventTriggered);
    let a = run(&plant, &cfg).unwrap();
    let b = run(&plant, &cfg).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.status, RunStatus::Completed);
    assert_eq!(a.episodes, vec![4, 15, 16, 39, 40, 63, 64, 87, 88]);
    assert!(close(a.final_norm(), 4.270215688212845e-2, 1e-9), "{}", a.final_norm());
}
