//! Certificate bookkeeping along trajectories: growth factors, the running
//! product `pi`, the bound `V(k,j) <= pi V(0,0)` and stability diagnostics.

use std::fmt::Write as _;

use crate::error::Result;
use crate::hybrid::{lyap, sigma, Trajectory};
use crate::linalg::{gen_eig_max, Mat, SymMat};
use crate::plant::LtvPlant;
use crate::proximity::{contains, min_inflation};

/// Smallest `nu` with `S_next <= nu S`.
pub fn nu_d(s: &SymMat, s_next: &SymMat) -> Result<f64> {
    gen_eig_max(s_next, s)
}

/// Smallest `theta` with `(A + B K)^T S (A + B K) <= theta S`.
pub fn theta_exact(a: &Mat, b: &Mat, k: &Mat, s: &SymMat) -> Result<f64> {
    let cl = a + &b.matmul(k);
    gen_eig_max(&s.congruence(&cl), s)
}

pub fn theta_databased(eps: f64, a1: f64, a2: f64) -> f64 {
    a1 + a2 * eps
}

/// Multiplicative factor attached to one transition of the trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepFactor {
    /// Flow landing in the decrease region: `sigma(a1)`.
    Decrease(f64),
    /// Flow outside the decrease region: exact and data-based growth bounds.
    Growth { exact: f64, databased: f64 },
    /// Episode: `nu_d`.
    Jump(f64),
}

impl StepFactor {
    pub fn exact(&self) -> f64 {
        match *self {
            StepFactor::Decrease(s) | StepFactor::Jump(s) => s,
            StepFactor::Growth { exact, .. } => exact,
        }
    }

    pub fn databased(&self) -> f64 {
        match *self {
            StepFactor::Decrease(s) | StepFactor::Jump(s) => s,
            StepFactor::Growth { databased, .. } => databased,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordDiagnostics {
    pub k: u64,
    pub j: u64,
    pub v: f64,
    pub pi_exact: Option<f64>,
    pub pi_databased: Option<f64>,
    /// Decrease test for records reached by a flow.
    pub in_c1: Option<bool>,
    pub nu_d_event: Option<f64>,
    /// Growth bounds of the flow leaving this record when it misses the
    /// decrease region.
    pub theta_exact: Option<f64>,
    pub theta_databased: Option<f64>,
    pub thm4_lhs: f64,
    pub bound_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thm4Fit {
    pub m1: f64,
    pub m2: f64,
    pub verdict: &'static str,
}

#[derive(Clone, Debug)]
pub struct DiagnosticsReport {
    pub records: Vec<RecordDiagnostics>,
    /// Factor of every transition `start + i -> start + i + 1`.
    pub factors: Vec<StepFactor>,
    /// Index of the first record the certificate covers.
    pub start: Option<usize>,
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub thm4: Thm4Fit,
    /// Physical time after which every flow lands in the decrease region.
    pub tstar: Option<u64>,
}

impl DiagnosticsReport {
    pub fn bound_all_ok(&self) -> bool {
        self.records.iter().all(|r| r.bound_ok != Some(false))
    }

    /// `pi_databased >= pi_exact (1 - tol)` wherever both exist.
    pub fn databased_dominates(&self, tol: f64) -> bool {
        self.records.iter().all(|r| match (r.pi_exact, r.pi_databased) {
            (Some(e), Some(d)) => d >= e * (1.0 - tol),
            _ => true,
        })
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        let mut out = String::from("k,j,V,pi_exact,pi_databased,in_C1,nu_d_event,theta_exact,theta_databased,thm4_lhs\n");
        for r in &self.records {
            let c1 = match r.in_c1 {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let _ = writeln!(
                out,
                "{},{},{:e},{},{},{},{},{},{},{:e}",
                r.k,
                r.j,
                r.v,
                opt(r.pi_exact),
                opt(r.pi_databased),
                c1,
                opt(r.nu_d_event),
                opt(r.theta_exact),
                opt(r.theta_databased),
                r.thm4_lhs
            );
        }
        out
    }
}

/// Relative tolerance of the bound `V <= pi V0`.
pub const BOUND_TOL: f64 = 1e-9;

/// Walks the trajectory from its first closed-loop record, assembling the
/// per-transition factors and both `pi` products. Exploration records carry
/// exogenous inputs and are left out of the certificate.
pub fn analyze(traj: &Trajectory, plant: &LtvPlant, c_sigma: f64) -> Result<DiagnosticsReport> {
    let n = traj.records.len();
    let start = traj.records.iter().position(|r| !r.exploration);
    let mut records: Vec<RecordDiagnostics> = traj
        .records
        .iter()
        .map(|r| RecordDiagnostics {
            k: r.k,
            j: r.j,
            v: r.v,
            pi_exact: None,
            pi_databased: None,
            in_c1: None,
            nu_d_event: None,
            theta_exact: None,
            theta_databased: None,
            thm4_lhs: 0.0,
            bound_ok: None,
        })
        .collect();
    let mut factors = Vec::new();
    let mut lambda_c: f64 = 0.0;
    let mut lambda_d: f64 = 0.0;

    if let Some(s0) = start {
        let b0 = &traj.bundles[traj.records[s0].bundle];
        let v0 = lyap(&traj.records[s0].x, &b0.s);
        let (mut pe, mut pd) = (1.0, 1.0);
        records[s0].pi_exact = Some(1.0);
        records[s0].pi_databased = Some(1.0);
        records[s0].bound_ok = Some(true);
        for i in s0..n.saturating_sub(1) {
            let (cur, next) = (&traj.records[i], &traj.records[i + 1]);
            let b = &traj.bundles[cur.bundle];
            let sig = sigma(b.a1, c_sigma)?;
            lambda_c = lambda_c.max(sig);
            let factor = if next.j > cur.j {
                let nb = &traj.bundles[next.bundle];
                let nu = nu_d(&b.s, &nb.s)?;
                records[i + 1].nu_d_event = Some(nu);
                lambda_d = lambda_d.max(nu);
                StepFactor::Jump(nu)
            } else {
                let landed = lyap(&next.x, &b.s) <= sig * lyap(&cur.x, &b.s);
                records[i + 1].in_c1 = Some(landed);
                if landed {
                    StepFactor::Decrease(sig)
                } else {
                    let (a, bm) = plant.eval(cur.kappa);
                    let th = theta_exact(&a, &bm, &b.k, &b.s)?;
                    let db = match &b.design {
                        Some(w) => theta_databased(min_inflation(w, &b.f, &b.s, &a, &bm)?, b.a1, b.a2),
                        None => th,
                    };
                    records[i].theta_exact = Some(th);
                    records[i].theta_databased = Some(db);
                    lambda_d = lambda_d.max(th);
                    StepFactor::Growth { exact: th, databased: db }
                }
            };
            pe *= factor.exact();
            pd *= factor.databased();
            factors.push(factor);
            let r = &mut records[i + 1];
            r.pi_exact = Some(pe);
            r.pi_databased = Some(pd);
            let v = lyap(&next.x, &traj.bundles[next.bundle].s);
            r.bound_ok = Some(v <= pe * v0 * (1.0 + BOUND_TOL));
        }
    }
    let lambda_c = if start.is_some() { lambda_c.clamp(f64::MIN_POSITIVE, 1.0) } else { 1.0 };
    let lambda_d = lambda_d.max(lambda_c);
    for r in &mut records {
        r.thm4_lhs = thm4_lhs(r.k, r.j, lambda_c, lambda_d);
    }
    let pts: Vec<(f64, f64)> = records.iter().map(|r| ((r.k + r.j) as f64, r.thm4_lhs)).collect();
    let thm4 = fit_thm4(&pts);
    let tstar = estimate_tstar(&records, start);
    Ok(DiagnosticsReport { records, factors, start, lambda_c, lambda_d, thm4, tstar })
}

/// `(k - 2j) ln(lambda_c) + (3j + 1) ln(lambda_d)`.
pub fn thm4_lhs(k: u64, j: u64, lambda_c: f64, lambda_d: f64) -> f64 {
    let kc = k as f64 - 2.0 * j as f64;
    let kd = 3.0 * j as f64 + 1.0;
    let term = |c: f64, l: f64| if c == 0.0 { 0.0 } else { c * l.ln() };
    term(kc, lambda_c) + term(kd, lambda_d)
}

/// Least-squares decay slope clamped at zero, then the smallest offset
/// making `lhs <= m1 - m2 (k + j)` hold at every point.
pub fn fit_thm4(points: &[(f64, f64)]) -> Thm4Fit {
    if points.is_empty() {
        return Thm4Fit { m1: 0.0, m2: 0.0, verdict: "no data" };
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let m2 = (-slope).max(0.0);
    let m1 = points.iter().map(|&(t, l)| l + m2 * t).fold(0.0, f64::max);
    let verdict = if m2 > 0.0 {
        "decaying certificate"
    } else if slope > 1e-12 {
        "growing, no certificate"
    } else {
        "stable, not attractive"
    };
    Thm4Fit { m1, m2, verdict }
}

fn estimate_tstar(records: &[RecordDiagnostics], start: Option<usize>) -> Option<u64> {
    let s0 = start?;
    let flows: Vec<&RecordDiagnostics> = records[s0..].iter().filter(|r| r.in_c1.is_some()).collect();
    if flows.last().map(|r| r.in_c1) == Some(Some(false)) {
        return None;
    }
    let last_miss = flows.iter().rposition(|r| r.in_c1 == Some(false));
    match last_miss {
        Some(i) => Some(flows[i].k),
        None => Some(records[s0].k),
    }
}

/// Scans candidate times `T* >= from` and returns the first for which the
/// true plant pair at every later record belongs to the proximity set built
/// from the window and `F` in force at `(T*, j_max)`.
pub fn terminal_membership(traj: &Trajectory, plant: &LtvPlant, from: u64) -> Result<Option<u64>> {
    let n = traj.records.len();
    let mut idx = 0;
    while idx < n {
        let k = traj.records[idx].k;
        // Last record at this physical time.
        let mut last = idx;
        while last + 1 < n && traj.records[last + 1].k == k {
            last += 1;
        }
        let rec = &traj.records[last];
        if k >= from && !rec.exploration && k >= traj.window_width as u64 {
            let w = &traj.windows[last];
            let f = &traj.bundles[rec.bundle].f;
            let mut ok = true;
            for later in &traj.records[last..] {
                let (a, b) = plant.eval(later.kappa);
                if !contains(w, f, &a, &b)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(Some(k));
            }
        }
        idx = last + 1;
    }
    Ok(None)
}
