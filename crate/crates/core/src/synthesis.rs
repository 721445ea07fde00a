//! Controller synthesis from a data window: solve the data-based LMIs with
//! `log det H` maximization and extract `(K, S, F, a1, a2)`.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataWindow;
use crate::error::{Error, Result};
use crate::linalg::{gen_eig_max, gen_eig_min, sym_eig, Mat, SymMat};
use crate::proximity::ellipsoid_params;
use crate::sdp::{check_point, solve_maxdet, AffineMatFn, SdpProblem, SdpSolution, SdpStatus, SolverOptions};

#[derive(Clone, Debug)]
pub struct SynthesisOptions {
    pub eps_f: f64,
    pub solver: SolverOptions,
    /// Skip windows whose regressor `[Xhat; U]` is not full row rank.
    pub reject_low_rank: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { eps_f: 0.1, solver: SolverOptions::default(), reject_low_rank: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerBundle {
    pub k: Mat,
    pub s: SymMat,
    pub f: SymMat,
    pub a1: f64,
    pub a2: f64,
    pub a: f64,
    pub varsigma: f64,
    pub y: Mat,
    pub h: SymMat,
    /// Window the bundle was designed on; `None` for the fallback gain.
    pub design: Option<DataWindow>,
    /// Data scale the LMIs were solved at (see [`Prop2Problem`]).
    pub scale: f64,
    /// Solver point in the scaled coordinates.
    pub solver_x: Vec<f64>,
    pub solver_iterations: usize,
}

impl ControllerBundle {
    /// Zero gain with `S = I` and no contraction claim (`a1 = 1`).
    pub fn fallback(nx: usize, nu: usize) -> Self {
        ControllerBundle {
            k: Mat::zeros(nu, nx),
            s: SymMat::identity(nx),
            f: SymMat::identity(nx),
            a1: 1.0,
            a2: 1.0,
            a: 0.0,
            varsigma: 1.0,
            y: Mat::zeros(0, nx),
            h: SymMat::identity(nx),
            design: None,
            scale: 1.0,
            solver_x: Vec::new(),
            solver_iterations: 0,
        }
    }

    pub fn is_fallback(&self) -> bool {
        self.design.is_none()
    }

    pub fn gain_input(&self, x: &[f64]) -> Vec<f64> {
        self.k.mul_vec(x)
    }

    pub fn decay_rate_bound(&self, eps: f64) -> f64 {
        decay_rate_bound(self.a1, self.a2, eps)
    }

    /// Key/matrix text dump, matrices row-major.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut mat = |name: &str, m: &Mat| {
            out.push_str(&format!("{name} {} {}\n", m.rows(), m.cols()));
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        };
        mat("K", &self.k);
        mat("S", self.s.as_mat());
        mat("F", self.f.as_mat());
        mat("H", self.h.as_mat());
        mat("Y", &self.y);
        out.push_str(&format!("a1 {:e}\na2 {:e}\na {:e}\nvarsigma {:e}\n", self.a1, self.a2, self.a, self.varsigma));
        out
    }
}

pub fn decay_rate_bound(a1: f64, a2: f64, eps: f64) -> f64 {
    a1 + a2 * eps
}

/// The synthesis LMIs for one window, posed on the data divided by `scale`.
///
/// Variables are `(varsigma, y, svec(H))`, where `Y = sum_k y_k N_k` runs
/// over a basis of the `Y` for which `Xhat Y` is symmetric. Scaling the data
/// by `1/c` maps a solution `(varsigma, Y', H')` to `(varsigma, c Y', c^2 H')`
/// of the original LMIs; `K` and `a` are unchanged.
pub struct Prop2Problem {
    pub problem: SdpProblem,
    pub scale: f64,
    basis: Vec<Mat>,
    h_basis: Vec<SymMat>,
    nx: usize,
}

fn sym_basis(n: usize) -> Vec<SymMat> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            let mut m = Mat::zeros(n, n);
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
            out.push(SymMat::from_mat(&m));
        }
    }
    out
}

/// Orthonormal basis of `{Y : Xhat Y = (Xhat Y)^T}`.
fn symmetric_product_basis(xhat: &Mat) -> Result<Vec<Mat>> {
    let (nx, t) = xhat.shape();
    let nv = t * nx;
    let idx = |r: usize, c: usize| r * nx + c;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..nx {
        for j in (i + 1)..nx {
            let mut row = vec![0.0; nv];
            for s in 0..t {
                row[idx(s, j)] += xhat[(i, s)];
                row[idx(s, i)] -= xhat[(j, s)];
            }
            rows.push(row);
        }
    }
    let mut ctc = Mat::zeros(nv, nv);
    for row in &rows {
        for a in 0..nv {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..nv {
                ctc[(a, b)] += row[a] * row[b];
            }
        }
    }
    let e = sym_eig(&SymMat::from_mat(&ctc))?;
    let lmax = e.values.last().copied().unwrap_or(0.0).max(0.0);
    let cut = 1e-10 * lmax.max(1e-300);
    let mut out = Vec::new();
    for (k, &l) in e.values.iter().enumerate() {
        if rows.is_empty() || l <= cut {
            out.push(Mat::from_vec(t, nx, e.vector(k))?);
        }
    }
    Ok(out)
}

fn sym(m: &Mat) -> SymMat {
    SymMat::from_mat(m)
}

impl Prop2Problem {
    pub fn new(w: &DataWindow) -> Result<Self> {
        let z_norm = w.z().norm2();
        let scale = if z_norm > 0.0 && z_norm.is_finite() { z_norm } else { 1.0 };
        Self::with_scale(w, scale)
    }

    pub fn with_scale(w: &DataWindow, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidInput("scale must be positive".into()));
        }
        let (nx, t) = (w.nx(), w.width());
        let xhat = w.xhat().scale(1.0 / scale);
        let x = w.x().scale(1.0 / scale);
        let basis = symmetric_product_basis(&xhat)?;
        let h_basis = sym_basis(nx);
        let nv = 1 + basis.len() + h_basis.len();

        let z_nx = Mat::zeros(nx, nx);
        let mut c1 = Vec::with_capacity(nv);
        let mut c2 = Vec::with_capacity(nv);
        let mut c3 = Vec::with_capacity(nv);
        let xxt = x.mul_t(&x);
        c1.push(sym(&Mat::block2x2(&xxt.scale(-1.0), &z_nx, &z_nx, &z_nx)));
        c2.push(SymMat::zeros(t + nx));
        c3.push(SymMat::zeros(nx));
        for n in &basis {
            let p = sym(&xhat.matmul(n)).into_mat();
            let xn = x.matmul(n);
            c1.push(sym(&Mat::block2x2(&p, &xn, &xn.transpose(), &p)));
            c2.push(sym(&Mat::block2x2(&Mat::zeros(t, t), n, &n.transpose(), &p)));
            c3.push(SymMat::zeros(nx));
        }
        for e in &h_basis {
            c1.push(sym(&Mat::block2x2(&e.as_mat().scale(-1.0), &z_nx, &z_nx, &z_nx)));
            c2.push(SymMat::zeros(t + nx));
            c3.push(e.clone());
        }
        let f1 = AffineMatFn::new(SymMat::zeros(2 * nx), c1)?;
        let f2 = AffineMatFn::new(sym(&Mat::block2x2(&Mat::identity(t), &Mat::zeros(t, nx), &Mat::zeros(nx, t), &z_nx)), c2)?;
        let f3 = AffineMatFn::new(SymMat::zeros(nx), c3)?;
        let problem = SdpProblem::new(nv, vec![f1, f2, f3]).with_det_block(2).with_lower_bound(0, 0.0);
        Ok(Prop2Problem { problem, scale, basis, h_basis, nx })
    }

    /// `(varsigma, Y, H)` at the original data scale.
    pub fn unpack(&self, x: &[f64]) -> (f64, Mat, SymMat) {
        let t = self.basis.first().map_or(0, |b| b.rows());
        let mut y = Mat::zeros(t, self.nx);
        for (n, &c) in self.basis.iter().zip(&x[1..]) {
            y = &y + &n.scale(c);
        }
        let off = 1 + self.basis.len();
        let mut h = SymMat::zeros(self.nx);
        for (e, &c) in self.h_basis.iter().zip(&x[off..]) {
            h = h.add(&e.scale(c));
        }
        let c = self.scale;
        (x[0], y.scale(c), h.scale(c * c))
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisOutcome {
    pub bundle: Option<ControllerBundle>,
    pub status: Option<SdpStatus>,
    /// Set when the solver broke down numerically.
    pub breakdown: Option<String>,
}

/// Solves the synthesis problem; `None` means no admissible controller was
/// found for this window.
pub fn synthesize(w: &DataWindow, opts: &SynthesisOptions) -> Option<ControllerBundle> {
    synthesize_detailed(w, opts).bundle
}

pub fn synthesize_detailed(w: &DataWindow, opts: &SynthesisOptions) -> SynthesisOutcome {
    let none = |status, breakdown| SynthesisOutcome { bundle: None, status, breakdown };
    if !(opts.eps_f > 0.0 && opts.eps_f < 1.0) {
        return none(None, Some(format!("eps_F = {} outside (0, 1)", opts.eps_f)));
    }
    if opts.reject_low_rank && w.z_matrix().1 < w.nx() + w.nu() {
        debug!("window at kappa={} is rank deficient, skipped", w.kappa());
        return none(None, None);
    }
    match try_synthesize(w, opts) {
        Ok((bundle, status)) => SynthesisOutcome { bundle, status: Some(status), breakdown: None },
        Err(e) => {
            warn!("synthesis at kappa={} failed: {e}", w.kappa());
            none(None, Some(e.to_string()))
        }
    }
}

fn try_synthesize(w: &DataWindow, opts: &SynthesisOptions) -> Result<(Option<ControllerBundle>, SdpStatus)> {
    let p2 = Prop2Problem::new(w)?;
    let sol = solve_maxdet(&p2.problem, &opts.solver)?;
    if sol.status != SdpStatus::Optimal {
        debug!("synthesis at kappa={} returned {:?}", w.kappa(), sol.status);
        return Ok((None, sol.status));
    }
    Ok((Some(extract(w, &p2, &sol, opts.eps_f)?), sol.status))
}

fn extract(w: &DataWindow, p2: &Prop2Problem, sol: &SdpSolution, eps_f: f64) -> Result<ControllerBundle> {
    let (varsigma, y, h) = p2.unpack(&sol.x);
    let p = SymMat::from_mat(&w.xhat().matmul(&y));
    let s = p.inverse_pd()?;
    let uy = w.u().matmul(&y);
    let k = p.as_mat().solve(&uy.transpose())?.transpose();
    let hat = varsigma / (varsigma + 1.0);
    let f = h.scale((1.0 - eps_f) * hat);
    let s_inv = p;
    let a = gen_eig_min(&h.scale(eps_f), &s_inv)?;
    if !(a > 0.0 && a < 1.0) || !k.is_finite() {
        return Err(Error::Internal(format!("extracted decay parameter a = {a} is outside (0, 1)")));
    }
    Ok(ControllerBundle {
        k,
        s,
        f,
        a1: 1.0 - a,
        a2: 1.0 + 1.0 / varsigma,
        a,
        varsigma,
        y,
        h,
        design: Some(w.clone()),
        scale: p2.scale,
        solver_x: sol.x.clone(),
        solver_iterations: sol.iterations,
    })
}

/// `lambda_min` of every synthesis LMI block at the bundle's solver point.
pub fn solver_margins(b: &ControllerBundle) -> Result<Vec<f64>> {
    let w = b.design.as_ref().ok_or_else(|| Error::InvalidInput("fallback bundle has no solver point".into()))?;
    let p2 = Prop2Problem::with_scale(w, b.scale)?;
    check_point(&p2.problem, &b.solver_x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest relative slack `1 - ratio / bound` seen.
    pub worst_slack: f64,
    /// At least one inflated set was empty, so its samples were skipped.
    pub vacuous: bool,
}

/// Samples members of the `eps`-inflated proximity set of the design window
/// and checks the contraction `V((M_A + M_B K) x) <= (a1 + a2 eps) V(x)` in
/// the worst direction `x`.
pub fn verify_property(b: &ControllerBundle, eps_values: &[f64], num_samples: usize, seed: u64) -> Result<PropertyReport> {
    let w = b.design.as_ref().ok_or_else(|| Error::InvalidInput("fallback bundle has no design window".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_inv = b.s.inverse_pd()?;
    let p = w.nx() + w.nu();
    let mut report = PropertyReport { samples: 0, violations: 0, worst_slack: f64::INFINITY, vacuous: false };
    for &eps in eps_values {
        let f_eps = b.f.add(&s_inv.scale(eps));
        let e = ellipsoid_params(w, &f_eps)?;
        if !e.is_nonempty() {
            report.vacuous = true;
            continue;
        }
        let bound = b.decay_rate_bound(eps);
        for i in 0..num_samples {
            let rho = if i % 2 == 0 { 1.0 } else { rng.gen::<f64>().powf(1.0 / (p * w.nx()) as f64) };
            let (ma, mb) = e.sample(rho, 0.0, &mut rng)?;
            let cl = &ma + &mb.matmul(&b.k);
            let ratio = gen_eig_max(&b.s.congruence(&cl), &b.s)?;
            report.samples += 1;
            if ratio > bound * (1.0 + 1e-7) {
                report.violations += 1;
            }
            report.worst_slack = report.worst_slack.min(1.0 - ratio / bound);
        }
    }
    Ok(report)
}

/// Sanity data for a synthesized bundle: `rank(Z)` of its design window.
pub fn design_rank(b: &ControllerBundle) -> Option<usize> {
    b.design.as_ref().map(|w| w.z_matrix().1)
}
