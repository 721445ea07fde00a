//! Small dense determinant-maximization and LMI feasibility solver.
//!
//! Problems have the form
//!
//! ```text
//!   maximize   log det F_d(x)
//!   subject to F_i(x) = F_i0 + sum_k x_k F_ik  >  0,   i = 1..m
//! ```
//!
//! with every strict inequality read as `F_i(x) >= strict_margin * I`.
//! The solver is a textbook log-barrier path-following method with damped
//! Newton steps: a phase I problem (maximize a common margin `t`) finds a
//! strictly interior point or certifies that none exists, and a phase II
//! barrier sweep over `mu = 1, 10, ..., 1e6` maximizes the log-determinant.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, lower_tri_inverse, sym_eig, Mat, SymMat};

/// Symmetric-matrix-valued affine function `F(x) = C + sum_k x_k F_k`.
#[derive(Clone, Debug)]
pub struct AffineMatFn {
    constant: SymMat,
    coefficients: Vec<SymMat>,
}

impl AffineMatFn {
    pub fn new(constant: SymMat, coefficients: Vec<SymMat>) -> Result<Self> {
        let n = constant.dim();
        if n == 0 {
            return Err(Error::InvalidInput("affine matrix function of dimension 0".into()));
        }
        if let Some(bad) = coefficients.iter().position(|c| c.dim() != n) {
            return Err(Error::InvalidInput(format!("coefficient {bad} has dimension {} (expected {n})", coefficients[bad].dim())));
        }
        Ok(AffineMatFn { constant, coefficients })
    }

    /// A constraint that does not depend on any of the `num_vars` variables.
    pub fn constant(constant: SymMat, num_vars: usize) -> Self {
        let n = constant.dim();
        AffineMatFn { constant, coefficients: vec![SymMat::zeros(n); num_vars] }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn num_vars(&self) -> usize {
        self.coefficients.len()
    }

    pub fn constant_term(&self) -> &SymMat {
        &self.constant
    }

    pub fn coefficients(&self) -> &[SymMat] {
        &self.coefficients
    }

    pub fn eval(&self, x: &[f64]) -> SymMat {
        let mut m = self.constant.as_mat().clone();
        for (c, &xi) in self.coefficients.iter().zip(x) {
            if xi != 0.0 {
                m = &m + &c.as_mat().scale(xi);
            }
        }
        SymMat::from_mat(&m)
    }

    fn shifted(&self, shift: f64) -> Self {
        let n = self.dim();
        AffineMatFn {
            constant: self.constant.sub(&SymMat::identity(n).scale(shift)),
            coefficients: self.coefficients.clone(),
        }
    }

    /// Same function over `extra` additional trailing variables with the given
    /// coefficients.
    fn extended(&self, extra: &[SymMat]) -> Self {
        let mut coefficients = self.coefficients.clone();
        coefficients.extend_from_slice(extra);
        AffineMatFn { constant: self.constant.clone(), coefficients }
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub num_vars: usize,
    /// Each constraint is required to be positive definite.
    pub constraints: Vec<AffineMatFn>,
    /// Index into `constraints` whose log-determinant is maximized.
    pub det_block: Option<usize>,
    /// Optional strict lower bound per variable, encoded as a 1x1 block.
    pub var_bounds: Vec<Option<f64>>,
}

impl SdpProblem {
    pub fn new(num_vars: usize, constraints: Vec<AffineMatFn>) -> Self {
        SdpProblem { num_vars, constraints, det_block: None, var_bounds: vec![None; num_vars] }
    }

    pub fn with_det_block(mut self, idx: usize) -> Self {
        self.det_block = Some(idx);
        self
    }

    pub fn with_lower_bound(mut self, var: usize, lb: f64) -> Self {
        self.var_bounds[var] = Some(lb);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::InvalidInput("problem has no constraints".into()));
        }
        if self.var_bounds.len() != self.num_vars {
            return Err(Error::InvalidInput("var_bounds length differs from num_vars".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.num_vars() != self.num_vars {
                return Err(Error::InvalidInput(format!("constraint {i} has {} coefficients, expected {}", c.num_vars(), self.num_vars)));
            }
        }
        if let Some(d) = self.det_block {
            if d >= self.constraints.len() {
                return Err(Error::InvalidInput(format!("det_block {d} out of range")));
            }
        }
        Ok(())
    }

    /// User constraints followed by one 1x1 block per lower-bounded variable.
    fn all_constraints(&self) -> Vec<AffineMatFn> {
        let mut out = self.constraints.clone();
        for (k, lb) in self.var_bounds.iter().enumerate() {
            if let Some(lb) = lb {
                let mut coeffs = vec![SymMat::zeros(1); self.num_vars];
                coeffs[k] = SymMat::identity(1);
                out.push(AffineMatFn { constant: SymMat::from_diag(&[-lb]), coefficients: coeffs });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Feasible,
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub status: SdpStatus,
    /// `lambda_min` of every constraint at `x`, followed by the margins of
    /// the variable lower bounds.
    pub min_margins: Vec<f64>,
    pub logdet_value: Option<f64>,
    /// Log-determinant at the end of every phase II barrier stage.
    pub stage_logdets: Vec<f64>,
    /// Newton decrement of the last centering problem.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_success(&self) -> bool {
        matches!(self.status, SdpStatus::Feasible | SdpStatus::Optimal)
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub strict_margin: f64,
    pub max_newton_steps: usize,
    pub mu_start: f64,
    pub mu_factor: f64,
    pub mu_final: f64,
    /// Final barrier weight of the phase I margin maximization.
    pub phase1_mu_final: f64,
    /// Upper cap on the phase I margin variable.
    pub phase1_cap: f64,
    /// Every variable is kept inside `|x_k| < box_radius`.
    pub box_radius: f64,
    /// Centering stops once the Newton decrement drops below this.
    pub newton_tol: f64,
    pub trace_path: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            strict_margin: 1e-6,
            max_newton_steps: 200,
            mu_start: 1.0,
            mu_factor: 10.0,
            mu_final: 1e6,
            phase1_mu_final: 1e8,
            phase1_cap: 1.0,
            box_radius: 1e6,
            newton_tol: 1e-8,
            trace_path: None,
        }
    }
}

/// `lambda_min(F_i(x))` for every constraint of `p` (bounds included).
pub fn check_point(p: &SdpProblem, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.num_vars {
        return Err(Error::InvalidInput(format!("point has {} entries, problem has {} variables", x.len(), p.num_vars)));
    }
    p.all_constraints().iter().map(|c| c.eval(x).lambda_min()).collect()
}

/// Barrier objective over `z`:
/// `-mu * (lin . z + log det D(z)) - sum_i log det G_i(z)`.
struct Barrier {
    blocks: Vec<AffineMatFn>,
    lin: Vec<f64>,
    det: Option<AffineMatFn>,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Mat,
}

/// `-log det G` with gradient and Hessian accumulated into `out`, scaled by
/// `weight`. Returns `None` when `G(z)` is not positive definite.
fn accumulate_logdet(f: &AffineMatFn, z: &[f64], weight: f64, out: &mut Eval) -> Option<()> {
    let g = f.eval(z);
    let l = cholesky(&g)?;
    let n = g.dim();
    let logdet: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
    out.value -= weight * logdet;
    let li = lower_tri_inverse(&l);
    let nv = z.len();
    let ws: Vec<Option<Mat>> = f
        .coefficients
        .iter()
        .map(|c| if c.as_mat().max_abs() == 0.0 { None } else { Some(li.matmul(c.as_mat()).mul_t(&li)) })
        .collect();
    for i in 0..nv {
        let Some(wi) = &ws[i] else { continue };
        out.grad[i] -= weight * wi.trace();
        for j in 0..=i {
            let Some(wj) = &ws[j] else { continue };
            let h: f64 = wi.as_slice().iter().zip(wj.as_slice()).map(|(a, b)| a * b).sum();
            out.hess[(i, j)] += weight * h;
            if i != j {
                out.hess[(j, i)] += weight * h;
            }
        }
    }
    Some(())
}

impl Barrier {
    fn eval(&self, z: &[f64], mu: f64) -> Option<Eval> {
        let nv = z.len();
        let mut out = Eval { value: 0.0, grad: vec![0.0; nv], hess: Mat::zeros(nv, nv) };
        for b in &self.blocks {
            accumulate_logdet(b, z, 1.0, &mut out)?;
        }
        if let Some(d) = &self.det {
            accumulate_logdet(d, z, mu, &mut out)?;
        }
        for (k, c) in self.lin.iter().enumerate() {
            out.value -= mu * c * z[k];
            out.grad[k] -= mu * c;
        }
        Some(out)
    }

    fn value(&self, z: &[f64], mu: f64) -> Option<f64> {
        let mut v = 0.0;
        for b in self.blocks.iter() {
            let l = cholesky(&b.eval(z))?;
            v -= (0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum::<f64>();
        }
        if let Some(d) = &self.det {
            let l = cholesky(&d.eval(z))?;
            v -= mu * (0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum::<f64>();
        }
        v -= mu * self.lin.iter().zip(z).map(|(c, x)| c * x).sum::<f64>();
        Some(v)
    }
}

struct Tracer {
    out: Option<BufWriter<File>>,
}

impl Tracer {
    fn new(path: &Option<PathBuf>) -> Result<Self> {
        let out = match path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p)?);
                writeln!(w, "phase,iteration,mu,min_margin,logdet,decrement")?;
                Some(w)
            }
            None => None,
        };
        Ok(Tracer { out })
    }

    fn record(&mut self, phase: u8, it: usize, mu: f64, margin: f64, logdet: f64, dec: f64) {
        if let Some(w) = self.out.as_mut() {
            let _ = writeln!(w, "{phase},{it},{mu:e},{margin:e},{logdet:e},{dec:e}");
        }
    }
}

enum Centering {
    Converged { decrement: f64 },
    Stalled { decrement: f64 },
    OutOfSteps { decrement: f64 },
}

/// Damped Newton centering of `barrier` at weight `mu`, starting from the
/// strictly feasible `z`. `early_exit` is checked after every step.
fn center(
    barrier: &Barrier,
    z: &mut Vec<f64>,
    mu: f64,
    opts: &SolverOptions,
    steps: &mut usize,
    mut early_exit: impl FnMut(&[f64]) -> bool,
    mut on_step: impl FnMut(&[f64], f64),
) -> Result<Centering> {
    loop {
        let ev = barrier
            .eval(z, mu)
            .ok_or_else(|| Error::SolverBreakdown("iterate left the interior".into()))?;
        let eh = sym_eig(&SymMat::from_mat(&ev.hess))?;
        let lmin = eh.values.first().copied().unwrap_or(0.0);
        let reg = if lmin < 1e-12 { 1e-10 } else { 0.0 };
        if eh.values.iter().any(|&l| l + reg <= 0.0) {
            return Err(Error::SolverBreakdown(format!("indefinite Newton system (lambda_min = {lmin:e})")));
        }
        let vt_g = eh.vectors.transpose().mul_vec(&ev.grad);
        let scaled: Vec<f64> = vt_g.iter().zip(&eh.values).map(|(g, l)| -g / (l + reg)).collect();
        let dz = eh.vectors.mul_vec(&scaled);
        let slope: f64 = ev.grad.iter().zip(&dz).map(|(g, d)| g * d).sum();
        let decrement = (-slope).max(0.0).sqrt();
        if decrement <= opts.newton_tol {
            return Ok(Centering::Converged { decrement });
        }
        if *steps >= opts.max_newton_steps {
            return Ok(Centering::OutOfSteps { decrement });
        }
        let mut alpha = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + alpha * d).collect();
            if let Some(v) = barrier.value(&trial, mu) {
                if v < ev.value && v <= ev.value + 0.25 * alpha * slope {
                    break Some(trial);
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                break None;
            }
        };
        *steps += 1;
        match accepted {
            Some(trial) => *z = trial,
            None => return Ok(Centering::Stalled { decrement }),
        }
        on_step(z, decrement);
        if early_exit(z) {
            return Ok(Centering::Converged { decrement });
        }
    }
}

fn box_blocks(nv: usize, active: usize, radius: f64) -> Vec<AffineMatFn> {
    let mut out = Vec::with_capacity(2 * active);
    for k in 0..active {
        for sign in [1.0, -1.0] {
            let mut coeffs = vec![SymMat::zeros(1); nv];
            coeffs[k] = SymMat::from_diag(&[-sign]);
            out.push(AffineMatFn { constant: SymMat::from_diag(&[radius]), coefficients: coeffs });
        }
    }
    out
}

fn min_margin(cons: &[AffineMatFn], x: &[f64]) -> Result<f64> {
    let mut m = f64::INFINITY;
    for c in cons {
        m = m.min(c.eval(x).lambda_min()?);
    }
    Ok(m)
}

struct PhaseOne {
    x: Vec<f64>,
    margin: f64,
    exhausted: bool,
}

/// Maximizes `t` subject to `F_i(x) >= t I`, `t <= cap` and the box.
fn phase_one(
    p: &SdpProblem,
    cons: &[AffineMatFn],
    opts: &SolverOptions,
    steps: &mut usize,
    stop_at: Option<f64>,
    tracer: &mut Tracer,
) -> Result<PhaseOne> {
    let n = p.num_vars;
    let nz = n + 1;
    let x0 = vec![0.0; n];
    let m0 = min_margin(cons, &x0)?;
    let t0 = (m0 - 1.0).min(opts.phase1_cap - 1.0);
    let mut blocks: Vec<AffineMatFn> = cons
        .iter()
        .map(|c| c.extended(&[SymMat::identity(c.dim()).scale(-1.0)]))
        .collect();
    let mut cap_coeffs = vec![SymMat::zeros(1); nz];
    cap_coeffs[n] = SymMat::from_diag(&[-1.0]);
    blocks.push(AffineMatFn { constant: SymMat::from_diag(&[opts.phase1_cap]), coefficients: cap_coeffs });
    blocks.extend(box_blocks(nz, n, opts.box_radius));
    let mut lin = vec![0.0; nz];
    lin[n] = 1.0;
    let barrier = Barrier { blocks, lin, det: None };

    let mut z = x0.clone();
    z.push(t0);
    let mut best_x = x0;
    let mut best_margin = m0;
    let mut mu = opts.mu_start;
    let mut exhausted = false;
    let mut reached = stop_at.is_some_and(|s| m0 >= s);
    while !reached {
        let mut step_margin = |zz: &[f64]| -> bool {
            let m = min_margin(cons, &zz[..n]).unwrap_or(f64::NEG_INFINITY);
            if m > best_margin {
                best_margin = m;
                best_x = zz[..n].to_vec();
            }
            stop_at.is_some_and(|s| m >= s)
        };
        let outcome = center(&barrier, &mut z, mu, opts, steps, &mut step_margin, |zz, dec| {
            tracer.record(1, 0, mu, zz[n], f64::NAN, dec);
        })?;
        reached = stop_at.is_some_and(|s| best_margin >= s);
        match outcome {
            Centering::OutOfSteps { .. } => {
                exhausted = true;
                break;
            }
            Centering::Stalled { .. } | Centering::Converged { .. } => {}
        }
        if mu >= opts.phase1_mu_final {
            break;
        }
        mu *= opts.mu_factor;
    }
    let end_margin = min_margin(cons, &z[..n])?;
    if end_margin >= best_margin && !reached {
        best_margin = end_margin;
        best_x = z[..n].to_vec();
    }
    Ok(PhaseOne { x: best_x, margin: best_margin, exhausted })
}

/// Finds a point with every constraint at least `strict_margin` inside the
/// PD cone, or decides there is none.
pub fn solve_feasibility(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.validate()?;
    let cons = p.all_constraints();
    let mut tracer = Tracer::new(&opts.trace_path)?;
    let mut steps = 0;
    let ph1 = phase_one(p, &cons, opts, &mut steps, None, &mut tracer)?;
    let status = if ph1.margin >= opts.strict_margin {
        SdpStatus::Feasible
    } else if ph1.exhausted {
        SdpStatus::MaxIter
    } else {
        SdpStatus::Infeasible
    };
    let min_margins = check_point(p, &ph1.x)?;
    let logdet_value = match p.det_block {
        Some(d) if status == SdpStatus::Feasible => Some(logdet(&p.constraints[d].eval(&ph1.x))?),
        _ => None,
    };
    Ok(SdpSolution { x: ph1.x, status, min_margins, logdet_value, stage_logdets: Vec::new(), kkt_residual: f64::NAN, iterations: steps })
}

fn logdet(s: &SymMat) -> Result<f64> {
    let l = cholesky(s).ok_or(Error::NotPositiveDefinite)?;
    Ok((0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Maximizes `log det` of the designated block over the strictly feasible
/// set. Phase I supplies the starting point; an infeasible phase I is
/// reported through the returned status.
pub fn solve_maxdet(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.validate()?;
    let det_idx = p.det_block.ok_or_else(|| Error::InvalidInput("solve_maxdet needs det_block".into()))?;
    let cons = p.all_constraints();
    let mut tracer = Tracer::new(&opts.trace_path)?;
    let mut steps = 0;
    let target = 10.0 * opts.strict_margin;
    let ph1 = phase_one(p, &cons, opts, &mut steps, Some(target), &mut tracer)?;
    if ph1.margin < opts.strict_margin || ph1.x.iter().any(|v| v.abs() >= opts.box_radius) {
        let status = if ph1.exhausted { SdpStatus::MaxIter } else { SdpStatus::Infeasible };
        let min_margins = check_point(p, &ph1.x)?;
        return Ok(SdpSolution { x: ph1.x, status, min_margins, logdet_value: None, stage_logdets: Vec::new(), kkt_residual: f64::NAN, iterations: steps });
    }
    if ph1.margin <= opts.strict_margin {
        return Err(Error::Internal("phase I point is not strictly interior".into()));
    }

    let n = p.num_vars;
    let mut blocks: Vec<AffineMatFn> = cons.iter().map(|c| c.shifted(opts.strict_margin)).collect();
    blocks.extend(box_blocks(n, n, opts.box_radius));
    let barrier = Barrier { blocks, lin: vec![0.0; n], det: Some(p.constraints[det_idx].clone()) };

    let mut x = ph1.x;
    let mut mu = opts.mu_start;
    let mut stage_logdets = Vec::new();
    let mut kkt;
    let mut status = SdpStatus::Optimal;
    loop {
        let outcome = center(&barrier, &mut x, mu, opts, &mut steps, |_| false, |xx, dec| {
            let m = min_margin(&cons, xx).unwrap_or(f64::NAN);
            let ld = logdet(&p.constraints[det_idx].eval(xx)).unwrap_or(f64::NAN);
            tracer.record(2, 0, mu, m, ld, dec);
        })?;
        stage_logdets.push(logdet(&p.constraints[det_idx].eval(&x))?);
        match outcome {
            Centering::Converged { decrement } | Centering::Stalled { decrement } => kkt = decrement,
            Centering::OutOfSteps { decrement } => {
                kkt = decrement;
                status = SdpStatus::MaxIter;
                break;
            }
        }
        if mu >= opts.mu_final {
            break;
        }
        mu *= opts.mu_factor;
    }
    let min_margins = check_point(p, &x)?;
    let logdet_value = stage_logdets.last().copied();
    Ok(SdpSolution { x, status, min_margins, logdet_value, stage_logdets, kkt_residual: kkt, iterations: steps })
}
