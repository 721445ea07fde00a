//! Closed-loop hybrid system: flows apply the current gain and record data,
//! jumps (episodes) replace the controller from the current window.

use std::fmt::Write as _;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataWindow;
use crate::error::{Error, Result};
use crate::linalg::{norm, Mat};
use crate::plant::LtvPlant;
use crate::synthesis::{synthesize_detailed, ControllerBundle, SynthesisOptions};

/// `sigma(a1) = 1 - c (1 - a1)`.
pub fn sigma(a1: f64, c_sigma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a1) || !(c_sigma > 0.0 && c_sigma <= 1.0) {
        return Err(Error::InvalidInput(format!("sigma needs a1 in [0,1] and c_sigma in (0,1], got {a1}, {c_sigma}")));
    }
    Ok(1.0 - c_sigma * (1.0 - a1))
}

/// `V(x, S) = x^T S x`.
pub fn lyap(x: &[f64], s: &crate::linalg::SymMat) -> f64 {
    s.quad(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlMode {
    EventTriggered,
    /// Keep the gain obtained after exploration.
    Fixed,
    /// Re-synthesize at `T, T + n_p, T + 2 n_p, ...`.
    TimeTriggered { period: u64 },
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub window: usize,
    pub c_sigma: f64,
    pub horizon: u64,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub kappa0: u64,
    pub mode: ControlMode,
    pub synthesis: SynthesisOptions,
    /// Relative slack on the decrease test; equality counts as decrease.
    pub tie_tol: f64,
    pub divergence_threshold: f64,
}

impl EngineConfig {
    pub fn new(window: usize, x0: Vec<f64>) -> Self {
        EngineConfig {
            window,
            c_sigma: 0.1,
            horizon: 100,
            seed: 0,
            x0,
            kappa0: 0,
            mode: ControlMode::EventTriggered,
            synthesis: SynthesisOptions::default(),
            tie_tol: 1e-12,
            divergence_threshold: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub x: Vec<f64>,
    pub kappa: u64,
    pub window: DataWindow,
    pub bundle: ControllerBundle,
    pub xhat: Vec<f64>,
    pub tau: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    InC,
    InD,
}

/// Outcome of the trigger test, carrying the synthesis result on a jump.
#[derive(Debug)]
pub enum Decision {
    Flow { attempted: bool },
    Jump(Box<ControllerBundle>),
}

impl Decision {
    pub fn mode(&self) -> Mode {
        match self {
            Decision::Flow { .. } => Mode::InC,
            Decision::Jump(_) => Mode::InD,
        }
    }
}

/// True when `V(x, S) > sigma(a1) V(xhat, S)` beyond the tie tolerance.
pub fn decrease_violated(q: &HybridState, c_sigma: f64, tie_tol: f64) -> Result<bool> {
    let s = &q.bundle.s;
    let sig = sigma(q.bundle.a1, c_sigma)?;
    Ok(lyap(&q.x, s) > sig * lyap(&q.xhat, s) * (1.0 + tie_tol))
}

/// Trigger test; `synth` is only called when the decrease fails and `tau = 1`.
pub fn classify(
    q: &HybridState,
    c_sigma: f64,
    tie_tol: f64,
    synth: impl FnOnce(&DataWindow) -> Option<ControllerBundle>,
) -> Result<Decision> {
    if q.tau == 0 || !decrease_violated(q, c_sigma, tie_tol)? {
        return Ok(Decision::Flow { attempted: false });
    }
    Ok(match synth(&q.window) {
        Some(b) => Decision::Jump(Box::new(b)),
        None => Decision::Flow { attempted: true },
    })
}

/// Flow map with input `u`: advances the plant, the counter and the window.
pub fn flow_with_input(q: &HybridState, plant: &LtvPlant, u: &[f64]) -> Result<HybridState> {
    let x_plus = plant.step(q.kappa, &q.x, u)?;
    Ok(HybridState {
        window: q.window.push(&q.x, &x_plus, u)?,
        x: x_plus,
        kappa: q.kappa + 1,
        bundle: q.bundle.clone(),
        xhat: q.x.clone(),
        tau: 1,
    })
}

/// Flow map under the current gain.
pub fn flow(q: &HybridState, plant: &LtvPlant) -> Result<HybridState> {
    let u = q.bundle.gain_input(&q.x);
    flow_with_input(q, plant, &u)
}

/// Jump map: install a new controller and lower the toggle.
pub fn jump(q: &HybridState, bundle: ControllerBundle) -> HybridState {
    HybridState { bundle, tau: 0, ..q.clone() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub k: u64,
    pub j: u64,
    pub x: Vec<f64>,
    /// Input applied on the flow leaving this record (or that would be).
    pub u: Vec<f64>,
    pub v: f64,
    pub sigma_a1: f64,
    pub a1: f64,
    /// The record is followed by a jump.
    pub trigger: bool,
    /// Outcome of a synthesis attempted at this record.
    pub synth_feasible: Option<bool>,
    pub kappa: u64,
    pub tau: u8,
    pub exploration: bool,
    /// Index into [`Trajectory::bundles`] of the controller in force.
    pub bundle: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub bundles: Vec<ControllerBundle>,
    /// Physical times `k_j` of the episodes, the forced one included.
    pub episodes: Vec<u64>,
    /// Window at every record, indexed like `records`.
    pub windows: Vec<DataWindow>,
    pub status: RunStatus,
    pub synth_attempts: usize,
    pub solver_breakdowns: usize,
    pub nx: usize,
    pub nu: usize,
    pub window_width: usize,
}

impl Trajectory {
    pub fn final_norm(&self) -> f64 {
        self.records.last().map_or(0.0, |r| norm(&r.x))
    }

    pub fn max_norm(&self) -> f64 {
        self.records.iter().map(|r| norm(&r.x)).fold(0.0, f64::max)
    }

    /// Norm at the last record of every physical time.
    pub fn norms_by_k(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = Vec::new();
        for r in &self.records {
            match out.last_mut() {
                Some(last) if last.0 == r.k => last.1 = norm(&r.x),
                _ => out.push((r.k, norm(&r.x))),
            }
        }
        out
    }

    /// Episodes after the forced one at the end of exploration.
    pub fn adaptive_episodes(&self) -> &[u64] {
        if self.episodes.first() == Some(&(self.window_width as u64)) && self.first_closed_loop().is_some() {
            &self.episodes[1..]
        } else {
            &self.episodes
        }
    }

    /// Index of the first record after the forced synthesis.
    pub fn first_closed_loop(&self) -> Option<usize> {
        self.records.iter().position(|r| !r.exploration && r.j >= 1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,j");
        for i in 1..=self.nx {
            let _ = write!(out, ",x_{i}");
        }
        for i in 1..=self.nu {
            let _ = write!(out, ",u_{i}");
        }
        out.push_str(",V,sigma_a1,a1,trigger,synth_feasible,kappa\n");
        for r in &self.records {
            let _ = write!(out, "{},{}", r.k, r.j);
            for v in r.x.iter().chain(&r.u) {
                let _ = write!(out, ",{v:e}");
            }
            let synth = match r.synth_feasible {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let _ = writeln!(out, ",{:e},{:e},{:e},{},{},{}", r.v, r.sigma_a1, r.a1, u8::from(r.trigger), synth, r.kappa);
        }
        out
    }
}

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn push(&mut self, q: &HybridState, k: u64, j: u64, u: Vec<f64>, c_sigma: f64, exploration: bool) -> Result<()> {
        let b = &q.bundle;
        self.traj.records.push(Record {
            k,
            j,
            x: q.x.clone(),
            u,
            v: lyap(&q.x, &b.s),
            sigma_a1: sigma(b.a1, c_sigma)?,
            a1: b.a1,
            trigger: false,
            synth_feasible: None,
            kappa: q.kappa,
            tau: q.tau,
            exploration,
            bundle: self.traj.bundles.len() - 1,
        });
        self.traj.windows.push(q.window.clone());
        Ok(())
    }

    fn last(&mut self) -> &mut Record {
        self.traj.records.last_mut().expect("at least one record")
    }
}

fn diverged(x: &[f64], threshold: f64) -> bool {
    x.iter().any(|v| !v.is_finite()) || norm(x) > threshold
}

/// Exploration on `[0, T)`, forced synthesis at `k = T`, then closed loop
/// until the horizon.
pub fn run(plant: &LtvPlant, cfg: &EngineConfig) -> Result<Trajectory> {
    let (nx, nu, t) = (plant.nx(), plant.nu(), cfg.window);
    if cfg.x0.len() != nx {
        return Err(Error::InvalidInput(format!("x0 has {} entries, plant has {nx} states", cfg.x0.len())));
    }
    if cfg.horizon < t as u64 {
        return Err(Error::InvalidInput(format!("horizon {} is shorter than the window {t}", cfg.horizon)));
    }
    sigma(1.0, cfg.c_sigma)?;
    if let ControlMode::TimeTriggered { period: 0 } = cfg.mode {
        return Err(Error::InvalidInput("time-triggered period must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fallback = ControllerBundle::fallback(nx, nu);
    let mut q = HybridState {
        x: cfg.x0.clone(),
        kappa: cfg.kappa0,
        window: DataWindow::zeros(nx, nu, t)?.with_kappa(cfg.kappa0),
        bundle: fallback.clone(),
        xhat: cfg.x0.clone(),
        tau: 1,
    };
    let mut rec = Recorder {
        traj: Trajectory {
            records: Vec::new(),
            bundles: vec![fallback.clone()],
            episodes: Vec::new(),
            windows: Vec::new(),
            status: RunStatus::Completed,
            synth_attempts: 0,
            solver_breakdowns: 0,
            nx,
            nu,
            window_width: t,
        },
    };
    let (mut k, mut j) = (0u64, 0u64);

    while k < t as u64 {
        let u: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        rec.push(&q, k, j, u.clone(), cfg.c_sigma, true)?;
        q = flow_with_input(&q, plant, &u)?;
        k += 1;
        if diverged(&q.x, cfg.divergence_threshold) {
            rec.push(&q, k, j, vec![0.0; nu], cfg.c_sigma, true)?;
            rec.traj.status = RunStatus::Diverged;
            return Ok(rec.traj);
        }
    }

    let attempt = |w: &DataWindow, traj: &mut Trajectory| {
        traj.synth_attempts += 1;
        let out = synthesize_detailed(w, &cfg.synthesis);
        if out.breakdown.is_some() {
            traj.solver_breakdowns += 1;
        }
        out.bundle
    };

    // Forced episode at the end of exploration.
    rec.push(&q, k, j, q.bundle.gain_input(&q.x), cfg.c_sigma, true)?;
    match attempt(&q.window, &mut rec.traj) {
        Some(b) => {
            let r = rec.last();
            r.trigger = true;
            r.synth_feasible = Some(true);
            rec.traj.bundles.push(b.clone());
            rec.traj.episodes.push(k);
            q = jump(&q, b);
            j += 1;
        }
        None => {
            rec.last().synth_feasible = Some(false);
            warn!("initial synthesis infeasible; continuing with the zero gain");
            rec.traj.records.pop();
            rec.traj.windows.pop();
        }
    }

    loop {
        let is_first = rec.traj.records.last().is_some_and(|r| r.k == k && r.j == j);
        if !is_first {
            rec.push(&q, k, j, q.bundle.gain_input(&q.x), cfg.c_sigma, false)?;
        }
        if k >= cfg.horizon {
            break;
        }
        let decision = match cfg.mode {
            ControlMode::EventTriggered => {
                let traj = &mut rec.traj;
                classify(&q, cfg.c_sigma, cfg.tie_tol, |w| attempt(w, traj))?
            }
            ControlMode::Fixed => Decision::Flow { attempted: false },
            ControlMode::TimeTriggered { period } => {
                let due = k > t as u64 && (k - t as u64) % period == 0 && q.tau == 1;
                if due {
                    match attempt(&q.window, &mut rec.traj) {
                        Some(b) => Decision::Jump(Box::new(b)),
                        None => Decision::Flow { attempted: true },
                    }
                } else {
                    Decision::Flow { attempted: false }
                }
            }
        };
        match decision {
            Decision::Jump(b) => {
                let r = rec.last();
                r.trigger = true;
                r.synth_feasible = Some(true);
                rec.traj.bundles.push((*b).clone());
                rec.traj.episodes.push(k);
                q = jump(&q, *b);
                j += 1;
            }
            Decision::Flow { attempted } => {
                if attempted {
                    rec.last().synth_feasible = Some(false);
                }
                q = flow(&q, plant)?;
                k += 1;
                if diverged(&q.x, cfg.divergence_threshold) {
                    rec.push(&q, k, j, vec![0.0; nu], cfg.c_sigma, false)?;
                    rec.traj.status = RunStatus::Diverged;
                    break;
                }
            }
        }
    }
    Ok(rec.traj)
}

/// Gain in force at every record.
pub fn gains(traj: &Trajectory) -> Vec<&Mat> {
    traj.records.iter().map(|r| &traj.bundles[r.bundle].k).collect()
}
