//! Scenario runner: simulate, analyze, and write per-run artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::hybrid::{run, ControlMode, RunStatus, Trajectory};
use crate::monitor::{analyze, terminal_membership, DiagnosticsReport};
use crate::plant::LtvPlant;

/// Headline numbers of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub mode: String,
    pub seed: u64,
    pub status: RunStatus,
    pub final_norm: f64,
    pub max_norm: f64,
    /// Every episode, the forced one at the end of exploration included.
    pub episodes: Vec<u64>,
    pub synth_attempts: usize,
    pub solver_breakdowns: usize,
    pub bound_ok: bool,
    pub databased_dominates: bool,
    pub tstar: Option<u64>,
    pub membership_tstar: Option<u64>,
    pub thm4_verdict: String,
}

pub const SUMMARY_HEADER: &str = "name,mode,seed,status,final_norm,max_norm,episodes,episode_instants,synth_attempts,solver_breakdowns,bound_ok,databased_dominates,tstar,membership_tstar,thm4_verdict,error";

fn mode_name(m: ControlMode) -> String {
    match m {
        ControlMode::EventTriggered => "event".into(),
        ControlMode::Fixed => "fixed".into(),
        ControlMode::TimeTriggered { period } => format!("time{period}"),
    }
}

fn opt_u64(v: Option<u64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

impl RunSummary {
    pub fn csv_row(&self) -> String {
        let instants: Vec<String> = self.episodes.iter().map(u64::to_string).collect();
        format!(
            "{},{},{},{},{:e},{:e},{},{},{},{},{},{},{},{},{},",
            self.name,
            self.mode,
            self.seed,
            status_name(self.status),
            self.final_norm,
            self.max_norm,
            self.episodes.len(),
            instants.join(" "),
            self.synth_attempts,
            self.solver_breakdowns,
            self.bound_ok,
            self.databased_dominates,
            opt_u64(self.tstar),
            opt_u64(self.membership_tstar),
            self.thm4_verdict
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.name);
        let _ = writeln!(s, "mode: {}", self.mode);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "status: {}", status_name(self.status));
        let _ = writeln!(s, "final_norm: {:e}", self.final_norm);
        let _ = writeln!(s, "max_norm: {:e}", self.max_norm);
        let _ = writeln!(s, "episodes: {}", self.episodes.len());
        let _ = writeln!(s, "episode_instants: {:?}", self.episodes);
        let _ = writeln!(s, "synthesis_attempts: {}", self.synth_attempts);
        let _ = writeln!(s, "solver_breakdowns: {}", self.solver_breakdowns);
        let _ = writeln!(s, "lyapunov_bound_ok: {}", self.bound_ok);
        let _ = writeln!(s, "databased_dominates: {}", self.databased_dominates);
        let _ = writeln!(s, "tstar: {}", opt_u64(self.tstar));
        let _ = writeln!(s, "membership_tstar: {}", opt_u64(self.membership_tstar));
        let _ = writeln!(s, "thm4: {}", self.thm4_verdict);
        s
    }
}

pub fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::Diverged => "diverged",
    }
}

/// Everything one run produced.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub diagnostics: DiagnosticsReport,
    pub artifacts: Vec<PathBuf>,
}

/// Simulates `plant` under `cfg` and runs the certificate analysis.
pub fn simulate(name: &str, plant: &LtvPlant, cfg: &crate::hybrid::EngineConfig) -> Result<(Trajectory, DiagnosticsReport, RunSummary)> {
    let traj = run(plant, cfg)?;
    let diag = analyze(&traj, plant, cfg.c_sigma)?;
    let from = traj.episodes.last().copied().unwrap_or(cfg.window as u64);
    let membership_tstar = terminal_membership(&traj, plant, from)?;
    let summary = RunSummary {
        name: name.to_string(),
        mode: mode_name(cfg.mode),
        seed: cfg.seed,
        status: traj.status,
        final_norm: traj.final_norm(),
        max_norm: traj.max_norm(),
        episodes: traj.episodes.clone(),
        synth_attempts: traj.synth_attempts,
        solver_breakdowns: traj.solver_breakdowns,
        bound_ok: diag.bound_all_ok(),
        databased_dominates: diag.databased_dominates(crate::monitor::BOUND_TOL),
        tstar: diag.tstar,
        membership_tstar,
        thm4_verdict: diag.thm4.verdict.to_string(),
    };
    Ok((traj, diag, summary))
}

/// Runs a scenario and writes `trajectory.csv`, `diagnostics.csv`,
/// `bundles.txt`, `summary.txt` and optionally `norm.svg` into `out`.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<ScenarioOutcome> {
    let plant = cfg.plant.build()?;
    let (trajectory, diagnostics, summary) = simulate(&cfg.name, &plant, &cfg.engine)?;
    let mut artifacts = Vec::new();
    if let Some(dir) = out.or(cfg.output_dir.as_deref()) {
        std::fs::create_dir_all(dir)?;
        let mut write = |file: &str, body: String| -> Result<()> {
            let p = dir.join(file);
            std::fs::write(&p, body)?;
            artifacts.push(p);
            Ok(())
        };
        write("trajectory.csv", trajectory.to_csv())?;
        write("diagnostics.csv", diagnostics.to_csv())?;
        let mut bundles = String::new();
        for (i, b) in trajectory.bundles.iter().enumerate() {
            let _ = writeln!(bundles, "# bundle {i}\n{}", b.to_text());
        }
        write("bundles.txt", bundles)?;
        write("summary.txt", summary.to_text())?;
        if cfg.svg {
            write("norm.svg", norm_svg(&trajectory))?;
        }
    }
    Ok(ScenarioOutcome { summary, trajectory, diagnostics, artifacts })
}

/// Result of one batch member.
#[derive(Clone, Debug)]
pub struct BatchRow {
    pub name: String,
    pub outcome: std::result::Result<RunSummary, String>,
}

impl BatchRow {
    pub fn csv_row(&self) -> String {
        match &self.outcome {
            Ok(s) => s.csv_row(),
            Err(e) => format!("{},,,error,,,,,,,,,,,,{}", self.name, e.replace([',', '\n'], ";")),
        }
    }
}

/// Runs every config concurrently; each writes into `out/<name>` when `out`
/// is given. Failures are recorded per row.
pub fn batch(configs: &[ScenarioConfig], out: Option<&Path>) -> Vec<BatchRow> {
    configs
        .par_iter()
        .map(|c| {
            let dir = out.map(|o| o.join(&c.name));
            BatchRow { name: c.name.clone(), outcome: run_scenario(c, dir.as_deref()).map(|o| o.summary).map_err(|e| e.to_string()) }
        })
        .collect()
}

pub fn batch_table(rows: &[BatchRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Loads every `*.cfg` file of a directory, sorted by file name.
pub fn load_config_dir(dir: &Path) -> Result<Vec<ScenarioConfig>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    paths.sort();
    paths.iter().map(|p| ScenarioConfig::from_file(p)).collect()
}

/// Line plot of `log10 ||x(k)||` with episode instants marked.
pub fn norm_svg(traj: &Trajectory) -> String {
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let pts: Vec<(f64, f64)> = traj
        .norms_by_k()
        .into_iter()
        .map(|(k, n)| (k as f64, n.max(1e-300).log10()))
        .collect();
    let kmax = pts.iter().map(|p| p.0).fold(1.0, f64::max);
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (ymin, ymax) = if ymin.is_finite() && ymax > ymin { (ymin, ymax) } else { (-1.0, 1.0) };
    let sx = |k: f64| pad + k / kmax * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#,
        h - pad,
        w - pad,
        h - pad,
        h - pad
    );
    for &e in &traj.episodes {
        let x = sx(e as f64);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{pad}" x2="{x:.2}" y2="{}" stroke="red" stroke-dasharray="3,3"/>"#, h - pad);
    }
    let poly: Vec<String> = pts.iter().map(|&(k, y)| format!("{:.2},{:.2}", sx(k), sy(y))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="blue" points="{}"/>"#, poly.join(" "));
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-size="12">log10 |x(k)|, range [{ymin:.2}, {ymax:.2}]</text>"#);
    s.push_str("</svg>\n");
    s
}
