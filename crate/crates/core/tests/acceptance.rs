//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria 1-4 are scenario-reproduction checks and are reported without
//! failing the process unless `DDETC_ACCEPTANCE_STRICT=1` is set; criteria
//! 5-9 always gate the exit status.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ddetc::experiment::simulate;
use ddetc::hybrid::{ControlMode, EngineConfig, RunStatus, Trajectory};
use ddetc::monitor::terminal_membership;
use ddetc::plant::LtvPlant;
use ddetc::suites::{reference_runs, run_suite, ReferenceRun, REFERENCE_SEED, REFERENCE_X0};

const FIRST_SWITCH: u64 = 13;
const ORDER_RTOL: f64 = 1e-9;

struct Line {
    id: usize,
    passed: bool,
    gating: bool,
    detail: String,
}

fn cfg(mode: ControlMode) -> EngineConfig {
    let mut c = EngineConfig::new(4, REFERENCE_X0.to_vec());
    c.seed = REFERENCE_SEED;
    c.mode = mode;
    c
}

fn timed(plant: &LtvPlant, c: &EngineConfig) -> (Trajectory, Duration) {
    let t0 = Instant::now();
    let (traj, _, _) = simulate("timed", plant, c).expect("simulation");
    (traj, t0.elapsed())
}

/// `||x(k)|| <= 1e-2 max ||x||` for every `k >= 80`, on a completed run.
fn converges(traj: &Trajectory) -> bool {
    let norms = traj.norms_by_k();
    let max = norms.iter().map(|p| p.1).fold(0.0, f64::max);
    traj.status == RunStatus::Completed && norms.iter().filter(|p| p.0 >= 80).all(|p| p.1 <= 1e-2 * max)
}

fn run<'a>(runs: &'a [ReferenceRun], name: &str) -> &'a ReferenceRun {
    runs.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("missing reference run {name}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion1() -> Line {
    let plant = LtvPlant::switching(12, 1.0).unwrap();
    let (traj, dt) = timed(&plant, &cfg(ControlMode::EventTriggered));
    let conv = converges(&traj);
    let count = traj.episodes.len();
    let near_switch = traj.episodes.iter().any(|&e| (FIRST_SWITCH..=FIRST_SWITCH + 3).contains(&e));
    let fast = dt < Duration::from_secs(10);
    Line {
        id: 1,
        passed: conv && count <= 10 && near_switch && fast,
        gating: false,
        detail: format!(
            "switching event-triggered: converges={conv} (final {:.3e}, max {:.3e}), episodes={count} {:?}, episode near first switch={near_switch}, runtime {:.2}s",
            traj.final_norm(),
            traj.max_norm(),
            traj.episodes,
            dt.as_secs_f64()
        ),
    }
}

fn criterion2() -> Line {
    let (hi, dt_hi) = timed(&LtvPlant::switching(12, 2.5).unwrap(), &cfg(ControlMode::Fixed));
    let (lo, dt_lo) = timed(&LtvPlant::switching(12, 1.0).unwrap(), &cfg(ControlMode::Fixed));
    let hi_div = hi.status == RunStatus::Diverged && hi.records.last().is_some_and(|r| r.k < 100);
    let lo_ok = lo.status == RunStatus::Completed;
    let fast = dt_hi < Duration::from_secs(5) && dt_lo < Duration::from_secs(5);
    Line {
        id: 2,
        passed: hi_div && lo_ok && fast,
        gating: false,
        detail: format!(
            "fixed gain: l=2.5 diverged={hi_div} (final {:.3e}), l=1 completed={lo_ok} (final {:.3e}), runtimes {:.2}s/{:.2}s",
            hi.final_norm(),
            lo.final_norm(),
            dt_hi.as_secs_f64(),
            dt_lo.as_secs_f64()
        ),
    }
}

fn criterion3(runs: &[ReferenceRun]) -> Line {
    let med = |np: u64| {
        median(
            runs.iter()
                .filter(|r| r.cfg.mode == (ControlMode::TimeTriggered { period: np }))
                .map(|r| r.summary.final_norm)
                .collect(),
        )
    };
    let (m8, m12, m16) = (med(8), med(12), med(16));
    // Differences at roundoff level do not count as an ordering.
    let below = |a: f64, b: f64| a < b * (1.0 - ORDER_RTOL);
    Line {
        id: 3,
        passed: below(m12, m8) && below(m12, m16),
        gating: false,
        detail: format!("time-triggered median final norm: n_p=8 {m8:.17e}, n_p=12 {m12:.17e}, n_p=16 {m16:.17e}"),
    }
}

fn criterion4(runs: &[ReferenceRun]) -> Line {
    let names = ["sinusoidal_p10_event", "sinusoidal_p20_event", "sinusoidal_p40_event", "vanishing_p10_event"];
    let mut ok = true;
    let mut parts = Vec::new();
    for n in names {
        let r = run(runs, n);
        let conv = converges(&r.traj);
        let count = r.traj.episodes.len();
        ok &= conv && count <= 10;
        parts.push(format!("{n}: converges={conv} episodes={count}"));
    }
    let v = run(runs, "vanishing_p10_event");
    let from = v.traj.episodes.last().copied().unwrap_or(0);
    let cor = terminal_membership(&v.traj, &v.plant, from).expect("membership diagnostic");
    ok &= cor.is_some();
    parts.push(format!("vanishing membership after final episode: {cor:?}"));
    Line { id: 4, passed: ok, gating: false, detail: parts.join("; ") }
}

fn suite_line(id: usize, suites: &[&str], runs: &[ReferenceRun]) -> Line {
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for s in suites {
        let rep = run_suite(s, runs).expect("suite");
        let ok = rep.checks.iter().filter(|c| c.passed).count();
        parts.push(format!("{s} suite {ok}/{} checks", rep.checks.len()));
        if rep.checks.len() <= 4 {
            parts.extend(rep.checks.iter().filter(|c| !c.detail.is_empty()).map(|c| format!("{}: {}", c.name, c.detail)));
        }
        failures.extend(rep.checks.iter().filter(|c| !c.passed).map(|c| format!("{s}:{} ({})", c.name, c.detail)));
    }
    let passed = failures.is_empty();
    if !passed {
        parts.push(format!("failed: {}", failures.join("; ")));
    }
    Line { id, passed, gating: true, detail: parts.join(", ") }
}

fn main() -> ExitCode {
    // libtest flags such as `--list` or `--nocapture` are accepted and ignored.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let strict = std::env::var("DDETC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let runs = reference_runs().expect("reference runs");
    let lines = vec![
        criterion1(),
        criterion2(),
        criterion3(&runs),
        criterion4(&runs),
        suite_line(5, &["property1"], &runs),
        suite_line(6, &["lemma5"], &runs),
        suite_line(7, &["prop3"], &runs),
        suite_line(8, &["solver"], &runs),
        suite_line(9, &["lemma3"], &runs),
    ];
    let mut failed_gate = false;
    for l in &lines {
        let tag = if l.passed { "PASS" } else { "FAIL" };
        let note = if !l.passed && !l.gating && !strict { " (reported, not gating)" } else { "" };
        println!("criterion {}: {tag}{note} - {}", l.id, l.detail);
        failed_gate |= !l.passed && (l.gating || strict);
    }
    let passed = lines.iter().filter(|l| l.passed).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if failed_gate {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
