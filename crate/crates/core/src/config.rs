//! Scenario configuration: a line-oriented `key = value` format with
//! `[section]` headers. `#` starts a comment.
//!
//! ```text
//! name = switching_l1
//! [plant]
//! kind = switching
//! period = 12
//! ell = 1
//! [controller]
//! mode = event
//! [run]
//! seed = 42
//! x0 = 1, 1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hybrid::{ControlMode, EngineConfig};
use crate::linalg::Mat;
use crate::plant::{a0, b0, LtvPlant};
use crate::synthesis::SynthesisOptions;

/// Plant description as written in a config file.
#[derive(Clone, Debug, PartialEq)]
pub enum PlantSpec {
    Constant { a: Mat, b: Mat },
    Switching { period: u64, ell: f64 },
    Sinusoidal { period: f64, delta_a: f64 },
    Vanishing { period: f64, t_delta: f64 },
    Piecewise { file: PathBuf },
}

impl PlantSpec {
    pub fn build(&self) -> Result<LtvPlant> {
        match self {
            PlantSpec::Constant { a, b } => LtvPlant::constant(a.clone(), b.clone()),
            PlantSpec::Switching { period, ell } => LtvPlant::switching(*period, *ell),
            PlantSpec::Sinusoidal { period, delta_a } => LtvPlant::sinusoidal(*period, *delta_a),
            PlantSpec::Vanishing { period, t_delta } => LtvPlant::vanishing(*period, *t_delta),
            PlantSpec::Piecewise { file } => LtvPlant::from_piecewise_file(file),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantSpec,
    pub engine: EngineConfig,
    pub output_dir: Option<PathBuf>,
    pub svg: bool,
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["name"]),
    ("plant", &["kind", "period", "ell", "delta_a", "t_delta", "file", "a", "b", "kappa0"]),
    ("controller", &["mode", "period", "window", "eps_f", "c_sigma", "reject_low_rank", "tie_tol"]),
    ("run", &["horizon", "seed", "x0", "divergence_threshold", "output", "svg"]),
    ("solver", &["strict_margin", "max_newton_steps", "trace"]),
];

/// Raw `section.key -> (value, line)` table.
fn parse_table(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated section header")))?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                return Err(Error::Config(format!("line {line_no}: unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
        let key = key.trim();
        let allowed = KEYS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            let where_ = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
            return Err(Error::Config(format!("line {line_no}: unknown key `{key}` in {where_}")));
        }
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if out.insert(full.clone(), (value.trim().to_string(), line_no)).is_some() {
            return Err(Error::Config(format!("line {line_no}: duplicate key `{full}`")));
        }
    }
    Ok(out)
}

struct Table(BTreeMap<String, (String, usize)>);

impl Table {
    /// `"line N: "` prefix for messages about `key`.
    fn at(&self, key: &str) -> String {
        self.0.get(key).map_or(String::new(), |(_, line)| format!("line {line}: "))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse `{key}` from {v:?}"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(v, _)| v.as_str())
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((v, line)) = self.0.get(key) else { return Ok(None) };
        v.split([',', ' ', '\t'])
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("line {line}: bad number {s:?} in `{key}`"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Rows separated by `;`, entries by commas or spaces.
    fn matrix(&self, key: &str) -> Result<Option<Mat>> {
        let Some((v, line)) = self.0.get(key) else { return Ok(None) };
        let bad = || Error::Config(format!("line {line}: malformed matrix `{key}`"));
        let rows: Vec<Vec<f64>> = v
            .split(';')
            .map(|r| {
                r.split([',', ' ', '\t'])
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(bad());
        }
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        Ok(Some(Mat::from_rows(&refs)))
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::parse(&text, base, stem)
    }

    /// Parses config text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, default_name: &str) -> Result<Self> {
        let t = Table(parse_table(text)?);
        let kind = t.str("plant.kind").ok_or_else(|| Error::Config("missing key `plant.kind`".into()))?;
        let plant = match kind {
            "constant" => PlantSpec::Constant {
                a: t.matrix("plant.a")?.unwrap_or_else(a0),
                b: t.matrix("plant.b")?.unwrap_or_else(b0),
            },
            "switching" => PlantSpec::Switching { period: t.require("plant.period")?, ell: t.get("plant.ell")?.unwrap_or(1.0) },
            "sinusoidal" => PlantSpec::Sinusoidal {
                period: t.require("plant.period")?,
                delta_a: t.get("plant.delta_a")?.unwrap_or(0.8),
            },
            "vanishing" => PlantSpec::Vanishing {
                period: t.require("plant.period")?,
                t_delta: t.require("plant.t_delta")?,
            },
            "piecewise" => {
                let f: String = t.require("plant.file")?;
                PlantSpec::Piecewise { file: base.join(f) }
            }
            other => return Err(Error::Config(format!("{}unknown plant kind {other:?}", t.at("plant.kind")))),
        };
        let built = plant.build().map_err(|e| Error::Config(format!("plant: {e}")))?;
        let (nx, nu) = (built.nx(), built.nu());

        let window = t.get::<usize>("controller.window")?.unwrap_or(nx + nu);
        let x0 = t.floats("run.x0")?.unwrap_or_else(|| vec![1.0; nx]);
        let mut engine = EngineConfig::new(window, x0);
        engine.kappa0 = t.get("plant.kappa0")?.unwrap_or(0);
        engine.horizon = t.get("run.horizon")?.unwrap_or(100);
        engine.seed = t.get("run.seed")?.unwrap_or(0);
        if let Some(v) = t.get("run.divergence_threshold")? {
            engine.divergence_threshold = v;
        }
        if let Some(v) = t.get("controller.c_sigma")? {
            engine.c_sigma = v;
        }
        if let Some(v) = t.get("controller.tie_tol")? {
            engine.tie_tol = v;
        }
        let mut synthesis = SynthesisOptions::default();
        if let Some(v) = t.get("controller.eps_f")? {
            synthesis.eps_f = v;
        }
        if let Some(v) = t.get("controller.reject_low_rank")? {
            synthesis.reject_low_rank = v;
        }
        if let Some(v) = t.get("solver.strict_margin")? {
            synthesis.solver.strict_margin = v;
        }
        if let Some(v) = t.get("solver.max_newton_steps")? {
            synthesis.solver.max_newton_steps = v;
        }
        synthesis.solver.trace_path = t.str("solver.trace").map(|p| base.join(p));
        engine.synthesis = synthesis;
        engine.mode = match t.str("controller.mode").unwrap_or("event") {
            "event" => ControlMode::EventTriggered,
            "fixed" => ControlMode::Fixed,
            "time" => ControlMode::TimeTriggered { period: t.require("controller.period")? },
            other => return Err(Error::Config(format!("{}unknown controller mode {other:?}", t.at("controller.mode")))),
        };

        let cfg = ScenarioConfig {
            name: t.str("name").unwrap_or(default_name).to_string(),
            plant,
            engine,
            output_dir: t.str("run.output").map(|p| base.join(p)),
            svg: t.get("run.svg")?.unwrap_or(false),
        };
        cfg.validate(nx)?;
        Ok(cfg)
    }

    fn validate(&self, nx: usize) -> Result<()> {
        let e = &self.engine;
        let fail = |m: String| Err(Error::Config(m));
        if e.window == 0 {
            return fail("window must be at least 1".into());
        }
        if e.horizon < e.window as u64 {
            return fail(format!("horizon {} is shorter than the window {}", e.horizon, e.window));
        }
        if !(e.synthesis.eps_f > 0.0 && e.synthesis.eps_f < 1.0) {
            return fail(format!("eps_f must lie in (0,1), got {}", e.synthesis.eps_f));
        }
        if !(e.c_sigma > 0.0 && e.c_sigma <= 1.0) {
            return fail(format!("c_sigma must lie in (0,1], got {}", e.c_sigma));
        }
        if let ControlMode::TimeTriggered { period: 0 } = e.mode {
            return fail("time-triggered period must be at least 1".into());
        }
        if e.x0.len() != nx {
            return fail(format!("x0 has {} entries, plant has {nx} states", e.x0.len()));
        }
        if !(e.synthesis.solver.strict_margin > 0.0) || e.synthesis.solver.max_newton_steps == 0 {
            return fail("solver options must be positive".into());
        }
        if !(e.divergence_threshold > 0.0) || !(e.tie_tol >= 0.0) {
            return fail("divergence_threshold must be positive and tie_tol non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::parse(s, Path::new("."), "t")
    }

    #[test]
    fn defaults_follow_plant_dimensions() {
        let c = parse("[plant]\nkind = switching\nperiod = 12\n").unwrap();
        assert_eq!(c.engine.window, 4);
        assert_eq!(c.engine.horizon, 100);
        assert_eq!(c.engine.synthesis.eps_f, 0.1);
        assert_eq!(c.engine.c_sigma, 0.1);
        assert_eq!(c.engine.mode, ControlMode::EventTriggered);
        assert_eq!(c.engine.x0, vec![1.0, 1.0]);
        assert_eq!(c.name, "t");
    }

    #[test]
    fn full_config() {
        let c = parse(
            "name = demo # comment\n[plant]\nkind = constant\na = 0.5, 0; 0 0.5\nb = 1; 0\n[controller]\nmode = time\nperiod = 8\nwindow = 5\n\
             [run]\nseed = 7\nx0 = 2 -1\nhorizon = 50\n[solver]\nstrict_margin = 1e-7\nmax_newton_steps = 300\n",
        )
        .unwrap();
        assert_eq!(c.name, "demo");
        assert_eq!(c.engine.mode, ControlMode::TimeTriggered { period: 8 });
        assert_eq!(c.engine.window, 5);
        assert_eq!(c.engine.seed, 7);
        assert_eq!(c.engine.x0, vec![2.0, -1.0]);
        assert_eq!(c.engine.synthesis.solver.max_newton_steps, 300);
        match c.plant {
            PlantSpec::Constant { a, b } => {
                assert_eq!(a, Mat::from_rows(&[&[0.5, 0.0], &[0.0, 0.5]]));
                assert_eq!(b.shape(), (2, 1));
            }
            _ => panic!("wrong plant"),
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "[plant]\nkind = warp\n",
            "[plant]\nkind = switching\n",
            "[plant]\nkind = switching\nperiod = 12\nbogus = 1\n",
            "[nowhere]\n",
            "[plant]\nkind = switching\nperiod = 12\n[controller]\neps_f = 1.5\n",
            "[plant]\nkind = switching\nperiod = 12\n[controller]\nmode = time\nperiod = 0\n",
            "[plant]\nkind = switching\nperiod = 12\n[run]\nhorizon = 2\n",
            "[plant]\nkind = switching\nperiod = 12\n[run]\nx0 = 1\n",
            "[plant]\nkind = switching\nperiod = 12\nperiod = 13\n",
            "just text\n",
        ] {
            assert!(matches!(parse(bad), Err(Error::Config(_))), "{bad:?}");
        }
    }
}
