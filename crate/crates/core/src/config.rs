//! Run configuration: a small TOML document.
//!
//! ```toml
//! [grid]
//! n = 128                      # or n1 / n2
//!
//! [f]
//! modes = [[1, 0, 0.3, 0.0]]   # (k1, k2, amplitude, phase) on top of the constant 1
//!
//! [g]
//! modes = [[0, 1, 0.25, 0.0]]
//!
//! [schedule]
//! lambda = "linear"            # or "power" with `exponent`
//!
//! [continuation]
//! t0 = 1e-3
//! steps = 32                   # or "adaptive"
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section except `[f]` and `[g]` is optional.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::continuation::{ContinuationOptions, Grading, Predictor, Steps};
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::monge_ampere::{CostSchedule, DensityPair};
use crate::trig::{CosineMode, TrigPoly2};

/// Lower bound every configured density must respect.
pub const DENSITY_FLOOR: f64 = 0.05;

const SCHEMA: &[(&str, &[&str])] = &[
    ("grid", &["n", "n1", "n2"]),
    ("f", &["modes"]),
    ("g", &["modes"]),
    ("schedule", &["lambda", "exponent"]),
    (
        "continuation",
        &[
            "t0",
            "t1",
            "steps",
            "grading",
            "predictor",
            "newton_tol",
            "max_newton",
            "t_switch",
            "linear_tol",
            "pushforward_k",
        ],
    ),
    ("output", &["dir", "csv", "binary", "per_step"]),
];

/// `1 + Σ a cos(2π(k·x) + φ)`, normalized to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySpec {
    pub modes: Vec<CosineMode>,
}

impl DensitySpec {
    pub fn poly(&self) -> TrigPoly2 {
        TrigPoly2::normalized_density(self.modes.iter().copied())
    }

    /// `1 / (1 + mean of the modes)`; 1 unless a zero mode is present.
    pub fn normalization(&self) -> f64 {
        1.0 / TrigPoly2::new(1.0, self.modes.iter().copied()).mean()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub binary: bool,
    /// Binary potential of every trajectory record.
    pub per_step: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: true,
            binary: true,
            per_step: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n1: usize,
    pub n2: usize,
    pub f: DensitySpec,
    pub g: DensitySpec,
    pub schedule: CostSchedule,
    pub continuation: ContinuationOptions,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n1, self.n2)
    }

    pub fn pair(&self) -> Result<DensityPair> {
        DensityPair::new(self.grid()?, self.f.poly(), self.g.poly())
    }

    /// Re-run the checks that depend on more than one key.
    pub fn validate(&self) -> Result<()> {
        PeriodicGrid::new(self.n1, self.n2).map_err(|e| config_err("grid.n", e.to_string()))?;
        check_density("f.modes", &self.f, self.n1.max(self.n2))?;
        check_density("g.modes", &self.g, self.n1.max(self.n2))?;
        let c = &self.continuation;
        if !(c.t0 > 0.0 && c.t0 < c.t1) {
            return Err(config_err(
                "continuation.t0",
                format!("need 0 < t0 < t1 (got t0 = {}, t1 = {})", c.t0, c.t1),
            ));
        }
        if !(c.t1 <= 1.0) {
            return Err(config_err("continuation.t1", format!("t1 must be ≤ 1 (got {})", c.t1)));
        }
        if let Steps::Fixed(0) = c.steps {
            return Err(config_err("continuation.steps", "must be positive"));
        }
        Ok(())
    }
}

/// Command-line values that replace keys of the same name.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub t0: Option<f64>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(n) = self.grid {
            cfg.n1 = n;
            cfg.n2 = n;
        }
        if let Some(t0) = self.t0 {
            cfg.continuation.t0 = t0;
        }
        if let Some(k) = self.steps {
            cfg.continuation.steps = Steps::Fixed(k);
        }
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        cfg.validate()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::ConfigParse {
            line,
            message: e.message().to_string(),
        }
    })?;
    check_keys(&table)?;

    let section = |name: &str| table.get(name).and_then(Value::as_table);
    let grid = section("grid");
    let n = get_usize(grid, "grid", "n")?.unwrap_or(128);
    let n1 = get_usize(grid, "grid", "n1")?.unwrap_or(n);
    let n2 = get_usize(grid, "grid", "n2")?.unwrap_or(n);

    let f = density(section("f"), "f")?;
    let g = density(section("g"), "g")?;

    let sched = section("schedule");
    let schedule = match get_str(sched, "schedule", "lambda")?.as_deref() {
        None | Some("linear") => CostSchedule::Linear,
        Some("power") => {
            let p = get_f64(sched, "schedule", "exponent")?.unwrap_or(1.0);
            if !(p > 0.0) {
                return Err(config_err("schedule.exponent", "must be positive"));
            }
            CostSchedule::Power { exponent: p }
        }
        Some(other) => {
            return Err(config_err(
                "schedule.lambda",
                format!("unknown schedule `{other}` (expected \"linear\" or \"power\")"),
            ))
        }
    };

    let c = section("continuation");
    let key = "continuation";
    let mut opts = ContinuationOptions::default();
    if let Some(v) = get_f64(c, key, "t0")? {
        opts.t0 = v;
    }
    if let Some(v) = get_f64(c, key, "t1")? {
        opts.t1 = v;
    }
    match c.and_then(|c| c.get("steps")) {
        None => {}
        Some(Value::Integer(k)) if *k > 0 => opts.steps = Steps::Fixed(*k as usize),
        Some(Value::String(s)) if s == "adaptive" => opts.steps = Steps::Adaptive,
        Some(_) => {
            return Err(config_err(
                "continuation.steps",
                "expected a positive integer or \"adaptive\"",
            ))
        }
    }
    match get_str(c, key, "grading")?.as_deref() {
        None | Some("geometric") => opts.grading = Grading::Geometric,
        Some("uniform") => opts.grading = Grading::Uniform,
        Some(o) => return Err(config_err("continuation.grading", format!("unknown grading `{o}`"))),
    }
    match get_str(c, key, "predictor")?.as_deref() {
        None | Some("heun") => opts.predictor = Predictor::Heun,
        Some("euler") => opts.predictor = Predictor::Euler,
        Some(o) => return Err(config_err("continuation.predictor", format!("unknown predictor `{o}`"))),
    }
    for (name, slot) in [
        ("newton_tol", &mut opts.newton_tol),
        ("t_switch", &mut opts.t_switch),
        ("linear_tol", &mut opts.linear_tol),
    ] {
        if let Some(v) = get_f64(c, key, name)? {
            if !(v > 0.0) {
                return Err(config_err(&format!("continuation.{name}"), "must be positive"));
            }
            *slot = v;
        }
    }
    if let Some(v) = get_usize(c, key, "max_newton")? {
        if v == 0 {
            return Err(config_err("continuation.max_newton", "must be positive"));
        }
        opts.max_newton = v;
    }
    if let Some(v) = get_usize(c, key, "pushforward_k")? {
        opts.pushforward_k = v as i32;
    }

    let o = section("output");
    let mut output = OutputConfig::default();
    if let Some(dir) = get_str(o, "output", "dir")? {
        output.dir = PathBuf::from(dir);
    }
    for (name, slot) in [
        ("csv", &mut output.csv),
        ("binary", &mut output.binary),
        ("per_step", &mut output.per_step),
    ] {
        if let Some(v) = o.and_then(|o| o.get(name)) {
            *slot = v
                .as_bool()
                .ok_or_else(|| config_err(&format!("output.{name}"), "expected true or false"))?;
        }
    }

    let cfg = RunConfig {
        n1,
        n2,
        f,
        g,
        schedule,
        continuation: opts,
        output,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn suggestion(word: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(word, c), *c))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| format!("; did you mean `{c}`?"))
        .unwrap_or_default()
}

fn check_keys(table: &Table) -> Result<()> {
    let sections: Vec<&str> = SCHEMA.iter().map(|(s, _)| *s).collect();
    for (name, value) in table {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == name) else {
            return Err(config_err(
                name,
                format!("unknown section{}", suggestion(name, &sections)),
            ));
        };
        let Some(inner) = value.as_table() else {
            return Err(config_err(name, "expected a table"));
        };
        for k in inner.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(config_err(
                    &format!("{name}.{k}"),
                    format!("unknown key{}", suggestion(k, keys)),
                ));
            }
        }
    }
    for required in ["f", "g"] {
        if !table.contains_key(required) {
            return Err(config_err(required, "missing density section"));
        }
    }
    Ok(())
}

fn get_f64(t: Option<&Table>, section: &str, key: &str) -> Result<Option<f64>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(*v)),
        Some(Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(_) => Err(config_err(&format!("{section}.{key}"), "expected a number")),
    }
}

fn get_usize(t: Option<&Table>, section: &str, key: &str) -> Result<Option<usize>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
        Some(_) => Err(config_err(
            &format!("{section}.{key}"),
            "expected a non-negative integer",
        )),
    }
}

fn get_str(t: Option<&Table>, section: &str, key: &str) -> Result<Option<String>> {
    match t.and_then(|t| t.get(key)) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(config_err(&format!("{section}.{key}"), "expected a string")),
    }
}

fn density(t: Option<&Table>, name: &str) -> Result<DensitySpec> {
    let key = format!("{name}.modes");
    let Some(list) = t.and_then(|t| t.get("modes")) else {
        return Ok(DensitySpec { modes: Vec::new() });
    };
    let list = list
        .as_array()
        .ok_or_else(|| config_err(&key, "expected a list of [k1, k2, amplitude, phase]"))?;
    let mut modes = Vec::with_capacity(list.len());
    for (i, entry) in list.iter().enumerate() {
        let bad = || config_err(&format!("{key}[{i}]"), "expected [k1, k2, amplitude, phase]");
        let row = entry.as_array().ok_or_else(bad)?;
        if row.len() != 4 {
            return Err(bad());
        }
        let int = |v: &Value| v.as_integer().ok_or_else(bad);
        let num = |v: &Value| match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(x) => Ok(*x as f64),
            _ => Err(bad()),
        };
        let (k1, k2) = (int(&row[0])?, int(&row[1])?);
        let (amp, phase) = (num(&row[2])?, num(&row[3])?);
        if !amp.is_finite() || !phase.is_finite() || k1.abs() > 1 << 16 || k2.abs() > 1 << 16 {
            return Err(bad());
        }
        modes.push(CosineMode::new(k1 as i32, k2 as i32, amp, phase));
    }
    Ok(DensitySpec { modes })
}

fn check_density(key: &str, spec: &DensitySpec, n: usize) -> Result<()> {
    let min = spec.poly().sampled_min(4 * n);
    if !(min >= DENSITY_FLOOR) {
        return Err(config_err(
            key,
            format!("density not positive: min ≈ {min:.1} < {DENSITY_FLOOR}"),
        ));
    }
    Ok(())
}
