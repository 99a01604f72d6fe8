use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Testbed {
    Linreg,
    Twolayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerName {
    #[serde(rename = "adaloss")]
    AdaLoss,
    #[serde(rename = "adagradnorm")]
    AdaGradNorm,
    #[serde(rename = "sgd-const")]
    SgdConst,
    #[serde(rename = "sgd-decaysqrt")]
    SgdDecaySqrt,
    #[serde(rename = "squarerule")]
    SquareRule,
    #[serde(rename = "normrule")]
    NormRule,
    #[serde(rename = "adam")]
    Adam,
    #[serde(rename = "adamloss")]
    AdamLoss,
    #[serde(rename = "adamsqrt")]
    AdamSqrt,
}

impl OptimizerName {
    pub const ALL: [OptimizerName; 9] = [
        Self::AdaLoss,
        Self::AdaGradNorm,
        Self::SgdConst,
        Self::SgdDecaySqrt,
        Self::SquareRule,
        Self::NormRule,
        Self::Adam,
        Self::AdamLoss,
        Self::AdamSqrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AdaLoss => "adaloss",
            Self::AdaGradNorm => "adagradnorm",
            Self::SgdConst => "sgd-const",
            Self::SgdDecaySqrt => "sgd-decaysqrt",
            Self::SquareRule => "squarerule",
            Self::NormRule => "normrule",
            Self::Adam => "adam",
            Self::AdamLoss => "adamloss",
            Self::AdamSqrt => "adamsqrt",
        }
    }
}

impl fmt::Display for OptimizerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|o| o.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|o| o.as_str()).collect();
            format!("unknown optimizer `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Det,
    Stoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    Iid,
    Correlated,
}

/// A fully validated experiment description. Field names double as the
/// config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub testbed: Testbed,
    /// More than one entry is only meaningful for `sweep`.
    pub optimizer: Vec<OptimizerName>,
    pub b0: f64,
    pub eta: f64,
    pub alpha: f64,
    /// Loss offset in the AdaLoss signal.
    pub c: f64,
    /// Decay coefficient for sgd-decaysqrt.
    pub c_s: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub mode: RunMode,
    pub n: usize,
    pub d: usize,
    pub m: Option<usize>,
    pub conditioning: Conditioning,
    /// Two-layer labels are drawn from [−label_bound, label_bound].
    pub label_bound: f64,
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
    pub batch: usize,
    pub b0_grid: Option<Vec<f64>>,
    pub eig_cadence: usize,
    pub eval_cadence: usize,
    /// Failure probability used by the two-layer constants.
    pub delta: f64,
    /// The constant c in the two-layer radius R = cλ₀δ/n³.
    pub radius_c: f64,
    pub mc_samples: usize,
    pub ruil_probes: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub plot: bool,
}

pub const KEYS: &[&str] = &[
    "testbed",
    "optimizer",
    "b0",
    "eta",
    "alpha",
    "c",
    "c_s",
    "beta1",
    "beta2",
    "mode",
    "n",
    "d",
    "m",
    "conditioning",
    "label_bound",
    "steps",
    "tol",
    "seed",
    "batch",
    "b0_grid",
    "eig_cadence",
    "eval_cadence",
    "delta",
    "radius_c",
    "mc_samples",
    "ruil_probes",
    "jobs",
    "out",
    "plot",
];

fn err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Reads `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key = value, got `{line}`", no + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(err(format!("line {}: unknown key `{k}`", no + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(err(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(map)
}

/// Loads the optional file, layers `overrides` on top and validates.
pub fn parse_config(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<ExperimentConfig> {
    let mut map = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|source| HarnessError::Io { path: p.to_path_buf(), source })?;
            parse_kv(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in overrides {
        if !KEYS.contains(k) {
            return Err(err(format!("unknown key `{k}`")));
        }
        map.insert(k.to_string(), v.clone());
    }
    from_map(&map)
}

struct Fields<'a>(&'a BTreeMap<String, String>);

impl Fields<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| err(format!("missing required key `{key}`")))
    }

    fn parse<T: FromStr>(&self, key: &str, value: &str) -> Result<T> {
        value.parse().map_err(|_| err(format!("`{key}`: cannot parse `{value}`")))
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.raw(key).map_or(Ok(default), |v| self.parse(key, v))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.get(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(format!("`{key}` must be positive, got {v}")));
        }
        Ok(v)
    }

    fn choice<T: for<'de> Deserialize<'de>>(&self, key: &str, value: &str) -> Result<T> {
        serde_json::from_value(serde_json::Value::String(value.to_string()))
            .map_err(|_| err(format!("`{key}`: invalid value `{value}`")))
    }
}

fn from_map(map: &BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let f = Fields(map);
    let testbed: Testbed = f.choice("testbed", f.required("testbed")?)?;
    let optimizer = f
        .required("optimizer")?
        .split(',')
        .map(|s| s.trim().parse::<OptimizerName>().map_err(|e| err(format!("`optimizer`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = f.parse("n", f.required("n")?)?;
    let d: usize = f.parse("d", f.required("d")?)?;
    let m = match testbed {
        Testbed::Twolayer => Some(f.parse::<usize>("m", f.required("m")?)?),
        Testbed::Linreg => f.raw("m").map(|v| f.parse("m", v)).transpose()?,
    };
    let mode = match f.raw("mode").unwrap_or("det") {
        "det" | "deterministic" => RunMode::Det,
        "stoch" | "stochastic" => RunMode::Stoch,
        other => return Err(err(format!("`mode`: invalid value `{other}`"))),
    };
    let conditioning = f.raw("conditioning").map_or(Ok(Conditioning::Iid), |v| f.choice("conditioning", v))?;
    let b0_grid = f.raw("b0_grid").map(|v| expand_grid(v).map_err(|e| err(format!("`b0_grid`: {e}")))).transpose()?;

    let cfg = ExperimentConfig {
        testbed,
        optimizer,
        b0: f.positive("b0", 1.0)?,
        eta: f.positive("eta", 1.0)?,
        alpha: f.positive("alpha", 1.0)?,
        c: f.get("c", 0.0)?,
        c_s: f.get("c_s", stepsize_controllers::DEFAULT_DECAY)?,
        beta1: f.get("beta1", stepsize_controllers::BETA1)?,
        beta2: f.get("beta2", stepsize_controllers::BETA2)?,
        mode,
        n,
        d,
        m,
        conditioning,
        label_bound: f.positive("label_bound", 1.0)?,
        steps: f.get("steps", 5000)?,
        tol: f.positive("tol", 1e-8)?,
        seed: f.get("seed", 0)?,
        batch: f.get("batch", 1)?,
        b0_grid,
        eig_cadence: f.get("eig_cadence", 10)?,
        eval_cadence: f.get("eval_cadence", 1)?,
        delta: f.positive("delta", 0.1)?,
        radius_c: f.positive("radius_c", 0.01)?,
        mc_samples: f.get("mc_samples", 500)?,
        ruil_probes: f.get("ruil_probes", 50)?,
        jobs: f.get("jobs", 1)?,
        out: PathBuf::from(f.raw("out").unwrap_or("out")),
        plot: f.get("plot", false)?,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.optimizer.is_empty() {
        return Err(err("`optimizer` is empty"));
    }
    if cfg.n == 0 || cfg.d == 0 {
        return Err(err("`n` and `d` must be at least 1"));
    }
    if cfg.testbed == Testbed::Linreg && cfg.n < cfg.d {
        return Err(err(format!("`n` = {} must be at least `d` = {} for linreg", cfg.n, cfg.d)));
    }
    if cfg.m == Some(0) {
        return Err(err("`m` must be at least 1"));
    }
    if cfg.steps == 0 {
        return Err(err("`steps` must be at least 1"));
    }
    if !(1..=cfg.n).contains(&cfg.batch) {
        return Err(err(format!("`batch` must lie in [1, n], got {}", cfg.batch)));
    }
    if !cfg.c.is_finite() {
        return Err(err("`c` must be finite"));
    }
    if !(cfg.c_s.is_finite() && cfg.c_s >= 0.0) {
        return Err(err("`c_s` must be nonnegative"));
    }
    for (key, v) in [("beta1", cfg.beta1), ("beta2", cfg.beta2)] {
        if !(0.0..1.0).contains(&v) {
            return Err(err(format!("`{key}` must lie in [0, 1), got {v}")));
        }
    }
    if cfg.delta >= 1.0 {
        return Err(err("`delta` must lie in (0, 1)"));
    }
    if cfg.eval_cadence == 0 || cfg.jobs == 0 || cfg.mc_samples < 2 || cfg.ruil_probes == 0 {
        return Err(err("`eval_cadence`, `jobs` and `ruil_probes` must be at least 1, `mc_samples` at least 2"));
    }
    if let Some(grid) = &cfg.b0_grid {
        if grid.is_empty() {
            return Err(err("`b0_grid` is empty"));
        }
        if let Some(bad) = grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(err(format!("`b0_grid` entries must be positive, got {bad}")));
        }
    }
    Ok(())
}

/// Comma list of numbers. A `...` entry between two values continues the
/// geometric progression set by the two values before it, so
/// `1e-3,1e-2,...,1e3` gives seven points.
pub fn expand_grid(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let mut out: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        if parts[i] == "..." {
            let (Some(&hi_s), true) = (parts.get(i + 1), out.len() >= 2) else {
                return Err("`...` needs two values before it and one after".into());
            };
            let hi: f64 = hi_s.parse().map_err(|_| format!("cannot parse `{hi_s}`"))?;
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let ratio = b / a;
            if !(ratio > 1.0 && ratio.is_finite() && hi > b) {
                return Err("`...` needs an increasing geometric progression".into());
            }
            let steps = ((hi / b).ln() / ratio.ln()).round();
            if steps < 1.0 || (b * ratio.powf(steps) / hi - 1.0).abs() > 1e-9 {
                return Err(format!("{hi} is not on the progression {a}, {b}, ..."));
            }
            let base = out.len() - 1;
            for k in 1..steps as i32 {
                out.push(out[base] * ratio.powi(k));
            }
            out.push(hi);
            i += 2;
        } else {
            out.push(parts[i].parse().map_err(|_| format!("cannot parse `{}`", parts[i]))?);
            i += 1;
        }
    }
    Ok(out)
}
