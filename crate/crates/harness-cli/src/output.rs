use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{HarnessError, Result};

pub const CSV_HEADER: &str = "iter,loss,error,b,eff_lr,max_drift,lambda_min_H,lambda_max_H";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub loss: Option<f64>,
    pub error: Option<f64>,
    pub b: f64,
    pub eff_lr: f64,
    pub max_drift: Option<f64>,
    pub lambda_min_h: Option<f64>,
    pub lambda_max_h: Option<f64>,
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            cell(r.loss),
            cell(r.error),
            fmt_f64(r.b),
            fmt_f64(r.eff_lr),
            cell(r.max_drift),
            cell(r.lambda_min_h),
            cell(r.lambda_max_h),
        );
    }
    s
}

/// Two-column `iter value` series, one file per quantity, skipping empty cells.
pub fn plot_series(rows: &[TrajectoryRow]) -> Vec<(&'static str, String)> {
    let pick: [(&str, fn(&TrajectoryRow) -> Option<f64>); 6] = [
        ("loss.dat", |r| r.loss),
        ("error.dat", |r| r.error),
        ("b.dat", |r| Some(r.b)),
        ("eff_lr.dat", |r| Some(r.eff_lr)),
        ("lambda_min_H.dat", |r| r.lambda_min_h),
        ("lambda_max_H.dat", |r| r.lambda_max_h),
    ];
    pick.into_iter()
        .filter_map(|(name, f)| {
            let mut s = String::new();
            for r in rows {
                if let Some(v) = f(r) {
                    let _ = writeln!(s, "{} {}", r.iter, fmt_f64(v));
                }
            }
            (!s.is_empty()).then_some((name, s))
        })
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// JSON has no literal for ±∞ or NaN; those travel as the strings `inf`,
/// `-inf` and `NaN`.
mod num {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&format!("{v:?}"))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(|_| D::Error::custom(format!("not a number: {t}"))),
        }
    }

    pub mod map {
        use std::collections::BTreeMap;

        use serde::ser::SerializeMap;
        use serde::{Deserialize, Deserializer, Serializer};

        #[derive(serde::Serialize, Deserialize)]
        struct Wrapped(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let mut out = s.serialize_map(Some(m.len()))?;
            for (k, v) in m {
                out.serialize_entry(k, &Wrapped(*v))?;
            }
            out.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            let raw = BTreeMap::<String, Wrapped>::deserialize(d)?;
            Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub name: String,
    #[serde(with = "num")]
    pub computed: f64,
    #[serde(with = "num")]
    pub realized: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub iterations: usize,
    #[serde(with = "num")]
    pub loss: f64,
    #[serde(with = "num")]
    pub error: f64,
    #[serde(with = "num")]
    pub b: f64,
    #[serde(with = "num")]
    pub eff_lr: f64,
    #[serde(with = "num")]
    pub sup_b: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    pub diverged: bool,
    pub converged: bool,
    pub notes: Vec<String>,
    #[serde(with = "num::map")]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    #[serde(rename = "final")]
    pub final_state: FinalSummary,
    pub bounds: Vec<BoundRow>,
    pub flags: Flags,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn all_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }
}

/// Output of `verify`: bounds evaluated without any training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputedBound {
    pub name: String,
    #[serde(with = "num")]
    pub computed: f64,
}
