use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{into_string, percent, EvalReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceEntry {
    /// Percentage points.
    pub value: f64,
    pub source: String,
}

/// Published numbers keyed by `metric.class`, e.g. `jaccard.contain` or
/// `fwb.average`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferenceValues {
    pub entries: BTreeMap<String, ReferenceEntry>,
}

impl ReferenceValues {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let refs: ReferenceValues = serde_json::from_str(text)?;
        for (key, entry) in &refs.entries {
            split_key(key)?;
            if !entry.value.is_finite() {
                return Err(Error::InvalidConfig(format!("reference {key:?} is not finite")));
            }
        }
        Ok(refs)
    }
}

fn split_key(key: &str) -> Result<(&str, &str)> {
    key.split_once('.')
        .filter(|(m, c)| !m.is_empty() && !c.is_empty())
        .ok_or_else(|| Error::KeyMismatch(key.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub class: String,
    pub ours: f64,
    pub reference: f64,
    /// `ours − reference`, percentage points.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub max_abs_delta: f64,
    pub tolerance: f64,
}

impl ComparisonTable {
    pub fn passed(&self) -> bool {
        self.max_abs_delta <= self.tolerance
    }

    pub fn to_json(&self) -> Result<String> {
        let fixed = |v: f64| fixed4(v);
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "metric": r.metric,
                    "class": r.class,
                    "ours": fixed(r.ours),
                    "reference": fixed(r.reference),
                    "delta": fixed(r.delta),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "rows": rows,
            "max_abs_delta": fixed(self.max_abs_delta),
            "tolerance": fixed(self.tolerance),
            "passed": self.passed(),
        });
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "class", "ours", "reference", "delta"])?;
        for r in &self.rows {
            w.write_record([
                r.metric.clone(),
                r.class.clone(),
                format!("{:.4}", r.ours),
                format!("{:.4}", r.reference),
                format!("{:+.4}", r.delta),
            ])?;
        }
        into_string(w)
    }
}

fn round4(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fixed4(v: f64) -> serde_json::Value {
    serde_json::Value::from(round4(v))
}

/// Compares a report with published numbers. Our side is taken at the
/// report's serialized precision (four decimals, percentage points) and
/// deltas are rounded to the same precision.
pub fn compare_reports(report: &EvalReport, reference: &ReferenceValues, tolerance: f64) -> Result<ComparisonTable> {
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tolerance {tolerance} must be non-negative"
        )));
    }
    let mut rows = Vec::with_capacity(reference.entries.len());
    let mut max_abs_delta = 0.0f64;
    for (key, entry) in &reference.entries {
        let (metric, class) = split_key(key)?;
        let ours = report
            .value(metric, class)
            .ok_or_else(|| Error::KeyMismatch(key.clone()))?
            .ok_or_else(|| Error::KeyMismatch(format!("{key} is undefined in the report")))?;
        let ours: f64 = percent::format_percent(ours).parse().expect("formatted float parses");
        let delta = round4(ours - entry.value);
        max_abs_delta = max_abs_delta.max(delta.abs());
        rows.push(ComparisonRow {
            metric: metric.to_string(),
            class: class.to_string(),
            ours,
            reference: entry.value,
            delta,
        });
    }
    Ok(ComparisonTable {
        rows,
        max_abs_delta,
        tolerance,
    })
}
