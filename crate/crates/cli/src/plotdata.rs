use affbench_core::runner::{ScaleSweep, METRIC_NAMES};
use affbench_core::scale::WhiskerStats;
use affbench_core::EvalReport;
use anyhow::{anyhow, Context};
use serde_json::Value;

use crate::commands::emit;
use crate::{Failure, PlotKind, PlotdataArgs};

fn percent(v: Option<f64>) -> String {
    v.map(|x| format!("{:.4}", x * 100.0)).unwrap_or_default()
}

fn read(path: &std::path::Path) -> Result<String, Failure> {
    Ok(std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?)
}

fn whisker_row(source: &str, label: &str, s: &WhiskerStats) -> String {
    format!(
        "{source},{label},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
        s.min, s.q1, s.median, s.q3, s.max, s.n
    )
}

pub fn run(a: PlotdataArgs) -> Result<(), Failure> {
    if !METRIC_NAMES.contains(&a.metric.as_str()) {
        return Err(Failure::Usage(format!(
            "unknown metric {:?} (one of {})",
            a.metric,
            METRIC_NAMES.join(", ")
        )));
    }
    let mut lines = Vec::new();
    match a.kind {
        PlotKind::Bars => {
            lines.push("dataset,model,class,metric,value".to_string());
            for path in &a.input {
                let report = EvalReport::from_json(&read(path)?)
                    .with_context(|| format!("{} is not a report", path.display()))?;
                let labels = report
                    .classes
                    .iter()
                    .map(|c| c.label.clone())
                    .chain(std::iter::once("average".to_string()));
                for class in labels {
                    let v = report
                        .value(&a.metric, &class)
                        .ok_or_else(|| anyhow!("{} has no {} values", path.display(), a.metric))?;
                    lines.push(format!(
                        "{},{},{class},{},{}",
                        report.dataset_id,
                        report.model_id,
                        a.metric,
                        percent(v)
                    ));
                }
            }
        }
        PlotKind::Whiskers => {
            lines.push("source,factor,min,q1,median,q3,max,n".to_string());
            for path in &a.input {
                let doc: Value = serde_json::from_str(&read(path)?).map_err(anyhow::Error::from)?;
                if doc.get("points").is_some() {
                    let sweep: ScaleSweep = serde_json::from_value(doc).map_err(anyhow::Error::from)?;
                    for p in &sweep.points {
                        lines.push(whisker_row(&sweep.model, &p.label, &p.occupancy));
                    }
                } else if let Some(factors) = doc.get("factors").and_then(Value::as_array) {
                    let source = doc.get("dataset").and_then(Value::as_str).unwrap_or_default();
                    for f in factors {
                        let label = f.get("label").and_then(Value::as_str).unwrap_or_default();
                        let stats: WhiskerStats = serde_json::from_value(f.get("stats").cloned().unwrap_or_default())
                            .map_err(anyhow::Error::from)?;
                        lines.push(whisker_row(source, label, &stats));
                    }
                } else {
                    return Err(anyhow!("{} is neither a sweep nor an occupancy file", path.display()).into());
                }
            }
        }
        PlotKind::Curve => {
            lines.push("model,factor,metric,value".to_string());
            for path in &a.input {
                let sweep: ScaleSweep =
                    serde_json::from_str(&read(path)?).with_context(|| format!("{} is not a sweep", path.display()))?;
                for p in &sweep.points {
                    let v = p.report.average.get(&a.metric).flatten();
                    lines.push(format!("{},{},{},{}", sweep.model, p.label, a.metric, percent(v)));
                }
            }
        }
    }
    emit(a.out.as_deref(), &(lines.join("\n") + "\n"))
}
