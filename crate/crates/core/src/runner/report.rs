use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::confusion::{self, ConfusionTally, Ratio};
use crate::error::{Error, Result};
use crate::maskio::ClassTaxonomy;
use crate::wfb::{wfb_score, WfbClassTally, WfbParams, WfbTally};

/// Which metric families a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    /// Precision, recall and Jaccard from integer counts.
    pub jaccard: bool,
    /// Weighted precision, recall and F-beta.
    pub wfb: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        MetricSet {
            jaccard: true,
            wfb: true,
        }
    }
}

impl MetricSet {
    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.jaccard {
            v.push("jaccard");
        }
        if self.wfb {
            v.push("wfb");
        }
        v
    }
}

impl FromStr for MetricSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = MetricSet {
            jaccard: false,
            wfb: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "jaccard" | "iou" | "confusion" => set.jaccard = true,
                "wfb" | "fwb" => set.wfb = true,
                other => return Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
            }
        }
        if !set.jaccard && !set.wfb {
            return Err(Error::InvalidConfig("metric set is empty".into()));
        }
        Ok(set)
    }
}

impl fmt::Display for MetricSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

impl Serialize for MetricSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names.join(",").parse().map_err(D::Error::custom)
    }
}

/// Ratios are held as fractions and written as percentages with four
/// decimals.
pub(crate) mod percent {
    use super::*;

    pub fn to_raw(v: Ratio) -> Box<RawValue> {
        let text = match v {
            Some(x) => format_percent(x),
            None => "null".to_string(),
        };
        RawValue::from_string(text).expect("fixed-point literal is valid json")
    }

    pub fn format_percent(fraction: f64) -> String {
        let s = format!("{:.4}", fraction * 100.0);
        if s == "-0.0000" {
            "0.0000".into()
        } else {
            s
        }
    }

    pub fn serialize<S: Serializer>(v: &Ratio, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_raw(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Ratio, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map(|p| p / 100.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    #[serde(with = "percent")]
    pub precision: Ratio,
    #[serde(with = "percent")]
    pub recall: Ratio,
    #[serde(with = "percent")]
    pub jaccard: Ratio,
}

impl ConfusionRow {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionRow {
            tp,
            fp,
            fn_,
            precision: confusion::ratio(tp, tp + fp),
            recall: confusion::ratio(tp, tp + fn_),
            jaccard: confusion::ratio(tp, tp + fp + fn_),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub tpw: f64,
    pub fpw: f64,
    pub fnw: f64,
    /// Images in which the class was annotated.
    pub images: u64,
    #[serde(with = "percent")]
    pub pw: Ratio,
    #[serde(with = "percent")]
    pub rw: Ratio,
    #[serde(with = "percent")]
    pub fwb: Ratio,
}

impl WeightedRow {
    fn from_tally(t: &WfbClassTally, beta: f64) -> Self {
        let s = wfb_score(t, beta);
        WeightedRow {
            tpw: t.tpw,
            fpw: t.fpw,
            fnw: t.fnw,
            images: t.images_seen,
            pw: s.pw,
            rw: s.rw,
            fwb: s.f,
        }
    }

    fn tally(&self) -> WfbClassTally {
        WfbClassTally {
            tpw: self.tpw,
            fpw: self.fpw,
            fnw: self.fnw,
            images_seen: self.images,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub id: u8,
    pub label: String,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionRow>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub weighted: Option<WeightedRow>,
}

/// Macro averages over the foreground classes with a defined value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    #[serde(with = "percent", default)]
    pub precision: Ratio,
    #[serde(with = "percent", default)]
    pub recall: Ratio,
    #[serde(with = "percent", default)]
    pub jaccard: Ratio,
    #[serde(with = "percent", default)]
    pub pw: Ratio,
    #[serde(with = "percent", default)]
    pub rw: Ratio,
    #[serde(with = "percent", default)]
    pub fwb: Ratio,
}

impl Averages {
    fn from_rows(rows: &[ClassRow]) -> Self {
        let avg = |f: &dyn Fn(&ClassRow) -> Ratio| -> Ratio {
            let values: BTreeMap<u8, Ratio> = rows.iter().map(|r| (r.id, f(r))).collect();
            let ids: Vec<u8> = values.keys().copied().collect();
            confusion::macro_average(&values, &ids).ok()
        };
        Averages {
            precision: avg(&|r| r.confusion.as_ref().and_then(|c| c.precision)),
            recall: avg(&|r| r.confusion.as_ref().and_then(|c| c.recall)),
            jaccard: avg(&|r| r.confusion.as_ref().and_then(|c| c.jaccard)),
            pw: avg(&|r| r.weighted.as_ref().and_then(|w| w.pw)),
            rw: avg(&|r| r.weighted.as_ref().and_then(|w| w.rw)),
            fwb: avg(&|r| r.weighted.as_ref().and_then(|w| w.fwb)),
        }
    }

    pub fn get(&self, metric: &str) -> Option<Ratio> {
        Some(match metric {
            "precision" => self.precision,
            "recall" => self.recall,
            "jaccard" => self.jaccard,
            "pw" => self.pw,
            "rw" => self.rw,
            "fwb" => self.fwb,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub metrics: MetricSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wfb: Option<WfbParams>,
}

/// Dataset-level evaluation of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "dataset")]
    pub dataset_id: String,
    #[serde(rename = "model")]
    pub model_id: String,
    pub taxonomy: String,
    pub n_samples: usize,
    pub classes: Vec<ClassRow>,
    pub average: Averages,
    pub config: ReportConfig,
}

pub const METRIC_NAMES: [&str; 6] = ["precision", "recall", "jaccard", "pw", "rw", "fwb"];

impl EvalReport {
    /// Builds a report from dataset-wide tallies. `wfb` is required when the
    /// metric set asks for the weighted measure.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tallies(
        dataset_id: &str,
        model_id: &str,
        taxonomy: &ClassTaxonomy,
        n_samples: usize,
        metrics: MetricSet,
        wfb_params: &WfbParams,
        confusion: &ConfusionTally,
        wfb: Option<&WfbTally>,
    ) -> Result<Self> {
        if metrics.wfb && wfb.is_none() {
            return Err(Error::InvalidConfig("weighted tallies missing".into()));
        }
        let mut classes = Vec::new();
        for id in taxonomy.foreground_ids() {
            let confusion = if metrics.jaccard {
                let (tp, fp, fn_) = confusion.counts(id)?;
                Some(ConfusionRow::from_counts(tp, fp, fn_))
            } else {
                None
            };
            let weighted = match (metrics.wfb, wfb) {
                (true, Some(t)) => Some(WeightedRow::from_tally(t.class(id)?, wfb_params.beta)),
                _ => None,
            };
            classes.push(ClassRow {
                id,
                label: taxonomy.label(id).unwrap_or_default().to_string(),
                confusion,
                weighted,
            });
        }
        let average = Averages::from_rows(&classes);
        Ok(EvalReport {
            dataset_id: dataset_id.to_string(),
            model_id: model_id.to_string(),
            taxonomy: taxonomy.name().to_string(),
            n_samples,
            classes,
            average,
            config: ReportConfig {
                metrics,
                wfb: metrics.wfb.then_some(*wfb_params),
            },
        })
    }

    pub fn class(&self, label: &str) -> Option<&ClassRow> {
        self.classes.iter().find(|r| r.label == label)
    }

    /// Value of `metric` for the class labelled `class`, or for the macro
    /// average when `class` is `"average"`. The outer `None` means the key is
    /// not part of the report.
    pub fn value(&self, metric: &str, class: &str) -> Option<Ratio> {
        if class == "average" {
            return self.average.get(metric);
        }
        let row = self.class(class)?;
        match metric {
            "precision" | "recall" | "jaccard" => {
                let c = row.confusion.as_ref()?;
                Some(match metric {
                    "precision" => c.precision,
                    "recall" => c.recall,
                    _ => c.jaccard,
                })
            }
            "pw" | "rw" | "fwb" => {
                let w = row.weighted.as_ref()?;
                Some(match metric {
                    "pw" => w.pw,
                    "rw" => w.rw,
                    _ => w.fwb,
                })
            }
            _ => None,
        }
    }

    /// Recomputes every ratio from the stored tallies and every average from
    /// the rows; fails when any differs by more than `tolerance` (fraction
    /// scale). Freshly computed reports pass at 1e-12; reports read back
    /// from disk carry four-decimal percentages and pass at 1e-6.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        let close = |what: String, stored: Ratio, recomputed: Ratio| -> Result<()> {
            let ok = match (stored, recomputed) {
                (Some(a), Some(b)) => (a - b).abs() <= tolerance,
                (None, None) => true,
                _ => false,
            };
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidReport(format!(
                    "{what}: stored {stored:?}, recomputed {recomputed:?}"
                )))
            }
        };
        let beta = self.config.wfb.map(|p| p.beta).unwrap_or(1.0);
        for row in &self.classes {
            if let Some(c) = &row.confusion {
                let r = ConfusionRow::from_counts(c.tp, c.fp, c.fn_);
                close(format!("precision.{}", row.label), c.precision, r.precision)?;
                close(format!("recall.{}", row.label), c.recall, r.recall)?;
                close(format!("jaccard.{}", row.label), c.jaccard, r.jaccard)?;
            }
            if let Some(w) = &row.weighted {
                let r = WeightedRow::from_tally(&w.tally(), beta);
                close(format!("pw.{}", row.label), w.pw, r.pw)?;
                close(format!("rw.{}", row.label), w.rw, r.rw)?;
                close(format!("fwb.{}", row.label), w.fwb, r.fwb)?;
            }
        }
        let avg = Averages::from_rows(&self.classes);
        for m in METRIC_NAMES {
            close(
                format!("{m}.average"),
                self.average.get(m).flatten(),
                avg.get(m).flatten(),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per class plus a trailing `average` row. Undefined and
    /// disabled values are empty fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "class",
            "tp",
            "fp",
            "fn",
            "precision",
            "recall",
            "jaccard",
            "pw",
            "rw",
            "fwb",
        ])?;
        let pct = |v: Option<Ratio>| v.flatten().map(percent::format_percent).unwrap_or_default();
        for row in &self.classes {
            let c = row.confusion.as_ref();
            let w_ = row.weighted.as_ref();
            w.write_record([
                row.label.clone(),
                c.map(|c| c.tp.to_string()).unwrap_or_default(),
                c.map(|c| c.fp.to_string()).unwrap_or_default(),
                c.map(|c| c.fn_.to_string()).unwrap_or_default(),
                pct(c.map(|c| c.precision)),
                pct(c.map(|c| c.recall)),
                pct(c.map(|c| c.jaccard)),
                pct(w_.map(|w| w.pw)),
                pct(w_.map(|w| w.rw)),
                pct(w_.map(|w| w.fwb)),
            ])?;
        }
        let a = &self.average;
        w.write_record([
            "average".to_string(),
            String::new(),
            String::new(),
            String::new(),
            pct(Some(a.precision)),
            pct(Some(a.recall)),
            pct(Some(a.jaccard)),
            pct(Some(a.pw)),
            pct(Some(a.rw)),
            pct(Some(a.fwb)),
        ])?;
        into_string(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::tally_pair;
    use crate::maskio::LabelMask;
    use crate::wfb::wfb_tally_image;

    fn report() -> EvalReport {
        let t = ClassTaxonomy::choc_aff();
        let gt = LabelMask::new(4, 2, vec![0, 1, 1, 2, 0, 3, 3, 2], &t).unwrap();
        let pred = LabelMask::new(4, 2, vec![0, 1, 2, 2, 3, 3, 0, 2], &t).unwrap();
        let c = tally_pair(&gt, &pred, &t).unwrap();
        let p = WfbParams::default();
        let w = wfb_tally_image(&gt, &pred, &t, &p).unwrap();
        EvalReport::from_tallies("toy", "m", &t, 1, MetricSet::default(), &p, &c, Some(&w)).unwrap()
    }

    #[test]
    fn metric_set_parsing() {
        assert_eq!("jaccard,wfb".parse::<MetricSet>().unwrap(), MetricSet::default());
        assert_eq!(
            "wfb".parse::<MetricSet>().unwrap(),
            MetricSet {
                jaccard: false,
                wfb: true
            }
        );
        assert!("".parse::<MetricSet>().is_err());
        assert!("jaccard,dice".parse::<MetricSet>().is_err());
    }

    #[test]
    fn rows_cover_foreground_classes() {
        let r = report();
        let labels: Vec<&str> = r.classes.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["graspable", "contain", "arm"]);
        let g = r.class("graspable").unwrap().confusion.as_ref().unwrap();
        assert_eq!((g.tp, g.fp, g.fn_), (1, 0, 1));
        assert_eq!(g.jaccard, Some(0.5));
        r.validate(1e-12).unwrap();
    }

    #[test]
    fn json_round_trip_is_a_fixpoint() {
        let r = report();
        let a = r.to_json().unwrap();
        assert_eq!(a, r.to_json().unwrap());
        let back = EvalReport::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
        back.validate(1e-6).unwrap();
        let top: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&a)
            .unwrap()
            .keys()
            .cloned()
            .collect();
        let mut expected = [
            "dataset",
            "model",
            "taxonomy",
            "n_samples",
            "classes",
            "average",
            "config",
        ]
        .map(String::from)
        .to_vec();
        expected.sort();
        assert_eq!(top, expected);
        assert!(a.contains("\"jaccard\": 50.0000"));
    }

    #[test]
    fn csv_shape() {
        let r = report();
        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class,tp,fp,fn,precision,recall,jaccard,pw,rw,fwb");
        assert_eq!(lines.len(), 1 + r.classes.len() + 1);
        assert!(lines.last().unwrap().starts_with("average,,,,"));
        assert!(lines[1].starts_with("graspable,1,0,1,100.0000,50.0000,50.0000,"));
    }

    #[test]
    fn validation_catches_tampering() {
        let mut r = report();
        r.classes[0].confusion.as_mut().unwrap().jaccard = Some(0.75);
        assert!(matches!(r.validate(1e-12), Err(Error::InvalidReport(_))));
        let mut r = report();
        r.average.jaccard = r.average.jaccard.map(|j| j + 1e-9);
        assert!(r.validate(1e-12).is_err());
    }

    #[test]
    fn value_lookup() {
        let r = report();
        assert_eq!(r.value("jaccard", "graspable"), Some(Some(0.5)));
        assert_eq!(r.value("jaccard", "average"), Some(r.average.jaccard));
        assert_eq!(r.value("jaccard", "slice"), None);
        assert_eq!(r.value("dice", "graspable"), None);
    }

    #[test]
    fn disabled_families_are_absent() {
        let t = ClassTaxonomy::umd();
        let gt = LabelMask::filled(3, 3, 1, &t).unwrap();
        let c = tally_pair(&gt, &gt, &t).unwrap();
        let m = MetricSet {
            jaccard: true,
            wfb: false,
        };
        let r = EvalReport::from_tallies("d", "m", &t, 1, m, &WfbParams::default(), &c, None).unwrap();
        assert!(r.classes.iter().all(|c| c.weighted.is_none()));
        assert_eq!(r.value("fwb", "grasp"), None);
        assert!(r.config.wfb.is_none());
        assert_eq!(r.average.jaccard, Some(1.0));
        let json = r.to_json().unwrap();
        assert!(!json.contains("fwb\": 1"));
        assert_eq!(EvalReport::from_json(&json).unwrap(), r);
    }
}
