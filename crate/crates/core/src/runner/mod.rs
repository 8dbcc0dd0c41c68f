//! Dataset evaluation, scale sweeps and comparison against published numbers.
//!
//! Work is split per sample and may run on any number of threads; tallies
//! are always folded left to right in manifest order, so reports are
//! bit-identical for every pool width.

mod compare;
mod report;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compare::{compare_reports, ComparisonRow, ComparisonTable, ReferenceEntry, ReferenceValues};
pub use report::{Averages, ClassRow, ConfusionRow, EvalReport, MetricSet, ReportConfig, WeightedRow, METRIC_NAMES};

use crate::confusion::{tally_pair, ConfusionTally};
use crate::error::{Error, Result};
use crate::maskio::{load_label_mask, ClassTaxonomy, LabelMask, Manifest, SampleRecord};
use crate::scale::{factor_label, occupancy, occupancy_stats, scale_mask, ScaleSpec, WhiskerStats};
use crate::wfb::{wfb_tally_image, WfbParams, WfbTally};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    pub metrics: MetricSet,
    pub wfb: WfbParams,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl EvalOptions {
    fn validate(&self) -> Result<()> {
        if self.metrics.wfb {
            self.wfb.validate()?;
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tallies of one annotation/prediction pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTallies {
    pub confusion: ConfusionTally,
    pub wfb: Option<WfbTally>,
}

pub fn tally_masks(
    gt: &LabelMask,
    pred: &LabelMask,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<PairTallies> {
    let confusion = tally_pair(gt, pred, taxonomy)?;
    let wfb = if options.metrics.wfb {
        Some(wfb_tally_image(gt, pred, taxonomy, &options.wfb)?)
    } else {
        None
    };
    Ok(PairTallies { confusion, wfb })
}

/// Runs `f` on a pool of `jobs` threads, or inline on the global pool.
fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Folds per-sample tallies in order into a report.
fn fold_report(
    dataset_id: &str,
    model_id: &str,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
    per_sample: Vec<PairTallies>,
) -> Result<EvalReport> {
    let mut confusion = ConfusionTally::zero(taxonomy);
    let mut wfb = options.metrics.wfb.then(|| WfbTally::zero(taxonomy));
    let n = per_sample.len();
    for t in per_sample {
        confusion.absorb(&t.confusion)?;
        if let (Some(acc), Some(w)) = (wfb.as_mut(), t.wfb.as_ref()) {
            acc.absorb(w)?;
        }
    }
    EvalReport::from_tallies(
        dataset_id,
        model_id,
        taxonomy,
        n,
        options.metrics,
        &options.wfb,
        &confusion,
        wfb.as_ref(),
    )
}

fn prediction_path<'a>(record: &'a SampleRecord, model_id: &str) -> Result<&'a Path> {
    record
        .predictions
        .get(model_id)
        .map(|p| p.as_path())
        .ok_or_else(|| Error::MissingPrediction {
            sample: record.id.clone(),
            model: model_id.to_string(),
        })
}

fn load_pair(
    manifest: &Manifest,
    record: &SampleRecord,
    model_id: &str,
    taxonomy: &ClassTaxonomy,
) -> Result<(LabelMask, LabelMask)> {
    let pred_path = prediction_path(record, model_id)?;
    let gt = load_label_mask(manifest.resolve(&record.annotation), taxonomy)?;
    let pred = load_label_mask(manifest.resolve(pred_path), taxonomy)?;
    if gt.dims() != pred.dims() {
        return Err(Error::ShapeMismatch {
            expected: gt.dims(),
            found: pred.dims(),
        });
    }
    Ok((gt, pred))
}

fn check_manifest(manifest: &Manifest, model_id: &str) -> Result<()> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    // Fail on a missing prediction before any raster is decoded.
    for r in &manifest.samples {
        prediction_path(r, model_id)?;
    }
    Ok(())
}

/// Evaluates the stored predictions of `model_id` against the annotations
/// at full resolution.
pub fn run_evaluation(
    manifest: &Manifest,
    model_id: &str,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<EvalReport> {
    options.validate()?;
    check_manifest(manifest, model_id)?;
    let per_sample = with_pool(options.jobs, || {
        manifest
            .samples
            .par_iter()
            .map(|r| {
                load_pair(manifest, r, model_id, taxonomy)
                    .and_then(|(gt, pred)| tally_masks(&gt, &pred, taxonomy, options))
                    .map_err(|e| e.in_sample(&r.id))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    fold_report(&manifest.dataset_id, model_id, taxonomy, options, per_sample)
}

/// Evaluates in-memory pairs, in the given order.
pub fn evaluate_masks(
    dataset_id: &str,
    model_id: &str,
    pairs: &[(LabelMask, LabelMask)],
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<EvalReport> {
    options.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let per_sample = with_pool(options.jobs, || {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, (gt, pred))| tally_masks(gt, pred, taxonomy, options).map_err(|e| e.in_sample(&i.to_string())))
            .collect::<Result<Vec<_>>>()
    })??;
    fold_report(dataset_id, model_id, taxonomy, options, per_sample)
}

/// Where the predictions for each factor of a sweep come from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    /// Perturb the stored full-resolution predictions together with the
    /// annotations.
    PerturbStored,
    /// Predictions made externally on perturbed images. Each manifest lists
    /// the perturbed annotations (as written by `perturb_dataset`) and the
    /// model's predictions; keys are factor labels such as `"0.6667"`.
    PerFactor(BTreeMap<String, Manifest>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub factor: f64,
    pub label: String,
    /// Occupancy of the perturbed annotations.
    pub occupancy: WhiskerStats,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSweep {
    pub dataset: String,
    pub model: String,
    pub taxonomy: String,
    pub points: Vec<SweepPoint>,
}

pub fn parse_factor(text: &str) -> Result<f64> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| Error::InvalidFactor(text.to_string()))?;
            let d: f64 = d.trim().parse().map_err(|_| Error::InvalidFactor(text.to_string()))?;
            n / d
        }
        None => text.parse().map_err(|_| Error::InvalidFactor(text.to_string()))?,
    };
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::NonPositiveFactor(value));
    }
    Ok(value)
}

/// Evaluates `model_id` at every zoom factor. Factor 1 under
/// [`SweepSource::PerturbStored`] reproduces [`run_evaluation`] exactly.
pub fn run_scale_sweep(
    manifest: &Manifest,
    model_id: &str,
    taxonomy: &ClassTaxonomy,
    factors: &[f64],
    source: &SweepSource,
    options: &EvalOptions,
) -> Result<ScaleSweep> {
    options.validate()?;
    if factors.is_empty() {
        return Err(Error::InvalidConfig("no factors given".into()));
    }
    for &f in factors {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::NonPositiveFactor(f));
        }
    }
    let mut points = Vec::with_capacity(factors.len());
    for &factor in factors {
        let label = factor_label(factor);
        let (report, occ) = match source {
            SweepSource::PerturbStored => perturbed_point(manifest, model_id, taxonomy, factor, options)?,
            SweepSource::PerFactor(map) => {
                let m = map
                    .get(&label)
                    .ok_or_else(|| Error::InvalidConfig(format!("no manifest for factor {label}")))?;
                let report = run_evaluation(m, model_id, taxonomy, options)?;
                let occ = with_pool(options.jobs, || {
                    m.samples
                        .par_iter()
                        .map(|r| {
                            load_label_mask(m.resolve(&r.annotation), taxonomy)
                                .and_then(|gt| occupancy(&gt, taxonomy))
                                .map_err(|e| e.in_sample(&r.id))
                        })
                        .collect::<Result<Vec<f64>>>()
                })??;
                (report, occ)
            }
        };
        points.push(SweepPoint {
            factor,
            label,
            occupancy: occupancy_stats(&occ)?,
            report,
        });
    }
    Ok(ScaleSweep {
        dataset: manifest.dataset_id.clone(),
        model: model_id.to_string(),
        taxonomy: taxonomy.name().to_string(),
        points,
    })
}

fn perturbed_point(
    manifest: &Manifest,
    model_id: &str,
    taxonomy: &ClassTaxonomy,
    factor: f64,
    options: &EvalOptions,
) -> Result<(EvalReport, Vec<f64>)> {
    check_manifest(manifest, model_id)?;
    let bg = taxonomy.background_id();
    let per_sample = with_pool(options.jobs, || {
        manifest
            .samples
            .par_iter()
            .map(|r| {
                (|| {
                    let (gt, pred) = load_pair(manifest, r, model_id, taxonomy)?;
                    let spec = ScaleSpec::new(factor, gt.width(), gt.height())?;
                    let gt = scale_mask(&gt, &spec, bg)?;
                    let pred = scale_mask(&pred, &spec, bg)?;
                    let occ = occupancy(&gt, taxonomy)?;
                    Ok((tally_masks(&gt, &pred, taxonomy, options)?, occ))
                })()
                .map_err(|e: Error| e.in_sample(&r.id))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (tallies, occ): (Vec<_>, Vec<_>) = per_sample.into_iter().unzip();
    let dataset = format!("{}_x{}", manifest.dataset_id, factor_label(factor));
    Ok((fold_report(&dataset, model_id, taxonomy, options, tallies)?, occ))
}

impl ScaleSweep {
    /// `(factor, average Jaccard)` pairs; undefined averages are `None`.
    pub fn curve(&self) -> Vec<(f64, Option<f64>)> {
        self.points
            .iter()
            .map(|p| (p.factor, p.report.average.jaccard))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per factor: averages in percent and the occupancy summary.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "factor",
            "n_samples",
            "precision",
            "recall",
            "jaccard",
            "fwb",
            "occ_min",
            "occ_q1",
            "occ_median",
            "occ_q3",
            "occ_max",
        ])?;
        let pct = |v: Option<f64>| v.map(report::percent::format_percent).unwrap_or_default();
        let occ = |v: f64| format!("{v:.6}");
        for p in &self.points {
            let a = &p.report.average;
            let o = &p.occupancy;
            w.write_record([
                p.label.clone(),
                p.report.n_samples.to_string(),
                pct(a.precision),
                pct(a.recall),
                pct(a.jaccard),
                pct(a.fwb),
                occ(o.min),
                occ(o.q1),
                occ(o.median),
                occ(o.q3),
                occ(o.max),
            ])?;
        }
        report::into_string(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskio::save_label_mask;
    use std::path::PathBuf;

    fn write_dataset(dir: &Path, pairs: &[(&str, LabelMask, LabelMask)]) -> Manifest {
        let mut samples = Vec::new();
        for (id, gt, pred) in pairs {
            let a = PathBuf::from(format!("{id}_gt.png"));
            let p = PathBuf::from(format!("{id}_m.png"));
            save_label_mask(gt, dir.join(&a)).unwrap();
            save_label_mask(pred, dir.join(&p)).unwrap();
            samples.push(SampleRecord {
                id: id.to_string(),
                image: None,
                annotation: a,
                predictions: [("m".to_string(), p)].into(),
                split: "test".into(),
            });
        }
        Manifest::new("toy", dir, samples).unwrap()
    }

    fn blob(t: &ClassTaxonomy, w: usize, h: usize, x0: usize, y0: usize, s: usize, class: u8) -> LabelMask {
        let labels = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if (x0..x0 + s).contains(&x) && (y0..y0 + s).contains(&y) {
                    class
                } else {
                    0
                }
            })
            .collect();
        LabelMask::new(w, h, labels, t).unwrap()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let gt = blob(&t, 32, 24, 4, 4, 10, 2);
        let m = write_dataset(dir.path(), &[("a", gt.clone(), gt)]);
        let r = run_evaluation(&m, "m", &t, &EvalOptions::default()).unwrap();
        let cut = r.class("cut").unwrap();
        assert_eq!(cut.confusion.as_ref().unwrap().jaccard, Some(1.0));
        assert_eq!(cut.weighted.as_ref().unwrap().fwb, Some(1.0));
        assert_eq!(r.average.jaccard, Some(1.0));
        assert_eq!(r.average.fwb, Some(1.0));
        r.validate(1e-12).unwrap();
    }

    #[test]
    fn counts_merge_before_dividing() {
        // sample a: tp 1, fp 1, fn 1 on class 1; sample b: tp 3
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let a_gt = LabelMask::new(3, 1, vec![1, 1, 0], &t).unwrap();
        let a_pr = LabelMask::new(3, 1, vec![1, 0, 1], &t).unwrap();
        let b = LabelMask::new(3, 1, vec![1, 1, 1], &t).unwrap();
        let m = write_dataset(dir.path(), &[("a", a_gt, a_pr), ("b", b.clone(), b)]);
        let r = run_evaluation(&m, "m", &t, &EvalOptions::default()).unwrap();
        assert_eq!(
            r.class("grasp").unwrap().confusion.as_ref().unwrap().jaccard,
            Some(4.0 / 6.0)
        );
        assert_eq!(r.n_samples, 2);
    }

    #[test]
    fn errors_name_the_sample() {
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let empty = Manifest::new("e", dir.path(), vec![]).unwrap();
        assert!(matches!(
            run_evaluation(&empty, "m", &t, &EvalOptions::default()),
            Err(Error::EmptyManifest)
        ));

        let gt = blob(&t, 8, 8, 1, 1, 3, 1);
        let m = write_dataset(dir.path(), &[("a", gt.clone(), gt)]);
        match run_evaluation(&m, "other", &t, &EvalOptions::default()) {
            Err(Error::MissingPrediction { sample, model }) => {
                assert_eq!((sample.as_str(), model.as_str()), ("a", "other"))
            }
            other => panic!("{other:?}"),
        }

        let gt = blob(&t, 8, 8, 1, 1, 3, 1);
        let pred = blob(&t, 8, 6, 1, 1, 3, 1);
        let m = write_dataset(dir.path(), &[("s7", gt, pred)]);
        match run_evaluation(&m, "m", &t, &EvalOptions::default()) {
            Err(Error::Sample { id, source }) => {
                assert_eq!(id, "s7");
                assert!(matches!(*source, Error::ShapeMismatch { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pool_width_does_not_change_bits() {
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let pairs: Vec<_> = (0..9)
            .map(|i| {
                let gt = blob(&t, 30, 20, i, 2 + i / 2, 8, (i % 7 + 1) as u8);
                let pred = blob(&t, 30, 20, i + 1, 2, 7, (i % 7 + 1) as u8);
                (["a", "b", "c", "d", "e", "f", "g", "h", "i"][i], gt, pred)
            })
            .collect();
        let m = write_dataset(dir.path(), &pairs);
        let run = |jobs| {
            run_evaluation(
                &m,
                "m",
                &t,
                &EvalOptions {
                    jobs: Some(jobs),
                    ..Default::default()
                },
            )
            .unwrap()
            .to_json()
            .unwrap()
        };
        let one = run(1);
        for j in [2, 3, 8] {
            assert_eq!(run(j), one);
        }
    }

    #[test]
    fn sweep_identity_and_shape() {
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let gt = blob(&t, 40, 30, 10, 8, 12, 4);
        let pred = blob(&t, 40, 30, 11, 8, 12, 4);
        let m = write_dataset(dir.path(), &[("a", gt.clone(), pred), ("b", gt.clone(), gt.clone())]);
        let opts = EvalOptions::default();
        let sweep = run_scale_sweep(&m, "m", &t, &[0.5, 1.0, 2.0], &SweepSource::PerturbStored, &opts).unwrap();
        assert_eq!(sweep.points.len(), 3);
        let plain = run_evaluation(&m, "m", &t, &opts).unwrap();
        let mut at_one = sweep.points[1].report.clone();
        at_one.dataset_id = plain.dataset_id.clone();
        assert_eq!(at_one, plain);
        assert_eq!(sweep.to_csv().unwrap().lines().count(), 4);

        let perfect = write_dataset(dir.path(), &[("p", gt.clone(), gt)]);
        let s = run_scale_sweep(&perfect, "m", &t, &[0.5, 1.0], &SweepSource::PerturbStored, &opts).unwrap();
        assert_eq!(s.curve(), vec![(0.5, Some(1.0)), (1.0, Some(1.0))]);
        assert!(s.points[0].occupancy.median < s.points[1].occupancy.median);
    }

    #[test]
    fn sweep_rejects_bad_factors() {
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let gt = blob(&t, 8, 8, 1, 1, 3, 1);
        let m = write_dataset(dir.path(), &[("a", gt.clone(), gt)]);
        let opts = EvalOptions::default();
        assert!(matches!(
            run_scale_sweep(&m, "m", &t, &[0.0], &SweepSource::PerturbStored, &opts),
            Err(Error::NonPositiveFactor(_))
        ));
        assert!(run_scale_sweep(&m, "m", &t, &[0.5], &SweepSource::PerFactor(BTreeMap::new()), &opts).is_err());
    }

    #[test]
    fn factor_parsing() {
        assert_eq!(parse_factor("0.5").unwrap(), 0.5);
        assert_eq!(parse_factor("2/3").unwrap(), 2.0 / 3.0);
        assert_eq!(parse_factor(" 2 ").unwrap(), 2.0);
        assert!(matches!(parse_factor("0"), Err(Error::NonPositiveFactor(_))));
        assert!(matches!(parse_factor("-1/2"), Err(Error::NonPositiveFactor(_))));
        assert!(matches!(parse_factor("x"), Err(Error::InvalidFactor(_))));
        assert!(parse_factor("1/0").is_err());
    }

    #[test]
    fn in_memory_matches_disk() {
        let t = ClassTaxonomy::umd();
        let dir = tempfile::tempdir().unwrap();
        let gt = blob(&t, 20, 20, 2, 3, 9, 6);
        let pred = blob(&t, 20, 20, 4, 3, 9, 6);
        let m = write_dataset(dir.path(), &[("a", gt.clone(), pred.clone())]);
        let opts = EvalOptions::default();
        assert_eq!(
            evaluate_masks("toy", "m", &[(gt, pred)], &t, &opts).unwrap(),
            run_evaluation(&m, "m", &t, &opts).unwrap()
        );
    }
}
