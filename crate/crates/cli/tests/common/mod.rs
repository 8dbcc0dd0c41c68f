#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use affbench_bench::{annotation, prediction, rng};
use affbench_core::runner::{Averages, ClassRow, ConfusionRow, ReportConfig, WeightedRow};
use affbench_core::{
    save_image, save_label_mask, ClassTaxonomy, EvalReport, Manifest, MetricSet, ReferenceValues, RgbImage,
    SampleRecord, WfbParams,
};
use rand::RngExt;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_affbench")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn affbench(args: &[&str]) -> Run {
    affbench_env(args, &[])
}

pub fn affbench_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove("AFFBENCH_JOBS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn references_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/references")
}

/// Writes `n` random samples (image, annotation and one prediction for
/// model `m`) and returns the manifest path.
pub fn write_dataset(dir: &Path, name: &str, n: usize, width: usize, height: usize, seed: u64) -> PathBuf {
    let t = ClassTaxonomy::umd();
    let mut r = rng(seed);
    let mut samples = Vec::new();
    for i in 0..n {
        let gt = annotation(&mut r, &t, width, height);
        let pred = prediction(&mut r, &gt, &t, 0.02);
        let pixels = (0..width * height)
            .map(|_| {
                [
                    r.random_range(0..=255u8),
                    r.random_range(0..=255u8),
                    r.random_range(0..=255u8),
                ]
            })
            .collect();
        let img = RgbImage::new(width, height, pixels).unwrap();
        let id = format!("s{i:03}");
        let (a, p, im) = (
            PathBuf::from(format!("gt/{id}.png")),
            PathBuf::from(format!("pred/{id}.png")),
            PathBuf::from(format!("rgb/{id}.png")),
        );
        for d in ["gt", "pred", "rgb"] {
            std::fs::create_dir_all(dir.join(d)).unwrap();
        }
        save_label_mask(&gt, dir.join(&a)).unwrap();
        save_label_mask(&pred, dir.join(&p)).unwrap();
        save_image(&img, dir.join(&im)).unwrap();
        samples.push(SampleRecord {
            id,
            image: Some(im),
            annotation: a,
            predictions: [("m".to_string(), p)].into(),
            split: "test".into(),
        });
    }
    let manifest = Manifest::new(name, dir, samples).unwrap();
    let path = dir.join(format!("{name}.jsonl"));
    manifest.save(&path).unwrap();
    path
}

/// A report carrying exactly the published numbers of `refs`, with empty
/// tallies.
pub fn report_from_reference(
    refs: &ReferenceValues,
    taxonomy: &ClassTaxonomy,
    dataset: &str,
    model: &str,
) -> EvalReport {
    let get = |metric: &str, class: &str| refs.entries.get(&format!("{metric}.{class}")).map(|e| e.value / 100.0);
    let has_family = |names: &[&str]| {
        refs.entries
            .keys()
            .any(|k| names.iter().any(|n| k.starts_with(&format!("{n}."))))
    };
    let jaccard = has_family(&["precision", "recall", "jaccard"]);
    let wfb = has_family(&["pw", "rw", "fwb"]);
    let classes = taxonomy
        .foreground_ids()
        .into_iter()
        .map(|id| {
            let label = taxonomy.label(id).unwrap().to_string();
            ClassRow {
                id,
                confusion: jaccard.then(|| ConfusionRow {
                    tp: 0,
                    fp: 0,
                    fn_: 0,
                    precision: get("precision", &label),
                    recall: get("recall", &label),
                    jaccard: get("jaccard", &label),
                }),
                weighted: wfb.then(|| WeightedRow {
                    tpw: 0.0,
                    fpw: 0.0,
                    fnw: 0.0,
                    images: 0,
                    pw: get("pw", &label),
                    rw: get("rw", &label),
                    fwb: get("fwb", &label),
                }),
                label,
            }
        })
        .collect();
    EvalReport {
        dataset_id: dataset.into(),
        model_id: model.into(),
        taxonomy: taxonomy.name().into(),
        n_samples: 0,
        classes,
        average: Averages {
            precision: get("precision", "average"),
            recall: get("recall", "average"),
            jaccard: get("jaccard", "average"),
            pw: get("pw", "average"),
            rw: get("rw", "average"),
            fwb: get("fwb", "average"),
        },
        config: ReportConfig {
            metrics: MetricSet { jaccard, wfb },
            wfb: wfb.then(WfbParams::default),
        },
    }
}
