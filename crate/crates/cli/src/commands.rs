use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use affbench_core::runner::{parse_factor, EvalOptions, SweepSource};
use affbench_core::scale::{factor_label, perturb_dataset};
use affbench_core::{
    augment_dataset, compare_reports, dataset_occupancy, occupancy_stats, run_evaluation, run_scale_sweep,
    AugmentConfig, ClassTaxonomy, EvalReport, Manifest, MetricSet, ReferenceValues, WfbParams,
};
use anyhow::Context;
use serde_json::json;

use crate::{
    AugmentArgs, Command, CompareArgs, EvaluateArgs, Failure, Format, Jobs, MetricArgs, OccupancyArgs, Output,
    PerturbArgs, SweepArgs,
};

pub fn dispatch(command: Command) -> Result<(), Failure> {
    let jobs = match &command {
        Command::Evaluate(a) => Some(&a.jobs),
        Command::Sweep(a) => Some(&a.jobs),
        Command::Perturb(a) => Some(&a.jobs),
        Command::Occupancy(a) => Some(&a.jobs),
        Command::Augment(a) => Some(&a.jobs),
        Command::Compare(_) | Command::Plotdata(_) => None,
    };
    let width = jobs.map(worker_count).unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(width)
        .build()
        .map_err(|e| Failure::Data(e.into()))?;
    pool.install(|| match command {
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Perturb(a) => perturb(a),
        Command::Occupancy(a) => occupancy(a),
        Command::Augment(a) => augment(a),
        Command::Compare(a) => compare(a),
        Command::Plotdata(a) => crate::plotdata::run(a),
    })
}

fn worker_count(jobs: &Jobs) -> usize {
    jobs.jobs
        .map(usize::from)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn taxonomy(spec: &str) -> Result<ClassTaxonomy, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(ClassTaxonomy::load(path)?);
    }
    ClassTaxonomy::builtin(spec).ok_or_else(|| {
        Failure::Data(anyhow::anyhow!(
            "taxonomy {spec:?} is neither a readable file nor a built-in name (umd, choc-aff)"
        ))
    })
}

fn factors(list: &[String]) -> Result<Vec<f64>, Failure> {
    if list.is_empty() {
        return Err(Failure::Usage("at least one factor is required".into()));
    }
    list.iter()
        .map(|f| parse_factor(f).map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

fn eval_options(m: &MetricArgs) -> Result<EvalOptions, Failure> {
    let metrics: MetricSet = m
        .metrics
        .parse()
        .map_err(|e: affbench_core::Error| Failure::Usage(e.to_string()))?;
    let wfb = WfbParams {
        sigma: m.sigma,
        kernel_radius: m.kernel_radius,
        alpha: m.alpha.unwrap_or(WfbParams::default().alpha),
        beta: m.beta,
    };
    if metrics.wfb {
        wfb.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(EvalOptions {
        metrics,
        wfb,
        jobs: None,
    })
}

fn format_of(output: &Output) -> Format {
    output.format.unwrap_or_else(|| match &output.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Format::Csv,
        _ => Format::Json,
    })
}

pub(crate) fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_manifest(path: &Path) -> Result<Manifest, Failure> {
    Ok(Manifest::load(path)?)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{:.2}", x * 100.0))
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let options = eval_options(&a.metrics)?;
    let taxonomy = taxonomy(&a.dataset.taxonomy)?;
    let manifest = load_manifest(&a.dataset.manifest)?;
    let report = run_evaluation(&manifest, &a.model, &taxonomy, &options)?;
    report.validate(1e-12)?;
    let text = match format_of(&a.output) {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    emit(a.output.out.as_deref(), &text)?;
    eprintln!(
        "{} on {}: {} samples, mean J {}, mean F^w {}",
        report.model_id,
        report.dataset_id,
        report.n_samples,
        pct(report.average.jaccard),
        pct(report.average.fwb),
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let options = eval_options(&a.metrics)?;
    let factors = factors(&a.factors)?;
    let taxonomy = taxonomy(&a.dataset.taxonomy)?;
    let source = if a.factor_manifests.is_empty() {
        SweepSource::PerturbStored
    } else {
        let mut map = BTreeMap::new();
        for spec in &a.factor_manifests {
            let (f, path) = spec
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--factor-manifest expects FACTOR=PATH, got {spec:?}")))?;
            let f = parse_factor(f).map_err(|e| Failure::Usage(e.to_string()))?;
            map.insert(factor_label(f), load_manifest(Path::new(path))?);
        }
        for &f in &factors {
            if !map.contains_key(&factor_label(f)) {
                return Err(Failure::Usage(format!(
                    "no --factor-manifest for factor {}",
                    factor_label(f)
                )));
            }
        }
        SweepSource::PerFactor(map)
    };
    let manifest = load_manifest(&a.dataset.manifest)?;
    let sweep = run_scale_sweep(&manifest, &a.model, &taxonomy, &factors, &source, &options)?;
    let text = match format_of(&a.output) {
        Format::Json => sweep.to_json()?,
        Format::Csv => sweep.to_csv()?,
    };
    emit(a.output.out.as_deref(), &text)?;
    for (f, j) in sweep.curve() {
        eprintln!("x{}: mean J {}", factor_label(f), pct(j));
    }
    Ok(())
}

fn perturb(a: PerturbArgs) -> Result<(), Failure> {
    let factor = parse_factor(&a.factor).map_err(|e| Failure::Usage(e.to_string()))?;
    let taxonomy = taxonomy(&a.dataset.taxonomy)?;
    let manifest = load_manifest(&a.dataset.manifest)?;
    let out = perturb_dataset(&manifest, factor, &taxonomy, &a.out_dir)?;
    let path = a.out_dir.join(format!("{}.jsonl", out.dataset_id));
    out.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn occupancy(a: OccupancyArgs) -> Result<(), Failure> {
    let factors = factors(&a.factors)?;
    let taxonomy = taxonomy(&a.dataset.taxonomy)?;
    let manifest = load_manifest(&a.dataset.manifest)?;
    let mut entries = Vec::new();
    let mut rows = vec!["factor,id,occupancy".to_string()];
    for f in factors {
        let values = dataset_occupancy(&manifest, &taxonomy, f)?;
        let stats = occupancy_stats(&values.iter().map(|v| v.1).collect::<Vec<_>>())?;
        let label = factor_label(f);
        for (id, v) in &values {
            rows.push(format!("{label},{id},{v:.6}"));
        }
        let samples: serde_json::Map<String, serde_json::Value> =
            values.into_iter().map(|(id, v)| (id, json!(v))).collect();
        entries.push(json!({ "factor": f, "label": label, "stats": stats, "samples": samples }));
    }
    let text = match format_of(&a.output) {
        Format::Json => {
            let doc = json!({ "dataset": manifest.dataset_id, "taxonomy": taxonomy.name(), "factors": entries });
            serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)? + "\n"
        }
        Format::Csv => rows.join("\n") + "\n",
    };
    emit(a.output.out.as_deref(), &text)
}

fn augment(a: AugmentArgs) -> Result<(), Failure> {
    let config = match &a.augment_config {
        Some(path) => AugmentConfig::load(path)?,
        None => AugmentConfig::builtin(&a.preset)
            .ok_or_else(|| Failure::Usage(format!("unknown preset {:?} (umd_ours, choc_aff, identity)", a.preset)))?,
    };
    if a.copies == 0 {
        return Err(Failure::Usage("--copies must be at least 1".into()));
    }
    let taxonomy = taxonomy(&a.dataset.taxonomy)?;
    let manifest = load_manifest(&a.dataset.manifest)?;
    let out = augment_dataset(&manifest, &taxonomy, &config, a.seed, a.copies, &a.out_dir)?;
    let path: PathBuf = a.out_dir.join(format!("{}.jsonl", out.dataset_id));
    out.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    if !(a.tolerance >= 0.0 && a.tolerance.is_finite()) {
        return Err(Failure::Usage(format!(
            "tolerance {} must be non-negative",
            a.tolerance
        )));
    }
    let report = EvalReport::load(&a.report)?;
    let reference = ReferenceValues::load(&a.reference)?;
    let table = compare_reports(&report, &reference, a.tolerance)?;
    let text = match format_of(&a.output) {
        Format::Json => table.to_json()?,
        Format::Csv => table.to_csv()?,
    };
    emit(a.output.out.as_deref(), &text)?;
    if table.passed() {
        eprintln!(
            "{} values within {} points (max |delta| {:.4})",
            table.rows.len(),
            a.tolerance,
            table.max_abs_delta
        );
        Ok(())
    } else {
        let worst: Vec<String> = table
            .rows
            .iter()
            .filter(|r| r.delta.abs() > a.tolerance)
            .map(|r| format!("{}.{} {:+.4}", r.metric, r.class, r.delta))
            .collect();
        Err(Failure::Tolerance(format!(
            "max |delta| {:.4} exceeds tolerance {}: {}",
            table.max_abs_delta,
            a.tolerance,
            worst.join(", ")
        )))
    }
}
