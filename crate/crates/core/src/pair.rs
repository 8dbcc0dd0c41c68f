//! Whole-pair entry points over raw row-major buffers, for embedding in
//! foreign training loops. Inputs are borrowed; results are fresh buffers.

use std::collections::BTreeMap;

use crate::confusion::{tally_pair, Ratio};
use crate::error::{Error, Result};
use crate::maskio::{ClassTaxonomy, LabelMask};
use crate::runner::{EvalOptions, EvalReport};
use crate::scale::{scale_mask, ScaleSpec};
use crate::wfb::{reduce_fields, weighted_error, wfb_score, wfb_tally_image, BinaryMask, WfbParams, WfbScore};

fn labels(buf: &[u8], width: usize, height: usize, taxonomy: &ClassTaxonomy) -> Result<LabelMask> {
    LabelMask::new(width, height, buf.to_vec(), taxonomy)
}

/// Per-class metrics of one pair, keyed by metric name (`precision`,
/// `recall`, `jaccard`, `pw`, `rw`, `fwb`) and then class id. Classes
/// absent from the annotation have no weighted entry.
pub fn evaluate_pair(
    gt: &[u8],
    pred: &[u8],
    width: usize,
    height: usize,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<BTreeMap<String, BTreeMap<u8, Ratio>>> {
    if gt.len() != pred.len() {
        return Err(Error::ShapeMismatch {
            expected: (gt.len(), 1),
            found: (pred.len(), 1),
        });
    }
    let gt = labels(gt, width, height, taxonomy)?;
    let pred = labels(pred, width, height, taxonomy)?;
    let mut out: BTreeMap<String, BTreeMap<u8, Ratio>> = BTreeMap::new();
    if options.metrics.jaccard {
        let t = tally_pair(&gt, &pred, taxonomy)?;
        for id in taxonomy.foreground_ids() {
            out.entry("precision".into()).or_default().insert(id, t.precision(id)?);
            out.entry("recall".into()).or_default().insert(id, t.recall(id)?);
            out.entry("jaccard".into()).or_default().insert(id, t.jaccard(id)?);
        }
    }
    if options.metrics.wfb {
        options.wfb.validate()?;
        let w = wfb_tally_image(&gt, &pred, taxonomy, &options.wfb)?;
        for id in taxonomy.foreground_ids() {
            if !gt.contains_label(id) {
                continue;
            }
            let s = wfb_score(w.class(id)?, options.wfb.beta);
            out.entry("pw".into()).or_default().insert(id, s.pw);
            out.entry("rw".into()).or_default().insert(id, s.rw);
            out.entry("fwb".into()).or_default().insert(id, s.f);
        }
    }
    Ok(out)
}

/// Weighted measure of one binary pair (non-zero bytes are foreground).
/// `Ok(None)` signals an empty annotation: the pair carries no information
/// for the class and should be skipped.
pub fn wfb_pair(
    gt_fg: &[u8],
    pred_fg: &[u8],
    width: usize,
    height: usize,
    params: &WfbParams,
) -> Result<Option<WfbScore>> {
    let to_mask = |b: &[u8]| BinaryMask::new(width, height, b.iter().map(|&v| v != 0).collect());
    let gt = to_mask(gt_fg)?;
    let pred = to_mask(pred_fg)?;
    if !gt.any() {
        return Ok(None);
    }
    let fields = weighted_error(&gt, &pred, params)?;
    Ok(Some(wfb_score(&reduce_fields(&gt, &fields), params.beta)))
}

/// Zoom perturbation of a raw label buffer at its own canvas size.
pub fn perturb_mask(mask: &[u8], width: usize, height: usize, factor: f64, background_id: u8) -> Result<Vec<u8>> {
    let m = LabelMask::with_class_count(width, height, mask.to_vec(), 256)?;
    let spec = ScaleSpec::new(factor, width, height)?;
    Ok(scale_mask(&m, &spec, background_id)?.into_labels())
}

/// Convenience for callers holding whole datasets in memory.
pub fn evaluate_buffers(
    pairs: &[(&[u8], &[u8])],
    width: usize,
    height: usize,
    taxonomy: &ClassTaxonomy,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let masks = pairs
        .iter()
        .map(|(g, p)| Ok((labels(g, width, height, taxonomy)?, labels(p, width, height, taxonomy)?)))
        .collect::<Result<Vec<_>>>()?;
    crate::runner::evaluate_masks("buffers", "buffers", &masks, taxonomy, options)
}
