//! Per-class pixel confusion counts accumulated over a dataset, and the
//! precision, recall and Jaccard ratios formed from them.
//!
//! Counts are summed over every image before any ratio is taken (micro
//! accumulation), so the per-class Jaccard index of a dataset is
//! `Σ tp / Σ (tp + fp + fn)` and not a mean of per-image ratios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskio::{ClassTaxonomy, LabelMask};

/// `None` marks an undefined ratio (zero denominator).
pub type Ratio = Option<f64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    taxonomy: String,
    tp: Vec<u64>,
    fp: Vec<u64>,
    #[serde(rename = "fn")]
    fn_: Vec<u64>,
    images_seen: u64,
}

impl ConfusionTally {
    /// The zero tally: identity element of [`merge_tallies`].
    pub fn zero(taxonomy: &ClassTaxonomy) -> Self {
        let n = taxonomy.num_classes();
        ConfusionTally {
            taxonomy: taxonomy.name().to_string(),
            tp: vec![0; n],
            fp: vec![0; n],
            fn_: vec![0; n],
            images_seen: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.tp.len()
    }

    pub fn images_seen(&self) -> u64 {
        self.images_seen
    }

    pub fn tp(&self, class: u8) -> u64 {
        self.tp[class as usize]
    }

    pub fn fp(&self, class: u8) -> u64 {
        self.fp[class as usize]
    }

    pub fn fn_(&self, class: u8) -> u64 {
        self.fn_[class as usize]
    }

    /// `(tp, fp, fn)` for one class.
    pub fn counts(&self, class: u8) -> Result<(u64, u64, u64)> {
        self.check_class(class)?;
        let c = class as usize;
        Ok((self.tp[c], self.fp[c], self.fn_[c]))
    }

    /// In-place accumulation of `other`.
    pub fn absorb(&mut self, other: &ConfusionTally) -> Result<()> {
        if self.taxonomy != other.taxonomy || self.tp.len() != other.tp.len() {
            return Err(Error::TaxonomyMismatch(self.taxonomy.clone(), other.taxonomy.clone()));
        }
        for c in 0..self.tp.len() {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        self.images_seen += other.images_seen;
        Ok(())
    }

    fn check_class(&self, class: u8) -> Result<()> {
        if (class as usize) < self.tp.len() {
            Ok(())
        } else {
            Err(Error::UnknownClass(class))
        }
    }

    pub fn precision(&self, class: u8) -> Result<Ratio> {
        let (tp, fp, _) = self.counts(class)?;
        Ok(ratio(tp, tp + fp))
    }

    pub fn recall(&self, class: u8) -> Result<Ratio> {
        let (tp, _, fn_) = self.counts(class)?;
        Ok(ratio(tp, tp + fn_))
    }

    pub fn jaccard(&self, class: u8) -> Result<Ratio> {
        let (tp, fp, fn_) = self.counts(class)?;
        Ok(ratio(tp, tp + fp + fn_))
    }
}

pub(crate) fn ratio(num: u64, den: u64) -> Ratio {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Confusion counts of one annotation/prediction pair.
pub fn tally_pair(gt: &LabelMask, pred: &LabelMask, taxonomy: &ClassTaxonomy) -> Result<ConfusionTally> {
    if gt.dims() != pred.dims() {
        return Err(Error::ShapeMismatch {
            expected: gt.dims(),
            found: pred.dims(),
        });
    }
    gt.ensure_bound_to(taxonomy)?;
    pred.ensure_bound_to(taxonomy)?;

    let mut tally = ConfusionTally::zero(taxonomy);
    // Counting agreements into a 256-wide table keeps the inner loop free of
    // bounds checks; every label is < num_classes by construction.
    let mut hits = [0u64; 256];
    let mut gt_count = [0u64; 256];
    let mut pred_count = [0u64; 256];
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        gt_count[g as usize] += 1;
        pred_count[p as usize] += 1;
        hits[g as usize] += u64::from(g == p);
    }
    for c in 0..tally.num_classes() {
        tally.tp[c] = hits[c];
        tally.fp[c] = pred_count[c] - hits[c];
        tally.fn_[c] = gt_count[c] - hits[c];
    }
    tally.images_seen = 1;
    Ok(tally)
}

pub fn merge_tallies(a: &ConfusionTally, b: &ConfusionTally) -> Result<ConfusionTally> {
    let mut out = a.clone();
    out.absorb(b)?;
    Ok(out)
}

pub fn precision(tally: &ConfusionTally, class: u8) -> Result<Ratio> {
    tally.precision(class)
}

pub fn recall(tally: &ConfusionTally, class: u8) -> Result<Ratio> {
    tally.recall(class)
}

pub fn jaccard(tally: &ConfusionTally, class: u8) -> Result<Ratio> {
    tally.jaccard(class)
}

/// Arithmetic mean over the classes of `class_set` that have a defined
/// value. Undefined and missing entries are skipped, not counted as zero.
pub fn macro_average(values: &BTreeMap<u8, Ratio>, class_set: &[u8]) -> Result<f64> {
    let defined: Vec<f64> = class_set
        .iter()
        .filter_map(|c| values.get(c).copied().flatten())
        .collect();
    if defined.is_empty() {
        return Err(Error::NoDefinedClasses);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}
