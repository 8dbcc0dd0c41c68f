//! Weighted F-beta measure for one class at a time.
//!
//! Per image and class the annotation and prediction are binarized, and the
//! absolute error field `E = |Y − Ŷ|` is reweighted in two ways:
//!
//! * on the annotated foreground, a missed pixel is forgiven in proportion
//!   to how much of its Gaussian neighbourhood is also in error, where each
//!   background neighbour contributes the error of its nearest annotated
//!   pixel;
//! * on the background, a false positive costs more the farther it lies from
//!   the annotation, through `D = 2 − exp(α·Δ)`.
//!
//! The weighted error `E^w` then yields real-valued `TP^w`, `FP^w` and
//! `FN^w`, which are summed over a dataset like integer confusion counts.
//!
//! [`weighted_error`] is the production path (exact two-pass distance
//! transform, separable filtering). [`dense_oracle_weighted_error`]
//! evaluates the same fields by brute force and exists to check it.

mod distance;
mod filter;
mod oracle;

use serde::{Deserialize, Serialize};

pub use distance::distance_transform;
pub use oracle::{brute_force_distance_transform, dense_oracle_weighted_error};

use crate::confusion::Ratio;
use crate::error::{Error, Result};
use crate::maskio::{ClassTaxonomy, LabelMask};

/// Row-major foreground map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "{} bits for a {width}x{height} foreground map",
                bits.len()
            )));
        }
        Ok(BinaryMask { width, height, bits })
    }

    /// Pixels of `mask` equal to `class`.
    pub fn from_class(mask: &LabelMask, class: u8) -> Self {
        BinaryMask {
            width: mask.width(),
            height: mask.height(),
            bits: mask.labels().iter().map(|&l| l == class).collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WfbParams {
    /// Standard deviation of the dependency Gaussian, in pixels.
    pub sigma: f64,
    /// Window half-width; the kernel covers `(2r+1)²` pixels.
    pub kernel_radius: usize,
    /// Decay constant of the background importance field (negative).
    pub alpha: f64,
    pub beta: f64,
}

impl Default for WfbParams {
    fn default() -> Self {
        WfbParams {
            sigma: 5.0,
            kernel_radius: 3,
            alpha: 0.5f64.ln() / 5.0,
            beta: 1.0,
        }
    }
}

impl WfbParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if self.kernel_radius < 1 {
            return bad("kernel radius must be at least 1");
        }
        if !(self.alpha < 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be negative");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        Ok(())
    }
}

/// Per-pixel Euclidean distance to the nearest foreground pixel, and which
/// pixel that is (row-major index; smallest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub delta: Vec<f64>,
    pub nearest_index: Vec<usize>,
}

/// Intermediate fields of the weighted error, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WfbFields {
    pub width: usize,
    pub height: usize,
    /// `|Y − Ŷ|`.
    pub e: Vec<bool>,
    /// `e` on the foreground; on the background, `e` at the nearest
    /// foreground pixel.
    pub et: Vec<bool>,
    /// `et` filtered with the normalized truncated Gaussian.
    pub ea: Vec<f64>,
    /// `ea` where it undercuts `e` on the foreground, `e` elsewhere.
    pub min_e_ea: Vec<f64>,
    /// 1 on the foreground, `2 − exp(α·Δ)` on the background.
    pub d_field: Vec<f64>,
    pub ew: Vec<f64>,
}

fn check_pair(gt_fg: &BinaryMask, pred_fg: &BinaryMask, params: &WfbParams) -> Result<()> {
    params.validate()?;
    if gt_fg.dims() != pred_fg.dims() {
        return Err(Error::ShapeMismatch {
            expected: gt_fg.dims(),
            found: pred_fg.dims(),
        });
    }
    if !gt_fg.any() {
        return Err(Error::EmptyForeground);
    }
    Ok(())
}

pub fn weighted_error(gt_fg: &BinaryMask, pred_fg: &BinaryMask, params: &WfbParams) -> Result<WfbFields> {
    check_pair(gt_fg, pred_fg, params)?;
    let (w, h) = gt_fg.dims();
    let y = gt_fg.bits();

    let e: Vec<bool> = y.iter().zip(pred_fg.bits()).map(|(&a, &b)| a != b).collect();
    let dist = distance_transform(gt_fg)?;
    let et: Vec<bool> = (0..w * h)
        .map(|i| if y[i] { e[i] } else { e[dist.nearest_index[i]] })
        .collect();
    let et_real: Vec<f64> = et.iter().map(|&b| f64::from(u8::from(b))).collect();
    let ea = filter::gaussian_filter(&et_real, w, h, params.sigma, params.kernel_radius);

    let mut min_e_ea = Vec::with_capacity(w * h);
    let mut d_field = Vec::with_capacity(w * h);
    let mut ew = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let err = f64::from(u8::from(e[i]));
        let m = if y[i] && ea[i] < err { ea[i] } else { err };
        let d = if y[i] {
            1.0
        } else {
            2.0 - (params.alpha * dist.delta[i]).exp()
        };
        min_e_ea.push(m);
        d_field.push(d);
        ew.push(m * d);
    }

    Ok(WfbFields {
        width: w,
        height: h,
        e,
        et,
        ea,
        min_e_ea,
        d_field,
        ew,
    })
}

/// Weighted confusion mass of one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WfbClassTally {
    pub tpw: f64,
    pub fpw: f64,
    pub fnw: f64,
    /// Images in which the class was annotated.
    pub images_seen: u64,
}

impl WfbClassTally {
    pub fn absorb(&mut self, other: &WfbClassTally) {
        self.tpw += other.tpw;
        self.fpw += other.fpw;
        self.fnw += other.fnw;
        self.images_seen += other.images_seen;
    }
}

/// Reduces the weighted error field against the annotation, summing in
/// row-major order.
pub fn reduce_fields(gt_fg: &BinaryMask, fields: &WfbFields) -> WfbClassTally {
    let mut t = WfbClassTally {
        images_seen: 1,
        ..Default::default()
    };
    for (&fg, &ew) in gt_fg.bits().iter().zip(&fields.ew) {
        if fg {
            t.tpw += 1.0 - ew;
            t.fnw += ew;
        } else {
            t.fpw += ew;
        }
    }
    t
}

/// Weighted tallies of class `class` on one pair.
///
/// Returns [`Error::ClassAbsentInAnnotation`] when the annotation has no
/// pixel of the class; callers skip the pair for that class.
pub fn wfb_tally_pair(gt: &LabelMask, pred: &LabelMask, class: u8, params: &WfbParams) -> Result<WfbClassTally> {
    if gt.dims() != pred.dims() {
        return Err(Error::ShapeMismatch {
            expected: gt.dims(),
            found: pred.dims(),
        });
    }
    if !gt.contains_label(class) {
        return Err(Error::ClassAbsentInAnnotation(class));
    }
    let gt_fg = BinaryMask::from_class(gt, class);
    let pred_fg = BinaryMask::from_class(pred, class);
    let fields = weighted_error(&gt_fg, &pred_fg, params)?;
    Ok(reduce_fields(&gt_fg, &fields))
}

/// Per-class weighted tallies over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfbTally {
    taxonomy: String,
    classes: Vec<WfbClassTally>,
}

impl WfbTally {
    pub fn zero(taxonomy: &ClassTaxonomy) -> Self {
        WfbTally {
            taxonomy: taxonomy.name().to_string(),
            classes: vec![WfbClassTally::default(); taxonomy.num_classes()],
        }
    }

    pub fn class(&self, class: u8) -> Result<&WfbClassTally> {
        self.classes.get(class as usize).ok_or(Error::UnknownClass(class))
    }

    pub fn add_class(&mut self, class: u8, tally: &WfbClassTally) -> Result<()> {
        self.classes
            .get_mut(class as usize)
            .ok_or(Error::UnknownClass(class))?
            .absorb(tally);
        Ok(())
    }

    /// Adds `other` class by class. Real sums are order dependent in the last
    /// bits, so callers merge in a fixed order.
    pub fn absorb(&mut self, other: &WfbTally) -> Result<()> {
        if self.taxonomy != other.taxonomy || self.classes.len() != other.classes.len() {
            return Err(Error::TaxonomyMismatch(self.taxonomy.clone(), other.taxonomy.clone()));
        }
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.absorb(b);
        }
        Ok(())
    }
}

/// Weighted tallies of every foreground class of `taxonomy` on one pair.
/// Classes absent from the annotation contribute nothing.
pub fn wfb_tally_image(
    gt: &LabelMask,
    pred: &LabelMask,
    taxonomy: &ClassTaxonomy,
    params: &WfbParams,
) -> Result<WfbTally> {
    gt.ensure_bound_to(taxonomy)?;
    pred.ensure_bound_to(taxonomy)?;
    let mut tally = WfbTally::zero(taxonomy);
    for class in taxonomy.foreground_ids() {
        match wfb_tally_pair(gt, pred, class, params) {
            Ok(t) => tally.add_class(class, &t)?,
            Err(Error::ClassAbsentInAnnotation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(tally)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WfbScore {
    pub pw: Ratio,
    pub rw: Ratio,
    pub f: Ratio,
}

/// Weighted precision, recall and F-beta of a class tally.
///
/// With no weighted true positives and some error mass the score is `0`
/// even though precision may be undefined (nothing predicted).
pub fn wfb_score(tally: &WfbClassTally, beta: f64) -> WfbScore {
    let WfbClassTally { tpw, fpw, fnw, .. } = *tally;
    let frac = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    let pw = frac(tpw, tpw + fpw);
    let rw = frac(tpw, tpw + fnw);
    let b2 = beta * beta;
    let f = if tpw == 0.0 {
        (fpw > 0.0 || fnw > 0.0).then_some(0.0)
    } else {
        match (pw, rw) {
            (Some(p), Some(r)) if b2 * p + r > 0.0 => Some((1.0 + b2) * p * r / (b2 * p + r)),
            _ => None,
        }
    };
    WfbScore { pw, rw, f }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_center_7x7() -> (BinaryMask, BinaryMask) {
        let mut bits = vec![false; 49];
        bits[24] = true;
        (
            BinaryMask::new(7, 7, bits).unwrap(),
            BinaryMask::new(7, 7, vec![false; 49]).unwrap(),
        )
    }

    #[test]
    fn collinear_distances() {
        let fg = BinaryMask::new(3, 1, vec![true, false, false]).unwrap();
        let d = distance_transform(&fg).unwrap();
        assert_eq!(d.delta, vec![0.0, 1.0, 2.0]);
        assert_eq!(d.nearest_index, vec![0, 0, 0]);
    }

    #[test]
    fn all_foreground_has_zero_distance() {
        let fg = BinaryMask::new(4, 3, vec![true; 12]).unwrap();
        let d = distance_transform(&fg).unwrap();
        assert!(d.delta.iter().all(|&v| v == 0.0));
        assert_eq!(d.nearest_index, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn ties_go_to_smallest_row_major_index() {
        // Corners of a 3x3: the center is equidistant from all four.
        let mut bits = vec![false; 9];
        for i in [0, 2, 6, 8] {
            bits[i] = true;
        }
        let d = distance_transform(&BinaryMask::new(3, 3, bits).unwrap()).unwrap();
        assert_eq!(d.nearest_index[4], 0);
        assert_eq!(d.nearest_index[5], 2);
        assert_eq!(d.nearest_index[7], 6);
        assert_eq!(d.delta[4], 2f64.sqrt());
    }

    #[test]
    fn empty_foreground_is_an_error() {
        let fg = BinaryMask::new(2, 2, vec![false; 4]).unwrap();
        assert!(matches!(distance_transform(&fg), Err(Error::EmptyForeground)));
        assert!(matches!(
            weighted_error(&fg, &fg, &WfbParams::default()),
            Err(Error::EmptyForeground)
        ));
    }

    #[test]
    fn perfect_prediction_has_zero_error() {
        let (gt, _) = single_center_7x7();
        let f = weighted_error(&gt, &gt, &WfbParams::default()).unwrap();
        assert!(f.ew.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_total_miss_step_through() {
        let (gt, pred) = single_center_7x7();
        for fields in [
            weighted_error(&gt, &pred, &WfbParams::default()).unwrap(),
            dense_oracle_weighted_error(&gt, &pred, &WfbParams::default()).unwrap(),
        ] {
            assert_eq!(fields.e.iter().filter(|&&b| b).count(), 1);
            assert!(fields.et.iter().all(|&b| b));
            assert_eq!(fields.ea[24], 1.0);
            assert_eq!(fields.min_e_ea[24], 1.0);
            assert_eq!(fields.ew[24], 1.0);
            for (i, &v) in fields.ew.iter().enumerate() {
                if i != 24 {
                    assert_eq!(v, 0.0);
                }
            }
            let t = reduce_fields(&gt, &fields);
            assert_eq!((t.tpw, t.fnw, t.fpw), (0.0, 1.0, 0.0));
            let s = wfb_score(&t, 1.0);
            assert_eq!(s.f, Some(0.0));
            assert_eq!(s.rw, Some(0.0));
            assert_eq!(s.pw, None);
        }
    }

    #[test]
    fn half_decay_at_distance_five() {
        let mut bits = vec![false; 6];
        bits[0] = true;
        let gt = BinaryMask::new(6, 1, bits).unwrap();
        let pred = BinaryMask::new(6, 1, vec![true; 6]).unwrap();
        let f = weighted_error(&gt, &pred, &WfbParams::default()).unwrap();
        assert!((f.d_field[5] - 1.5).abs() < 1e-15);
        assert_eq!(f.d_field[0], 1.0);
        assert!((f.ew[5] - 1.5).abs() < 1e-15);
        for i in 1..5 {
            assert!(f.d_field[i] < f.d_field[i + 1]);
        }
    }

    #[test]
    fn score_formula() {
        let perfect = WfbClassTally {
            tpw: 1.0,
            ..Default::default()
        };
        let s = wfb_score(&perfect, 1.0);
        assert_eq!((s.pw, s.rw, s.f), (Some(1.0), Some(1.0), Some(1.0)));

        let miss = WfbClassTally {
            tpw: 0.0,
            fpw: 2.0,
            fnw: 3.0,
            images_seen: 1,
        };
        assert_eq!(wfb_score(&miss, 1.0).f, Some(0.0));

        let t = WfbClassTally {
            tpw: 3.0,
            fpw: 1.0,
            fnw: 1.0,
            images_seen: 1,
        };
        let s = wfb_score(&t, 1.0);
        assert_eq!((s.pw, s.rw, s.f), (Some(0.75), Some(0.75), Some(0.75)));

        // beta weights recall: with beta=2, f leans towards rw
        let t = WfbClassTally {
            tpw: 1.0,
            fpw: 0.0,
            fnw: 1.0,
            images_seen: 1,
        };
        let s = wfb_score(&t, 2.0);
        let expected = 5.0 * 1.0 * 0.5 / (4.0 * 1.0 + 0.5);
        assert!((s.f.unwrap() - expected).abs() < 1e-15);

        let empty = WfbClassTally::default();
        assert_eq!(wfb_score(&empty, 1.0).f, None);
    }

    #[test]
    fn tally_pair_on_labels() {
        let t = ClassTaxonomy::umd();
        let mut labels = vec![0u8; 49];
        labels[24] = 2;
        let gt = LabelMask::new(7, 7, labels, &t).unwrap();
        let pred = LabelMask::filled(7, 7, 0, &t).unwrap();
        let p = WfbParams::default();

        let same = wfb_tally_pair(&gt, &gt, 2, &p).unwrap();
        assert_eq!((same.tpw, same.fpw, same.fnw), (1.0, 0.0, 0.0));
        let miss = wfb_tally_pair(&gt, &pred, 2, &p).unwrap();
        assert_eq!((miss.tpw, miss.fpw, miss.fnw), (0.0, 0.0, 1.0));
        assert!(matches!(
            wfb_tally_pair(&gt, &pred, 3, &p),
            Err(Error::ClassAbsentInAnnotation(3))
        ));

        let img = wfb_tally_image(&gt, &pred, &t, &p).unwrap();
        assert_eq!(img.class(2).unwrap().images_seen, 1);
        assert_eq!(img.class(3).unwrap().images_seen, 0);
    }

    #[test]
    fn params_validation() {
        assert!(WfbParams::default().validate().is_ok());
        for bad in [
            WfbParams {
                sigma: 0.0,
                ..Default::default()
            },
            WfbParams {
                kernel_radius: 0,
                ..Default::default()
            },
            WfbParams {
                alpha: 0.1,
                ..Default::default()
            },
            WfbParams {
                beta: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidParams(_))));
        }
    }
}
