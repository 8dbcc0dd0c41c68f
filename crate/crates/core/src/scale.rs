//! Zoom-out / zoom-in perturbations at a fixed canvas size, object occupancy,
//! and five-number summaries of occupancy distributions.
//!
//! A factor below one shrinks the content and centers it on a canvas filled
//! with background (black for images); a factor above one enlarges it and
//! keeps the centered window. Masks are resampled nearest-neighbour so no new
//! labels appear; images are resampled bilinearly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maskio::{self, ClassTaxonomy, LabelMask, Manifest, RgbImage, SampleRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMode {
    PadOut,
    Identity,
    CropIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub factor: f64,
    pub canvas_width: usize,
    pub canvas_height: usize,
}

/// Where the resized content sits relative to the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleGeometry {
    pub resized_width: usize,
    pub resized_height: usize,
    /// Canvas origin in resized coordinates. Negative when the content is
    /// padded (the canvas starts left of/above the content).
    pub origin_x: isize,
    pub origin_y: isize,
}

impl ScaleSpec {
    pub fn new(factor: f64, canvas_width: usize, canvas_height: usize) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::NonPositiveFactor(factor));
        }
        Ok(ScaleSpec {
            factor,
            canvas_width,
            canvas_height,
        })
    }

    pub fn mode(&self) -> ScaleMode {
        match self.factor.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => ScaleMode::PadOut,
            Some(std::cmp::Ordering::Greater) => ScaleMode::CropIn,
            _ => ScaleMode::Identity,
        }
    }

    pub fn geometry(&self) -> Result<ScaleGeometry> {
        if !(self.factor > 0.0 && self.factor.is_finite()) {
            return Err(Error::NonPositiveFactor(self.factor));
        }
        let (w, h) = (self.canvas_width, self.canvas_height);
        let (rw, rh) = resized_dims(w, h, self.factor)?;
        Ok(ScaleGeometry {
            resized_width: rw,
            resized_height: rh,
            origin_x: (rw as isize - w as isize).div_euclid(2),
            origin_y: (rh as isize - h as isize).div_euclid(2),
        })
    }
}

/// `round(w·f) × round(h·f)`, rounding halves away from zero.
pub fn resized_dims(width: usize, height: usize, factor: f64) -> Result<(usize, usize)> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::NonPositiveFactor(factor));
    }
    let rw = (width as f64 * factor).round() as usize;
    let rh = (height as f64 * factor).round() as usize;
    if rw == 0 || rh == 0 {
        return Err(Error::ResizeToZero { factor, width, height });
    }
    Ok((rw, rh))
}

/// Source index of destination sample `i` when stretching `src` samples over
/// `dst`, by pixel-center alignment.
fn nearest_source(i: usize, src: usize, dst: usize) -> usize {
    (((2 * i + 1) * src) / (2 * dst)).min(src - 1)
}

/// Bilinear sample position `(lower index, upper index, weight of upper)`.
fn linear_source(i: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, s - lo as f64)
}

/// Resizes `mask` to `resized` (nearest neighbour) and reads the
/// `out_w × out_h` window starting at `origin`; outside samples get `fill`.
pub(crate) fn resample_mask(
    mask: &LabelMask,
    resized: (usize, usize),
    origin: (isize, isize),
    out: (usize, usize),
    fill: u8,
) -> LabelMask {
    let (w, h) = mask.dims();
    let (rw, rh) = resized;
    let src = mask.labels();
    let cols: Vec<Option<usize>> = (0..out.0)
        .map(|x| {
            let rx = x as isize + origin.0;
            (rx >= 0 && (rx as usize) < rw).then(|| nearest_source(rx as usize, w, rw))
        })
        .collect();
    let mut labels = Vec::with_capacity(out.0 * out.1);
    for y in 0..out.1 {
        let ry = y as isize + origin.1;
        if ry < 0 || ry as usize >= rh {
            labels.extend(std::iter::repeat_n(fill, out.0));
            continue;
        }
        let row = &src[nearest_source(ry as usize, h, rh) * w..][..w];
        labels.extend(cols.iter().map(|c| c.map_or(fill, |sx| row[sx])));
    }
    LabelMask::from_parts(out.0, out.1, mask.num_classes(), labels)
}

/// Image counterpart of [`resample_mask`] with bilinear interpolation.
pub(crate) fn resample_image(
    image: &RgbImage,
    resized: (usize, usize),
    origin: (isize, isize),
    out: (usize, usize),
    fill: [u8; 3],
) -> RgbImage {
    let (w, h) = image.dims();
    let (rw, rh) = resized;
    let src = image.pixels();
    let cols: Vec<Option<(usize, usize, f64)>> = (0..out.0)
        .map(|x| {
            let rx = x as isize + origin.0;
            (rx >= 0 && (rx as usize) < rw).then(|| linear_source(rx as usize, w, rw))
        })
        .collect();
    let mut pixels = Vec::with_capacity(out.0 * out.1);
    for y in 0..out.1 {
        let ry = y as isize + origin.1;
        if ry < 0 || ry as usize >= rh {
            pixels.extend(std::iter::repeat_n(fill, out.0));
            continue;
        }
        let (y0, y1, ty) = linear_source(ry as usize, h, rh);
        for c in &cols {
            let Some((x0, x1, tx)) = *c else {
                pixels.push(fill);
                continue;
            };
            let (a, b) = (src[y0 * w + x0], src[y0 * w + x1]);
            let (cc, d) = (src[y1 * w + x0], src[y1 * w + x1]);
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let top = a[ch] as f64 + (b[ch] as f64 - a[ch] as f64) * tx;
                let bottom = cc[ch] as f64 + (d[ch] as f64 - cc[ch] as f64) * tx;
                px[ch] = (top + (bottom - top) * ty).round().clamp(0.0, 255.0) as u8;
            }
            pixels.push(px);
        }
    }
    RgbImage::from_parts(out.0, out.1, pixels)
}

fn check_canvas(dims: (usize, usize), spec: &ScaleSpec) -> Result<()> {
    let canvas = (spec.canvas_width, spec.canvas_height);
    if dims != canvas {
        return Err(Error::ShapeMismatch {
            expected: canvas,
            found: dims,
        });
    }
    Ok(())
}

/// Zoom perturbation of a label mask; padding uses `background_id`.
pub fn scale_mask(mask: &LabelMask, spec: &ScaleSpec, background_id: u8) -> Result<LabelMask> {
    check_canvas(mask.dims(), spec)?;
    if spec.mode() == ScaleMode::Identity {
        return Ok(mask.clone());
    }
    let g = spec.geometry()?;
    Ok(resample_mask(
        mask,
        (g.resized_width, g.resized_height),
        (g.origin_x, g.origin_y),
        mask.dims(),
        background_id,
    ))
}

/// Zoom perturbation of an image; padding is black.
pub fn scale_image(image: &RgbImage, spec: &ScaleSpec) -> Result<RgbImage> {
    check_canvas(image.dims(), spec)?;
    if spec.mode() == ScaleMode::Identity {
        return Ok(image.clone());
    }
    let g = spec.geometry()?;
    Ok(resample_image(
        image,
        (g.resized_width, g.resized_height),
        (g.origin_x, g.origin_y),
        image.dims(),
        [0, 0, 0],
    ))
}

/// Fraction of pixels whose label is one of the taxonomy's object classes.
pub fn occupancy(mask: &LabelMask, taxonomy: &ClassTaxonomy) -> Result<f64> {
    mask.ensure_bound_to(taxonomy)?;
    if taxonomy.object_class_ids().is_empty() {
        return Err(Error::EmptyObjectClassSet(taxonomy.name().to_string()));
    }
    let mut is_object = [false; 256];
    for &id in taxonomy.object_class_ids() {
        is_object[id as usize] = true;
    }
    let hits = mask.labels().iter().filter(|&&l| is_object[l as usize]).count();
    Ok(hits as f64 / mask.labels().len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiskerStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

/// Quantile of sorted data by linear interpolation between the order
/// statistics around position `p·(n−1)`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn occupancy_stats(values: &[f64]) -> Result<WhiskerStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(WhiskerStats {
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

/// Short decimal form of a factor for file names and ids: `0.5`, `0.6667`, `2`.
pub fn factor_label(factor: f64) -> String {
    let s = format!("{factor:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

struct PlannedSample<'a> {
    record: &'a SampleRecord,
    id: String,
    annotation: PathBuf,
    image: Option<PathBuf>,
    predictions: BTreeMap<String, PathBuf>,
}

fn scaled_name(id: &str, label: &str, source: &Path) -> String {
    let ext = source
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "png".into());
    format!("{id}_x{label}.{ext}")
}

/// Applies the zoom perturbation `factor` to every annotation, image and
/// stored prediction of `manifest`, writing them under `out_dir`:
///
/// ```text
/// out_dir/annotations/<id>_x<factor>.png
/// out_dir/images/<id>_x<factor>.png
/// out_dir/predictions/<model>/<id>_x<factor>.png
/// ```
///
/// The returned manifest is rooted at `out_dir`. On failure every file this
/// call planned to write is removed again.
pub fn perturb_dataset(manifest: &Manifest, factor: f64, taxonomy: &ClassTaxonomy, out_dir: &Path) -> Result<Manifest> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::NonPositiveFactor(factor));
    }
    let label = factor_label(factor);
    let planned: Vec<PlannedSample> = manifest
        .samples
        .iter()
        .map(|r| {
            let name = scaled_name(&r.id, &label, &r.annotation);
            PlannedSample {
                record: r,
                id: format!("{}_x{label}", r.id),
                annotation: PathBuf::from("annotations").join(&name),
                image: r
                    .image
                    .as_ref()
                    .map(|p| PathBuf::from("images").join(scaled_name(&r.id, &label, p))),
                predictions: r
                    .predictions
                    .iter()
                    .map(|(model, p)| {
                        let rel = PathBuf::from("predictions")
                            .join(model)
                            .join(scaled_name(&r.id, &label, p));
                        (model.clone(), rel)
                    })
                    .collect(),
            }
        })
        .collect();

    let mut created_dirs = Vec::new();
    let mut dirs: Vec<PathBuf> = vec![out_dir.to_path_buf(), out_dir.join("annotations")];
    if planned.iter().any(|p| p.image.is_some()) {
        dirs.push(out_dir.join("images"));
    }
    for p in &planned {
        for rel in p.predictions.values() {
            let d = out_dir.join(rel.parent().unwrap());
            if !dirs.contains(&d) {
                dirs.push(d);
            }
        }
    }
    for d in &dirs {
        if !d.exists() {
            if let Err(source) = std::fs::create_dir_all(d) {
                remove_created(&[], &created_dirs);
                return Err(Error::Io {
                    path: d.clone(),
                    source,
                });
            }
            created_dirs.push(d.clone());
        }
    }

    let result: Result<Vec<SampleRecord>> = planned
        .par_iter()
        .map(|p| perturb_one(manifest, p, factor, taxonomy, out_dir).map_err(|e| e.in_sample(&p.record.id)))
        .collect();

    match result {
        Ok(samples) => Manifest::new(format!("{}_x{label}", manifest.dataset_id), out_dir, samples),
        Err(e) => {
            let files: Vec<PathBuf> = planned
                .iter()
                .flat_map(|p| {
                    std::iter::once(&p.annotation)
                        .chain(p.image.as_ref())
                        .chain(p.predictions.values())
                        .map(|rel| out_dir.join(rel))
                        .collect::<Vec<_>>()
                })
                .collect();
            remove_created(&files, &created_dirs);
            Err(e)
        }
    }
}

fn remove_created(files: &[PathBuf], dirs: &[PathBuf]) {
    for f in files {
        let _ = std::fs::remove_file(f);
    }
    for d in dirs.iter().rev() {
        let _ = std::fs::remove_dir(d);
    }
}

fn perturb_one(
    manifest: &Manifest,
    plan: &PlannedSample,
    factor: f64,
    taxonomy: &ClassTaxonomy,
    out_dir: &Path,
) -> Result<SampleRecord> {
    let r = plan.record;
    let gt = maskio::load_label_mask(manifest.resolve(&r.annotation), taxonomy)?;
    let spec = ScaleSpec::new(factor, gt.width(), gt.height())?;
    let bg = taxonomy.background_id();
    maskio::save_label_mask(&scale_mask(&gt, &spec, bg)?, out_dir.join(&plan.annotation))?;

    if let (Some(src), Some(dst)) = (&r.image, &plan.image) {
        let img = maskio::load_image(manifest.resolve(src))?;
        let spec = ScaleSpec::new(factor, img.width(), img.height())?;
        maskio::save_image(&scale_image(&img, &spec)?, out_dir.join(dst))?;
    }
    for (model, src) in &r.predictions {
        let pred = maskio::load_label_mask(manifest.resolve(src), taxonomy)?;
        let spec = ScaleSpec::new(factor, pred.width(), pred.height())?;
        maskio::save_label_mask(&scale_mask(&pred, &spec, bg)?, out_dir.join(&plan.predictions[model]))?;
    }

    Ok(SampleRecord {
        id: plan.id.clone(),
        image: plan.image.clone(),
        annotation: plan.annotation.clone(),
        predictions: plan.predictions.clone(),
        split: r.split.clone(),
    })
}

/// Occupancy of every annotation of `manifest` after the zoom perturbation
/// `factor`, in manifest order.
pub fn dataset_occupancy(manifest: &Manifest, taxonomy: &ClassTaxonomy, factor: f64) -> Result<Vec<(String, f64)>> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::NonPositiveFactor(factor));
    }
    manifest
        .samples
        .par_iter()
        .map(|r| {
            (|| {
                let gt = maskio::load_label_mask(manifest.resolve(&r.annotation), taxonomy)?;
                let spec = ScaleSpec::new(factor, gt.width(), gt.height())?;
                let scaled = scale_mask(&gt, &spec, taxonomy.background_id())?;
                Ok((r.id.clone(), occupancy(&scaled, taxonomy)?))
            })()
            .map_err(|e: Error| e.in_sample(&r.id))
        })
        .collect()
}
