//! Seeded training-time augmentation: horizontal flip, zoom-in by scaling
//! and center cropping, color jitter, and additive Gaussian noise.
//!
//! [`augment_sample`] is a pure function of its inputs, the seed and a
//! per-sample key. Each transform draws from its own keyed stream, so the
//! result does not depend on thread count or on the order in which samples
//! are visited.

mod color;
mod rng;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use color::color_jitter;

use crate::error::{Error, Result};
use crate::maskio::{
    load_image, load_label_mask, save_image, save_label_mask, ClassTaxonomy, LabelMask, Manifest, RgbImage,
    SampleRecord,
};
use crate::scale::{resample_image, resample_mask, resized_dims};

const UMD_OURS_JSON: &str = include_str!("../../fixtures/augment/umd_ours.json");
const CHOC_AFF_JSON: &str = include_str!("../../fixtures/augment/choc_aff.json");

const FLIP_STREAM: u32 = 0;
const SCALE_STREAM: u32 = 1;
const JITTER_STREAM: u32 = 2;
const NOISE_STREAM: u32 = 3;

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub const ONE: Interval = Interval(1.0, 1.0);
    pub const ZERO: Interval = Interval(0.0, 0.0);

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite() && self.0 <= self.1) {
            return Err(Error::InvalidConfig(format!(
                "{name} interval [{}, {}]",
                self.0, self.1
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.random_range(self.0..=self.1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSize {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_probability: f64,
    pub scale_interval: Interval,
    pub brightness: Interval,
    pub contrast: Interval,
    pub saturation: Interval,
    /// Hue shift in turns of the hue circle.
    pub hue: Interval,
    #[serde(default)]
    pub gaussian_noise_variance: Option<Interval>,
    /// Center-crop size after scaling; `None` keeps the input size.
    #[serde(default)]
    pub crop: Option<CropSize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::umd_ours()
    }
}

impl AugmentConfig {
    /// Tabletop recipe: flip 0.5, zoom-in [1, 1.5] back to 640×480, jitter
    /// [0.9, 1.1], hue [-0.1, 0.1].
    pub fn umd_ours() -> Self {
        serde_json::from_str(UMD_OURS_JSON).expect("shipped preset is valid")
    }

    /// Hand-occluded recipe: flip 0.5, zoom-in [1, 1.5] with a 480×480
    /// window, Gaussian noise variance [10, 100].
    pub fn choc_aff() -> Self {
        serde_json::from_str(CHOC_AFF_JSON).expect("shipped preset is valid")
    }

    /// Neutral config: every transform is the identity.
    pub fn identity() -> Self {
        AugmentConfig {
            flip_probability: 0.0,
            scale_interval: Interval::ONE,
            brightness: Interval::ONE,
            contrast: Interval::ONE,
            saturation: Interval::ONE,
            hue: Interval::ZERO,
            gaussian_noise_variance: None,
            crop: None,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "umd_ours" | "umd" => Some(Self::umd_ours()),
            "choc_aff" | "choc" => Some(Self::choc_aff()),
            "identity" => Some(Self::identity()),
            _ => None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: AugmentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidConfig(format!(
                "flip probability {} outside [0, 1]",
                self.flip_probability
            )));
        }
        self.scale_interval.validate("scale")?;
        if self.scale_interval.0 < 1.0 {
            return Err(Error::InvalidConfig(
                "scale interval must not go below 1 (zoom-in only)".into(),
            ));
        }
        for (name, iv) in [
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("saturation", self.saturation),
        ] {
            iv.validate(name)?;
            if iv.0 < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} factors must be non-negative")));
            }
        }
        self.hue.validate("hue")?;
        if self.hue.0 < -0.5 || self.hue.1 > 0.5 {
            return Err(Error::InvalidConfig("hue interval must lie within [-0.5, 0.5]".into()));
        }
        if let Some(noise) = self.gaussian_noise_variance {
            noise.validate("noise variance")?;
            if noise.0 < 0.0 {
                return Err(Error::InvalidConfig("noise variance must be non-negative".into()));
            }
        }
        if let Some(c) = self.crop {
            if c.width == 0 || c.height == 0 {
                return Err(Error::InvalidConfig("crop size must be positive".into()));
            }
        }
        Ok(())
    }
}

fn check_same_dims(image: &RgbImage, mask: &LabelMask) -> Result<()> {
    if image.dims() != mask.dims() {
        return Err(Error::ShapeMismatch {
            expected: image.dims(),
            found: mask.dims(),
        });
    }
    Ok(())
}

/// Mirrors both image and mask left to right.
pub fn hflip(image: &RgbImage, mask: &LabelMask) -> Result<(RgbImage, LabelMask)> {
    check_same_dims(image, mask)?;
    let (w, h) = image.dims();
    let mut pixels = image.pixels().to_vec();
    let mut labels = mask.labels().to_vec();
    for y in 0..h {
        pixels[y * w..(y + 1) * w].reverse();
        labels[y * w..(y + 1) * w].reverse();
    }
    Ok((
        RgbImage::from_parts(w, h, pixels),
        LabelMask::from_parts(w, h, mask.num_classes(), labels),
    ))
}

/// Enlarges by `factor` (bilinear for the image, nearest for the mask) and
/// keeps the centered `crop_w × crop_h` window.
pub fn scale_center_crop(
    image: &RgbImage,
    mask: &LabelMask,
    factor: f64,
    crop_w: usize,
    crop_h: usize,
) -> Result<(RgbImage, LabelMask)> {
    check_same_dims(image, mask)?;
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::InvalidConfig(format!("zoom-in factor {factor} is below 1")));
    }
    let (w, h) = image.dims();
    let (rw, rh) = resized_dims(w, h, factor)?;
    if crop_w == 0 || crop_h == 0 || crop_w > rw || crop_h > rh {
        return Err(Error::CropLargerThanScaled {
            crop: (crop_w, crop_h),
            scaled: (rw, rh),
        });
    }
    if (rw, rh) == (w, h) && (crop_w, crop_h) == (w, h) {
        return Ok((image.clone(), mask.clone()));
    }
    let origin = (((rw - crop_w) / 2) as isize, ((rh - crop_h) / 2) as isize);
    Ok((
        resample_image(image, (rw, rh), origin, (crop_w, crop_h), [0, 0, 0]),
        resample_mask(mask, (rw, rh), origin, (crop_w, crop_h), 0),
    ))
}

/// The zero-mean Gaussian deltas [`add_gaussian_noise`] adds, in pixel then
/// channel order, before rounding and clamping.
pub fn gaussian_noise_deltas(variance: f64, seed: u64) -> Result<impl Iterator<Item = f64>> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::NegativeVariance(variance));
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite non-negative std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(std::iter::repeat_with(move || normal.sample(&mut rng)))
}

pub fn add_gaussian_noise(image: &RgbImage, variance: f64, seed: u64) -> Result<RgbImage> {
    let mut deltas = gaussian_noise_deltas(variance, seed)?;
    if variance == 0.0 {
        return Ok(image.clone());
    }
    let pixels = image
        .pixels()
        .iter()
        .map(|p| p.map(|c| (c as f64 + deltas.next().unwrap()).round().clamp(0.0, 255.0) as u8))
        .collect();
    Ok(RgbImage::from_parts(image.width(), image.height(), pixels))
}

/// What [`augment_sample`] drew for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugmentDraws {
    pub flipped: bool,
    pub scale: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub noise_variance: Option<f64>,
}

pub fn draw_parameters(config: &AugmentConfig, seed: u64, sample_key: &str) -> AugmentDraws {
    let flipped = config.flip_probability > 0.0
        && rng::stream(seed, sample_key, FLIP_STREAM).random_bool(config.flip_probability);
    let scale = config
        .scale_interval
        .sample(&mut rng::stream(seed, sample_key, SCALE_STREAM));
    let mut jitter = rng::stream(seed, sample_key, JITTER_STREAM);
    let brightness = config.brightness.sample(&mut jitter);
    let contrast = config.contrast.sample(&mut jitter);
    let saturation = config.saturation.sample(&mut jitter);
    let hue = config.hue.sample(&mut jitter);
    let noise_variance = config
        .gaussian_noise_variance
        .map(|iv| iv.sample(&mut rng::stream(seed, sample_key, NOISE_STREAM)));
    AugmentDraws {
        flipped,
        scale,
        brightness,
        contrast,
        saturation,
        hue,
        noise_variance,
    }
}

/// Applies flip → scale-and-crop → color jitter → noise. The mask only sees
/// the geometric steps.
pub fn augment_sample(
    image: &RgbImage,
    mask: &LabelMask,
    config: &AugmentConfig,
    seed: u64,
    sample_key: &str,
) -> Result<(RgbImage, LabelMask)> {
    config.validate()?;
    check_same_dims(image, mask)?;
    let draws = draw_parameters(config, seed, sample_key);

    let (mut img, mut lbl) = if draws.flipped {
        hflip(image, mask)?
    } else {
        (image.clone(), mask.clone())
    };
    let crop = config.crop.unwrap_or(CropSize {
        width: image.width(),
        height: image.height(),
    });
    (img, lbl) = scale_center_crop(&img, &lbl, draws.scale, crop.width, crop.height)?;
    img = color_jitter(&img, draws.brightness, draws.contrast, draws.saturation, draws.hue)?;
    if let Some(variance) = draws.noise_variance {
        let noise_seed = rng::stream(seed, sample_key, NOISE_STREAM + 1).next_u64();
        img = add_gaussian_noise(&img, variance, noise_seed)?;
    }
    Ok((img, lbl))
}

/// Writes `copies` augmented versions of every sample under `out_dir`:
///
/// ```text
/// out_dir/images/<id>_aug<k>.png
/// out_dir/annotations/<id>_aug<k>.png
/// ```
///
/// Copy `k` of sample `id` uses the key `"<id>/<k>"`. Predictions are not
/// carried over.
pub fn augment_dataset(
    manifest: &Manifest,
    taxonomy: &ClassTaxonomy,
    config: &AugmentConfig,
    seed: u64,
    copies: usize,
    out_dir: &Path,
) -> Result<Manifest> {
    config.validate()?;
    if copies == 0 {
        return Err(Error::InvalidConfig("copies must be at least 1".into()));
    }
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    for r in &manifest.samples {
        if r.image.is_none() {
            return Err(Error::InvalidConfig("sample has no image".into()).in_sample(&r.id));
        }
    }
    for d in [out_dir.join("images"), out_dir.join("annotations")] {
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let nested: Vec<Vec<SampleRecord>> = manifest
        .samples
        .par_iter()
        .map(|r| {
            (|| {
                let image = load_image(manifest.resolve(r.image.as_ref().expect("checked above")))?;
                let mask = load_label_mask(manifest.resolve(&r.annotation), taxonomy)?;
                (0..copies)
                    .map(|k| {
                        let (img, lbl) = augment_sample(&image, &mask, config, seed, &format!("{}/{k}", r.id))?;
                        let id = format!("{}_aug{k}", r.id);
                        let image_rel = PathBuf::from("images").join(format!("{id}.png"));
                        let ann_rel = PathBuf::from("annotations").join(format!("{id}.png"));
                        save_image(&img, out_dir.join(&image_rel))?;
                        save_label_mask(&lbl, out_dir.join(&ann_rel))?;
                        Ok(SampleRecord {
                            id,
                            image: Some(image_rel),
                            annotation: ann_rel,
                            predictions: Default::default(),
                            split: r.split.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })()
            .map_err(|e: Error| e.in_sample(&r.id))
        })
        .collect::<Result<_>>()?;
    Manifest::new(
        format!("{}_aug", manifest.dataset_id),
        out_dir,
        nested.into_iter().flatten().collect(),
    )
}
