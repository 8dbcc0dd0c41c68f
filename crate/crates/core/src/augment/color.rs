use crate::error::{Error, Result};
use crate::maskio::RgbImage;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn luma(p: [f64; 3]) -> f64 {
    LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2]
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn map_pixels(image: &RgbImage, f: impl Fn([f64; 3]) -> [f64; 3]) -> RgbImage {
    let pixels = image
        .pixels()
        .iter()
        .map(|p| {
            let out = f([p[0] as f64, p[1] as f64, p[2] as f64]);
            [to_u8(out[0]), to_u8(out[1]), to_u8(out[2])]
        })
        .collect();
    RgbImage::from_parts(image.width(), image.height(), pixels)
}

pub(crate) fn adjust_brightness(image: &RgbImage, factor: f64) -> RgbImage {
    map_pixels(image, |p| p.map(|c| c * factor))
}

/// Blend towards the mean luma of the whole image.
pub(crate) fn adjust_contrast(image: &RgbImage, factor: f64) -> RgbImage {
    let n = image.pixels().len() as f64;
    let mean = image
        .pixels()
        .iter()
        .map(|p| luma([p[0] as f64, p[1] as f64, p[2] as f64]))
        .sum::<f64>()
        / n;
    map_pixels(image, |p| p.map(|c| mean + factor * (c - mean)))
}

/// Blend towards each pixel's own luma.
pub(crate) fn adjust_saturation(image: &RgbImage, factor: f64) -> RgbImage {
    map_pixels(image, |p| {
        let l = luma(p);
        p.map(|c| l + factor * (c - l))
    })
}

/// Rotates hue by `shift` turns of the HSV hue circle.
pub(crate) fn adjust_hue(image: &RgbImage, shift: f64) -> RgbImage {
    map_pixels(image, |p| {
        let (h, s, v) = rgb_to_hsv(p.map(|c| c / 255.0));
        hsv_to_rgb((h + shift).rem_euclid(1.0), s, v).map(|c| c * 255.0)
    })
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let s = if max > 0.0 { chroma / max } else { 0.0 };
    if chroma == 0.0 {
        return (0.0, s, max);
    }
    let h = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    (h / 6.0, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let sector = h * 6.0;
    let i = sector.floor();
    let f = sector - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match (i as i64).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Brightness, contrast, saturation, then hue. Factors of 1 and a zero
/// shift leave the image untouched.
pub fn color_jitter(
    image: &RgbImage,
    brightness: f64,
    contrast: f64,
    saturation: f64,
    hue_shift: f64,
) -> Result<RgbImage> {
    for (name, v) in [
        ("brightness", brightness),
        ("contrast", contrast),
        ("saturation", saturation),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidFactor(format!("{name} factor {v}")));
        }
    }
    if !(-0.5..=0.5).contains(&hue_shift) {
        return Err(Error::InvalidFactor(format!(
            "hue shift {hue_shift} outside [-0.5, 0.5]"
        )));
    }
    let mut out = image.clone();
    if brightness != 1.0 {
        out = adjust_brightness(&out, brightness);
    }
    if contrast != 1.0 {
        out = adjust_contrast(&out, contrast);
    }
    if saturation != 1.0 {
        out = adjust_saturation(&out, saturation);
    }
    if hue_shift != 0.0 {
        out = adjust_hue(&out, hue_shift);
    }
    Ok(out)
}
