//! Label masks, RGB images, class taxonomies and dataset manifests, and
//! their on-disk forms.
//!
//! Masks are single-channel 8-bit PNG files whose pixel values are class ids.
//! Paletted files are accepted; the palette itself carries no meaning and the
//! raw indices are read as ids.

mod manifest;
mod taxonomy;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

pub use manifest::{Manifest, SampleRecord};
pub use taxonomy::{ClassEntry, ClassTaxonomy};

use crate::error::{Error, Result};

/// Row-major field of class ids, bound to a taxonomy of `num_classes` ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>, taxonomy: &ClassTaxonomy) -> Result<Self> {
        Self::with_class_count(width, height, labels, taxonomy.num_classes())
    }

    pub fn with_class_count(width: usize, height: usize, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("zero-sized mask {width}x{height}")));
        }
        if labels.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        if let Some(index) = labels.iter().position(|&l| l as usize >= num_classes) {
            return Err(Error::LabelOutOfRange {
                value: labels[index],
                index,
                classes: num_classes,
            });
        }
        Ok(LabelMask {
            width,
            height,
            num_classes,
            labels,
        })
    }

    /// A mask filled with a single label.
    pub fn filled(width: usize, height: usize, label: u8, taxonomy: &ClassTaxonomy) -> Result<Self> {
        Self::new(width, height, vec![label; width * height], taxonomy)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn contains_label(&self, label: u8) -> bool {
        self.labels.contains(&label)
    }

    /// Builds a mask whose labels are already known to be in range.
    pub(crate) fn from_parts(width: usize, height: usize, num_classes: usize, labels: Vec<u8>) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        debug_assert!(labels.iter().all(|&l| (l as usize) < num_classes));
        LabelMask {
            width,
            height,
            num_classes,
            labels,
        }
    }

    pub(crate) fn ensure_bound_to(&self, taxonomy: &ClassTaxonomy) -> Result<()> {
        if self.num_classes == taxonomy.num_classes() {
            Ok(())
        } else {
            Err(Error::TaxonomyMismatch(
                format!("mask with {} classes", self.num_classes),
                taxonomy.name().to_string(),
            ))
        }
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub(crate) fn from_parts(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        RgbImage { width, height, pixels }
    }
}

fn open_png(path: &Path, transformations: png::Transformations) -> Result<(png::OutputInfo, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::MalformedRaster {
        path: path.to_path_buf(),
        reason,
    };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(|e| malformed(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| malformed("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| malformed(e.to_string()))?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

/// Reads a single-channel 8-bit PNG (grayscale or paletted) as class ids.
pub fn load_label_mask(path: impl AsRef<Path>, taxonomy: &ClassTaxonomy) -> Result<LabelMask> {
    let path = path.as_ref();
    let (info, buf) = open_png(path, png::Transformations::IDENTITY)?;
    let malformed = |reason: String| Error::MalformedRaster {
        path: path.to_path_buf(),
        reason,
    };
    match (info.color_type, info.bit_depth) {
        (png::ColorType::Grayscale | png::ColorType::Indexed, png::BitDepth::Eight) => {}
        (color, depth) => {
            return Err(malformed(format!(
                "expected a single-channel 8-bit raster, found {color:?} at {depth:?}"
            )))
        }
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let labels = if info.line_size == width {
        buf
    } else {
        buf.chunks(info.line_size)
            .flat_map(|row| &row[..width])
            .copied()
            .collect()
    };
    LabelMask::new(width, height, labels, taxonomy).map_err(|e| match e {
        Error::InvalidMask(reason) => malformed(reason),
        other => other,
    })
}

/// Writes `mask` as an 8-bit grayscale PNG of raw class ids.
pub fn save_label_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        mask.width,
        mask.height,
        png::ColorType::Grayscale,
        &mask.labels,
    )
}

/// Reads an 8-bit RGB, RGBA, grayscale or paletted PNG. Grayscale is
/// replicated into all three channels and alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let (info, buf) = open_png(path, png::Transformations::EXPAND)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::MalformedRaster {
            path: path.to_path_buf(),
            reason: format!("expected 8-bit channels, found {:?}", info.bit_depth),
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let mut pixels = Vec::with_capacity(width * height);
    for row in buf.chunks(info.line_size) {
        for px in row[..width * channels].chunks_exact(channels) {
            pixels.push(match channels {
                1 | 2 => [px[0]; 3],
                _ => [px[0], px[1], px[2]],
            });
        }
    }
    RgbImage::new(width, height, pixels)
}

pub fn save_image(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = image.pixels.iter().flatten().copied().collect();
    write_png(path.as_ref(), image.width, image.height, png::ColorType::Rgb, &bytes)
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let enc_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(source) => io_err(source),
        other => io_err(std::io::Error::other(other)),
    };
    let file = File::create(path).map_err(io_err)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(enc_err)?;
    writer.write_image_data(data).map_err(enc_err)?;
    writer.finish().map_err(enc_err)?;
    Ok(())
}

/// Replaces every label through `mapping` and rebinds the mask to `target`.
pub fn remap_classes(mask: &LabelMask, mapping: &BTreeMap<u8, u8>, target: &ClassTaxonomy) -> Result<LabelMask> {
    let mut table = [None; 256];
    for (&from, &to) in mapping {
        table[from as usize] = Some(to);
    }
    let labels = mask
        .labels
        .iter()
        .map(|&l| table[l as usize].ok_or(Error::UnmappedLabel(l)))
        .collect::<Result<Vec<_>>>()?;
    LabelMask::new(mask.width, mask.height, labels, target)
}
