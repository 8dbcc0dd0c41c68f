//! Seeded synthetic masks for benchmarks and end-to-end tests.

use affbench_core::{BinaryMask, ClassTaxonomy, LabelMask};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Union of `count` random filled ellipses drawn with labels from `classes`
/// on a background of `background`. Later ellipses paint over earlier ones.
pub fn ellipse_labels(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    count: usize,
    classes: &[u8],
    background: u8,
) -> Vec<u8> {
    let mut labels = vec![background; width * height];
    let short = width.min(height) as f64;
    for _ in 0..count {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let rx = rng.random_range(0.03 * short..0.25 * short).max(1.0);
        let ry = rng.random_range(0.03 * short..0.25 * short).max(1.0);
        let class = classes[rng.random_range(0..classes.len())];
        let y0 = (cy - ry).floor().max(0.0) as usize;
        let y1 = ((cy + ry).ceil() as usize).min(height);
        let x0 = (cx - rx).floor().max(0.0) as usize;
        let x1 = ((cx + rx).ceil() as usize).min(width);
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    labels[y * width + x] = class;
                }
            }
        }
    }
    labels
}

/// A plausible annotation: a few ellipses of the taxonomy's foreground
/// classes.
pub fn annotation(rng: &mut impl Rng, taxonomy: &ClassTaxonomy, width: usize, height: usize) -> LabelMask {
    let classes = taxonomy.foreground_ids();
    let count = rng.random_range(2..8);
    let labels = ellipse_labels(rng, width, height, count, &classes, taxonomy.background_id());
    LabelMask::new(width, height, labels, taxonomy).expect("labels come from the taxonomy")
}

/// A prediction that agrees with `gt` except for a shifted copy and
/// scattered label noise at rate `noise`.
pub fn prediction(rng: &mut impl Rng, gt: &LabelMask, taxonomy: &ClassTaxonomy, noise: f64) -> LabelMask {
    let (w, h) = gt.dims();
    let dx = rng.random_range(-3i64..=3);
    let dy = rng.random_range(-3i64..=3);
    let n = taxonomy.num_classes() as u8;
    let labels = (0..w * h)
        .map(|i| {
            if rng.random_bool(noise) {
                return rng.random_range(0..n);
            }
            let x = (i % w) as i64 - dx;
            let y = (i / w) as i64 - dy;
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                taxonomy.background_id()
            } else {
                gt.labels()[y as usize * w + x as usize]
            }
        })
        .collect();
    LabelMask::new(w, h, labels, taxonomy).expect("labels come from the taxonomy")
}

/// Independent Bernoulli pixels at the given density.
pub fn random_binary(rng: &mut impl Rng, width: usize, height: usize, density: f64) -> BinaryMask {
    let bits = (0..width * height).map(|_| rng.random_bool(density)).collect();
    BinaryMask::new(width, height, bits).expect("size matches")
}

/// Uniform random labels in `0..num_classes`.
pub fn random_labels(rng: &mut impl Rng, taxonomy: &ClassTaxonomy, width: usize, height: usize) -> LabelMask {
    let n = taxonomy.num_classes() as u8;
    let labels = (0..width * height).map(|_| rng.random_range(0..n)).collect();
    LabelMask::new(width, height, labels, taxonomy).expect("labels come from the taxonomy")
}
