//! Exact Euclidean distance transform with nearest-site indices.
//!
//! Two separable passes: a column scan finds, for every pixel, the nearest
//! foreground row in its own column; a row pass then takes the lower envelope
//! of one parabola per column. All arithmetic is integer.
//!
//! To make the nearest site unique, the row pass minimises
//! `K·d² + rank(site)` with `K = width·height` and `rank` the row-major index
//! of the site. Since `rank < K`, the minimiser has the smallest squared
//! distance, and among equidistant sites the smallest row-major index. The
//! extra term is constant per column, so each column still contributes a
//! parabola of curvature `K` and the envelope construction is unchanged.

use super::{BinaryMask, DistanceField};
use crate::error::{Error, Result};

/// A rational `num / den` with `den > 0`; `den == 0` encodes ±infinity.
#[derive(Clone, Copy)]
struct Frac {
    num: i128,
    den: i128,
}

impl Frac {
    const NEG_INF: Frac = Frac { num: -1, den: 0 };
    const POS_INF: Frac = Frac { num: 1, den: 0 };

    fn le(self, other: Frac) -> bool {
        match (self.den, other.den) {
            (0, 0) => self.num <= other.num,
            (0, _) => self.num < 0,
            (_, 0) => other.num > 0,
            _ => self.num * other.den <= other.num * self.den,
        }
    }

    fn lt_int(self, x: i128) -> bool {
        match self.den {
            0 => self.num < 0,
            _ => self.num < x * self.den,
        }
    }
}

pub fn distance_transform(fg: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = fg.dims();
    if !fg.any() {
        return Err(Error::EmptyForeground);
    }
    let bits = fg.bits();

    // Column pass: nearest foreground row per pixel, upper row on ties.
    const NONE: usize = usize::MAX;
    let mut col_site = vec![NONE; w * h];
    let mut below = vec![NONE; h];
    for x in 0..w {
        let mut next = NONE;
        for y in (0..h).rev() {
            if bits[y * w + x] {
                next = y;
            }
            below[y] = next;
        }
        let mut last = NONE;
        for y in 0..h {
            if bits[y * w + x] {
                last = y;
            }
            col_site[y * w + x] = match (last, below[y]) {
                (NONE, b) => b,
                (a, NONE) => a,
                (a, b) => {
                    if y - a <= b - y {
                        a
                    } else {
                        b
                    }
                }
            };
        }
    }

    let k = (w * h) as i128;
    let mut delta = vec![0.0; w * h];
    let mut nearest = vec![0usize; w * h];

    // Row pass scratch: envelope vertices, their heights, and boundaries.
    let mut verts: Vec<usize> = Vec::with_capacity(w);
    let mut heights: Vec<i128> = Vec::with_capacity(w);
    let mut bounds: Vec<Frac> = Vec::with_capacity(w + 1);

    for y in 0..h {
        verts.clear();
        heights.clear();
        bounds.clear();
        bounds.push(Frac::NEG_INF);
        let row = &col_site[y * w..(y + 1) * w];

        for (q, &site_row) in row.iter().enumerate() {
            if site_row == NONE {
                continue;
            }
            let dy = y.abs_diff(site_row) as i128;
            let rank = (site_row * w + q) as i128;
            let fq = k * dy * dy + rank;
            let qi = q as i128;
            while let Some(&p) = verts.last() {
                let pi = p as i128;
                let fp = *heights.last().unwrap();
                let s = Frac {
                    num: (fq + k * qi * qi) - (fp + k * pi * pi),
                    den: 2 * k * (qi - pi),
                };
                // bounds[i] is the left end of verts[i]'s interval; the first
                // is -inf, so the loop never empties the envelope.
                if s.le(*bounds.last().unwrap()) {
                    verts.pop();
                    heights.pop();
                    bounds.pop();
                } else {
                    bounds.push(s);
                    break;
                }
            }
            verts.push(q);
            heights.push(fq);
        }
        bounds.push(Frac::POS_INF);

        let mut j = 0;
        for x in 0..w {
            while bounds[j + 1].lt_int(x as i128) {
                j += 1;
            }
            let sx = verts[j];
            let sy = row[sx];
            let dx = x.abs_diff(sx) as u64;
            let dy = y.abs_diff(sy) as u64;
            delta[y * w + x] = ((dx * dx + dy * dy) as f64).sqrt();
            nearest[y * w + x] = sy * w + sx;
        }
    }

    Ok(DistanceField {
        width: w,
        height: h,
        delta,
        nearest_index: nearest,
    })
}
