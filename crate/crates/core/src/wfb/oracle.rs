//! Brute-force evaluation of the weighted error, for verification.
//!
//! Every step is the direct definition: all-pairs nearest foreground search,
//! a 2-D window sum against the unfactored Gaussian, and per-pixel rules.
//! Cost is `O((W·H)²)` for the distance step, so keep inputs small.

use super::{check_pair, BinaryMask, DistanceField, WfbFields, WfbParams};
use crate::error::{Error, Result};

/// Distance to the nearest foreground pixel by exhaustive search; ties keep
/// the first site in row-major order.
pub fn brute_force_distance_transform(fg: &BinaryMask) -> Result<DistanceField> {
    let (w, h) = fg.dims();
    let sites: Vec<usize> = (0..w * h).filter(|&i| fg.bits()[i]).collect();
    if sites.is_empty() {
        return Err(Error::EmptyForeground);
    }
    let mut delta = Vec::with_capacity(w * h);
    let mut nearest_index = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let (px, py) = ((i % w) as i64, (i / w) as i64);
        let mut best = (i64::MAX, 0usize);
        for &s in &sites {
            let (sx, sy) = ((s % w) as i64, (s / w) as i64);
            let d2 = (px - sx).pow(2) + (py - sy).pow(2);
            if d2 < best.0 {
                best = (d2, s);
            }
        }
        delta.push((best.0 as f64).sqrt());
        nearest_index.push(best.1);
    }
    Ok(DistanceField {
        width: w,
        height: h,
        delta,
        nearest_index,
    })
}

pub fn dense_oracle_weighted_error(gt_fg: &BinaryMask, pred_fg: &BinaryMask, params: &WfbParams) -> Result<WfbFields> {
    check_pair(gt_fg, pred_fg, params)?;
    let (w, h) = gt_fg.dims();
    let y = gt_fg.bits();
    let dist = brute_force_distance_transform(gt_fg)?;

    let e: Vec<bool> = (0..w * h).map(|i| y[i] ^ pred_fg.bits()[i]).collect();
    let et: Vec<bool> = (0..w * h)
        .map(|i| if y[i] { e[i] } else { e[dist.nearest_index[i]] })
        .collect();

    let r = params.kernel_radius as i64;
    let two_var = 2.0 * params.sigma * params.sigma;
    let mut kernel = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            kernel.push((dx, dy, (-((dx * dx + dy * dy) as f64) / two_var).exp()));
        }
    }
    let total: f64 = kernel.iter().map(|k| k.2).sum();

    let mut ea = vec![0.0; w * h];
    for py in 0..h as i64 {
        for px in 0..w as i64 {
            let mut acc = 0.0;
            for &(dx, dy, k) in &kernel {
                let (sx, sy) = (px + dx, py + dy);
                if sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && et[(sy * w as i64 + sx) as usize] {
                    acc += k;
                }
            }
            ea[(py * w as i64 + px) as usize] = acc / total;
        }
    }

    let mut min_e_ea = vec![0.0; w * h];
    let mut d_field = vec![0.0; w * h];
    let mut ew = vec![0.0; w * h];
    for i in 0..w * h {
        let err: f64 = if e[i] { 1.0 } else { 0.0 };
        min_e_ea[i] = if y[i] { err.min(ea[i]) } else { err };
        d_field[i] = if y[i] {
            1.0
        } else {
            2.0 - (params.alpha * dist.delta[i]).exp()
        };
        ew[i] = min_e_ea[i] * d_field[i];
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
