//! Separable truncated Gaussian filtering with zero padding.

/// Unnormalized 1-D Gaussian taps `exp(-i²/2σ²)` for `i ∈ [-r, r]`.
pub(crate) fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Convolves a row-major field with the normalized `(2r+1)²` Gaussian,
/// treating pixels outside the field as zero.
///
/// Each axis divides by its own tap sum. Taps are accumulated in a fixed
/// order with out-of-range samples contributing nothing, so a window that is
/// entirely ones evaluates to exactly `1.0` and no output exceeds `1.0` for
/// inputs in `[0, 1]`.
pub(crate) fn gaussian_filter(input: &[f64], width: usize, height: usize, sigma: f64, radius: usize) -> Vec<f64> {
    let taps = gaussian_taps(sigma, radius);
    let norm: f64 = taps.iter().sum();
    let r = radius as isize;

    let mut horizontal = vec![0.0; width * height];
    for y in 0..height {
        let row = &input[y * width..(y + 1) * width];
        let out = &mut horizontal[y * width..(y + 1) * width];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &tap) in taps.iter().enumerate() {
                let sx = x as isize + t as isize - r;
                if sx >= 0 && (sx as usize) < width {
                    acc += tap * row[sx as usize];
                }
            }
            *o = acc / norm;
        }
    }

    let mut output = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (t, &tap) in taps.iter().enumerate() {
                let sy = y as isize + t as isize - r;
                if sy >= 0 && (sy as usize) < height {
                    acc += tap * horizontal[sy as usize * width + x];
                }
            }
            output[y * width + x] = acc / norm;
        }
    }
    output
}
