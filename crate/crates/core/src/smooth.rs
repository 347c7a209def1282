//! Masked 2-D Gaussian smoothing on a raster geometry.

use crate::gridstore::Geometry;

/// Truncated Gaussian kernel offsets and weights for a given sigma in cells.
fn kernel(sigma: f64) -> (isize, Vec<f64>) {
    let radius = (3.0 * sigma).ceil() as isize;
    let w = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    (radius, w)
}

/// Smooths `values` over the valid cells. Each output is the normalized
/// weighted mean of valid neighbors within 3 sigma; invalid cells stay `None`.
/// Also returns, per cell, the sum of squared normalized weights (the
/// variance of the output when inputs are independent unit-variance noise).
pub fn gaussian_smooth(
    geometry: &Geometry,
    values: &[f64],
    valid: &[bool],
    sigma_cells: f64,
) -> (Vec<Option<f64>>, Vec<f64>) {
    let n = geometry.n_cells();
    assert_eq!(values.len(), n);
    assert_eq!(valid.len(), n);
    if sigma_cells <= 0.0 {
        let out = (0..n).map(|i| valid[i].then_some(values[i])).collect();
        return (out, vec![1.0; n]);
    }
    let (radius, w) = kernel(sigma_cells);
    let (rows, cols) = (geometry.n_rows as isize, geometry.n_cols as isize);
    let mut out = vec![None; n];
    let mut sum_sq = vec![0.0; n];
    for r in 0..rows {
        for c in 0..cols {
            let i = (r * cols + c) as usize;
            if !valid[i] {
                continue;
            }
            let (mut acc, mut wsum, mut w2) = (0.0, 0.0, 0.0);
            for dr in -radius..=radius {
                let rr = r + dr;
                if rr < 0 || rr >= rows {
                    continue;
                }
                let wr = w[(dr + radius) as usize];
                for dc in -radius..=radius {
                    let cc = c + dc;
                    if cc < 0 || cc >= cols {
                        continue;
                    }
                    let j = (rr * cols + cc) as usize;
                    if !valid[j] {
                        continue;
                    }
                    let wt = wr * w[(dc + radius) as usize];
                    acc += wt * values[j];
                    wsum += wt;
                    w2 += wt * wt;
                }
            }
            out[i] = Some(acc / wsum);
            sum_sq[i] = w2 / (wsum * wsum);
        }
    }
    (out, sum_sq)
}

/// Smoothed white noise rescaled to unit variance at every valid cell.
pub fn unit_smooth_field(geometry: &Geometry, white: &[f64], valid: &[bool], sigma_cells: f64) -> Vec<f64> {
    let (sm, sum_sq) = gaussian_smooth(geometry, white, valid, sigma_cells);
    sm.into_iter()
        .zip(sum_sq)
        .map(|(v, s)| v.map_or(0.0, |v| v / s.sqrt()))
        .collect()
}
