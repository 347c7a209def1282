use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gridstore::DataCube;
use crate::smooth::gaussian_smooth;

/// Centered moving average over the valid entries of `series`, truncating the
/// window at the ends.
fn moving_average(series: &[Option<f64>], half: usize) -> Vec<Option<f64>> {
    let n = series.len();
    (0..n)
        .map(|t| {
            series[t]?;
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            let (sum, count) = series[lo..=hi]
                .iter()
                .flatten()
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            Some(sum / count as f64)
        })
        .collect()
}

/// Suppresses temporally white, spatially smooth noise.
///
/// The noise estimate is the temporal high-pass residual (series minus its
/// centered moving average over `temporal_window_epochs`) smoothed spatially
/// with a Gaussian of `spatial_sigma_cells`. The output is the input minus
/// that estimate, shifted so epoch 0 is exactly zero.
pub fn spatiotemporal_filter(
    cube: &DataCube,
    temporal_window_epochs: usize,
    spatial_sigma_cells: f64,
) -> Result<DataCube> {
    let (n, ne) = (cube.n_cells(), cube.n_epochs());
    if temporal_window_epochs == 0 || temporal_window_epochs.is_multiple_of(2) {
        return Err(Error::Invalid(format!(
            "temporal window must be a positive odd number of epochs, got {temporal_window_epochs}"
        )));
    }
    if temporal_window_epochs > ne {
        return Err(Error::Invalid(format!(
            "temporal window {temporal_window_epochs} exceeds series length {ne}"
        )));
    }
    if !(spatial_sigma_cells >= 0.0) {
        return Err(Error::Invalid("spatial sigma must be >= 0".into()));
    }
    let half = temporal_window_epochs / 2;

    // residual[cell][t]
    let residual: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|cell| {
            let s: Vec<Option<f64>> = (0..ne).map(|t| cube.value(cell, t)).collect();
            let ma = moving_average(&s, half);
            s.iter()
                .zip(ma)
                .map(|(v, m)| Some(v.as_ref()? - m?))
                .collect()
        })
        .collect();

    // noise[t][cell]
    let noise: Vec<Vec<Option<f64>>> = (0..ne)
        .into_par_iter()
        .map(|t| {
            let vals: Vec<f64> = residual.iter().map(|r| r[t].unwrap_or(0.0)).collect();
            let valid: Vec<bool> = residual.iter().map(|r| r[t].is_some()).collect();
            gaussian_smooth(cube.geometry(), &vals, &valid, spatial_sigma_cells).0
        })
        .collect();

    let mut out = cube.clone();
    for cell in 0..n {
        let filtered: Vec<Option<f64>> = (0..ne)
            .map(|t| Some(cube.value(cell, t)? - noise[t][cell]?))
            .collect();
        let base = filtered[0].unwrap_or(0.0);
        for (t, f) in filtered.into_iter().enumerate() {
            match f {
                Some(v) => out.set(cell, t, v - base)?,
                None => out.mask(cell, t),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridstore::{Geometry, SpaceTimeGrid, Variable};

    fn grid(rows: usize, cols: usize, epochs: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::regular(
            Geometry::new(rows, cols, 2000.0, 0.0, 0.0).unwrap(),
            "2015-03-01".parse().unwrap(),
            12,
            epochs,
        )
        .unwrap()
    }

    #[test]
    fn constant_series_unchanged() {
        let c = DataCube::filled(grid(4, 4, 12), Variable::DisplacementMm, 0.0);
        assert_eq!(spatiotemporal_filter(&c, 5, 2.0).unwrap(), c);
    }

    #[test]
    fn identity_when_degenerate() {
        let c = DataCube::from_fn(grid(3, 3, 6), Variable::DisplacementMm, |cell, t| {
            Some(if t == 0 { 0.0 } else { (cell * 7 + t * t) as f64 * 0.3 })
        })
        .unwrap();
        assert_eq!(spatiotemporal_filter(&c, 1, 0.0).unwrap(), c);
    }

    #[test]
    fn uniform_spike_is_attenuated() {
        // Window w: moving average at the spike is 5/w, the residual 5 - 5/w
        // is uniform in space so smoothing keeps it; 5/w remains.
        let k = 10;
        let c = DataCube::from_fn(grid(5, 5, 24), Variable::DisplacementMm, |_, t| {
            Some(if t == k { 5.0 } else { 0.0 })
        })
        .unwrap();
        let f = spatiotemporal_filter(&c, 11, 2.0).unwrap();
        for cell in 0..25 {
            let v = f.get(cell, k).unwrap();
            assert!((v - 5.0 / 11.0).abs() < 1e-12);
            assert!(v.abs() <= 0.1 * 5.0);
            assert_eq!(f.get(cell, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn window_errors() {
        let c = DataCube::filled(grid(2, 2, 4), Variable::DisplacementMm, 0.0);
        assert!(spatiotemporal_filter(&c, 5, 1.0).is_err());
        assert!(spatiotemporal_filter(&c, 2, 1.0).is_err());
        assert!(spatiotemporal_filter(&c, 0, 1.0).is_err());
    }

    #[test]
    fn masked_cells_stay_masked() {
        let mut c = DataCube::filled(grid(3, 3, 7), Variable::DisplacementMm, 0.0);
        for t in 0..7 {
            c.mask(4, t);
        }
        let f = spatiotemporal_filter(&c, 3, 1.0).unwrap();
        assert!(!f.is_valid(4, 3));
        assert!(f.is_valid(3, 3));
    }
}
