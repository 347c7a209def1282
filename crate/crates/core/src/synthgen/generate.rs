use chrono::Datelike;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::scenario::{CompactionParams, NoiseParams, ScenarioConfig};
use crate::error::{Error, Result};
use crate::gridstore::{DataCube, TextureStack, Variable, N_LAYERS};
use crate::rng::{self, purpose};
use crate::sbas::{build_pairs, AcquisitionSet, InterferogramStack};
use crate::smooth::unit_smooth_field;

const YEAR_DAYS: f64 = 365.25;

fn normal(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Per-cell 10-layer coarse-grain percents.
///
/// Each layer is `mean + sd * (rho * common + sqrt(1 - rho^2) * own)`, where
/// `common` and `own` are unit-variance, optionally smoothed Gaussian fields,
/// clamped to [0, 100]. Cells outside the active band are left undefined.
pub fn generate_texture(config: &ScenarioConfig) -> Result<TextureStack> {
    config.validate()?;
    let g = &config.grid.geometry;
    let n = g.n_cells();
    let active = config.active_mask();
    let sigma = config.texture.smoothing_sigma_cells;

    let common_white: Vec<f64> = (0..n)
        .map(|cell| normal(&mut rng::stream(config.seed, purpose::TEXTURE_COMMON, cell as u64)))
        .collect();
    let common = unit_smooth_field(g, &common_white, &active, sigma);

    let mut layer_white = vec![vec![0.0; n]; N_LAYERS];
    for cell in 0..n {
        let mut r = rng::stream(config.seed, purpose::TEXTURE_LAYER, cell as u64);
        for lw in layer_white.iter_mut() {
            lw[cell] = normal(&mut r);
        }
    }
    let layers: Vec<Vec<f64>> = layer_white
        .iter()
        .map(|w| unit_smooth_field(g, w, &active, sigma))
        .collect();

    let rho = config.texture.layer_correlation;
    let own = (1.0 - rho * rho).max(0.0).sqrt();
    let mut tex = TextureStack::undefined(g.clone());
    for cell in (0..n).filter(|&c| active[c]) {
        let p = config.layout.preset_for(g, cell);
        for (layer, field) in layers.iter().enumerate() {
            let v = if p.coarse_sd_pct == 0.0 {
                p.coarse_mean_pct
            } else {
                p.coarse_mean_pct + p.coarse_sd_pct * (rho * common[cell] + own * field[cell])
            };
            tex.set(cell, layer, v.clamp(0.0, 100.0))?;
        }
    }
    Ok(tex)
}

/// `cos(2 pi (doy - peak) / 365.25)` for a calendar date.
pub fn seasonal_phase(date: chrono::NaiveDate, peak_doy: f64) -> f64 {
    let doy = date.ordinal() as f64;
    (2.0 * std::f64::consts::PI * (doy - peak_doy) / YEAR_DAYS).cos()
}

/// Envelope amplitude and gamma shape reproducing the preset mean/sd for
/// rain = mean * (1 + A cos(.)) * G, with G ~ Gamma(k, 1/k).
fn rain_shape(mean: f64, sd: f64, seasonality: f64) -> (f64, Option<f64>) {
    if mean <= 0.0 || sd == 0.0 {
        return (0.0, None);
    }
    let cv2 = (sd / mean).powi(2);
    let amp = seasonality.min((2.0 * cv2).sqrt());
    let ratio = (1.0 + cv2) / (1.0 + amp * amp / 2.0);
    if ratio <= 1.0 + 1e-12 {
        (amp, None)
    } else {
        (amp, Some(1.0 / (ratio - 1.0)))
    }
}

/// Groundwater depth (ft) and precipitation (mm) cubes on the scenario grid.
///
/// Depth is the preset mean plus a seasonal cycle of amplitude
/// `sqrt(2) * sd` (active only in the configured months), a secular trend and
/// an optional smooth spatial offset. Precipitation is a winter-peaking
/// envelope times mean-one gamma noise.
pub fn generate_forcing(config: &ScenarioConfig) -> Result<(DataCube, DataCube)> {
    config.validate()?;
    let grid = &config.grid;
    let g = &grid.geometry;
    let n = g.n_cells();
    let f = &config.forcing;
    let days = grid.day_offsets();

    let offset_white: Vec<f64> = (0..n)
        .map(|cell| normal(&mut rng::stream(config.seed, purpose::GROUNDWATER, cell as u64)))
        .collect();
    let offsets: Vec<f64> = if f.gw_spatial_sd_ft > 0.0 {
        unit_smooth_field(g, &offset_white, &vec![true; n], f.gw_spatial_sigma_cells)
            .into_iter()
            .map(|z| z * f.gw_spatial_sd_ft)
            .collect()
    } else {
        vec![0.0; n]
    };

    let gw_phase: Vec<f64> = grid
        .epochs()
        .iter()
        .map(|d| {
            if f.forcing_months[d.month0() as usize] {
                seasonal_phase(*d, f.gw_peak_doy)
            } else {
                0.0
            }
        })
        .collect();
    let rain_phase: Vec<f64> = grid
        .epochs()
        .iter()
        .map(|d| seasonal_phase(*d, f.rain_peak_doy))
        .collect();

    let mut gw = DataCube::filled(grid.clone(), Variable::GroundwaterFt, 0.0);
    let mut rain = DataCube::filled(grid.clone(), Variable::PrecipitationMm, 0.0);
    for cell in 0..n {
        let p = config.layout.preset_for(g, cell);
        let amp = std::f64::consts::SQRT_2 * p.groundwater_sd_ft;
        for (t, day) in days.iter().enumerate() {
            let depth = p.groundwater_mean_ft
                + offsets[cell]
                + amp * gw_phase[t]
                + f.gw_trend_ft_per_year * day / YEAR_DAYS;
            gw.set(cell, t, depth)?;
        }

        let (env, shape) = rain_shape(p.rain_mean_mm, p.rain_sd_mm, f.rain_seasonality);
        let gamma = shape
            .map(|k| Gamma::new(k, 1.0 / k).map_err(|e| Error::Invalid(format!("rain gamma: {e}"))))
            .transpose()?;
        let mut r = rng::stream(config.seed, purpose::PRECIPITATION, cell as u64);
        for (t, ph) in rain_phase.iter().enumerate() {
            let noise = gamma.as_ref().map_or(1.0, |gm| gm.sample(&mut r));
            rain.set(cell, t, p.rain_mean_mm * (1.0 + env * ph) * noise)?;
        }
    }
    Ok((gw, rain))
}

/// Surface displacement of one cell from its head history (`head = -depth`).
///
/// `d(t) = e * elastic * (h(t) - h(0)) - (1 - e) * inelastic * p(t)` where
/// `p(t) = h(0) - min_{s <= t} h(s)` is the largest decline below the
/// preconsolidation head seen so far.
pub fn compaction_series(head: &[f64], elastic_share: f64, params: &CompactionParams) -> Vec<f64> {
    let Some(&h0) = head.first() else {
        return Vec::new();
    };
    let mut precon = h0;
    head.iter()
        .map(|&h| {
            precon = precon.min(h);
            let elastic = elastic_share * params.elastic_coeff_mm_per_ft * (h - h0);
            let inelastic = (1.0 - elastic_share) * params.inelastic_coeff_mm_per_ft * (h0 - precon);
            elastic - inelastic
        })
        .collect()
}

/// Displacement cube driven by groundwater depth; cells without a full
/// texture profile or a complete groundwater series are masked.
pub fn simulate_displacement(
    texture: &TextureStack,
    groundwater: &DataCube,
    params: &CompactionParams,
) -> Result<DataCube> {
    if texture.geometry() != groundwater.geometry() {
        return Err(Error::Geometry("texture and groundwater grids differ".into()));
    }
    let series = (0..groundwater.n_cells())
        .map(|cell| {
            let pct = texture.mean_percent(cell)?;
            let depth = groundwater.series(cell).ok()?;
            let head: Vec<f64> = depth.iter().map(|d| -d).collect();
            Some(compaction_series(&head, params.coupling.elastic_share(pct), params))
        })
        .collect();
    DataCube::from_series(groundwater.grid().clone(), Variable::DisplacementMm, series)
}

/// Per-acquisition perpendicular baselines, uniform over the configured range.
pub fn draw_baselines(config: &ScenarioConfig) -> Vec<f64> {
    let (lo, hi) = config.baseline_range_m;
    let mut r = rng::stream(config.seed, purpose::BASELINE, 0);
    (0..config.grid.n_epochs())
        .map(|_| lo + (hi - lo) * r.random::<f64>())
        .collect()
}

/// Per-cell DEM-error coupling (mm per meter of baseline).
pub fn draw_dem_coeffs(config: &ScenarioConfig) -> Vec<f64> {
    let (lo, hi) = config.dem_error_coeff_range;
    (0..config.grid.n_cells())
        .map(|cell| {
            let u: f64 = rng::stream(config.seed, purpose::DEM_ERROR, cell as u64).random();
            lo + (hi - lo) * u
        })
        .collect()
}

/// A synthetic stack together with the planted per-cell DEM coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStack {
    pub stack: InterferogramStack,
    pub dem_coeffs: Vec<f64>,
}

/// Interferograms for the scenario's pair network with drawn baselines,
/// DEM coefficients and noise.
pub fn synth_interferograms(
    displacement: &DataCube,
    pairs: &[(usize, usize)],
    config: &ScenarioConfig,
) -> Result<SyntheticStack> {
    let baselines = draw_baselines(config);
    let dem_coeffs = draw_dem_coeffs(config);
    let stack = forward_interferograms(
        displacement,
        pairs,
        &baselines,
        &dem_coeffs,
        &config.noise,
        config.max_baseline_days,
        config.seed,
    )?;
    Ok(SyntheticStack { stack, dem_coeffs })
}

/// Forward model:
/// `obs = d(j) - d(i) + dem * (B(j) - B(i)) + (aps(j) - aps(i)) + white`,
/// with `aps` a spatially smooth, temporally white delay per acquisition.
pub fn forward_interferograms(
    displacement: &DataCube,
    pairs: &[(usize, usize)],
    baselines_m: &[f64],
    dem_coeffs: &[f64],
    noise: &NoiseParams,
    max_baseline_days: i64,
    seed: u64,
) -> Result<InterferogramStack> {
    let grid = displacement.grid();
    let (n, ne) = (grid.n_cells(), grid.n_epochs());
    if dem_coeffs.len() != n {
        return Err(Error::Dimension(format!("{} DEM coefficients for {n} cells", dem_coeffs.len())));
    }
    for &(i, j) in pairs {
        if j <= i || j >= ne {
            return Err(Error::Invalid(format!("invalid pair ({i}, {j}) for {ne} epochs")));
        }
    }
    let acq = AcquisitionSet::new(grid.epochs().to_vec(), baselines_m.to_vec())?;

    // aps[t][cell]
    let mut aps = vec![vec![0.0; n]; ne];
    if noise.troposphere_sd_mm > 0.0 {
        let mut white = vec![vec![0.0; n]; ne];
        for cell in 0..n {
            let mut r = rng::stream(seed, purpose::TROPOSPHERE, cell as u64);
            for w in white.iter_mut() {
                w[cell] = normal(&mut r);
            }
        }
        let all = vec![true; n];
        for (a, w) in aps.iter_mut().zip(&white) {
            *a = unit_smooth_field(&grid.geometry, w, &all, noise.troposphere_sigma_cells)
                .into_iter()
                .map(|z| z * noise.troposphere_sd_mm)
                .collect();
        }
    }

    let mut obs = vec![None; pairs.len() * n];
    for cell in 0..n {
        let mut r = rng::stream(seed, purpose::MEASUREMENT, cell as u64);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let white = if noise.measurement_sd_mm > 0.0 {
                noise.measurement_sd_mm * normal(&mut r)
            } else {
                0.0
            };
            let (Some(di), Some(dj)) = (displacement.value(cell, i), displacement.value(cell, j)) else {
                continue;
            };
            let v = dj - di
                + dem_coeffs[cell] * (baselines_m[j] - baselines_m[i])
                + (aps[j][cell] - aps[i][cell])
                + white;
            obs[k * n + cell] = Some(v);
        }
    }
    InterferogramStack::new(grid.geometry.clone(), acq, pairs.to_vec(), max_baseline_days, obs)
}

/// All synthetic products of one scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub texture: TextureStack,
    pub groundwater: DataCube,
    pub precipitation: DataCube,
    pub displacement: DataCube,
    pub synthetic: SyntheticStack,
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let texture = generate_texture(config)?;
    let (groundwater, precipitation) = generate_forcing(config)?;
    let displacement = simulate_displacement(&texture, &groundwater, &config.compaction)?;
    let acq = AcquisitionSet::new(config.grid.epochs().to_vec(), vec![0.0; config.grid.n_epochs()])?;
    let pairs = build_pairs(&acq, config.max_baseline_days);
    let synthetic = synth_interferograms(&displacement, &pairs, config)?;
    Ok(Scenario {
        texture,
        groundwater,
        precipitation,
        displacement,
        synthetic,
    })
}
