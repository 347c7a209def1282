use crate::error::{Error, Result};
use crate::gridstore::{Geometry, SpaceTimeGrid};

use super::presets::RegimePreset;

/// Which preset governs which cells.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionLayout {
    Uniform(RegimePreset),
    /// Columns left of the grid midline follow `west`, the rest `east`.
    Split { west: RegimePreset, east: RegimePreset },
}

impl RegionLayout {
    pub fn preset_for(&self, geometry: &Geometry, cell: usize) -> &RegimePreset {
        match self {
            RegionLayout::Uniform(p) => p,
            RegionLayout::Split { west, east } => {
                let (_, col) = geometry.row_col(cell);
                if col < geometry.n_cols / 2 {
                    west
                } else {
                    east
                }
            }
        }
    }

    pub fn presets(&self) -> Vec<&RegimePreset> {
        match self {
            RegionLayout::Uniform(p) => vec![p],
            RegionLayout::Split { west, east } => vec![west, east],
        }
    }
}

/// Monotone map from mean coarse-grain percent to the elastic share `e`:
/// `e = (pct / 100) ^ exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub exponent: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling { exponent: 1.0 }
    }
}

impl Coupling {
    pub fn elastic_share(&self, coarse_pct: f64) -> f64 {
        (coarse_pct.clamp(0.0, 100.0) / 100.0).powf(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactionParams {
    /// Recoverable surface motion per foot of head change.
    pub elastic_coeff_mm_per_ft: f64,
    /// Permanent compaction per foot of head decline below the preconsolidation head.
    pub inelastic_coeff_mm_per_ft: f64,
    pub coupling: Coupling,
}

impl Default for CompactionParams {
    fn default() -> Self {
        CompactionParams {
            elastic_coeff_mm_per_ft: 0.3,
            inelastic_coeff_mm_per_ft: 0.5,
            coupling: Coupling::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureParams {
    /// Gaussian smoothing sigma in cells; 0 disables smoothing.
    pub smoothing_sigma_cells: f64,
    /// Correlation between the 10 layers of one cell.
    pub layer_correlation: f64,
}

impl Default for TextureParams {
    fn default() -> Self {
        TextureParams {
            smoothing_sigma_cells: 2.0,
            layer_correlation: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingParams {
    /// Secular deepening of groundwater, feet per year.
    pub gw_trend_ft_per_year: f64,
    /// Day of year of the deepest seasonal groundwater level.
    pub gw_peak_doy: f64,
    /// Day of year of the precipitation maximum (winter peak by default).
    pub rain_peak_doy: f64,
    /// Relative amplitude of the seasonal rain envelope, in [0, 1].
    pub rain_seasonality: f64,
    /// Calendar months (1..=12) in which the seasonal groundwater cycle acts.
    pub forcing_months: [bool; 12],
    pub gw_spatial_sd_ft: f64,
    pub gw_spatial_sigma_cells: f64,
}

impl Default for ForcingParams {
    fn default() -> Self {
        ForcingParams {
            gw_trend_ft_per_year: 3.0,
            gw_peak_doy: 244.0,
            rain_peak_doy: 15.0,
            rain_seasonality: 0.9,
            forcing_months: [true; 12],
            gw_spatial_sd_ft: 0.0,
            gw_spatial_sigma_cells: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Per-acquisition atmospheric delay, spatially smooth.
    pub troposphere_sd_mm: f64,
    pub troposphere_sigma_cells: f64,
    /// White per-pair, per-cell noise.
    pub measurement_sd_mm: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            troposphere_sd_mm: 2.0,
            troposphere_sigma_cells: 3.0,
            measurement_sd_mm: 1.0,
        }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        NoiseParams {
            troposphere_sd_mm: 0.0,
            troposphere_sigma_cells: 0.0,
            measurement_sd_mm: 0.0,
        }
    }
}

/// Everything needed to generate one synthetic scenario. Fixed seed means a
/// bit-identical scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Acquisition grid: geometry plus SAR acquisition dates.
    pub grid: SpaceTimeGrid,
    pub layout: RegionLayout,
    /// Keep only this many cells, in a valley-shaped band along the grid
    /// diagonal; `None` keeps the whole grid.
    pub active_cells: Option<usize>,
    pub compaction: CompactionParams,
    pub texture: TextureParams,
    pub forcing: ForcingParams,
    pub noise: NoiseParams,
    /// Per-acquisition perpendicular baseline range, meters.
    pub baseline_range_m: (f64, f64),
    /// Per-cell DEM error coupling range, mm per meter of baseline.
    pub dem_error_coeff_range: (f64, f64),
    pub max_baseline_days: i64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for p in self.layout.presets() {
            p.validate()?;
        }
        let c = &self.compaction;
        if c.elastic_coeff_mm_per_ft < 0.0 || c.inelastic_coeff_mm_per_ft < 0.0 {
            return Err(Error::Invalid("compaction coefficients must be >= 0".into()));
        }
        if !(c.coupling.exponent > 0.0) {
            return Err(Error::Invalid("coupling exponent must be > 0".into()));
        }
        if !(-1.0..=1.0).contains(&self.texture.layer_correlation) {
            return Err(Error::Invalid("layer_correlation must be in [-1, 1]".into()));
        }
        if self.texture.smoothing_sigma_cells < 0.0 {
            return Err(Error::Invalid("texture smoothing sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.forcing.rain_seasonality) {
            return Err(Error::Invalid("rain_seasonality must be in [0, 1]".into()));
        }
        let n = &self.noise;
        if n.troposphere_sd_mm < 0.0 || n.measurement_sd_mm < 0.0 || n.troposphere_sigma_cells < 0.0 {
            return Err(Error::Invalid("noise levels must be >= 0".into()));
        }
        if self.baseline_range_m.0 > self.baseline_range_m.1 {
            return Err(Error::Invalid("baseline range min > max".into()));
        }
        if self.dem_error_coeff_range.0 > self.dem_error_coeff_range.1 {
            return Err(Error::Invalid("dem_error_coeff range min > max".into()));
        }
        if let Some(a) = self.active_cells {
            if a == 0 || a > self.grid.n_cells() {
                return Err(Error::Invalid(format!(
                    "active_cells {a} outside 1..={}",
                    self.grid.n_cells()
                )));
            }
        }
        Ok(())
    }

    /// Per-cell activity mask.
    pub fn active_mask(&self) -> Vec<bool> {
        let g = &self.grid.geometry;
        let n = g.n_cells();
        let Some(keep) = self.active_cells else {
            return vec![true; n];
        };
        // Distance from the line through the grid centre along the diagonal.
        let (rc, cc) = ((g.n_rows as f64 - 1.0) / 2.0, (g.n_cols as f64 - 1.0) / 2.0);
        let theta = (g.n_rows as f64).atan2(g.n_cols as f64);
        let (s, c) = theta.sin_cos();
        let mut ranked: Vec<(f64, usize)> = (0..n)
            .map(|cell| {
                let (r, col) = g.row_col(cell);
                let d = ((r as f64 - rc) * c - (col as f64 - cc) * s).abs();
                (d, cell)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut mask = vec![false; n];
        for &(_, cell) in &ranked[..keep] {
            mask[cell] = true;
        }
        mask
    }
}


impl ScenarioConfig {
    /// Default desk-scale scenario: 40x40 cells of 2 km, 12-day acquisitions
    /// spanning the 132-epoch biweekly analysis window, Chowchilla-like west
    /// half and Helm-like east half.
    pub fn desk() -> Self {
        let geometry = Geometry::new(40, 40, 2000.0, 0.0, 0.0).expect("static geometry");
        let start = chrono::NaiveDate::from_ymd_opt(2015, 3, 1).expect("static date");
        let grid = SpaceTimeGrid::regular(geometry, start, 12, 154).expect("static grid");
        ScenarioConfig {
            grid,
            layout: RegionLayout::Split {
                west: RegimePreset::chowchilla(),
                east: RegimePreset::helm(),
            },
            active_cells: None,
            compaction: CompactionParams::default(),
            texture: TextureParams::default(),
            forcing: ForcingParams::default(),
            noise: NoiseParams::default(),
            baseline_range_m: (-150.0, 150.0),
            dem_error_coeff_range: (-0.05, 0.05),
            max_baseline_days: 24,
            seed: 1,
        }
    }
}
