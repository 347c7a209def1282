//! Plain-text `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every key
//! has a default; unknown keys and invalid values are all reported together.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::evalstat::AblationMode;
use crate::fuse::{ResampleSpec, SpatialMethod, TemporalMethod};
use crate::gridstore::text::{self, fmt_f64};
use crate::gridstore::{Geometry, SpaceTimeGrid};
use crate::learn::{ConvLayer, FeatureSubset, Head, ModelKind, ModelSpec, NetConfig, TrainConfig, N_CONV, N_LSTM};
use crate::sbas::{DeformationModel, InversionConfig};
use crate::synthgen::{RegimePreset, RegionLayout, ScenarioConfig};

/// Every tunable of a run, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,

    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_size_m: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub start_date: NaiveDate,
    pub acquisition_spacing_days: i64,
    pub n_acquisitions: usize,
    pub active_cells: Option<usize>,
    /// One preset name, or `west/east` for a split layout.
    pub regions: Vec<String>,

    pub elastic_coeff_mm_per_ft: f64,
    pub inelastic_coeff_mm_per_ft: f64,
    pub coupling_exponent: f64,
    pub texture_sigma_cells: f64,
    pub layer_correlation: f64,
    pub gw_trend_ft_per_year: f64,
    pub gw_peak_doy: f64,
    pub rain_peak_doy: f64,
    pub rain_seasonality: f64,
    /// Calendar months 1..=12; empty means every month.
    pub forcing_months: Vec<u32>,
    pub gw_spatial_sd_ft: f64,
    pub gw_spatial_sigma_cells: f64,
    pub troposphere_sd_mm: f64,
    pub troposphere_sigma_cells: f64,
    pub measurement_sd_mm: f64,
    pub baseline_min_m: f64,
    pub baseline_max_m: f64,
    pub dem_coeff_min: f64,
    pub dem_coeff_max: f64,
    pub max_baseline_days: i64,

    pub estimate_dem_error: bool,
    pub deformation_model: DeformationModel,
    pub filter: bool,
    pub filter_window_epochs: usize,
    pub filter_sigma_cells: f64,

    /// Defaults to `start_date`.
    pub target_start_date: Option<NaiveDate>,
    pub target_spacing_days: i64,
    pub target_epochs: usize,
    /// Defaults to `cell_size_m`.
    pub target_cell_size_m: Option<f64>,
    pub spatial_method: SpatialMethod,
    pub temporal_method: TemporalMethod,
    pub include_forcing: bool,

    pub tree_max_depth: usize,
    pub tree_min_samples_leaf: usize,
    pub tree_feature_subset: Option<FeatureSubset>,
    pub forest_n_trees: usize,
    pub forest_bootstrap: bool,
    pub forest_max_depth: usize,
    pub forest_min_samples_leaf: usize,
    pub forest_feature_subset: Option<FeatureSubset>,
    pub net_input_channels: usize,
    pub net_conv: [ConvLayer; N_CONV],
    pub net_lstm_hidden: [usize; N_LSTM],
    pub net_head: Head,
    pub net_init_scale: f64,
    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_learning_rate: f64,
    pub train_momentum: f64,
    pub train_clip_norm: f64,

    pub holdout_fraction: f64,
    pub folds: usize,
    pub thin_distance_m: f64,
    pub ablation_mode: AblationMode,
    pub alpha: f64,
}

impl Default for Config {
    fn default() -> Self {
        let s = ScenarioConfig::desk();
        let g = &s.grid.geometry;
        let net = NetConfig::default();
        let train = TrainConfig::default();
        let spec = ModelSpec::new(ModelKind::Forest);
        Config {
            seed: 1,
            n_rows: g.n_rows,
            n_cols: g.n_cols,
            cell_size_m: g.cell_size_m,
            origin_x: g.origin_x,
            origin_y: g.origin_y,
            start_date: s.grid.epochs()[0],
            acquisition_spacing_days: 12,
            n_acquisitions: s.grid.n_epochs(),
            active_cells: s.active_cells,
            regions: vec!["chowchilla".into(), "helm".into()],
            elastic_coeff_mm_per_ft: s.compaction.elastic_coeff_mm_per_ft,
            inelastic_coeff_mm_per_ft: s.compaction.inelastic_coeff_mm_per_ft,
            coupling_exponent: s.compaction.coupling.exponent,
            texture_sigma_cells: s.texture.smoothing_sigma_cells,
            layer_correlation: s.texture.layer_correlation,
            gw_trend_ft_per_year: s.forcing.gw_trend_ft_per_year,
            gw_peak_doy: s.forcing.gw_peak_doy,
            rain_peak_doy: s.forcing.rain_peak_doy,
            rain_seasonality: s.forcing.rain_seasonality,
            forcing_months: Vec::new(),
            gw_spatial_sd_ft: s.forcing.gw_spatial_sd_ft,
            gw_spatial_sigma_cells: s.forcing.gw_spatial_sigma_cells,
            troposphere_sd_mm: s.noise.troposphere_sd_mm,
            troposphere_sigma_cells: s.noise.troposphere_sigma_cells,
            measurement_sd_mm: s.noise.measurement_sd_mm,
            baseline_min_m: s.baseline_range_m.0,
            baseline_max_m: s.baseline_range_m.1,
            dem_coeff_min: s.dem_error_coeff_range.0,
            dem_coeff_max: s.dem_error_coeff_range.1,
            max_baseline_days: s.max_baseline_days,
            estimate_dem_error: true,
            deformation_model: DeformationModel::LinearSeasonal,
            filter: true,
            filter_window_epochs: crate::sbas::DEFAULT_FILTER_WINDOW,
            filter_sigma_cells: crate::sbas::DEFAULT_FILTER_SIGMA,
            target_start_date: None,
            target_spacing_days: 14,
            target_epochs: 132,
            target_cell_size_m: None,
            spatial_method: SpatialMethod::default(),
            temporal_method: TemporalMethod::default(),
            include_forcing: false,
            tree_max_depth: spec.tree.max_depth,
            tree_min_samples_leaf: spec.tree.min_samples_leaf,
            tree_feature_subset: Some(spec.tree.feature_subset),
            forest_n_trees: spec.forest.n_trees,
            forest_bootstrap: spec.forest.bootstrap,
            forest_max_depth: spec.forest.max_depth,
            forest_min_samples_leaf: spec.forest.min_samples_leaf,
            forest_feature_subset: spec.forest.feature_subset,
            net_input_channels: net.input_channels,
            net_conv: net.conv,
            net_lstm_hidden: net.lstm_hidden,
            net_head: net.head,
            net_init_scale: net.init_scale,
            train_epochs: train.epochs,
            train_batch_size: train.batch_size,
            train_learning_rate: train.learning_rate,
            train_momentum: train.momentum,
            train_clip_norm: train.clip_norm,
            holdout_fraction: 0.6,
            folds: crate::evalstat::DEFAULT_FOLDS,
            thin_distance_m: 10_000.0,
            ablation_mode: AblationMode::Remove,
            alpha: 0.05,
        }
    }
}

type Setter = fn(&mut Config, &str) -> std::result::Result<(), String>;
type Getter = fn(&Config) -> String;

struct Key {
    name: &'static str,
    set: Setter,
    get: Getter,
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn float(v: &str) -> std::result::Result<f64, String> {
    text::parse_f64(v)
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn non_negative(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn unit(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("must be in [0, 1], got {v}"))
    }
}

fn open_unit(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("must be in (0, 1), got {v}"))
    }
}

fn count(v: &str) -> std::result::Result<usize, String> {
    let n: usize = num(v)?;
    if n >= 1 {
        Ok(n)
    } else {
        Err(format!("must be >= 1, got {v}"))
    }
}

fn days(v: &str) -> std::result::Result<i64, String> {
    let n: i64 = num(v)?;
    if n >= 1 {
        Ok(n)
    } else {
        Err(format!("must be >= 1 day, got {v}"))
    }
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn date(v: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|_| format!("expected YYYY-MM-DD, got {v:?}"))
}

fn subset(v: &str) -> std::result::Result<Option<FeatureSubset>, String> {
    match v {
        "auto" => Ok(None),
        "all" => Ok(Some(FeatureSubset::All)),
        k => Ok(Some(FeatureSubset::Count(count(k)?))),
    }
}

fn subset_str(s: &Option<FeatureSubset>) -> String {
    match s {
        None => "auto".into(),
        Some(FeatureSubset::All) => "all".into(),
        Some(FeatureSubset::Count(k)) => k.to_string(),
    }
}

fn months(v: &str) -> std::result::Result<Vec<u32>, String> {
    if v == "all" {
        return Ok(Vec::new());
    }
    let mut out: Vec<u32> = Vec::new();
    for tok in v.split(',') {
        let m: u32 = num(tok.trim())?;
        if !(1..=12).contains(&m) {
            return Err(format!("month {m} outside 1..12"));
        }
        out.push(m);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn months_str(m: &[u32]) -> String {
    if m.is_empty() {
        "all".into()
    } else {
        m.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
    }
}

fn conv(v: &str) -> std::result::Result<ConvLayer, String> {
    let t: Vec<&str> = v.split_whitespace().collect();
    if t.len() != 3 {
        return Err(format!("expected `channels kernel stride`, got {v:?}"));
    }
    Ok(ConvLayer {
        channels: count(t[0])?,
        kernel: count(t[1])?,
        stride: count(t[2])?,
    })
}

fn conv_str(c: &ConvLayer) -> String {
    format!("{} {} {}", c.channels, c.kernel, c.stride)
}

fn keys() -> Vec<Key> {
    macro_rules! k {
        ($name:literal, $field:ident, $parse:expr, $fmt:expr) => {
            Key {
                name: $name,
                set: |c, v| {
                    c.$field = $parse(v)?;
                    Ok(())
                },
                get: |c| $fmt(&c.$field),
            }
        };
    }
    fn fl(x: &f64) -> String {
        fmt_f64(*x)
    }
    fn ts<T: ToString>(x: &T) -> String {
        x.to_string()
    }
    vec![
        k!("seed", seed, num::<u64>, ts),
        k!("n_rows", n_rows, count, ts),
        k!("n_cols", n_cols, count, ts),
        k!("cell_size_m", cell_size_m, positive, fl),
        k!("origin_x", origin_x, float, fl),
        k!("origin_y", origin_y, float, fl),
        k!("start_date", start_date, date, ts),
        k!("acquisition_spacing_days", acquisition_spacing_days, days, ts),
        k!("n_acquisitions", n_acquisitions, count, ts),
        k!(
            "active_cells",
            active_cells,
            |v: &str| if v == "all" { Ok(None) } else { count(v).map(Some) },
            |x: &Option<usize>| x.map_or("all".to_string(), |n| n.to_string())
        ),
        k!(
            "regions",
            regions,
            |v: &str| {
                let names: Vec<String> = v.split('/').map(|s| s.trim().to_string()).collect();
                if names.len() > 2 {
                    return Err("expected `preset` or `west/east`".to_string());
                }
                for n in &names {
                    if RegimePreset::builtin(n).is_none() {
                        return Err(format!("unknown preset {n:?} (chowchilla|helm)"));
                    }
                }
                Ok(names)
            },
            |x: &Vec<String>| x.join("/")
        ),
        k!("elastic_coeff_mm_per_ft", elastic_coeff_mm_per_ft, non_negative, fl),
        k!("inelastic_coeff_mm_per_ft", inelastic_coeff_mm_per_ft, non_negative, fl),
        k!("coupling_exponent", coupling_exponent, positive, fl),
        k!("texture_sigma_cells", texture_sigma_cells, non_negative, fl),
        k!(
            "layer_correlation",
            layer_correlation,
            |v: &str| {
                let x = float(v)?;
                if (-1.0..=1.0).contains(&x) {
                    Ok(x)
                } else {
                    Err(format!("must be in [-1, 1], got {v}"))
                }
            },
            fl
        ),
        k!("gw_trend_ft_per_year", gw_trend_ft_per_year, float, fl),
        k!("gw_peak_doy", gw_peak_doy, float, fl),
        k!("rain_peak_doy", rain_peak_doy, float, fl),
        k!("rain_seasonality", rain_seasonality, unit, fl),
        k!("forcing_months", forcing_months, months, |x: &Vec<u32>| months_str(x)),
        k!("gw_spatial_sd_ft", gw_spatial_sd_ft, non_negative, fl),
        k!("gw_spatial_sigma_cells", gw_spatial_sigma_cells, non_negative, fl),
        k!("troposphere_sd_mm", troposphere_sd_mm, non_negative, fl),
        k!("troposphere_sigma_cells", troposphere_sigma_cells, non_negative, fl),
        k!("measurement_sd_mm", measurement_sd_mm, non_negative, fl),
        k!("baseline_min_m", baseline_min_m, float, fl),
        k!("baseline_max_m", baseline_max_m, float, fl),
        k!("dem_coeff_min", dem_coeff_min, float, fl),
        k!("dem_coeff_max", dem_coeff_max, float, fl),
        k!("max_baseline_days", max_baseline_days, days, ts),
        k!("estimate_dem_error", estimate_dem_error, boolean, ts),
        k!(
            "deformation_model",
            deformation_model,
            |v: &str| DeformationModel::parse(v)
                .ok_or_else(|| format!("expected linear|linear_seasonal|compaction, got {v:?}")),
            |x: &DeformationModel| x.name().to_string()
        ),
        k!("filter", filter, boolean, ts),
        k!(
            "filter_window_epochs",
            filter_window_epochs,
            |v: &str| {
                let n = count(v)?;
                if n % 2 == 1 {
                    Ok(n)
                } else {
                    Err(format!("must be odd, got {v}"))
                }
            },
            ts
        ),
        k!("filter_sigma_cells", filter_sigma_cells, non_negative, fl),
        k!(
            "target_start_date",
            target_start_date,
            |v: &str| if v == "auto" { Ok(None) } else { date(v).map(Some) },
            |x: &Option<NaiveDate>| x.map_or("auto".to_string(), |d| d.to_string())
        ),
        k!("target_spacing_days", target_spacing_days, days, ts),
        k!("target_epochs", target_epochs, count, ts),
        k!(
            "target_cell_size_m",
            target_cell_size_m,
            |v: &str| if v == "auto" { Ok(None) } else { positive(v).map(Some) },
            |x: &Option<f64>| x.map_or("auto".to_string(), fmt_f64)
        ),
        k!(
            "spatial_method",
            spatial_method,
            |v: &str| v.parse::<SpatialMethod>().map_err(|e| e.to_string()),
            |x: &SpatialMethod| x.name().to_string()
        ),
        k!(
            "temporal_method",
            temporal_method,
            |v: &str| v.parse::<TemporalMethod>().map_err(|e| e.to_string()),
            |x: &TemporalMethod| x.name().to_string()
        ),
        k!("include_forcing", include_forcing, boolean, ts),
        k!("tree_max_depth", tree_max_depth, count, ts),
        k!("tree_min_samples_leaf", tree_min_samples_leaf, count, ts),
        k!(
            "tree_feature_subset",
            tree_feature_subset,
            |v: &str| match subset(v)? {
                None => Err("trees need `all` or a count".to_string()),
                s => Ok(s),
            },
            subset_str
        ),
        k!("forest_n_trees", forest_n_trees, count, ts),
        k!("forest_bootstrap", forest_bootstrap, boolean, ts),
        k!("forest_max_depth", forest_max_depth, count, ts),
        k!("forest_min_samples_leaf", forest_min_samples_leaf, count, ts),
        k!("forest_feature_subset", forest_feature_subset, subset, subset_str),
        k!("net_input_channels", net_input_channels, count, ts),
        Key {
            name: "net_conv1",
            set: |c, v| {
                c.net_conv[0] = conv(v)?;
                Ok(())
            },
            get: |c| conv_str(&c.net_conv[0]),
        },
        Key {
            name: "net_conv2",
            set: |c, v| {
                c.net_conv[1] = conv(v)?;
                Ok(())
            },
            get: |c| conv_str(&c.net_conv[1]),
        },
        Key {
            name: "net_conv3",
            set: |c, v| {
                c.net_conv[2] = conv(v)?;
                Ok(())
            },
            get: |c| conv_str(&c.net_conv[2]),
        },
        k!(
            "net_lstm_hidden",
            net_lstm_hidden,
            |v: &str| {
                let w: Vec<usize> = v.split_whitespace().map(count).collect::<std::result::Result<_, _>>()?;
                <[usize; N_LSTM]>::try_from(w).map_err(|w| format!("expected {N_LSTM} widths, got {}", w.len()))
            },
            |x: &[usize; N_LSTM]| x.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
        ),
        k!(
            "net_head",
            net_head,
            |v: &str| Head::parse(v).ok_or_else(|| format!("expected scaled_sigmoid|softmax, got {v:?}")),
            |x: &Head| x.name().to_string()
        ),
        k!("net_init_scale", net_init_scale, positive, fl),
        k!("train_epochs", train_epochs, count, ts),
        k!("train_batch_size", train_batch_size, count, ts),
        k!("train_learning_rate", train_learning_rate, non_negative, fl),
        k!("train_momentum", train_momentum, unit, fl),
        k!("train_clip_norm", train_clip_norm, non_negative, fl),
        k!("holdout_fraction", holdout_fraction, open_unit, fl),
        k!(
            "folds",
            folds,
            |v: &str| {
                let n: usize = num(v)?;
                if n >= 2 {
                    Ok(n)
                } else {
                    Err(format!("must be >= 2, got {v}"))
                }
            },
            ts
        ),
        k!("thin_distance_m", thin_distance_m, positive, fl),
        k!(
            "ablation_mode",
            ablation_mode,
            |v: &str| AblationMode::parse(v).ok_or_else(|| format!("expected remove|zero_fill, got {v:?}")),
            |x: &AblationMode| x.name().to_string()
        ),
        k!("alpha", alpha, open_unit, fl),
    ]
}

impl Config {
    /// Parses config text; `origin` names the source in error messages.
    pub fn parse(origin: &str, s: &str) -> Result<Config> {
        let keys = keys();
        let mut cfg = Config::default();
        let mut errors = Vec::new();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{origin}:{}", i + 1);
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!("{at}: expected `key = value`, got {line:?}"));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            match keys.iter().find(|key| key.name == k) {
                None => errors.push(format!("{at}: unknown key `{k}`")),
                Some(key) => {
                    if seen.contains(&key.name) {
                        errors.push(format!("{at}: `{k}` set twice"));
                    }
                    seen.push(key.name);
                    if let Err(m) = (key.set)(&mut cfg, v) {
                        errors.push(format!("{at}: {k}: {m}"));
                    }
                }
            }
        }
        if errors.is_empty() {
            errors.extend(cfg.cross_check());
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn read(path: &Path) -> Result<Config> {
        Config::parse(&path.display().to_string(), &text::read_to_string(path)?)
    }

    /// Constraints spanning several keys.
    fn cross_check(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.baseline_min_m > self.baseline_max_m {
            e.push("baseline_min_m: must be <= baseline_max_m".into());
        }
        if self.dem_coeff_min > self.dem_coeff_max {
            e.push("dem_coeff_min: must be <= dem_coeff_max".into());
        }
        if let Some(a) = self.active_cells {
            if a > self.n_rows * self.n_cols {
                e.push(format!("active_cells: {a} exceeds the {} grid cells", self.n_rows * self.n_cols));
            }
        }
        if self.filter && self.filter_window_epochs > self.n_acquisitions {
            e.push("filter_window_epochs: exceeds n_acquisitions".into());
        }
        for (name, err) in [
            ("net_*", self.net_config().validate().err()),
            ("train_*", self.train_config().validate().err()),
        ] {
            if let Some(err) = err {
                e.push(format!("{name}: {err}"));
            }
        }
        e
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn normalized(&self) -> String {
        keys()
            .iter()
            .map(|k| format!("{} = {}\n", k.name, (k.get)(self)))
            .collect()
    }

    pub fn key_names() -> Vec<&'static str> {
        keys().iter().map(|k| k.name).collect()
    }

    pub fn acquisition_grid(&self) -> Result<SpaceTimeGrid> {
        let g = Geometry::new(self.n_rows, self.n_cols, self.cell_size_m, self.origin_x, self.origin_y)?;
        SpaceTimeGrid::regular(g, self.start_date, self.acquisition_spacing_days, self.n_acquisitions)
    }

    /// Fusion target: same origin and extent, target cell size and the
    /// regular target epoch axis.
    pub fn target_grid(&self) -> Result<SpaceTimeGrid> {
        let cs = self.target_cell_size_m.unwrap_or(self.cell_size_m);
        let rows = ((self.n_rows as f64 * self.cell_size_m) / cs).floor().max(1.0) as usize;
        let cols = ((self.n_cols as f64 * self.cell_size_m) / cs).floor().max(1.0) as usize;
        let g = Geometry::new(rows, cols, cs, self.origin_x, self.origin_y)?;
        let start = self.target_start_date.unwrap_or(self.start_date);
        SpaceTimeGrid::regular(g, start, self.target_spacing_days, self.target_epochs)
    }

    pub fn resample_spec(&self) -> Result<ResampleSpec> {
        Ok(ResampleSpec {
            target: self.target_grid()?,
            spatial: self.spatial_method,
            temporal: self.temporal_method,
        })
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let preset = |n: &str| RegimePreset::builtin(n).ok_or_else(|| Error::Invalid(format!("unknown preset {n}")));
        let layout = match self.regions.as_slice() {
            [one] => RegionLayout::Uniform(preset(one)?),
            [w, e] => RegionLayout::Split {
                west: preset(w)?,
                east: preset(e)?,
            },
            _ => return Err(Error::Invalid("regions needs one or two presets".into())),
        };
        let mut s = ScenarioConfig::desk();
        s.grid = self.acquisition_grid()?;
        s.layout = layout;
        s.active_cells = self.active_cells;
        s.compaction.elastic_coeff_mm_per_ft = self.elastic_coeff_mm_per_ft;
        s.compaction.inelastic_coeff_mm_per_ft = self.inelastic_coeff_mm_per_ft;
        s.compaction.coupling.exponent = self.coupling_exponent;
        s.texture.smoothing_sigma_cells = self.texture_sigma_cells;
        s.texture.layer_correlation = self.layer_correlation;
        let f = &mut s.forcing;
        f.gw_trend_ft_per_year = self.gw_trend_ft_per_year;
        f.gw_peak_doy = self.gw_peak_doy;
        f.rain_peak_doy = self.rain_peak_doy;
        f.rain_seasonality = self.rain_seasonality;
        f.forcing_months = std::array::from_fn(|m| {
            self.forcing_months.is_empty() || self.forcing_months.contains(&(m as u32 + 1))
        });
        f.gw_spatial_sd_ft = self.gw_spatial_sd_ft;
        f.gw_spatial_sigma_cells = self.gw_spatial_sigma_cells;
        s.noise.troposphere_sd_mm = self.troposphere_sd_mm;
        s.noise.troposphere_sigma_cells = self.troposphere_sigma_cells;
        s.noise.measurement_sd_mm = self.measurement_sd_mm;
        s.baseline_range_m = (self.baseline_min_m, self.baseline_max_m);
        s.dem_error_coeff_range = (self.dem_coeff_min, self.dem_coeff_max);
        s.max_baseline_days = self.max_baseline_days;
        s.seed = self.seed;
        s.validate()?;
        Ok(s)
    }

    pub fn inversion(&self) -> InversionConfig {
        InversionConfig {
            estimate_dem_error: self.estimate_dem_error,
            deformation_model: self.deformation_model,
        }
    }

    fn net_config(&self) -> NetConfig {
        NetConfig {
            input_channels: self.net_input_channels,
            conv: self.net_conv,
            lstm_hidden: self.net_lstm_hidden,
            head: self.net_head,
            init_scale: self.net_init_scale,
            seed: self.seed,
        }
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            learning_rate: self.train_learning_rate,
            momentum: self.train_momentum,
            clip_norm: self.train_clip_norm,
            seed: self.seed,
        }
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        let mut spec = ModelSpec::new(kind);
        spec.tree.max_depth = self.tree_max_depth;
        spec.tree.min_samples_leaf = self.tree_min_samples_leaf;
        spec.tree.feature_subset = self.tree_feature_subset.unwrap_or(FeatureSubset::All);
        spec.forest.n_trees = self.forest_n_trees;
        spec.forest.bootstrap = self.forest_bootstrap;
        spec.forest.max_depth = self.forest_max_depth;
        spec.forest.min_samples_leaf = self.forest_min_samples_leaf;
        spec.forest.feature_subset = self.forest_feature_subset;
        spec.net = self.net_config();
        spec.train = self.train_config();
        spec.with_seed(self.seed)
    }
}
