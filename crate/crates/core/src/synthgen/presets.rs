use crate::error::{Error, Result};

/// Regional statistics that drive generation: means and standard deviations
/// of displacement, groundwater depth, precipitation and coarse-grain percent.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePreset {
    pub name: String,
    pub displacement_mean_mm: f64,
    pub displacement_sd_mm: f64,
    pub groundwater_mean_ft: f64,
    pub groundwater_sd_ft: f64,
    pub rain_mean_mm: f64,
    pub rain_sd_mm: f64,
    pub coarse_mean_pct: f64,
    pub coarse_sd_pct: f64,
}

impl RegimePreset {
    /// Monotonic subsidence, muted groundwater swings, fine-grained middle layers.
    pub fn chowchilla() -> Self {
        RegimePreset {
            name: "chowchilla".into(),
            displacement_mean_mm: -22.47,
            displacement_sd_mm: 10.66,
            groundwater_mean_ft: 95.53,
            groundwater_sd_ft: 27.69,
            rain_mean_mm: 0.84,
            rain_sd_mm: 0.80,
            coarse_mean_pct: 27.44,
            coarse_sd_pct: 10.13,
        }
    }

    /// Fluctuating, partly reversible displacement over coarser sediments.
    pub fn helm() -> Self {
        RegimePreset {
            name: "helm".into(),
            displacement_mean_mm: -40.95,
            displacement_sd_mm: 14.49,
            groundwater_mean_ft: 160.52,
            groundwater_sd_ft: 65.82,
            rain_mean_mm: 3.48,
            rain_sd_mm: 3.15,
            coarse_mean_pct: 40.01,
            coarse_sd_pct: 1.67,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "chowchilla" => Some(Self::chowchilla()),
            "helm" => Some(Self::helm()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sds = [
            self.displacement_sd_mm,
            self.groundwater_sd_ft,
            self.rain_sd_mm,
            self.coarse_sd_pct,
        ];
        if sds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Invalid(format!("preset {}: standard deviations must be >= 0", self.name)));
        }
        if !(0.0..=100.0).contains(&self.coarse_mean_pct) {
            return Err(Error::Invalid(format!(
                "preset {}: coarse_mean_pct {} outside [0, 100]",
                self.name, self.coarse_mean_pct
            )));
        }
        if self.rain_mean_mm < 0.0 {
            return Err(Error::Invalid(format!("preset {}: negative mean rain", self.name)));
        }
        Ok(())
    }
}
