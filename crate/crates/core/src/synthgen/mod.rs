//! Synthetic ground truth: texture fields, seasonal forcing, compaction-driven
//! displacement and interferogram stacks with a planted, recoverable
//! texture-to-displacement relationship.

mod generate;
mod presets;
mod scenario;

pub use generate::{
    compaction_series, draw_baselines, draw_dem_coeffs, forward_interferograms, generate_forcing,
    generate_scenario, generate_texture, seasonal_phase, simulate_displacement, synth_interferograms, Scenario,
    SyntheticStack,
};
pub use presets::RegimePreset;
pub use scenario::{
    CompactionParams, Coupling, ForcingParams, NoiseParams, RegionLayout, ScenarioConfig, TextureParams,
};
