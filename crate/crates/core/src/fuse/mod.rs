//! Resampling onto a common grid and assembly of model-ready samples.

mod resample;

pub use resample::{
    resample_cube, resample_spatial, resample_temporal, resample_texture, ResampleSpec, SpatialMethod,
    TemporalMethod,
};

use crate::error::{Error, Result};
use crate::gridstore::{DataCube, SampleRow, SampleTable, SpaceTimeGrid, TextureStack};

/// Every source on one target grid plus the joint validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedBundle {
    pub displacement: DataCube,
    pub groundwater: DataCube,
    pub precipitation: DataCube,
    pub texture: TextureStack,
    /// Row-major `cell * n_epochs + epoch`; true where every source is valid.
    pub joint_valid: Vec<bool>,
}

impl AlignedBundle {
    pub fn grid(&self) -> &SpaceTimeGrid {
        self.displacement.grid()
    }

    /// Cell valid in every source at every epoch.
    pub fn cell_valid(&self, cell: usize) -> bool {
        let n = self.grid().n_epochs();
        self.joint_valid[cell * n..(cell + 1) * n].iter().all(|v| *v)
    }

    pub fn n_valid_cells(&self) -> usize {
        (0..self.grid().n_cells()).filter(|c| self.cell_valid(*c)).count()
    }
}

/// Resamples all sources onto `spec.target`. Texture is resampled spatially
/// only. Errors carry the name of the failing source.
pub fn align_all(
    displacement: &DataCube,
    groundwater: &DataCube,
    precipitation: &DataCube,
    texture: &TextureStack,
    spec: &ResampleSpec,
) -> Result<AlignedBundle> {
    let displacement = resample_cube(displacement, spec).map_err(|e| e.context("displacement"))?;
    let groundwater = resample_cube(groundwater, spec).map_err(|e| e.context("groundwater"))?;
    let precipitation = resample_cube(precipitation, spec).map_err(|e| e.context("precipitation"))?;
    let texture = resample_texture(texture, &spec.target.geometry, spec.spatial).map_err(|e| e.context("texture"))?;
    let n_epochs = spec.target.n_epochs();
    let joint_valid = displacement
        .valid_mask()
        .iter()
        .zip(groundwater.valid_mask())
        .zip(precipitation.valid_mask())
        .enumerate()
        .map(|(i, ((d, g), p))| *d && *g && *p && texture.profile(i / n_epochs).is_some())
        .collect();
    Ok(AlignedBundle {
        displacement,
        groundwater,
        precipitation,
        texture,
        joint_valid,
    })
}

/// One row per jointly valid cell. Features are the displacement history,
/// followed by groundwater and precipitation histories when
/// `include_forcing` is set. `declared_epochs`, when given, must match the
/// bundle's epoch count.
pub fn build_dataset(
    bundle: &AlignedBundle,
    include_forcing: bool,
    declared_epochs: Option<usize>,
) -> Result<SampleTable> {
    let grid = bundle.grid();
    let n_epochs = grid.n_epochs();
    if let Some(d) = declared_epochs {
        if d != n_epochs {
            return Err(Error::Dimension(format!(
                "bundle has {n_epochs} epochs, feature length declares {d}"
            )));
        }
    }
    let n_features = if include_forcing { 3 * n_epochs } else { n_epochs };
    let mut rows = Vec::new();
    for cell in 0..grid.n_cells() {
        if !bundle.cell_valid(cell) {
            continue;
        }
        let mut features = bundle.displacement.series(cell)?.to_vec();
        if include_forcing {
            features.extend_from_slice(bundle.groundwater.series(cell)?);
            features.extend_from_slice(bundle.precipitation.series(cell)?);
        }
        let targets = bundle.texture.profile(cell).expect("jointly valid cell has texture");
        let (x_m, y_m) = grid.geometry.cell_center(cell);
        rows.push(SampleRow {
            cell_id: cell,
            x_m,
            y_m,
            features,
            targets,
        });
    }
    SampleTable::new(n_features, rows)
}
