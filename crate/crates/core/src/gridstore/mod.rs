//! Spatiotemporal data model and the portable text formats for cubes,
//! texture stacks and sample tables.

mod cube;
mod grid;
mod samples;
pub(crate) mod text;
mod texture;

pub use cube::{cube_to_string, read_cube, write_cube, DataCube, Variable, CUBE_MAGIC};
pub(crate) use cube::{fmt_dates, parse_dates};
pub use grid::{Geometry, SpaceTimeGrid, DEFAULT_CELL_SIZE_M, DEFAULT_EPOCH_SPACING_DAYS};
pub use samples::{
    cube_to_samples, header_for, parse_samples, read_samples, samples_to_string, write_samples, SampleRow,
    SampleTable,
};
pub use texture::{read_texture, texture_to_string, write_texture, TextureStack, N_LAYERS, TEXTURE_MAGIC};
