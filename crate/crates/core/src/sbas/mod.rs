//! Small-baseline interferogram network inversion: pair selection,
//! connectivity, design matrix, per-cell least squares, mean velocity and
//! spatiotemporal noise filtering.

mod design;
mod filter;
mod invert;
mod network;
mod stack;

pub use design::{build_design_matrix, compaction_basis, DeformationModel, DesignMatrix};
pub use filter::spatiotemporal_filter;
pub use invert::{
    invert_cell, invert_stack, mean_velocity, CellSolution, InversionConfig, InversionResult, LeastSquaresSolver,
};
pub use network::{build_pairs, check_connectivity, Connectivity};
pub use stack::{read_stack, stack_to_string, write_stack, AcquisitionSet, InterferogramStack, STACK_MAGIC};

pub const DEFAULT_MAX_BASELINE_DAYS: i64 = 24;
pub const DEFAULT_FILTER_WINDOW: usize = 5;
pub const DEFAULT_FILTER_SIGMA: f64 = 2.0;
