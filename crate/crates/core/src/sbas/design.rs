use nalgebra::DMatrix;

use super::network::check_connectivity;
use super::stack::AcquisitionSet;
use crate::error::{Error, Result};

const DAYS_PER_YEAR: f64 = 365.25;

/// Temporal model used to separate DEM error from displacement.
///
/// Pair observations only constrain `d(t) + c * B(t)`, so the DEM coefficient
/// `c` is estimated by fitting that combined series with a deformation model
/// plus a baseline term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeformationModel {
    /// Constant velocity.
    Linear,
    /// Constant velocity plus an annual sinusoid.
    LinearSeasonal,
    /// Head change and preconsolidation decline from a groundwater cube.
    Compaction,
}

impl DeformationModel {
    pub fn name(self) -> &'static str {
        match self {
            DeformationModel::Linear => "linear",
            DeformationModel::LinearSeasonal => "linear_seasonal",
            DeformationModel::Compaction => "compaction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(DeformationModel::Linear),
            "linear_seasonal" => Some(DeformationModel::LinearSeasonal),
            "compaction" => Some(DeformationModel::Compaction),
            _ => None,
        }
    }

    /// Basis columns (epochs x k) for the date-only models.
    pub fn time_basis(self, acquisitions: &AcquisitionSet) -> Option<DMatrix<f64>> {
        let d = acquisitions.dates();
        let years: Vec<f64> = d
            .iter()
            .map(|x| (*x - d[0]).num_days() as f64 / DAYS_PER_YEAR)
            .collect();
        let w = 2.0 * std::f64::consts::PI;
        match self {
            DeformationModel::Linear => Some(DMatrix::from_fn(d.len(), 1, |r, _| years[r])),
            DeformationModel::LinearSeasonal => Some(DMatrix::from_fn(d.len(), 3, |r, c| match c {
                0 => years[r],
                1 => (w * years[r]).sin(),
                _ => (w * years[r]).cos(),
            })),
            DeformationModel::Compaction => None,
        }
    }
}

/// Basis columns for the compaction model from a groundwater-depth series:
/// head change `h(t) - h(0)` and decline below the running preconsolidation
/// head `h(0) - min_{s<=t} h(s)`.
pub fn compaction_basis(depth_ft: &[f64]) -> DMatrix<f64> {
    let n = depth_ft.len();
    let h0 = -depth_ft.first().copied().unwrap_or(0.0);
    let mut precon = h0;
    let mut m = DMatrix::zeros(n, 2);
    for (t, d) in depth_ft.iter().enumerate() {
        let h = -d;
        precon = precon.min(h);
        m[(t, 0)] = h - h0;
        m[(t, 1)] = h0 - precon;
    }
    m
}

/// SBAS design matrix. Unknowns are the displacements at epochs `1..N`
/// (epoch 0 is the zero reference) followed, when enabled, by one DEM-error
/// coefficient. A pair `(i, j)` contributes `+1` at column `j - 1`, `-1` at
/// column `i - 1` and `B(j) - B(i)` in the DEM column.
///
/// With the DEM column the matrix alone is always rank-deficient (the DEM
/// column is a combination of the displacement columns); the DEM estimate
/// then comes from `deformation_basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub n_epochs: usize,
    pub estimate_dem_error: bool,
    /// Perpendicular baseline of each epoch relative to epoch 0.
    pub baseline_offsets: Vec<f64>,
    /// Deformation basis, epochs x k. Used only when estimating DEM error.
    pub deformation_basis: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_unknowns(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.matrix.row(r).iter().copied().collect()
    }

    /// The displacement-only block (DEM column dropped).
    pub fn displacement_block(&self) -> DMatrix<f64> {
        self.matrix.columns(0, self.n_epochs - 1).into_owned()
    }

    pub fn with_basis(mut self, basis: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != self.n_epochs {
            return Err(Error::Dimension(format!(
                "deformation basis has {} rows for {} epochs",
                basis.nrows(),
                self.n_epochs
            )));
        }
        self.deformation_basis = basis;
        Ok(self)
    }
}

pub fn build_design_matrix(
    pairs: &[(usize, usize)],
    acquisitions: &AcquisitionSet,
    estimate_dem_error: bool,
) -> Result<DesignMatrix> {
    let n = acquisitions.len();
    if n == 0 {
        return Err(Error::Invalid("no acquisitions".into()));
    }
    if let Some(&(i, j)) = pairs.iter().find(|(i, j)| j <= i || *j >= n) {
        return Err(Error::Invalid(format!("invalid pair ({i}, {j}) for {n} epochs")));
    }
    let conn = check_connectivity(pairs, n);
    if !conn.connected {
        return Err(Error::Disconnected {
            components: conn.n_components,
            epochs: n,
        });
    }
    let cols = n - 1 + usize::from(estimate_dem_error);
    let b = acquisitions.baselines_m();
    let mut m = DMatrix::zeros(pairs.len(), cols);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        m[(r, j - 1)] = 1.0;
        if i > 0 {
            m[(r, i - 1)] = -1.0;
        }
        if estimate_dem_error {
            m[(r, n - 1)] = b[j] - b[i];
        }
    }
    let basis = DeformationModel::LinearSeasonal
        .time_basis(acquisitions)
        .expect("date-only model");
    Ok(DesignMatrix {
        matrix: m,
        n_epochs: n,
        estimate_dem_error,
        baseline_offsets: b.iter().map(|x| x - b[0]).collect(),
        deformation_basis: basis,
    })
}
