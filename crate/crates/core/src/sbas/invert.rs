use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::design::{build_design_matrix, compaction_basis, DeformationModel, DesignMatrix};
use super::network::check_connectivity;
use super::stack::{AcquisitionSet, InterferogramStack};
use crate::error::{Error, Result};
use crate::gridstore::{DataCube, Variable};

const DAYS_PER_YEAR: f64 = 365.0;
const RANK_TOL: f64 = 1e-10;

/// Least-squares estimate for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// Displacement per epoch relative to epoch 0 (mm); `series[0] == 0`.
    pub series: Vec<f64>,
    /// mm per meter of perpendicular baseline; 0 when not estimated.
    pub dem_coeff: f64,
    pub residual_rms: f64,
}

/// Pseudo-inverse of a full-column-rank matrix via SVD of the
/// column-equilibrated matrix.
pub(crate) fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    if n == 0 {
        return Ok(DMatrix::zeros(0, m));
    }
    if m < n {
        return Err(Error::RankDeficient { rank: m, unknowns: n });
    }
    let scale: Vec<f64> = (0..n)
        .map(|c| {
            let norm = a.column(c).norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (c, s) in scale.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > RANK_TOL * smax).count();
    if rank < n {
        return Err(Error::RankDeficient { rank, unknowns: n });
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let inv_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let mut pinv = vt.transpose() * inv_s * u.transpose();
    for (r, s) in scale.iter().enumerate() {
        pinv.row_mut(r).scale_mut(*s);
    }
    Ok(pinv)
}

/// Reusable solver for one pair network.
///
/// Displacement is solved against the displacement block of the design.
/// With DEM estimation on, the combined series `d(t) + c * (B(t) - B(0))` is
/// then fit with the deformation basis plus the baseline column and the
/// fitted `c` is removed from the series. Pair observations alone cannot
/// separate `c` from displacement, so the deformation basis carries that
/// information.
#[derive(Debug, Clone)]
pub struct LeastSquaresSolver {
    design: DesignMatrix,
    disp_block: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl LeastSquaresSolver {
    pub fn new(design: DesignMatrix) -> Result<Self> {
        let disp_block = design.displacement_block();
        let pinv = pseudo_inverse(&disp_block)?;
        if design.estimate_dem_error {
            // fail early on networks whose DEM fit can never be determined
            fit_dem(
                &vec![0.0; design.n_epochs],
                &design.baseline_offsets,
                &design.deformation_basis,
            )?;
        }
        Ok(LeastSquaresSolver {
            design,
            disp_block,
            pinv,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn solve(&self, observations: &[f64]) -> Result<CellSolution> {
        self.solve_with_basis(observations, &self.design.deformation_basis)
    }

    /// Like [`solve`](Self::solve) with a cell-specific deformation basis.
    pub fn solve_with_basis(&self, observations: &[f64], basis: &DMatrix<f64>) -> Result<CellSolution> {
        let a = &self.disp_block;
        if observations.len() != a.nrows() {
            return Err(Error::Dimension(format!(
                "{} observations for {} design rows",
                observations.len(),
                a.nrows()
            )));
        }
        let b = DVector::from_column_slice(observations);
        let x = &self.pinv * &b;
        let resid = a * &x - &b;
        let rms = if b.is_empty() {
            0.0
        } else {
            (resid.norm_squared() / b.len() as f64).sqrt()
        };
        let mut series = Vec::with_capacity(x.len() + 1);
        series.push(0.0);
        series.extend(x.iter());

        let mut dem_coeff = 0.0;
        if self.design.estimate_dem_error {
            dem_coeff = fit_dem(&series, &self.design.baseline_offsets, basis)?;
            for (s, off) in series.iter_mut().zip(&self.design.baseline_offsets).skip(1) {
                *s -= dem_coeff * off;
            }
        }
        Ok(CellSolution {
            series,
            dem_coeff,
            residual_rms: rms,
        })
    }
}

/// DEM coefficient from an OLS fit of the combined series on
/// `[basis(t) - basis(0), B(t) - B(0)]` over epochs `1..N`.
fn fit_dem(series: &[f64], baseline_offsets: &[f64], basis: &DMatrix<f64>) -> Result<f64> {
    let n = series.len();
    if basis.nrows() != n {
        return Err(Error::Dimension(format!(
            "deformation basis has {} rows for {n} epochs",
            basis.nrows()
        )));
    }
    let k = basis.ncols();
    let x = DMatrix::from_fn(n - 1, k + 1, |r, c| {
        if c < k {
            basis[(r + 1, c)] - basis[(0, c)]
        } else {
            baseline_offsets[r + 1]
        }
    });
    let y = DVector::from_iterator(n - 1, series[1..].iter().copied());
    let coef = pseudo_inverse(&x)? * y;
    Ok(coef[k])
}

/// Ordinary least-squares inversion of one cell's pair observations.
pub fn invert_cell(observations: &[f64], design: &DesignMatrix) -> Result<CellSolution> {
    LeastSquaresSolver::new(design.clone())?.solve(observations)
}

/// Slope of the OLS line through `(day, displacement)`, in mm per year.
pub fn mean_velocity(series: &[f64], dates: &[NaiveDate]) -> Result<f64> {
    if series.len() != dates.len() {
        return Err(Error::Dimension(format!("{} values for {} dates", series.len(), dates.len())));
    }
    if series.len() < 2 {
        return Err(Error::Invalid("mean velocity needs at least 2 epochs".into()));
    }
    let t: Vec<f64> = dates.iter().map(|d| (*d - dates[0]).num_days() as f64).collect();
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = series.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(series) {
        sxy += (ti - tm) * (yi - ym);
        sxx += (ti - tm) * (ti - tm);
    }
    Ok(sxy / sxx * DAYS_PER_YEAR)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub estimate_dem_error: bool,
    pub deformation_model: DeformationModel,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            estimate_dem_error: true,
            deformation_model: DeformationModel::LinearSeasonal,
        }
    }
}

/// Per-cell inversion products of a whole stack.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    /// Displacement relative to the first acquisition; masked where the
    /// cell's valid pairs do not connect every epoch.
    pub displacement: DataCube,
    pub velocity_mm_per_year: Vec<Option<f64>>,
    pub dem_coeff: Vec<Option<f64>>,
    pub residual_rms: Vec<Option<f64>>,
    pub connected: Vec<bool>,
}

fn solve_subset(
    stack: &InterferogramStack,
    acq: &AcquisitionSet,
    cfg: InversionConfig,
    obs: &[Option<f64>],
    basis: &DMatrix<f64>,
) -> Option<CellSolution> {
    let (pairs, values): (Vec<_>, Vec<_>) = stack
        .pairs()
        .iter()
        .zip(obs)
        .filter_map(|(p, o)| o.map(|v| (*p, v)))
        .unzip();
    if !check_connectivity(&pairs, acq.len()).connected {
        return None;
    }
    let design = build_design_matrix(&pairs, acq, cfg.estimate_dem_error)
        .ok()?
        .with_basis(basis.clone())
        .ok()?;
    LeastSquaresSolver::new(design).ok()?.solve(&values).ok()
}

/// Inverts every cell. Cells with all pairs valid share one precomputed
/// solver; cells with masked pairs are solved on their own sub-network.
/// `groundwater` (depth on the acquisition grid) is required by the
/// compaction deformation model when DEM error is estimated and ignored
/// otherwise.
pub fn invert_stack(
    stack: &InterferogramStack,
    cfg: InversionConfig,
    groundwater: Option<&DataCube>,
) -> Result<InversionResult> {
    let acq = stack.acquisitions();
    let grid = stack.grid()?;
    let design = build_design_matrix(stack.pairs(), acq, cfg.estimate_dem_error)?;
    let time_basis = cfg.deformation_model.time_basis(acq);
    let per_cell_basis = cfg.estimate_dem_error && time_basis.is_none();
    if per_cell_basis {
        match groundwater {
            None => {
                return Err(Error::Invalid(
                    "the compaction deformation model needs a groundwater cube".into(),
                ))
            }
            Some(gw) if gw.grid().geometry != grid.geometry || gw.grid().epochs() != grid.epochs() => {
                return Err(Error::Geometry("groundwater cube is not on the acquisition grid".into()))
            }
            Some(_) => {}
        }
    }
    let design = match &time_basis {
        Some(b) => design.with_basis(b.clone())?,
        None => design,
    };
    let full = if per_cell_basis {
        // the shared solver only needs the displacement block here
        let mut d = design.clone();
        d.estimate_dem_error = false;
        (LeastSquaresSolver::new(d)?, design)
    } else {
        (LeastSquaresSolver::new(design.clone())?, design)
    };
    let (shared, design) = full;
    let n = stack.geometry().n_cells();

    let solutions: Vec<Option<CellSolution>> = (0..n)
        .into_par_iter()
        .map(|cell| {
            let obs = stack.cell_observations(cell);
            if obs.iter().all(Option::is_none) {
                return None;
            }
            let basis = if per_cell_basis {
                compaction_basis(groundwater?.series(cell).ok()?)
            } else {
                design.deformation_basis.clone()
            };
            if obs.iter().all(Option::is_some) {
                let v: Vec<f64> = obs.into_iter().flatten().collect();
                let mut s = shared.solve(&v).ok()?;
                if per_cell_basis {
                    let c = fit_dem(&s.series, &design.baseline_offsets, &basis).ok()?;
                    for (x, off) in s.series.iter_mut().zip(&design.baseline_offsets).skip(1) {
                        *x -= c * off;
                    }
                    s.dem_coeff = c;
                }
                Some(s)
            } else {
                solve_subset(stack, acq, cfg, &obs, &basis)
            }
        })
        .collect();

    let mut velocity = Vec::with_capacity(n);
    let mut dem = Vec::with_capacity(n);
    let mut rms = Vec::with_capacity(n);
    let mut connected = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for s in solutions {
        match s {
            Some(s) => {
                velocity.push(Some(mean_velocity(&s.series, acq.dates())?));
                dem.push(cfg.estimate_dem_error.then_some(s.dem_coeff));
                rms.push(Some(s.residual_rms));
                connected.push(true);
                series.push(Some(s.series));
            }
            None => {
                velocity.push(None);
                dem.push(None);
                rms.push(None);
                connected.push(false);
                series.push(None);
            }
        }
    }
    Ok(InversionResult {
        displacement: DataCube::from_series(grid, Variable::DisplacementMm, series)?,
        velocity_mm_per_year: velocity,
        dem_coeff: dem,
        residual_rms: rms,
        connected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acq(n: usize, baselines: Option<&[f64]>) -> AcquisitionSet {
        let t0: NaiveDate = "2015-03-01".parse().unwrap();
        AcquisitionSet::new(
            (0..n).map(|k| t0 + chrono::Duration::days(12 * k as i64)).collect(),
            baselines.map_or(vec![0.0; n], |b| b.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn exactly_determined_single_pair() {
        let d = build_design_matrix(&[(0, 1)], &acq(2, None), false).unwrap();
        let s = invert_cell(&[5.0], &d).unwrap();
        assert_eq!(s.series.len(), 2);
        assert_eq!(s.series[0], 0.0);
        assert!((s.series[1] - 5.0).abs() < 1e-12);
        assert!(s.residual_rms < 1e-12);
    }

    #[test]
    fn triangle_misclosure() {
        // Normal equations [[2,-1],[-1,2]] x = [3-4, 4+7.5] -> x = (19/6, 22/3).
        let d = build_design_matrix(&[(0, 1), (1, 2), (0, 2)], &acq(3, None), false).unwrap();
        let s = invert_cell(&[3.0, 4.0, 7.5], &d).unwrap();
        assert!((s.series[1] - 19.0 / 6.0).abs() < 1e-12);
        assert!((s.series[2] - 22.0 / 3.0).abs() < 1e-12);
        // misclosure 0.5 spread evenly: residual 1/6 on each row
        assert!((s.residual_rms - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_observations() {
        let b = [0.0, 30.0, -12.0, 55.0, 9.0, -70.0];
        let pairs = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)];
        let d = build_design_matrix(&pairs, &acq(6, Some(&b)), true).unwrap();
        let s = invert_cell(&[0.0; 7], &d).unwrap();
        assert!(s.series.iter().all(|v| *v == 0.0));
        assert_eq!(s.dem_coeff, 0.0);
        assert_eq!(s.residual_rms, 0.0);
    }

    #[test]
    fn dem_separation_with_linear_basis() {
        let b = [0.0, 42.0, -17.0, 88.0, 5.0, -61.0, 23.0];
        let a = acq(7, Some(&b));
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 2), (2, 4)];
        let design = build_design_matrix(&pairs, &a, true)
            .unwrap()
            .with_basis(DeformationModel::Linear.time_basis(&a).unwrap())
            .unwrap();
        let (vel, c) = (-0.35, 0.037);
        let truth: Vec<f64> = (0..7).map(|k| vel * 12.0 * k as f64).collect();
        let obs: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| truth[j] - truth[i] + c * (b[j] - b[i]))
            .collect();
        let s = invert_cell(&obs, &design).unwrap();
        assert!((s.dem_coeff - c).abs() <= 1e-9);
        for (x, t) in s.series.iter().zip(&truth) {
            assert!((x - t).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_baselines_are_rank_deficient() {
        // equal baselines: nothing to fit the DEM term against
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
        let d = build_design_matrix(&pairs, &acq(6, Some(&[5.0; 6])), true).unwrap();
        assert!(matches!(invert_cell(&[1.0; 5], &d), Err(Error::RankDeficient { .. })));
        // fewer epochs than seasonal model plus DEM unknowns
        let d = build_design_matrix(&[(0, 1), (1, 2)], &acq(3, Some(&[0.0, 10.0, 4.0])), true).unwrap();
        assert!(matches!(invert_cell(&[1.0, 2.0], &d), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn velocity_examples() {
        let dates: Vec<NaiveDate> = acq(4, None).dates().to_vec();
        assert_eq!(mean_velocity(&[3.0; 4], &dates).unwrap(), 0.0);
        let v = mean_velocity(&[0.0, 5.0], &dates[..2]).unwrap();
        assert!((v - 5.0 / 12.0 * 365.0).abs() < 1e-9);
        assert!((v - 152.08).abs() < 0.01);
        let lin: Vec<f64> = dates
            .iter()
            .map(|d| -20.0 * (*d - dates[0]).num_days() as f64 / 365.0)
            .collect();
        assert!((mean_velocity(&lin, &dates).unwrap() + 20.0).abs() < 1e-12 * 20.0);
        assert!(mean_velocity(&[1.0], &dates[..1]).is_err());
    }
}
