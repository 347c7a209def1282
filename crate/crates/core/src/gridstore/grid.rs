use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Planar raster geometry. Cell `(row, col)` has its center at
/// `(origin_x + (col + 0.5) * cell_size_m, origin_y + (row + 0.5) * cell_size_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_size_m: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

pub const DEFAULT_CELL_SIZE_M: f64 = 2000.0;
pub const DEFAULT_EPOCH_SPACING_DAYS: i64 = 14;

impl Geometry {
    pub fn new(n_rows: usize, n_cols: usize, cell_size_m: f64, origin_x: f64, origin_y: f64) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Invalid(format!("grid must be at least 1x1, got {n_rows}x{n_cols}")));
        }
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(Error::Invalid(format!("cell_size_m must be > 0, got {cell_size_m}")));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Invalid("grid origin must be finite".into()));
        }
        n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Error::Dimension(format!("{n_rows}x{n_cols} cells overflow")))?;
        Ok(Geometry {
            n_rows,
            n_cols,
            cell_size_m,
            origin_x,
            origin_y,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn cell_id(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.n_cols, cell % self.n_cols)
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (r, c) = self.row_col(cell);
        (
            self.origin_x + (c as f64 + 0.5) * self.cell_size_m,
            self.origin_y + (r as f64 + 0.5) * self.cell_size_m,
        )
    }

    /// `(min_x, min_y, max_x, max_y)` of the outer cell edges.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.n_cols as f64 * self.cell_size_m,
            self.origin_y + self.n_rows as f64 * self.cell_size_m,
        )
    }
}

/// Raster geometry plus the acquisition-date axis shared by every cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    pub geometry: Geometry,
    epochs: Vec<NaiveDate>,
}

impl SpaceTimeGrid {
    pub fn new(geometry: Geometry, epochs: Vec<NaiveDate>) -> Result<Self> {
        if epochs.is_empty() {
            return Err(Error::Invalid("a grid needs at least one epoch".into()));
        }
        if let Some(w) = epochs.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(format!(
                "epoch dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        geometry
            .n_cells()
            .checked_mul(epochs.len())
            .ok_or_else(|| Error::Dimension("cells x epochs overflows".into()))?;
        Ok(SpaceTimeGrid { geometry, epochs })
    }

    /// Regularly spaced epochs starting at `start`.
    pub fn regular(geometry: Geometry, start: NaiveDate, spacing_days: i64, n_epochs: usize) -> Result<Self> {
        if spacing_days <= 0 {
            return Err(Error::Invalid(format!("epoch spacing must be > 0 days, got {spacing_days}")));
        }
        let epochs = (0..n_epochs)
            .map(|k| start + chrono::Duration::days(spacing_days * k as i64))
            .collect();
        Self::new(geometry, epochs)
    }

    /// Checks the declared regular spacing.
    pub fn with_declared_spacing(self, spacing_days: i64) -> Result<Self> {
        match self.epoch_spacing_days() {
            Some(d) if d == spacing_days => Ok(self),
            _ if self.epochs.len() == 1 => Ok(self),
            _ => Err(Error::Invalid(format!(
                "consecutive epochs are not exactly {spacing_days} days apart"
            ))),
        }
    }

    pub fn epochs(&self) -> &[NaiveDate] {
        &self.epochs
    }

    pub fn n_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn n_cells(&self) -> usize {
        self.geometry.n_cells()
    }

    /// Days since the first epoch.
    pub fn day_offsets(&self) -> Vec<f64> {
        let t0 = self.epochs[0];
        self.epochs.iter().map(|d| (*d - t0).num_days() as f64).collect()
    }

    /// Common spacing in days when every consecutive pair is equally spaced.
    pub fn epoch_spacing_days(&self) -> Option<i64> {
        let mut diffs = self.epochs.windows(2).map(|w| (w[1] - w[0]).num_days());
        let first = diffs.next()?;
        diffs.all(|d| d == first).then_some(first)
    }

    pub fn with_epochs(&self, epochs: Vec<NaiveDate>) -> Result<Self> {
        Self::new(self.geometry.clone(), epochs)
    }
}
