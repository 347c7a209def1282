use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use super::grid::{Geometry, SpaceTimeGrid};
use super::text::{self, Lines};
use crate::error::{Error, Result};

pub const CUBE_MAGIC: &str = "SUBSIGHT-CUBE v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    DisplacementMm,
    GroundwaterFt,
    PrecipitationMm,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::DisplacementMm => "displacement_mm",
            Variable::GroundwaterFt => "groundwater_ft",
            Variable::PrecipitationMm => "precipitation_mm",
        }
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement_mm" => Ok(Variable::DisplacementMm),
            "groundwater_ft" => Ok(Variable::GroundwaterFt),
            "precipitation_mm" => Ok(Variable::PrecipitationMm),
            other => Err(Error::Invalid(format!("unknown variable {other:?}"))),
        }
    }
}

/// Masked cell x epoch array of one variable.
///
/// Storage is row-major `row -> col -> epoch`. Masked slots hold `0.0` so that
/// equality compares only valid values; they can never be read back through
/// the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    grid: SpaceTimeGrid,
    variable: Variable,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DataCube {
    /// All-valid cube filled with `fill`.
    pub fn filled(grid: SpaceTimeGrid, variable: Variable, fill: f64) -> Self {
        let n = grid.n_cells() * grid.n_epochs();
        DataCube {
            grid,
            variable,
            values: vec![fill; n],
            valid: vec![true; n],
        }
    }

    /// All-masked cube.
    pub fn masked(grid: SpaceTimeGrid, variable: Variable) -> Self {
        let n = grid.n_cells() * grid.n_epochs();
        DataCube {
            grid,
            variable,
            values: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    /// Builds a cube from `(cell, epoch) -> Option<value>`.
    pub fn from_fn(
        grid: SpaceTimeGrid,
        variable: Variable,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Result<Self> {
        let mut cube = DataCube::masked(grid, variable);
        let n_epochs = cube.grid.n_epochs();
        for cell in 0..cube.grid.n_cells() {
            for t in 0..n_epochs {
                if let Some(v) = f(cell, t) {
                    cube.set(cell, t, v)?;
                }
            }
        }
        Ok(cube)
    }

    /// Builds a cube from per-cell series; `None` masks the whole cell.
    pub fn from_series(grid: SpaceTimeGrid, variable: Variable, series: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if series.len() != grid.n_cells() {
            return Err(Error::Dimension(format!(
                "{} series for {} cells",
                series.len(),
                grid.n_cells()
            )));
        }
        let mut cube = DataCube::masked(grid, variable);
        for (cell, s) in series.into_iter().enumerate() {
            if let Some(s) = s {
                cube.set_series(cell, &s)?;
            }
        }
        Ok(cube)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &Geometry {
        &self.grid.geometry
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn n_epochs(&self) -> usize {
        self.grid.n_epochs()
    }

    fn index(&self, cell: usize, epoch: usize) -> usize {
        assert!(cell < self.n_cells() && epoch < self.n_epochs(), "cube index out of range");
        cell * self.n_epochs() + epoch
    }

    pub fn is_valid(&self, cell: usize, epoch: usize) -> bool {
        self.valid[self.index(cell, epoch)]
    }

    /// Valid value or a [`Error::Masked`] error.
    pub fn get(&self, cell: usize, epoch: usize) -> Result<f64> {
        let i = self.index(cell, epoch);
        if self.valid[i] {
            Ok(self.values[i])
        } else {
            let (r, c) = self.grid.geometry.row_col(cell);
            Err(Error::Masked(format!(
                "{} row {r} col {c} epoch {epoch}",
                self.variable
            )))
        }
    }

    pub fn value(&self, cell: usize, epoch: usize) -> Option<f64> {
        let i = self.index(cell, epoch);
        self.valid[i].then(|| self.values[i])
    }

    pub fn set(&mut self, cell: usize, epoch: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Invalid(format!("non-finite value {value} at cell {cell} epoch {epoch}")));
        }
        let i = self.index(cell, epoch);
        self.values[i] = value;
        self.valid[i] = true;
        Ok(())
    }

    pub fn mask(&mut self, cell: usize, epoch: usize) {
        let i = self.index(cell, epoch);
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn set_series(&mut self, cell: usize, series: &[f64]) -> Result<()> {
        if series.len() != self.n_epochs() {
            return Err(Error::Dimension(format!(
                "series of {} values for {} epochs",
                series.len(),
                self.n_epochs()
            )));
        }
        for (t, &v) in series.iter().enumerate() {
            self.set(cell, t, v)?;
        }
        Ok(())
    }

    pub fn cell_fully_valid(&self, cell: usize) -> bool {
        let s = cell * self.n_epochs();
        self.valid[s..s + self.n_epochs()].iter().all(|&v| v)
    }

    /// Full series of a cell; errors if any epoch is masked.
    pub fn series(&self, cell: usize) -> Result<&[f64]> {
        let s = cell * self.n_epochs();
        if let Some(t) = self.valid[s..s + self.n_epochs()].iter().position(|&v| !v) {
            return self.get(cell, t).map(|_| &[][..]);
        }
        Ok(&self.values[s..s + self.n_epochs()])
    }

    pub fn n_masked(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }
}

pub fn write_cube(cube: &DataCube, path: &Path) -> Result<()> {
    text::write_string(path, &cube_to_string(cube))
}

pub fn cube_to_string(cube: &DataCube) -> String {
    let g = cube.geometry();
    let mut out = String::new();
    out.push_str(CUBE_MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "{} {} {} {} {} {}",
        g.n_rows,
        g.n_cols,
        cube.n_epochs(),
        text::fmt_f64(g.cell_size_m),
        text::fmt_f64(g.origin_x),
        text::fmt_f64(g.origin_y)
    );
    out.push_str(cube.variable.name());
    out.push('\n');
    out.push_str(&fmt_dates(cube.grid.epochs()));
    out.push('\n');
    for cell in 0..cube.n_cells() {
        let toks: Vec<String> = (0..cube.n_epochs())
            .map(|t| text::fmt_opt(cube.value(cell, t)))
            .collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_cube(path: &Path) -> Result<DataCube> {
    let s = text::read_to_string(path)?;
    parse_cube(path, &s)
}

pub(crate) fn fmt_dates(dates: &[NaiveDate]) -> String {
    dates
        .iter()
        .map(|d| d.format("%Y-%m-%d").to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_dates(lines: &Lines<'_>, line: &str, expected: usize) -> Result<Vec<NaiveDate>> {
    let dates = line
        .split_whitespace()
        .map(|tok| {
            NaiveDate::parse_from_str(tok, "%Y-%m-%d")
                .map_err(|_| lines.err(format!("bad ISO date {tok:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dates.len() != expected {
        return Err(lines.err(format!("expected {expected} dates, found {}", dates.len())));
    }
    if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
        return Err(lines.err(format!("non-increasing dates: {} then {}", w[0], w[1])));
    }
    Ok(dates)
}

fn parse_cube(path: &Path, s: &str) -> Result<DataCube> {
    let mut lines = Lines::new(path, s);
    lines.expect_magic(CUBE_MAGIC)?;
    let dims = lines.next_line("dimension line")?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() != 6 {
        return Err(lines.err("dimension line needs `rows cols epochs cell_m origin_x origin_y`"));
    }
    let rows = text::parse_usize(&lines, toks[0], "rows")?;
    let cols = text::parse_usize(&lines, toks[1], "cols")?;
    let epochs = text::parse_usize(&lines, toks[2], "epochs")?;
    let cell = text::parse_header_f64(&lines, toks[3], "cell_m")?;
    let ox = text::parse_header_f64(&lines, toks[4], "origin_x")?;
    let oy = text::parse_header_f64(&lines, toks[5], "origin_y")?;
    let geometry = Geometry::new(rows, cols, cell, ox, oy).map_err(|e| lines.err(e.to_string()))?;
    let n_values = geometry
        .n_cells()
        .checked_mul(epochs)
        .ok_or_else(|| lines.err("dimension overflow"))?;

    let variable: Variable = lines
        .next_line("variable line")?
        .trim()
        .parse()
        .map_err(|e: Error| lines.err(e.to_string()))?;
    let date_line = lines.next_line("date line")?;
    let dates = parse_dates(&lines, date_line, epochs)?;
    let grid = SpaceTimeGrid::new(geometry, dates).map_err(|e| lines.err(e.to_string()))?;

    let path_s = lines.path().to_string();
    let mut cube = DataCube::masked(grid, variable);
    let mut count = 0usize;
    for tok in lines.rest_tokens() {
        if count < n_values {
            let v = text::parse_opt(tok).map_err(|m| Error::parse(&path_s, 0, m))?;
            if let Some(v) = v {
                cube.values[count] = v;
                cube.valid[count] = true;
            }
        }
        count += 1;
    }
    if count != n_values {
        return Err(Error::Dimension(format!(
            "{path_s}: header declares {rows}x{cols}x{epochs} = {n_values} values, found {count} tokens"
        )));
    }
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize, epochs: usize) -> SpaceTimeGrid {
        let g = Geometry::new(rows, cols, 2000.0, 0.0, 0.0).unwrap();
        SpaceTimeGrid::regular(g, "2015-03-01".parse().unwrap(), 14, epochs).unwrap()
    }

    #[test]
    fn single_value_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.cube");
        let cube = DataCube::filled(grid(1, 1, 1), Variable::DisplacementMm, 0.0);
        write_cube(&cube, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().nth(4), Some("0.0"));
        assert_eq!(text.lines().count(), 5);
        assert_eq!(read_cube(&p).unwrap(), cube);
    }

    #[test]
    fn mask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.cube");
        let mut cube = DataCube::from_fn(grid(2, 2, 3), Variable::GroundwaterFt, |c, t| {
            Some((c * 3 + t) as f64 * 1.5)
        })
        .unwrap();
        cube.mask(1, 2);
        cube.mask(3, 0);
        write_cube(&cube, &p).unwrap();
        let back = read_cube(&p).unwrap();
        assert_eq!(back.n_masked(), 2);
        assert!(!back.is_valid(1, 2) && !back.is_valid(3, 0));
        assert_eq!(back, cube);
    }

    #[test]
    fn chowchilla_mean_token_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cube");
        let cube = DataCube::filled(grid(1, 1, 1), Variable::DisplacementMm, -22.47);
        write_cube(&cube, &p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("-22.47"));
        assert_eq!(read_cube(&p).unwrap().get(0, 0).unwrap(), -22.47);
    }

    #[test]
    fn token_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.cube");
        std::fs::write(
            &p,
            "SUBSIGHT-CUBE v1\n2 2 2 2000.0 0.0 0.0\ndisplacement_mm\n2015-03-01 2015-03-15\n1 2 3 4 5 6 7\n",
        )
        .unwrap();
        assert!(matches!(read_cube(&p), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_increasing_dates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.cube");
        std::fs::write(
            &p,
            "SUBSIGHT-CUBE v1\n1 1 2 2000.0 0.0 0.0\ndisplacement_mm\n2015-03-01 2015-03-01\n1 2\n",
        )
        .unwrap();
        let err = read_cube(&p).unwrap_err().to_string();
        assert!(err.contains("non-increasing"), "{err}");
    }

    #[test]
    fn bad_magic_and_variable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.cube");
        std::fs::write(&p, "SUBSIGHT-CUBE v2\n").unwrap();
        assert!(read_cube(&p).is_err());
        std::fs::write(&p, "SUBSIGHT-CUBE v1\n1 1 1 2000.0 0.0 0.0\nsnow_mm\n2015-03-01\n1\n").unwrap();
        assert!(read_cube(&p).is_err());
    }

    #[test]
    fn masked_reads_are_errors() {
        let mut cube = DataCube::filled(grid(1, 2, 2), Variable::DisplacementMm, 1.0);
        cube.mask(1, 1);
        assert!(matches!(cube.get(1, 1), Err(Error::Masked(_))));
        assert!(cube.series(1).is_err());
        assert_eq!(cube.series(0).unwrap(), &[1.0, 1.0]);
        assert!(cube.set(0, 0, f64::NAN).is_err());
    }
}
