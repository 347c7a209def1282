use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::cube::DataCube;
use super::text;
use super::texture::{TextureStack, N_LAYERS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub cell_id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub features: Vec<f64>,
    /// Coarse-grain percent, layers 1..10.
    pub targets: [f64; N_LAYERS],
}

/// Model-ready rows: one displacement history and one 10-layer target per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    n_features: usize,
    rows: Vec<SampleRow>,
}

impl SampleTable {
    pub fn new(n_features: usize, rows: Vec<SampleRow>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for r in &rows {
            if r.features.len() != n_features {
                return Err(Error::Dimension(format!(
                    "cell {} has {} features, expected {n_features}",
                    r.cell_id,
                    r.features.len()
                )));
            }
            if !seen.insert(r.cell_id) {
                return Err(Error::Invalid(format!("duplicate cell_id {}", r.cell_id)));
            }
            let finite = r.features.iter().chain(r.targets.iter()).all(|v| v.is_finite())
                && r.x_m.is_finite()
                && r.y_m.is_finite();
            if !finite {
                return Err(Error::Invalid(format!("non-finite value in cell {}", r.cell_id)));
            }
        }
        Ok(SampleTable { n_features, rows })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[SampleRow] {
        &self.rows
    }

    /// Rows at the given positions, in that order.
    pub fn subset(&self, idx: &[usize]) -> SampleTable {
        SampleTable {
            n_features: self.n_features,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Same rows with only the listed feature columns kept.
    pub fn select_features(&self, keep: &[usize]) -> Result<SampleTable> {
        if let Some(&bad) = keep.iter().find(|&&k| k >= self.n_features) {
            return Err(Error::Invalid(format!("feature column {bad} out of range")));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| SampleRow {
                features: keep.iter().map(|&k| r.features[k]).collect(),
                ..r.clone()
            })
            .collect();
        Ok(SampleTable {
            n_features: keep.len(),
            rows,
        })
    }

    pub fn header(&self) -> String {
        header_for(self.n_features)
    }
}

fn feature_width(n_features: usize) -> usize {
    n_features.to_string().len().max(3)
}

pub fn header_for(n_features: usize) -> String {
    let w = feature_width(n_features);
    let mut cols = vec!["cell_id".to_string(), "x_m".into(), "y_m".into()];
    cols.extend((1..=n_features).map(|i| format!("f{i:0w$}")));
    cols.extend((1..=N_LAYERS).map(|i| format!("t{i:02}")));
    cols.join(",")
}

/// One row per cell whose displacement is valid at every epoch and whose 10
/// texture layers are all defined. Features follow epoch order.
pub fn cube_to_samples(displacement: &DataCube, texture: &TextureStack) -> Result<SampleTable> {
    if displacement.geometry() != texture.geometry() {
        return Err(Error::Geometry(format!(
            "displacement grid {:?} vs texture grid {:?}",
            displacement.geometry(),
            texture.geometry()
        )));
    }
    let g = displacement.geometry();
    let rows = (0..g.n_cells())
        .filter_map(|cell| {
            let targets = texture.profile(cell)?;
            let features = displacement.series(cell).ok()?.to_vec();
            let (x_m, y_m) = g.cell_center(cell);
            Some(SampleRow {
                cell_id: cell,
                x_m,
                y_m,
                features,
                targets,
            })
        })
        .collect();
    SampleTable::new(displacement.n_epochs(), rows)
}

pub fn samples_to_string(table: &SampleTable) -> String {
    let mut out = table.header();
    out.push('\n');
    for r in &table.rows {
        let _ = write!(out, "{},{},{}", r.cell_id, text::fmt_f64(r.x_m), text::fmt_f64(r.y_m));
        for v in r.features.iter().chain(r.targets.iter()) {
            out.push(',');
            out.push_str(&text::fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_samples(table: &SampleTable, path: &Path) -> Result<()> {
    text::write_string(path, &samples_to_string(table))
}

pub fn read_samples(path: &Path) -> Result<SampleTable> {
    let s = text::read_to_string(path)?;
    parse_samples(&path.display().to_string(), &s)
}

pub fn parse_samples(path: &str, s: &str) -> Result<SampleTable> {
    let mut lines = s.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let n_cols = header.split(',').count();
    if n_cols < 3 + N_LAYERS {
        return Err(Error::parse(path, 1, "header too short"));
    }
    let n_features = n_cols - 3 - N_LAYERS;
    if header != header_for(n_features) {
        return Err(Error::parse(
            path,
            1,
            format!("header mismatch: expected `cell_id,x_m,y_m,f...,t01..t10` with {n_features} features"),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(Error::parse(
                path,
                line_no,
                format!("ragged row: {} fields, header has {n_cols}", fields.len()),
            ));
        }
        let cell_id: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad cell_id {:?}", fields[0])))?;
        let num = |k: usize| text::parse_f64(fields[k]).map_err(|m| Error::parse(path, line_no, m));
        let x_m = num(1)?;
        let y_m = num(2)?;
        let features = (3..3 + n_features).map(num).collect::<Result<Vec<_>>>()?;
        let mut targets = [0.0; N_LAYERS];
        for (l, t) in targets.iter_mut().enumerate() {
            *t = num(3 + n_features + l)?;
        }
        rows.push(SampleRow {
            cell_id,
            x_m,
            y_m,
            features,
            targets,
        });
    }
    SampleTable::new(n_features, rows).map_err(|e| e.context(path.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridstore::{Geometry, SpaceTimeGrid, Variable};

    fn row(id: usize, nf: usize) -> SampleRow {
        SampleRow {
            cell_id: id,
            x_m: 1000.0,
            y_m: 3000.0,
            features: (0..nf).map(|i| i as f64 * -0.25).collect(),
            targets: std::array::from_fn(|l| 27.44 + l as f64),
        }
    }

    #[test]
    fn header_shapes() {
        let h = header_for(132);
        assert!(h.starts_with("cell_id,x_m,y_m,f001,f002"));
        assert!(h.ends_with("f132,t01,t02,t03,t04,t05,t06,t07,t08,t09,t10"));
        assert!(header_for(3).contains("f003,t01"));
        assert!(header_for(1200).contains(",f0001,"));
    }

    #[test]
    fn single_row_roundtrip() {
        let t = SampleTable::new(4, vec![row(7, 4)]).unwrap();
        let back = parse_samples("mem", &samples_to_string(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn ragged_row_names_line() {
        let t = SampleTable::new(2, vec![row(0, 2), row(1, 2)]).unwrap();
        let mut s = samples_to_string(&t);
        s.push_str("2,0.0,0.0,1.0\n");
        let err = parse_samples("mem.csv", &s).unwrap_err().to_string();
        assert!(err.contains("mem.csv:4") && err.contains("ragged"), "{err}");
    }

    #[test]
    fn header_mismatch() {
        let s = "cell_id,x,y,f001,t01,t02,t03,t04,t05,t06,t07,t08,t09,t10\n";
        assert!(parse_samples("mem", s).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(SampleTable::new(2, vec![row(3, 2), row(3, 2)]).is_err());
        assert!(SampleTable::new(3, vec![row(3, 2)]).is_err());
    }

    fn stack(rows: usize, cols: usize) -> TextureStack {
        let g = Geometry::new(rows, cols, 2000.0, 0.0, 0.0).unwrap();
        let cells = (0..rows * cols).map(|_| Some([40.0; N_LAYERS])).collect();
        TextureStack::from_cells(g, cells).unwrap()
    }

    #[test]
    fn cube_to_samples_shapes_and_exclusion() {
        let g = Geometry::new(2, 2, 2000.0, 0.0, 0.0).unwrap();
        let grid = SpaceTimeGrid::regular(g.clone(), "2015-03-01".parse().unwrap(), 14, 3).unwrap();
        let mut cube = DataCube::from_fn(grid, Variable::DisplacementMm, |c, t| Some((c + t) as f64)).unwrap();
        let tex = stack(2, 2);
        let t = cube_to_samples(&cube, &tex).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.n_features(), 3);
        assert_eq!(t.rows()[2].features, vec![2.0, 3.0, 4.0]);
        cube.mask(1, 2);
        let t = cube_to_samples(&cube, &tex).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.rows().iter().all(|r| r.cell_id != 1));
        assert!(cube_to_samples(&cube, &stack(2, 3)).is_err());
    }
}
