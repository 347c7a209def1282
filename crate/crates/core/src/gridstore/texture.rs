use std::fmt::Write as _;
use std::path::Path;

use super::grid::Geometry;
use super::text::{self, Lines};
use crate::error::{Error, Result};

pub const TEXTURE_MAGIC: &str = "SUBSIGHT-TEX v1";
pub const N_LAYERS: usize = 10;

/// Per-cell coarse-grain percent for the 10 model layers. Layer-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureStack {
    geometry: Geometry,
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl TextureStack {
    pub fn undefined(geometry: Geometry) -> Self {
        let n = geometry.n_cells() * N_LAYERS;
        TextureStack {
            geometry,
            values: vec![0.0; n],
            defined: vec![false; n],
        }
    }

    /// Builds a stack from per-cell layer profiles; `None` leaves the cell undefined.
    pub fn from_cells(geometry: Geometry, cells: Vec<Option<[f64; N_LAYERS]>>) -> Result<Self> {
        if cells.len() != geometry.n_cells() {
            return Err(Error::Dimension(format!(
                "{} profiles for {} cells",
                cells.len(),
                geometry.n_cells()
            )));
        }
        let mut tex = TextureStack::undefined(geometry);
        for (cell, p) in cells.into_iter().enumerate() {
            if let Some(p) = p {
                for (layer, v) in p.into_iter().enumerate() {
                    tex.set(cell, layer, v)?;
                }
            }
        }
        Ok(tex)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn index(&self, cell: usize, layer: usize) -> usize {
        assert!(layer < N_LAYERS && cell < self.geometry.n_cells(), "texture index out of range");
        layer * self.geometry.n_cells() + cell
    }

    pub fn set(&mut self, cell: usize, layer: usize, pct: f64) -> Result<()> {
        if !(0.0..=100.0).contains(&pct) {
            return Err(Error::Invalid(format!(
                "coarse-grain percent {pct} outside [0, 100] at cell {cell} layer {}",
                layer + 1
            )));
        }
        let i = self.index(cell, layer);
        self.values[i] = pct;
        self.defined[i] = true;
        Ok(())
    }

    pub fn clear(&mut self, cell: usize, layer: usize) {
        let i = self.index(cell, layer);
        self.values[i] = 0.0;
        self.defined[i] = false;
    }

    pub fn value(&self, cell: usize, layer: usize) -> Option<f64> {
        let i = self.index(cell, layer);
        self.defined[i].then(|| self.values[i])
    }

    pub fn get(&self, cell: usize, layer: usize) -> Result<f64> {
        self.value(cell, layer)
            .ok_or_else(|| Error::Masked(format!("texture cell {cell} layer {}", layer + 1)))
    }

    /// All 10 layers, when every one is defined.
    pub fn profile(&self, cell: usize) -> Option<[f64; N_LAYERS]> {
        let mut out = [0.0; N_LAYERS];
        for (layer, o) in out.iter_mut().enumerate() {
            *o = self.value(cell, layer)?;
        }
        Some(out)
    }

    /// Mean coarse-grain percent over the 10 layers.
    pub fn mean_percent(&self, cell: usize) -> Option<f64> {
        self.profile(cell).map(|p| p.iter().sum::<f64>() / N_LAYERS as f64)
    }

    pub fn n_defined_cells(&self) -> usize {
        (0..self.geometry.n_cells()).filter(|&c| self.profile(c).is_some()).count()
    }
}

pub fn texture_to_string(tex: &TextureStack) -> String {
    let g = &tex.geometry;
    let mut out = String::new();
    out.push_str(TEXTURE_MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "{} {} {} {} {}",
        g.n_rows,
        g.n_cols,
        text::fmt_f64(g.cell_size_m),
        text::fmt_f64(g.origin_x),
        text::fmt_f64(g.origin_y)
    );
    for layer in 0..N_LAYERS {
        for r in 0..g.n_rows {
            let toks: Vec<String> = (0..g.n_cols)
                .map(|c| text::fmt_opt(tex.value(g.cell_id(r, c), layer)))
                .collect();
            out.push_str(&toks.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write_texture(tex: &TextureStack, path: &Path) -> Result<()> {
    text::write_string(path, &texture_to_string(tex))
}

pub fn read_texture(path: &Path) -> Result<TextureStack> {
    let s = text::read_to_string(path)?;
    let mut lines = Lines::new(path, &s);
    lines.expect_magic(TEXTURE_MAGIC)?;
    let dims = lines.next_line("dimension line")?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() != 5 {
        return Err(lines.err("dimension line needs `rows cols cell_m origin_x origin_y`"));
    }
    let rows = text::parse_usize(&lines, toks[0], "rows")?;
    let cols = text::parse_usize(&lines, toks[1], "cols")?;
    let cell = text::parse_header_f64(&lines, toks[2], "cell_m")?;
    let ox = text::parse_header_f64(&lines, toks[3], "origin_x")?;
    let oy = text::parse_header_f64(&lines, toks[4], "origin_y")?;
    let geometry = Geometry::new(rows, cols, cell, ox, oy).map_err(|e| lines.err(e.to_string()))?;
    let n_values = geometry
        .n_cells()
        .checked_mul(N_LAYERS)
        .ok_or_else(|| lines.err("dimension overflow"))?;
    let path_s = lines.path().to_string();
    let mut tex = TextureStack::undefined(geometry);
    let mut count = 0usize;
    for tok in lines.rest_tokens() {
        if count < n_values {
            if let Some(v) = text::parse_opt(tok).map_err(|m| Error::parse(&path_s, 0, m))? {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::parse(&path_s, 0, format!("percent {v} outside [0, 100]")));
                }
                tex.values[count] = v;
                tex.defined[count] = true;
            }
        }
        count += 1;
    }
    if count != n_values {
        return Err(Error::Dimension(format!(
            "{path_s}: header declares {rows}x{cols}x{N_LAYERS} = {n_values} values, found {count} tokens"
        )));
    }
    Ok(tex)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_percent() {
        let g = Geometry::new(1, 1, 1609.344, 0.0, 0.0).unwrap();
        let mut t = TextureStack::undefined(g);
        assert!(t.set(0, 0, 100.5).is_err());
        assert!(t.set(0, 0, -0.1).is_err());
        assert!(t.set(0, 9, 100.0).is_ok());
        assert!(t.profile(0).is_none());
    }

    #[test]
    fn roundtrip_with_undefined() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tex");
        let g = Geometry::new(2, 3, 1609.344, -10.0, 5.0).unwrap();
        let cells = (0..6)
            .map(|c| (c != 4).then(|| std::array::from_fn(|l| (c * 10 + l) as f64 * 0.7)))
            .collect();
        let tex = TextureStack::from_cells(g, cells).unwrap();
        write_texture(&tex, &p).unwrap();
        let back = read_texture(&p).unwrap();
        assert_eq!(back, tex);
        assert_eq!(back.n_defined_cells(), 5);
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 2 + 20);
    }
}
