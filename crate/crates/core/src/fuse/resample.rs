use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gridstore::{DataCube, Geometry, SpaceTimeGrid, TextureStack, N_LAYERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialMethod {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemporalMethod {
    #[default]
    Linear,
    Nearest,
}

impl FromStr for SpatialMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(SpatialMethod::Bilinear),
            "nearest" => Ok(SpatialMethod::Nearest),
            _ => Err(Error::Invalid(format!("unknown spatial method `{s}` (bilinear|nearest)"))),
        }
    }
}

impl FromStr for TemporalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(TemporalMethod::Linear),
            "nearest" => Ok(TemporalMethod::Nearest),
            _ => Err(Error::Invalid(format!("unknown temporal method `{s}` (linear|nearest)"))),
        }
    }
}

impl SpatialMethod {
    pub fn name(self) -> &'static str {
        match self {
            SpatialMethod::Bilinear => "bilinear",
            SpatialMethod::Nearest => "nearest",
        }
    }
}

impl TemporalMethod {
    pub fn name(self) -> &'static str {
        match self {
            TemporalMethod::Linear => "linear",
            TemporalMethod::Nearest => "nearest",
        }
    }
}

/// Target grid and interpolation methods for a fusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleSpec {
    pub target: SpaceTimeGrid,
    pub spatial: SpatialMethod,
    pub temporal: TemporalMethod,
}

impl ResampleSpec {
    pub fn new(target: SpaceTimeGrid) -> Self {
        ResampleSpec {
            target,
            spatial: SpatialMethod::default(),
            temporal: TemporalMethod::default(),
        }
    }
}

/// Fractional index of `v` along one axis in source-center units, or `None`
/// when it lies outside the span of source centers.
fn bracket(v: f64, origin: f64, cell: f64, n: usize) -> Option<[(usize, f64); 2]> {
    let f = (v - origin) / cell - 0.5;
    let last = (n - 1) as f64;
    if !(0.0..=last).contains(&f) {
        return None;
    }
    let i0 = (f.floor() as usize).min(n - 1);
    let t = f - i0 as f64;
    let i1 = (i0 + 1).min(n - 1);
    Some([(i0, 1.0 - t), (i1, t)])
}

/// Source cells and weights contributing to the point `(x, y)`. Zero
/// weights are dropped so exact hits pass values through unchanged.
fn weights(src: &Geometry, x: f64, y: f64, method: SpatialMethod) -> Option<Vec<(usize, f64)>> {
    match method {
        SpatialMethod::Bilinear => {
            let cx = bracket(x, src.origin_x, src.cell_size_m, src.n_cols)?;
            let ry = bracket(y, src.origin_y, src.cell_size_m, src.n_rows)?;
            let mut w = Vec::with_capacity(4);
            for (r, wr) in ry {
                for (c, wc) in cx {
                    let wt = wr * wc;
                    if wt != 0.0 {
                        w.push((src.cell_id(r, c), wt));
                    }
                }
            }
            Some(w)
        }
        SpatialMethod::Nearest => {
            let fc = ((x - src.origin_x) / src.cell_size_m).floor();
            let fr = ((y - src.origin_y) / src.cell_size_m).floor();
            if fc < 0.0 || fr < 0.0 || fc >= src.n_cols as f64 || fr >= src.n_rows as f64 {
                return None;
            }
            Some(vec![(src.cell_id(fr as usize, fc as usize), 1.0)])
        }
    }
}

fn check_overlap(src: &Geometry, dst: &Geometry) -> Result<()> {
    let (a0, b0, a1, b1) = src.extent();
    let (c0, d0, c1, d1) = dst.extent();
    if a0 < c1 && c0 < a1 && b0 < d1 && d0 < b1 {
        Ok(())
    } else {
        Err(Error::Geometry(format!(
            "source extent {:?} does not overlap target extent {:?}",
            src.extent(),
            dst.extent()
        )))
    }
}

/// Blends `value(src_cell)` with the weights; masked if any contributor is.
fn blend(w: &[(usize, f64)], value: impl Fn(usize) -> Option<f64>) -> Option<f64> {
    let mut acc = 0.0;
    for &(c, wt) in w {
        acc += wt * value(c)?;
    }
    Some(acc)
}

/// Resamples every epoch of `cube` onto `target`. Target cells whose
/// contributing source cells are masked or out of bounds are masked.
pub fn resample_spatial(cube: &DataCube, target: &Geometry, method: SpatialMethod) -> Result<DataCube> {
    let src = cube.geometry();
    let grid = SpaceTimeGrid::new(target.clone(), cube.grid().epochs().to_vec())?;
    if src == target {
        return Ok(cube.clone());
    }
    check_overlap(src, target)?;
    let n_epochs = cube.n_epochs();
    let series: Vec<Option<Vec<Option<f64>>>> = (0..target.n_cells())
        .into_par_iter()
        .map(|cell| {
            let (x, y) = target.cell_center(cell);
            let w = weights(src, x, y, method)?;
            Some((0..n_epochs).map(|t| blend(&w, |c| cube.value(c, t))).collect())
        })
        .collect();
    DataCube::from_fn(grid, cube.variable(), |cell, t| series[cell].as_ref().and_then(|s| s[t]))
}

/// Texture counterpart of [`resample_spatial`], applied layer by layer.
pub fn resample_texture(tex: &TextureStack, target: &Geometry, method: SpatialMethod) -> Result<TextureStack> {
    let src = tex.geometry();
    if src == target {
        return Ok(tex.clone());
    }
    check_overlap(src, target)?;
    let mut out = TextureStack::undefined(target.clone());
    for cell in 0..target.n_cells() {
        let (x, y) = target.cell_center(cell);
        let Some(w) = weights(src, x, y, method) else {
            continue;
        };
        for layer in 0..N_LAYERS {
            if let Some(v) = blend(&w, |c| tex.value(c, layer)) {
                // clamp guards against rounding just past the valid range
                out.set(cell, layer, v.clamp(0.0, 100.0))?;
            }
        }
    }
    Ok(out)
}

/// Source epoch indices and weights for one target date.
fn temporal_weights(src: &[NaiveDate], t: NaiveDate, method: TemporalMethod) -> Result<Vec<(usize, f64)>> {
    let (first, last) = (src[0], src[src.len() - 1]);
    if t < first || t > last {
        return Err(Error::Invalid(format!(
            "extrapolation requested: {t} outside source epochs {first}..{last}"
        )));
    }
    let hi = src.partition_point(|d| *d < t);
    if src[hi] == t {
        return Ok(vec![(hi, 1.0)]);
    }
    let lo = hi - 1;
    let span = (src[hi] - src[lo]).num_days() as f64;
    let a = (t - src[lo]).num_days() as f64 / span;
    Ok(match method {
        TemporalMethod::Linear => vec![(lo, 1.0 - a), (hi, a)],
        // ties go to the earlier epoch
        TemporalMethod::Nearest if a <= 0.5 => vec![(lo, 1.0)],
        TemporalMethod::Nearest => vec![(hi, 1.0)],
    })
}

/// Interpolates every cell onto `epochs`; a target epoch is masked when
/// either bracketing source epoch is masked. No extrapolation.
pub fn resample_temporal(cube: &DataCube, epochs: &[NaiveDate], method: TemporalMethod) -> Result<DataCube> {
    let grid = cube.grid().with_epochs(epochs.to_vec())?;
    if epochs == cube.grid().epochs() {
        return Ok(cube.clone());
    }
    let w: Vec<Vec<(usize, f64)>> = epochs
        .iter()
        .map(|t| temporal_weights(cube.grid().epochs(), *t, method))
        .collect::<Result<_>>()?;
    DataCube::from_fn(grid, cube.variable(), |cell, t| blend(&w[t], |e| cube.value(cell, e)))
}

/// Spatial then temporal resampling onto the spec's target grid.
pub fn resample_cube(cube: &DataCube, spec: &ResampleSpec) -> Result<DataCube> {
    let c = resample_spatial(cube, &spec.target.geometry, spec.spatial)?;
    resample_temporal(&c, spec.target.epochs(), spec.temporal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridstore::Variable;
    use proptest::prelude::*;

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    fn cube(geom: Geometry, days: &[i64], values: &[f64]) -> DataCube {
        let grid = SpaceTimeGrid::new(geom, days.iter().map(|d| day(*d)).collect()).unwrap();
        let n = days.len();
        DataCube::from_fn(grid, Variable::DisplacementMm, |c, t| Some(values[c * n + t])).unwrap()
    }

    fn two_by_two() -> DataCube {
        // centers at x,y in {1, 3}; row 0 holds 0,10 and row 1 holds 20,30
        cube(Geometry::new(2, 2, 2.0, 0.0, 0.0).unwrap(), &[0], &[0.0, 10.0, 20.0, 30.0])
    }

    #[test]
    fn identity_spatial_is_passthrough() {
        let mut c = two_by_two();
        c.mask(3, 0);
        let out = resample_spatial(&c, c.geometry(), SpatialMethod::Bilinear).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn center_of_four_is_mean() {
        // single target cell whose center is (2, 2)
        let target = Geometry::new(1, 1, 2.0, 1.0, 1.0).unwrap();
        let out = resample_spatial(&two_by_two(), &target, SpatialMethod::Bilinear).unwrap();
        assert_eq!(out.get(0, 0).unwrap(), 15.0);
    }

    #[test]
    fn quarter_along_edge() {
        // center (1.5, 1): a quarter of the way from the 0 to the 10 center
        let target = Geometry::new(1, 1, 1.0, 1.0, 0.5).unwrap();
        let out = resample_spatial(&two_by_two(), &target, SpatialMethod::Bilinear).unwrap();
        assert!((out.get(0, 0).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn masked_or_outside_neighbors_mask_target() {
        let mut c = two_by_two();
        c.mask(1, 0);
        let target = Geometry::new(1, 1, 2.0, 1.0, 1.0).unwrap();
        let out = resample_spatial(&c, &target, SpatialMethod::Bilinear).unwrap();
        assert!(!out.is_valid(0, 0));
        // center (0.5, 0.5) lies outside the span of source centers
        let target = Geometry::new(1, 1, 1.0, 0.0, 0.0).unwrap();
        let out = resample_spatial(&two_by_two(), &target, SpatialMethod::Bilinear).unwrap();
        assert!(!out.is_valid(0, 0));
        let out = resample_spatial(&two_by_two(), &target, SpatialMethod::Nearest).unwrap();
        assert_eq!(out.get(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn nearest_picks_closest_center() {
        let target = Geometry::new(1, 1, 0.5, 2.5, 0.5).unwrap();
        let out = resample_spatial(&two_by_two(), &target, SpatialMethod::Nearest).unwrap();
        assert_eq!(out.get(0, 0).unwrap(), 10.0);
    }

    #[test]
    fn disjoint_extents_error() {
        let target = Geometry::new(2, 2, 2.0, 100.0, 0.0).unwrap();
        assert!(matches!(
            resample_spatial(&two_by_two(), &target, SpatialMethod::Bilinear),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn temporal_midpoint_and_extrapolation() {
        let c = cube(Geometry::new(1, 1, 1.0, 0.0, 0.0).unwrap(), &[0, 14], &[0.0, 10.0]);
        let out = resample_temporal(&c, &[day(7)], TemporalMethod::Linear).unwrap();
        assert_eq!(out.get(0, 0).unwrap(), 5.0);
        let out = resample_temporal(&c, &[day(7), day(8)], TemporalMethod::Nearest).unwrap();
        assert_eq!(out.series(0).unwrap(), &[0.0, 10.0]);
        assert!(resample_temporal(&c, &[day(21)], TemporalMethod::Linear).is_err());
        let same = resample_temporal(&c, c.grid().epochs(), TemporalMethod::Linear).unwrap();
        assert_eq!(same, c);
    }

    #[test]
    fn temporal_bracket_mask_propagates() {
        let mut c = cube(Geometry::new(1, 1, 1.0, 0.0, 0.0).unwrap(), &[0, 14, 28], &[0.0, 10.0, 20.0]);
        c.mask(0, 2);
        let out = resample_temporal(&c, &[day(0), day(7), day(20), day(28)], TemporalMethod::Linear).unwrap();
        assert_eq!(out.value(0, 0), Some(0.0));
        assert_eq!(out.value(0, 1), Some(5.0));
        assert_eq!(out.value(0, 2), None);
        assert_eq!(out.value(0, 3), None);
    }

    #[test]
    fn texture_identity_and_blend() {
        let g = Geometry::new(2, 2, 2.0, 0.0, 0.0).unwrap();
        let tex = TextureStack::from_cells(
            g.clone(),
            vec![Some([0.0; N_LAYERS]), Some([10.0; N_LAYERS]), Some([20.0; N_LAYERS]), Some([30.0; N_LAYERS])],
        )
        .unwrap();
        assert_eq!(resample_texture(&tex, &g, SpatialMethod::Bilinear).unwrap(), tex);
        let target = Geometry::new(1, 1, 2.0, 1.0, 1.0).unwrap();
        let out = resample_texture(&tex, &target, SpatialMethod::Bilinear).unwrap();
        assert_eq!(out.profile(0), Some([15.0; N_LAYERS]));
    }

    proptest! {
        #[test]
        fn bilinear_is_convex(
            vals in proptest::collection::vec(-100.0f64..100.0, 20),
            cell in 0.3f64..3.0,
            ox in -1.0f64..1.0,
            oy in -1.0f64..1.0,
        ) {
            // 4x5 source of unit cells, arbitrary finer or coarser target
            let src = cube(Geometry::new(4, 5, 1.0, 0.0, 0.0).unwrap(), &[0], &vals);
            let target = Geometry::new(6, 6, cell, ox, oy).unwrap();
            if let Ok(out) = resample_spatial(&src, &target, SpatialMethod::Bilinear) {
                for c in 0..target.n_cells() {
                    let Some(v) = out.value(c, 0) else { continue };
                    let (x, y) = target.cell_center(c);
                    let w = weights(src.geometry(), x, y, SpatialMethod::Bilinear).unwrap();
                    let nb: Vec<f64> = w.iter().map(|(i, _)| vals[*i]).collect();
                    let lo = nb.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = nb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
                    prop_assert!(!w.is_empty() && w.len() <= 4);
                }
            }
        }
    }
}
