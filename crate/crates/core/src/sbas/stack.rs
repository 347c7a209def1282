use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::gridstore::text::{self, Lines};
use crate::gridstore::{fmt_dates, parse_dates, Geometry, SpaceTimeGrid};

pub const STACK_MAGIC: &str = "SUBSIGHT-STACK v1";

/// Acquisition dates with their perpendicular baselines (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSet {
    dates: Vec<NaiveDate>,
    baselines_m: Vec<f64>,
}

impl AcquisitionSet {
    pub fn new(dates: Vec<NaiveDate>, baselines_m: Vec<f64>) -> Result<Self> {
        if dates.len() != baselines_m.len() {
            return Err(Error::Dimension(format!(
                "{} dates but {} baselines",
                dates.len(),
                baselines_m.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(format!(
                "acquisition dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if baselines_m.iter().any(|b| !b.is_finite()) {
            return Err(Error::Invalid("non-finite perpendicular baseline".into()));
        }
        Ok(AcquisitionSet { dates, baselines_m })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn baselines_m(&self) -> &[f64] {
        &self.baselines_m
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn days_between(&self, i: usize, j: usize) -> i64 {
        (self.dates[j] - self.dates[i]).num_days()
    }
}

/// Pairwise displacement differences (mm) per cell, pair-major, with a
/// per-pair per-cell validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferogramStack {
    geometry: Geometry,
    acquisitions: AcquisitionSet,
    pairs: Vec<(usize, usize)>,
    max_baseline_days: i64,
    obs: Vec<Option<f64>>,
}

impl InterferogramStack {
    pub fn new(
        geometry: Geometry,
        acquisitions: AcquisitionSet,
        pairs: Vec<(usize, usize)>,
        max_baseline_days: i64,
        obs: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n_epochs = acquisitions.len();
        let mut seen = HashSet::new();
        for &(i, j) in &pairs {
            if j <= i || j >= n_epochs {
                return Err(Error::Invalid(format!("invalid pair ({i}, {j}) for {n_epochs} epochs")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Invalid(format!("duplicate pair ({i}, {j})")));
            }
            let gap = acquisitions.days_between(i, j);
            if gap > max_baseline_days {
                return Err(Error::Invalid(format!(
                    "pair ({i}, {j}) spans {gap} days > {max_baseline_days}"
                )));
            }
        }
        let expected = pairs.len() * geometry.n_cells();
        if obs.len() != expected {
            return Err(Error::Dimension(format!("{} observations, expected {expected}", obs.len())));
        }
        if obs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite interferogram observation".into()));
        }
        Ok(InterferogramStack {
            geometry,
            acquisitions,
            pairs,
            max_baseline_days,
            obs,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn acquisitions(&self) -> &AcquisitionSet {
        &self.acquisitions
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn max_baseline_days(&self) -> i64 {
        self.max_baseline_days
    }

    /// Grid spanned by the acquisition dates.
    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(self.geometry.clone(), self.acquisitions.dates.clone())
    }

    pub fn observation(&self, pair: usize, cell: usize) -> Option<f64> {
        self.obs[pair * self.geometry.n_cells() + cell]
    }

    pub fn cell_observations(&self, cell: usize) -> Vec<Option<f64>> {
        (0..self.pairs.len()).map(|k| self.observation(k, cell)).collect()
    }
}

pub fn stack_to_string(stack: &InterferogramStack) -> String {
    let g = &stack.geometry;
    let mut out = String::new();
    out.push_str(STACK_MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "{} {} {} {} {} {} {} {}",
        g.n_rows,
        g.n_cols,
        stack.acquisitions.len(),
        stack.pairs.len(),
        text::fmt_f64(g.cell_size_m),
        text::fmt_f64(g.origin_x),
        text::fmt_f64(g.origin_y),
        stack.max_baseline_days
    );
    out.push_str(&fmt_dates(&stack.acquisitions.dates));
    out.push('\n');
    let b: Vec<String> = stack.acquisitions.baselines_m.iter().map(|v| text::fmt_f64(*v)).collect();
    out.push_str(&b.join(" "));
    out.push('\n');
    let p: Vec<String> = stack.pairs.iter().map(|(i, j)| format!("{i}-{j}")).collect();
    out.push_str(&p.join(" "));
    out.push('\n');
    let n = g.n_cells();
    for k in 0..stack.pairs.len() {
        let toks: Vec<String> = stack.obs[k * n..(k + 1) * n].iter().map(|v| text::fmt_opt(*v)).collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_stack(stack: &InterferogramStack, path: &Path) -> Result<()> {
    text::write_string(path, &stack_to_string(stack))
}

pub fn read_stack(path: &Path) -> Result<InterferogramStack> {
    let s = text::read_to_string(path)?;
    let mut lines = Lines::new(path, &s);
    lines.expect_magic(STACK_MAGIC)?;
    let dims = lines.next_line("dimension line")?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() != 8 {
        return Err(lines.err(
            "dimension line needs `rows cols epochs pairs cell_m origin_x origin_y max_baseline_days`",
        ));
    }
    let rows = text::parse_usize(&lines, toks[0], "rows")?;
    let cols = text::parse_usize(&lines, toks[1], "cols")?;
    let n_epochs = text::parse_usize(&lines, toks[2], "epochs")?;
    let n_pairs = text::parse_usize(&lines, toks[3], "pairs")?;
    let cell = text::parse_header_f64(&lines, toks[4], "cell_m")?;
    let ox = text::parse_header_f64(&lines, toks[5], "origin_x")?;
    let oy = text::parse_header_f64(&lines, toks[6], "origin_y")?;
    let max_days: i64 = toks[7]
        .parse()
        .map_err(|_| lines.err(format!("max_baseline_days: bad integer {:?}", toks[7])))?;
    let geometry = Geometry::new(rows, cols, cell, ox, oy).map_err(|e| lines.err(e.to_string()))?;

    let date_line = lines.next_line("date line")?;
    let dates = parse_dates(&lines, date_line, n_epochs)?;
    let bl = lines.next_line("baseline line")?;
    let baselines = bl
        .split_whitespace()
        .map(|t| text::parse_header_f64(&lines, t, "baseline"))
        .collect::<Result<Vec<_>>>()?;
    let acq = AcquisitionSet::new(dates, baselines).map_err(|e| lines.err(e.to_string()))?;

    let pl = lines.next_line("pair line")?;
    let pairs = pl
        .split_whitespace()
        .map(|t| {
            let (a, b) = t
                .split_once('-')
                .ok_or_else(|| lines.err(format!("pair token {t:?} is not `i-j`")))?;
            Ok((
                text::parse_usize(&lines, a, "pair index")?,
                text::parse_usize(&lines, b, "pair index")?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.len() != n_pairs {
        return Err(lines.err(format!("header declares {n_pairs} pairs, found {}", pairs.len())));
    }

    let n_values = n_pairs
        .checked_mul(geometry.n_cells())
        .ok_or_else(|| lines.err("dimension overflow"))?;
    let path_s = lines.path().to_string();
    let mut obs = Vec::with_capacity(n_values);
    let mut count = 0usize;
    for tok in lines.rest_tokens() {
        if count < n_values {
            obs.push(text::parse_opt(tok).map_err(|m| Error::parse(&path_s, 0, m))?);
        }
        count += 1;
    }
    if count != n_values {
        return Err(Error::Dimension(format!(
            "{path_s}: header declares {n_pairs} pairs x {} cells = {n_values} values, found {count} tokens",
            geometry.n_cells()
        )));
    }
    InterferogramStack::new(geometry, acq, pairs, max_days, obs).map_err(|e| e.context(path_s))
}
