use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{pooled_r, ProtocolResult};
use crate::error::{Error, Result};
use crate::gridstore::text::{self, fmt_f64, fmt_opt, parse_opt};
use crate::learn::Target;

pub const REPORT_HEADER: &str = "protocol,model,R,n_train,n_test,seed,p_value";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub protocol: String,
    pub model: String,
    pub r: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub p_value: Option<f64>,
}

impl ReportRow {
    fn check(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.r) {
            return Err(Error::Invalid(format!("R = {} outside [-1, 1]", self.r)));
        }
        if let Some(p) = self.p_value {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("p = {p} outside [0, 1]")));
            }
        }
        if self.protocol.contains(',') || self.model.contains(',') {
            return Err(Error::Invalid("protocol and model names may not contain commas".into()));
        }
        Ok(())
    }
}

pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in rows {
        r.check()?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.protocol,
            r.model,
            fmt_f64(r.r),
            r.n_train,
            r.n_test,
            r.seed,
            fmt_opt(r.p_value)
        );
    }
    Ok(s)
}

pub fn parse_report_csv(path: &str, s: &str) -> Result<Vec<ReportRow>> {
    let mut lines = s.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == REPORT_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {REPORT_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(path, i + 1, m);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let count = |t: &str| t.parse::<usize>().map_err(|_| err(format!("not a count: {t:?}")));
        let row = ReportRow {
            protocol: f[0].to_string(),
            model: f[1].to_string(),
            r: text::parse_f64(f[2]).map_err(err)?,
            n_train: count(f[3])?,
            n_test: count(f[4])?,
            seed: f[5].parse().map_err(|_| err(format!("not a seed: {:?}", f[5])))?,
            p_value: parse_opt(f[6]).map_err(err)?,
        };
        row.check().map_err(|e| err(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

const SVG_SIZE: f64 = 400.0;
const SVG_MARGIN: f64 = 40.0;

/// Standalone SVG scatter of predicted against true percent on a fixed
/// 0..100 square, with the y = x guide line.
pub fn scatter_svg(predicted: &[Target], truth: &[Target]) -> Result<String> {
    if predicted.is_empty() {
        return Err(Error::Invalid("no predictions to plot".into()));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!("{} predictions vs {} truths", predicted.len(), truth.len())));
    }
    let span = SVG_SIZE - 2.0 * SVG_MARGIN;
    let px = |v: f64| SVG_MARGIN + span * v.clamp(0.0, 100.0) / 100.0;
    let py = |v: f64| SVG_SIZE - SVG_MARGIN - span * v.clamp(0.0, 100.0) / 100.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{span}" height="{span}" fill="none" stroke="black"/>"#,
        m = SVG_MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line id="guide" x1="{}" y1="{}" x2="{}" y2="{}" stroke="red" stroke-dasharray="4 3"/>"#,
        px(0.0),
        py(0.0),
        px(100.0),
        py(100.0)
    );
    let _ = writeln!(s, r#"<g fill="steelblue" fill-opacity="0.4">"#);
    for (p, t) in predicted.iter().zip(truth) {
        for (pv, tv) in p.iter().zip(t) {
            let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="1.5"/>"#, px(*tv), py(*pv));
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">true coarse-grain %</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">predicted coarse-grain %</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE / 2.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Rows written to `report.csv` and the scatter of the first result written
/// to `scatter.svg`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// Pooled R recomputed from the plotted predictions.
    pub scatter_r: f64,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
}

pub fn make_report(results: &[ProtocolResult], out_dir: &Path) -> Result<EvalReport> {
    let first = results
        .first()
        .ok_or_else(|| Error::Invalid("report needs at least one protocol result".into()))?;
    let rows: Vec<ReportRow> = results.iter().map(ProtocolResult::row).collect();
    let csv = report_csv(&rows)?;
    let svg = scatter_svg(&first.predicted, &first.truth)?;
    let scatter_r = pooled_r(&first.predicted, &first.truth)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join("report.csv");
    let svg_path = out_dir.join("scatter.svg");
    text::write_string(&csv_path, &csv)?;
    text::write_string(&svg_path, &svg)?;
    Ok(EvalReport {
        rows,
        scatter_r,
        csv_path,
        svg_path,
    })
}
