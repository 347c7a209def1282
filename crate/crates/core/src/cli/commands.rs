use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use super::{log, RunContext};
use crate::error::{Error, Result};
use crate::evalstat::{
    ablation_study, make_report, parse_report_csv, run_protocol, scatter_svg, significance, Protocol, ReportRow,
};
use crate::fuse::{align_all, build_dataset};
use crate::gridstore::text::{self, fmt_f64, fmt_opt};
use crate::gridstore::{
    read_cube, read_samples, read_texture, write_cube, write_samples, write_texture, DataCube, N_LAYERS,
};
use crate::learn::{write_model, ModelKind, Target};
use crate::sbas::{invert_stack, read_stack, spatiotemporal_filter, write_stack, DeformationModel};
use crate::synthgen::generate_scenario;

pub const TEXTURE_FILE: &str = "texture.tex";
pub const GROUNDWATER_FILE: &str = "groundwater.cube";
pub const PRECIPITATION_FILE: &str = "precipitation.cube";
pub const TRUTH_DISPLACEMENT_FILE: &str = "truth_displacement.cube";
pub const TRUTH_DEM_FILE: &str = "truth_dem.csv";
pub const STACK_FILE: &str = "stack.stk";
pub const DISPLACEMENT_FILE: &str = "displacement.cube";
pub const INVERSION_FILE: &str = "inversion.csv";
pub const ALIGNED_PREFIX: &str = "aligned_";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SCATTER_FILE: &str = "scatter.svg";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const ABLATION_FOLDS_FILE: &str = "ablation_folds.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

const ABLATION_HEADER: &str =
    "month,n_columns,mean_degradation,t_statistic,p_value,threshold,significant,full_R,ablated_R";
/// Bonferroni family: the twelve calendar months.
const MONTH_COMPARISONS: usize = 12;

pub fn simulate(ctx: &RunContext) -> Result<()> {
    let cfg = ctx.config.scenario()?;
    let sc = generate_scenario(&cfg)?;
    write_texture(&sc.texture, &ctx.output(TEXTURE_FILE))?;
    write_cube(&sc.groundwater, &ctx.output(GROUNDWATER_FILE))?;
    write_cube(&sc.precipitation, &ctx.output(PRECIPITATION_FILE))?;
    write_cube(&sc.displacement, &ctx.output(TRUTH_DISPLACEMENT_FILE))?;
    write_stack(&sc.synthetic.stack, &ctx.output(STACK_FILE))?;
    let mut dem = String::from("cell_id,dem_coeff_mm_per_m\n");
    for (cell, c) in sc.synthetic.dem_coeffs.iter().enumerate() {
        let _ = writeln!(dem, "{cell},{}", fmt_f64(*c));
    }
    text::write_string(&ctx.output(TRUTH_DEM_FILE), &dem)?;
    log(&format!(
        "simulated {} cells x {} acquisitions, {} interferograms",
        cfg.grid.n_cells(),
        cfg.grid.n_epochs(),
        sc.synthetic.stack.pairs().len()
    ));
    Ok(())
}

pub fn invert(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config;
    let stack = read_stack(&ctx.input(STACK_FILE)?)?;
    let gw = if cfg.deformation_model == DeformationModel::Compaction && cfg.estimate_dem_error {
        Some(read_cube(&ctx.input(GROUNDWATER_FILE)?)?)
    } else {
        None
    };
    let res = invert_stack(&stack, cfg.inversion(), gw.as_ref())?;
    let disp = if cfg.filter {
        spatiotemporal_filter(&res.displacement, cfg.filter_window_epochs, cfg.filter_sigma_cells)?
    } else {
        res.displacement.clone()
    };
    write_cube(&disp, &ctx.output(DISPLACEMENT_FILE))?;
    let mut s = String::from("cell_id,velocity_mm_per_year,dem_coeff_mm_per_m,residual_rms_mm,connected\n");
    for cell in 0..res.connected.len() {
        let _ = writeln!(
            s,
            "{cell},{},{},{},{}",
            fmt_opt(res.velocity_mm_per_year[cell]),
            fmt_opt(res.dem_coeff[cell]),
            fmt_opt(res.residual_rms[cell]),
            res.connected[cell]
        );
    }
    text::write_string(&ctx.output(INVERSION_FILE), &s)?;
    let n_ok = res.connected.iter().filter(|c| **c).count();
    log(&format!("inverted {n_ok} of {} cells", res.connected.len()));
    Ok(())
}

pub fn fuse(ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config;
    let disp = read_cube(&ctx.input(DISPLACEMENT_FILE)?)?;
    let gw = read_cube(&ctx.input(GROUNDWATER_FILE)?)?;
    let rain = read_cube(&ctx.input(PRECIPITATION_FILE)?)?;
    let tex = read_texture(&ctx.input(TEXTURE_FILE)?)?;
    let bundle = align_all(&disp, &gw, &rain, &tex, &cfg.resample_spec()?)?;
    let table = build_dataset(&bundle, cfg.include_forcing, Some(cfg.target_epochs))?;
    let aligned = |name: &str| ctx.output(&format!("{ALIGNED_PREFIX}{name}"));
    write_cube(&bundle.displacement, &aligned(DISPLACEMENT_FILE))?;
    write_cube(&bundle.groundwater, &aligned(GROUNDWATER_FILE))?;
    write_cube(&bundle.precipitation, &aligned(PRECIPITATION_FILE))?;
    write_texture(&bundle.texture, &aligned(TEXTURE_FILE))?;
    write_samples(&table, &ctx.output(SAMPLES_FILE))?;
    log(&format!("{} samples x {} features", table.len(), table.n_features()));
    Ok(())
}

pub fn model_file(kind: ModelKind) -> String {
    format!("model_{}.txt", kind.name())
}

pub fn train(ctx: &RunContext, kind: ModelKind) -> Result<()> {
    let table = read_samples(&ctx.input(SAMPLES_FILE)?)?;
    let (model, history) = ctx.config.model_spec(kind).fit(&table)?;
    write_model(&model, &ctx.output(&model_file(kind)))?;
    if !history.is_empty() {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in history.iter().enumerate() {
            let _ = writeln!(s, "{},{}", i + 1, fmt_f64(*l));
        }
        text::write_string(&ctx.output(&format!("train_history_{}.csv", kind.name())), &s)?;
        log(&format!("final training loss {}", fmt_f64(*history.last().unwrap())));
    }
    log(&format!("trained {} on {} samples", kind.name(), table.len()));
    Ok(())
}

/// Epoch dates of the fused feature histories.
fn feature_dates(ctx: &RunContext) -> Result<Vec<NaiveDate>> {
    let cube: DataCube = read_cube(&ctx.input(&format!("{ALIGNED_PREFIX}{DISPLACEMENT_FILE}"))?)?;
    Ok(cube.grid().epochs().to_vec())
}

pub fn eval(ctx: &RunContext, kind: ModelKind, protocols: &[Protocol]) -> Result<()> {
    let table = read_samples(&ctx.input(SAMPLES_FILE)?)?;
    let needs_dates = protocols.iter().any(|p| matches!(p, Protocol::MonthAblation(_)));
    let dates = if needs_dates { Some(feature_dates(ctx)?) } else { None };
    let spec = ctx.config.model_spec(kind);
    let mut results = Vec::with_capacity(protocols.len());
    for p in protocols {
        let r = run_protocol(&table, dates.as_deref(), *p, &spec, ctx.seed())?;
        log(&format!("{p} {}: R = {:.4} (train {}, test {})", kind.name(), r.r, r.n_train, r.n_test));
        results.push(r);
    }
    make_report(&results, &ctx.out)?;
    write_predictions(&ctx.output(PREDICTIONS_FILE), &results[0].predicted, &results[0].truth)
}

pub fn ablate(ctx: &RunContext, kind: ModelKind, months: &[u32]) -> Result<()> {
    let cfg = &ctx.config;
    let table = read_samples(&ctx.input(SAMPLES_FILE)?)?;
    let dates = feature_dates(ctx)?;
    let spec = cfg.model_spec(kind);
    let res = ablation_study(&table, &dates, months, &spec, cfg.folds, ctx.seed(), cfg.ablation_mode)?;
    let mut s = String::from(ABLATION_HEADER);
    s.push('\n');
    let mut folds = String::from("month,fold,degradation\n");
    for m in &res {
        let sig = significance(&m.degradations, cfg.alpha, MONTH_COMPARISONS)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            m.month,
            m.n_columns,
            fmt_f64(sig.mean_degradation),
            fmt_f64(sig.t_statistic),
            fmt_f64(sig.p_value),
            fmt_f64(sig.threshold),
            sig.significant,
            fmt_f64(m.full_r),
            fmt_f64(m.ablated_r)
        );
        for (f, d) in m.degradations.iter().enumerate() {
            let _ = writeln!(folds, "{},{},{}", m.month, f + 1, fmt_f64(*d));
        }
        log(&format!(
            "month {:2}: mean degradation {:+.4}, p = {:.3e}{}",
            m.month,
            sig.mean_degradation,
            sig.p_value,
            if sig.significant { " *" } else { "" }
        ));
    }
    text::write_string(&ctx.output(ABLATION_FILE), &s)?;
    text::write_string(&ctx.output(ABLATION_FOLDS_FILE), &folds)
}

pub fn report(ctx: &RunContext) -> Result<()> {
    let path = ctx.input(REPORT_FILE)?;
    let rows = parse_report_csv(&path.display().to_string(), &text::read_to_string(&path)?)?;
    let mut s = summary_table(&rows);
    if let Some(p) = ctx.optional_input(ABLATION_FILE) {
        s.push('\n');
        s.push_str(&ablation_summary(&text::read_to_string(&p)?, &p)?);
    }
    if let Some(p) = ctx.optional_input(PREDICTIONS_FILE) {
        let (pred, truth) = read_predictions(&p)?;
        text::write_string(&ctx.output(SCATTER_FILE), &scatter_svg(&pred, &truth)?)?;
    }
    print!("{s}");
    text::write_string(&ctx.output(SUMMARY_FILE), &s)
}

fn summary_table(rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:<7} {:>7} {:>8} {:>7} {:>6} {:>10}",
        "protocol", "model", "R", "n_train", "n_test", "seed", "p"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:<7} {:>7.4} {:>8} {:>7} {:>6} {:>10}",
            r.protocol,
            r.model,
            r.r,
            r.n_train,
            r.n_test,
            r.seed,
            r.p_value.map_or("-".to_string(), |p| format!("{p:.3e}"))
        );
    }
    s
}

fn ablation_summary(csv: &str, path: &Path) -> Result<String> {
    let mut lines = csv.lines();
    if lines.next() != Some(ABLATION_HEADER) {
        return Err(Error::parse(path.display(), 1, "not an ablation table"));
    }
    let mut s = String::from("month  mean_degradation  p_value     significant\n");
    for (i, l) in lines.enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 9 {
            return Err(Error::parse(path.display(), i + 2, "expected 9 fields"));
        }
        let num = |t: &str| text::parse_f64(t).map_err(|m| Error::parse(path.display(), i + 2, m));
        let _ = writeln!(
            s,
            "{:>5}  {:>+16.4}  {:<10.3e}  {}",
            f[0],
            num(f[2])?,
            num(f[4])?,
            if f[6] == "true" { "yes" } else { "no" }
        );
    }
    Ok(s)
}

fn prediction_header() -> String {
    let p: Vec<String> = (1..=N_LAYERS).map(|k| format!("p{k:02}")).collect();
    let t: Vec<String> = (1..=N_LAYERS).map(|k| format!("t{k:02}")).collect();
    format!("{},{}", p.join(","), t.join(","))
}

/// Test-set predictions and truths in percent, one cell per row.
pub fn write_predictions(path: &Path, predicted: &[Target], truth: &[Target]) -> Result<()> {
    let mut s = prediction_header();
    s.push('\n');
    for (p, t) in predicted.iter().zip(truth) {
        let cols: Vec<String> = p.iter().chain(t).map(|v| fmt_f64(*v)).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    text::write_string(path, &s)
}

pub fn read_predictions(path: &Path) -> Result<(Vec<Target>, Vec<Target>)> {
    let s = text::read_to_string(path)?;
    let mut lines = s.lines();
    if lines.next() != Some(prediction_header().as_str()) {
        return Err(Error::parse(path.display(), 1, "not a predictions table"));
    }
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for (i, l) in lines.enumerate() {
        let v: Vec<f64> = l
            .split(',')
            .map(text::parse_f64)
            .collect::<std::result::Result<_, _>>()
            .map_err(|m| Error::parse(path.display(), i + 2, m))?;
        if v.len() != 2 * N_LAYERS {
            return Err(Error::parse(path.display(), i + 2, format!("expected {} values", 2 * N_LAYERS)));
        }
        pred.push(std::array::from_fn(|k| v[k]));
        truth.push(std::array::from_fn(|k| v[N_LAYERS + k]));
    }
    Ok((pred, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let pred: Vec<Target> = vec![[12.5; N_LAYERS], std::array::from_fn(|k| k as f64)];
        let truth: Vec<Target> = vec![[0.0; N_LAYERS], [99.75; N_LAYERS]];
        write_predictions(&p, &pred, &truth).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), (pred, truth));
    }
}
