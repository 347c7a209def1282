use chrono::{Datelike, NaiveDate};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{fold_split, kfold, pooled_r};
use crate::error::{Error, Result};
use crate::gridstore::{SampleRow, SampleTable};
use crate::learn::{ModelSpec, Target};

/// How an ablated month is hidden from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AblationMode {
    /// Drop the month's feature columns.
    #[default]
    Remove,
    /// Keep the columns but set them to zero.
    ZeroFill,
}

impl AblationMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "remove" => Some(AblationMode::Remove),
            "zero_fill" => Some(AblationMode::ZeroFill),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Remove => "remove",
            AblationMode::ZeroFill => "zero_fill",
        }
    }
}

/// Feature columns whose epoch falls in calendar `month`. Features are
/// `n_features / dates.len()` consecutive histories over `dates`.
pub fn month_feature_indices(dates: &[NaiveDate], n_features: usize, month: u32) -> Result<Vec<usize>> {
    if !(1..=12).contains(&month) {
        return Err(Error::Invalid(format!("month must be 1..12, got {month}")));
    }
    let t = dates.len();
    if t == 0 || !n_features.is_multiple_of(t) {
        return Err(Error::Dimension(format!(
            "{n_features} features do not align with {t} epoch dates"
        )));
    }
    let cols: Vec<usize> = (0..n_features).filter(|j| dates[j % t].month() == month).collect();
    if cols.is_empty() {
        return Err(Error::Invalid(format!("month {month} has no epochs to ablate")));
    }
    Ok(cols)
}

fn ablate(table: &SampleTable, cols: &[usize], mode: AblationMode) -> Result<SampleTable> {
    match mode {
        AblationMode::Remove => {
            let mut drop = vec![false; table.n_features()];
            for &c in cols {
                drop[c] = true;
            }
            let keep: Vec<usize> = (0..table.n_features()).filter(|c| !drop[*c]).collect();
            table.select_features(&keep)
        }
        AblationMode::ZeroFill => {
            let rows: Vec<SampleRow> = table
                .rows()
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    for &c in cols {
                        r.features[c] = 0.0;
                    }
                    r
                })
                .collect();
            SampleTable::new(table.n_features(), rows)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    pub mean_degradation: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    /// `alpha / n_comparisons`.
    pub threshold: f64,
    pub significant: bool,
}

/// Two-sided one-sample t-test of the fold degradations against zero.
/// Zero spread gives p = 1 for a zero mean and p = 0 otherwise.
pub fn significance(degradations: &[f64], alpha: f64, n_comparisons: usize) -> Result<SignificanceResult> {
    let n = degradations.len();
    if n < 2 {
        return Err(Error::Invalid(format!("significance needs >= 2 folds, got {n}")));
    }
    if n_comparisons == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid("alpha must be in (0, 1) with >= 1 comparison".into()));
    }
    let nf = n as f64;
    let mean = degradations.iter().sum::<f64>() / nf;
    let var = degradations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let (t, p) = if var == 0.0 {
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        (if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY }, p)
    } else {
        let t = mean / (var / nf).sqrt();
        let dist = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Invalid(e.to_string()))?;
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    let threshold = alpha / n_comparisons as f64;
    Ok(SignificanceResult {
        mean_degradation: mean,
        t_statistic: t,
        p_value: p,
        threshold,
        significant: p < threshold,
    })
}

/// One month's leave-out outcome across the folds.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthResult {
    pub month: u32,
    pub n_columns: usize,
    /// `R_full - R_ablated` on each fold's test cells.
    pub degradations: Vec<f64>,
    pub significance: SignificanceResult,
    /// Pooled out-of-fold R without and with the ablation.
    pub full_r: f64,
    pub ablated_r: f64,
    /// Out-of-fold predictions (percent) of the ablated models, row order.
    pub predicted: Vec<Target>,
}

pub const BONFERRONI_ALPHA: f64 = 0.05;
pub const N_MONTHS: usize = 12;

/// k-fold leave-one-month-out study. The full model of each fold is fit
/// once and shared by every month; the ablated models are fit on the same
/// fold-train cells with the same seed.
pub fn ablation_study(
    table: &SampleTable,
    dates: &[NaiveDate],
    months: &[u32],
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    mode: AblationMode,
) -> Result<Vec<MonthResult>> {
    let spec = spec.with_seed(seed);
    let columns: Vec<Vec<usize>> = months
        .iter()
        .map(|m| month_feature_indices(dates, table.n_features(), *m))
        .collect::<Result<_>>()?;
    let folds = kfold(table.len(), k, seed)?;
    let truth: Vec<Target> = table.rows().iter().map(|r| r.targets).collect();

    let mut full_pred = vec![[0.0; 10]; table.len()];
    let mut full_fold_r = Vec::with_capacity(k);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = folds.iter().map(|f| fold_split(table.len(), f)).collect();
    for (train, test) in &splits {
        let (model, _) = spec.fit(&table.subset(train))?;
        let p = model.predict_table(&table.subset(test))?;
        let t: Vec<Target> = test.iter().map(|i| truth[*i]).collect();
        full_fold_r.push(pooled_r(&p, &t)?);
        for (i, v) in test.iter().zip(p) {
            full_pred[*i] = v;
        }
    }
    let full_r = pooled_r(&full_pred, &truth)?;

    let mut out = Vec::with_capacity(months.len());
    for (&month, cols) in months.iter().zip(&columns) {
        let ablated = ablate(table, cols, mode)?;
        let mut pred = vec![[0.0; 10]; table.len()];
        let mut degradations = Vec::with_capacity(k);
        for ((train, test), r_full) in splits.iter().zip(&full_fold_r) {
            let (model, _) = spec.fit(&ablated.subset(train))?;
            let p = model.predict_table(&ablated.subset(test))?;
            let t: Vec<Target> = test.iter().map(|i| truth[*i]).collect();
            degradations.push(r_full - pooled_r(&p, &t)?);
            for (i, v) in test.iter().zip(p) {
                pred[*i] = v;
            }
        }
        out.push(MonthResult {
            month,
            n_columns: cols.len(),
            significance: significance(&degradations, BONFERRONI_ALPHA, N_MONTHS)?,
            degradations,
            full_r,
            ablated_r: pooled_r(&pred, &truth)?,
            predicted: pred,
        });
    }
    Ok(out)
}

/// Per-fold degradation for a single month.
pub fn month_ablation(
    table: &SampleTable,
    dates: &[NaiveDate],
    month: u32,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    mode: AblationMode,
) -> Result<Vec<f64>> {
    Ok(ablation_study(table, dates, &[month], spec, k, seed, mode)?.remove(0).degradations)
}
