//! Scoring and evaluation protocols: pooled Pearson R, holdout, k-fold,
//! distance-thinned training, leave-one-month-out ablation with a
//! Bonferroni-corrected t-test, and CSV/SVG reports.

mod ablation;
mod report;
mod sampling;

pub use ablation::{ablation_study, month_ablation, month_feature_indices, significance, AblationMode, MonthResult, SignificanceResult};
pub use report::{make_report, parse_report_csv, report_csv, scatter_svg, EvalReport, ReportRow, REPORT_HEADER};
pub use sampling::{kfold, split_fraction, split_indices, thin_by_distance, thin_indices};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gridstore::{SampleTable, N_LAYERS};
use crate::learn::{ModelSpec, Target};

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} values", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// R over every layer of every cell pooled into one sample.
pub fn pooled_r(pred: &[Target], truth: &[Target]) -> Result<f64> {
    let p: Vec<f64> = pred.iter().flatten().copied().collect();
    let t: Vec<f64> = truth.iter().flatten().copied().collect();
    pearson_r(&p, &t)
}

/// Evaluation protocol with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    /// Train on this fraction of cells, test on the rest.
    Holdout(f64),
    KFold(usize),
    /// Holdout whose training cells are thinned to this spacing (m).
    DistanceThin(f64),
    MonthAblation(u32),
}

/// Training fraction underlying the distance-thinning protocol.
pub const DISTANCE_BASE_FRACTION: f64 = 0.6;
pub const DEFAULT_FOLDS: usize = 10;

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Protocol::Holdout(f) if !(f > 0.0 && f < 1.0) => {
                Err(Error::Invalid(format!("holdout fraction must be in (0, 1), got {f}")))
            }
            Protocol::KFold(k) if k < 2 => Err(Error::Invalid(format!("kfold needs k >= 2, got {k}"))),
            Protocol::DistanceThin(m) if !(m > 0.0 && m.is_finite()) => {
                Err(Error::Invalid(format!("distance must be > 0 m, got {m}")))
            }
            Protocol::MonthAblation(m) if !(1..=12).contains(&m) => {
                Err(Error::Invalid(format!("month must be 1..12, got {m}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Holdout(x) => write!(f, "holdout:{x}"),
            Protocol::KFold(k) => write!(f, "kfold:{k}"),
            Protocol::DistanceThin(m) => write!(f, "distance:{m}"),
            Protocol::MonthAblation(m) => write!(f, "month:{m}"),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad protocol `{s}` (holdout:F | kfold:K | distance:M | month:N)"));
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        let p = match name {
            "holdout" => Protocol::Holdout(arg.parse().map_err(|_| bad())?),
            "kfold" => Protocol::KFold(arg.parse().map_err(|_| bad())?),
            "distance" => Protocol::DistanceThin(arg.parse().map_err(|_| bad())?),
            "month" => Protocol::MonthAblation(arg.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Outcome of one protocol run, with the test predictions in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub protocol: Protocol,
    pub model: String,
    pub r: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub p_value: Option<f64>,
    pub predicted: Vec<Target>,
    pub truth: Vec<Target>,
}

impl ProtocolResult {
    pub fn row(&self) -> ReportRow {
        ReportRow {
            protocol: self.protocol.to_string(),
            model: self.model.clone(),
            r: self.r,
            n_train: self.n_train,
            n_test: self.n_test,
            seed: self.seed,
            p_value: self.p_value,
        }
    }
}

fn fit_and_score(spec: &ModelSpec, train: &SampleTable, test: &SampleTable) -> Result<(f64, Vec<Target>, Vec<Target>)> {
    let (model, _) = spec.fit(train)?;
    let pred = model.predict_table(test)?;
    let truth: Vec<Target> = test.rows().iter().map(|r| r.targets).collect();
    Ok((pooled_r(&pred, &truth)?, pred, truth))
}

/// Runs one protocol. Month ablation needs the feature epoch dates; its R
/// is the ablated model's pooled out-of-fold R and its p-value is the
/// significance of the per-fold degradation.
pub fn run_protocol(
    table: &SampleTable,
    dates: Option<&[chrono::NaiveDate]>,
    protocol: Protocol,
    spec: &ModelSpec,
    seed: u64,
) -> Result<ProtocolResult> {
    protocol.validate()?;
    let spec = spec.with_seed(seed);
    let model = spec.kind.name().to_string();
    let done = |r, n_train, n_test, p_value, predicted, truth| ProtocolResult {
        protocol,
        model: model.clone(),
        r,
        n_train,
        n_test,
        seed,
        p_value,
        predicted,
        truth,
    };
    match protocol {
        Protocol::Holdout(f) => {
            let (train, test) = split_fraction(table, f, seed)?;
            let (r, p, t) = fit_and_score(&spec, &train, &test)?;
            Ok(done(r, train.len(), test.len(), None, p, t))
        }
        Protocol::DistanceThin(m) => {
            let (train, test) = split_fraction(table, DISTANCE_BASE_FRACTION, seed)?;
            let thinned = thin_by_distance(&train, m, seed);
            let (r, p, t) = fit_and_score(&spec, &thinned, &test)?;
            Ok(done(r, thinned.len(), test.len(), None, p, t))
        }
        Protocol::KFold(k) => {
            let folds = kfold(table.len(), k, seed)?;
            let mut pred = vec![[0.0; N_LAYERS]; table.len()];
            let mut train_sizes = 0;
            for fold in &folds {
                let (train_idx, test_idx) = fold_split(table.len(), fold);
                train_sizes += train_idx.len();
                let (model, _) = spec.fit(&table.subset(&train_idx))?;
                let p = model.predict_table(&table.subset(&test_idx))?;
                for (i, v) in test_idx.iter().zip(p) {
                    pred[*i] = v;
                }
            }
            let truth: Vec<Target> = table.rows().iter().map(|r| r.targets).collect();
            let r = pooled_r(&pred, &truth)?;
            Ok(done(r, train_sizes / k, table.len(), None, pred, truth))
        }
        Protocol::MonthAblation(month) => {
            let dates = dates.ok_or_else(|| Error::Invalid("month ablation needs epoch dates".into()))?;
            let res = ablation_study(table, dates, &[month], &spec, DEFAULT_FOLDS, seed, AblationMode::Remove)?;
            let m = &res[0];
            Ok(done(
                m.ablated_r,
                table.len() - table.len() / DEFAULT_FOLDS,
                table.len(),
                Some(m.significance.p_value),
                m.predicted.clone(),
                table.rows().iter().map(|r| r.targets).collect(),
            ))
        }
    }
}

/// Complement of `test` (sorted) within `0..n`, plus `test` sorted.
pub(crate) fn fold_split(n: usize, test: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut is_test = vec![false; n];
    for &i in test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|i| !is_test[*i]).collect();
    let test = (0..n).filter(|i| is_test[*i]).collect();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(pearson_r(&x, &[2.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
        assert!(pearson_r(&x, &x[..3]).is_err());
    }

    #[test]
    fn protocol_strings_roundtrip() {
        for s in ["holdout:0.6", "holdout:0.4", "kfold:10", "distance:10000", "month:10"] {
            assert_eq!(s.parse::<Protocol>().unwrap().to_string(), s);
        }
        for s in ["holdout:1", "kfold:1", "distance:0", "month:13", "nope:1", "holdout"] {
            assert!(s.parse::<Protocol>().is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            xy in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            if let Ok(r) = pearson_r(&x, &y) {
                let xa: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let xn: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson_r(&xa, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson_r(&xn, &y).unwrap() + r).abs() < 1e-9);
            }
        }
    }
}
