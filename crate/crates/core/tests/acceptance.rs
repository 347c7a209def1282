//! Acceptance suite. Runs every criterion in order and prints one
//! PASS/FAIL line each; exits non-zero if any criterion fails.
//!
//! `cargo test -p subsight --test acceptance [-- name-filter]`

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use subsight::cli::{Config, SAMPLES_FILE};
use subsight::evalstat::{run_protocol, split_fraction, thin_by_distance, Protocol, DISTANCE_BASE_FRACTION};
use subsight::gridstore::*;
use subsight::learn::*;
use subsight::rng::{stream, StreamRng};
use subsight::sbas::*;
use subsight::synthgen::{generate_scenario, NoiseParams, ScenarioConfig};

const CV_SMALL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/cv-small.cfg");
const OCTOBER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/october-planted.cfg");
const BIN: &str = env!("CARGO_BIN_EXE_subsight");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, Option<Check>); 11] = [
        ("published-figures", None),
        ("sbas-oracle", Some(sbas_oracle)),
        ("noise-free-inversion", Some(noise_free_inversion)),
        ("gradient-check", Some(gradient_check)),
        ("tree-forest-oracles", Some(tree_forest_oracles)),
        ("cv-small-benchmark", Some(cv_small_benchmark)),
        ("sparse-training", Some(sparse_training)),
        ("distance-thinning", Some(distance_thinning)),
        ("october-ablation", Some(october_ablation)),
        ("determinism", Some(determinism)),
        ("format-roundtrips", Some(format_roundtrips)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let Some(check) = check else {
            println!(
                "N/A  {name}: figure values need the real Sentinel-1 and CVHM inputs; \
                 covered by the planted-signal checks below"
            );
            continue;
        };
        let t0 = Instant::now();
        let o = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        println!("{} {name}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}

fn within(t0: Instant, limit_s: u64) -> bool {
    t0.elapsed() <= Duration::from_secs(limit_s)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- SBAS oracle

const DAYS_PER_YEAR: f64 = 365.25;

/// Random connected network: a random spanning tree plus extra pairs.
fn random_network(r: &mut StreamRng) -> (AcquisitionSet, Vec<(usize, usize)>, bool) {
    let n = r.random_range(2..=6usize);
    let t0 = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let mut day = 0i64;
    let mut dates = Vec::with_capacity(n);
    for _ in 0..n {
        dates.push(t0 + chrono::Duration::days(day));
        day += r.random_range(12..=90i64);
    }
    let baselines: Vec<f64> = (0..n).map(|_| r.random_range(-150.0..150.0)).collect();
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|k| (r.random_range(0..k), k)).collect();
    let max_pairs = (n * (n - 1) / 2).min(10);
    let want = r.random_range(pairs.len()..=max_pairs);
    while pairs.len() < want {
        let i = r.random_range(0..n - 1);
        let j = r.random_range(i + 1..n);
        if !pairs.contains(&(i, j)) {
            pairs.push((i, j));
        }
    }
    // linear + annual sinusoid + baseline needs at least 4 fitted epochs
    let dem = n >= 5 && r.random_bool(0.5);
    (AcquisitionSet::new(dates, baselines).unwrap(), pairs, dem)
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

/// Solves `A^T A x = A^T b` exactly over the rationals (every f64 input is
/// an exact rational), so the oracle carries no rounding error of its own.
fn solve_normal(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let a: Vec<Vec<BigRational>> = (0..m).map(|r| (0..n).map(|c| exact(a[(r, c)])).collect()).collect();
    let b: Vec<BigRational> = b.iter().map(|v| exact(*v)).collect();
    // augmented normal matrix [A^T A | A^T b]
    let mut g: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|j| (0..m).fold(BigRational::zero(), |s, r| s + &a[r][i] * &a[r][j]))
                .collect();
            row.push((0..m).fold(BigRational::zero(), |s, r| s + &a[r][i] * &b[r]));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|r| !g[*r][col].is_zero()).expect("normal matrix is singular");
        g.swap(col, piv);
        for r in 0..n {
            if r != col && !g[r][col].is_zero() {
                let f = &g[r][col] / &g[col][col];
                for c in col..=n {
                    let d = &f * &g[col][c];
                    g[r][c] -= d;
                }
            }
        }
    }
    (0..n).map(|i| (&g[i][n] / &g[i][i]).to_f64().unwrap()).collect()
}

/// Direct normal-equation solution: displacement from the incidence rows,
/// then the DEM term from a linear + annual fit of the combined series.
fn oracle_solution(acq: &AcquisitionSet, pairs: &[(usize, usize)], obs: &[f64], dem: bool) -> (Vec<f64>, f64) {
    let n = acq.len();
    let a = DMatrix::from_fn(pairs.len(), n - 1, |r, c| {
        let (i, j) = pairs[r];
        if c + 1 == j {
            1.0
        } else if c + 1 == i {
            -1.0
        } else {
            0.0
        }
    });
    let x = solve_normal(&a, obs);
    let mut series: Vec<f64> = std::iter::once(0.0).chain(x.iter().copied()).collect();
    let mut c = 0.0;
    if dem {
        let d = acq.dates();
        let b = acq.baselines_m();
        let w = 2.0 * std::f64::consts::PI;
        let yr = |k: usize| (d[k] - d[0]).num_days() as f64 / DAYS_PER_YEAR;
        let x = DMatrix::from_fn(n - 1, 4, |r, col| {
            let k = r + 1;
            match col {
                0 => yr(k),
                1 => (w * yr(k)).sin(),
                2 => (w * yr(k)).cos() - 1.0,
                _ => b[k] - b[0],
            }
        });
        let coef = solve_normal(&x, &series[1..]);
        c = coef[3];
        for k in 1..n {
            series[k] -= c * (b[k] - b[0]);
        }
    }
    (series, c)
}

fn sbas_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut with_dem = 0;
    for i in 0..1000u64 {
        let mut r = stream(2024, 0xacce, i);
        let (acq, pairs, dem) = random_network(&mut r);
        let obs: Vec<f64> = (0..pairs.len()).map(|_| r.random_range(-40.0..40.0)).collect();
        let design = build_design_matrix(&pairs, &acq, dem).unwrap();
        let got = invert_cell(&obs, &design).unwrap();
        let (series, c) = oracle_solution(&acq, &pairs, &obs, dem);
        let mut want = series.clone();
        let mut have = got.series.clone();
        if dem {
            with_dem += 1;
            want.push(c);
            have.push(got.dem_coeff);
        }
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = want.iter().zip(&have).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(err);
    }
    let ok_t = within(t0, 10);
    outcome(
        worst <= 1e-9 && ok_t,
        format!("1000 stacks ({with_dem} with DEM), max relative error {worst:.2e} (<= 1e-9), limit 10 s"),
    )
}

// ------------------------------------------------------ noise-free inversion

fn noise_free_inversion() -> Outcome {
    let t0 = Instant::now();
    let mut cfg = ScenarioConfig::desk();
    cfg.noise = NoiseParams::none();
    let sc = generate_scenario(&cfg).unwrap();
    let inv = invert_stack(
        &sc.synthetic.stack,
        InversionConfig {
            estimate_dem_error: true,
            deformation_model: DeformationModel::Compaction,
        },
        Some(&sc.groundwater),
    )
    .unwrap();
    let truth = &sc.displacement;
    let (mut max_d, mut max_c, mut compared, mut mask_mismatch) = (0.0f64, 0.0f64, 0usize, 0usize);
    for cell in 0..truth.n_cells() {
        for t in 0..truth.n_epochs() {
            match (truth.value(cell, t), inv.displacement.value(cell, t)) {
                (Some(a), Some(b)) => {
                    max_d = max_d.max((a - b).abs());
                    compared += 1;
                }
                (None, None) => {}
                _ => mask_mismatch += 1,
            }
        }
        if truth.cell_fully_valid(cell) {
            match inv.dem_coeff[cell] {
                Some(c) => max_c = max_c.max((c - sc.synthetic.dem_coeffs[cell]).abs()),
                None => mask_mismatch += 1,
            }
        }
    }
    let g = truth.geometry();
    let ok = max_d <= 1e-9 && max_c <= 1e-6 && mask_mismatch == 0 && compared > 0 && within(t0, 30);
    outcome(
        ok,
        format!(
            "{}x{} grid, {compared} cell-epochs: max |d| error {max_d:.2e} mm (<= 1e-9), \
             max DEM error {max_c:.2e} mm/m (<= 1e-6), {mask_mismatch} mask mismatches, limit 30 s",
            g.n_rows, g.n_cols
        ),
    )
}

// ------------------------------------------------------------ gradient check

fn random_net(r: &mut StreamRng, head: Head, seed: u64) -> Net {
    let conv = std::array::from_fn(|_| ConvLayer {
        channels: r.random_range(1..=3),
        kernel: r.random_range(1..=3),
        stride: r.random_range(1..=2),
    });
    let cfg = NetConfig {
        input_channels: 1,
        conv,
        lstm_hidden: std::array::from_fn(|_| r.random_range(1..=4)),
        head,
        init_scale: 1.0,
        seed,
    };
    let mut len = r.random_range(4..=12);
    loop {
        match Net::new(cfg, len) {
            Ok(n) => return n,
            Err(_) => len += 1,
        }
    }
}

/// Max relative error between analytic and central-difference gradients;
/// magnitudes below 1e-6 are compared against 1e-6.
fn grad_error(net: &Net, data: &Dataset, idx: &[usize]) -> f64 {
    let (_, g) = net.loss_and_gradient(data, idx).unwrap();
    let mut p = net.params().to_vec();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + h;
        let up = net.loss_with_params(&p, data, idx);
        p[k] = orig - h;
        let down = net.loss_with_params(&p, data, idx);
        p[k] = orig;
        let num = (up - down) / (2.0 * h);
        worst = worst.max((g[k] - num).abs() / g[k].abs().max(num.abs()).max(1e-6));
    }
    worst
}

fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut nets = 0;
    for i in 0..120u64 {
        let mut r = stream(7, 0x96ad, i);
        let head = if i % 2 == 0 { Head::ScaledSigmoid } else { Head::Softmax };
        let net = random_net(&mut r, head, i);
        let n = r.random_range(1..=3);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..net.seq_len()).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<Target> = (0..n).map(|_| std::array::from_fn(|_| r.random::<f64>())).collect();
        let d = Dataset::new(&x, &y).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        worst = worst.max(grad_error(&net, &d, &idx));
        nets += 1;
    }
    outcome(
        worst <= 1e-4 && within(t0, 60),
        format!("{nets} nets (both heads), max relative error {worst:.2e} (<= 1e-4), limit 60 s"),
    )
}

// ---------------------------------------------------------- tree and forest

/// Exhaustive search over every feature and every midpoint between
/// distinct sorted values; SSE recomputed from scratch for each candidate.
fn exhaustive_split(x: &[Vec<f64>], y: &[Target], min_leaf: usize) -> Option<(usize, f64)> {
    let sse = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for k in 0..10 {
            let m = idx.iter().map(|i| y[*i][k]).sum::<f64>() / idx.len() as f64;
            total += idx.iter().map(|i| (y[*i][k] - m).powi(2)).sum::<f64>();
        }
        total
    };
    let all: Vec<usize> = (0..x.len()).collect();
    let parent = sse(&all);
    // same relative tie and minimum-gain tolerance as the fitter
    let eps = 1e-10 * y.iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|i| x[**i][f] <= thr);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let gain = parent - sse(&l) - sse(&r);
            let better = match best {
                None => gain > eps,
                Some((_, _, g)) => gain > g + eps,
            };
            if better {
                best = Some((f, thr, gain));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

fn micro_dataset(r: &mut StreamRng) -> (Vec<Vec<f64>>, Vec<Target>, usize) {
    let n = r.random_range(1..=10);
    let p = r.random_range(1..=4);
    let x = (0..n).map(|_| (0..p).map(|_| f64::from(r.random_range(0..6))).collect()).collect();
    let y = (0..n)
        .map(|_| {
            let mut t = [0.0; 10];
            for v in t.iter_mut().take(3) {
                *v = f64::from(r.random_range(0..5)) / 4.0;
            }
            t
        })
        .collect();
    (x, y, r.random_range(1..=3))
}

fn tree_forest_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut split_mismatch = 0;
    let mut forest_mismatch = 0;
    for i in 0..500u64 {
        let mut r = stream(11, 0x7ee, i);
        let (x, y, leaf) = micro_dataset(&mut r);
        let d = Dataset::new(&x, &y).unwrap();
        let stump = TreeConfig {
            max_depth: 1,
            min_samples_leaf: leaf,
            feature_subset: FeatureSubset::All,
        };
        let t = fit_tree(&d, &stump, &mut stream(1, 0, i)).unwrap();
        let got = match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf(_) => None,
        };
        if got != exhaustive_split(&x, &y, leaf) {
            split_mismatch += 1;
        }

        let deep = TreeConfig {
            max_depth: 6,
            min_samples_leaf: leaf,
            feature_subset: FeatureSubset::All,
        };
        let tree = fit_tree(&d, &deep, &mut stream(2, 0, i)).unwrap();
        let forest = fit_forest(
            &d,
            &ForestConfig {
                n_trees: 1,
                bootstrap: false,
                max_depth: 6,
                min_samples_leaf: leaf,
                feature_subset: Some(FeatureSubset::All),
                seed: i,
            },
        )
        .unwrap();
        let probes: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..x[0].len()).map(|_| r.random_range(-1.0..7.0)).collect())
            .collect();
        if x.iter().chain(&probes).any(|row| tree.predict(row) != forest.predict(row)) {
            forest_mismatch += 1;
        }
    }
    outcome(
        split_mismatch == 0 && forest_mismatch == 0 && within(t0, 10),
        format!(
            "500 micro-datasets: {split_mismatch} split mismatches vs exhaustive search, \
             {forest_mismatch} one-tree forest mismatches, limit 10 s"
        ),
    )
}

// ------------------------------------------------------------- CLI pipelines

fn cli(dir: &Path, args: &[&str]) {
    let out = Command::new(BIN).current_dir(dir).args(args).output().expect("run subsight");
    assert!(
        out.status.success(),
        "subsight {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// simulate, invert and fuse with `config` and `seed` into a fresh directory.
fn prepare(config: &str, seed: u64) -> (tempfile::TempDir, SampleTable) {
    let dir = tempfile::tempdir().unwrap();
    let s = seed.to_string();
    for cmd in ["simulate", "invert", "fuse"] {
        cli(dir.path(), &["--config", config, "--out", "run", "--seed", &s, cmd]);
    }
    let table = read_samples(&dir.path().join("run").join(SAMPLES_FILE)).unwrap();
    (dir, table)
}

struct CvSeed {
    forest_60: f64,
    tree_60: f64,
    net_60: f64,
    forest_40: f64,
    forest_thin: f64,
    thin_n_train: usize,
    thin_min_distance_m: f64,
    thin_recount_ok: bool,
}

const THIN_M: f64 = 10_000.0;

fn cv_small_seed(seed: u64) -> CvSeed {
    let cfg = Config::read(Path::new(CV_SMALL)).unwrap();
    let (_dir, table) = prepare(CV_SMALL, seed);
    let r = |kind, p| run_protocol(&table, None, p, &cfg.model_spec(kind), seed).unwrap();
    let thin = r(ModelKind::Forest, Protocol::DistanceThin(THIN_M));
    // rebuild the thinned training set and measure it independently
    let (train, _) = split_fraction(&table, DISTANCE_BASE_FRACTION, seed).unwrap();
    let kept = thin_by_distance(&train, THIN_M, seed);
    let pts: Vec<(f64, f64)> = kept.rows().iter().map(|r| (r.x_m, r.y_m)).collect();
    let mut min_d = f64::INFINITY;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            min_d = min_d.min((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    CvSeed {
        forest_60: r(ModelKind::Forest, Protocol::Holdout(0.6)).r,
        tree_60: r(ModelKind::Tree, Protocol::Holdout(0.6)).r,
        net_60: r(ModelKind::Net, Protocol::Holdout(0.6)).r,
        forest_40: r(ModelKind::Forest, Protocol::Holdout(0.4)).r,
        forest_thin: thin.r,
        thin_n_train: thin.n_train,
        thin_min_distance_m: min_d,
        thin_recount_ok: kept.len() == thin.n_train && kept.len() > 1,
    }
}

struct CvResults {
    seeds: Vec<CvSeed>,
    elapsed: Duration,
}

fn cv_results() -> &'static CvResults {
    static CELL: std::sync::OnceLock<CvResults> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let seeds = (1..=5).map(cv_small_seed).collect();
        CvResults {
            seeds,
            elapsed: t0.elapsed(),
        }
    })
}

fn column(f: impl Fn(&CvSeed) -> f64) -> Vec<f64> {
    cv_results().seeds.iter().map(f).collect()
}

fn cv_small_benchmark() -> Outcome {
    let res = cv_results();
    let (rf, dt, net) = (column(|s| s.forest_60), column(|s| s.tree_60), column(|s| s.net_60));
    let (m_rf, m_dt, m_net) = (median(&rf), median(&dt), median(&net));
    let ok = m_rf >= 0.80 && m_dt <= m_rf - 0.05 && m_net >= 0.75 && res.elapsed <= Duration::from_secs(15 * 60);
    outcome(
        ok,
        format!(
            "seeds 1-5, 60% holdout: forest median R {m_rf:.3} (>= 0.80) [{}]; tree median {m_dt:.3} \
             (<= {:.3}) [{}]; net median {m_net:.3} (>= 0.75, min {:.3}) [{}]; pipeline {:.0} s (limit 900 s)",
            fmt_list(&rf),
            m_rf - 0.05,
            fmt_list(&dt),
            net.iter().cloned().fold(f64::INFINITY, f64::min),
            fmt_list(&net),
            res.elapsed.as_secs_f64()
        ),
    )
}

fn sparse_training() -> Outcome {
    let drops = column(|s| s.forest_60 - s.forest_40);
    let m = median(&drops);
    outcome(
        m <= 0.10,
        format!(
            "forest R 60% -> 40% training: median drop {m:.3} (<= 0.10) [{}]; 40% R [{}]",
            fmt_list(&drops),
            fmt_list(&column(|s| s.forest_40))
        ),
    )
}

fn distance_thinning() -> Outcome {
    let res = cv_results();
    let drops = column(|s| s.forest_60 - s.forest_thin);
    let m = median(&drops);
    let min_d = res.seeds.iter().map(|s| s.thin_min_distance_m).fold(f64::INFINITY, f64::min);
    let recount = res.seeds.iter().all(|s| s.thin_recount_ok);
    let sizes: Vec<String> = res.seeds.iter().map(|s| s.thin_n_train.to_string()).collect();
    outcome(
        m <= 0.10 && min_d >= THIN_M && recount,
        format!(
            "min pairwise training distance {:.0} m (>= 10000); forest R drop vs unthinned: median {m:.3} \
             (<= 0.10) [{}]; thinned R [{}]; n_train [{}]",
            min_d,
            fmt_list(&drops),
            fmt_list(&column(|s| s.forest_thin)),
            sizes.join(" ")
        ),
    )
}

// ---------------------------------------------------------- month ablation

fn october_ablation() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    for cmd in [&["simulate"][..], &["invert"], &["fuse"], &["ablate", "--months", "all"]] {
        let mut args = vec!["--config", OCTOBER, "--out", "run"];
        args.extend_from_slice(cmd);
        cli(dir.path(), &args);
    }
    let text = std::fs::read_to_string(dir.path().join("run/ablation.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (cm, cd, cp) = (col("month"), col("mean_degradation"), col("p_value"));
    let rows: BTreeMap<u32, (f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[cm].parse().unwrap(), (f[cd].parse().unwrap(), f[cp].parse().unwrap()))
        })
        .collect();
    let threshold = 0.05 / 12.0;
    let (oct_deg, oct_p) = rows[&10];
    let max_month = *rows.iter().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).unwrap().0;
    let quiet = rows.iter().filter(|(m, (_, p))| **m != 10 && *p >= threshold).count();
    let ok = rows.len() == 12 && max_month == 10 && oct_p < threshold && quiet >= 9 && within(t0, 20 * 60);
    outcome(
        ok,
        format!(
            "October mean degradation {oct_deg:+.4} (largest month: {max_month}), p {oct_p:.2e} \
             (< {threshold:.5}); {quiet}/11 other months not significant (>= 9), limit 1200 s"
        ),
    )
}

// ------------------------------------------------------------- determinism

const DETERMINISM_CFG: &str = "\
n_rows = 12
n_cols = 12
acquisition_spacing_days = 12
n_acquisitions = 40
regions = chowchilla/helm
target_spacing_days = 14
target_epochs = 30
forest_n_trees = 8
net_conv1 = 4 5 2
net_conv2 = 4 5 2
net_conv3 = 4 3 2
net_lstm_hidden = 4 4 4 4 4 4
train_epochs = 2
train_batch_size = 16
folds = 3
thin_distance_m = 4000
";

fn run_all(root: &Path, threads: &str) -> BTreeMap<String, Vec<u8>> {
    let run = root.join(format!("t{threads}"));
    std::fs::create_dir_all(&run).unwrap();
    let cfg = root.join("det.cfg");
    let cfg = cfg.to_str().unwrap();
    let steps: [&[&str]; 10] = [
        &["simulate"],
        &["invert"],
        &["fuse"],
        &["train", "--model", "tree"],
        &["train", "--model", "forest"],
        &["train", "--model", "net"],
        &[
            "eval", "--model", "forest", "--protocol", "holdout:0.6", "--protocol", "kfold:3", "--protocol",
            "distance:4000", "--protocol", "month:10",
        ],
        &["ablate", "--model", "tree", "--months", "all"],
        &["eval", "--model", "net"],
        &["report"],
    ];
    for step in steps {
        let mut args = vec!["--config", cfg, "--out", "out", "--seed", "3", "--threads", threads];
        args.extend_from_slice(step);
        cli(&run, &args);
    }
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(run.join("out")).unwrap() {
        let p: PathBuf = e.unwrap().path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    files
}

/// Differences between two runs other than manifest wall times.
fn diff_runs(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut diffs = Vec::new();
    if a.keys().ne(b.keys()) {
        diffs.push("file sets differ".to_string());
    }
    for (name, x) in a {
        let Some(y) = b.get(name) else { continue };
        if name.starts_with("manifest-") {
            let strip = |v: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(v)
                    .lines()
                    .filter(|l| !l.starts_with("wall_time_s"))
                    .map(str::to_string)
                    .collect()
            };
            if strip(x) != strip(y) {
                diffs.push(name.clone());
            }
        } else if x != y {
            diffs.push(name.clone());
        }
    }
    diffs
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    std::fs::write(root.path().join("det.cfg"), DETERMINISM_CFG).unwrap();
    let one = run_all(root.path(), "1");
    let eight = run_all(root.path(), "8");
    let again = run_all(root.path(), "8");
    let mut diffs = diff_runs(&one, &eight);
    diffs.extend(diff_runs(&eight, &again));
    let manifests = one.keys().filter(|k| k.starts_with("manifest-")).count();
    outcome(
        diffs.is_empty() && manifests == 7 && one.len() > 20,
        format!(
            "all 7 subcommands, {} output files, --threads 1 vs 8 vs 8: {} differing files{}",
            one.len(),
            diffs.len(),
            if diffs.is_empty() { String::new() } else { format!(" ({})", diffs.join(", ")) }
        ),
    )
}

// --------------------------------------------------------- format roundtrip

fn random_value(r: &mut StreamRng) -> f64 {
    match r.random_range(0..4) {
        0 => r.random_range(-1.0..1.0) * 10f64.powi(r.random_range(-12..12)),
        1 => f64::from(r.random_range(-500..500)),
        2 => 0.0,
        _ => r.random_range(-100.0..100.0),
    }
}

fn random_geometry(r: &mut StreamRng) -> Geometry {
    Geometry::new(
        r.random_range(1..=5),
        r.random_range(1..=5),
        r.random_range(10.0..5000.0),
        r.random_range(-1e6..1e6),
        r.random_range(-1e6..1e6),
    )
    .unwrap()
}

fn random_grid(r: &mut StreamRng) -> SpaceTimeGrid {
    let g = random_geometry(r);
    let start = NaiveDate::from_ymd_opt(r.random_range(2000..2030), r.random_range(1..=12), r.random_range(1..=28)).unwrap();
    if r.random_bool(0.5) {
        SpaceTimeGrid::regular(g, start, r.random_range(1..=30), r.random_range(1..=8)).unwrap()
    } else {
        let mut d = start;
        let dates = (0..r.random_range(1..=8))
            .map(|_| {
                d += chrono::Duration::days(r.random_range(1..=40));
                d
            })
            .collect();
        SpaceTimeGrid::new(g, dates).unwrap()
    }
}

fn random_cube(r: &mut StreamRng) -> DataCube {
    let var = [Variable::DisplacementMm, Variable::GroundwaterFt, Variable::PrecipitationMm][r.random_range(0..3)];
    let p_mask = r.random_range(0.0..0.5);
    let mut vals = Vec::new();
    let grid = random_grid(r);
    for _ in 0..grid.n_cells() * grid.n_epochs() {
        vals.push((!r.random_bool(p_mask)).then(|| random_value(r)));
    }
    let n_e = grid.n_epochs();
    DataCube::from_fn(grid, var, |c, t| vals[c * n_e + t]).unwrap()
}

fn random_texture(r: &mut StreamRng) -> TextureStack {
    let g = random_geometry(r);
    let mut tex = TextureStack::undefined(g.clone());
    for cell in 0..g.n_cells() {
        for layer in 0..N_LAYERS {
            if r.random_bool(0.8) {
                let v = if r.random_bool(0.2) { f64::from(r.random_range(0..=100)) } else { r.random_range(0.0..=100.0) };
                tex.set(cell, layer, v).unwrap();
            }
        }
    }
    tex
}

fn random_stack(r: &mut StreamRng) -> InterferogramStack {
    let g = random_geometry(r);
    let n = r.random_range(2..=7usize);
    let mut d = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
    let mut dates = Vec::new();
    for _ in 0..n {
        dates.push(d);
        d += chrono::Duration::days(r.random_range(1..=30));
    }
    let baselines = (0..n).map(|_| random_value(r)).collect();
    let acq = AcquisitionSet::new(dates, baselines).unwrap();
    let max_days = r.random_range(1..=250i64);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| acq.days_between(i, j) <= max_days)
        .collect();
    let obs = (0..pairs.len() * g.n_cells())
        .map(|_| (!r.random_bool(0.2)).then(|| random_value(r)))
        .collect();
    InterferogramStack::new(g, acq, pairs, max_days, obs).unwrap()
}

fn random_samples(r: &mut StreamRng) -> SampleTable {
    let p = r.random_range(1..=6);
    let rows = (0..r.random_range(0..=8))
        .map(|i| SampleRow {
            cell_id: i * 3 + r.random_range(0..3),
            x_m: random_value(r),
            y_m: random_value(r),
            features: (0..p).map(|_| random_value(r)).collect(),
            targets: std::array::from_fn(|_| r.random_range(0.0..=100.0)),
        })
        .collect();
    SampleTable::new(p, rows).unwrap()
}

fn random_model(r: &mut StreamRng, i: u64) -> Model {
    let n = r.random_range(2..=12);
    let p = r.random_range(1..=4);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| random_value(r)).collect()).collect();
    let y: Vec<Target> = (0..n).map(|_| std::array::from_fn(|_| r.random::<f64>())).collect();
    let d = Dataset::new(&x, &y).unwrap();
    match i % 3 {
        0 => {
            let cfg = TreeConfig {
                max_depth: r.random_range(1..=5),
                min_samples_leaf: 1,
                feature_subset: FeatureSubset::All,
            };
            Model::Tree(fit_tree(&d, &cfg, &mut stream(i, 1, 0)).unwrap())
        }
        1 => {
            let cfg = ForestConfig {
                n_trees: r.random_range(1..=4),
                max_depth: 4,
                seed: i,
                ..ForestConfig::default()
            };
            Model::Forest(fit_forest(&d, &cfg).unwrap())
        }
        _ => {
            let head = if r.random_bool(0.5) { Head::Softmax } else { Head::ScaledSigmoid };
            let net = random_net(r, head, i);
            let len = net.seq_len();
            let params = net.params().iter().map(|_| random_value(r)).collect();
            let net = Net::from_parts(
                *net.config(),
                len,
                params,
                vec![random_value(r)],
                vec![r.random_range(0.1..10.0)],
            )
            .unwrap();
            Model::Net(net)
        }
    }
}

fn roundtrip<T>(
    path: &Path,
    value: &T,
    write: fn(&T, &Path) -> subsight::Result<()>,
    read: fn(&Path) -> subsight::Result<T>,
) -> bool {
    write(value, path).unwrap();
    let first = std::fs::read(path).unwrap();
    let back = read(path).unwrap();
    write(&back, path).unwrap();
    std::fs::read(path).unwrap() == first
}

fn format_roundtrips() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f");
    let mut counts = [0usize; 5];
    let mut failures = 0;
    for i in 0..1000u64 {
        let mut r = stream(99, 0xf11e, i);
        let kind = (i % 5) as usize;
        let ok = match kind {
            0 => roundtrip(&p, &random_cube(&mut r), write_cube, read_cube),
            1 => roundtrip(&p, &random_texture(&mut r), write_texture, read_texture),
            2 => roundtrip(&p, &random_stack(&mut r), write_stack, read_stack),
            3 => roundtrip(&p, &random_model(&mut r, i), write_model, read_model),
            _ => roundtrip(&p, &random_samples(&mut r), write_samples, read_samples),
        };
        counts[kind] += 1;
        if !ok {
            failures += 1;
        }
    }
    outcome(
        failures == 0 && within(t0, 10),
        format!(
            "1000 instances (cube {}, texture {}, stack {}, model {}, samples {}): {failures} not byte-identical, limit 10 s",
            counts[0], counts[1], counts[2], counts[3], counts[4]
        ),
    )
}
