use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::gridstore::SampleTable;
use crate::rng::{self, purpose};

fn shuffled(n: usize, seed: u64, purpose: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, purpose, 0));
    idx
}

/// Seeded uniform split of `0..n`; train gets `round(fraction * n)`.
/// Both halves are returned in ascending order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Invalid(format!("train fraction must be in (0, 1), got {fraction}")));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Invalid(format!(
            "fraction {fraction} of {n} cells leaves an empty side"
        )));
    }
    let idx = shuffled(n, seed, purpose::SPLIT);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_fraction(table: &SampleTable, fraction: f64, seed: u64) -> Result<(SampleTable, SampleTable)> {
    let (a, b) = split_indices(table.len(), fraction, seed)?;
    Ok((table.subset(&a), table.subset(&b)))
}

/// Greedy thinning in seeded random order: a point is kept iff it lies at
/// least `min_distance_m` from every point kept before it. Returns sorted
/// indices.
pub fn thin_indices(xy: &[(f64, f64)], min_distance_m: f64, seed: u64) -> Vec<usize> {
    if min_distance_m <= 0.0 {
        return (0..xy.len()).collect();
    }
    let d2 = min_distance_m * min_distance_m;
    let mut kept: Vec<usize> = Vec::new();
    for i in shuffled(xy.len(), seed, purpose::THIN) {
        let (x, y) = xy[i];
        let ok = kept.iter().all(|&j| {
            let (dx, dy) = (xy[j].0 - x, xy[j].1 - y);
            dx * dx + dy * dy >= d2
        });
        if ok {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

pub fn thin_by_distance(table: &SampleTable, min_distance_m: f64, seed: u64) -> SampleTable {
    let xy: Vec<(f64, f64)> = table.rows().iter().map(|r| (r.x_m, r.y_m)).collect();
    table.subset(&thin_indices(&xy, min_distance_m, seed))
}

/// Seeded partition of `0..n` into `k` folds; the first `n % k` folds hold
/// one extra index. Each fold is sorted.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Invalid(format!("kfold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Invalid(format!("kfold with k = {k} > n = {n}")));
    }
    let idx = shuffled(n, seed, purpose::KFOLD);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}
