use rand::seq::index::sample;
use rand::Rng;

use super::{Dataset, Target, N_OUT};
use crate::error::{Error, Result};

/// Relative slack used both for "strictly better split" and for the minimum
/// useful gain, scaled by the node's uncentered sum of squares.
pub(crate) const GAIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSubset {
    All,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_subset: FeatureSubset,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 12,
            min_samples_leaf: 2,
            feature_subset: FeatureSubset::All,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Invalid("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Invalid("min_samples_leaf must be >= 1".into()));
        }
        if self.feature_subset == FeatureSubset::Count(0) {
            return Err(Error::Invalid("feature_subset_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(Target),
    /// Samples with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree over normalized multi-output targets. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) config: TreeConfig,
    pub(crate) n_features: usize,
    pub(crate) nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Mean of each output; exact for constant columns.
pub(crate) fn mean_target<'a>(rows: impl Iterator<Item = &'a Target> + Clone) -> Target {
    let mut out = [0.0; N_OUT];
    let first = *rows.clone().next().expect("non-empty rows");
    let mut n = 0usize;
    let mut constant = [true; N_OUT];
    for r in rows {
        n += 1;
        for k in 0..N_OUT {
            out[k] += r[k];
            constant[k] &= r[k] == first[k];
        }
    }
    for k in 0..N_OUT {
        out[k] = if constant[k] { first[k] } else { out[k] / n as f64 };
    }
    out
}

fn sse(sum: &Target, sumsq: &Target, n: usize) -> f64 {
    (0..N_OUT).map(|k| sumsq[k] - sum[k] * sum[k] / n as f64).sum()
}

/// Best split of `idx` over `features` (ascending), or `None` when no split
/// improves on the parent by more than the tolerance.
pub(crate) fn best_split(data: &Dataset, idx: &[usize], features: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let mut sum = [0.0; N_OUT];
    let mut sumsq = [0.0; N_OUT];
    for &i in idx {
        for k in 0..N_OUT {
            sum[k] += data.y[i][k];
            sumsq[k] += data.y[i][k] * data.y[i][k];
        }
    }
    let parent = sse(&sum, &sumsq, n);
    let eps = GAIN_TOL * sumsq.iter().sum::<f64>();
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|a, b| data.x[*a][f].total_cmp(&data.x[*b][f]));
        let mut ls = [0.0; N_OUT];
        let mut lq = [0.0; N_OUT];
        for pos in 0..n - 1 {
            let i = order[pos];
            for k in 0..N_OUT {
                ls[k] += data.y[i][k];
                lq[k] += data.y[i][k] * data.y[i][k];
            }
            let (a, b) = (data.x[i][f], data.x[order[pos + 1]][f]);
            let nl = pos + 1;
            if a == b || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let mut rs = [0.0; N_OUT];
            let mut rq = [0.0; N_OUT];
            for k in 0..N_OUT {
                rs[k] = sum[k] - ls[k];
                rq[k] = sumsq[k] - lq[k];
            }
            let gain = parent - sse(&ls, &lq, nl) - sse(&rs, &rq, n - nl);
            let better = match best {
                None => gain > eps,
                Some(b) => gain > b.gain + eps,
            };
            if better {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: 0.5 * (a + b),
                    gain,
                });
            }
        }
    }
    best
}

fn feature_subset<R: Rng>(p: usize, subset: FeatureSubset, rng: &mut R) -> Vec<usize> {
    match subset {
        FeatureSubset::Count(k) if k < p => {
            let mut f = sample(rng, p, k).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    }
}

/// Greedy CART on `idx` (duplicates allowed, as in bootstrap resamples).
pub(crate) fn fit_tree_indices<R: Rng>(data: &Dataset, idx: Vec<usize>, config: &TreeConfig, rng: &mut R) -> Result<Tree> {
    config.validate()?;
    if idx.is_empty() {
        return Err(Error::Invalid("cannot fit a tree on zero samples".into()));
    }
    let p = data.n_features();
    let mut nodes = Vec::new();
    // (node slot, sample indices, depth), expanded depth-first
    let mut stack = vec![(0usize, idx, 0usize)];
    nodes.push(Node::Leaf([0.0; N_OUT]));
    while let Some((slot, idx, depth)) = stack.pop() {
        let split = if depth < config.max_depth {
            let features = feature_subset(p, config.feature_subset, rng);
            best_split(data, &idx, &features, config.min_samples_leaf)
        } else {
            None
        };
        match split {
            None => nodes[slot] = Node::Leaf(mean_target(idx.iter().map(|i| &data.y[*i]))),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| data.x[**i][s.feature] <= s.threshold);
                let (li, ri) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf([0.0; N_OUT]));
                nodes.push(Node::Leaf([0.0; N_OUT]));
                nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: li,
                    right: ri,
                };
                stack.push((ri, r, depth + 1));
                stack.push((li, l, depth + 1));
            }
        }
    }
    Ok(Tree {
        config: *config,
        n_features: p,
        nodes,
    })
}

/// Fits a tree on every row of `data`.
pub fn fit_tree<R: Rng>(data: &Dataset, config: &TreeConfig, rng: &mut R) -> Result<Tree> {
    fit_tree_indices(data, (0..data.len()).collect(), config, rng)
}

impl Tree {
    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn predict(&self, x: &[f64]) -> Target {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Checks child links and feature indices, e.g. after parsing.
    pub(crate) fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Invalid("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature, left, right, ..
            } = n
            {
                if *feature >= self.n_features || *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err(Error::Invalid(format!("malformed split at node {i}")));
                }
            }
        }
        Ok(())
    }
}
