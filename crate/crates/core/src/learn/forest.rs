use rand::Rng;
use rayon::prelude::*;

use super::tree::{fit_tree_indices, mean_target, FeatureSubset, Tree, TreeConfig};
use super::{Dataset, Target};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// `None` means `ceil(sqrt(n_features))` per node.
    pub feature_subset: Option<FeatureSubset>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            bootstrap: true,
            max_depth: 16,
            min_samples_leaf: 1,
            feature_subset: None,
            seed: 1,
        }
    }
}

impl ForestConfig {
    pub fn tree_config(&self, n_features: usize) -> TreeConfig {
        let default = FeatureSubset::Count((n_features as f64).sqrt().ceil().max(1.0) as usize);
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            feature_subset: self.feature_subset.unwrap_or(default),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::Invalid("n_trees must be >= 1".into()));
        }
        self.tree_config(1).validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub(crate) config: ForestConfig,
    pub(crate) trees: Vec<Tree>,
}

/// Bagged trees; tree `t` draws its bootstrap sample and feature subsets
/// from its own seeded stream, so results do not depend on thread count.
pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::Invalid("cannot fit a forest on zero samples".into()));
    }
    let tree_cfg = config.tree_config(data.n_features());
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(config.seed, purpose::TREE, t as u64);
            let idx = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_indices(data, idx, &tree_cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { config: *config, trees })
}

impl Forest {
    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    /// Per-output mean of the tree predictions, in tree order.
    pub fn predict(&self, x: &[f64]) -> Target {
        let preds: Vec<Target> = self.trees.iter().map(|t| t.predict(x)).collect();
        mean_target(preds.iter())
    }
}

pub fn predict_forest(forest: &Forest, x: &[f64]) -> Target {
    forest.predict(x)
}
