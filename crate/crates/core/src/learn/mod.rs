//! Regressors mapping displacement histories to 10-layer coarse-grain
//! composition: CART tree, bagged forest and a conv + LSTM network.
//!
//! Targets are handled in normalized units (percent / 100) throughout;
//! [`Model::predict_percent`] rescales at the boundary.

mod forest;
mod model;
mod net;
mod tree;


pub use forest::{fit_forest, predict_forest, Forest, ForestConfig};
pub use model::{model_to_string, parse_model, read_model, write_model, Model, ModelKind, ModelSpec, MODEL_MAGIC};
pub use net::{train_net, ConvLayer, Head, Net, NetConfig, TrainConfig, N_CONV, N_LSTM};
pub use tree::{fit_tree, FeatureSubset, Node, Tree, TreeConfig};

use crate::error::{Error, Result};
use crate::gridstore::{SampleTable, N_LAYERS};

pub const N_OUT: usize = N_LAYERS;

/// One normalized 10-layer target.
pub type Target = [f64; N_OUT];

/// Borrowed feature rows and normalized targets.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [Target],
}

impl<'a> Dataset<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [Target]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!("{} feature rows, {} targets", x.len(), y.len())));
        }
        if let Some(first) = x.first() {
            if x.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Dimension("feature rows differ in length".into()));
            }
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

/// Owned rows of a [`SampleTable`] with targets divided by 100.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedData {
    pub n_features: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Target>,
}

impl OwnedData {
    pub fn from_table(table: &SampleTable) -> Self {
        OwnedData {
            n_features: table.n_features(),
            x: table.rows().iter().map(|r| r.features.clone()).collect(),
            y: table.rows().iter().map(|r| r.targets.map(|v| v / 100.0)).collect(),
        }
    }

    pub fn view(&self) -> Dataset<'_> {
        Dataset { x: &self.x, y: &self.y }
    }
}

/// Mean over the components of the squared difference.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), target.len());
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Checked variant of [`loss_mse`] for untrusted lengths.
pub fn try_loss_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "loss needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(loss_mse(pred, target))
}
