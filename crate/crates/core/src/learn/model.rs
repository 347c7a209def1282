use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::forest::{fit_forest, Forest, ForestConfig};
use super::net::{train_net, ConvLayer, Head, Net, NetConfig, TrainConfig, N_CONV, N_LSTM};
use super::tree::{fit_tree, FeatureSubset, Node, Tree, TreeConfig};
use super::{OwnedData, Target, N_OUT};
use crate::error::{Error, Result};
use crate::gridstore::text::{self, fmt_f64, Lines};
use crate::gridstore::SampleTable;
use crate::rng::{self, purpose};

pub const MODEL_MAGIC: &str = "SUBSIGHT-MODEL v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Tree,
    Forest,
    Net,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Net => "net",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(ModelKind::Tree),
            "forest" => Ok(ModelKind::Forest),
            "net" => Ok(ModelKind::Net),
            _ => Err(Error::Invalid(format!("unknown model `{s}` (tree|forest|net)"))),
        }
    }
}

/// A fitted regressor of any family.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(Tree),
    Forest(Forest),
    Net(Net),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Tree(_) => ModelKind::Tree,
            Model::Forest(_) => ModelKind::Forest,
            Model::Net(_) => ModelKind::Net,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_features(),
            Model::Forest(f) => f.n_features(),
            Model::Net(n) => n.n_features(),
        }
    }

    /// Normalized prediction (fractions in `[0, 1]` for trained models).
    pub fn predict(&self, x: &[f64]) -> Result<Target> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension(format!(
                "{} features, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(match self {
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.predict(x),
            Model::Net(n) => n.forward(x)?,
        })
    }

    pub fn predict_percent(&self, x: &[f64]) -> Result<Target> {
        Ok(self.predict(x)?.map(|v| v * 100.0))
    }

    /// Percent predictions for every row, in row order.
    pub fn predict_table(&self, table: &SampleTable) -> Result<Vec<Target>> {
        table
            .rows()
            .par_iter()
            .map(|r| self.predict_percent(&r.features))
            .collect()
    }
}

/// Family plus every hyperparameter needed to fit it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            tree: TreeConfig::default(),
            forest: ForestConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            seed: 1,
        }
    }

    /// Same spec with every seeded component driven by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.forest.seed = seed;
        self.net.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Fits on `table`; the returned history is the per-epoch training loss
    /// (empty for trees and forests).
    pub fn fit(&self, table: &SampleTable) -> Result<(Model, Vec<f64>)> {
        if table.is_empty() {
            return Err(Error::Invalid("cannot fit a model on zero samples".into()));
        }
        let data = OwnedData::from_table(table);
        let d = data.view();
        match self.kind {
            ModelKind::Tree => {
                let mut r = rng::stream(self.seed, purpose::TREE, u64::MAX);
                Ok((Model::Tree(fit_tree(&d, &self.tree, &mut r)?), Vec::new()))
            }
            ModelKind::Forest => Ok((Model::Forest(fit_forest(&d, &self.forest)?), Vec::new())),
            ModelKind::Net => {
                let ch = self.net.input_channels;
                if !d.n_features().is_multiple_of(ch) {
                    return Err(Error::Dimension(format!(
                        "{} features do not split into {ch} equal channels",
                        d.n_features()
                    )));
                }
                let mut net = Net::new(self.net, d.n_features() / ch)?;
                net.fit_normalization(&d)?;
                let hist = train_net(&mut net, &d, &self.train)?;
                Ok((Model::Net(net), hist))
            }
        }
    }
}

fn subset_name(s: Option<FeatureSubset>) -> String {
    match s {
        None => "auto".into(),
        Some(FeatureSubset::All) => "all".into(),
        Some(FeatureSubset::Count(k)) => k.to_string(),
    }
}

fn write_tree_config(out: &mut String, c: &TreeConfig) {
    let _ = writeln!(out, "max_depth {}", c.max_depth);
    let _ = writeln!(out, "min_samples_leaf {}", c.min_samples_leaf);
    let _ = writeln!(out, "feature_subset {}", subset_name(Some(c.feature_subset)));
}

fn write_tree(out: &mut String, t: &Tree) {
    let _ = writeln!(out, "nodes {}", t.nodes().len());
    for n in t.nodes() {
        match n {
            Node::Leaf(v) => {
                let vals: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
                let _ = writeln!(out, "L {}", vals.join(" "));
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "S {feature} {} {left} {right}", fmt_f64(*threshold));
            }
        }
    }
}

/// Versioned text form: magic, kind, a config block, then the fitted
/// structure or flat parameter list. Floats use shortest round-trip form.
pub fn model_to_string(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "kind {}", model.kind().name());
    let _ = writeln!(out, "n_features {}", model.n_features());
    match model {
        Model::Tree(t) => {
            write_tree_config(&mut out, t.config());
            write_tree(&mut out, t);
        }
        Model::Forest(f) => {
            let c = f.config();
            let _ = writeln!(out, "n_trees {}", c.n_trees);
            let _ = writeln!(out, "bootstrap {}", c.bootstrap);
            let _ = writeln!(out, "max_depth {}", c.max_depth);
            let _ = writeln!(out, "min_samples_leaf {}", c.min_samples_leaf);
            let _ = writeln!(out, "feature_subset {}", subset_name(c.feature_subset));
            let _ = writeln!(out, "seed {}", c.seed);
            for t in f.trees() {
                write_tree(&mut out, t);
            }
        }
        Model::Net(n) => {
            let c = n.config();
            let _ = writeln!(out, "input_channels {}", c.input_channels);
            for (i, l) in c.conv.iter().enumerate() {
                let _ = writeln!(out, "conv{} {} {} {}", i + 1, l.channels, l.kernel, l.stride);
            }
            let hidden: Vec<String> = c.lstm_hidden.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(out, "lstm_hidden {}", hidden.join(" "));
            let _ = writeln!(out, "head {}", c.head.name());
            let _ = writeln!(out, "init_scale {}", fmt_f64(c.init_scale));
            let _ = writeln!(out, "seed {}", c.seed);
            let _ = writeln!(out, "seq_len {}", n.seq_len());
            let (shift, scale) = n.normalization();
            let fmt = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "shift {}", fmt(shift));
            let _ = writeln!(out, "scale {}", fmt(scale));
            let _ = writeln!(out, "params {}", n.params().len());
            let _ = writeln!(out, "{}", fmt(n.params()));
        }
    }
    out
}

pub fn write_model(model: &Model, path: &Path) -> Result<()> {
    text::write_string(path, &model_to_string(model))
}

pub fn read_model(path: &Path) -> Result<Model> {
    let s = text::read_to_string(path)?;
    parse_model(path, &s)
}

/// Next line as `key v1 v2 ...`, returning the values.
fn keyed<'a>(lines: &mut Lines<'a>, key: &str) -> Result<Vec<&'a str>> {
    let l = lines.next_line(key)?;
    let mut toks = l.split_whitespace();
    if toks.next() != Some(key) {
        return Err(lines.err(format!("expected `{key}`, found {l:?}")));
    }
    Ok(toks.collect())
}

fn one<'a>(lines: &mut Lines<'a>, key: &str) -> Result<&'a str> {
    let v = keyed(lines, key)?;
    match v.as_slice() {
        [x] => Ok(x),
        _ => Err(lines.err(format!("`{key}` takes one value"))),
    }
}

fn count(lines: &mut Lines<'_>, key: &str) -> Result<usize> {
    let v = one(lines, key)?;
    text::parse_usize(lines, v, key)
}

fn floats(lines: &Lines<'_>, toks: &[&str], what: &str) -> Result<Vec<f64>> {
    toks.iter().map(|t| text::parse_header_f64(lines, t, what)).collect()
}

fn parse_subset(lines: &Lines<'_>, tok: &str) -> Result<Option<FeatureSubset>> {
    match tok {
        "auto" => Ok(None),
        "all" => Ok(Some(FeatureSubset::All)),
        k => Ok(Some(FeatureSubset::Count(text::parse_usize(lines, k, "feature_subset")?))),
    }
}

fn parse_seed(lines: &mut Lines<'_>) -> Result<u64> {
    let tok = one(lines, "seed")?;
    tok.parse()
        .map_err(|_| lines.err(format!("seed: not an integer: {tok:?}")))
}

fn parse_bool(lines: &Lines<'_>, tok: &str, what: &str) -> Result<bool> {
    tok.parse()
        .map_err(|_| lines.err(format!("{what}: expected true or false, found {tok:?}")))
}

fn read_tree(lines: &mut Lines<'_>, n_features: usize, config: TreeConfig) -> Result<Tree> {
    let n = count(lines, "nodes")?;
    let mut nodes = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let l = lines.next_line("tree node")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let node = match toks.as_slice() {
            ["L", vals @ ..] if vals.len() == N_OUT => {
                let v = floats(lines, vals, "leaf value")?;
                Node::Leaf(std::array::from_fn(|k| v[k]))
            }
            ["S", f, t, l, r] => Node::Split {
                feature: text::parse_usize(lines, f, "feature")?,
                threshold: text::parse_header_f64(lines, t, "threshold")?,
                left: text::parse_usize(lines, l, "left")?,
                right: text::parse_usize(lines, r, "right")?,
            },
            _ => return Err(lines.err(format!("malformed tree node {l:?}"))),
        };
        nodes.push(node);
    }
    let t = Tree {
        config,
        n_features,
        nodes,
    };
    t.validate().map_err(|e| lines.err(e.to_string()))?;
    Ok(t)
}

pub fn parse_model(path: &Path, s: &str) -> Result<Model> {
    let mut lines = Lines::new(path, s);
    lines.expect_magic(MODEL_MAGIC)?;
    let kind: ModelKind = one(&mut lines, "kind")?.parse().map_err(|e: Error| lines.err(e.to_string()))?;
    let n_features = count(&mut lines, "n_features")?;
    let model = match kind {
        ModelKind::Tree => {
            let max_depth = count(&mut lines, "max_depth")?;
            let min_samples_leaf = count(&mut lines, "min_samples_leaf")?;
            let tok = one(&mut lines, "feature_subset")?;
            let config = TreeConfig {
                max_depth,
                min_samples_leaf,
                feature_subset: parse_subset(&lines, tok)?.unwrap_or(FeatureSubset::All),
            };
            Model::Tree(read_tree(&mut lines, n_features, config)?)
        }
        ModelKind::Forest => {
            let n_trees = count(&mut lines, "n_trees")?;
            let tok = one(&mut lines, "bootstrap")?;
            let bootstrap = parse_bool(&lines, tok, "bootstrap")?;
            let max_depth = count(&mut lines, "max_depth")?;
            let min_samples_leaf = count(&mut lines, "min_samples_leaf")?;
            let tok = one(&mut lines, "feature_subset")?;
            let feature_subset = parse_subset(&lines, tok)?;
            let seed = parse_seed(&mut lines)?;
            let config = ForestConfig {
                n_trees,
                bootstrap,
                max_depth,
                min_samples_leaf,
                feature_subset,
                seed,
            };
            config.validate().map_err(|e| lines.err(e.to_string()))?;
            let tree_cfg = config.tree_config(n_features);
            let trees = (0..n_trees)
                .map(|_| read_tree(&mut lines, n_features, tree_cfg))
                .collect::<Result<_>>()?;
            Model::Forest(Forest { config, trees })
        }
        ModelKind::Net => {
            let input_channels = count(&mut lines, "input_channels")?;
            let mut conv = [ConvLayer {
                channels: 0,
                kernel: 0,
                stride: 0,
            }; N_CONV];
            for (i, c) in conv.iter_mut().enumerate() {
                let key = format!("conv{}", i + 1);
                let v = keyed(&mut lines, &key)?;
                if v.len() != 3 {
                    return Err(lines.err(format!("`{key}` takes channels kernel stride")));
                }
                c.channels = text::parse_usize(&lines, v[0], "channels")?;
                c.kernel = text::parse_usize(&lines, v[1], "kernel")?;
                c.stride = text::parse_usize(&lines, v[2], "stride")?;
            }
            let h = keyed(&mut lines, "lstm_hidden")?;
            if h.len() != N_LSTM {
                return Err(lines.err(format!("`lstm_hidden` takes {N_LSTM} widths")));
            }
            let mut lstm_hidden = [0; N_LSTM];
            for (dst, t) in lstm_hidden.iter_mut().zip(&h) {
                *dst = text::parse_usize(&lines, t, "lstm_hidden")?;
            }
            let head_tok = one(&mut lines, "head")?;
            let head = Head::parse(head_tok).ok_or_else(|| lines.err(format!("unknown head {head_tok:?}")))?;
            let init = one(&mut lines, "init_scale")?;
            let init_scale = text::parse_header_f64(&lines, init, "init_scale")?;
            let seed = parse_seed(&mut lines)?;
            let seq_len = count(&mut lines, "seq_len")?;
            let shift_t = keyed(&mut lines, "shift")?;
            let shift = floats(&lines, &shift_t, "shift")?;
            let scale_t = keyed(&mut lines, "scale")?;
            let scale = floats(&lines, &scale_t, "scale")?;
            let n_params = count(&mut lines, "params")?;
            let l = lines.next_line("parameter values")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != n_params {
                return Err(lines.err(format!("expected {n_params} parameters, found {}", toks.len())));
            }
            let params = floats(&lines, &toks, "parameter")?;
            let config = NetConfig {
                input_channels,
                conv,
                lstm_hidden,
                head,
                init_scale,
                seed,
            };
            let net = Net::from_parts(config, seq_len, params, shift, scale).map_err(|e| lines.err(e.to_string()))?;
            if net.n_features() != n_features {
                return Err(lines.err("n_features disagrees with the net input shape"));
            }
            Model::Net(net)
        }
    };
    if let Ok(extra) = lines.next_line("end") {
        if !extra.trim().is_empty() {
            return Err(lines.err("trailing content after model"));
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridstore::SampleRow;

    fn table(n: usize, p: usize) -> SampleTable {
        let rows = (0..n)
            .map(|i| {
                let features: Vec<f64> = (0..p).map(|j| ((i * 7 + j * 3) % 11) as f64 - 5.0).collect();
                let m = features.iter().sum::<f64>();
                SampleRow {
                    cell_id: i,
                    x_m: i as f64 * 2000.0,
                    y_m: 0.0,
                    features,
                    targets: std::array::from_fn(|k| (50.0 + m * (k as f64 + 1.0)).clamp(0.0, 100.0)),
                }
            })
            .collect();
        SampleTable::new(p, rows).unwrap()
    }

    fn tiny_net_spec() -> ModelSpec {
        let mut s = ModelSpec::new(ModelKind::Net);
        s.net.conv = [ConvLayer {
            channels: 2,
            kernel: 2,
            stride: 1,
        }; N_CONV];
        s.net.lstm_hidden = [3; N_LSTM];
        s.train.epochs = 2;
        s
    }

    #[test]
    fn roundtrip_every_kind() {
        let t = table(30, 8);
        for spec in [
            ModelSpec::new(ModelKind::Tree),
            ModelSpec {
                forest: ForestConfig {
                    n_trees: 5,
                    ..ForestConfig::default()
                },
                ..ModelSpec::new(ModelKind::Forest)
            },
            tiny_net_spec(),
        ] {
            let (m, _) = spec.fit(&t).unwrap();
            let s = model_to_string(&m);
            let back = parse_model(Path::new("m.txt"), &s).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_string(&back), s);
            let row = &t.rows()[3].features;
            assert_eq!(back.predict(row).unwrap(), m.predict(row).unwrap());
        }
    }

    #[test]
    fn malformed_files_error() {
        let p = Path::new("m.txt");
        assert!(parse_model(p, "SUBSIGHT-MODEL v2\n").is_err());
        assert!(parse_model(p, "SUBSIGHT-MODEL v1\nkind svm\n").is_err());
        let bad_child =
            "SUBSIGHT-MODEL v1\nkind tree\nn_features 1\nmax_depth 3\nmin_samples_leaf 1\nfeature_subset all\nnodes 1\nS 0 0.5 1 2\n";
        assert!(parse_model(p, bad_child).is_err());
        let (m, _) = ModelSpec::new(ModelKind::Tree).fit(&table(10, 2)).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn subset_names() {
        assert_eq!(subset_name(None), "auto");
        assert_eq!(subset_name(Some(FeatureSubset::Count(4))), "4");
    }
}
