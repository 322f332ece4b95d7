//! Gradient-boosted decision trees for binary classification.
//!
//! Newton boosting on (class-weighted) logistic loss with level-wise binary
//! trees over quantile-binned features. Each tree keeps the raw Newton leaf
//! values `-G/(H+λ)` and a `scale` (the learning rate) applied at prediction.

mod binning;
mod document;

pub use binning::{feature_boundaries, BinMapper, MISSING_BIN};
pub use document::{FORMAT_NAME, FORMAT_VERSION};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    /// Positives weighted `n_neg / n_pos`, negatives 1.
    Auto,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GBDTConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub depth: usize,
    pub l2_leaf_reg: f64,
    /// Fraction of features drawn per tree.
    pub feature_subsample: f64,
    /// Maximum number of bins per feature.
    pub border_count: usize,
    /// Bernoulli row sampling rate per tree.
    pub row_subsample: f64,
    pub class_weighting: ClassWeighting,
    /// Truncate at the best validation iteration when a validation set is given.
    pub early_stopping: bool,
    pub seed: u64,
    /// Worker threads. Not serialized.
    #[serde(skip_serializing)]
    pub threads: usize,
    pub min_child_hessian: f64,
}

impl Default for GBDTConfig {
    fn default() -> Self {
        GBDTConfig {
            iterations: 300,
            learning_rate: 0.01,
            depth: 6,
            l2_leaf_reg: 5.0,
            feature_subsample: 0.75,
            border_count: 64,
            row_subsample: 0.6,
            class_weighting: ClassWeighting::Auto,
            early_stopping: true,
            seed: 0,
            threads: 10,
            min_child_hessian: 1e-3,
        }
    }
}

impl GBDTConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in (0, 1], got {v}")))
            }
        };
        frac("feature_subsample", self.feature_subsample)?;
        frac("row_subsample", self.row_subsample)?;
        if self.depth == 0 || self.depth > 16 {
            return Err(Error::InvalidConfig(format!("depth must be in 1..=16, got {}", self.depth)));
        }
        if self.border_count == 0 || self.border_count >= MISSING_BIN as usize {
            return Err(Error::InvalidConfig(format!("border_count {} out of range", self.border_count)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.l2_leaf_reg.is_finite() && self.l2_leaf_reg >= 0.0) {
            return Err(Error::InvalidConfig("l2_leaf_reg must be nonnegative".into()));
        }
        if !(self.min_child_hessian.is_finite() && self.min_child_hessian >= 0.0) {
            return Err(Error::InvalidConfig("min_child_hessian must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Node {
    Split {
        feature: usize,
        /// Values strictly below go left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
        gain: f64,
        cover: u64,
    },
    Leaf {
        value: f64,
        sum_grad: f64,
        sum_hess: f64,
        cover: u64,
    },
}

impl Node {
    pub fn cover(&self) -> u64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// A binary tree; node 0 is the root and children follow their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Multiplier applied to leaf values (the learning rate).
    pub scale: f64,
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *missing_left } else { v < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Scaled contribution of the node's leaf value (0 for split nodes).
    pub fn node_output(&self, i: usize) -> f64 {
        match &self.nodes[i] {
            Node::Leaf { value, .. } => self.scale * value,
            Node::Split { .. } => 0.0,
        }
    }

    /// Margin contribution of this tree for a row.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.node_output(self.leaf_index(row))
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Distinct split features, ascending.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalHistory {
    /// Weighted training logloss after each tree.
    pub train_logloss: Vec<f64>,
    /// Validation logloss after each tree (empty without validation data).
    pub valid_logloss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub feature_names: Vec<String>,
    pub base_margin: f64,
    pub trees: Vec<Tree>,
    pub config: GBDTConfig,
    /// Number of trees kept.
    pub best_iteration: usize,
    pub eval: EvalHistory,
}

pub fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

/// ln(1 + e^m) without overflow.
fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// Logistic loss of a margin against a 0/1 label.
pub fn logloss(margin: f64, label: u8) -> f64 {
    softplus(margin) - if label == 1 { margin } else { 0.0 }
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_arity(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(Error::ArityMismatch {
                expected: self.feature_names.len(),
                found: row.len(),
            });
        }
        Ok(())
    }

    /// Margin from the base and the first `n_trees` trees.
    pub fn predict_margin_at(&self, row: &[f64], n_trees: usize) -> Result<f64> {
        self.check_arity(row)?;
        Ok(self.margin_unchecked(row, n_trees))
    }

    pub(crate) fn margin_unchecked(&self, row: &[f64], n_trees: usize) -> f64 {
        let mut m = self.base_margin;
        for t in &self.trees[..n_trees.min(self.trees.len())] {
            m += t.predict(row);
        }
        m
    }

    pub fn predict_margin(&self, row: &[f64]) -> Result<f64> {
        self.predict_margin_at(row, self.trees.len())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.predict_margin(row)?))
    }

    /// Column positions of the model's features in `table`, by name.
    pub fn column_map(&self, table: &FeatureTable) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|n| {
                table
                    .column_index(n)
                    .ok_or_else(|| Error::InvalidTable(format!("table lacks model feature {n:?}")))
            })
            .collect()
    }

    /// Rows of `table` rearranged into model feature order.
    pub fn aligned_rows(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        let map = self.column_map(table)?;
        Ok((0..table.n_rows())
            .map(|r| {
                let row = table.row(r);
                map.iter().map(|&c| row[c]).collect()
            })
            .collect())
    }

    pub fn predict_table_margin(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        Ok(self
            .aligned_rows(table)?
            .iter()
            .map(|r| self.margin_unchecked(r, self.trees.len()))
            .collect())
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        Ok(self.predict_table_margin(table)?.into_iter().map(sigmoid).collect())
    }

    /// Copy keeping the first `n_trees` trees.
    pub fn truncated(&self, n_trees: usize) -> Model {
        let mut m = self.clone();
        m.trees.truncate(n_trees);
        m.best_iteration = m.trees.len();
        m
    }
}

/// Runs `f` on a pool of `threads` workers unless already inside a pool.
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if rayon::current_thread_index().is_some() {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Clone, Copy, Default)]
struct Stat {
    g: f64,
    h: f64,
    n: u64,
}

impl Stat {
    fn add(&mut self, o: Stat) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }
}

struct SplitChoice {
    feature: usize,
    boundary: usize,
    missing_left: bool,
    gain: f64,
}

struct Grower<'a> {
    bins: &'a [Vec<u16>],
    mapper: &'a BinMapper,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GBDTConfig,
    parallel: bool,
}

impl Grower<'_> {
    /// Histograms `[feature][node][bin]`, missing in the last slot. Rows are
    /// visited in ascending order so sums do not depend on scheduling.
    fn histograms(&self, features: &[usize], rows: &[usize], node_of: &[usize], n_nodes: usize) -> Vec<Vec<Vec<Stat>>> {
        let build = |&f: &usize| {
            let nb = self.mapper.n_bins(f);
            let mut h = vec![vec![Stat::default(); nb + 1]; n_nodes];
            let col = &self.bins[f];
            for (k, &r) in rows.iter().enumerate() {
                let b = col[r];
                let slot = if b == MISSING_BIN { nb } else { b as usize };
                let s = &mut h[node_of[k]][slot];
                s.g += self.grad[r];
                s.h += self.hess[r];
                s.n += 1;
            }
            h
        };
        if self.parallel {
            features.par_iter().map(build).collect()
        } else {
            features.iter().map(build).collect()
        }
    }

    fn best_split(&self, features: &[usize], hists: &[Vec<Vec<Stat>>], node: usize) -> Option<SplitChoice> {
        let lambda = self.config.l2_leaf_reg;
        let min_h = self.config.min_child_hessian;
        let score = |s: Stat| s.g * s.g / (s.h + lambda);
        let mut best: Option<SplitChoice> = None;
        for (fi, &f) in features.iter().enumerate() {
            let h = &hists[fi][node];
            let nb = h.len() - 1;
            let missing = h[nb];
            let mut suffix = vec![Stat::default(); nb + 1];
            for b in (0..nb).rev() {
                let mut s = suffix[b + 1];
                s.add(h[b]);
                suffix[b] = s;
            }
            let mut prefix = Stat::default();
            for t in 0..nb.saturating_sub(1) {
                prefix.add(h[t]);
                let right_bins = suffix[t + 1];
                let options: &[bool] = if missing.n > 0 { &[true, false] } else { &[true] };
                for &ml in options {
                    let (mut l, mut r) = (prefix, right_bins);
                    if ml {
                        l.add(missing);
                    } else {
                        r.add(missing);
                    }
                    if l.n == 0 || r.n == 0 || l.h < min_h || r.h < min_h {
                        continue;
                    }
                    let mut all = l;
                    all.add(r);
                    let gain = 0.5 * (score(l) + score(r) - score(all));
                    if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(SplitChoice {
                            feature: f,
                            boundary: t,
                            missing_left: ml,
                            gain,
                        });
                    }
                }
            }
        }
        best
    }

    fn goes_left(&self, choice: &SplitChoice, row: usize) -> bool {
        let b = self.bins[choice.feature][row];
        if b == MISSING_BIN {
            choice.missing_left
        } else {
            (b as usize) <= choice.boundary
        }
    }

    /// Grows one tree on the sampled `rows` (ascending) using `features`.
    fn grow(&self, rows: &[usize], features: &[usize]) -> Vec<Node> {
        let mut nodes = vec![placeholder()];
        let mut boundary_of = vec![usize::MAX];
        // tree node index of each open node at the current level
        let mut level: Vec<usize> = vec![0];
        let mut active: Vec<usize> = rows.to_vec();
        let mut node_of: Vec<usize> = vec![0; active.len()];
        for _ in 0..self.config.depth {
            if level.is_empty() || active.is_empty() {
                break;
            }
            let hists = self.histograms(features, &active, &node_of, level.len());
            let mut next_level = Vec::new();
            let mut routes: Vec<Option<(usize, SplitChoice)>> = Vec::with_capacity(level.len());
            for (slot, &tree_idx) in level.iter().enumerate() {
                let Some(choice) = self.best_split(features, &hists, slot) else {
                    routes.push(None);
                    continue;
                };
                let left = nodes.len();
                nodes.push(placeholder());
                nodes.push(placeholder());
                boundary_of.push(usize::MAX);
                boundary_of.push(usize::MAX);
                boundary_of[tree_idx] = choice.boundary;
                nodes[tree_idx] = Node::Split {
                    feature: choice.feature,
                    threshold: self.mapper.boundaries[choice.feature][choice.boundary],
                    missing_left: choice.missing_left,
                    left,
                    right: left + 1,
                    gain: choice.gain,
                    cover: 0,
                };
                next_level.push(left);
                next_level.push(left + 1);
                routes.push(Some((next_level.len() - 2, choice)));
            }
            let mut next_active = Vec::with_capacity(active.len());
            let mut next_node_of = Vec::with_capacity(active.len());
            for (k, &r) in active.iter().enumerate() {
                if let Some((l, choice)) = &routes[node_of[k]] {
                    next_active.push(r);
                    next_node_of.push(if self.goes_left(choice, r) { *l } else { *l + 1 });
                }
            }
            level = next_level;
            active = next_active;
            node_of = next_node_of;
        }
        self.finalize(nodes, &boundary_of, rows)
    }

    /// Fills covers and Newton leaf values from the rows reaching each node.
    fn finalize(&self, mut nodes: Vec<Node>, boundary_of: &[usize], rows: &[usize]) -> Vec<Node> {
        let mut stats = vec![Stat::default(); nodes.len()];
        for &r in rows {
            let mut i = 0;
            loop {
                let s = &mut stats[i];
                s.g += self.grad[r];
                s.h += self.hess[r];
                s.n += 1;
                match &nodes[i] {
                    Node::Leaf { .. } => break,
                    Node::Split {
                        feature,
                        missing_left,
                        left,
                        right,
                        ..
                    } => {
                        let b = self.bins[*feature][r];
                        let go_left = if b == MISSING_BIN {
                            *missing_left
                        } else {
                            (b as usize) <= boundary_of[i]
                        };
                        i = if go_left { *left } else { *right };
                    }
                }
            }
        }
        let lambda = self.config.l2_leaf_reg;
        for (node, s) in nodes.iter_mut().zip(&stats) {
            match node {
                Node::Split { cover, .. } => *cover = s.n,
                Node::Leaf {
                    value,
                    sum_grad,
                    sum_hess,
                    cover,
                } => {
                    *value = if s.n == 0 { 0.0 } else { -s.g / (s.h + lambda) };
                    *sum_grad = s.g;
                    *sum_hess = s.h;
                    *cover = s.n;
                }
            }
        }
        nodes
    }
}

fn placeholder() -> Node {
    Node::Leaf {
        value: 0.0,
        sum_grad: 0.0,
        sum_hess: 0.0,
        cover: 0,
    }
}

fn mean_logloss(margins: &[f64], labels: &[u8], weights: Option<&[f64]>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (&m, &y)) in margins.iter().zip(labels).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        num += w * logloss(m, y);
        den += w;
    }
    num / den
}

/// Trains a model. With a validation table and early stopping on, the model
/// is truncated at the first iteration with minimal validation logloss.
pub fn fit(train: &FeatureTable, valid: Option<&FeatureTable>, config: &GBDTConfig) -> Result<Model> {
    config.validate()?;
    if train.is_empty() || train.n_cols() == 0 {
        return Err(Error::EmptyTable);
    }
    let (n_neg, n_pos) = train.class_counts();
    if n_neg == 0 || n_pos == 0 {
        return Err(Error::SingleClass);
    }
    let valid = match valid {
        Some(v) if !v.is_empty() => Some(v.select_columns(train.columns())?),
        _ => None,
    };
    with_threads(config.threads, || fit_inner(train, valid.as_ref(), config, n_neg, n_pos))
}

fn fit_inner(
    train: &FeatureTable,
    valid: Option<&FeatureTable>,
    config: &GBDTConfig,
    n_neg: usize,
    n_pos: usize,
) -> Result<Model> {
    let n = train.n_rows();
    let n_feat = train.n_cols();
    let mapper = BinMapper::fit(train, config.border_count);
    let bins = mapper.transform(train);
    let labels = train.labels();

    let w_pos = match config.class_weighting {
        ClassWeighting::Auto => n_neg as f64 / n_pos as f64,
        ClassWeighting::None => 1.0,
    };
    let weights: Vec<f64> = labels.iter().map(|&y| if y == 1 { w_pos } else { 1.0 }).collect();
    let base_margin = (n_pos as f64 * w_pos / n_neg as f64).ln();

    let mut margins = vec![base_margin; n];
    let mut valid_margins = vec![base_margin; valid.map_or(0, FeatureTable::n_rows)];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_sub = ((config.feature_subsample * n_feat as f64).round() as usize).clamp(1, n_feat);
    let parallel = n * n_sub >= 100_000;

    let mut trees = Vec::with_capacity(config.iterations);
    let mut eval = EvalHistory::default();
    for _ in 0..config.iterations {
        for r in 0..n {
            let p = sigmoid(margins[r]);
            let y = labels[r] as f64;
            grad[r] = weights[r] * (p - y);
            hess[r] = weights[r] * p * (1.0 - p);
        }
        let features: Vec<usize> = if n_sub == n_feat {
            (0..n_feat).collect()
        } else {
            let mut f = index::sample(&mut rng, n_feat, n_sub).into_vec();
            f.sort_unstable();
            f
        };
        let rows: Vec<usize> = if config.row_subsample >= 1.0 {
            (0..n).collect()
        } else {
            (0..n).filter(|_| rng.random::<f64>() < config.row_subsample).collect()
        };
        let grower = Grower {
            bins: &bins,
            mapper: &mapper,
            grad: &grad,
            hess: &hess,
            config,
            parallel,
        };
        let tree = Tree {
            nodes: grower.grow(&rows, &features),
            scale: config.learning_rate,
        };
        for (r, m) in margins.iter_mut().enumerate() {
            *m += tree.predict(train.row(r));
        }
        eval.train_logloss.push(mean_logloss(&margins, labels, Some(&weights)));
        if let Some(v) = valid {
            for (r, m) in valid_margins.iter_mut().enumerate() {
                *m += tree.predict(v.row(r));
            }
            eval.valid_logloss.push(mean_logloss(&valid_margins, v.labels(), None));
        }
        trees.push(tree);
    }

    let mut best_iteration = trees.len();
    if config.early_stopping && !eval.valid_logloss.is_empty() {
        let mut best = 0;
        for (i, &l) in eval.valid_logloss.iter().enumerate() {
            if l < eval.valid_logloss[best] {
                best = i;
            }
        }
        best_iteration = best + 1;
        trees.truncate(best_iteration);
    }

    Ok(Model {
        feature_names: train.columns().to_vec(),
        base_margin,
        trees,
        config: config.clone(),
        best_iteration,
        eval,
    })
}
