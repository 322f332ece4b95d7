//! Exact TreeSHAP attributions and SHAP-ranked feature selection.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::cv::{derive_seed, fit_fold, stratified_kfold};
use crate::gbdt::{self, GBDTConfig, Model, Node, Tree};
use crate::stats::sorted_sum;
use crate::table::{format_value, FeatureTable};

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, i: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut n = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = n * (l + 1) as f64 / ((j + 1) as f64 * one);
            n = t - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], i: usize) -> f64 {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut n = path[l].weight;
    let mut total = 0.0;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = n * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += t;
            n = path[j].weight - t * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            total += path[j].weight / zero * (l + 1) as f64 / (l - j) as f64;
        }
    }
    total
}

fn fraction(child: u64, parent: u64) -> f64 {
    if parent == 0 {
        0.0
    } else {
        child as f64 / parent as f64
    }
}

fn recurse(
    tree: &Tree,
    node: usize,
    row: &[f64],
    phi: &mut [f64],
    mut path: Vec<PathElem>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    extend(&mut path, zero, one, feature);
    match &tree.nodes[node] {
        Node::Leaf { .. } => {
            let v = tree.node_output(node);
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let e = path[i];
                phi[e.feature.expect("only the root element lacks a feature")] += w * (e.one - e.zero) * v;
            }
        }
        Node::Split {
            feature: f,
            threshold,
            missing_left,
            left,
            right,
            cover,
            ..
        } => {
            let x = row[*f];
            let go_left = if x.is_nan() { *missing_left } else { x < *threshold };
            let (hot, cold) = if go_left { (*left, *right) } else { (*right, *left) };
            let (mut iz, mut io) = (1.0, 1.0);
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*f)) {
                iz = path[k].zero;
                io = path[k].one;
                unwind(&mut path, k);
            }
            let hot_frac = fraction(tree.nodes[hot].cover(), *cover);
            let cold_frac = fraction(tree.nodes[cold].cover(), *cover);
            recurse(tree, hot, row, phi, path.clone(), iz * hot_frac, io, Some(*f));
            recurse(tree, cold, row, phi, path, iz * cold_frac, 0.0, Some(*f));
        }
    }
}

/// Adds one tree's SHAP values for `row` to `phi` (indexed by feature).
pub fn tree_shap(tree: &Tree, row: &[f64], phi: &mut [f64]) {
    let mut local = vec![0.0; phi.len()];
    recurse(tree, 0, row, &mut local, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None);
    for (p, l) in phi.iter_mut().zip(local) {
        *p += l;
    }
}

/// Cover-weighted mean output of a tree.
pub fn tree_expectation(tree: &Tree) -> f64 {
    fn walk(tree: &Tree, i: usize) -> f64 {
        match &tree.nodes[i] {
            Node::Leaf { .. } => tree.node_output(i),
            Node::Split { left, right, cover, .. } => {
                fraction(tree.nodes[*left].cover(), *cover) * walk(tree, *left)
                    + fraction(tree.nodes[*right].cover(), *cover) * walk(tree, *right)
            }
        }
    }
    walk(tree, 0)
}

/// Margin expected over the training cover: base margin plus tree expectations.
pub fn expected_margin(model: &Model) -> f64 {
    model.trees.iter().fold(model.base_margin, |a, t| a + tree_expectation(t))
}

/// Attributions of one row. `base_value + Σ values` equals the margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub base_value: f64,
    pub values: Vec<f64>,
}

impl Explanation {
    pub fn margin(&self) -> f64 {
        self.values.iter().fold(self.base_value, |a, b| a + b)
    }
}

fn check_arity(model: &Model, row: &[f64]) -> Result<()> {
    if row.len() != model.n_features() {
        return Err(Error::ArityMismatch {
            expected: model.n_features(),
            found: row.len(),
        });
    }
    Ok(())
}

pub fn shap_values(model: &Model, row: &[f64]) -> Result<Explanation> {
    check_arity(model, row)?;
    let mut phi = vec![0.0; model.n_features()];
    for t in &model.trees {
        tree_shap(t, row, &mut phi);
    }
    Ok(Explanation {
        base_value: expected_margin(model),
        values: phi,
    })
}

/// SHAP rows for every row of `table`, in model feature order.
pub fn shap_matrix(model: &Model, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
    let rows = model.aligned_rows(table)?;
    Ok(rows
        .par_iter()
        .map(|r| {
            let mut phi = vec![0.0; model.n_features()];
            for t in &model.trees {
                tree_shap(t, r, &mut phi);
            }
            phi
        })
        .collect())
}

/// Most features a brute-force explanation will enumerate.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 10;

fn conditional(tree: &Tree, i: usize, row: &[f64], known: &[bool]) -> f64 {
    match &tree.nodes[i] {
        Node::Leaf { .. } => tree.node_output(i),
        Node::Split {
            feature,
            threshold,
            missing_left,
            left,
            right,
            cover,
            ..
        } => {
            if known[*feature] {
                let x = row[*feature];
                let go_left = if x.is_nan() { *missing_left } else { x < *threshold };
                conditional(tree, if go_left { *left } else { *right }, row, known)
            } else {
                fraction(tree.nodes[*left].cover(), *cover) * conditional(tree, *left, row, known)
                    + fraction(tree.nodes[*right].cover(), *cover) * conditional(tree, *right, row, known)
            }
        }
    }
}

/// Shapley values by enumerating every coalition of the features the model
/// splits on, with absent features integrated out along node covers.
pub fn brute_force_shap(model: &Model, row: &[f64]) -> Result<Vec<f64>> {
    check_arity(model, row)?;
    let mut used: Vec<usize> = model.trees.iter().flat_map(Tree::used_features).collect();
    used.sort_unstable();
    used.dedup();
    let m = used.len();
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures(m));
    }
    let value = |mask: usize| {
        let mut known = vec![false; model.n_features()];
        for (b, &f) in used.iter().enumerate() {
            known[f] = mask >> b & 1 == 1;
        }
        model.trees.iter().map(|t| conditional(t, 0, row, &known)).sum::<f64>()
    };
    let v: Vec<f64> = (0..1usize << m).map(value).collect();
    let fact: Vec<f64> = (0..=m).scan(1.0, |acc, i| {
        if i > 0 {
            *acc *= i as f64;
        }
        Some(*acc)
    }).collect();
    let mut phi = vec![0.0; model.n_features()];
    for (b, &f) in used.iter().enumerate() {
        let mut total = 0.0;
        for mask in 0..1usize << m {
            if mask >> b & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[m - s - 1] / fact[m];
            total += w * (v[mask | 1 << b] - v[mask]);
        }
        phi[f] = total;
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub folds: usize,
    pub top_k: usize,
    pub early_stopping_folds: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            folds: 5,
            top_k: 20,
            early_stopping_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
    /// 1-based.
    pub rank: usize,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    /// Every feature, best first.
    pub features: Vec<FeatureImportance>,
    /// The top-k names, best first.
    pub selected: Vec<String>,
    /// Mean |SHAP| per fold, in table column order.
    pub fold_scores: Vec<Vec<f64>>,
}

impl ImportanceRanking {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("feature,mean_abs_shap,rank,selected\n");
        for f in &self.features {
            s.push_str(&format!(
                "{},{},{},{}\n",
                f.feature,
                format_value(f.mean_abs_shap),
                f.rank,
                f.selected
            ));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::volume::write_atomic(path.as_ref(), self.to_csv_string().as_bytes())
    }
}

/// Ranks features by mean |SHAP| on held-out folds given by `fold_of` (fold
/// id per row). Each fold model is trained on the remaining rows, ordered by
/// patient id, so the result does not depend on the table's row order.
pub fn select_features_with_folds(
    table: &FeatureTable,
    config: &GBDTConfig,
    fold_of: &[usize],
    selection: &SelectionConfig,
    seed: u64,
) -> Result<ImportanceRanking> {
    if fold_of.len() != table.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} fold ids for {} rows",
            fold_of.len(),
            table.n_rows()
        )));
    }
    if selection.top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }
    let k = fold_of.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::DegenerateFolds("need at least two folds".into()));
    }
    let ids = table.patient_ids();
    let labels = table.labels();
    let mut splits = Vec::with_capacity(k);
    for f in 0..k {
        let valid: Vec<usize> = (0..table.n_rows()).filter(|&r| fold_of[r] == f).collect();
        let mut train: Vec<usize> = (0..table.n_rows()).filter(|&r| fold_of[r] != f).collect();
        for (part, rows) in [("validation", &valid), ("training", &train)] {
            let pos = rows.iter().filter(|&&r| labels[r] == 1).count();
            if pos == 0 || pos == rows.len() {
                return Err(Error::DegenerateFolds(format!("fold {f} {part} rows hold a single class")));
            }
        }
        train.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        splits.push((train, valid));
    }
    let fold_scores = gbdt::with_threads(config.threads, || {
        splits
            .par_iter()
            .enumerate()
            .map(|(f, (train, valid))| {
                let model = fit_fold(table, train, config, derive_seed(seed, f as u64 + 1), selection.early_stopping_folds)?;
                let phi = shap_matrix(&model, &table.subset_rows(valid))?;
                Ok((0..table.n_cols())
                    .map(|j| sorted_sum(&phi.iter().map(|p| p[j].abs()).collect::<Vec<_>>()) / valid.len() as f64)
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let scores: Vec<f64> = (0..table.n_cols())
        .map(|j| sorted_sum(&fold_scores.iter().map(|s| s[j]).collect::<Vec<_>>()) / k as f64)
        .collect();
    let columns = table.columns();
    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| columns[a].cmp(&columns[b])));
    let top = selection.top_k.min(columns.len());
    let features: Vec<FeatureImportance> = order
        .iter()
        .enumerate()
        .map(|(i, &j)| FeatureImportance {
            feature: columns[j].clone(),
            mean_abs_shap: scores[j],
            rank: i + 1,
            selected: i < top,
        })
        .collect();
    let selected = features[..top].iter().map(|f| f.feature.clone()).collect();
    Ok(ImportanceRanking {
        features,
        selected,
        fold_scores,
    })
}

/// Stratified folds drawn from `seed`, then [`select_features_with_folds`].
pub fn select_features_cv(
    table: &FeatureTable,
    config: &GBDTConfig,
    selection: &SelectionConfig,
    seed: u64,
) -> Result<ImportanceRanking> {
    let plan = stratified_kfold(table.labels(), selection.folds, seed).map_err(|e| match e {
        Error::ClassCountBelowK { .. } => Error::DegenerateFolds(e.to_string()),
        other => other,
    })?;
    select_features_with_folds(table, config, &plan.assignment(table.n_rows()), selection, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(value: f64, cover: u64) -> Node {
        Node::Leaf {
            value,
            sum_grad: 0.0,
            sum_hess: 0.0,
            cover,
        }
    }

    fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: u64) -> Node {
        Node::Split {
            feature,
            threshold,
            missing_left: true,
            left,
            right,
            gain: 0.0,
            cover,
        }
    }

    fn toy_model() -> Model {
        // x0 < 0.5 ? (x1 < 0.5 ? 1 : 3) : (x0 < 0.8 ? -2 : 5)
        let tree = Tree {
            nodes: vec![
                split(0, 0.5, 1, 2, 10),
                split(1, 0.5, 3, 4, 6),
                split(0, 0.8, 5, 6, 4),
                leaf(1.0, 2),
                leaf(3.0, 4),
                leaf(-2.0, 1),
                leaf(5.0, 3),
            ],
            scale: 0.5,
        };
        let tree2 = Tree {
            nodes: vec![split(2, 0.0, 1, 2, 10), leaf(-1.0, 7), leaf(2.0, 3)],
            scale: 1.0,
        };
        Model {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            base_margin: -0.3,
            trees: vec![tree, tree2],
            config: GBDTConfig::default(),
            best_iteration: 2,
            eval: Default::default(),
        }
    }

    #[test]
    fn matches_brute_force_and_is_locally_accurate() {
        let m = toy_model();
        for row in [[0.1, 0.2, -1.0], [0.9, 0.7, 1.0], [0.6, f64::NAN, 0.0], [f64::NAN, 0.9, f64::NAN]] {
            let e = shap_values(&m, &row).unwrap();
            let bf = brute_force_shap(&m, &row).unwrap();
            for (a, b) in e.values.iter().zip(&bf) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            assert!((e.margin() - m.predict_margin(&row).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_is_cover_weighted() {
        let m = toy_model();
        let e0 = 0.5 * (0.6 * (1.0 / 3.0 + 3.0 * 2.0 / 3.0) + 0.4 * (-2.0 * 0.25 + 5.0 * 0.75));
        assert!((tree_expectation(&m.trees[0]) - e0).abs() < 1e-12);
        assert!((expected_margin(&m) - (-0.3 + e0 + (-0.7 + 0.6))).abs() < 1e-12);
    }

    #[test]
    fn unused_features_get_zero() {
        let mut m = toy_model();
        m.feature_names.push("d".into());
        let e = shap_values(&m, &[0.1, 0.2, 0.3, 100.0]).unwrap();
        assert_eq!(e.values[3], 0.0);
    }
}
