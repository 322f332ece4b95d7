//! Versioned JSON model document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EvalHistory, GBDTConfig, Model, Node, Tree};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "cadomics-gbdt";
pub const FORMAT_VERSION: &str = "1";

const OBJECTIVE: &str = "binary-logloss";
const BOOSTING: &str = "newton-levelwise";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    depth: usize,
    scale: f64,
    nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    version: String,
    objective: String,
    boosting: String,
    feature_names: Vec<String>,
    base_margin: f64,
    best_iteration: usize,
    config: GBDTConfig,
    eval: EvalHistory,
    trees: Vec<TreeDoc>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn validate_tree(t: usize, doc: &TreeDoc, n_features: usize, max_depth: usize) -> Result<Tree> {
    let n = doc.nodes.len();
    if n == 0 {
        return Err(schema(format!("tree {t} has no nodes")));
    }
    if !doc.scale.is_finite() {
        return Err(schema(format!("tree {t} scale is not finite")));
    }
    let mut parents = vec![0usize; n];
    for (i, node) in doc.nodes.iter().enumerate() {
        match node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if *feature >= n_features {
                    return Err(schema(format!("tree {t} node {i}: feature {feature} out of range")));
                }
                if !threshold.is_finite() {
                    return Err(schema(format!("tree {t} node {i}: threshold not finite")));
                }
                for c in [*left, *right] {
                    if c <= i || c >= n {
                        return Err(schema(format!("tree {t} node {i}: bad child index {c}")));
                    }
                    parents[c] += 1;
                }
            }
            Node::Leaf { value, .. } => {
                if !value.is_finite() {
                    return Err(schema(format!("tree {t} node {i}: leaf value not finite")));
                }
            }
        }
    }
    if parents[1..].iter().any(|&p| p != 1) {
        return Err(schema(format!("tree {t}: nodes do not form a tree")));
    }
    let tree = Tree {
        nodes: doc.nodes.clone(),
        scale: doc.scale,
    };
    let depth = tree.depth();
    if doc.depth != depth {
        return Err(schema(format!("tree {t}: depth field {} but structure has depth {depth}", doc.depth)));
    }
    if depth > max_depth {
        return Err(schema(format!("tree {t}: depth {depth} exceeds limit {max_depth}")));
    }
    Ok(tree)
}

impl Model {
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION.to_string(),
            objective: OBJECTIVE.to_string(),
            boosting: BOOSTING.to_string(),
            feature_names: self.feature_names.clone(),
            base_margin: self.base_margin,
            best_iteration: self.best_iteration,
            config: self.config.clone(),
            eval: self.eval.clone(),
            trees: self
                .trees
                .iter()
                .map(|t| TreeDoc {
                    depth: t.depth(),
                    scale: t.scale,
                    nodes: t.nodes.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let value: Value = serde_json::from_str(text).map_err(|e| schema(format!("not JSON: {e}")))?;
        match value.get("format").and_then(Value::as_str) {
            Some(FORMAT_NAME) => {}
            other => return Err(schema(format!("format field is {other:?}, expected {FORMAT_NAME:?}"))),
        }
        match value.get("version") {
            Some(Value::String(v)) if v == FORMAT_VERSION => {}
            Some(v) => {
                return Err(Error::IncompatibleVersion {
                    found: v.as_str().map_or_else(|| v.to_string(), str::to_string),
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(schema("missing version field")),
        }
        let doc: ModelDoc = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
        if doc.objective != OBJECTIVE || doc.boosting != BOOSTING {
            return Err(schema(format!("unsupported objective/boosting {}/{}", doc.objective, doc.boosting)));
        }
        doc.config.validate().map_err(|e| schema(e.to_string()))?;
        if !doc.base_margin.is_finite() {
            return Err(schema("base_margin not finite"));
        }
        if doc.best_iteration != doc.trees.len() {
            return Err(schema(format!(
                "best_iteration {} does not match {} trees",
                doc.best_iteration,
                doc.trees.len()
            )));
        }
        let n_features = doc.feature_names.len();
        let trees = doc
            .trees
            .iter()
            .enumerate()
            .map(|(t, td)| validate_tree(t, td, n_features, doc.config.depth))
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            feature_names: doc.feature_names,
            base_margin: doc.base_margin,
            trees,
            config: doc.config,
            best_iteration: doc.best_iteration,
            eval: doc.eval,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::volume::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}
