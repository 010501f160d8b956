//! Canonical JSON form of a forest: nested trees, keys sorted, every float
//! rounded to 9 significant digits.

use serde_json::{json, Map, Value};

use super::{Forest, ForestParams, Node, Tree};
use crate::error::{Error, Result};

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float")
}

fn node_value(tree: &Tree, i: usize) -> Value {
    match &tree.nodes()[i] {
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => json!({
            "feature": feature,
            "threshold": round9(*threshold),
            "left": node_value(tree, *left),
            "right": node_value(tree, *right),
        }),
        Node::Leaf { proba } => json!({
            "proba": proba.iter().map(|p| round9(*p)).collect::<Vec<_>>(),
        }),
    }
}

pub fn forest_to_value(forest: &Forest) -> Value {
    json!({
        "classes": forest.classes(),
        "n_features": forest.n_features(),
        "params": forest.params(),
        "trees": forest.trees().iter().map(|t| node_value(t, 0)).collect::<Vec<_>>(),
    })
}

/// Compact canonical serialisation. `serde_json` maps keep keys sorted.
pub fn forest_to_json(forest: &Forest) -> String {
    forest_to_value(forest).to_string()
}

fn bad(message: impl Into<String>) -> Error {
    Error::InvalidConfig(format!("forest json: {}", message.into()))
}

fn field<'a>(map: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| bad(format!("missing `{key}`")))
}

fn push_node(value: &Value, n_classes: usize, n_features: usize, nodes: &mut Vec<Node>) -> Result<usize> {
    let map = value.as_object().ok_or_else(|| bad("node is not an object"))?;
    let index = nodes.len();
    if let Some(proba) = map.get("proba") {
        let proba: Vec<f64> = serde_json::from_value(proba.clone())?;
        if proba.len() != n_classes {
            return Err(bad("leaf probability length differs from class count"));
        }
        nodes.push(Node::Leaf { proba });
        return Ok(index);
    }
    let feature = field(map, "feature")?
        .as_u64()
        .ok_or_else(|| bad("feature is not an index"))? as usize;
    if feature >= n_features {
        return Err(bad(format!("feature {feature} out of range")));
    }
    let threshold = field(map, "threshold")?
        .as_f64()
        .ok_or_else(|| bad("threshold is not a number"))?;
    nodes.push(Node::Leaf { proba: Vec::new() });
    let left = push_node(field(map, "left")?, n_classes, n_features, nodes)?;
    let right = push_node(field(map, "right")?, n_classes, n_features, nodes)?;
    nodes[index] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    Ok(index)
}

pub fn forest_from_value(value: &Value) -> Result<Forest> {
    let map = value.as_object().ok_or_else(|| bad("not an object"))?;
    let classes: Vec<u32> = serde_json::from_value(field(map, "classes")?.clone())?;
    let n_features: usize = serde_json::from_value(field(map, "n_features")?.clone())?;
    let params: ForestParams = serde_json::from_value(field(map, "params")?.clone())?;
    let trees = field(map, "trees")?
        .as_array()
        .ok_or_else(|| bad("trees is not an array"))?
        .iter()
        .map(|t| {
            let mut nodes = Vec::new();
            push_node(t, classes.len(), n_features, &mut nodes)?;
            Ok(Tree::from_nodes(nodes))
        })
        .collect::<Result<Vec<_>>>()?;
    if classes.is_empty() || trees.is_empty() {
        return Err(bad("forest needs at least one class and one tree"));
    }
    Ok(Forest::from_parts(classes, n_features, trees, params))
}

pub fn forest_from_json(text: &str) -> Result<Forest> {
    forest_from_value(&serde_json::from_str(text)?)
}
