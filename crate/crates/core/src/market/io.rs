//! JSON model documents.
//!
//! ```json
//! { "times": 1, "assets": ["S"],
//!   "nodes": [ {"id": 0, "parent": null, "time": 0, "prob": 1.0, "prices": [1.0]},
//!              {"id": 1, "parent": 0, "time": 1, "prob": 0.5, "prices": [2.0]},
//!              {"id": 2, "parent": 0, "time": 1, "prob": 0.5, "prices": [0.5]} ] }
//! ```
//!
//! `times` is the horizon `T`; leaves are the time-`T` nodes in document order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{MarketTree, NodeSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub times: usize,
    pub assets: Vec<String>,
    pub nodes: Vec<NodeSpec<f64>>,
}

impl ModelDocument {
    pub fn from_tree(tree: &MarketTree<f64>) -> Self {
        Self { times: tree.horizon(), assets: tree.assets().to_vec(), nodes: tree.to_specs() }
    }

    pub fn into_tree(self) -> Result<MarketTree<f64>> {
        let horizon = self.nodes.iter().map(|n| n.time).max().unwrap_or(0);
        if horizon != self.times {
            return Err(Error::Parse(format!("times = {} but the deepest node is at time {horizon}", self.times)));
        }
        MarketTree::new(self.assets, self.nodes)
    }
}

pub fn parse_model(text: &str) -> Result<MarketTree<f64>> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.into_tree()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MarketTree<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn model_to_json(tree: &MarketTree<f64>) -> String {
    serde_json::to_string_pretty(&ModelDocument::from_tree(tree)).expect("model documents always serialise")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 2).unwrap();
        let back = parse_model(&model_to_json(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn horizon_mismatch_and_bad_json() {
        let mut doc = ModelDocument::from_tree(&MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 1).unwrap());
        doc.times = 3;
        assert!(matches!(doc.into_tree(), Err(Error::Parse(_))));
        assert!(matches!(parse_model("{\"times\": 1"), Err(Error::Parse(_))));
    }

    #[test]
    fn invalid_tree_is_reported() {
        let text = r#"{"times":1,"assets":["S"],"nodes":[
            {"id":0,"parent":null,"time":0,"prob":1,"prices":[1]},
            {"id":1,"parent":0,"time":1,"prob":0.5,"prices":[2]},
            {"id":2,"parent":0,"time":1,"prob":0.6,"prices":[0.5]}]}"#;
        match parse_model(text) {
            Err(Error::InvalidTree(r)) => assert!(r.to_string().contains("probability sum 1.1")),
            other => panic!("{other:?}"),
        }
    }
}
