use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest admissible transition probability.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Slack allowed on the sum of child probabilities.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// One node as it appears in a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec<T> {
    pub id: u64,
    pub parent: Option<u64>,
    pub time: usize,
    /// Transition probability from the parent (ignored on the root).
    pub prob: T,
    pub prices: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    RootCount,
    DuplicateId,
    OrphanNode,
    TimeMismatch,
    PriceDimension,
    NonpositivePrice,
    ProbabilityFloor,
    ProbabilitySum,
    MissingChildren,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: Option<u64>,
    pub kind: ViolationKind,
    pub message: String,
}

/// Outcome of [`validate_tree`]; empty on success.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, node: Option<u64>, kind: ViolationKind, message: String) {
        self.violations.push(Violation { node, kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks every structural invariant of a node list and reports each
/// violation individually.
pub fn validate_tree<T: Scalar>(n_assets: usize, nodes: &[NodeSpec<T>]) -> ValidationReport {
    validate_tree_with_floor(n_assets, nodes, PROBABILITY_FLOOR)
}

/// [`validate_tree`] with a caller-chosen probability floor. Truncated
/// models with geometric tails need floors far below the default.
pub fn validate_tree_with_floor<T: Scalar>(n_assets: usize, nodes: &[NodeSpec<T>], floor: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut index: HashMap<u64, usize> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.id, i).is_some() {
            report.push(Some(n.id), ViolationKind::DuplicateId, format!("duplicate node id {}", n.id));
        }
    }
    let roots: Vec<&NodeSpec<T>> = nodes.iter().filter(|n| n.parent.is_none()).collect();
    if roots.len() != 1 {
        report.push(None, ViolationKind::RootCount, format!("expected exactly one root, found {}", roots.len()));
    }
    for r in &roots {
        if r.time != 0 {
            report.push(Some(r.id), ViolationKind::TimeMismatch, format!("root {} has time {} ≠ 0", r.id, r.time));
        }
    }
    let horizon = nodes.iter().map(|n| n.time).max().unwrap_or(0);
    let floor = T::from_f64_lossy(floor);
    let mut child_sum: HashMap<u64, (T, usize)> = HashMap::new();
    for n in nodes {
        if n.prices.len() != n_assets {
            report.push(
                Some(n.id),
                ViolationKind::PriceDimension,
                format!("node {} has {} prices, expected {}", n.id, n.prices.len(), n_assets),
            );
        }
        if n.prices.iter().any(|p| !(*p > T::zero())) {
            report.push(Some(n.id), ViolationKind::NonpositivePrice, format!("node {}: nonpositive price", n.id));
        }
        let Some(pid) = n.parent else { continue };
        match index.get(&pid) {
            None => report.push(
                Some(n.id),
                ViolationKind::OrphanNode,
                format!("node {} refers to missing parent {}", n.id, pid),
            ),
            Some(&pi) => {
                if nodes[pi].time + 1 != n.time {
                    report.push(
                        Some(n.id),
                        ViolationKind::TimeMismatch,
                        format!("node {} at time {} has parent at time {}", n.id, n.time, nodes[pi].time),
                    );
                }
                let e = child_sum.entry(pid).or_insert((T::zero(), 0));
                e.0 = e.0.clone() + n.prob.clone();
                e.1 += 1;
            }
        }
        if !(n.prob >= floor) {
            report.push(
                Some(n.id),
                ViolationKind::ProbabilityFloor,
                format!("node {}: transition probability {:?} below floor", n.id, n.prob),
            );
        }
    }
    let sum_tol = T::from_f64_lossy(PROBABILITY_SUM_TOL);
    for n in nodes {
        match child_sum.get(&n.id) {
            Some((s, _)) => {
                if (s.clone() - T::one()).magnitude() > sum_tol {
                    report.push(
                        Some(n.id),
                        ViolationKind::ProbabilitySum,
                        format!("node {}: probability sum {} ≠ 1", n.id, s.to_f64_lossy()),
                    );
                }
            }
            None => {
                if n.time < horizon {
                    report.push(
                        Some(n.id),
                        ViolationKind::MissingChildren,
                        format!("node {} at time {} < {} has no children", n.id, n.time, horizon),
                    );
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: u64,
    pub parent: Option<usize>,
    pub time: usize,
    pub prob: T,
    pub prices: Vec<T>,
    pub children: Vec<usize>,
}

/// Finite event tree carrying `d` risky asset prices per node; the bond is
/// identically one.
///
/// Nodes are stored parents-first (sorted by time, document order within a
/// time), so every forward pass is a single sweep. Leaves are the time-`T`
/// nodes in document order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketTree<T> {
    assets: Vec<String>,
    horizon: usize,
    nodes: Vec<Node<T>>,
    leaves: Vec<usize>,
    leaf_of: Vec<Option<usize>>,
    paths: Vec<Vec<usize>>,
    floor: f64,
}

impl<T: Scalar> MarketTree<T> {
    pub fn new(assets: Vec<String>, specs: Vec<NodeSpec<T>>) -> Result<Self> {
        Self::with_floor(assets, specs, PROBABILITY_FLOOR)
    }

    /// Builds a tree accepting transition probabilities down to `floor`.
    pub fn with_floor(assets: Vec<String>, specs: Vec<NodeSpec<T>>, floor: f64) -> Result<Self> {
        let report = validate_tree_with_floor(assets.len(), &specs, floor);
        if !report.is_valid() {
            return Err(Error::InvalidTree(report));
        }
        let horizon = specs.iter().map(|n| n.time).max().unwrap_or(0);
        let mut order: Vec<usize> = (0..specs.len()).collect();
        order.sort_by_key(|&i| specs[i].time);
        let pos_of_id: HashMap<u64, usize> =
            order.iter().enumerate().map(|(pos, &i)| (specs[i].id, pos)).collect();
        let mut nodes: Vec<Node<T>> = order
            .iter()
            .map(|&i| {
                let s = &specs[i];
                Node {
                    id: s.id,
                    parent: s.parent.map(|p| pos_of_id[&p]),
                    time: s.time,
                    prob: if s.parent.is_none() { T::one() } else { s.prob.clone() },
                    prices: s.prices.clone(),
                    children: Vec::new(),
                }
            })
            .collect();
        for i in 0..nodes.len() {
            if let Some(p) = nodes[i].parent {
                nodes[p].children.push(i);
            }
        }
        let leaves: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].time == horizon).collect();
        let mut leaf_of = vec![None; nodes.len()];
        for (k, &i) in leaves.iter().enumerate() {
            leaf_of[i] = Some(k);
        }
        let paths = leaves
            .iter()
            .map(|&leaf| {
                let mut path = vec![leaf];
                let mut cur = leaf;
                while let Some(p) = nodes[cur].parent {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                path
            })
            .collect();
        Ok(Self { assets, horizon, nodes, leaves, leaf_of, paths, floor })
    }

    /// Single-period model from root prices and `(probability, prices)` outcomes.
    pub fn one_period(assets: Vec<String>, s0: Vec<T>, outcomes: Vec<(T, Vec<T>)>) -> Result<Self> {
        let mut specs = vec![NodeSpec { id: 0, parent: None, time: 0, prob: T::one(), prices: s0 }];
        for (k, (p, s)) in outcomes.into_iter().enumerate() {
            specs.push(NodeSpec { id: k as u64 + 1, parent: Some(0), time: 1, prob: p, prices: s });
        }
        Self::new(assets, specs)
    }

    /// Recombining binomial lattice unrolled into a path tree.
    pub fn binomial(s0: T, up: T, down: T, p_up: T, periods: usize) -> Result<Self> {
        let mut specs = vec![NodeSpec { id: 0, parent: None, time: 0, prob: T::one(), prices: vec![s0] }];
        let mut frontier = vec![0u64];
        let mut next_id = 1u64;
        for t in 1..=periods {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for &pid in &frontier {
                let sp = specs[pid as usize].prices[0].clone();
                for (factor, prob) in [(up.clone(), p_up.clone()), (down.clone(), T::one() - p_up.clone())] {
                    specs.push(NodeSpec {
                        id: next_id,
                        parent: Some(pid),
                        time: t,
                        prob,
                        prices: vec![sp.clone() * factor],
                    });
                    next.push(next_id);
                    next_id += 1;
                }
            }
            frontier = next;
        }
        Self::new(vec!["S".into()], specs)
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node<T> {
        &self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_index(&self, node: usize) -> Option<usize> {
        self.leaf_of[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.leaf_of[node].is_some()
    }

    /// Root-to-leaf node path for leaf `k`.
    pub fn path(&self, k: usize) -> &[usize] {
        &self.paths[k]
    }

    /// Non-leaf nodes in parents-first order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| !self.nodes[i].children.is_empty())
    }

    /// Node specs in canonical order (used for serialisation).
    pub fn to_specs(&self) -> Vec<NodeSpec<T>> {
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id,
                parent: n.parent.map(|p| self.nodes[p].id),
                time: n.time,
                prob: n.prob.clone(),
                prices: n.prices.clone(),
            })
            .collect()
    }

    /// Same topology and probabilities with new per-node prices.
    pub fn with_prices(&self, assets: Vec<String>, prices: Vec<Vec<T>>) -> Result<Self> {
        let specs = self
            .to_specs()
            .into_iter()
            .zip(prices)
            .map(|(mut s, p)| {
                s.prices = p;
                s
            })
            .collect();
        Self::with_floor(assets, specs, self.floor)
    }

    pub fn probability_floor(&self) -> f64 {
        self.floor
    }

    /// Re-validates the built tree (always empty for trees built by `new`).
    pub fn validate(&self) -> ValidationReport {
        validate_tree_with_floor(self.n_assets(), &self.to_specs(), self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: u64, parent: Option<u64>, time: usize, prob: f64, price: f64) -> NodeSpec<f64> {
        NodeSpec { id, parent, time, prob, prices: vec![price] }
    }

    #[test]
    fn binomial_is_valid() {
        let t = MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 1).unwrap();
        assert!(t.validate().is_valid());
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.nodes()[1].prices[0], 2.0);
    }

    #[test]
    fn probability_sum_violation_is_reported() {
        let nodes = vec![spec(0, None, 0, 1.0, 1.0), spec(1, Some(0), 1, 0.5, 2.0), spec(2, Some(0), 1, 0.6, 0.5)];
        let r = validate_tree(1, &nodes);
        assert!(r.has(ViolationKind::ProbabilitySum));
        assert!(r.violations[0].message.contains("probability sum 1.1 ≠ 1"), "{r}");
    }

    #[test]
    fn nonpositive_price_is_reported() {
        let nodes = vec![spec(0, None, 0, 1.0, 1.0), spec(1, Some(0), 1, 0.5, 2.0), spec(2, Some(0), 1, 0.5, -1.0)];
        let r = validate_tree(1, &nodes);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::NonpositivePrice);
        assert!(r.violations[0].message.contains("nonpositive price"));
    }

    #[test]
    fn structural_errors_are_reported_individually() {
        let nodes = vec![
            spec(0, None, 0, 1.0, 1.0),
            spec(1, Some(0), 1, 1.0, 1.0),
            spec(2, Some(9), 2, 1.0, 1.0),
            spec(3, Some(0), 2, 1e-13, 1.0),
        ];
        let r = validate_tree(1, &nodes);
        assert!(r.has(ViolationKind::OrphanNode));
        assert!(r.has(ViolationKind::TimeMismatch));
        assert!(r.has(ViolationKind::ProbabilityFloor));
        assert!(r.has(ViolationKind::MissingChildren));
        assert!(MarketTree::new(vec!["S".into()], nodes).is_err());
    }

    #[test]
    fn leaves_follow_document_order() {
        let nodes = vec![
            spec(0, None, 0, 1.0, 1.0),
            spec(5, Some(0), 1, 0.5, 2.0),
            spec(4, Some(0), 1, 0.5, 0.5),
        ];
        let t = MarketTree::new(vec!["S".into()], nodes).unwrap();
        let ids: Vec<u64> = t.leaves().iter().map(|&i| t.node(i).id).collect();
        assert_eq!(ids, vec![5, 4]);
        assert_eq!(t.path(1), &[0, 2]);
    }
}
