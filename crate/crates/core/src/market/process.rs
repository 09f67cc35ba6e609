//! Random variables, adapted processes and strategies on a [`MarketTree`].

use serde::{Deserialize, Serialize};

use super::tree::MarketTree;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Terminal random variable: one value per leaf, in leaf order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> OutcomeVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leafwise map.
    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        Self { values: self.values.iter().map(f).collect() }
    }

    /// Leafwise combination of two vectors of the same length.
    pub fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect() }
    }
}

/// One value per node (parents-first node order of the tree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedProcess<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> AdaptedProcess<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn min(&self) -> Option<T> {
        self.values.iter().cloned().reduce(|a, b| if b < a { b } else { a })
    }
}

/// Units of each risky asset held over the period following each node.
/// Leaves carry an empty vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictableStrategy<T> {
    pub holdings: Vec<Vec<T>>,
}

impl<T: Scalar> PredictableStrategy<T> {
    pub fn zeros(tree: &MarketTree<T>) -> Self {
        Self::constant(tree, T::zero())
    }

    /// Same holding in every asset at every non-leaf node.
    pub fn constant(tree: &MarketTree<T>, h: T) -> Self {
        let d = tree.n_assets();
        let holdings = (0..tree.n_nodes())
            .map(|i| if tree.is_leaf(i) { Vec::new() } else { vec![h.clone(); d] })
            .collect();
        Self { holdings }
    }

    /// Builds a strategy from a flat coordinate vector ordered by interior
    /// node (parents-first) then asset.
    pub fn from_coordinates(tree: &MarketTree<T>, coords: &[T]) -> Self {
        let d = tree.n_assets();
        let mut holdings = vec![Vec::new(); tree.n_nodes()];
        for (k, n) in tree.interior_nodes().enumerate() {
            holdings[n] = coords[k * d..(k + 1) * d].to_vec();
        }
        Self { holdings }
    }

    pub fn coordinates(&self, tree: &MarketTree<T>) -> Vec<T> {
        tree.interior_nodes().flat_map(|n| self.holdings[n].iter().cloned()).collect()
    }
}

/// Probability weights on the leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure<T> {
    pub leaf_prob: Vec<T>,
}

impl<T: Scalar> Measure<T> {
    pub fn new(leaf_prob: Vec<T>) -> Self {
        Self { leaf_prob }
    }

    pub fn uniform(n: usize) -> Self {
        let w = T::one() / T::from_f64_lossy(n as f64);
        Self { leaf_prob: vec![w; n] }
    }

    pub fn total(&self) -> T {
        crate::scalar::sum(&self.leaf_prob)
    }

    /// Equivalent to the physical measure iff every leaf is charged.
    pub fn is_equivalent(&self) -> bool {
        self.leaf_prob.iter().all(|p| *p > T::zero())
    }

    pub fn expectation(&self, rv: &OutcomeVector<T>) -> T {
        self.leaf_prob
            .iter()
            .zip(&rv.values)
            .fold(T::zero(), |acc, (p, v)| acc + p.clone() * v.clone())
    }

    /// Measure with density `weights` (normalised to total mass one).
    pub fn reweighted(&self, weights: &OutcomeVector<T>) -> Self {
        let raw: Vec<T> = self.leaf_prob.iter().zip(&weights.values).map(|(p, w)| p.clone() * w.clone()).collect();
        let total = crate::scalar::sum(&raw);
        Self { leaf_prob: raw.into_iter().map(|v| v / total.clone()).collect() }
    }
}

/// Gain direction of one asset traded over one period at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDirection<T> {
    pub node: usize,
    pub asset: usize,
    pub outcome: OutcomeVector<T>,
}

impl<T: Scalar> MarketTree<T> {
    /// Physical leaf measure: products of transition probabilities.
    pub fn physical_measure(&self) -> Measure<T> {
        let leaf_prob = (0..self.n_leaves())
            .map(|k| {
                self.path(k)
                    .iter()
                    .skip(1)
                    .fold(T::one(), |acc, &n| acc * self.node(n).prob.clone())
            })
            .collect();
        Measure { leaf_prob }
    }

    /// Leaf values of a process.
    pub fn terminal(&self, process: &AdaptedProcess<T>) -> OutcomeVector<T> {
        OutcomeVector { values: self.leaves().iter().map(|&i| process.values[i].clone()).collect() }
    }

    /// Self-financing wealth: `X_child = X_node + H_node · (S_child − S_node)`.
    pub fn wealth_process(&self, x: T, strategy: &PredictableStrategy<T>) -> AdaptedProcess<T> {
        let mut values = vec![T::zero(); self.n_nodes()];
        values[self.root()] = x;
        for i in 1..self.n_nodes() {
            let n = self.node(i);
            let p = n.parent.expect("non-root node has a parent");
            let sp = &self.node(p).prices;
            let gain = strategy.holdings[p]
                .iter()
                .zip(n.prices.iter().zip(sp))
                .fold(T::zero(), |acc, (h, (sc, sn))| acc + h.clone() * (sc.clone() - sn.clone()));
            values[i] = values[p].clone() + gain;
        }
        AdaptedProcess { values }
    }

    /// Nonnegative wealth at every node.
    pub fn admissible(&self, x: T, strategy: &PredictableStrategy<T>) -> bool {
        self.wealth_process(x, strategy).values.iter().all(|v| *v >= T::zero())
    }

    /// Spanning set of terminal gains: one vector per interior node and asset,
    /// holding the one-period increment on the leaves below the node and zero
    /// elsewhere. Columns may be linearly dependent.
    pub fn terminal_gain_span(&self) -> Vec<GainDirection<T>> {
        let d = self.n_assets();
        let interior: Vec<usize> = self.interior_nodes().collect();
        let mut col_of = vec![usize::MAX; self.n_nodes()];
        for (k, &n) in interior.iter().enumerate() {
            col_of[n] = k;
        }
        let nl = self.n_leaves();
        let mut out: Vec<GainDirection<T>> = interior
            .iter()
            .flat_map(|&n| {
                (0..d).map(move |j| GainDirection {
                    node: n,
                    asset: j,
                    outcome: OutcomeVector { values: vec![T::zero(); nl] },
                })
            })
            .collect();
        for k in 0..nl {
            let path = self.path(k);
            for w in path.windows(2) {
                let (n, c) = (w[0], w[1]);
                for j in 0..d {
                    out[col_of[n] * d + j].outcome.values[k] =
                        self.node(c).prices[j].clone() - self.node(n).prices[j].clone();
                }
            }
        }
        out
    }

    /// Prices re-expressed in units of the strictly positive process `x`:
    /// `(1/X, S/X)`. The new model has `d + 1` assets, the first being the
    /// old bond.
    pub fn numeraire_change(&self, x: &AdaptedProcess<T>) -> Result<MarketTree<T>> {
        if let Some(i) = x.values.iter().position(|v| !(*v > T::zero())) {
            return Err(Error::InvalidProcess(format!(
                "numéraire is not strictly positive at node {}",
                self.node(i).id
            )));
        }
        let mut assets = vec!["bond/X".to_string()];
        assets.extend(self.assets().iter().map(|a| format!("{a}/X")));
        let prices = self
            .nodes()
            .iter()
            .zip(&x.values)
            .map(|(n, xv)| {
                let mut p = vec![T::one() / xv.clone()];
                p.extend(n.prices.iter().map(|s| s.clone() / xv.clone()));
                p
            })
            .collect();
        self.with_prices(assets, prices)
    }

    /// Node masses of a leaf measure (sum over the leaves below each node).
    pub fn node_masses(&self, measure: &Measure<T>) -> Vec<T> {
        let mut mass = vec![T::zero(); self.n_nodes()];
        for (k, &leaf) in self.leaves().iter().enumerate() {
            mass[leaf] = measure.leaf_prob[k].clone();
        }
        for i in (1..self.n_nodes()).rev() {
            let p = self.node(i).parent.expect("non-root");
            mass[p] = mass[p].clone() + mass[i].clone();
        }
        mass
    }

    /// `E_measure[rv | node]` at every node; leaves reproduce `rv`.
    pub fn conditional_expectation(&self, rv: &OutcomeVector<T>, measure: &Measure<T>) -> Result<AdaptedProcess<T>> {
        let mass = self.node_masses(measure);
        let mut acc = vec![T::zero(); self.n_nodes()];
        for (k, &leaf) in self.leaves().iter().enumerate() {
            acc[leaf] = measure.leaf_prob[k].clone() * rv.values[k].clone();
        }
        for i in (1..self.n_nodes()).rev() {
            let p = self.node(i).parent.expect("non-root");
            acc[p] = acc[p].clone() + acc[i].clone();
        }
        let mut values = Vec::with_capacity(self.n_nodes());
        for i in 0..self.n_nodes() {
            if let Some(k) = self.leaf_index(i) {
                values.push(rv.values[k].clone());
            } else if mass[i] > T::zero() {
                values.push(acc[i].clone() / mass[i].clone());
            } else {
                return Err(Error::InvalidProcess(format!(
                    "zero total mass under node {}",
                    self.node(i).id
                )));
            }
        }
        Ok(AdaptedProcess { values })
    }

    /// Largest one-step martingale defect `|E[Z_child | node] − Z_node|` of a
    /// process under a leaf measure.
    pub fn martingale_defect(&self, process: &AdaptedProcess<T>, measure: &Measure<T>) -> T {
        let mass = self.node_masses(measure);
        let mut worst = T::zero();
        for n in self.interior_nodes() {
            let node = self.node(n);
            let e = node
                .children
                .iter()
                .fold(T::zero(), |acc, &c| acc + mass[c].clone() * process.values[c].clone())
                / mass[n].clone();
            let defect = (e - process.values[n].clone()).magnitude();
            if defect > worst {
                worst = defect;
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn binomial() -> MarketTree<f64> {
        MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 1).unwrap()
    }

    #[test]
    fn no_trading_keeps_wealth_constant() {
        let t = MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 2).unwrap();
        let x = t.wealth_process(3.0, &PredictableStrategy::zeros(&t));
        assert!(x.values.iter().all(|v| *v == 3.0));
        assert!(t.admissible(3.0, &PredictableStrategy::zeros(&t)));
    }

    #[test]
    fn buy_and_hold_arithmetic() {
        let t = binomial();
        let x = t.wealth_process(1.0, &PredictableStrategy::constant(&t, 1.0));
        assert_eq!(t.terminal(&x).values, vec![2.0, 0.5]);
        // leveraged position goes negative in the down state
        let h3 = PredictableStrategy::constant(&t, 3.0);
        assert_eq!(t.terminal(&t.wealth_process(1.0, &h3)).values[1], -0.5);
        assert!(!t.admissible(1.0, &h3));
    }

    #[test]
    fn gain_span_shapes() {
        let t = binomial();
        let g = t.terminal_gain_span();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].outcome.values, vec![1.0, -0.5]);
        let t2 = MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 2).unwrap();
        assert_eq!(t2.terminal_gain_span().len(), 3);
        let flat = MarketTree::binomial(1.0, 1.0, 1.0, 0.5, 2).unwrap();
        assert!(flat
            .terminal_gain_span()
            .iter()
            .all(|g| g.outcome.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn identity_numeraire() {
        let t = binomial();
        let one = AdaptedProcess::constant(t.n_nodes(), 1.0);
        let s = t.numeraire_change(&one).unwrap();
        assert_eq!(s.n_assets(), 2);
        assert_eq!(s.node(1).prices, vec![1.0, 2.0]);
        let x = t.wealth_process(1.0, &PredictableStrategy::constant(&t, 1.0));
        let sx = t.numeraire_change(&x).unwrap();
        assert!(sx.nodes().iter().all(|n| n.prices[1] == 1.0));
        let bad = AdaptedProcess::new(vec![1.0, 0.0, 1.0]);
        assert!(t.numeraire_change(&bad).is_err());
    }

    #[test]
    fn conditional_expectation_on_binomial() {
        let t = binomial();
        let q = Measure::new(vec![0.25, 0.75]);
        let rv = OutcomeVector::new(vec![4.0, 8.0]);
        let c = t.conditional_expectation(&rv, &q).unwrap();
        assert_eq!(c.values, vec![7.0, 4.0, 8.0]);
        let k = t.conditional_expectation(&OutcomeVector::constant(2, 5.0), &q).unwrap();
        assert!(k.values.iter().all(|v| *v == 5.0));
        let t2 = MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 2).unwrap();
        let dead = Measure::new(vec![0.0, 0.0, 0.5, 0.5]);
        assert!(t2.conditional_expectation(&OutcomeVector::constant(4, 1.0), &dead).is_err());
    }

    #[test]
    fn tower_property_is_exact_in_rationals() {
        let t: MarketTree<BigRational> =
            MarketTree::binomial(ratio(1, 1), ratio(3, 2), ratio(2, 3), ratio(1, 3), 3).unwrap();
        let q = t.physical_measure();
        assert_eq!(q.total(), ratio(1, 1));
        let rv = OutcomeVector::new((0..t.n_leaves()).map(|k| ratio(k as i64 * k as i64 - 3, 7)).collect());
        let c = t.conditional_expectation(&rv, &q).unwrap();
        assert_eq!(c.values[0], q.expectation(&rv));
        assert_eq!(t.martingale_defect(&c, &q), ratio(0, 1));
    }
}
