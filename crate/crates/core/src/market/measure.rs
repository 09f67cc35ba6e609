//! Equivalent martingale measures and arbitrage certificates.
//!
//! The martingale condition is local on a tree, so each interior node is
//! solved on its own: the one-step kernel is the ℙ-weighted analytic centre
//!
//! ```text
//! max Σ p_c log q_c   s.t.   Σ q_c = 1,  Σ q_c (S_c − S_n) = 0,
//! ```
//!
//! obtained through its convex dual `min_h −Σ p_c log(1 + h·ΔS_c)` with
//! `q_c = p_c / (1 + h·ΔS_c)`. The dual is unbounded below exactly when a
//! one-step arbitrage exists; the escaping direction is the certificate.

use serde::{Deserialize, Serialize};

use super::process::Measure;
use super::tree::MarketTree;
use crate::error::{Error, Result};
use crate::numerics::linalg::solve_psd;
use crate::scalar::Real;

/// A strategy, held at one node only, whose one-step gain is nonnegative on
/// every child and positive on at least one, at zero cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    /// Document id of the node.
    pub node: u64,
    /// Units of each risky asset bought at the node.
    pub holdings: Vec<f64>,
    /// One-step gain per child.
    pub gains: Vec<f64>,
}

/// Per-node result of the local search.
enum Kernel<T> {
    Martingale(Vec<T>),
    Arbitrage(Vec<T>),
}

impl<T: Real> MarketTree<T> {
    /// Returns an equivalent martingale measure as leaf weights, or the
    /// arbitrage certificate of the first offending node.
    pub fn find_martingale_measure(&self) -> Result<Measure<T>> {
        let mut q_edge = vec![T::one(); self.n_nodes()];
        for n in self.interior_nodes() {
            let node = self.node(n);
            let incs: Vec<Vec<T>> = node
                .children
                .iter()
                .map(|&c| {
                    self.node(c)
                        .prices
                        .iter()
                        .zip(&node.prices)
                        .map(|(a, b)| *a - *b)
                        .collect()
                })
                .collect();
            let probs: Vec<T> = node.children.iter().map(|&c| self.node(c).prob).collect();
            match local_kernel(&incs, &probs) {
                Kernel::Martingale(q) => {
                    for (&c, qc) in node.children.iter().zip(q) {
                        q_edge[c] = qc;
                    }
                }
                Kernel::Arbitrage(h) => {
                    let gains = incs
                        .iter()
                        .map(|dc| dc.iter().zip(&h).fold(T::zero(), |a, (x, y)| a + *x * *y).as_f64())
                        .collect();
                    return Err(Error::Arbitrage(Box::new(ArbitrageCertificate {
                        node: node.id,
                        holdings: h.iter().map(|v| v.as_f64()).collect(),
                        gains,
                    })));
                }
            }
        }
        let leaf_prob = (0..self.n_leaves())
            .map(|k| self.path(k).iter().skip(1).fold(T::one(), |acc, &n| acc * q_edge[n]))
            .collect();
        Ok(Measure::new(leaf_prob))
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Orthonormal basis of the span of `vectors` (modified Gram–Schmidt).
fn span_basis<T: Real>(vectors: &[Vec<T>], rel_tol: T) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let norm0 = dot(v, v).sqrt();
        if norm0 == T::zero() {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi = *wi - c * *bi;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > rel_tol * norm0 {
            basis.push(w.iter().map(|x| *x / norm).collect());
        }
    }
    basis
}

fn local_kernel<T: Real>(incs: &[Vec<T>], probs: &[T]) -> Kernel<T> {
    let scale = incs
        .iter()
        .flat_map(|v| v.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Kernel::Martingale(probs.to_vec());
    }
    // directions independent only at the 1e-9 level carry gains too small
    // to be an arbitrage and are treated as collinear
    let basis = span_basis(incs, T::lit(1e-9));
    let r = basis.len();
    // reduced, scale-free increments
    let delta: Vec<Vec<T>> = incs
        .iter()
        .map(|v| basis.iter().map(|b| dot(v, b) / scale).collect())
        .collect();
    let objective = |z: &[T]| -> Option<T> {
        let mut f = T::zero();
        for (dc, pc) in delta.iter().zip(probs) {
            let w = T::one() + dot(z, dc);
            if !(w > T::zero()) {
                return None;
            }
            f = f - *pc * w.ln();
        }
        Some(f)
    };
    let gradient = |z: &[T]| -> Vec<T> {
        let mut grad = vec![T::zero(); r];
        for (dc, pc) in delta.iter().zip(probs) {
            let w = T::one() + dot(z, dc);
            for i in 0..r {
                grad[i] = grad[i] - *pc * dc[i] / w;
            }
        }
        grad
    };
    let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, g| m.max(g.abs()));
    let mut z = vec![T::zero(); r];
    let mut f = T::zero();
    let escape = T::lit(1e12);
    for _ in 0..500 {
        let mut grad = vec![T::zero(); r];
        let mut hess = vec![vec![T::zero(); r]; r];
        for (dc, pc) in delta.iter().zip(probs) {
            let w = T::one() + dot(&z, dc);
            for i in 0..r {
                grad[i] = grad[i] - *pc * dc[i] / w;
                for j in 0..r {
                    hess[i][j] = hess[i][j] + *pc * dc[i] * dc[j] / (w * w);
                }
            }
        }
        let gnorm = max_abs(&grad);
        if gnorm <= T::lit(1e-15) {
            break;
        }
        // diagonal scaling keeps nearly collinear increments above the pivot cutoff
        let d: Vec<T> = (0..r).map(|i| if hess[i][i] > T::zero() { T::one() / hess[i][i].sqrt() } else { T::one() }).collect();
        let scaled: Vec<Vec<T>> = (0..r).map(|i| (0..r).map(|j| hess[i][j] * d[i] * d[j]).collect()).collect();
        let neg: Vec<T> = grad.iter().zip(&d).map(|(g, di)| -*g * *di).collect();
        let step: Vec<T> = solve_psd(&scaled, &neg, T::lit(1e-14)).x.iter().zip(&d).map(|(s, di)| *s * *di).collect();
        let slope = dot(&grad, &step);
        let mut t = T::one();
        for dc in &delta {
            let w = T::one() + dot(&z, dc);
            let dw = dot(&step, dc);
            if dw < T::zero() {
                t = t.min(T::lit(0.99) * w / (-dw));
            }
        }
        let mut accepted = false;
        for _ in 0..80 {
            let trial: Vec<T> = z.iter().zip(&step).map(|(a, b)| *a + t * *b).collect();
            if let Some(ft) = objective(&trial) {
                let armijo = ft <= f + T::lit(1e-4) * t * slope && ft < f;
                // below roundoff in f the gradient norm decides
                let flat = (f - ft).abs() <= T::lit(4.0) * T::epsilon() * f.abs().max(T::one())
                    && max_abs(&gradient(&trial)) < gnorm;
                if armijo || flat {
                    z = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t = t / T::lit(2.0);
        }
        let znorm = z.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if znorm > escape {
            break;
        }
        if !accepted {
            break;
        }
    }
    let znorm = z.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut q: Vec<T> = delta
        .iter()
        .zip(probs)
        .map(|(dc, pc)| *pc / (T::one() + dot(&z, dc)))
        .collect();
    let total = q.iter().fold(T::zero(), |a, b| a + *b);
    for v in q.iter_mut() {
        *v = *v / total;
    }
    let mut drift = vec![T::zero(); r];
    for (dc, qc) in delta.iter().zip(&q) {
        for i in 0..r {
            drift[i] = drift[i] + *qc * dc[i];
        }
    }
    let defect = drift.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let positive = q.iter().all(|v| *v > T::zero() && v.is_finite());
    // w = 1 + z·δ loses about |z| ulps, which sets the floor of the defect
    if znorm <= escape && defect <= T::lit(1e-11) * (T::one() + znorm) && positive {
        return Kernel::Martingale(q);
    }
    // escaping direction in asset coordinates
    let mut h = vec![T::zero(); incs[0].len()];
    for (zi, b) in z.iter().zip(&basis) {
        for (hj, bj) in h.iter_mut().zip(b) {
            *hj = *hj + *zi / znorm * *bj;
        }
    }
    Kernel::Arbitrage(h)
}
