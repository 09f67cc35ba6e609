//! Subspaces of zero-mean random variables under a risk measure and the
//! weighted quadratic projections onto them.
//!
//! Everything here is field arithmetic, so it runs on exact rationals as
//! well as floats. Bases are kept orthogonal; normalisation (which needs a
//! square root) is a separate floating-point step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Measure, OutcomeVector};
use crate::numerics::linalg::solve_dense;
use crate::scalar::{Real, Scalar};

/// `E_R[a b]`.
pub fn inner<T: Scalar>(r: &Measure<T>, a: &OutcomeVector<T>, b: &OutcomeVector<T>) -> T {
    r.leaf_prob
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .fold(T::zero(), |acc, (p, (x, y))| acc + p.clone() * x.clone() * y.clone())
}

fn axpy<T: Scalar>(y: &mut OutcomeVector<T>, a: T, x: &OutcomeVector<T>) {
    for (yi, xi) in y.values.iter_mut().zip(&x.values) {
        *yi = yi.clone() + a.clone() * xi.clone();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBasis<T> {
    pub vectors: Vec<OutcomeVector<T>>,
    /// Inner product `E_R[αβ]`.
    pub metric: Measure<T>,
    /// Pairwise orthogonal under the metric.
    pub orthogonal: bool,
    /// Orthogonal with unit norms.
    pub orthonormalized: bool,
}

impl<T: Scalar> SubspaceBasis<T> {
    pub fn empty(metric: Measure<T>) -> Self {
        Self { vectors: Vec::new(), metric, orthogonal: true, orthonormalized: true }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Largest `|E_R[b]|` over the basis vectors.
    pub fn max_mean(&self) -> T {
        let one = OutcomeVector::constant(self.metric.leaf_prob.len(), T::one());
        self.vectors.iter().fold(T::zero(), |m, v| {
            let e = inner(&self.metric, v, &one).magnitude();
            if e > m {
                e
            } else {
                m
            }
        })
    }
}

/// Orthogonalises `candidates` against `fixed` and each other (modified
/// Gram–Schmidt, two passes). A candidate is dropped when its remaining
/// squared norm is at most `drop_tol² ·` its original squared norm; pass
/// zero for exact arithmetic.
fn gram_schmidt<T: Scalar>(
    metric: &Measure<T>,
    fixed: &[OutcomeVector<T>],
    candidates: &[OutcomeVector<T>],
    drop_tol: &T,
) -> Vec<OutcomeVector<T>> {
    let mut basis: Vec<(OutcomeVector<T>, T)> =
        fixed.iter().map(|v| (v.clone(), inner(metric, v, v))).collect();
    let n_fixed = basis.len();
    let threshold = drop_tol.clone() * drop_tol.clone();
    for c in candidates {
        let norm0 = inner(metric, c, c);
        if norm0.is_zero() {
            continue;
        }
        let mut w = c.clone();
        for _ in 0..2 {
            for (b, bb) in &basis {
                let coef = inner(metric, &w, b) / bb.clone();
                axpy(&mut w, -coef, b);
            }
        }
        let norm = inner(metric, &w, &w);
        if norm > threshold.clone() * norm0 && !norm.is_zero() {
            basis.push((w, norm));
        }
    }
    basis.into_iter().skip(n_fixed).map(|(v, _)| v).collect()
}

/// Span of `vectors` intersected with zero-mean variables: each vector is
/// centred under the metric, then orthogonalised.
pub fn centered_span<T: Scalar>(vectors: &[OutcomeVector<T>], metric: &Measure<T>, drop_tol: T) -> SubspaceBasis<T> {
    let one = OutcomeVector::constant(metric.leaf_prob.len(), T::one());
    let vectors = gram_schmidt(metric, &[one], vectors, &drop_tol);
    SubspaceBasis { vectors, metric: metric.clone(), orthogonal: true, orthonormalized: false }
}

/// Complement of `basis` inside the zero-mean variables, obtained by
/// orthogonalising the unit vectors against `{1} ∪ basis`.
pub fn orthocomplement<T: Scalar>(basis: &SubspaceBasis<T>, drop_tol: T) -> SubspaceBasis<T> {
    let n = basis.metric.leaf_prob.len();
    let mut fixed = vec![OutcomeVector::constant(n, T::one())];
    fixed.extend(gram_schmidt(&basis.metric, &fixed.clone(), &basis.vectors, &drop_tol));
    let units: Vec<OutcomeVector<T>> = (0..n)
        .map(|i| OutcomeVector::new((0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()))
        .collect();
    let vectors = gram_schmidt(&basis.metric, &fixed, &units, &drop_tol);
    SubspaceBasis { vectors, metric: basis.metric.clone(), orthogonal: true, orthonormalized: false }
}

impl<T: Real> SubspaceBasis<T> {
    pub fn normalized(mut self) -> Self {
        for v in &mut self.vectors {
            let norm = inner(&self.metric, v, v).sqrt();
            for x in &mut v.values {
                *x = *x / norm;
            }
        }
        self.orthonormalized = true;
        self
    }
}

/// Minimiser of `E_R[w (1 + α)²]` over `α` in the span of `basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    pub value: T,
    pub optimizer: OutcomeVector<T>,
    pub coefficients: Vec<T>,
}

/// Solves the normal equations `(Gᵀ W G) c = −Gᵀ W 1` with
/// `W = diag(R · weights)`.
pub fn quad_project<T: Scalar>(basis: &SubspaceBasis<T>, weights: &OutcomeVector<T>) -> Result<Projection<T>> {
    if weights.values.iter().any(|w| !(*w > T::zero())) {
        return Err(Error::Precondition("projection weights must be strictly positive".into()));
    }
    let n = weights.len();
    let r = &basis.metric;
    let wr = Measure::new(r.leaf_prob.iter().zip(&weights.values).map(|(p, w)| p.clone() * w.clone()).collect());
    let k = basis.dim();
    let one = OutcomeVector::constant(n, T::one());
    let mut optimizer = OutcomeVector::constant(n, T::zero());
    let mut coefficients = Vec::new();
    if k > 0 {
        let gram: Vec<Vec<T>> = (0..k)
            .map(|i| (0..k).map(|j| inner(&wr, &basis.vectors[i], &basis.vectors[j])).collect())
            .collect();
        let rhs: Vec<T> = (0..k).map(|i| -inner(&wr, &basis.vectors[i], &one)).collect();
        coefficients = solve_dense(gram, rhs)
            .ok_or_else(|| Error::Precondition("singular normal equations in projection".into()))?;
        for (c, v) in coefficients.iter().zip(&basis.vectors) {
            axpy(&mut optimizer, c.clone(), v);
        }
    }
    let shifted = optimizer.map(|a| T::one() + a.clone());
    let value = inner(&wr, &shifted, &shifted);
    Ok(Projection { value, optimizer, coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn rv(v: &[i64]) -> OutcomeVector<BigRational> {
        OutcomeVector::new(v.iter().map(|&x| ratio(x, 1)).collect())
    }

    #[test]
    fn worked_fixture_is_exact() {
        let r = Measure::new(vec![ratio(1, 3); 3]);
        let a = centered_span(&[rv(&[1, -1, 0])], &r, ratio(0, 1));
        assert_eq!(a.dim(), 1);
        let zeta = rv(&[1, 2, 2]);
        let pa = quad_project(&a, &zeta).unwrap();
        assert_eq!(pa.value, ratio(14, 9));
        assert_eq!(pa.optimizer.values, vec![ratio(1, 3), ratio(-1, 3), ratio(0, 1)]);
        let b = orthocomplement(&a, ratio(0, 1));
        assert_eq!(b.dim(), 1);
        let eta = zeta.map(|z| ratio(1, 1) / z.clone());
        let pb = quad_project(&b, &eta).unwrap();
        assert_eq!(pb.value, ratio(9, 14));
        assert_eq!(pb.optimizer.values, vec![ratio(-1, 7), ratio(-1, 7), ratio(2, 7)]);
    }

    #[test]
    fn constant_weights_give_zero_optimizer() {
        let r = Measure::new(vec![0.2f64, 0.3, 0.5]);
        let a = centered_span(&[OutcomeVector::new(vec![1.0, 4.0, -2.0])], &r, 1e-10).normalized();
        let p = quad_project(&a, &OutcomeVector::constant(3, 2.5)).unwrap();
        assert!((p.value - 2.5).abs() < 1e-14);
        assert!(p.optimizer.values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dimensions_add_up() {
        let r = Measure::new(vec![0.1f64, 0.2, 0.3, 0.4]);
        let none = SubspaceBasis::empty(r.clone());
        assert_eq!(orthocomplement(&none, 1e-10).dim(), 3);
        let dup = vec![OutcomeVector::new(vec![1.0, 0.0, -1.0, 2.0]), OutcomeVector::new(vec![2.0, 0.0, -2.0, 4.0])];
        let a = centered_span(&dup, &r, 1e-10).normalized();
        assert_eq!(a.dim(), 1);
        let b = orthocomplement(&a, 1e-10);
        assert_eq!(b.dim(), 2);
        assert!(inner(&r, &a.vectors[0], &b.vectors[0]).abs() < 1e-15);
        assert!(b.max_mean().abs() < 1e-15);
    }
}
