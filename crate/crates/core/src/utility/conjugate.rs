//! Convex conjugate `V(y) = sup_x {U(x) − xy}` by inverting `U′`.

use serde::{Deserialize, Serialize};

use super::spec::UtilitySpec;
use crate::error::{Error, Result};
use crate::numerics::roots::{bracket_decreasing, newton_bisect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePoint {
    pub y: f64,
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub x_star: f64,
}

impl ConjugatePoint {
    /// Relative risk tolerance `B(y) = −yV″(y)/V′(y)`.
    pub fn rrt(&self) -> f64 {
        -self.y * self.v2 / self.v1
    }
}

/// Solves `U′(x) = y` on `t = ln x` by bracketed Newton
/// (`d/dt ln U′(e^t) = −A(e^t)`).
pub fn marginal_inverse(u: &UtilitySpec, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Precondition(format!("dual variable must be positive, got {y}")));
    }
    let (dlo, dhi) = u.domain;
    let ln_y = y.ln();
    let phi = |t: f64| -> Result<(f64, f64)> {
        let x = t.exp();
        let (u1, u2) = u.marginals(x)?;
        Ok((u1.ln() - ln_y, x * u2 / u1))
    };
    let t_lo = dlo.ln();
    let t_hi = dhi.ln();
    let start = 0f64.clamp(t_lo, t_hi);
    // bracket_decreasing works on positive arguments, so shift by the lower end
    let shift = t_lo - 1.0;
    let (a, b) = bracket_decreasing(
        |s: f64| Ok(phi((s + shift).clamp(t_lo, t_hi))?.0),
        start - shift,
        1.0,
        t_hi - shift,
    )
    .map_err(|_| Error::Unreachable(y))?;
    let (a, b) = ((a + shift).clamp(t_lo, t_hi), (b + shift).clamp(t_lo, t_hi));
    let t = newton_bisect(phi, a, b, 0.5 * (a + b), 1e-16)?;
    Ok(t.exp())
}

pub fn conjugate(u: &UtilitySpec, y: f64) -> Result<ConjugatePoint> {
    let x = marginal_inverse(u, y)?;
    let vals = u.eval(x)?;
    Ok(ConjugatePoint { y, v: vals.u - x * y, v1: -x, v2: -1.0 / vals.u2, x_star: x })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_conjugate_closed_form() {
        let u = UtilitySpec::log();
        for &y in &[1e-3, 0.5, 1.0, 7.0] {
            let c = conjugate(&u, y).unwrap();
            assert!((c.x_star * y - 1.0).abs() < 1e-13);
            assert!((c.v - (-y.ln() - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_two_at_four() {
        let c = conjugate(&UtilitySpec::power(2.0), 4.0).unwrap();
        assert!((c.x_star - 0.5).abs() < 1e-15);
        assert!((c.v + 4.0).abs() < 1e-13);
        // B(y) A(x*) = 1
        assert!((c.rrt() * 2.0 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn unreachable_levels() {
        let u = UtilitySpec::log().with_domain(0.5, 2.0);
        assert!(matches!(conjugate(&u, 10.0), Err(Error::Unreachable(_))));
        assert!(conjugate(&u, 1.0).is_ok());
    }
}
