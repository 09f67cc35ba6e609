//! Scalar root finding for monotone functions.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Safeguarded Newton iteration on a bracket `[lo, hi]` where `f(lo)` and
/// `f(hi)` have opposite signs. `f` returns the value and its derivative.
/// Falls back to bisection whenever the Newton step leaves the bracket or
/// fails to halve the residual.
pub fn newton_bisect<T, F>(mut f: F, mut lo: T, mut hi: T, x0: T, xtol: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> Result<(T, T)>,
{
    let (flo, _) = f(lo)?;
    let (fhi, _) = f(hi)?;
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if (flo > T::zero()) == (fhi > T::zero()) {
        return Err(Error::Precondition("root is not bracketed".into()));
    }
    let lo_positive = flo > T::zero();
    let mut x = if x0 > lo && x0 < hi { x0 } else { (lo + hi) / T::lit(2.0) };
    let mut last_abs = T::infinity();
    for _ in 0..200 {
        let (fx, dfx) = f(x)?;
        if fx == T::zero() {
            return Ok(x);
        }
        if (fx > T::zero()) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        let newton_ok = dfx != T::zero()
            && next.is_finite()
            && next > lo
            && next < hi
            && fx.abs() < T::lit(0.5) * last_abs;
        if !newton_ok {
            next = (lo + hi) / T::lit(2.0);
        }
        last_abs = fx.abs();
        let step = (next - x).abs();
        x = next;
        if step <= xtol * (T::one() + x.abs()) || (hi - lo) <= xtol * (T::one() + x.abs()) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Brent's method on `[a, b]` with `f(a)·f(b) < 0`.
pub fn brent<T, F>(mut f: F, a: T, b: T, xtol: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let two = T::lit(2.0);
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::Precondition("root is not bracketed".into()));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + xtol / two;
        let xm = (c - b) / two;
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::lit(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b = b + d;
        } else {
            b = b + if xm > T::zero() { tol1 } else { -tol1 };
        }
        fb = f(b)?;
    }
    Ok(b)
}

/// Expands `[lo, hi]` geometrically around `start` until a decreasing
/// function changes sign, never leaving `[min, max]`.
pub fn bracket_decreasing<T, F>(mut f: F, start: T, min: T, max: T) -> Result<(T, T)>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let factor = T::lit(4.0);
    let mut lo = start;
    let mut hi = start;
    let mut flo = f(lo)?;
    let mut fhi = flo;
    for _ in 0..400 {
        if flo >= T::zero() && fhi <= T::zero() {
            return Ok((lo, hi));
        }
        if flo < T::zero() {
            if lo <= min {
                break;
            }
            lo = (lo / factor).max(min);
            flo = f(lo)?;
        }
        if fhi > T::zero() {
            if hi >= max {
                break;
            }
            hi = (hi * factor).min(max);
            fhi = f(hi)?;
        }
    }
    if flo >= T::zero() && fhi <= T::zero() {
        Ok((lo, hi))
    } else {
        Err(Error::Unreachable(start.as_f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_bisect_finds_sqrt2() {
        let r = newton_bisect(|x: f64| Ok((x * x - 2.0, 2.0 * x)), 0.0, 2.0, 1.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x: f64| Ok(x * x * x - x - 2.0), 1.0, 2.0, 1e-15).unwrap();
        assert!((r * r * r - r - 2.0).abs() < 1e-13);
    }

    #[test]
    fn unbracketed_root_is_an_error() {
        assert!(brent(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn bracket_expansion() {
        let (lo, hi) = bracket_decreasing(|x: f64| Ok(1.0 / x - 0.001), 1.0, 1e-9, 1e9).unwrap();
        assert!(lo <= 1000.0 && hi >= 1000.0);
        assert!(bracket_decreasing(|x: f64| Ok(1.0 / x - 0.001), 1.0, 1e-9, 10.0).is_err());
    }
}
