//! Bracketing root finders.

use crate::error::{Error, Result};

/// Iteration cap; bisection on doubles exhausts the mantissa well before this.
const MAX_BISECTIONS: usize = 2_000;

/// Bisection for a root of `f` on `[lo, hi]` where `f(lo)` and `f(hi)` have
/// opposite signs (zero counts as either). Stops when the bracket width falls
/// below `tol` or the midpoint coincides with an endpoint.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::solver(
            "bisection",
            format!("invalid bracket [{lo}, {hi}]"),
        ));
    }
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let f_hi = f(hi);
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::solver(
            "bisection",
            format!("no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"),
        ));
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid.is_nan() {
            return Err(Error::solver("bisection", format!("NaN at {mid}")));
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

/// Last point of `[lo, hi]` where the non-increasing predicate-like function
/// `f` is still non-negative, assuming `f(lo) >= 0`. Returns `hi` when `f` is
/// non-negative on the whole interval.
pub fn last_nonnegative<F>(mut f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if f(hi) >= 0.0 {
        return Ok(hi);
    }
    bisect(|x| if f(x) >= 0.0 { 1.0 } else { -1.0 }, lo, hi, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_square_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decreasing_functions_work() {
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_sign_change_is_an_error() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn endpoint_roots_returned_directly() {
        assert_eq!(bisect(|x| x, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(bisect(|x| x - 1.0, 0.0, 1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn last_nonnegative_step() {
        let r = last_nonnegative(|x| if x <= 0.25 { 1.0 } else { -1.0 }, 0.0, 1.0).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
        assert_eq!(last_nonnegative(|_| 1.0, 0.0, 1.0).unwrap(), 1.0);
    }
}
