//! One-dimensional root finding and maximization.
//!
//! Bisection is used for every monotone residual in the engine (inverses,
//! crossings, peak conditions). Golden-section search handles the
//! derivative-free maximization of profit curves.

use crate::error::{EngineError, Result};

/// Absolute tolerance on the bracket width.
pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

pub const GOLDEN_TOL: f64 = 1e-11;
const GOLDEN_MAX_ITER: usize = 400;

/// Inverse golden ratio, (sqrt(5) - 1) / 2.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Finds a root of `f` on `[lo, hi]` by bisection.
///
/// The residual must change sign (or vanish) across the bracket. Iteration
/// stops when the bracket is narrower than [`BISECTION_TOL`], when the
/// midpoint stops moving in floating point, or after
/// [`BISECTION_MAX_ITER`] halvings.
pub fn bisect<F>(f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    bisect_with_tol(f, lo, hi, BISECTION_TOL)
}

pub fn bisect_with_tol<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(EngineError::NotBracketed { lo, hi });
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `x` in `[lo, hi]` with `pred(x)` true, for a predicate that
/// holds on `[lo, edge]` and fails beyond. Unlike [`bisect`] the returned
/// point always satisfies the predicate, so callers get a feasible answer.
/// Requires `pred(lo)`.
pub fn bisect_edge<P>(pred: P, mut lo: f64, mut hi: f64) -> f64
where
    P: Fn(f64) -> bool,
{
    if pred(hi) {
        return hi;
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// Returns the best of the final interior estimate and the two endpoints,
/// so monotone objectives land exactly on the boundary.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    if hi <= lo {
        return (lo, f(lo));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
