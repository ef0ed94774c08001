//! One-dimensional root finding and minimization.

use crate::error::{Error, Result};

/// Solves `f(x) = 0` on a sign-changing bracket `[lo, hi]` with Newton steps
/// that fall back to bisection whenever they leave the bracket.
///
/// `fdf` returns `(f(x), f'(x))`.
pub fn newton_bisect<F>(mut fdf: F, lo: f64, hi: f64, x0: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (f_lo, _) = fdf(lo);
    let (f_hi, _) = fdf(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracket { what: "root", lo, hi, f_lo, f_hi });
    }
    let rising = f_hi > 0.0;
    let (mut a, mut b) = (lo, hi);
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    for _ in 0..200 {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx.is_finite() && dfx != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let step = (next - x).abs();
        x = next;
        if step <= xtol * x.abs().max(1.0) || (b - a) <= xtol * x.abs().max(1.0) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Grows `hi` geometrically from `start` until `f(hi)` changes sign relative to `f(lo)`.
pub fn expand_upper<F>(mut f: F, lo: f64, start: f64, limit: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let mut hi = start.max(lo + 1.0);
    loop {
        let f_hi = f(hi);
        if f_hi.signum() != f_lo.signum() {
            return Ok(hi);
        }
        if hi >= limit {
            return Err(Error::Bracket { what: "bracket expansion", lo, hi, f_lo, f_hi });
        }
        hi = (hi * 2.0).min(limit);
    }
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
///
/// Returns `(argmin, min)`. When the interior probes show the function is not
/// unimodal, the result of a dense grid scan is returned instead.
pub fn golden_min<F>(mut f: F, a: f64, b: f64, iterations: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (fa, fb) = (f(a), f(b));
    let mut lo = a;
    let mut hi = b;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    if fc > fa && fd > fb {
        return grid_min(f, a, b, 512);
    }
    for _ in 0..iterations {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let (mut best_x, mut best) = if fc < fd { (c, fc) } else { (d, fd) };
    if fa < best {
        best_x = a;
        best = fa;
    }
    if fb < best {
        best_x = b;
        best = fb;
    }
    (best_x, best)
}

fn grid_min<F>(mut f: F, a: f64, b: f64, points: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut best = (a, f(a));
    for i in 1..=points {
        let x = a + (b - a) * i as f64 / points as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}
