//! Globally adaptive Gauss–Kronrod (10/21) quadrature.
//!
//! Integrals over the real line are mapped onto `(-1, 1)` with
//! `u = t / (1 - t^2)`. Caller-supplied breakpoints (kinks, steep transitions)
//! are mapped into `t` and become panel boundaries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980373284,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Tolerances for an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-11, abs_tol: 0.0, max_panels: 4000 }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// An integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Integral in log form: `value = exp(ln_value)`, `rel_error` relative to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub ln_value: f64,
    pub rel_error: f64,
    pub panels: usize,
}

impl LogEstimate {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    #[allow(clippy::needless_range_loop)]
    for j in 0..5 {
        let k = 2 * j + 1;
        let dx = half * XGK[k];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[k] = f1;
        fv2[k] = f2;
        resg += WG[j] * (f1 + f2);
        resk += WGK[k] * (f1 + f2);
        resabs += WGK[k] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let k = 2 * j;
        let dx = half * XGK[k];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[k] = f1;
        fv2[k] = f2;
        resk += WGK[k] * (f1 + f2);
        resabs += WGK[k] * (f1.abs() + f2.abs());
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for k in 0..10 {
        resasc += WGK[k] * ((fv1[k] - reskh).abs() + (fv2[k] - reskh).abs());
    }
    let result = resk * half;
    let abs_half = half.abs();
    resabs *= abs_half;
    resasc *= abs_half;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (1.0f64).min((200.0 * err / resasc).powf(1.5));
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Integrates `f` over `[a, b]`, splitting first at the given interior points.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], cfg: QuadConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    edges.extend(breakpoints.iter().copied().filter(|x| x.is_finite() && *x > a && *x < b));
    edges.push(b);
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    edges.dedup_by(|x, y| (*x - *y).abs() <= 4.0 * f64::EPSILON * x.abs().max(y.abs()).max(1e-300));

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (value, error) = gk21(&mut f, w[0], w[1]);
        heap.push(Panel { a: w[0], b: w[1], value, error });
    }
    let totals = |heap: &BinaryHeap<Panel>| {
        heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = totals(&heap);
    let mut panels = heap.len();
    let mut since_resum = 0;
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Accuracy { estimate: value, error, panels });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tol {
            break;
        }
        if panels >= cfg.max_panels {
            return Err(Error::Accuracy { estimate: value, error, panels });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel at floating-point resolution: accept it as is.
            heap.push(Panel { error: 0.0, ..worst });
            error -= worst.error;
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        panels += 1;
        since_resum += 1;
        if since_resum == 64 {
            (value, error) = totals(&heap);
            since_resum = 0;
        }
    }
    let (value, error) = totals(&heap);
    Ok(Estimate { value, error, panels })
}

/// Maps a real-line abscissa into the compact variable `t` of `u = t / (1 - t^2)`.
pub fn to_unit(u: f64) -> f64 {
    if u.is_infinite() {
        return u.signum();
    }
    2.0 * u / (1.0 + (1.0 + 4.0 * u * u).sqrt())
}

/// Inverse of [`to_unit`].
pub fn from_unit(t: f64) -> f64 {
    t / ((1.0 - t) * (1.0 + t))
}

/// `ln du/dt` for the real-line map.
fn ln_jacobian(t: f64) -> f64 {
    (1.0 + t * t).ln() - 2.0 * ((1.0 - t) * (1.0 + t)).ln()
}

fn unit_breakpoints(points: &[f64]) -> Vec<f64> {
    points.iter().copied().filter(|u| u.is_finite()).map(to_unit).collect()
}

/// Integrates `f` over the whole real line.
pub fn integrate_real_line<F>(mut f: F, breakpoints: &[f64], cfg: QuadConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    let bps = unit_breakpoints(breakpoints);
    integrate(
        |t| {
            let u = from_unit(t);
            if !u.is_finite() {
                return 0.0;
            }
            let v = f(u);
            if v == 0.0 {
                0.0
            } else {
                v * ln_jacobian(t).exp()
            }
        },
        -1.0,
        1.0,
        &bps,
        cfg,
    )
}

/// Integrates `exp(ln_f)` over the real line, returning the logarithm of the
/// result so values far below `f64::MIN_POSITIVE` stay representable.
pub fn integrate_real_line_log<F>(mut ln_f: F, breakpoints: &[f64], cfg: QuadConfig) -> Result<LogEstimate>
where
    F: FnMut(f64) -> f64,
{
    let mut h = |t: f64| {
        let u = from_unit(t);
        if !u.is_finite() {
            return f64::NEG_INFINITY;
        }
        let v = ln_f(u);
        if v == f64::NEG_INFINITY {
            v
        } else {
            v + ln_jacobian(t)
        }
    };
    let mut bps = unit_breakpoints(breakpoints);

    // Locate the peak of the log-integrand so the rescaled integrand is O(1).
    const SCAN: usize = 800;
    let mut grid: Vec<f64> = (0..SCAN).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / SCAN as f64).collect();
    grid.extend(bps.iter().copied());
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    let values: Vec<f64> = grid.iter().map(|&t| h(t)).collect();
    let (best_idx, mut peak) = values
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if peak == f64::NEG_INFINITY {
        return Ok(LogEstimate { ln_value: f64::NEG_INFINITY, rel_error: 0.0, panels: 0 });
    }
    let lo = if best_idx == 0 { -1.0 + 1e-300 } else { grid[best_idx - 1] };
    let hi = if best_idx + 1 == grid.len() { 1.0 - f64::EPSILON } else { grid[best_idx + 1] };
    let (t_star, neg) = crate::roots::golden_min(|t| -h(t), lo, hi, 60);
    if -neg > peak {
        peak = -neg;
    }
    bps.push(t_star);
    bps.push(grid[best_idx]);
    // Panel edges at a ladder of drops below the peak on both sides, so no
    // panel hides a significant share of the mass next to one of its ends.
    for &drop in &[1.0, 4.0, 10.0, 25.0, 50.0, 80.0] {
        let level = peak - drop;
        let inner_lo = (0..best_idx).rev().find(|&i| values[i] < level);
        let inner_hi = (best_idx + 1..grid.len()).find(|&i| values[i] < level);
        for outer in [inner_lo, inner_hi].into_iter().flatten() {
            let (mut near, mut far) = (t_star, grid[outer]);
            for _ in 0..60 {
                let mid = 0.5 * (near + far);
                if h(mid) >= level {
                    near = mid;
                } else {
                    far = mid;
                }
            }
            bps.push(0.5 * (near + far));
        }
    }

    let est = integrate(
        |t| {
            let v = h(t);
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                (v - peak).exp()
            }
        },
        -1.0,
        1.0,
        &bps,
        cfg,
    )?;
    Ok(LogEstimate {
        ln_value: peak + est.value.ln(),
        rel_error: if est.value > 0.0 { est.error / est.value } else { 0.0 },
        panels: est.panels,
    })
}
