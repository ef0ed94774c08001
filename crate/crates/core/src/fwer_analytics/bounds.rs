use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{param, Error, Result};
use crate::factor_model::{check_level, EquicorrelatedModel};
use crate::roots::golden_min;

use super::exact_fwer_bonferroni;

const D_EPS: f64 = 1e-6;
const GOLDEN_ITERATIONS: usize = 80;

/// How the split point `d` of the upper bound is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitPoint {
    Fixed(f64),
    Optimized,
}

/// Lower bound, upper bound and (optionally) the exact value for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub exact: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub d_used: f64,
    /// `α(1−ρ)`, reported only when both factors are standard normal.
    pub upper_alpha_one_minus_rho: Option<f64>,
    pub n: usize,
    pub alpha: f64,
    pub rho: f64,
}

struct Pieces {
    cutoff: f64,
    a: f64,
    b: f64,
    g0: f64,
}

fn pieces(model: &EquicorrelatedModel, alpha: f64) -> Result<Pieces> {
    check_level(alpha)?;
    let rho = model.rho();
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!(
            "the factor-split bounds require 0 < rho < 1 (they divide by sqrt(rho)); got rho = {rho}"
        )));
    }
    if !model.config().is_global_null() {
        return Err(Error::Configuration("the factor-split bounds are stated under the global null".into()));
    }
    let law = model.marginal();
    let (a, b) = law.loadings();
    Ok(Pieces { cutoff: law.bonferroni_cutoff(model.n(), alpha)?, a, b, g0: model.g().cdf(0.0) })
}

/// `ln Fⁿ(x)`.
fn ln_f_pow(model: &EquicorrelatedModel, x: f64) -> f64 {
    model.n() as f64 * model.f().ln_cdf(x)
}

fn upper_at(model: &EquicorrelatedModel, p: &Pieces, d: f64) -> f64 {
    let c = p.cutoff;
    let first = p.g0 * ln_f_pow(model, c / p.a).exp();
    let second = (model.g().cdf(c * (1.0 - d) / p.b) - p.g0) * ln_f_pow(model, c * d / p.a).exp();
    (1.0 - first - second).clamp(0.0, 1.0)
}

/// Upper bound `1 − G(0)Fⁿ(c/√(1−ρ)) − [G(c(1−d)/√ρ) − G(0)]·Fⁿ(cd/√(1−ρ))`.
///
/// Returns `(bound, d)`; with [`SplitPoint::Optimized`] `d` minimizes the bound.
pub fn upper_bound(model: &EquicorrelatedModel, alpha: f64, split: SplitPoint) -> Result<(f64, f64)> {
    let p = pieces(model, alpha)?;
    match split {
        SplitPoint::Fixed(d) => {
            if !(d > 0.0 && d < 1.0) {
                return Err(param("d", format!("split point must lie in (0, 1), got {d}")));
            }
            Ok((upper_at(model, &p, d), d))
        }
        SplitPoint::Optimized => {
            let (d, v) = golden_min(|d| upper_at(model, &p, d), D_EPS, 1.0 - D_EPS, GOLDEN_ITERATIONS);
            Ok((v, d))
        }
    }
}

/// Lower bound `[1 − Fⁿ(c/√(1−ρ))]·[1 − G(0)]`.
pub fn lower_bound(model: &EquicorrelatedModel, alpha: f64) -> Result<f64> {
    let p = pieces(model, alpha)?;
    Ok(-ln_f_pow(model, p.cutoff / p.a).exp_m1() * (1.0 - p.g0))
}

/// Lower bound, upper bound and optionally the exact value in one report.
pub fn bounds(model: &EquicorrelatedModel, alpha: f64, split: SplitPoint, with_exact: bool) -> Result<BoundReport> {
    let (upper, d_used) = upper_bound(model, alpha, split)?;
    let lower = lower_bound(model, alpha)?;
    let exact = if with_exact { Some(exact_fwer_bonferroni(model, alpha)?) } else { None };
    let normal = |s: DistributionSpec| s == DistributionSpec::StandardNormal;
    let reference = (normal(model.f().spec()) && normal(model.g().spec())).then(|| alpha * (1.0 - model.rho()));
    Ok(BoundReport {
        exact,
        lower,
        upper,
        d_used,
        upper_alpha_one_minus_rho: reference,
        n: model.n(),
        alpha,
        rho: model.rho(),
    })
}

/// Asymptotic floor `exp(−(η²γ(1−ρ))^{1+δ/2})` of `Fⁿ` at the threshold
/// `√(n/(γ(1−ρ)))` for a Pareto `F` with tail slack `δ`.
pub fn pareto_limit_floor(delta: f64, gamma: f64, rho: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(param("delta", format!("must be finite and > 0, got {delta}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(param("gamma", format!("must be finite and > 0, got {gamma}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(param("rho", format!("must lie in (0, 1), got {rho}")));
    }
    let eta = (delta / (2.0 + delta)).sqrt() * (delta + 1.0);
    let d = (eta * eta * gamma * (1.0 - rho)).powf(1.0 + 0.5 * delta);
    Ok((-d).exp())
}
