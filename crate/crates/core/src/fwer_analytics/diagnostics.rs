use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{param, Error, Result};
use crate::factor_model::{check_level, EquicorrelatedModel};

/// Outcome of a numerical condition check. Evidence on finite grids, not proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

/// Trend of `Fⁿ(c/√(1−ρ))` along an increasing `n` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    TendsToZero,
    PositiveLimit,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostic {
    pub n_grid: Vec<usize>,
    pub cutoffs: Vec<f64>,
    /// `f(t·c)/(√(1−ρ)·f*(c))` with `t = 1/√(1−ρ)`.
    pub ratio_values: Vec<f64>,
    /// `−α·ratio`, the implied `ln lim Fⁿ(t·c)`.
    pub log_limit_estimates: Vec<f64>,
    /// `Fⁿ(t·c)`.
    pub fn_power_values: Vec<f64>,
    pub verdict: LimitVerdict,
}

/// Positive mass of the common factor above each `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub a_grid: Vec<f64>,
    pub upper_tail: Vec<f64>,
    pub max_upper_tail: f64,
    pub verdict: Verdict,
}

/// Monotone density and vanishing shift ratios `f(x)/f(x−b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub non_increasing: bool,
    pub x_points: Vec<f64>,
    pub b_grid: Vec<f64>,
    /// `ratios[k][j]` is `f(x_j)/f(x_j − b_k)`.
    pub ratios: Vec<Vec<f64>>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// The common factor is not bounded above: `1 − G(a) > 0` for some `a > 0`.
    pub common_factor_tail: TailCheck,
    /// `f` is non-increasing on the positive axis and `f(x)/f(x−b) → 0`.
    pub density_decay: DecayCheck,
}

const RATIO_POINTS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];
const RATIO_SMALL: f64 = 1e-6;
const MONOTONE_GRID_MAX: f64 = 100.0;
const MONOTONE_GRID_STEP: f64 = 0.01;

/// Numerical checks of the two sufficient conditions for the error rate to vanish.
pub fn check_zero_limit_conditions(
    f_spec: DistributionSpec,
    g_spec: DistributionSpec,
    b_grid: &[f64],
    a_grid: &[f64],
) -> Result<ConditionReport> {
    if b_grid.is_empty() || a_grid.is_empty() {
        return Err(param("grid", "shift and level grids must be nonempty"));
    }
    if b_grid.iter().chain(a_grid).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(param("grid", "grid values must be finite and > 0"));
    }
    let f = f_spec.build()?;
    let g = g_spec.build()?;

    let upper_tail: Vec<f64> = a_grid.iter().map(|&a| g.sf(a)).collect();
    let max_upper_tail = upper_tail.iter().copied().fold(0.0, f64::max);
    let tail_verdict = if max_upper_tail > 0.0 {
        Verdict::Satisfied
    } else if a_grid.iter().all(|&a| g.ln_sf(a) == f64::NEG_INFINITY) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };

    let steps = (MONOTONE_GRID_MAX / MONOTONE_GRID_STEP) as usize;
    let mut non_increasing = true;
    let mut prev = f.ln_pdf(0.0);
    for k in 1..=steps {
        let cur = f.ln_pdf(k as f64 * MONOTONE_GRID_STEP);
        if cur > prev + 1e-12 * prev.abs().max(1.0) {
            non_increasing = false;
            break;
        }
        prev = cur;
    }
    let ratios: Vec<Vec<f64>> = b_grid
        .iter()
        .map(|&b| RATIO_POINTS.iter().map(|&x| (f.ln_pdf(x) - f.ln_pdf(x - b)).exp()).collect())
        .collect();
    let vanishing = ratios.iter().all(|r| r[3] < RATIO_SMALL);
    let stalled = ratios.iter().any(|r| !(r[3] < 0.5 * r[0]));
    let decay_verdict = if !non_increasing || stalled {
        Verdict::Violated
    } else if vanishing {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    };

    Ok(ConditionReport {
        common_factor_tail: TailCheck { a_grid: a_grid.to_vec(), upper_tail, max_upper_tail, verdict: tail_verdict },
        density_decay: DecayCheck {
            non_increasing,
            x_points: RATIO_POINTS.to_vec(),
            b_grid: b_grid.to_vec(),
            ratios,
            verdict: decay_verdict,
        },
    })
}

/// Tracks `f(t·c)/(√(1−ρ)·f*(c))` and `Fⁿ(t·c)` along `n_grid` with `c` the Bonferroni
/// cutoff for each `n`. The model's own hypothesis count is ignored.
pub fn limit_ratio_diagnostic(model: &EquicorrelatedModel, alpha: f64, n_grid: &[usize]) -> Result<LimitDiagnostic> {
    check_level(alpha)?;
    let rho = model.rho();
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("the limit diagnostic requires 0 < rho < 1, got {rho}")));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(param("n_grid", "counts must be positive and strictly increasing"));
    }
    if *n_grid.last().unwrap() > 100_000_000 {
        return Err(param("n_grid", "counts above 10^8 are not supported"));
    }
    let law = model.marginal();
    let t = 1.0 / (1.0 - rho).sqrt();
    let f = model.f();
    let mut out = LimitDiagnostic {
        n_grid: n_grid.to_vec(),
        cutoffs: Vec::new(),
        ratio_values: Vec::new(),
        log_limit_estimates: Vec::new(),
        fn_power_values: Vec::new(),
        verdict: LimitVerdict::Inconclusive,
    };
    let mut ln_powers = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let c = law.bonferroni_cutoff(n, alpha)?;
        let ratio = t * (f.ln_pdf(t * c) - law.ln_pdf(c)?).exp();
        out.cutoffs.push(c);
        out.ratio_values.push(ratio);
        out.log_limit_estimates.push(-alpha * ratio);
        let ln_power = n as f64 * f.ln_cdf(t * c);
        ln_powers.push(ln_power);
        out.fn_power_values.push(ln_power.exp());
    }
    out.verdict = classify(&ln_powers, &out.ratio_values);
    Ok(out)
}

/// Works on `ln Fⁿ` so that values rounding to 1 stay ordered.
fn classify(ln_powers: &[f64], ratios: &[f64]) -> LimitVerdict {
    let k = ln_powers.len();
    if k < 3 {
        return LimitVerdict::Inconclusive;
    }
    let lp = &ln_powers[k - 3..];
    let r = &ratios[k - 3..];
    if lp[0] < lp[1] && lp[1] < lp[2] && r[0] > r[1] && r[1] > r[2] {
        return LimitVerdict::TendsToZero;
    }
    let (prev, last) = (lp[1].exp(), lp[2].exp());
    if last < 1.0 - 1e-4 && (last - prev).abs() <= 0.05 * (1.0 - last) {
        return LimitVerdict::PositiveLimit;
    }
    LimitVerdict::Inconclusive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec as D;

    #[test]
    fn normal_density_satisfies_decay_condition() {
        let r = check_zero_limit_conditions(D::StandardNormal, D::scaled_t(4.0), &[1.0, 2.0], &[1.0]).unwrap();
        assert_eq!(r.density_decay.verdict, Verdict::Satisfied);
        // f(40)/f(39) = exp(−40 + 1/2)
        let want = (-39.5f64).exp();
        assert!((r.density_decay.ratios[0][2] - want).abs() < 1e-12 * want);
        assert_eq!(r.common_factor_tail.verdict, Verdict::Satisfied);
        assert!(r.common_factor_tail.max_upper_tail > 0.0);
    }

    #[test]
    fn polynomial_tails_violate_decay_condition() {
        for f in [D::pareto(1.0), D::scaled_t(4.0), D::Laplace] {
            let r = check_zero_limit_conditions(f, D::StandardNormal, &[1.0], &[1.0]).unwrap();
            assert_eq!(r.density_decay.verdict, Verdict::Violated, "{f:?}");
        }
        let r = check_zero_limit_conditions(D::generalized_normal(2.5), D::Laplace, &[0.5, 1.0], &[1.0, 3.0]).unwrap();
        assert_eq!(r.density_decay.verdict, Verdict::Satisfied);
    }

    #[test]
    fn empty_grids_are_rejected() {
        assert!(check_zero_limit_conditions(D::StandardNormal, D::StandardNormal, &[], &[1.0]).is_err());
    }

    #[test]
    fn normal_factors_tend_to_zero() {
        let m = EquicorrelatedModel::global_null(0.5, D::StandardNormal, D::StandardNormal, 10).unwrap();
        let d = limit_ratio_diagnostic(&m, 0.05, &[100, 1000, 10_000, 100_000, 1_000_000]).unwrap();
        assert_eq!(d.verdict, LimitVerdict::TendsToZero);
        assert!(d.fn_power_values.windows(2).all(|w| w[0] < w[1]));
        assert!(d.fn_power_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn saturated_powers_still_classify() {
        // Fⁿ rounds to 1 at large n here; the ordering lives in ln Fⁿ.
        let m = EquicorrelatedModel::global_null(0.5, D::StandardNormal, D::Laplace, 10).unwrap();
        let d = limit_ratio_diagnostic(&m, 0.05, &[100, 1000, 10_000, 100_000, 1_000_000]).unwrap();
        assert_eq!(d.fn_power_values[4], 1.0);
        assert_eq!(d.verdict, LimitVerdict::TendsToZero);
    }

    #[test]
    fn pareto_factor_has_positive_limit() {
        let m = EquicorrelatedModel::global_null(0.5, D::pareto(1.0), D::StandardNormal, 10).unwrap();
        let d = limit_ratio_diagnostic(&m, 0.05, &[10_000, 100_000, 1_000_000, 10_000_000]).unwrap();
        assert_eq!(d.verdict, LimitVerdict::PositiveLimit);
        // Heavy-tailed Z dominates the marginal, so Fⁿ(t·c) → e^{−α}.
        let last = *d.fn_power_values.last().unwrap();
        assert!((last - (-0.05f64).exp()).abs() < 1e-3, "{last}");
    }

    #[test]
    fn tiny_correlation_gives_independence_limit() {
        let m = EquicorrelatedModel::global_null(1e-6, D::StandardNormal, D::StandardNormal, 10).unwrap();
        let d = limit_ratio_diagnostic(&m, 0.05, &[100, 1000, 10_000]).unwrap();
        for (r, l) in d.ratio_values.iter().zip(&d.log_limit_estimates) {
            assert!((r - 1.0).abs() < 1e-3);
            assert!((l + 0.05).abs() < 1e-4);
        }
    }

    #[test]
    fn invalid_grid() {
        let m = EquicorrelatedModel::global_null(0.5, D::StandardNormal, D::StandardNormal, 10).unwrap();
        assert!(limit_ratio_diagnostic(&m, 0.05, &[100, 100]).is_err());
        assert!(limit_ratio_diagnostic(&m, 0.05, &[1000, 100]).is_err());
    }
}
