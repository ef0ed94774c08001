//! Exact error-rate integrals, bounds and limit diagnostics for the one-factor model.
//!
//! Every probability of the form `1 − E_U[∏ F(·)]` is integrated in log space:
//! the integrand `ln(1 − ∏(1 − S_k)^{m_k}) + ln g(u)` stays accurate when the
//! result is many orders of magnitude below one.

mod bounds;
mod diagnostics;
mod reduction;

pub use bounds::{bounds, lower_bound, pareto_limit_floor, upper_bound, BoundReport, SplitPoint};
pub use diagnostics::{
    check_zero_limit_conditions, limit_ratio_diagnostic, ConditionReport, DecayCheck, LimitDiagnostic,
    LimitVerdict, TailCheck, Verdict,
};
pub use reduction::{reduction_bound, ReductionReport};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::factor_model::{check_level, EquicorrelatedModel, MarginalLaw};
use crate::quadrature::integrate_real_line_log;
use crate::special::ln_one_minus_exp;

/// `ln(1 − ∏_k (1 − S_k)^{m_k})` from pairs `(m_k, ln S_k)`.
///
/// Accurate both when every `S_k` underflows and when the product is tiny.
pub(crate) fn ln_any_exceedance<I>(terms: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    // ln(−ln ∏) = logsumexp_k [ln m_k + ln(−ln(1 − S_k))]
    let mut parts: Vec<f64> = Vec::new();
    for (m, ln_s) in terms {
        if m == 0.0 || ln_s == f64::NEG_INFINITY {
            continue;
        }
        if ln_s >= 0.0 {
            return 0.0;
        }
        let ln_neg_ln_f = if ln_s < -30.0 {
            // −ln(1 − S) = S(1 + S/2 + …)
            ln_s + 0.5 * ln_s.exp()
        } else {
            (-ln_one_minus_exp(ln_s)).ln()
        };
        parts.push(m.ln() + ln_neg_ln_f);
    }
    if parts.is_empty() {
        return f64::NEG_INFINITY;
    }
    let top = parts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let l = top + parts.iter().map(|p| (p - top).exp()).sum::<f64>().ln();
    if l < -30.0 {
        // 1 − e^{−x} = x(1 − x/2 + …)
        l + (-0.5 * l.exp()).ln_1p()
    } else {
        ln_one_minus_exp(-l.exp())
    }
}

fn tail_levels(count: usize) -> [f64; 4] {
    let m = count.max(1) as f64;
    [(1.0 / m).min(0.5), (1e-3 / m).min(0.5), (1e3 / m).min(0.5), 0.5]
}

fn require_true_null(model: &EquicorrelatedModel) -> Result<()> {
    if model.config().n0() == 0 {
        return Err(Error::Configuration("no true null hypotheses: the family-wise error rate is undefined".into()));
    }
    Ok(())
}

/// `1 − E_U[∏_k (1 − S_F((c − √ρU − μ_k)/√(1−ρ)))^{m_k}]` for the given
/// `(μ_k, m_k)` groups.
fn any_exceedance(law: &MarginalLaw, c: f64, groups: &[(f64, usize)]) -> Result<f64> {
    let groups: Vec<(f64, usize)> = groups.iter().copied().filter(|&(_, m)| m > 0).collect();
    if groups.is_empty() {
        return Ok(0.0);
    }
    let (a, b) = law.loadings();
    let (f, g) = (law.f(), law.g());
    if law.rho() == 0.0 {
        let ln = ln_any_exceedance(groups.iter().map(|&(mu, m)| (m as f64, f.ln_sf(c - mu))));
        return Ok(ln.exp());
    }
    let mut bps = Vec::new();
    for &(mu, m) in &groups {
        bps.extend(law.u_breakpoints(c - mu, &tail_levels(m)));
    }
    let est = integrate_real_line_log(
        |u| {
            let base = c - b * u;
            let ln_any = ln_any_exceedance(groups.iter().map(|&(mu, m)| (m as f64, f.ln_sf((base - mu) / a))));
            ln_any + g.ln_pdf(u)
        },
        &bps,
        law.quad_config(),
    )?;
    Ok(est.value().clamp(0.0, 1.0))
}

/// Bonferroni family-wise error rate at a given cutoff, counting `n0` true nulls.
pub fn fwer_at_cutoff(law: &MarginalLaw, cutoff: f64, n0: usize) -> Result<f64> {
    any_exceedance(law, cutoff, &[(0.0, n0)])
}

/// Exact FWER of the single-step Bonferroni rule.
///
/// The cutoff is the upper `α/n` quantile of the marginal for the full `n`;
/// only the `n0` true nulls can produce false rejections.
pub fn exact_fwer_bonferroni(model: &EquicorrelatedModel, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    require_true_null(model)?;
    let (n, n0) = (model.n(), model.config().n0());
    if n == 1 {
        return Ok(alpha);
    }
    if model.rho() == 0.0 {
        return Ok(-(n0 as f64 * (-alpha / n as f64).ln_1p()).exp_m1());
    }
    let law = model.marginal();
    let c = law.bonferroni_cutoff(n, alpha)?;
    fwer_at_cutoff(&law, c, n0)
}

/// Exact probability that the Holm step-down rule rejects at least one
/// hypothesis, i.e. that the largest statistic clears the Bonferroni cutoff.
pub fn exact_any_rejection_holm(model: &EquicorrelatedModel, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    require_true_null(model)?;
    let law = model.marginal();
    let c = law.bonferroni_cutoff(model.n(), alpha)?;
    let mut groups = vec![(0.0, model.config().n0())];
    groups.extend(model.config().alternative_groups());
    any_exceedance(&law, c, &groups)
}

/// Probability that single-step Bonferroni rejects at least one false null.
pub fn anypwr_single_step(model: &EquicorrelatedModel, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let groups = model.config().alternative_groups();
    if groups.is_empty() {
        return Err(Error::Configuration("no false null hypotheses: AnyPwr is undefined".into()));
    }
    let law = model.marginal();
    let c = law.bonferroni_cutoff(model.n(), alpha)?;
    any_exceedance(&law, c, &groups)
}

/// `P(X_i ≤ a_i for all i)` under the model, one threshold per hypothesis.
pub fn quadrant_probability(model: &EquicorrelatedModel, thresholds: &[f64]) -> Result<f64> {
    if thresholds.len() != model.n() {
        return Err(Error::Domain(format!(
            "expected {} thresholds, got {}",
            model.n(),
            thresholds.len()
        )));
    }
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::Domain("thresholds must not be NaN".into()));
    }
    // Group equal effective thresholds a_i − μ_i.
    let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, &t) in thresholds.iter().enumerate() {
        let w = t - model.config().mean(i);
        *groups.entry(w.to_bits()).or_default() += 1;
    }
    let groups: Vec<(f64, f64)> = groups.into_iter().map(|(w, m)| (f64::from_bits(w), m as f64)).collect();
    let law = model.marginal();
    let (a, b) = law.loadings();
    let (f, g) = (law.f(), law.g());
    if law.rho() == 0.0 {
        let ln: f64 = groups.iter().map(|&(w, m)| m * f.ln_cdf(w)).sum();
        return Ok(ln.exp());
    }
    let mut bps = Vec::new();
    for &(w, m) in groups.iter().take(32) {
        bps.extend(law.u_breakpoints(w, &tail_levels(m as usize)));
    }
    let est = integrate_real_line_log(
        |u| {
            let base = -b * u;
            let ln: f64 = groups.iter().map(|&(w, m)| m * f.ln_cdf((w + base) / a)).sum();
            ln + g.ln_pdf(u)
        },
        &bps,
        law.quad_config(),
    )?;
    Ok(est.value().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec as D;
    use crate::factor_model::NullConfiguration;
    use proptest::prelude::*;

    fn model(rho: f64, f: D, g: D, n: usize) -> EquicorrelatedModel {
        EquicorrelatedModel::global_null(rho, f, g, n).unwrap()
    }

    #[test]
    fn ln_any_exceedance_matches_direct_formula() {
        let direct = |terms: &[(f64, f64)]| (-terms.iter().map(|&(m, s)| m * (-s).ln_1p()).sum::<f64>().exp_m1()).ln();
        for terms in [
            vec![(10.0, 0.01)],
            vec![(3.0, 0.2), (5.0, 1e-3)],
            vec![(1e6, 1e-7)],
            vec![(1.0, 0.999)],
        ] {
            let got = ln_any_exceedance(terms.iter().map(|&(m, s)| (m, f64::ln(s))));
            let want = direct(&terms);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{terms:?}: {got} vs {want}");
        }
        // Far below underflow: ln(n·S).
        let got = ln_any_exceedance([(1e7, -900.0)]);
        assert!((got - (1e7f64.ln() - 900.0)).abs() < 1e-12);
        assert_eq!(ln_any_exceedance([(5.0, f64::NEG_INFINITY)]), f64::NEG_INFINITY);
    }

    #[test]
    fn independence_closed_form() {
        let v = exact_fwer_bonferroni(&model(0.0, D::StandardNormal, D::Laplace, 100), 0.05).unwrap();
        assert!((v - (1.0 - 0.9995f64.powi(100))).abs() < 1e-14);
        assert!((v - 0.048_782_469_757_671).abs() < 1e-12);
        assert_eq!(exact_fwer_bonferroni(&model(0.4, D::Laplace, D::Laplace, 1), 0.05).unwrap(), 0.05);
    }

    #[test]
    fn small_correlation_approaches_independence() {
        let v = exact_fwer_bonferroni(&model(1e-8, D::StandardNormal, D::Laplace, 100), 0.05).unwrap();
        assert!((v - (1.0 - 0.9995f64.powi(100))).abs() < 1e-6);
    }

    #[test]
    fn reference_cells() {
        // Oracle values from a 30-digit mpmath integration; the six-decimal
        // reference figures are 0.029444 and 0.000399.
        let v = exact_fwer_bonferroni(&model(0.2, D::StandardNormal, D::Laplace, 100), 0.05).unwrap();
        assert!((v - 0.029_442_594_066_307_4).abs() < 1e-9, "{v}");
        assert!((v - 0.029_444).abs() < 2e-6);
        let v = exact_fwer_bonferroni(&model(0.3, D::StandardNormal, D::scaled_t(4.0), 1000), 0.05).unwrap();
        assert!((v - 0.000_399_255_362_764_451).abs() < 1e-11, "{v}");
        assert!((v - 0.000_399).abs() < 5e-7);
    }

    #[test]
    fn holm_any_rejection_equals_fwer_under_global_null() {
        for &(rho, n) in &[(0.2, 100usize), (0.6, 10_000), (0.9, 1000)] {
            let m = model(rho, D::StandardNormal, D::Laplace, n);
            let a = exact_fwer_bonferroni(&m, 0.05).unwrap();
            let b = exact_any_rejection_holm(&m, 0.05).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        let single = EquicorrelatedModel::new(0.5, D::StandardNormal, D::StandardNormal, NullConfiguration::global_null(1).unwrap()).unwrap();
        assert!((exact_any_rejection_holm(&single, 0.05).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn anypwr_edge_cases() {
        let m = EquicorrelatedModel::new(0.3, D::StandardNormal, D::StandardNormal, NullConfiguration::from_means(&[0.0, 50.0, 0.0]).unwrap()).unwrap();
        assert!(anypwr_single_step(&m, 0.05).unwrap() >= 1.0 - 1e-9);
        let c = crate::special::norm_isf(0.05);
        let m = EquicorrelatedModel::new(0.0, D::StandardNormal, D::StandardNormal, NullConfiguration::from_means(&[c]).unwrap()).unwrap();
        assert!((anypwr_single_step(&m, 0.05).unwrap() - 0.5).abs() < 1e-12);
        let all_null = model(0.3, D::StandardNormal, D::StandardNormal, 5);
        assert!(matches!(anypwr_single_step(&all_null, 0.05), Err(Error::Configuration(_))));
        let no_null = EquicorrelatedModel::new(0.3, D::StandardNormal, D::StandardNormal, NullConfiguration::from_means(&[1.0, 2.0]).unwrap()).unwrap();
        assert!(matches!(exact_fwer_bonferroni(&no_null, 0.05), Err(Error::Configuration(_))));
    }

    #[test]
    fn quadrant_probability_edges() {
        let m = model(0.4, D::StandardNormal, D::Laplace, 6);
        assert!((quadrant_probability(&m, &[1e3; 6]).unwrap() - 1.0).abs() < 1e-12);
        let one = model(0.4, D::StandardNormal, D::Laplace, 1);
        assert!((quadrant_probability(&one, &[0.0]).unwrap() - 0.5).abs() < 1e-12);
        let lo = quadrant_probability(&model(0.2, D::StandardNormal, D::StandardNormal, 8), &[1.0; 8]).unwrap();
        let hi = quadrant_probability(&model(0.6, D::StandardNormal, D::StandardNormal, 8), &[1.0; 8]).unwrap();
        assert!(hi >= lo);
        assert!(quadrant_probability(&m, &[1.0; 3]).is_err());
    }

    #[test]
    fn quadrant_probability_is_complement_of_fwer() {
        let m = model(0.35, D::StandardNormal, D::scaled_t(4.0), 50);
        let law = m.marginal();
        let c = law.bonferroni_cutoff(50, 0.05).unwrap();
        let q = quadrant_probability(&m, &[c; 50]).unwrap();
        let fwer = fwer_at_cutoff(&law, c, 50).unwrap();
        assert!((q + fwer - 1.0).abs() < 1e-11);
    }

    #[test]
    fn fewer_true_nulls_never_raise_the_error_rate() {
        let base = model(0.5, D::StandardNormal, D::Laplace, 200);
        let full = exact_fwer_bonferroni(&base, 0.05).unwrap();
        let mut prev = full;
        for k in [10usize, 50, 150, 199] {
            let cfg = NullConfiguration::with_alternatives(200, (0..k).map(|i| (i, 1.5)).collect()).unwrap();
            let v = exact_fwer_bonferroni(&base.with_config(cfg), 0.05).unwrap();
            assert!(v <= prev + 1e-12, "k={k}: {v} > {prev}");
            prev = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fwer_decreases_in_rho(r1 in 0.05f64..0.9, dr in 0.01f64..0.09, which in 0usize..3) {
            let g = [D::StandardNormal, D::Laplace, D::scaled_t(4.0)][which];
            let a = exact_fwer_bonferroni(&model(r1, D::StandardNormal, g, 1000), 0.05).unwrap();
            let b = exact_fwer_bonferroni(&model(r1 + dr, D::StandardNormal, g, 1000), 0.05).unwrap();
            prop_assert!(b <= a + 1e-9, "rho {} -> {}: {} -> {}", r1, r1 + dr, a, b);
        }
    }
}
