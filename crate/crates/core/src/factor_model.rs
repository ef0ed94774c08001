//! The one-factor model `X_i = √(1−ρ)·Z_i + √ρ·U + μ_i` and its marginal law.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, StandardizedDistribution};
use crate::error::{param, Error, Result};
use crate::quadrature::{integrate_real_line_log, QuadConfig};
use crate::roots::newton_bisect;
use crate::special::ln_one_minus_exp;

/// Which hypotheses are true nulls. Only the nonzero means are stored, so a
/// global null over 10⁷ hypotheses costs nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct NullConfiguration {
    n: usize,
    /// `(index, μ_i)` with `μ_i > 0`, sorted by index.
    alternatives: Vec<(usize, f64)>,
}

impl NullConfiguration {
    pub fn global_null(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(param("n", "hypothesis count must be at least 1"));
        }
        Ok(Self { n, alternatives: Vec::new() })
    }

    pub fn from_means(means: &[f64]) -> Result<Self> {
        if means.is_empty() {
            return Err(param("means", "at least one hypothesis is required"));
        }
        let mut alternatives = Vec::new();
        for (i, &m) in means.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(param("means", format!("mean {i} must be finite and >= 0, got {m}")));
            }
            if m > 0.0 {
                alternatives.push((i, m));
            }
        }
        Ok(Self { n: means.len(), alternatives })
    }

    /// `n` hypotheses of which those listed carry a positive mean.
    pub fn with_alternatives(n: usize, mut alternatives: Vec<(usize, f64)>) -> Result<Self> {
        let mut base = Self::global_null(n)?;
        alternatives.sort_by_key(|&(i, _)| i);
        for w in alternatives.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(param("means", format!("index {} listed twice", w[0].0)));
            }
        }
        for &(i, m) in &alternatives {
            if i >= n {
                return Err(param("means", format!("index {i} out of range for n = {n}")));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(param("means", format!("mean {i} must be finite and >= 0, got {m}")));
            }
        }
        alternatives.retain(|&(_, m)| m > 0.0);
        base.alternatives = alternatives;
        Ok(base)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of true nulls.
    pub fn n0(&self) -> usize {
        self.n - self.alternatives.len()
    }

    pub fn is_global_null(&self) -> bool {
        self.alternatives.is_empty()
    }

    pub fn mu_star(&self) -> f64 {
        self.alternatives.iter().map(|&(_, m)| m).fold(0.0, f64::max)
    }

    pub fn alternatives(&self) -> &[(usize, f64)] {
        &self.alternatives
    }

    pub fn mean(&self, i: usize) -> f64 {
        match self.alternatives.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(k) => self.alternatives[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn is_true_null(&self, i: usize) -> bool {
        self.mean(i) == 0.0
    }

    /// Dense mean vector.
    pub fn means(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for &(i, m) in &self.alternatives {
            v[i] = m;
        }
        v
    }

    /// Distinct false-null means with their multiplicities.
    pub fn alternative_groups(&self) -> Vec<(f64, usize)> {
        let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
        for &(_, m) in &self.alternatives {
            *groups.entry(m.to_bits()).or_default() += 1;
        }
        groups.into_iter().map(|(bits, c)| (f64::from_bits(bits), c)).collect()
    }
}

/// JSON form of a model: `{"rho":0.3,"f":{..},"g":{..},"means":[..]}` or,
/// for a global null, `{"rho":0.3,"n":1000,"global_null":true}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub rho: f64,
    #[serde(default = "default_factor")]
    pub f: DistributionSpec,
    #[serde(default = "default_factor")]
    pub g: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_null: Option<bool>,
}

fn default_factor() -> DistributionSpec {
    DistributionSpec::StandardNormal
}

impl ModelSpec {
    pub fn build(&self) -> Result<EquicorrelatedModel> {
        let config = match (&self.means, self.n, self.global_null) {
            (Some(means), None, None | Some(false)) => NullConfiguration::from_means(means)?,
            (None, Some(n), Some(true)) => NullConfiguration::global_null(n)?,
            (Some(_), _, _) => {
                return Err(Error::Configuration("give either `means` or `n` with `global_null`, not both".into()))
            }
            (None, Some(_), _) => {
                return Err(Error::Configuration("shorthand form requires `\"global_null\": true`".into()))
            }
            (None, None, _) => return Err(Error::Configuration("model needs `means` or `n`".into())),
        };
        EquicorrelatedModel::new(self.rho, self.f, self.g, config)
    }
}

/// The one-factor equicorrelated model.
#[derive(Debug, Clone)]
pub struct EquicorrelatedModel {
    rho: f64,
    f: StandardizedDistribution,
    g: StandardizedDistribution,
    config: NullConfiguration,
    rel_tol: f64,
}

impl EquicorrelatedModel {
    pub fn new(rho: f64, f: DistributionSpec, g: DistributionSpec, config: NullConfiguration) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self { rho, f: f.build()?, g: g.build()?, config, rel_tol: QuadConfig::default().rel_tol })
    }

    /// Relative accuracy target for every integral derived from this model.
    pub fn with_tolerance(mut self, rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(param("tolerance", format!("must lie in (0, 1), got {rel_tol}")));
        }
        self.rel_tol = rel_tol;
        Ok(self)
    }

    pub fn tolerance(&self) -> f64 {
        self.rel_tol
    }

    pub fn global_null(rho: f64, f: DistributionSpec, g: DistributionSpec, n: usize) -> Result<Self> {
        Self::new(rho, f, g, NullConfiguration::global_null(n)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelSpec>(text)?.build()
    }

    pub fn to_spec(&self) -> ModelSpec {
        let global = self.config.is_global_null();
        ModelSpec {
            rho: self.rho,
            f: self.f.spec(),
            g: self.g.spec(),
            means: (!global).then(|| self.config.means()),
            n: global.then_some(self.config.n()),
            global_null: global.then_some(true),
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn f(&self) -> &StandardizedDistribution {
        &self.f
    }

    pub fn g(&self) -> &StandardizedDistribution {
        &self.g
    }

    pub fn config(&self) -> &NullConfiguration {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn with_config(&self, config: NullConfiguration) -> Self {
        Self { config, ..self.clone() }
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self { rho, ..self.clone() })
    }

    pub fn marginal(&self) -> MarginalLaw {
        MarginalLaw::new(self.rho, self.f, self.g).with_tolerance(self.rel_tol)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(param("rho", format!("correlation must lie in [0, 1), got {rho}")))
    }
}

/// Law of `√(1−ρ)·Z + √ρ·U`.
#[derive(Debug, Clone, Copy)]
pub struct MarginalLaw {
    rho: f64,
    a: f64,
    b: f64,
    f: StandardizedDistribution,
    g: StandardizedDistribution,
    quad: QuadConfig,
}

impl MarginalLaw {
    pub fn new(rho: f64, f: StandardizedDistribution, g: StandardizedDistribution) -> Self {
        Self { rho, a: (1.0 - rho).sqrt(), b: rho.sqrt(), f, g, quad: QuadConfig::default() }
    }

    /// Relative accuracy target for the convolution integrals.
    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.quad.rel_tol = rel_tol;
        self
    }

    pub fn quad_config(&self) -> QuadConfig {
        self.quad
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(√(1−ρ), √ρ)`.
    pub fn loadings(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn f(&self) -> &StandardizedDistribution {
        &self.f
    }

    pub fn g(&self) -> &StandardizedDistribution {
        &self.g
    }

    fn degenerate(&self) -> bool {
        self.rho == 0.0
    }

    /// Breakpoints on the `U` axis for integrands built from `F((v − √ρu)/√(1−ρ))`.
    ///
    /// `tail_probs` lists upper-tail levels `q` of `F` whose crossing points in `u`
    /// mark steep transitions of the integrand.
    pub fn u_breakpoints(&self, v: f64, tail_probs: &[f64]) -> Vec<f64> {
        let (a, b) = (self.a, self.b);
        let mut pts = self.g.kinks();
        let through_f = |x: f64| (v - a * x) / b;
        pts.extend(self.f.kinks().into_iter().map(through_f));
        pts.push(through_f(0.0));
        pts.push(b * v);
        for &q in tail_probs {
            if q > 0.0 && q < 1.0 {
                if let Ok(x) = self.f.upper_quantile(q) {
                    pts.push(through_f(x));
                }
            }
        }
        pts.retain(|u| u.is_finite());
        pts
    }

    fn z(&self, v: f64, u: f64) -> f64 {
        (v - self.b * u) / self.a
    }

    pub fn ln_pdf(&self, v: f64) -> Result<f64> {
        if self.degenerate() {
            return Ok(self.f.ln_pdf(v));
        }
        let est = integrate_real_line_log(
            |u| self.f.ln_pdf(self.z(v, u)) + self.g.ln_pdf(u),
            &self.u_breakpoints(v, &[1e-3, 1e-9]),
            self.quad,
        )?;
        Ok(est.ln_value - self.a.ln())
    }

    pub fn pdf(&self, v: f64) -> Result<f64> {
        Ok(self.ln_pdf(v)?.exp())
    }

    /// `ln P(X > v)`, accurate far into the upper tail.
    pub fn ln_sf(&self, v: f64) -> Result<f64> {
        if self.degenerate() {
            return Ok(self.f.ln_sf(v));
        }
        let est = integrate_real_line_log(
            |u| self.f.ln_sf(self.z(v, u)) + self.g.ln_pdf(u),
            &self.u_breakpoints(v, &[0.5, 1e-4, 1e-12]),
            self.quad,
        )?;
        Ok(est.ln_value.min(0.0))
    }

    /// `ln P(X ≤ v)`, accurate far into the lower tail.
    pub fn ln_cdf(&self, v: f64) -> Result<f64> {
        if self.degenerate() {
            return Ok(self.f.ln_cdf(v));
        }
        let ln_sf = self.ln_sf(v)?;
        if ln_sf < -std::f64::consts::LN_2 {
            return Ok(ln_one_minus_exp(ln_sf));
        }
        let est = integrate_real_line_log(
            |u| self.f.ln_cdf(self.z(v, u)) + self.g.ln_pdf(u),
            &self.u_breakpoints(v, &[0.5, 1.0 - 1e-4]),
            self.quad,
        )?;
        Ok(est.ln_value.min(0.0))
    }

    pub fn sf(&self, v: f64) -> Result<f64> {
        Ok(self.ln_sf(v)?.exp())
    }

    pub fn cdf(&self, v: f64) -> Result<f64> {
        Ok(self.ln_cdf(v)?.exp())
    }

    /// The `v` with `ln P(X > v) = ln_q`.
    pub fn upper_quantile_ln(&self, ln_q: f64) -> Result<f64> {
        if !(ln_q < 0.0) {
            return Err(Error::Domain(format!("log tail probability must be < 0, got {ln_q}")));
        }
        if self.degenerate() {
            return self.f.upper_quantile_ln(ln_q);
        }
        let guess = match (self.f.upper_quantile_ln(ln_q), self.g.upper_quantile_ln(ln_q)) {
            (Ok(x), Ok(y)) => (self.a * x).max(self.b * y),
            _ => 0.0,
        };
        let phi = |c: f64| -> Result<f64> { Ok(self.ln_sf(c)? - ln_q) };
        let mut step = guess.abs().mul_add(0.5, 1.0);
        let mut lo = guess - step;
        while phi(lo)? < 0.0 {
            step *= 2.0;
            lo -= step;
            if !lo.is_finite() {
                return Err(Error::Bracket { what: "marginal quantile", lo, hi: guess, f_lo: f64::NAN, f_hi: f64::NAN });
            }
        }
        let mut step = guess.abs().mul_add(0.5, 1.0);
        let mut hi = guess + step;
        while phi(hi)? > 0.0 {
            step *= 2.0;
            hi += step;
            if !hi.is_finite() {
                return Err(Error::Bracket { what: "marginal quantile", lo: guess, hi, f_lo: f64::NAN, f_hi: f64::NAN });
            }
        }
        let mut failure = None;
        let root = newton_bisect(
            |c| match (self.ln_sf(c), self.ln_pdf(c)) {
                (Ok(ls), Ok(lp)) => (ls - ln_q, -(lp - ls).exp()),
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    (f64::NAN, f64::NAN)
                }
            },
            lo,
            hi,
            guess.clamp(lo, hi),
            1e-13,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        root
    }

    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        crate::distributions::check_probability("q", q)?;
        self.upper_quantile_ln(q.ln())
    }

    /// Lower quantile: the `v` with `P(X ≤ v) = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        crate::distributions::check_probability("p", p)?;
        if self.degenerate() {
            return self.f.quantile(p);
        }
        if p >= 0.5 {
            return self.upper_quantile_ln((-p).ln_1p());
        }
        if self.f.is_symmetric() && self.g.is_symmetric() {
            return Ok(-self.upper_quantile_ln(p.ln())?);
        }
        // Lower tail of an asymmetric marginal: bisect on ln F*.
        let target = p.ln();
        let mut hi = self.upper_quantile_ln(-std::f64::consts::LN_2)?;
        let mut lo = hi - 1.0;
        let floor = self.a * self.f.support_lower() + self.b * self.g.support_lower();
        while self.ln_cdf(lo)? > target {
            hi = lo;
            lo = if floor.is_finite() { 0.5 * (lo + floor) } else { 2.0 * lo - 1.0 };
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ln_cdf(mid)? > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The Bonferroni cutoff `c` with `P(X > c) = α/n`.
    pub fn bonferroni_cutoff(&self, n: usize, alpha: f64) -> Result<f64> {
        check_level(alpha)?;
        if n == 0 {
            return Err(param("n", "hypothesis count must be at least 1"));
        }
        self.upper_quantile_ln(alpha.ln() - (n as f64).ln())
    }
}

pub(crate) fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(param("alpha", format!("level must lie in (0, 1), got {alpha}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_pdf;
    use proptest::prelude::*;

    fn law(rho: f64, f: DistributionSpec, g: DistributionSpec) -> MarginalLaw {
        MarginalLaw::new(rho, f.build().unwrap(), g.build().unwrap())
    }

    const N: DistributionSpec = DistributionSpec::StandardNormal;
    const L: DistributionSpec = DistributionSpec::Laplace;

    #[test]
    fn json_forms() {
        let m = EquicorrelatedModel::from_json(r#"{"rho":0.3,"f":{"kind":"standard_normal"},"g":{"kind":"laplace"},"means":[0,0,1.5]}"#).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.config().n0(), 2);
        assert_eq!(m.config().mu_star(), 1.5);
        let m = EquicorrelatedModel::from_json(r#"{"rho":0.2,"n":1000,"global_null":true}"#).unwrap();
        assert_eq!(m.config().n0(), 1000);
        let back = EquicorrelatedModel::from_json(&serde_json::to_string(&m.to_spec()).unwrap()).unwrap();
        assert_eq!(back.to_spec(), m.to_spec());
        assert!(EquicorrelatedModel::from_json(r#"{"rho":0.2,"n":10}"#).is_err());
        assert!(EquicorrelatedModel::from_json(r#"{"rho":0.2,"n":10,"global_null":true,"x":1}"#).is_err());
        assert!(EquicorrelatedModel::from_json(r#"{"rho":1.0,"n":10,"global_null":true}"#).is_err());
        assert!(EquicorrelatedModel::from_json(r#"{"rho":0.1,"means":[0,-1]}"#).is_err());
    }

    #[test]
    fn configuration_bookkeeping() {
        let c = NullConfiguration::with_alternatives(10, vec![(7, 2.0), (1, 2.0), (3, 0.5)]).unwrap();
        assert_eq!(c.n0(), 7);
        assert!(c.is_true_null(0));
        assert!(!c.is_true_null(7));
        assert_eq!(c.mean(3), 0.5);
        assert_eq!(c.alternative_groups(), vec![(0.5, 1), (2.0, 2)]);
        assert!(NullConfiguration::with_alternatives(3, vec![(3, 1.0)]).is_err());
        assert!(NullConfiguration::global_null(0).is_err());
    }

    #[test]
    fn zero_correlation_is_exactly_f() {
        let m = law(0.0, L, N);
        let f = L.build().unwrap();
        for &v in &[-3.0, 0.0, 0.4, 9.0] {
            assert_eq!(m.ln_sf(v).unwrap(), f.ln_sf(v));
            assert_eq!(m.ln_pdf(v).unwrap(), f.ln_pdf(v));
        }
        assert_eq!(m.bonferroni_cutoff(1, 0.5).unwrap(), 0.0);
        assert!((law(0.0, N, L).bonferroni_cutoff(100, 0.05).unwrap() - 3.290_526_731_491_895).abs() < 1e-12);
    }

    #[test]
    fn gaussian_closure() {
        for &rho in &[0.05, 0.3, 0.7, 0.95] {
            let m = law(rho, N, N);
            for &v in &[-5.0, -1.0, 0.0, 1.0, 3.0, 8.0, 25.0] {
                let exact = crate::special::norm_ln_sf(v);
                let got = m.ln_sf(v).unwrap();
                assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1.0), "rho={rho} v={v}: {got} vs {exact}");
                assert!((m.pdf(v).unwrap() - norm_pdf(v)).abs() < 1e-10);
            }
            assert!((m.cdf(0.0).unwrap() - 0.5).abs() < 1e-12);
        }
        assert!((law(0.3, N, N).pdf(1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-12);
    }

    #[test]
    fn marginal_values_match_dense_grid_oracle() {
        // Frozen from an independent 40-digit mpmath quadrature (tests/oracle/marginal_oracle.py).
        let pdf = law(0.5, N, L).pdf(2.0).unwrap();
        assert!((pdf - 0.047_510_595_402_905_3).abs() < 1e-11, "{pdf}");
        let cdf = law(0.1, N, DistributionSpec::scaled_t(4.0)).cdf(3.0).unwrap();
        assert!((cdf - 0.998_445_826_197_060_7).abs() < 1e-11, "{cdf}");
        let lsf = law(0.2, N, L).ln_sf(8.0).unwrap();
        assert!((lsf - (-21.991_368_461_975_893)).abs() < 1e-9, "{lsf}");
        let c = law(0.2, N, L).bonferroni_cutoff(1000, 0.05).unwrap();
        assert!((c - 4.173_526_859_527_441).abs() < 1e-9, "{c}");
    }

    #[test]
    fn cutoff_round_trip_across_scales() {
        let m = law(0.2, N, L);
        let ml = law(0.4, N, DistributionSpec::scaled_t(4.0));
        for law in [m, ml] {
            for &n in &[1usize, 100, 10_000, 1_000_000, 10_000_000] {
                let c = law.bonferroni_cutoff(n, 0.05).unwrap();
                let s = law.sf(c).unwrap();
                let target = 0.05 / n as f64;
                assert!(((s - target) / target).abs() < 1e-9, "n={n}: {s} vs {target}");
            }
        }
    }

    #[test]
    fn cutoff_increases_in_n_and_decreases_in_alpha() {
        let m = law(0.3, N, L);
        let mut prev = f64::NEG_INFINITY;
        for &n in &[1usize, 10, 100, 1000, 10_000] {
            let c = m.bonferroni_cutoff(n, 0.05).unwrap();
            assert!(c > prev);
            prev = c;
        }
        let mut prev = f64::INFINITY;
        for &alpha in &[0.01, 0.05, 0.1, 0.2] {
            let c = m.bonferroni_cutoff(100, alpha).unwrap();
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn marginal_has_unit_variance() {
        let m = law(0.4, DistributionSpec::generalized_normal(2.5), L);
        let cfg = QuadConfig { abs_tol: 1e-12, ..QuadConfig::with_rel_tol(1e-10) };
        let second = crate::quadrature::integrate_real_line(|v| v * v * m.pdf(v).unwrap(), &[0.0], cfg).unwrap();
        assert!((second.value - 1.0).abs() < 1e-8, "{}", second.value);
    }

    #[test]
    fn pareto_marginal_quantiles() {
        let m = law(0.5, DistributionSpec::pareto(1.0), N);
        let q = m.quantile(0.01).unwrap();
        assert!((m.cdf(q).unwrap() - 0.01).abs() < 1e-10);
        let q = m.quantile(0.9).unwrap();
        assert!((m.cdf(q).unwrap() - 0.9).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn marginal_cdf_is_monotone(rho in 0.01f64..0.95, v in -6.0f64..6.0, dv in 1e-3f64..1.0) {
            let m = law(rho, N, L);
            prop_assert!(m.cdf(v + dv).unwrap() >= m.cdf(v).unwrap() - 1e-14);
        }
    }
}
