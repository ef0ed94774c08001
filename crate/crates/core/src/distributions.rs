//! Unit-variance univariate laws used for the idiosyncratic factor `Z` and the
//! common factor `U`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::roots::{expand_upper, newton_bisect};
use crate::special::{
    ln_gamma, ln_beta_inc_reg, ln_gamma_inc_pair, ln_one_minus_exp, norm_cdf, norm_isf, norm_ln_cdf,
    norm_ln_pdf, norm_ln_sf, norm_pdf, norm_quantile, norm_sf,
};

/// Description of a standardized law. Serializes as `{"kind": "...", ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawSpec", into = "RawSpec")]
pub enum DistributionSpec {
    StandardNormal,
    /// Laplace with scale `1/√2`.
    Laplace,
    /// Student t with `nu > 2` degrees of freedom divided by `√(ν/(ν−2))`.
    ScaledStudentT { nu: f64 },
    /// Pareto with tail index `b = 2 + δ` and support `[η, ∞)`, `η = √(δ/(2+δ))·(δ+1)`.
    /// With `centered` the mean `bη/(b−1)` is subtracted.
    StandardizedPareto { delta: f64, centered: bool },
    /// Density proportional to `exp(−|x/s|^β)` with `s` chosen for unit variance.
    GeneralizedNormal { beta: f64 },
}

// Wire form. Unit variants are written as empty structs so that
// `deny_unknown_fields` also rejects stray keys on parameterless kinds.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSpec {
    StandardNormal {},
    Laplace {},
    ScaledStudentT {
        nu: f64,
    },
    StandardizedPareto {
        delta: f64,
        #[serde(default)]
        centered: bool,
    },
    GeneralizedNormal {
        #[serde(alias = "beta_shape")]
        beta: f64,
    },
}

impl From<RawSpec> for DistributionSpec {
    fn from(raw: RawSpec) -> Self {
        match raw {
            RawSpec::StandardNormal {} => Self::StandardNormal,
            RawSpec::Laplace {} => Self::Laplace,
            RawSpec::ScaledStudentT { nu } => Self::ScaledStudentT { nu },
            RawSpec::StandardizedPareto { delta, centered } => Self::StandardizedPareto { delta, centered },
            RawSpec::GeneralizedNormal { beta } => Self::GeneralizedNormal { beta },
        }
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(spec: DistributionSpec) -> Self {
        match spec {
            DistributionSpec::StandardNormal => Self::StandardNormal {},
            DistributionSpec::Laplace => Self::Laplace {},
            DistributionSpec::ScaledStudentT { nu } => Self::ScaledStudentT { nu },
            DistributionSpec::StandardizedPareto { delta, centered } => Self::StandardizedPareto { delta, centered },
            DistributionSpec::GeneralizedNormal { beta } => Self::GeneralizedNormal { beta },
        }
    }
}

impl DistributionSpec {
    pub fn scaled_t(nu: f64) -> Self {
        Self::ScaledStudentT { nu }
    }

    pub fn pareto(delta: f64) -> Self {
        Self::StandardizedPareto { delta, centered: false }
    }

    pub fn generalized_normal(beta: f64) -> Self {
        Self::GeneralizedNormal { beta }
    }

    pub fn build(&self) -> Result<StandardizedDistribution> {
        StandardizedDistribution::new(*self)
    }

    /// Short stable label such as `t4` or `pareto1`.
    pub fn label(&self) -> String {
        match *self {
            Self::StandardNormal => "normal".into(),
            Self::Laplace => "laplace".into(),
            Self::ScaledStudentT { nu } => format!("t{nu}"),
            Self::StandardizedPareto { delta, centered } => {
                format!("pareto{delta}{}", if centered { "c" } else { "" })
            }
            Self::GeneralizedNormal { beta } => format!("gnormal{beta}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Law {
    Normal,
    Laplace,
    T { nu: f64, k: f64, ln_norm: f64, sampler: StudentT<f64> },
    Pareto { b: f64, eta: f64, shift: f64 },
    GenNormal { beta: f64, s: f64, ln_norm: f64, sampler: Gamma<f64> },
}

const LAPLACE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Evaluators for a [`DistributionSpec`]. Immutable and cheap to copy.
#[derive(Debug, Clone, Copy)]
pub struct StandardizedDistribution {
    spec: DistributionSpec,
    law: Law,
}

impl StandardizedDistribution {
    pub fn new(spec: DistributionSpec) -> Result<Self> {
        let law = match spec {
            DistributionSpec::StandardNormal => Law::Normal,
            DistributionSpec::Laplace => Law::Laplace,
            DistributionSpec::ScaledStudentT { nu } => {
                if !(nu > 2.0) || !nu.is_finite() {
                    return Err(param("nu", format!("degrees of freedom must be finite and > 2, got {nu}")));
                }
                let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln();
                let sampler = StudentT::new(nu).map_err(|e| param("nu", e.to_string()))?;
                Law::T { nu, k: (nu / (nu - 2.0)).sqrt(), ln_norm, sampler }
            }
            DistributionSpec::StandardizedPareto { delta, centered } => {
                if !(delta > 0.0) || !delta.is_finite() {
                    return Err(param("delta", format!("tail slack must be finite and > 0, got {delta}")));
                }
                let b = 2.0 + delta;
                let eta = (delta / b).sqrt() * (delta + 1.0);
                let shift = if centered { b * eta / (b - 1.0) } else { 0.0 };
                Law::Pareto { b, eta, shift }
            }
            DistributionSpec::GeneralizedNormal { beta } => {
                if !(beta >= 0.5) || !beta.is_finite() {
                    return Err(param("beta", format!("shape must be finite and >= 0.5, got {beta}")));
                }
                let s = (0.5 * (ln_gamma(1.0 / beta) - ln_gamma(3.0 / beta))).exp();
                let ln_norm = beta.ln() - (2.0 * s).ln() - ln_gamma(1.0 / beta);
                let sampler = Gamma::new(1.0 / beta, 1.0).map_err(|e| param("beta", e.to_string()))?;
                Law::GenNormal { beta, s, ln_norm, sampler }
            }
        };
        Ok(Self { spec, law })
    }

    pub fn spec(&self) -> DistributionSpec {
        self.spec
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.law, Law::Pareto { .. })
    }

    /// Left end of the support (`-inf` unless Pareto).
    pub fn support_lower(&self) -> f64 {
        match self.law {
            Law::Pareto { eta, shift, .. } => eta - shift,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Points where the density is not smooth; useful as quadrature breakpoints.
    pub fn kinks(&self) -> Vec<f64> {
        match self.law {
            Law::Laplace | Law::GenNormal { .. } => vec![0.0],
            Law::Pareto { .. } => vec![self.support_lower()],
            _ => Vec::new(),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal => norm_ln_pdf(x),
            Law::Laplace => -x.abs() / LAPLACE_SCALE - (2.0 * LAPLACE_SCALE).ln(),
            Law::T { nu, k, ln_norm, .. } => {
                let t = k * x;
                k.ln() + ln_norm - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
            }
            Law::Pareto { b, eta, shift } => {
                let z = x + shift;
                if z < eta {
                    f64::NEG_INFINITY
                } else {
                    b.ln() + b * eta.ln() - (b + 1.0) * z.ln()
                }
            }
            Law::GenNormal { beta, s, ln_norm, .. } => ln_norm - (x.abs() / s).powf(beta),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal => norm_pdf(x),
            _ => self.ln_pdf(x).exp(),
        }
    }

    /// `ln P(X > x)` computed from tail forms, finite far into the tail.
    pub fn ln_sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.law {
            Law::Normal => norm_ln_sf(x),
            Law::Laplace => {
                if x >= 0.0 {
                    -std::f64::consts::LN_2 - x / LAPLACE_SCALE
                } else {
                    (-0.5 * (x / LAPLACE_SCALE).exp()).ln_1p()
                }
            }
            Law::T { nu, k, .. } => {
                let t = k * x;
                if t.is_infinite() {
                    return if t > 0.0 { f64::NEG_INFINITY } else { 0.0 };
                }
                let t2 = t * t;
                let ln_half_i = -std::f64::consts::LN_2 + ln_beta_inc_reg(0.5 * nu, 0.5, nu / (nu + t2), t2 / (nu + t2));
                if t > 0.0 {
                    ln_half_i
                } else {
                    (-ln_half_i.exp()).ln_1p()
                }
            }
            Law::Pareto { b, eta, shift } => {
                let z = x + shift;
                if z <= eta {
                    0.0
                } else {
                    b * (eta / z).ln()
                }
            }
            Law::GenNormal { beta, s, .. } => {
                if x.is_infinite() {
                    return if x > 0.0 { f64::NEG_INFINITY } else { 0.0 };
                }
                let (_, ln_q) = ln_gamma_inc_pair(1.0 / beta, (x.abs() / s).powf(beta));
                let ln_half_q = -std::f64::consts::LN_2 + ln_q;
                if x > 0.0 {
                    ln_half_q
                } else {
                    (-ln_half_q.exp()).ln_1p()
                }
            }
        }
    }

    /// `ln P(X ≤ x)`.
    pub fn ln_cdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal => norm_ln_cdf(x),
            Law::Pareto { .. } => ln_one_minus_exp(self.ln_sf(x)),
            _ => self.ln_sf(-x),
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal => norm_sf(x),
            _ => self.ln_sf(x).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal => norm_cdf(x),
            Law::Pareto { b, eta, shift } => {
                let z = x + shift;
                if z <= eta {
                    0.0
                } else {
                    -(b * (eta / z).ln()).exp_m1()
                }
            }
            _ => self.sf(-x),
        }
    }

    /// Lower quantile: the `x` with `P(X ≤ x) = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability("p", p)?;
        match self.law {
            Law::Normal => Ok(norm_quantile(p)),
            Law::Pareto { b, eta, shift } => Ok(eta * (-(-p).ln_1p() / b).exp() - shift),
            _ => {
                if p > 0.5 {
                    self.upper_quantile(1.0 - p)
                } else {
                    Ok(-self.upper_quantile(p)?)
                }
            }
        }
    }

    /// Upper quantile: the `x` with `P(X > x) = q`, accurate for tiny `q`.
    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        check_probability("q", q)?;
        self.upper_quantile_ln(q.ln())
    }

    /// Upper quantile with the tail probability given as `ln q`.
    pub fn upper_quantile_ln(&self, ln_q: f64) -> Result<f64> {
        if !(ln_q < 0.0) {
            return Err(Error::Domain(format!("log tail probability must be < 0, got {ln_q}")));
        }
        match self.law {
            Law::Normal => {
                let q = ln_q.exp();
                if q > 0.0 {
                    Ok(norm_isf(q))
                } else {
                    self.solve_upper(ln_q, (-2.0 * ln_q).sqrt())
                }
            }
            Law::Laplace => {
                if ln_q <= -std::f64::consts::LN_2 {
                    Ok(-LAPLACE_SCALE * (ln_q + std::f64::consts::LN_2))
                } else {
                    // P(X > x) = 1 − ½e^{x/s} for x < 0.
                    Ok(LAPLACE_SCALE * (2.0 * -ln_q.exp_m1()).ln())
                }
            }
            Law::Pareto { b, eta, shift } => Ok(eta * (-ln_q / b).exp() - shift),
            _ => {
                if ln_q > -std::f64::consts::LN_2 {
                    // Symmetric law: reflect into the upper half.
                    let q = ln_q.exp();
                    return Ok(-self.upper_quantile_ln((1.0 - q).ln())?);
                }
                let guess = norm_isf(ln_q.exp().max(1e-300));
                self.solve_upper(ln_q, guess.max(0.0))
            }
        }
    }

    fn solve_upper(&self, ln_q: f64, guess: f64) -> Result<f64> {
        let target = |x: f64| self.ln_sf(x) - ln_q;
        let lo = 0.0;
        let hi = expand_upper(target, lo, guess.max(1.0) * 1.5, 1e300)?;
        newton_bisect(
            |x| {
                let l = self.ln_sf(x);
                (l - ln_q, -(self.ln_pdf(x) - l).exp())
            },
            lo,
            hi,
            guess,
            1e-15,
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            Law::Normal => StandardNormal.sample(rng),
            Law::Laplace => {
                let e: f64 = rand_distr::Exp1.sample(rng);
                if rng.random::<bool>() {
                    LAPLACE_SCALE * e
                } else {
                    -LAPLACE_SCALE * e
                }
            }
            Law::T { k, sampler, .. } => sampler.sample(rng) / k,
            Law::Pareto { b, eta, shift } => {
                let u: f64 = rng.random();
                // 1 − u lies in (0, 1], so the power is finite.
                eta * (1.0 - u).powf(-1.0 / b) - shift
            }
            Law::GenNormal { beta, s, sampler, .. } => {
                let g = sampler.sample(rng);
                let mag = s * g.powf(1.0 / beta);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        }
    }
}

pub(crate) fn check_probability(field: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{field} must lie in (0, 1), got {p}")))
    }
}
