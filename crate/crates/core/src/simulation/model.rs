use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::CorrelationMatrix;
use crate::distributions::{DistributionSpec, StandardizedDistribution};
use crate::error::{param, Error, Result};
use crate::factor_model::{MarginalLaw, NullConfiguration};

/// Joint law of the test statistics before the means are added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dependence {
    /// `√(1−ρ)Z_i + √ρU` with `Z_i ~ F`, `U ~ G`.
    OneFactor { rho: f64, f: DistributionSpec, g: DistributionSpec },
    /// `Lξ` with `LLᵀ = Σ` and standard normal `ξ`.
    GaussianGeneral { sigma: CorrelationMatrix },
    /// `√((ν−2)/W)·Lξ` with `W ~ χ²_ν`: unit-variance multivariate t.
    EllipticalT { sigma: CorrelationMatrix, nu: f64 },
}

/// A dependence structure plus the mean vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct CorrelationModel {
    dependence: Dependence,
    config: NullConfiguration,
    /// Square root of a dense `Σ`, computed once at construction.
    root: Option<Arc<DMatrix<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    dependence: Dependence,
    n: usize,
    #[serde(default)]
    alternatives: Vec<(usize, f64)>,
}

impl TryFrom<ModelRepr> for CorrelationModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        Self::new(r.dependence, NullConfiguration::with_alternatives(r.n, r.alternatives)?)
    }
}

impl From<CorrelationModel> for ModelRepr {
    fn from(m: CorrelationModel) -> Self {
        ModelRepr { n: m.config.n(), alternatives: m.config.alternatives().to_vec(), dependence: m.dependence }
    }
}

impl CorrelationModel {
    pub fn new(dependence: Dependence, config: NullConfiguration) -> Result<Self> {
        let sigma = match &dependence {
            Dependence::OneFactor { rho, f, g } => {
                if !(0.0..=1.0).contains(rho) {
                    return Err(param("rho", format!("must lie in [0, 1], got {rho}")));
                }
                f.build()?;
                g.build()?;
                None
            }
            Dependence::GaussianGeneral { sigma } => Some(sigma),
            Dependence::EllipticalT { sigma, nu } => {
                if !(*nu > 2.0) || !nu.is_finite() {
                    return Err(param("nu", format!("degrees of freedom must be finite and > 2, got {nu}")));
                }
                Some(sigma)
            }
        };
        let mut root = None;
        if let Some(sigma) = sigma {
            sigma.validate()?;
            if sigma.n() != config.n() {
                return Err(Error::Domain(format!(
                    "correlation matrix is {0}x{0} but the mean vector has {1} entries",
                    sigma.n(),
                    config.n()
                )));
            }
            if let CorrelationMatrix::Dense { .. } = sigma {
                root = Some(Arc::new(sigma.square_root()?));
            }
        }
        Ok(Self { dependence, config, root })
    }

    pub fn one_factor(rho: f64, f: DistributionSpec, g: DistributionSpec, config: NullConfiguration) -> Result<Self> {
        Self::new(Dependence::OneFactor { rho, f, g }, config)
    }

    pub fn gaussian(sigma: CorrelationMatrix, config: NullConfiguration) -> Result<Self> {
        Self::new(Dependence::GaussianGeneral { sigma }, config)
    }

    pub fn elliptical_t(sigma: CorrelationMatrix, nu: f64, config: NullConfiguration) -> Result<Self> {
        Self::new(Dependence::EllipticalT { sigma, nu }, config)
    }

    pub fn dependence(&self) -> &Dependence {
        &self.dependence
    }

    pub fn config(&self) -> &NullConfiguration {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    /// Same dependence with a new mean configuration. A symbolic
    /// equicorrelated `Σ` is resized; a dense one must already match.
    pub fn with_config(&self, config: NullConfiguration) -> Result<Self> {
        let resize = |s: &CorrelationMatrix| match s {
            CorrelationMatrix::Equicorrelated { rho, .. } => CorrelationMatrix::equicorrelated(config.n(), *rho),
            dense => Ok(dense.clone()),
        };
        let dependence = match &self.dependence {
            Dependence::OneFactor { .. } => self.dependence.clone(),
            Dependence::GaussianGeneral { sigma } => Dependence::GaussianGeneral { sigma: resize(sigma)? },
            Dependence::EllipticalT { sigma, nu } => Dependence::EllipticalT { sigma: resize(sigma)?, nu: *nu },
        };
        if self.root.is_some() && dependence == self.dependence {
            if config.n() != self.n() {
                return Err(Error::Domain(format!("dense matrix has dimension {}, not {}", self.n(), config.n())));
            }
            return Ok(Self { dependence, config, root: self.root.clone() });
        }
        Self::new(dependence, config)
    }

    /// The marginal law of a true-null statistic.
    pub fn null_law(&self) -> Result<MarginalLaw> {
        let build = |s: DistributionSpec| s.build();
        Ok(match &self.dependence {
            Dependence::OneFactor { rho, f, g } => MarginalLaw::new(*rho, build(*f)?, build(*g)?),
            Dependence::GaussianGeneral { .. } => {
                let z = build(DistributionSpec::StandardNormal)?;
                MarginalLaw::new(0.0, z, z)
            }
            Dependence::EllipticalT { nu, .. } => {
                let t = build(DistributionSpec::scaled_t(*nu))?;
                MarginalLaw::new(0.0, t, t)
            }
        })
    }

    /// Rejects a null law that differs from this model's true-null marginal.
    pub fn check_null_law(&self, law: &MarginalLaw) -> Result<()> {
        let (fs, gs) = (law.f().spec(), law.g().spec());
        let normal = DistributionSpec::StandardNormal;
        let ok = match &self.dependence {
            Dependence::OneFactor { rho, f, g } => {
                let same = law.rho() == *rho && fs == *f && (*rho == 0.0 || gs == *g);
                // Sums of independent normals are normal whatever the weights.
                let gaussian = *f == normal && *g == normal && fs == normal && (law.rho() == 0.0 || gs == normal);
                same || gaussian
            }
            Dependence::GaussianGeneral { .. } => fs == normal && (law.rho() == 0.0 || gs == normal),
            Dependence::EllipticalT { nu, .. } => law.rho() == 0.0 && fs == DistributionSpec::scaled_t(*nu),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Configuration(format!(
                "null law (rho = {}, F = {}, G = {}) does not match the model's null marginal",
                law.rho(),
                fs.label(),
                gs.label()
            )))
        }
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(text.as_bytes()).iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// `rho=<ρ>` for one-factor models, the matrix id otherwise.
    pub fn dependence_id(&self) -> String {
        match &self.dependence {
            Dependence::OneFactor { rho, .. } => format!("rho={rho}"),
            Dependence::GaussianGeneral { sigma } => sigma.id(),
            Dependence::EllipticalT { sigma, nu } => format!("{}/nu={nu}", sigma.id()),
        }
    }

    pub fn sampler(&self) -> Result<PanelSampler> {
        let chi = |nu: f64| -> Result<Option<(ChiSquared<f64>, f64)>> {
            let d = ChiSquared::new(nu).map_err(|e| param("nu", e.to_string()))?;
            Ok(Some((d, nu - 2.0)))
        };
        let kind = match &self.dependence {
            Dependence::OneFactor { rho, f, g } => SamplerKind::OneFactor {
                a: (1.0 - rho).sqrt(),
                b: rho.sqrt(),
                f: f.build()?,
                g: g.build()?,
            },
            Dependence::GaussianGeneral { sigma } | Dependence::EllipticalT { sigma, .. } => {
                let scale = match &self.dependence {
                    Dependence::EllipticalT { nu, .. } => chi(*nu)?,
                    _ => None,
                };
                match sigma {
                    CorrelationMatrix::Equicorrelated { rho, .. } => {
                        SamplerKind::Equicorrelated { a: (1.0 - rho).sqrt(), b: rho.sqrt(), scale }
                    }
                    CorrelationMatrix::Dense { .. } => {
                        let root = self.root.clone().ok_or_else(|| Error::Factorization("missing square root".into()))?;
                        SamplerKind::Dense { root, scale }
                    }
                }
            }
        };
        Ok(PanelSampler { kind, n: self.n(), alternatives: self.config.alternatives().to_vec() })
    }
}

#[derive(Debug, Clone)]
enum SamplerKind {
    OneFactor { a: f64, b: f64, f: StandardizedDistribution, g: StandardizedDistribution },
    Equicorrelated { a: f64, b: f64, scale: Option<(ChiSquared<f64>, f64)> },
    Dense { root: Arc<DMatrix<f64>>, scale: Option<(ChiSquared<f64>, f64)> },
}

/// Draws statistic panels `X = (dependent noise) + μ`.
#[derive(Debug, Clone)]
pub struct PanelSampler {
    kind: SamplerKind,
    n: usize,
    alternatives: Vec<(usize, f64)>,
}

impl PanelSampler {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Fills `out` with one panel. `scratch` holds the normal draws of the
    /// dense route between calls.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>, scratch: &mut Vec<f64>) {
        let n = self.n;
        out.clear();
        match &self.kind {
            SamplerKind::OneFactor { a, b, f, g } => {
                let shared = b * g.sample(rng);
                out.extend((0..n).map(|_| a * f.sample(rng) + shared));
            }
            SamplerKind::Equicorrelated { a, b, scale } => {
                let s = draw_scale(scale, rng);
                let shared: f64 = rng.sample(StandardNormal);
                let shared = b * shared;
                out.extend((0..n).map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    s * (a * z + shared)
                }));
            }
            SamplerKind::Dense { root, scale } => {
                let s = draw_scale(scale, rng);
                scratch.clear();
                scratch.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                out.resize(n, 0.0);
                for (j, col) in root.column_iter().enumerate() {
                    let xi = scratch[j];
                    for (o, l) in out.iter_mut().zip(col.iter()) {
                        *o += l * xi;
                    }
                }
                if s != 1.0 {
                    out.iter_mut().for_each(|o| *o *= s);
                }
            }
        }
        for &(i, m) in &self.alternatives {
            out[i] += m;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        let mut scratch = Vec::new();
        self.sample_into(rng, &mut out, &mut scratch);
        out
    }
}

fn draw_scale<R: Rng + ?Sized>(scale: &Option<(ChiSquared<f64>, f64)>, rng: &mut R) -> f64 {
    match scale {
        Some((chi, nu_minus_two)) => (nu_minus_two / chi.sample(rng)).sqrt(),
        None => 1.0,
    }
}

/// Ground-truth labels used for counting false and true rejections. Labels
/// may differ from the means, e.g. a zero-mean hypothesis marked false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truth {
    false_null: Vec<bool>,
}

impl Truth {
    pub fn from_config(config: &NullConfiguration) -> Self {
        let mut false_null = vec![false; config.n()];
        for &(i, _) in config.alternatives() {
            false_null[i] = true;
        }
        Self { false_null }
    }

    pub fn with_false_nulls(n: usize, indices: &[usize]) -> Result<Self> {
        let mut false_null = vec![false; n];
        for &i in indices {
            *false_null.get_mut(i).ok_or_else(|| Error::Domain(format!("index {i} out of range for n = {n}")))? = true;
        }
        Ok(Self { false_null })
    }

    pub fn n(&self) -> usize {
        self.false_null.len()
    }

    pub fn is_true_null(&self, i: usize) -> bool {
        !self.false_null[i]
    }

    pub fn false_null_count(&self) -> usize {
        self.false_null.iter().filter(|&&b| b).count()
    }
}
