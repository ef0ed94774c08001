//! Monte Carlo estimates of `P(R ≥ 1)`, the family-wise error rate and
//! AnyPwr for any procedure and dependence structure.
//!
//! Replication `k` draws from a ChaCha8 stream keyed by `(seed, k)`, and
//! replications are tallied as integers, so a fixed seed gives bit-identical
//! estimates for every worker count and batch size.

mod model;
mod results;

pub use model::{CorrelationModel, Dependence, PanelSampler, Truth};
pub use results::{append_results, ResultRow, ResultsFormat, RESULT_COLUMNS};

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exec::Execution;
use crate::factor_model::{check_level, MarginalLaw};
use crate::procedures::{compute_pvalues, Procedure};
use crate::special::norm_isf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub replications: u64,
    pub seed: u64,
    pub batch_size: u64,
    pub alpha: f64,
    pub ci_level: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl SimulationConfig {
    pub fn new(replications: u64, seed: u64, alpha: f64) -> Self {
        Self { replications, seed, batch_size: 4096, alpha, ci_level: 0.95, execution: Execution::default() }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_batch_size(mut self, batch_size: u64) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_ci_level(mut self, ci_level: f64) -> Self {
        self.ci_level = ci_level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.alpha)?;
        if self.replications == 0 {
            return Err(param("replications", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(param("batch_size", "must be at least 1"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(param("ci_level", format!("must lie in (0, 1), got {}", self.ci_level)));
        }
        Ok(())
    }
}

/// Binomial proportion with a normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwerEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replications: u64,
    pub successes: u64,
}

impl FwerEstimate {
    /// With no successes the upper limit is the rule-of-three value `3/reps`;
    /// with no failures the lower limit is `1 − 3/reps`.
    pub fn from_counts(successes: u64, replications: u64, ci_level: f64) -> Self {
        let reps = replications as f64;
        let p_hat = successes as f64 / reps;
        let std_err = (p_hat * (1.0 - p_hat) / reps).sqrt();
        let z = norm_isf(0.5 * (1.0 - ci_level));
        let (mut ci_low, mut ci_high) = ((p_hat - z * std_err).max(0.0), (p_hat + z * std_err).min(1.0));
        if successes == 0 {
            ci_high = (3.0 / reps).min(1.0);
        }
        if successes == replications {
            ci_low = (1.0 - 3.0 / reps).max(0.0);
        }
        Self { p_hat, std_err, ci_low, ci_high, replications, successes }
    }
}

/// Which event an estimate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    /// `R ≥ 1`.
    AnyRejection,
    /// `V ≥ 1`.
    Fwer,
    /// `S ≥ 1`.
    AnyPwr,
}

impl Estimand {
    pub fn name(self) -> &'static str {
        match self {
            Self::AnyRejection => "any_rejection",
            Self::Fwer => "fwer",
            Self::AnyPwr => "anypwr",
        }
    }
}

/// Event counts over a set of replications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub replications: u64,
    pub any_rejection: u64,
    pub any_false_rejection: u64,
    pub any_true_rejection: u64,
}

impl Tally {
    fn record(&mut self, outcome: Outcome) {
        self.replications += 1;
        self.any_rejection += outcome.any as u64;
        self.any_false_rejection += outcome.false_rejection as u64;
        self.any_true_rejection += outcome.true_rejection as u64;
    }

    fn merge(self, o: Self) -> Self {
        Self {
            replications: self.replications + o.replications,
            any_rejection: self.any_rejection + o.any_rejection,
            any_false_rejection: self.any_false_rejection + o.any_false_rejection,
            any_true_rejection: self.any_true_rejection + o.any_true_rejection,
        }
    }

    pub fn count(&self, estimand: Estimand) -> u64 {
        match estimand {
            Estimand::AnyRejection => self.any_rejection,
            Estimand::Fwer => self.any_false_rejection,
            Estimand::AnyPwr => self.any_true_rejection,
        }
    }

    pub fn estimate(&self, estimand: Estimand, ci_level: f64) -> FwerEstimate {
        FwerEstimate::from_counts(self.count(estimand), self.replications, ci_level)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    any: bool,
    false_rejection: bool,
    true_rejection: bool,
}

/// Statistic thresholds `t_j` with `P_null(X > t_j) = u_j`, computed on first
/// use. A p-value clears `u_j` exactly when the statistic clears `t_j`.
struct Thresholds<'a> {
    law: &'a MarginalLaw,
    levels: Vec<f64>,
    slot: Vec<usize>,
    cache: Vec<OnceLock<std::result::Result<f64, String>>>,
}

impl<'a> Thresholds<'a> {
    fn new(law: &'a MarginalLaw, u: &[f64]) -> Self {
        let mut levels: Vec<f64> = Vec::new();
        let mut slot = Vec::with_capacity(u.len());
        for &v in u {
            if levels.last() != Some(&v) {
                levels.push(v);
            }
            slot.push(levels.len() - 1);
        }
        let cache = levels.iter().map(|_| OnceLock::new()).collect();
        Self { law, levels, slot, cache }
    }

    fn len(&self) -> usize {
        self.slot.len()
    }

    fn get(&self, j: usize) -> Result<f64> {
        let k = self.slot[j];
        let u = self.levels[k];
        self.cache[k]
            .get_or_init(|| {
                if u >= 1.0 {
                    Ok(f64::NEG_INFINITY)
                } else if u <= 0.0 {
                    Ok(f64::INFINITY)
                } else {
                    self.law.upper_quantile(u).map_err(|e| e.to_string())
                }
            })
            .clone()
            .map_err(|m| Error::Numeric(format!("threshold for cutoff {u:e}: {m}")))
    }
}

/// Step-down on statistics: sort by value (descending, ties by index) and
/// reject while `x₍ⱼ₎ ≥ t_j`. Only values at or above the last threshold can
/// be rejected, so only those are sorted.
fn step_down_outcome(x: &[f64], max: f64, th: &Thresholds, truth: &Truth, cand: &mut Vec<usize>) -> Result<Outcome> {
    if !(max >= th.get(0)?) {
        return Ok(Outcome::default());
    }
    let floor = th.get(th.len() - 1)?;
    cand.clear();
    cand.extend((0..x.len()).filter(|&i| x[i] >= floor));
    cand.sort_unstable_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
    let mut out = Outcome::default();
    for (j, &i) in cand.iter().enumerate() {
        if x[i] < th.get(j)? {
            break;
        }
        out.any = true;
        if truth.is_true_null(i) {
            out.false_rejection = true;
        } else {
            out.true_rejection = true;
        }
    }
    Ok(out)
}

fn prepare(
    model: &CorrelationModel,
    procedures: &[Procedure],
    config: &SimulationConfig,
    null_law: &MarginalLaw,
    truth: &Truth,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    model.check_null_law(null_law)?;
    if truth.n() != model.n() {
        return Err(Error::Domain(format!("truth labels {} hypotheses, model has {}", truth.n(), model.n())));
    }
    if procedures.is_empty() {
        return Err(Error::Domain("no procedures to simulate".into()));
    }
    procedures
        .iter()
        .map(|p| Ok(p.cutoffs(model.n(), config.alpha)?.as_slice().to_vec()))
        .collect()
}

/// Runs every procedure on the same panels and returns one tally each.
pub fn simulate(
    model: &CorrelationModel,
    procedures: &[Procedure],
    config: &SimulationConfig,
    null_law: &MarginalLaw,
    truth: &Truth,
) -> Result<Vec<Tally>> {
    let cutoffs = prepare(model, procedures, config, null_law, truth)?;
    let thresholds: Vec<Thresholds> = cutoffs.iter().map(|u| Thresholds::new(null_law, u)).collect();
    for th in &thresholds {
        th.get(0)?;
        th.get(th.len() - 1)?;
    }
    let sampler = model.sampler()?;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let k = procedures.len();
    config.execution.map_batches(
        config.replications,
        config.batch_size,
        vec![Tally::default(); k],
        |range| {
            let mut tallies = vec![Tally::default(); k];
            let (mut x, mut scratch, mut cand) = (Vec::new(), Vec::new(), Vec::new());
            for rep in range {
                let mut rng = base.clone();
                rng.set_stream(rep);
                sampler.sample_into(&mut rng, &mut x, &mut scratch);
                let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (t, th) in tallies.iter_mut().zip(&thresholds) {
                    t.record(step_down_outcome(&x, max, th, truth, &mut cand)?);
                }
            }
            Ok(tallies)
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    )
}

/// Same panels as [`simulate`], tested through explicit p-values. Slow for
/// one-factor models (one quadrature per statistic); used as a cross-check.
pub fn simulate_via_pvalues(
    model: &CorrelationModel,
    procedures: &[Procedure],
    config: &SimulationConfig,
    null_law: &MarginalLaw,
    truth: &Truth,
) -> Result<Vec<Tally>> {
    prepare(model, procedures, config, null_law, truth)?;
    let sampler = model.sampler()?;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let k = procedures.len();
    config.execution.map_batches(
        config.replications,
        config.batch_size,
        vec![Tally::default(); k],
        |range| {
            let mut tallies = vec![Tally::default(); k];
            let (mut x, mut scratch) = (Vec::new(), Vec::new());
            for rep in range {
                let mut rng = base.clone();
                rng.set_stream(rep);
                sampler.sample_into(&mut rng, &mut x, &mut scratch);
                let p = compute_pvalues(&x, null_law)?;
                for (t, proc) in tallies.iter_mut().zip(procedures) {
                    let r = proc.apply(&p, config.alpha)?;
                    let false_rejection = r.rejected_indices.iter().any(|&i| truth.is_true_null(i));
                    let true_rejection = r.rejected_indices.iter().any(|&i| !truth.is_true_null(i));
                    t.record(Outcome { any: r.rejections > 0, false_rejection, true_rejection });
                }
            }
            Ok(tallies)
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    )
}

/// `P(R ≥ 1)`.
pub fn estimate_prob_any_rejection(
    model: &CorrelationModel,
    procedure: &Procedure,
    config: &SimulationConfig,
    null_law: &MarginalLaw,
) -> Result<FwerEstimate> {
    let truth = Truth::from_config(model.config());
    let t = simulate(model, std::slice::from_ref(procedure), config, null_law, &truth)?;
    Ok(t[0].estimate(Estimand::AnyRejection, config.ci_level))
}

/// `P(V ≥ 1)` with false rejections counted against `truth`.
pub fn estimate_fwer(
    model: &CorrelationModel,
    procedure: &Procedure,
    config: &SimulationConfig,
    null_law: &MarginalLaw,
    truth: &Truth,
) -> Result<FwerEstimate> {
    if truth.false_null_count() == truth.n() {
        return Err(Error::Configuration("no true null hypotheses: the family-wise error rate is undefined".into()));
    }
    let t = simulate(model, std::slice::from_ref(procedure), config, null_law, truth)?;
    Ok(t[0].estimate(Estimand::Fwer, config.ci_level))
}

/// `P(S ≥ 1)` with true rejections counted against `truth`.
pub fn estimate_anypwr(
    model: &CorrelationModel,
    procedure: &Procedure,
    config: &SimulationConfig,
    null_law: &MarginalLaw,
    truth: &Truth,
) -> Result<FwerEstimate> {
    if truth.false_null_count() == 0 {
        return Err(Error::Configuration("no false null hypotheses: AnyPwr is undefined".into()));
    }
    let t = simulate(model, std::slice::from_ref(procedure), config, null_law, truth)?;
    Ok(t[0].estimate(Estimand::AnyPwr, config.ci_level))
}
