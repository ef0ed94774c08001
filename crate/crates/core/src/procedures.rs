//! Step-down multiple testing on p-values.
//!
//! Hypothesis indices are zero-based throughout. Rejection uses the closed
//! comparison `p ≤ u`, and equal p-values are ranked by original index.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::factor_model::{check_level, MarginalLaw, NullConfiguration};

/// Nondecreasing cutoffs `0 ≤ u₁ ≤ … ≤ u_n ≤ 1` for a step-down rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CutoffVector(Vec<f64>);

impl CutoffVector {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(param("cutoffs", "at least one cutoff is required"));
        }
        if let Some(i) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(param("cutoffs", format!("cutoff {i} = {} is outside [0, 1]", u[i])));
        }
        if let Some(i) = u.windows(2).position(|w| w[0] > w[1]) {
            return Err(param("cutoffs", format!("cutoffs decrease at index {}", i + 1)));
        }
        Ok(Self(u))
    }

    /// `u_i = α/n` for every `i`.
    pub fn flat(n: usize, alpha: f64) -> Result<Self> {
        check_level(alpha)?;
        if n == 0 {
            return Err(param("n", "need at least one hypothesis"));
        }
        Ok(Self(vec![alpha / n as f64; n]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for CutoffVector {
    type Error = Error;

    fn try_from(u: Vec<f64>) -> Result<Self> {
        Self::new(u)
    }
}

impl From<CutoffVector> for Vec<f64> {
    fn from(c: CutoffVector) -> Self {
        c.0
    }
}

/// Holm's cutoffs `u_i = α/(n − i + 1)`.
pub fn holm_cutoffs(n: usize, alpha: f64) -> Result<CutoffVector> {
    check_level(alpha)?;
    if n == 0 {
        return Err(param("n", "need at least one hypothesis"));
    }
    Ok(CutoffVector((1..=n).map(|i| alpha / (n - i + 1) as f64).collect()))
}

/// Outcome of one testing run. `false_rejections` and `true_rejections` stay
/// empty until [`account`] is applied with the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionAccount {
    pub rejections: usize,
    pub false_rejections: Option<usize>,
    pub true_rejections: Option<usize>,
    /// Sorted ascending.
    pub rejected_indices: Vec<usize>,
    /// Step-down stopping index `M`.
    pub stop_index: usize,
}

impl RejectionAccount {
    fn truth_free(mut rejected_indices: Vec<usize>, stop_index: usize) -> Self {
        rejected_indices.sort_unstable();
        Self {
            rejections: rejected_indices.len(),
            false_rejections: None,
            true_rejections: None,
            rejected_indices,
            stop_index,
        }
    }
}

fn check_pvalues(p: &[f64]) -> Result<()> {
    if let Some(i) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!("p-value {i} = {} is outside [0, 1]", p[i])));
    }
    Ok(())
}

/// Order of hypotheses by ascending p-value, ties by index.
pub fn rank_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]).then(i.cmp(&j)));
    order
}

/// Step-down rule: `M = max{i : P₍ⱼ₎ ≤ u_j for all j ≤ i}`, rejecting the `M`
/// hypotheses with the smallest p-values.
pub fn run_step_down(p: &[f64], cutoffs: &CutoffVector) -> Result<RejectionAccount> {
    if p.len() != cutoffs.len() {
        return Err(Error::Domain(format!("{} p-values but {} cutoffs", p.len(), cutoffs.len())));
    }
    check_pvalues(p)?;
    let order = rank_order(p);
    let m = order.iter().zip(cutoffs.as_slice()).take_while(|(&i, &u)| p[i] <= u).count();
    Ok(RejectionAccount::truth_free(order[..m].to_vec(), m))
}

/// Single-step Bonferroni: rejects every `i` with `p_i ≤ α/n`.
pub fn single_step_bonferroni(p: &[f64], alpha: f64) -> Result<RejectionAccount> {
    check_level(alpha)?;
    check_pvalues(p)?;
    let t = alpha / p.len().max(1) as f64;
    let rejected: Vec<usize> = (0..p.len()).filter(|&i| p[i] <= t).collect();
    let m = rejected.len();
    Ok(RejectionAccount::truth_free(rejected, m))
}

/// Result of checking `u_i ≤ α/(n − i + 1)` for every `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GordonCheck {
    pub passed: bool,
    /// Zero-based index of the first cutoff above its Holm counterpart.
    pub first_violation: Option<usize>,
}

/// A cutoff vector can control the family-wise error rate at `α` for every
/// joint law only if it never exceeds Holm's cutoffs.
pub fn validate_gordon(cutoffs: &CutoffVector, alpha: f64) -> GordonCheck {
    let n = cutoffs.len();
    let first_violation = cutoffs
        .as_slice()
        .iter()
        .enumerate()
        .position(|(k, &u)| u > alpha / (n - k) as f64);
    GordonCheck { passed: first_violation.is_none(), first_violation }
}

/// Fills in false and true rejection counts from the ground truth.
pub fn account(rejections: &RejectionAccount, config: &NullConfiguration) -> Result<RejectionAccount> {
    if let Some(&i) = rejections.rejected_indices.iter().find(|&&i| i >= config.n()) {
        return Err(Error::Domain(format!("rejected index {i} exceeds n = {}", config.n())));
    }
    let v = rejections.rejected_indices.iter().filter(|&&i| config.is_true_null(i)).count();
    let mut out = rejections.clone();
    out.false_rejections = Some(v);
    out.true_rejections = Some(out.rejections - v);
    Ok(out)
}

/// One-sided p-values `P_null(X > x_i)` from the global-null marginal.
pub fn compute_pvalues(x: &[f64], null_law: &MarginalLaw) -> Result<Vec<f64>> {
    x.iter()
        .map(|&v| {
            if v.is_nan() {
                return Err(Error::Domain("statistic is NaN".into()));
            }
            Ok(null_law.sf(v)?.clamp(0.0, 1.0))
        })
        .collect()
}

/// A testing rule parameterized by level and family size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Bonferroni,
    Holm,
    StepDown(CutoffVector),
}

impl Procedure {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bonferroni => "bonferroni",
            Self::Holm => "holm",
            Self::StepDown(_) => "step_down",
        }
    }

    /// Cutoffs in step-down form. Single-step Bonferroni is the flat vector.
    pub fn cutoffs(&self, n: usize, alpha: f64) -> Result<CutoffVector> {
        match self {
            Self::Bonferroni => CutoffVector::flat(n, alpha),
            Self::Holm => holm_cutoffs(n, alpha),
            Self::StepDown(u) => {
                if u.len() != n {
                    return Err(Error::Domain(format!("{} cutoffs for {n} hypotheses", u.len())));
                }
                Ok(u.clone())
            }
        }
    }

    pub fn apply(&self, p: &[f64], alpha: f64) -> Result<RejectionAccount> {
        match self {
            Self::Bonferroni => single_step_bonferroni(p, alpha),
            _ => run_step_down(p, &self.cutoffs(p.len(), alpha)?),
        }
    }
}
