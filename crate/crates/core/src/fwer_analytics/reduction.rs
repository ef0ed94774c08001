use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationMatrix;
use crate::distributions::DistributionSpec;
use crate::error::{param, Result};
use crate::factor_model::{check_level, EquicorrelatedModel};

use super::exact_fwer_bonferroni;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub n: usize,
    /// Rows whose off-diagonal correlations are all at least `delta`.
    pub strongly_correlated: usize,
    pub delta: f64,
    /// Equicorrelated error rate at `(|M|, α, δ)`.
    pub equicorrelated_part: f64,
    pub bound: f64,
}

/// Bound for a general correlation matrix: the rows correlated at least `δ`
/// with every other row are treated as an equicorrelated block at `δ`, the
/// rest contribute `α/n` each.
pub fn reduction_bound(
    sigma: &CorrelationMatrix,
    delta: f64,
    f: DistributionSpec,
    g: DistributionSpec,
    alpha: f64,
) -> Result<ReductionReport> {
    check_level(alpha)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param("delta", format!("threshold must lie in (0, 1), got {delta}")));
    }
    sigma.validate()?;
    let n = sigma.n();
    let m = sigma.rows_at_least(delta).len();
    let equicorrelated_part = if m == 0 {
        0.0
    } else {
        exact_fwer_bonferroni(&EquicorrelatedModel::global_null(delta, f, g, m)?, alpha)?
    };
    let bound = (equicorrelated_part + (n - m) as f64 * alpha / n as f64).clamp(0.0, 1.0);
    Ok(ReductionReport { n, strongly_correlated: m, delta, equicorrelated_part, bound })
}
