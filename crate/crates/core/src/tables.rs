//! Grids of exact Bonferroni error rates over `(ρ, n)`.

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{param, Error, ErrorKind, Result};
use crate::exec::Execution;
use crate::factor_model::EquicorrelatedModel;
use crate::format::sig9;
use crate::fwer_analytics::exact_fwer_bonferroni;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    /// Normal `F`, Laplace `G`.
    Table1,
    /// Normal `F`, unit-variance `t₄` `G`.
    Table2,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRequest {
    pub table_id: TableId,
    pub rho_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub alpha: f64,
    pub f: DistributionSpec,
    pub g: DistributionSpec,
}

pub const STANDARD_RHO: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const STANDARD_N: [usize; 6] = [100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000];

impl TableRequest {
    pub fn table1() -> Self {
        Self::standard(TableId::Table1, DistributionSpec::Laplace)
    }

    pub fn table2() -> Self {
        Self::standard(TableId::Table2, DistributionSpec::scaled_t(4.0))
    }

    fn standard(table_id: TableId, g: DistributionSpec) -> Self {
        Self {
            table_id,
            rho_grid: STANDARD_RHO.to_vec(),
            n_grid: STANDARD_N.to_vec(),
            alpha: 0.05,
            f: DistributionSpec::StandardNormal,
            g,
        }
    }

    pub fn custom(rho_grid: Vec<f64>, n_grid: Vec<usize>, alpha: f64, f: DistributionSpec, g: DistributionSpec) -> Result<Self> {
        let r = Self { table_id: TableId::Custom, rho_grid, n_grid, alpha, f, g };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho_grid.is_empty() || self.n_grid.is_empty() {
            return Err(param("grid", "rho and n grids must be nonempty"));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(param("rho", format!("grid value {r} outside [0, 1)")));
        }
        if self.n_grid.contains(&0) {
            return Err(param("n", "grid values must be at least 1"));
        }
        crate::factor_model::check_level(self.alpha)?;
        self.f.build()?;
        self.g.build()?;
        Ok(())
    }

    /// Cells in `(ρ, n)` order.
    pub fn cells(&self) -> Vec<(f64, usize)> {
        let mut rho = self.rho_grid.clone();
        rho.sort_by(f64::total_cmp);
        rho.dedup();
        let mut n = self.n_grid.clone();
        n.sort_unstable();
        n.dedup();
        rho.iter().flat_map(|&r| n.iter().map(move |&k| (r, k))).collect()
    }
}

/// One grid cell. A failed cell keeps its error message and class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub rho: f64,
    pub n: usize,
    pub fwer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub error_kind: Option<ErrorKind>,
}

/// Evaluates every cell; output order is `(ρ, n)` whatever the execution mode.
pub fn compute_table(request: &TableRequest, execution: Execution, rel_tol: Option<f64>) -> Result<Vec<TableCell>> {
    request.validate()?;
    let cells = request.cells();
    let eval = |&(rho, n): &(f64, usize)| -> Result<f64> {
        let mut m = EquicorrelatedModel::global_null(rho, request.f, request.g, n)?;
        if let Some(t) = rel_tol {
            m = m.with_tolerance(t)?;
        }
        exact_fwer_bonferroni(&m, request.alpha)
    };
    Ok(execution
        .map(&cells, |c| match eval(c) {
            Ok(v) => TableCell { rho: c.0, n: c.1, fwer: Some(v), error: None, error_kind: None },
            Err(e) => TableCell { rho: c.0, n: c.1, fwer: None, error: Some(e.to_string()), error_kind: Some(e.kind()) },
        }))
}

/// First failing cell as an error, for callers that need every value.
pub fn require_complete(cells: &[TableCell]) -> Result<()> {
    match cells.iter().find(|c| c.fwer.is_none()) {
        None => Ok(()),
        Some(c) => Err(Error::Numeric(format!(
            "cell rho={} n={}: {}",
            c.rho,
            c.n,
            c.error.as_deref().unwrap_or("no value")
        ))),
    }
}

/// Long format: header `rho,n,fwer`, one row per cell.
pub fn render_long_csv(cells: &[TableCell]) -> String {
    let mut out = String::from("rho,n,fwer\n");
    for c in cells {
        out.push_str(&format!("{},{},{}\n", c.rho, c.n, crate::format::fixed_sig(c.fwer, 9)));
    }
    out
}

/// Wide format: one row per `ρ`, one column per `n`.
pub fn render_wide_csv(cells: &[TableCell]) -> String {
    let mut ns: Vec<usize> = cells.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut out = String::from("rho");
    for n in &ns {
        out.push_str(&format!(",{n}"));
    }
    out.push('\n');
    let mut rhos: Vec<f64> = cells.iter().map(|c| c.rho).collect();
    rhos.dedup();
    for r in rhos {
        out.push_str(&r.to_string());
        for n in &ns {
            let v = cells.iter().find(|c| c.rho == r && c.n == *n).and_then(|c| c.fwer);
            out.push(',');
            out.push_str(&v.map_or_else(|| "NA".to_string(), sig9));
        }
        out.push('\n');
    }
    out
}
