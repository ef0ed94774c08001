use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use equifwer::format::sig9;
use equifwer::fwer_analytics::{
    anypwr_single_step, bounds, check_zero_limit_conditions, exact_any_rejection_holm, exact_fwer_bonferroni,
    limit_ratio_diagnostic, SplitPoint,
};
use equifwer::procedures::{holm_cutoffs, validate_gordon};
use equifwer::simulation::{
    append_results, simulate, CorrelationModel, Estimand, ResultRow, ResultsFormat, SimulationConfig, Truth,
    RESULT_COLUMNS,
};
use equifwer::tables::{compute_table, render_long_csv, render_wide_csv, TableRequest};
use equifwer::{
    CutoffVector, DistributionSpec, EquicorrelatedModel, Error, ErrorKind, Execution, ModelSpec, NullConfiguration,
    Procedure, Result,
};

use crate::args::*;

/// Text for stdout plus an error to report after printing it.
pub struct Rendered {
    pub stdout: String,
    pub deferred: Option<Error>,
}

impl From<String> for Rendered {
    fn from(stdout: String) -> Self {
        Self { stdout, deferred: None }
    }
}

pub struct Globals {
    pub output: Option<OutputFormat>,
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub execution: Execution,
}

impl Globals {
    fn format(&self, default: OutputFormat) -> OutputFormat {
        self.output.unwrap_or(default)
    }

    fn model(&self, arg: &ModelArg) -> Result<EquicorrelatedModel> {
        let m = EquicorrelatedModel::from_json(&read_source(&arg.model)?)?;
        match self.tolerance {
            Some(t) => m.with_tolerance(t),
            None => Ok(m),
        }
    }
}

/// Inline JSON when the argument starts with `{`, otherwise a file path.
fn read_source(s: &str) -> Result<String> {
    if s.trim_start().starts_with('{') {
        Ok(s.to_string())
    } else {
        Ok(fs::read_to_string(s)?)
    }
}

fn parse_spec(s: &str) -> Result<DistributionSpec> {
    Ok(serde_json::from_str(&read_source(s)?)?)
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "NA".into(),
        Value::Number(n) if n.is_f64() => sig9(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => v.to_string(),
    }
}

/// `field,value` rows for a flat object.
fn kv_csv(v: &Value) -> String {
    let mut out = String::from("field,value\n");
    if let Value::Object(map) = v {
        for (k, x) in map {
            out.push_str(&format!("{k},{}\n", cell(x)));
        }
    }
    out
}

pub fn run(cmd: &Command, g: &Globals) -> Result<Rendered> {
    match cmd {
        Command::Table(a) => table(a, g),
        Command::Exact(a) => exact(a, g).map(Into::into),
        Command::Bounds(a) => bounds_cmd(a, g).map(Into::into),
        Command::Simulate(a) => simulate_cmd(a, g).map(Into::into),
        Command::Diagnose(a) => diagnose(a, g).map(Into::into),
        Command::Quantile(a) => quantile(a, g).map(Into::into),
        Command::GordonCheck(a) => gordon(a, g).map(Into::into),
        Command::Apply(a) => apply(a, g).map(Into::into),
    }
}

fn table(a: &TableArgs, g: &Globals) -> Result<Rendered> {
    let mut req = match a.table {
        TableKind::Table1 => TableRequest::table1(),
        TableKind::Table2 => TableRequest::table2(),
        TableKind::Custom => TableRequest::custom(
            a.rho.clone().ok_or_else(|| Error::Domain("custom tables need --rho".into()))?,
            a.n.clone().ok_or_else(|| Error::Domain("custom tables need --n".into()))?,
            a.alpha,
            a.f.as_deref().map(parse_spec).transpose()?.unwrap_or(DistributionSpec::StandardNormal),
            a.g.as_deref().map(parse_spec).transpose()?.unwrap_or(DistributionSpec::StandardNormal),
        )?,
    };
    if a.table != TableKind::Custom {
        if let Some(r) = &a.rho {
            req.rho_grid = r.clone();
        }
        if let Some(n) = &a.n {
            req.n_grid = n.clone();
        }
        req.alpha = a.alpha;
    }
    let cells = compute_table(&req, g.execution, g.tolerance)?;
    let text = match g.format(OutputFormat::Csv) {
        OutputFormat::Csv if a.wide => render_wide_csv(&cells),
        OutputFormat::Csv => render_long_csv(&cells),
        OutputFormat::Json => pretty(&cells)?,
    };
    let failed: Vec<_> = cells.iter().filter(|c| c.fwer.is_none()).collect();
    let deferred = failed.first().map(|c| {
        let msg = format!("{} of {} cells failed; first at rho={} n={}", failed.len(), cells.len(), c.rho, c.n);
        match c.error_kind {
            Some(ErrorKind::Domain) => Error::Domain(msg),
            _ => Error::Numeric(msg),
        }
    });
    match &a.out {
        Some(path) => {
            fs::write(path, &text)?;
            if !failed.is_empty() {
                let side = path.with_file_name(format!(
                    "{}.diagnostics.json",
                    path.file_name().and_then(|s| s.to_str()).unwrap_or("table")
                ));
                fs::write(side, pretty(&failed)?)?;
            }
            Ok(Rendered { stdout: String::new(), deferred })
        }
        None => {
            for c in &failed {
                eprintln!("{}", serde_json::to_string(c)?);
            }
            Ok(Rendered { stdout: text, deferred })
        }
    }
}

fn exact(a: &ExactArgs, g: &Globals) -> Result<String> {
    let m = g.model(&a.model)?;
    let mut out = Map::new();
    out.insert("n".into(), json!(m.n()));
    out.insert("n0".into(), json!(m.config().n0()));
    out.insert("rho".into(), json!(m.rho()));
    out.insert("alpha".into(), json!(a.alpha));
    out.insert(
        "fwer_bonferroni".into(),
        if m.config().n0() > 0 { json!(exact_fwer_bonferroni(&m, a.alpha)?) } else { Value::Null },
    );
    out.insert(
        "any_rejection_holm".into(),
        if m.config().n0() > 0 { json!(exact_any_rejection_holm(&m, a.alpha)?) } else { Value::Null },
    );
    out.insert(
        "anypwr_bonferroni".into(),
        if m.config().is_global_null() { Value::Null } else { json!(anypwr_single_step(&m, a.alpha)?) },
    );
    let v = Value::Object(out);
    Ok(match g.format(OutputFormat::Json) {
        OutputFormat::Json => pretty(&v)?,
        OutputFormat::Csv => kv_csv(&v),
    })
}

fn bounds_cmd(a: &BoundsArgs, g: &Globals) -> Result<String> {
    let m = g.model(&a.model)?;
    let split = match a.d {
        Some(d) => SplitPoint::Fixed(d),
        None => SplitPoint::Optimized,
    };
    let report = bounds(&m, a.alpha, split, !a.no_exact)?;
    let v = serde_json::to_value(&report)?;
    Ok(match g.format(OutputFormat::Json) {
        OutputFormat::Json => pretty(&v)?,
        OutputFormat::Csv => kv_csv(&v),
    })
}

fn simulation_model(a: &SimulateArgs, g: &Globals) -> Result<CorrelationModel> {
    let text = read_source(&a.model.model)?;
    let value: Value = serde_json::from_str(&text)?;
    let general = value.get("dependence").is_some();
    let mut model = if general {
        serde_json::from_value::<CorrelationModel>(value)?
    } else {
        let spec: ModelSpec = serde_json::from_value(value)?;
        let m = spec.build()?;
        CorrelationModel::one_factor(m.rho(), m.f().spec(), m.g().spec(), m.config().clone())?
    };
    if let Some(n) = a.n {
        if n != model.n() {
            if !model.config().is_global_null() {
                return Err(Error::Configuration(format!(
                    "--n {n} conflicts with the {} means given in the model",
                    model.n()
                )));
            }
            model = model.with_config(NullConfiguration::global_null(n)?)?;
        }
    }
    let _ = g;
    Ok(model)
}

fn simulate_cmd(a: &SimulateArgs, g: &Globals) -> Result<String> {
    let model = simulation_model(a, g)?;
    let mut law = model.null_law()?;
    if let Some(t) = g.tolerance {
        law = law.with_tolerance(t);
    }
    let procs: Vec<Procedure> = a
        .procedure
        .iter()
        .map(|p| match p {
            ProcedureName::Bonferroni => Procedure::Bonferroni,
            ProcedureName::Holm => Procedure::Holm,
        })
        .collect();
    let config = SimulationConfig::new(a.replications, g.seed, a.alpha)
        .with_batch_size(a.batch_size)
        .with_execution(g.execution);
    let truth = Truth::from_config(model.config());
    let estimands: Vec<Estimand> = a
        .estimand
        .iter()
        .map(|e| match e {
            EstimandName::AnyRejection => Estimand::AnyRejection,
            EstimandName::Fwer => Estimand::Fwer,
            EstimandName::Anypwr => Estimand::AnyPwr,
        })
        .collect();
    if estimands.contains(&Estimand::AnyPwr) && model.config().is_global_null() {
        return Err(Error::Configuration("no false null hypotheses: AnyPwr is undefined".into()));
    }
    if estimands.contains(&Estimand::Fwer) && model.config().n0() == 0 {
        return Err(Error::Configuration("no true null hypotheses: the family-wise error rate is undefined".into()));
    }
    let tallies = simulate(&model, &procs, &config, &law, &truth)?;
    // Holm and single-step Bonferroni share the first cutoff α/n, so on the
    // same panels they reject at least once in exactly the same replications.
    let holm = procs.iter().position(|p| *p == Procedure::Holm);
    let bon = procs.iter().position(|p| *p == Procedure::Bonferroni);
    if let (Some(h), Some(b)) = (holm, bon) {
        if tallies[h].any_rejection != tallies[b].any_rejection {
            return Err(Error::Numeric(format!(
                "Holm and Bonferroni disagree on P(R >= 1): {} vs {} rejecting replications",
                tallies[h].any_rejection, tallies[b].any_rejection
            )));
        }
    }
    let mut rows = Vec::new();
    for (p, t) in procs.iter().zip(&tallies) {
        for &e in &estimands {
            let est = t.estimate(e, config.ci_level);
            rows.push(ResultRow {
                model_hash: model.hash(),
                procedure: p.name().into(),
                n: model.n(),
                alpha: a.alpha,
                rho_or_sigma_id: model.dependence_id(),
                replications: est.replications,
                seed: g.seed,
                p_hat: est.p_hat,
                std_err: est.std_err,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                estimand: e.name().into(),
            });
        }
    }
    let format = g.format(OutputFormat::Json);
    if let Some(path) = &a.results {
        let f = match format {
            OutputFormat::Csv => ResultsFormat::Csv,
            OutputFormat::Json => ResultsFormat::Json,
        };
        append_results(path, f, &rows)?;
    }
    Ok(match format {
        OutputFormat::Json => pretty(&rows)?,
        OutputFormat::Csv => {
            let mut out = RESULT_COLUMNS.join(",") + "\n";
            for r in &rows {
                let v = serde_json::to_value(r)?;
                let fields: Vec<String> = RESULT_COLUMNS.iter().map(|c| cell(&v[*c])).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            out
        }
    })
}

fn diagnose(a: &DiagnoseArgs, g: &Globals) -> Result<String> {
    let m = g.model(&a.model)?;
    let limit = limit_ratio_diagnostic(&m, a.alpha, &a.n_grid)?;
    let conditions = check_zero_limit_conditions(m.f().spec(), m.g().spec(), &a.b_grid, &a.a_grid)?;
    Ok(match g.format(OutputFormat::Json) {
        OutputFormat::Json => pretty(&json!({ "limit": limit, "conditions": conditions }))?,
        OutputFormat::Csv => {
            let verdict = |v: &dyn erased::Verdict| v.name();
            let mut out = String::from("n,cutoff,ratio,log_limit,fn_power,verdict,tail_condition,decay_condition\n");
            for k in 0..limit.n_grid.len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    limit.n_grid[k],
                    sig9(limit.cutoffs[k]),
                    sig9(limit.ratio_values[k]),
                    sig9(limit.log_limit_estimates[k]),
                    sig9(limit.fn_power_values[k]),
                    verdict(&limit.verdict),
                    verdict(&conditions.common_factor_tail.verdict),
                    verdict(&conditions.density_decay.verdict),
                ));
            }
            out
        }
    })
}

/// Snake-case names of verdict enums through their serde form.
mod erased {
    pub trait Verdict {
        fn name(&self) -> String;
    }

    impl<T: serde::Serialize> Verdict for T {
        fn name(&self) -> String {
            match serde_json::to_value(self) {
                Ok(serde_json::Value::String(s)) => s,
                _ => String::from("unknown"),
            }
        }
    }
}

fn quantile(a: &QuantileArgs, g: &Globals) -> Result<String> {
    let m = g.model(&a.model)?;
    let law = m.marginal();
    let mut out = Map::new();
    if let Some(q) = a.upper {
        out.insert("upper_quantile".into(), json!(law.upper_quantile(q)?));
    }
    if let Some(p) = a.lower {
        out.insert("quantile".into(), json!(law.quantile(p)?));
    }
    if let Some(alpha) = a.alpha {
        out.insert("bonferroni_cutoff".into(), json!(law.bonferroni_cutoff(m.n(), alpha)?));
    }
    if out.is_empty() {
        return Err(Error::Domain("give --upper, --lower or --alpha".into()));
    }
    let v = Value::Object(out);
    Ok(match g.format(OutputFormat::Json) {
        OutputFormat::Json => pretty(&v)?,
        OutputFormat::Csv => kv_csv(&v),
    })
}

fn gordon(a: &GordonArgs, g: &Globals) -> Result<String> {
    let cutoffs = match (&a.cutoffs, a.holm) {
        (Some(u), None) => CutoffVector::new(u.clone())?,
        (None, Some(n)) => holm_cutoffs(n, a.alpha)?,
        _ => return Err(Error::Domain("give exactly one of --cutoffs and --holm".into())),
    };
    let check = validate_gordon(&cutoffs, a.alpha);
    let v = serde_json::to_value(check)?;
    Ok(match g.format(OutputFormat::Json) {
        OutputFormat::Json => pretty(&v)?,
        OutputFormat::Csv => kv_csv(&v),
    })
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Domain(format!("column `{column}` not found in {}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let field = rec.get(idx).unwrap_or("");
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("row {}: `{field}` is not a number", line + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Domain(format!("{} has no rows", path.display())));
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("malformed CSV: {other:?}")),
    }
}

fn apply(a: &ApplyArgs, g: &Globals) -> Result<String> {
    let p = read_column(&a.pvalues, &a.column)?;
    let proc = match a.procedure {
        ProcedureName::Bonferroni => Procedure::Bonferroni,
        ProcedureName::Holm => Procedure::Holm,
    };
    let r = proc.apply(&p, a.alpha)?;
    Ok(match g.format(OutputFormat::Json) {
        OutputFormat::Json => pretty(&r)?,
        OutputFormat::Csv => {
            let mut out = String::from("index,p,rejected\n");
            for (i, v) in p.iter().enumerate() {
                out.push_str(&format!("{i},{v},{}\n", r.rejected_indices.binary_search(&i).is_ok()));
            }
            out
        }
    })
}
