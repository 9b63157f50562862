//! `verify`: closed form vs numerical oracle vs operator norm, per spec.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use qbench::benchmarks::{benchmark, evaluate_formula, BenchmarkValue, EnsembleSpec};
use qbench::certify::{SpecFile, SCHEMA};
use qbench::ensembles::StateFamily;
use qbench::operators::{a_operator, operator_norm, OperatorError};
use qbench::oracle::{cft_numeric, OracleError, QuadratureConfig, Scheme};
use serde::Serialize;

use crate::error::CliError;

pub const ORACLE_TOL: f64 = 1e-8;
pub const MC_SIGMAS: f64 = 3.0;
pub const QUDIT_NORM_TOL: f64 = 1e-9;
pub const LADDER_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    #[value(name = "gauss-legendre", alias = "gauss_legendre")]
    GaussLegendre,
    #[value(name = "monte-carlo", alias = "monte_carlo")]
    MonteCarlo,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub spec_file: PathBuf,
    #[arg(long, value_enum, default_value = "gauss-legendre")]
    pub scheme: SchemeArg,
    /// Gauss–Legendre nodes per radial coordinate.
    #[arg(long, default_value_t = 48)]
    pub nodes: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Fock cutoff for squeezing families.
    #[arg(long, default_value_t = 80)]
    pub n_max: usize,
    /// Emit the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

/// One numerical cross-check; `None` fields mean not applicable.
#[derive(Debug, Serialize)]
pub struct Check {
    pub value: Option<f64>,
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn skipped(note: String) -> Self {
        Self {
            value: None,
            delta: None,
            tolerance: None,
            passed: None,
            note: Some(note),
        }
    }

    fn compare(value: f64, reference: f64, tolerance: f64) -> Self {
        let delta = value - reference;
        Self {
            value: Some(value),
            delta: Some(delta),
            tolerance: Some(tolerance),
            passed: Some(delta.abs() <= tolerance),
            note: None,
        }
    }

    fn failed(note: String) -> Self {
        Self {
            passed: Some(false),
            ..Self::skipped(note)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub index: usize,
    pub spec: SpecFile,
    pub closed_form: Option<BenchmarkValue>,
    pub oracle_fidelity: Check,
    pub oracle_success_probability: Check,
    pub operator_norm: Check,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub scheme: Scheme,
    pub all_passed: bool,
    pub rows: Vec<Row>,
}

fn closed_form(file: &SpecFile, spec: &EnsembleSpec) -> Result<BenchmarkValue, String> {
    match file.formula().map_err(|e| e.to_string())? {
        Some(id) => evaluate_formula(&id, spec).map_err(|e| e.to_string()),
        None => benchmark(spec).map_err(|e| e.to_string()),
    }
}

fn oracle_checks(spec: &EnsembleSpec, closed: &BenchmarkValue, cfg: &QuadratureConfig) -> (Check, Check) {
    let num = match cft_numeric(spec, cfg) {
        Ok(n) => n,
        Err(OracleError::ImproperPrior(f)) => {
            let note = format!("improper prior on {f}");
            return (Check::skipped(note.clone()), Check::skipped(note));
        }
        Err(e) => return (Check::failed(e.to_string()), Check::skipped("oracle failed".into())),
    };
    let tol = |err: f64| match cfg.scheme {
        Scheme::GaussLegendre => ORACLE_TOL,
        Scheme::MonteCarlo => MC_SIGMAS * err + 1e-12,
    };
    let f = Check::compare(
        num.value.fidelity_threshold,
        closed.fidelity_threshold,
        tol(num.fidelity_error),
    );
    let p = match (num.value.success_probability, closed.success_probability) {
        (Some(pn), Some(pc)) => Check::compare(pn, pc, tol(num.success_probability_error.unwrap_or(0.0))),
        _ => Check::skipped("no success probability for this prior".into()),
    };
    (f, p)
}

fn norm_check(spec: &EnsembleSpec, closed: &BenchmarkValue, n_max: usize) -> Check {
    let tol = match spec.family {
        StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. } => LADDER_NORM_TOL,
        _ => QUDIT_NORM_TOL,
    };
    match a_operator(spec, n_max).and_then(|a| operator_norm(&a)) {
        Ok(norm) => Check::compare(norm, closed.fidelity_threshold, tol),
        Err(OperatorError::Unsupported(why)) => Check::skipped(why),
        Err(e) => Check::failed(e.to_string()),
    }
}

fn verify_one(index: usize, file: SpecFile, cfg: &QuadratureConfig, n_max: usize) -> Row {
    let fail = |file: SpecFile, msg: String| Row {
        index,
        spec: file,
        closed_form: None,
        oracle_fidelity: Check::skipped("not run".into()),
        oracle_success_probability: Check::skipped("not run".into()),
        operator_norm: Check::skipped("not run".into()),
        passed: false,
        error: Some(msg),
    };
    let spec = match file.to_spec() {
        Ok(s) => s,
        Err(e) => return fail(file, e.to_string()),
    };
    let closed = match closed_form(&file, &spec) {
        Ok(c) => c,
        Err(e) => return fail(file, e),
    };
    let (of, op) = oracle_checks(&spec, &closed, cfg);
    let norm = norm_check(&spec, &closed, n_max);
    let passed = [&of, &op, &norm].iter().all(|c| c.passed != Some(false));
    Row {
        index,
        spec: file,
        closed_form: Some(closed),
        oracle_fidelity: of,
        oracle_success_probability: op,
        operator_norm: norm,
        passed,
        error: None,
    }
}

pub fn build_report(files: Vec<SpecFile>, cfg: &QuadratureConfig, n_max: usize) -> Report {
    let rows: Vec<Row> = files
        .into_iter()
        .enumerate()
        .map(|(i, f)| verify_one(i, f, cfg, n_max))
        .collect();
    Report {
        schema: SCHEMA,
        scheme: cfg.scheme,
        all_passed: rows.iter().all(|r| r.passed),
        rows,
    }
}

fn cell(c: &Check) -> String {
    match (c.value, c.delta, c.passed) {
        (Some(v), Some(d), Some(ok)) => format!("{v:.12} ({d:+.1e}) {}", if ok { "ok" } else { "FAIL" }),
        (_, _, Some(false)) => format!("FAIL: {}", c.note.as_deref().unwrap_or("")),
        _ => "n/a".into(),
    }
}

fn table(r: &Report) -> String {
    let mut out = format!("{:<4} {:<16} {:<16} {:<34} {:<34}\n", "#", "family", "closed form", "oracle", "operator norm");
    for row in &r.rows {
        let cf = row
            .closed_form
            .as_ref()
            .map_or("-".to_string(), |c| format!("{:.12}", c.fidelity_threshold));
        out.push_str(&format!(
            "{:<4} {:<16} {:<16} {:<34} {:<34}{}\n",
            row.index,
            row.spec.family,
            cf,
            cell(&row.oracle_fidelity),
            cell(&row.operator_norm),
            row.error.as_ref().map_or(String::new(), |e| format!(" error: {e}")),
        ));
    }
    out.push_str(if r.all_passed { "all checks passed" } else { "verification FAILED" });
    out
}

pub fn run(a: &VerifyArgs) -> Result<(), CliError> {
    let mut cfg = match a.scheme {
        SchemeArg::GaussLegendre => QuadratureConfig::default(),
        SchemeArg::MonteCarlo => QuadratureConfig::monte_carlo(a.mc_samples, a.seed),
    };
    cfg = cfg.with_nodes(a.nodes);
    cfg.validate().map_err(CliError::usage)?;
    let files = crate::load_specs(&a.spec_file)?;
    let report = build_report(files, &cfg, a.n_max);
    let text = if a.json { crate::json(&report)? } else { table(&report) };
    crate::emit(&text)?;
    if report.all_passed {
        Ok(())
    } else {
        let bad: Vec<String> = report.rows.iter().filter(|r| !r.passed).map(|r| r.index.to_string()).collect();
        Err(CliError::Verification(format!("spec(s) {} out of tolerance", bad.join(", "))))
    }
}
