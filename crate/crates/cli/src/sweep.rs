//! `sweep`: the threshold surface over a grid of copy numbers and widths, as CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use qbench::benchmarks::benchmark;
use qbench::certify::FamilyKind;
use qbench::ensembles::StateFamily;

use crate::error::CliError;
use crate::family::FamilyParams;

pub const HEADER: [&str; 9] = ["family", "d_or_j", "k", "N", "M", "beta", "lambda", "F_c", "p_yes"];

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: FamilyParams,
    /// Inclusive range `a..b` or a list `1,2,5`.
    #[arg(long = "N-range", value_parser = parse_range)]
    pub n_range: CopyRange,
    #[arg(long = "M-range", value_parser = parse_range)]
    pub m_range: CopyRange,
    /// β values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub width_grid: Option<Vec<f64>>,
    /// λ values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyRange(pub Vec<u32>);

pub fn parse_range(s: &str) -> Result<CopyRange, String> {
    let s = s.trim();
    let bounds = s.split_once("..=").or_else(|| s.split_once(".."));
    let v: Vec<u32> = match bounds {
        Some((a, b)) => {
            let a: u32 = a.trim().parse().map_err(|e| format!("range start {a:?}: {e}"))?;
            let b: u32 = b.trim().parse().map_err(|e| format!("range end {b:?}: {e}"))?;
            (a..=b).collect()
        }
        None => s
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<_, _>>()?,
    };
    if v.is_empty() {
        return Err(format!("range {s:?} is empty"));
    }
    if v.contains(&0) {
        return Err(format!("range {s:?} contains 0; copy numbers start at 1"));
    }
    Ok(CopyRange(v))
}

fn shape_columns(family: &StateFamily) -> (String, String) {
    match *family {
        StateFamily::Qudit { d } => (d.to_string(), String::new()),
        StateFamily::SpinCoherent { j, k } => (j.value().to_string(), k.value().to_string()),
        StateFamily::Perelomov { j, k } => (j.value().to_string(), k.value().to_string()),
        StateFamily::Coherent { gain } => (String::new(), gain.norm_sqr().to_string()),
        StateFamily::SqueezedVacuum | StateFamily::GaussianOneMode => (String::new(), String::new()),
    }
}

fn grid(given: &Option<Vec<f64>>, used: bool) -> Vec<Option<f64>> {
    match given {
        Some(v) => v.iter().copied().map(Some).collect(),
        None if used => vec![Some(0.0)],
        None => vec![None],
    }
}

/// All rows, row-major over N, M, β, λ.
pub fn rows(a: &SweepArgs) -> Result<Vec<[String; 9]>, CliError> {
    let mut widths = Vec::new();
    if a.width_grid.is_some() {
        widths.push("beta");
    }
    if a.lambda_grid.is_some() {
        widths.push("lambda");
    }
    let kind: FamilyKind = a.params.check(&widths)?;
    for (name, g) in [("--width-grid", &a.width_grid), ("--lambda-grid", &a.lambda_grid)] {
        if g.as_ref().is_some_and(|v| v.is_empty()) {
            return Err(CliError::Usage(format!("{name} is empty")));
        }
    }
    let probe = a.params.spec_file(kind, 1, 1, None, None).family().map_err(CliError::usage)?;
    let betas = grid(&a.width_grid, probe.uses_beta());
    let lambdas = grid(&a.lambda_grid, probe.uses_lambda());
    let (c1, c2) = shape_columns(&probe);
    let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let mut out = Vec::new();
    for &n in &a.n_range.0 {
        for &m in &a.m_range.0 {
            for &beta in &betas {
                for &lambda in &lambdas {
                    let spec = a.params.spec_file(kind, n, m, beta, lambda).to_spec().map_err(CliError::usage)?;
                    let v = benchmark(&spec).map_err(CliError::usage)?;
                    out.push([
                        kind.canonical().to_string(),
                        c1.clone(),
                        c2.clone(),
                        n.to_string(),
                        m.to_string(),
                        fmt(beta),
                        fmt(lambda),
                        v.fidelity_threshold.to_string(),
                        fmt(v.success_probability),
                    ]);
                }
            }
        }
    }
    Ok(out)
}

fn write_csv<W: Write>(w: W, rows: &[[String; 9]]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(HEADER).map_err(io)?;
    for r in rows {
        wr.write_record(r).map_err(io)?;
    }
    wr.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn run(a: &SweepArgs) -> Result<(), CliError> {
    let rows = rows(a)?;
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            write_csv(std::io::BufWriter::new(f), &rows)
        }
        None => write_csv(std::io::stdout().lock(), &rows),
    }
}
