//! Plain-text operator dump.
//!
//! ```text
//! # qbench-operator v1 dim=<n>
//! <BasisDescriptor as one line of JSON>
//! <n lines, each holding n "re im" pairs separated by spaces, row-major>
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a dump reads back bit-exact.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{BasisDescriptor, HermitianOperator, OperatorError};

const MAGIC: &str = "# qbench-operator v1 dim=";

fn fmt_err(e: impl std::fmt::Display) -> OperatorError {
    OperatorError::Format(e.to_string())
}

pub fn write_text<W: Write>(op: &HermitianOperator, mut w: W) -> Result<(), OperatorError> {
    let n = op.dim();
    writeln!(w, "{MAGIC}{n}").map_err(fmt_err)?;
    writeln!(w, "{}", serde_json::to_string(op.basis()).map_err(fmt_err)?).map_err(fmt_err)?;
    for r in 0..n {
        let row: Vec<String> = (0..n)
            .map(|c| {
                let z = op.matrix()[(r, c)];
                format!("{} {}", z.re, z.im)
            })
            .collect();
        writeln!(w, "{}", row.join(" ")).map_err(fmt_err)?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<HermitianOperator, OperatorError> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String, OperatorError> {
        lines
            .next()
            .ok_or_else(|| OperatorError::Format(format!("missing {what}")))?
            .map_err(fmt_err)
    };
    let header = next("header")?;
    let n: usize = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| OperatorError::Format(format!("bad header {header:?}")))?
        .trim()
        .parse()
        .map_err(fmt_err)?;
    let basis: BasisDescriptor = serde_json::from_str(&next("basis line")?).map_err(fmt_err)?;
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let line = next("matrix row")?;
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(fmt_err))
            .collect::<Result<_, _>>()?;
        if nums.len() != 2 * n {
            return Err(OperatorError::Format(format!(
                "row {row} has {} numbers, expected {}",
                nums.len(),
                2 * n
            )));
        }
        data.extend(nums.chunks(2).map(|p| Complex64::new(p[0], p[1])));
    }
    HermitianOperator::new(basis, DMatrix::from_row_slice(n, n, &data))
}
