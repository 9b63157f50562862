//! Averaged operators ρ, Ω and the rescaled operator A on symmetric and ladder bases.

mod dump;
mod fidelity;
mod perelomov;
mod qudit;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::BenchmarkError;
use crate::ensembles::EnsembleError;
use crate::special_math::{binom_real, MathError};

pub use dump::{read_text, write_text};
pub use fidelity::{a_operator, conjugation_no_advantage_check, quantum_fidelity_numeric, ConjugationCheck};
pub use perelomov::{
    build_a_perelomov, build_omega_perelomov, build_rho_perelomov, ladder_weight, omega_perelomov_product,
    perelomov_tail_mass, require_cutoff, LadderTruncation,
};
pub use qudit::{
    build_a_qudit, build_omega_qudit, build_rho_qudit, omega_qudit_product, qudit_eigenvalues, symmetric_embed,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix shape {rows}x{cols} does not match basis dimension {dim}")]
    Shape { rows: usize, cols: usize, dim: usize },
    #[error("input vector is not normalized (norm² = {0})")]
    Unnormalized(f64),
    #[error("ρ has no support left after the pseudo-inverse threshold")]
    Singular,
    #[error("operation needs an untruncated product basis: {0}")]
    Truncated(String),
    #[error("cutoff n_max = {n_max} leaves tail mass {tail:e}; need n_max ≈ {suggested}")]
    InsufficientCutoff { n_max: usize, tail: f64, suggested: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("operator dump format: {0}")]
    Format(String),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}

/// Basis on which an operator's matrix is written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisDescriptor {
    /// |N, 𝗇⟩ over partitions of `copies` into `d` parts, in descending lexicographic order.
    SymmetricQudit { copies: u32, d: usize },
    /// Ladder |n⟩, n = 0..=n_max, of a squeezing representation with the given index.
    PerelomovLadder { index: f64, n_max: usize },
    /// Output ⊗ input; `max_total` keeps only pairs (a, b) with a + b ≤ max_total.
    Product {
        output: Box<BasisDescriptor>,
        input: Box<BasisDescriptor>,
        max_total: Option<usize>,
    },
}

impl BasisDescriptor {
    pub fn dimension(&self) -> usize {
        match self {
            Self::SymmetricQudit { copies, d } => {
                binom_real((*copies as usize + d - 1) as f64, *d as u64 - 1).expect("valid binomial") as usize
            }
            Self::PerelomovLadder { n_max, .. } => n_max + 1,
            Self::Product { .. } => self.pairs().len(),
        }
    }

    /// Factor indices (output, input) of each product-basis element, in basis order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match self {
            Self::Product {
                output,
                input,
                max_total,
            } => {
                let (da, db) = (output.dimension(), input.dimension());
                let mut v = Vec::with_capacity(da * db);
                for a in 0..da {
                    for b in 0..db {
                        if max_total.is_none_or(|t| a + b <= t) {
                            v.push((a, b));
                        }
                    }
                }
                v
            }
            _ => (0..self.dimension()).map(|i| (i, 0)).collect(),
        }
    }

    fn full_product_dims(&self) -> Result<(usize, usize), OperatorError> {
        match self {
            Self::Product {
                output,
                input,
                max_total: None,
            } => Ok((output.dimension(), input.dimension())),
            Self::Product { .. } => Err(OperatorError::Truncated("partial transpose".into())),
            _ => Err(OperatorError::Unsupported("partial transpose of a non-product basis".into())),
        }
    }
}

/// Dense Hermitian matrix tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    basis: BasisDescriptor,
    matrix: DMatrix<Complex64>,
}

const HERMITIAN_TOL: f64 = 1e-12;
const DENSE_LIMIT: usize = 2000;

impl HermitianOperator {
    pub fn new(basis: BasisDescriptor, matrix: DMatrix<Complex64>) -> Result<Self, OperatorError> {
        let dim = basis.dimension();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(OperatorError::Shape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dim,
            });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(OperatorError::NotHermitian(dev));
        }
        Ok(Self { basis, matrix })
    }

    pub fn diagonal(basis: BasisDescriptor, diag: &[f64]) -> Result<Self, OperatorError> {
        let m = DMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        Self::new(basis, m)
    }

    pub fn basis(&self) -> &BasisDescriptor {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// Partial transpose on the input factor: ⟨a,b|X|a',b'⟩ ↦ ⟨a,b'|X|a',b⟩.
    pub fn partial_transpose_input(mut self) -> Result<Self, OperatorError> {
        let (_, db) = self.basis.full_product_dims()?;
        permute_in_place(&mut self.matrix, |r, c| {
            let (a, b) = (r / db, r % db);
            let (a2, b2) = (c / db, c % db);
            (a * db + b2, a2 * db + b)
        });
        Ok(self)
    }

    /// Partial transpose on the output factor: ⟨a,b|X|a',b'⟩ ↦ ⟨a',b|X|a,b'⟩.
    pub fn partial_transpose_output(mut self) -> Result<Self, OperatorError> {
        let (_, db) = self.basis.full_product_dims()?;
        permute_in_place(&mut self.matrix, |r, c| {
            let (a, b) = (r / db, r % db);
            let (a2, b2) = (c / db, c % db);
            (a2 * db + b, a * db + b2)
        });
        Ok(self)
    }
}

/// Apply an involutive entry permutation in place.
fn permute_in_place(m: &mut DMatrix<Complex64>, image: impl Fn(usize, usize) -> (usize, usize)) {
    let n = m.nrows();
    for r in 0..n {
        for c in 0..n {
            let (r2, c2) = image(r, c);
            if (r2, c2) > (r, c) {
                let t = m[(r, c)];
                m[(r, c)] = m[(r2, c2)];
                m[(r2, c2)] = t;
            }
        }
    }
}

fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

/// Connected components of the nonzero pattern; the matrix is block diagonal over them.
fn sectors(m: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in 0..n {
        for r in 0..c {
            if m[(r, c)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

fn block(m: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// All eigenvalues, ascending, computed sector by sector.
pub fn spectrum(op: &HermitianOperator) -> Result<Vec<f64>, OperatorError> {
    let mut out = Vec::with_capacity(op.dim());
    for s in sectors(&op.matrix) {
        if s.len() > DENSE_LIMIT {
            return Err(OperatorError::Unsupported(format!(
                "dense spectrum of a {}-dimensional sector",
                s.len()
            )));
        }
        let b = block(&op.matrix, &s);
        out.extend(b.symmetric_eigenvalues().iter().copied());
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(out)
}

/// Eigenvalues above `rel_tol` times the largest magnitude.
pub fn nonzero_spectrum(op: &HermitianOperator, rel_tol: f64) -> Result<Vec<f64>, OperatorError> {
    let sp = spectrum(op)?;
    let top = sp.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(sp.into_iter().filter(|x| x.abs() > rel_tol * top).collect())
}

fn extreme_eigenvalue(op: &HermitianOperator, largest_magnitude: bool) -> Result<f64, OperatorError> {
    let mut best = f64::NEG_INFINITY;
    for s in sectors(&op.matrix) {
        let b = block(&op.matrix, &s);
        let v = if s.len() <= DENSE_LIMIT {
            let ev = b.symmetric_eigenvalues();
            if largest_magnitude {
                ev.iter().fold(0.0f64, |a, x| a.max(x.abs()))
            } else {
                ev.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x))
            }
        } else if largest_magnitude {
            power_iteration(&b, 0.0).abs().max(-power_iteration(&(-b.clone()), 0.0))
        } else {
            let shift = gershgorin_bound(&b);
            power_iteration(&b, shift) - shift
        };
        best = best.max(v);
    }
    Ok(best)
}

/// Largest eigenvalue magnitude ‖X‖_∞.
pub fn operator_norm(op: &HermitianOperator) -> Result<f64, OperatorError> {
    extreme_eigenvalue(op, true)
}

/// Largest (signed) eigenvalue.
pub fn max_eigenvalue(op: &HermitianOperator) -> Result<f64, OperatorError> {
    extreme_eigenvalue(op, false)
}

fn gershgorin_bound(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dominant eigenvalue of m + shift·I for a positive semidefinite shifted matrix.
fn power_iteration(m: &DMatrix<Complex64>, shift: f64) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.618_034).fract(), 0.0));
    v /= Complex64::new(v.norm(), 0.0);
    let mut lam = 0.0;
    for _ in 0..100_000 {
        let mut w = m * &v;
        w += &v * Complex64::new(shift, 0.0);
        let new = v.dotc(&w).re;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(norm, 0.0);
        if (new - lam).abs() <= 1e-14 * new.abs().max(1.0) {
            return new;
        }
        lam = new;
    }
    lam
}

/// Diagonal ρ^{−1/2} on the numerically nonzero spectrum (threshold 1e-12 relative).
fn inverse_sqrt(diag: &[f64]) -> Result<Vec<f64>, OperatorError> {
    let top = diag.iter().fold(0.0f64, |a, &x| a.max(x));
    if !(top > 0.0) {
        return Err(OperatorError::Singular);
    }
    Ok(diag
        .iter()
        .map(|&x| if x > 1e-12 * top { 1.0 / x.sqrt() } else { 0.0 })
        .collect())
}

/// (I ⊗ ρ^{−1/2}) Ω (I ⊗ ρ^{−1/2}) for diagonal ρ on the input factor, in place.
fn rescale_input(op: &mut HermitianOperator, rho_diag: &[f64]) -> Result<(), OperatorError> {
    let r = inverse_sqrt(rho_diag)?;
    let pairs = op.basis.pairs();
    let n = op.dim();
    for c in 0..n {
        let rc = r[pairs[c].1];
        for row in 0..n {
            let x = &mut op.matrix[(row, c)];
            if *x != Complex64::new(0.0, 0.0) {
                *x *= rc * r[pairs[row].1];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn norm_examples() {
        let basis = BasisDescriptor::PerelomovLadder { index: 1.0, n_max: 4 };
        let id = HermitianOperator::diagonal(basis, &[1.0; 5]).unwrap();
        assert_relative_eq!(operator_norm(&id).unwrap(), 1.0, epsilon = 1e-15);
        let basis = BasisDescriptor::PerelomovLadder { index: 1.0, n_max: 2 };
        let d = HermitianOperator::diagonal(basis, &[0.2, 0.7, 0.7]).unwrap();
        assert_relative_eq!(operator_norm(&d).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let basis = BasisDescriptor::PerelomovLadder { index: 1.0, n_max: 1 };
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.0), c(1.0)]);
        assert!(matches!(HermitianOperator::new(basis, m), Err(OperatorError::NotHermitian(_))));
    }

    #[test]
    fn power_iteration_matches_dense() {
        let n = 40;
        let m = DMatrix::from_fn(n, n, |r, cc| {
            let x = ((r * 7 + cc * 3) % 11) as f64 / 11.0 + ((r + cc) % 5) as f64 * 0.1;
            Complex64::new(x, 0.0)
        });
        let h = (&m + m.adjoint()) * c(0.5);
        let dense = h.symmetric_eigenvalues();
        let top = dense.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        let shift = gershgorin_bound(&h);
        assert_relative_eq!(power_iteration(&h, shift) - shift, top, epsilon = 1e-9);
    }

    #[test]
    fn sectors_split_block_diagonal_matrices() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[c(1.0), c(0.0), c(2.0), c(0.0), c(0.0), c(3.0), c(0.0), c(0.0), c(2.0), c(0.0), c(1.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0)],
        );
        let s = sectors(&m);
        assert_eq!(s, vec![vec![0, 2], vec![1], vec![3]]);
        let op = HermitianOperator::new(BasisDescriptor::PerelomovLadder { index: 1.0, n_max: 3 }, m).unwrap();
        let sp = spectrum(&op).unwrap();
        assert_eq!(sp.len(), 4);
        assert_relative_eq!(sp[3], 3.0, epsilon = 1e-14);
        assert_relative_eq!(sp[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(max_eigenvalue(&op).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_transposes_compose_to_full_transpose() {
        let out = BasisDescriptor::SymmetricQudit { copies: 1, d: 2 };
        let inp = BasisDescriptor::SymmetricQudit { copies: 2, d: 2 };
        let basis = BasisDescriptor::Product {
            output: Box::new(out),
            input: Box::new(inp),
            max_total: None,
        };
        let n = basis.dimension();
        assert_eq!(n, 6);
        let m = DMatrix::from_fn(n, n, |r, cc| Complex64::new((r + 2 * cc) as f64, r as f64 - cc as f64));
        let h = (&m + m.adjoint()) * c(0.5);
        let op = HermitianOperator::new(basis, h.clone()).unwrap();
        let pt = op.clone().partial_transpose_input().unwrap().partial_transpose_output().unwrap();
        assert_eq!(pt.matrix(), &h.transpose());
        let twice = op.clone().partial_transpose_input().unwrap().partial_transpose_input().unwrap();
        assert_eq!(twice, op);
    }

    #[test]
    fn truncated_product_refuses_partial_transpose() {
        let l = BasisDescriptor::PerelomovLadder { index: 0.5, n_max: 2 };
        let basis = BasisDescriptor::Product {
            output: Box::new(l.clone()),
            input: Box::new(l),
            max_total: Some(2),
        };
        assert_eq!(basis.dimension(), 6);
        let op = HermitianOperator::diagonal(basis, &[1.0; 6]).unwrap();
        assert!(matches!(op.partial_transpose_input(), Err(OperatorError::Truncated(_))));
    }

    #[test]
    fn pseudo_inverse_drops_null_directions() {
        let r = inverse_sqrt(&[0.25, 1e-20, 1.0]).unwrap();
        assert_eq!(r, vec![2.0, 0.0, 1.0]);
        assert!(inverse_sqrt(&[0.0, 0.0]).is_err());
    }
}
