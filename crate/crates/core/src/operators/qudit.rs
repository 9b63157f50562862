//! Symmetric-subspace operators for qudit ensembles with the β prior.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{rescale_input, BasisDescriptor, HermitianOperator, OperatorError};
use crate::special_math::{binom_real, multinomial, multinomial_real, partitions, Partition};

fn check_args(copies: u32, d: usize, beta: f64) -> Result<(), OperatorError> {
    if d < 2 {
        return Err(OperatorError::Unsupported(format!("qudit dimension {d} < 2")));
    }
    if copies == 0 {
        return Err(OperatorError::Unsupported("zero copies".into()));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(OperatorError::Unsupported(format!("β = {beta} must be finite and ≥ 0")));
    }
    Ok(())
}

/// Coefficients √C(N,𝗇)·∏ c_j^{n_j} of |ψ⟩^{⊗N} on |N,𝗇⟩.
pub fn symmetric_embed(psi: &[Complex64], copies: u32) -> Result<Vec<Complex64>, OperatorError> {
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > 1e-10 {
        return Err(OperatorError::Unnormalized(norm2));
    }
    let d = psi.len();
    if d == 0 {
        return Err(OperatorError::Unsupported("empty state vector".into()));
    }
    partitions(copies as u64, d)
        .iter()
        .map(|p| {
            let mut amp = Complex64::new(multinomial(copies as u64, p)?.value.sqrt(), 0.0);
            for (c, &n) in psi.iter().zip(p.parts()) {
                amp *= c.powu(n as u32);
            }
            Ok(amp)
        })
        .collect()
}

/// Eigenvalues of the averaged N-copy state on |N,𝗇⟩, in basis order.
pub fn qudit_eigenvalues(copies: u32, d: usize, beta: f64) -> Result<Vec<f64>, OperatorError> {
    check_args(copies, d, beta)?;
    let n = copies as f64;
    let lead = binom_real(beta + (d - 1) as f64, d as u64 - 1)? / binom_real(n + beta + (d - 1) as f64, d as u64 - 1)?;
    partitions(copies as u64, d)
        .iter()
        .map(|p| {
            let mut shifted: Vec<f64> = p.parts().iter().map(|&x| x as f64).collect();
            shifted[0] += beta;
            let num = multinomial(copies as u64, p)?.ln_value;
            let den = multinomial_real(n + beta, &shifted)?.ln_value;
            Ok(lead * (num - den).exp())
        })
        .collect()
}

pub fn build_rho_qudit(copies: u32, d: usize, beta: f64) -> Result<HermitianOperator, OperatorError> {
    let ev = qudit_eigenvalues(copies, d, beta)?;
    HermitianOperator::diagonal(BasisDescriptor::SymmetricQudit { copies, d }, &ev)
}

/// Ω in its eigenbasis |M+N, 𝗍⟩.
pub fn build_omega_qudit(n: u32, m: u32, d: usize, beta: f64) -> Result<HermitianOperator, OperatorError> {
    build_rho_qudit(n + m, d, beta)
}

/// Ω written on |M,𝗆⟩ ⊗ |N,𝗇⟩ by splitting each |M+N,𝗍⟩.
pub fn omega_qudit_product(n: u32, m: u32, d: usize, beta: f64) -> Result<HermitianOperator, OperatorError> {
    check_args(n, d, beta)?;
    check_args(m, d, beta)?;
    let out_parts = partitions(m as u64, d);
    let in_parts = partitions(n as u64, d);
    let index_of = |list: &[Partition]| -> HashMap<Partition, usize> {
        list.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect()
    };
    let out_idx = index_of(&out_parts);
    let dim_in = in_parts.len();
    let total = (m + n) as u64;
    let omega = qudit_eigenvalues(n + m, d, beta)?;
    let mut mat = DMatrix::<Complex64>::zeros(out_parts.len() * dim_in, out_parts.len() * dim_in);
    for (t, w) in partitions(total, d).iter().zip(&omega) {
        let ln_t = multinomial(total, t)?.ln_value;
        let mut comps = Vec::new();
        for (b, pn) in in_parts.iter().enumerate() {
            let Some(pm) = t.checked_sub(pn) else { continue };
            let a = out_idx[&pm];
            let ln = multinomial(m as u64, &pm)?.ln_value + multinomial(n as u64, pn)?.ln_value - ln_t;
            comps.push((a * dim_in + b, (0.5 * ln).exp()));
        }
        for &(r, cr) in &comps {
            for &(c, cc) in &comps {
                mat[(r, c)] += Complex64::new(w * cr * cc, 0.0);
            }
        }
    }
    let basis = BasisDescriptor::Product {
        output: Box::new(BasisDescriptor::SymmetricQudit { copies: m, d }),
        input: Box::new(BasisDescriptor::SymmetricQudit { copies: n, d }),
        max_total: None,
    };
    HermitianOperator::new(basis, mat)
}

/// A = (I ⊗ ρ^{−1/2}) Ω (I ⊗ ρ^{−1/2}) on output ⊗ input symmetric spaces.
pub fn build_a_qudit(n: u32, m: u32, d: usize, beta: f64) -> Result<HermitianOperator, OperatorError> {
    let mut op = omega_qudit_product(n, m, d, beta)?;
    rescale_input(&mut op, &qudit_eigenvalues(n, d, beta)?)?;
    Ok(op)
}
