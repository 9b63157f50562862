//! Ladder-basis operators for squeezing (Perelomov) ensembles, truncated at n_max.
//!
//! An N-copy Perelomov state of index j lives in the ladder of index jN, so the
//! input factor is the ladder |n⟩ of index jN and the output factor that of kM.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{rescale_input, BasisDescriptor, HermitianOperator, OperatorError};

/// How the output ⊗ input ladder product is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderTruncation {
    /// a + b ≤ n_max: whole total-number sectors, exact flat spectrum.
    Triangle,
    /// a, b ≤ n_max: needed for partial transposes.
    Box,
}

fn check_args(index: f64, beta: f64) -> Result<(), OperatorError> {
    if !(index > 0.0) || !index.is_finite() {
        return Err(OperatorError::Unsupported(format!("ladder index {index} must be > 0")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(OperatorError::Unsupported(format!(
            "β = {beta}: the squeezing prior is improper unless β > 0"
        )));
    }
    Ok(())
}

/// Weight of |n⟩ in the averaged state of ladder index `index`:
/// β·C(index+n−1, n) / ((2·index+β)·C(index+β/2+n, n)).
pub fn ladder_weight(index: f64, beta: f64, n: usize) -> f64 {
    let mut w = beta / (2.0 * index + beta);
    for i in 1..=n {
        let i = i as f64;
        w *= (index + i - 1.0) / (index + 0.5 * beta + i);
    }
    w
}

fn ladder_weights(index: f64, beta: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut w = beta / (2.0 * index + beta);
    out.push(w);
    for i in 1..=n_max {
        let x = i as f64;
        w *= (index + x - 1.0) / (index + 0.5 * beta + x);
        out.push(w);
    }
    out
}

/// Weight beyond n_max.
pub fn perelomov_tail_mass(index: f64, beta: f64, n_max: usize) -> Result<f64, OperatorError> {
    check_args(index, beta)?;
    let kept: f64 = ladder_weights(index, beta, n_max).iter().sum();
    Ok((1.0 - kept).max(0.0))
}

/// Check the dropped mass against `tol`; on failure suggest a cutoff from the
/// n^{−β/2} decay of the tail.
pub fn require_cutoff(index: f64, beta: f64, n_max: usize, tol: f64) -> Result<f64, OperatorError> {
    let tail = perelomov_tail_mass(index, beta, n_max)?;
    if tail <= tol {
        return Ok(tail);
    }
    let suggested = ((n_max + 1) as f64 * (tail / tol).powf(2.0 / beta)).ceil();
    Err(OperatorError::InsufficientCutoff { n_max, tail, suggested })
}

fn ladder(index: f64, n_max: usize) -> BasisDescriptor {
    BasisDescriptor::PerelomovLadder { index, n_max }
}

pub fn build_rho_perelomov(j: f64, n: u32, beta: f64, n_max: usize) -> Result<HermitianOperator, OperatorError> {
    let index = j * n as f64;
    check_args(index, beta)?;
    HermitianOperator::diagonal(ladder(index, n_max), &ladder_weights(index, beta, n_max))
}

/// Ω in its eigenbasis |Ψ_{M,N,m}⟩, m ≤ n_max.
pub fn build_omega_perelomov(
    k: f64,
    j: f64,
    m: u32,
    n: u32,
    beta: f64,
    n_max: usize,
) -> Result<HermitianOperator, OperatorError> {
    let index = k * m as f64 + j * n as f64;
    check_args(index, beta)?;
    HermitianOperator::diagonal(ladder(index, n_max), &ladder_weights(index, beta, n_max))
}

/// ln C(x+n−1, n) for n = 0..=len−1.
fn ln_rising(x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..len {
        let i = i as f64;
        acc += ((x + i - 1.0) / i).ln();
        out.push(acc);
    }
    out
}

/// Ω written on the truncated output ⊗ input ladder product.
pub fn omega_perelomov_product(
    k: f64,
    j: f64,
    m: u32,
    n: u32,
    beta: f64,
    n_max: usize,
    truncation: LadderTruncation,
) -> Result<HermitianOperator, OperatorError> {
    let (ko, ji) = (k * m as f64, j * n as f64);
    check_args(ko, beta)?;
    check_args(ji, beta)?;
    let max_total = match truncation {
        LadderTruncation::Triangle => Some(n_max),
        LadderTruncation::Box => None,
    };
    let basis = BasisDescriptor::Product {
        output: Box::new(ladder(ko, n_max)),
        input: Box::new(ladder(ji, n_max)),
        max_total,
    };
    let pairs = basis.pairs();
    let side = n_max + 1;
    let mut index = vec![usize::MAX; side * side];
    for (i, &(a, b)) in pairs.iter().enumerate() {
        index[a * side + b] = i;
    }
    let top = max_total.unwrap_or(2 * n_max);
    let omega = ladder_weights(ko + ji, beta, top);
    let (lo, li, lt) = (ln_rising(ko, top + 1), ln_rising(ji, top + 1), ln_rising(ko + ji, top + 1));
    let dim = pairs.len();
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    let mut comps = Vec::with_capacity(side);
    for (tot, &w) in omega.iter().enumerate() {
        comps.clear();
        for b in tot.saturating_sub(n_max)..=tot.min(n_max) {
            let a = tot - b;
            let c = (0.5 * (lo[a] + li[b] - lt[tot])).exp();
            comps.push((index[a * side + b], c));
        }
        for &(r, cr) in &comps {
            for &(col, cc) in &comps {
                mat[(r, col)] = Complex64::new(w * cr * cc, 0.0);
            }
        }
    }
    HermitianOperator::new(basis, mat)
}

/// Rescaled Ω on the given truncation.
pub(crate) fn build_a_perelomov_truncated(
    k: f64,
    j: f64,
    m: u32,
    n: u32,
    beta: f64,
    n_max: usize,
    truncation: LadderTruncation,
) -> Result<HermitianOperator, OperatorError> {
    let mut op = omega_perelomov_product(k, j, m, n, beta, n_max, truncation)?;
    rescale_input(&mut op, &ladder_weights(j * n as f64, beta, n_max))?;
    Ok(op)
}

/// A = (I ⊗ ρ^{−1/2}) Ω (I ⊗ ρ^{−1/2}) on whole sectors a + b ≤ n_max.
pub fn build_a_perelomov(
    k: f64,
    j: f64,
    m: u32,
    n: u32,
    beta: f64,
    n_max: usize,
) -> Result<HermitianOperator, OperatorError> {
    build_a_perelomov_truncated(k, j, m, n, beta, n_max, LadderTruncation::Triangle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{GroupPoint, PriorSpec, StateFamily, Widths};
    use crate::operators::{nonzero_spectrum, operator_norm};
    use crate::oracle::{integrate_prior, QuadratureConfig};
    use crate::special_math::{binom_real, partitions};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn first_weight_is_the_success_probability() {
        // both binomials are 1 at n = 0
        assert_relative_eq!(ladder_weight(0.5, 2.0, 0), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_match_binomial_form() {
        for (idx, beta) in [(0.5, 2.0), (1.5, 4.0), (3.0, 1.0)] {
            for n in 0..12u64 {
                let want = beta * binom_real(idx + n as f64 - 1.0, n).unwrap()
                    / ((2.0 * idx + beta) * binom_real(idx + 0.5 * beta + n as f64, n).unwrap());
                assert_relative_eq!(ladder_weight(idx, beta, n as usize), want, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn weights_match_quadrature_over_the_squeezing_prior() {
        // settles the β/2 convention: average |⟨n|ψ⟩|² of ladder states under the β prior
        let (idx, beta) = (1.5, 3.0);
        let prior = PriorSpec::new(StateFamily::SqueezedVacuum, Widths::beta(beta)).unwrap();
        let cfg = QuadratureConfig::default().with_nodes(96);
        for n in 0..6usize {
            let c = binom_real(idx + n as f64 - 1.0, n as u64).unwrap();
            let est = integrate_prior(&prior, idx, &cfg, |g| match g {
                GroupPoint::Squeezing { s, .. } => {
                    let t = s.tanh();
                    (1.0 - t * t).powf(idx) * c * t.powi(2 * n as i32)
                }
                _ => f64::NAN,
            })
            .unwrap();
            assert!((est.value - ladder_weight(idx, beta, n)).abs() < 1e-9, "n={n}: {} vs {}", est.value, ladder_weight(idx, beta, n));
        }
    }

    #[test]
    fn tail_of_a_polynomial_decay_is_reported() {
        let tail = perelomov_tail_mass(1.5, 4.0, 80).unwrap();
        assert!(tail > 1e-4 && tail < 1e-3, "{tail}");
        match require_cutoff(1.5, 4.0, 80, 1e-10) {
            Err(OperatorError::InsufficientCutoff { n_max, suggested, .. }) => {
                assert_eq!(n_max, 80);
                assert!(suggested > 80.0);
                assert!(perelomov_tail_mass(1.5, 4.0, 20_000).unwrap() < tail / 100.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(require_cutoff(0.5, 40.0, 200, 1e-10).is_ok());
        assert!(perelomov_tail_mass(0.5, 0.0, 10).is_err());
    }

    #[test]
    fn a_is_flat_on_whole_sectors() {
        let a = build_a_perelomov(1.0, 1.0, 1, 1, 2.0, 60).unwrap();
        let nz = nonzero_spectrum(&a, 1e-8).unwrap();
        assert_eq!(nz.len(), 61);
        for x in nz {
            assert_relative_eq!(x, 2.0 / 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn box_norm_equals_the_flat_value() {
        let (k, j, m, n, beta) = (0.5, 1.5, 2, 1, 2.5);
        let a = build_a_perelomov_truncated(k, j, m, n, beta, 30, LadderTruncation::Box).unwrap();
        let want = (2.0 * j * n as f64 + beta) / (2.0 * k * m as f64 + 2.0 * j * n as f64 + beta);
        assert_relative_eq!(operator_norm(&a).unwrap(), want, epsilon = 1e-10);
    }

    /// |Ψ^{(x)}_{copies,n}⟩ built from partitions of n over `copies` ladders of index x.
    fn copy_state(x: f64, copies: usize, n: u64, side: usize) -> Vec<f64> {
        let mut v = vec![0.0; side.pow(copies as u32)];
        let norm = binom_real(x * copies as f64 + n as f64 - 1.0, n).unwrap();
        for p in partitions(n, copies) {
            let mut amp = 1.0;
            let mut pos = 0;
            for &q in p.parts() {
                amp *= binom_real(x + q as f64 - 1.0, q).unwrap();
                pos = pos * side + q as usize;
            }
            v[pos] = (amp / norm).sqrt();
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn coupled_states_are_orthonormal(m in 1usize..=2, n in 1usize..=2, k in 1u32..=3, j in 1u32..=3) {
            let (k, j) = (0.5 * k as f64, 0.5 * j as f64);
            let side = 7usize;
            let copies = m + n;
            let (ko, ji) = (k * m as f64, j * n as f64);
            let (lo, li, lt) = (ln_rising(ko, 7), ln_rising(ji, 7), ln_rising(ko + ji, 7));
            let mut vecs = Vec::new();
            for tot in 0..=6u64 {
                // Clebsch combination of the M-copy output and N-copy input states
                let mut v = vec![0.0; side.pow(copies as u32)];
                for b in 0..=tot {
                    let a = tot - b;
                    let c = (0.5 * (lo[a as usize] + li[b as usize] - lt[tot as usize])).exp();
                    let out = copy_state(k, m, a, side);
                    let inp = copy_state(j, n, b, side);
                    for (x, ox) in out.iter().enumerate().filter(|e| *e.1 != 0.0) {
                        for (y, iy) in inp.iter().enumerate().filter(|e| *e.1 != 0.0) {
                            v[x * side.pow(n as u32) + y] += c * ox * iy;
                        }
                    }
                }
                // must equal the direct partition sum over all M+N ladders
                let mut direct = vec![0.0; side.pow(copies as u32)];
                let norm = binom_real(ko + ji + tot as f64 - 1.0, tot).unwrap();
                for p in partitions(tot, copies) {
                    let mut amp = 1.0;
                    let mut pos = 0;
                    for (slot, &q) in p.parts().iter().enumerate() {
                        let x = if slot < m { k } else { j };
                        amp *= binom_real(x + q as f64 - 1.0, q).unwrap();
                        pos = pos * side + q as usize;
                    }
                    direct[pos] = (amp / norm).sqrt();
                }
                for (a, b) in v.iter().zip(&direct) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
                vecs.push(v);
            }
            for (i, a) in vecs.iter().enumerate() {
                for (l, b) in vecs.iter().enumerate() {
                    let g: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    let want = if i == l { 1.0 } else { 0.0 };
                    prop_assert!((g - want).abs() < 1e-10);
                }
            }
        }
    }
}
