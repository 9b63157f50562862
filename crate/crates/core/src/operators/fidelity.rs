//! Ultimate quantum fidelity via the partial transpose, and the conjugated-target check.

use serde::{Deserialize, Serialize};

use super::perelomov::build_a_perelomov_truncated;
use super::{
    max_eigenvalue, omega_perelomov_product, omega_qudit_product, qudit_eigenvalues, rescale_input, HermitianOperator,
    LadderTruncation, OperatorError,
};
use crate::benchmarks::{cft, EnsembleSpec};
use crate::ensembles::StateFamily;

/// Finite-dimensional model of a spec: qudit copies or ladder indices.
enum Model {
    Qudit { d: usize, n: u32, m: u32 },
    Ladder { k: f64, j: f64 },
}

fn model(spec: &EnsembleSpec) -> Result<Model, OperatorError> {
    spec.validate()?;
    if spec.k_weights.is_some() {
        return Err(OperatorError::Unsupported("k-copy mixtures".into()));
    }
    match spec.family {
        StateFamily::Qudit { d } => Ok(Model::Qudit { d, n: spec.n, m: spec.m }),
        // a spin-j coherent state is |ψ⟩^{⊗2j} of a qubit
        StateFamily::SpinCoherent { j, k } => Ok(Model::Qudit {
            d: 2,
            n: j.twice() * spec.n,
            m: k.twice() * spec.m,
        }),
        StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. } => {
            let (j, k) = spec.family.perelomov_indices().expect("ladder family");
            Ok(Model::Ladder { k, j })
        }
        other => Err(OperatorError::Unsupported(format!(
            "{} has no finite symmetric model",
            other.name()
        ))),
    }
}

fn omega_full(spec: &EnsembleSpec, n_max: usize) -> Result<(HermitianOperator, Vec<f64>), OperatorError> {
    let beta = spec.widths.beta;
    match model(spec)? {
        Model::Qudit { d, n, m } => Ok((omega_qudit_product(n, m, d, beta)?, qudit_eigenvalues(n, d, beta)?)),
        Model::Ladder { k, j } => {
            let om = omega_perelomov_product(k, j, spec.m, spec.n, beta, n_max, LadderTruncation::Box)?;
            let rho = (0..=n_max)
                .map(|i| super::ladder_weight(j * spec.n as f64, beta, i))
                .collect();
            Ok((om, rho))
        }
    }
}

/// The rescaled operator A for a spec: symmetric qudit spaces, or whole ladder
/// sectors up to `n_max` for squeezing families.
pub fn a_operator(spec: &EnsembleSpec, n_max: usize) -> Result<HermitianOperator, OperatorError> {
    let beta = spec.widths.beta;
    match model(spec)? {
        Model::Qudit { d, n, m } => super::build_a_qudit(n, m, d, beta),
        Model::Ladder { k, j } => super::build_a_perelomov(k, j, spec.m, spec.n, beta, n_max),
    }
}

/// ‖A^{T_in}‖ for the ensemble's own target. `n_max` is the ladder cutoff (ignored for qudits);
/// check it with [`super::require_cutoff`] when the tail matters.
pub fn quantum_fidelity_numeric(spec: &EnsembleSpec, n_max: usize) -> Result<f64, OperatorError> {
    let a = match model(spec)? {
        Model::Qudit { .. } => {
            let (mut om, rho) = omega_full(spec, n_max)?;
            rescale_input(&mut om, &rho)?;
            om
        }
        Model::Ladder { k, j } => {
            build_a_perelomov_truncated(k, j, spec.m, spec.n, spec.widths.beta, n_max, LadderTruncation::Box)?
        }
    };
    max_eigenvalue(&a.partial_transpose_input()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugationCheck {
    pub f_q: f64,
    pub f_c: f64,
    pub gap: f64,
}

/// Quantum fidelity for the conjugated target |ψ*_g⟩^{⊗M}, against the classical threshold.
///
/// Conjugating a Hermitian target transposes it, so Ω_conj = Ω^{T_out}; after rescaling
/// the input partial transpose undoes the rest.
pub fn conjugation_no_advantage_check(spec: &EnsembleSpec, n_max: usize) -> Result<ConjugationCheck, OperatorError> {
    let f_c = cft(spec)?.fidelity_threshold;
    let (om, rho) = omega_full(spec, n_max)?;
    let mut conj = om.partial_transpose_output()?;
    rescale_input(&mut conj, &rho)?;
    let f_q = max_eigenvalue(&conj.partial_transpose_input()?)?;
    Ok(ConjugationCheck {
        f_q,
        f_c,
        gap: f_q - f_c,
    })
}
