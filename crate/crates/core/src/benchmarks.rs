//! Closed-form classical fidelity thresholds and success probabilities.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{EnsembleError, PriorSpec, Spin, StateFamily, Widths};
use crate::special_math::{binom_real, MathError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
    #[error("k-copy benchmark needs k_weights")]
    MissingWeights,
    #[error("success probability undefined: improper uniform prior on {0}")]
    ImproperPrior(String),
    #[error("unknown formula id `{0}`")]
    UnknownFormula(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// A benchmark query: family, copy numbers and prior widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: StateFamily,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u32,
    pub widths: Widths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_weights: Option<Vec<f64>>,
}

impl EnsembleSpec {
    pub fn new(family: StateFamily, n: u32, m: u32, widths: Widths) -> Result<Self, BenchmarkError> {
        let spec = Self {
            family,
            n,
            m,
            widths,
            k_weights: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_k_weights(mut self, weights: Vec<f64>) -> Result<Self, BenchmarkError> {
        self.k_weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        self.family.validate()?;
        self.widths.validate()?;
        if self.n == 0 {
            return Err(BenchmarkError::InvalidSpec("N must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(BenchmarkError::InvalidSpec("M must be at least 1".into()));
        }
        if let Some(w) = &self.k_weights {
            if w.len() != self.m as usize {
                return Err(BenchmarkError::InvalidSpec(format!(
                    "k_weights has {} entries, expected M = {}",
                    w.len(),
                    self.m
                )));
            }
            if w.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(BenchmarkError::InvalidSpec("k_weights must be non-negative".into()));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(BenchmarkError::InvalidSpec(format!("k_weights sum to {s}, not 1")));
            }
        }
        Ok(())
    }

    pub fn prior(&self) -> PriorSpec {
        PriorSpec {
            family: self.family,
            widths: self.widths,
        }
    }

    pub fn with_m(&self, m: u32) -> Self {
        Self {
            m,
            k_weights: None,
            ..self.clone()
        }
    }
}

/// Which closed form produced a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormulaId {
    Qudit,
    Spin,
    Coherent,
    Perelomov,
    SqueezedVacuum,
    Gaussian1Mode,
    KCopy(Box<FormulaId>),
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Qudit => f.write_str("qudit"),
            Self::Spin => f.write_str("spin"),
            Self::Coherent => f.write_str("coherent"),
            Self::Perelomov => f.write_str("perelomov"),
            Self::SqueezedVacuum => f.write_str("squeezed_vacuum"),
            Self::Gaussian1Mode => f.write_str("gaussian_1mode"),
            Self::KCopy(inner) => write!(f, "kcopy:{inner}"),
        }
    }
}

impl FromStr for FormulaId {
    type Err = BenchmarkError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("kcopy:") {
            return Ok(Self::KCopy(Box::new(rest.parse()?)));
        }
        Ok(match s {
            "qudit" => Self::Qudit,
            "spin" => Self::Spin,
            "coherent" => Self::Coherent,
            "perelomov" => Self::Perelomov,
            "squeezed_vacuum" => Self::SqueezedVacuum,
            "gaussian_1mode" => Self::Gaussian1Mode,
            other => return Err(BenchmarkError::UnknownFormula(other.into())),
        })
    }
}

impl Serialize for FormulaId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FormulaId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    /// Closed form whose validity off integer widths rests on numerical checks.
    ClosedFormNumericallyVerified,
    Quadrature,
    MonteCarlo,
}

/// A classical fidelity threshold with the success probability of the protocol achieving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkValue {
    pub fidelity_threshold: f64,
    /// `None` where the prior is a flat limit on a noncompact family.
    pub success_probability: Option<f64>,
    pub formula_id: FormulaId,
    pub provenance: Provenance,
}

fn closed(f: f64, p: Option<f64>, id: FormulaId) -> BenchmarkValue {
    BenchmarkValue {
        fidelity_threshold: f,
        success_probability: p,
        formula_id: id,
        provenance: Provenance::ClosedForm,
    }
}

fn check_copies(n: u32, m: u32) -> Result<(), BenchmarkError> {
    if n == 0 || m == 0 {
        return Err(BenchmarkError::InvalidSpec(format!("N = {n}, M = {m}: both must be ≥ 1")));
    }
    Ok(())
}

fn check_width(name: &str, v: f64) -> Result<(), BenchmarkError> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(BenchmarkError::InvalidSpec(format!("{name} = {v} must be finite and ≥ 0")));
    }
    Ok(())
}

pub fn cft_qudit(d: usize, n: u32, m: u32, beta: f64) -> Result<BenchmarkValue, BenchmarkError> {
    StateFamily::qudit(d)?;
    check_copies(n, m)?;
    check_width("beta", beta)?;
    let k = d as u64 - 1;
    let (nf, mf, dm1) = (n as f64, m as f64, k as f64);
    let num = binom_real(nf + beta + dm1, k)?;
    let den = binom_real(mf + nf + beta + dm1, k)?;
    let p = binom_real(beta + dm1, k)? / num;
    Ok(closed(num / den, Some(p), FormulaId::Qudit))
}

pub fn cft_spin(j: Spin, k: Spin, n: u32, m: u32, beta: f64) -> Result<BenchmarkValue, BenchmarkError> {
    check_copies(n, m)?;
    check_width("beta", beta)?;
    let jn = (j.twice() * n) as f64;
    let km = (k.twice() * m) as f64;
    let f = (jn + beta + 1.0) / (jn + km + beta + 1.0);
    let p = (beta + 1.0) / (jn + beta + 1.0);
    Ok(closed(f, Some(p), FormulaId::Spin))
}

pub fn cft_coherent(n: u32, m: u32, gain: Complex64, lambda: f64) -> Result<BenchmarkValue, BenchmarkError> {
    StateFamily::coherent(gain)?;
    check_copies(n, m)?;
    check_width("lambda", lambda)?;
    let nf = n as f64;
    let f = (nf + lambda) / (m as f64 * gain.norm_sqr() + nf + lambda);
    let p = (lambda > 0.0).then(|| lambda / (nf + lambda));
    Ok(closed(f, p, FormulaId::Coherent))
}

pub fn cft_perelomov(j: f64, k: f64, n: u32, m: u32, beta: f64) -> Result<BenchmarkValue, BenchmarkError> {
    StateFamily::perelomov(j, k)?;
    check_copies(n, m)?;
    check_width("beta", beta)?;
    let jn = 2.0 * j * n as f64;
    let km = 2.0 * k * m as f64;
    let f = (jn + beta) / (km + jn + beta);
    let p = (beta > 0.0).then(|| beta / (jn + beta));
    Ok(closed(f, p, FormulaId::Perelomov))
}

pub fn cft_squeezed_vacuum(n: u32, m: u32, beta: f64) -> Result<BenchmarkValue, BenchmarkError> {
    let mut v = cft_perelomov(0.5, 0.5, n, m, beta)?;
    v.formula_id = FormulaId::SqueezedVacuum;
    Ok(v)
}

/// Product of the unit-gain coherent and squeezed-vacuum thresholds.
pub fn cft_gaussian_1mode(n: u32, m: u32, lambda: f64, beta: f64) -> Result<BenchmarkValue, BenchmarkError> {
    let c = cft_coherent(n, m, Complex64::new(1.0, 0.0), lambda)?;
    let s = cft_squeezed_vacuum(n, m, beta)?;
    let p = match (c.success_probability, s.success_probability) {
        (Some(a), Some(b)) => Some(a * b),
        _ => None,
    };
    let provenance = if lambda.fract() == 0.0 && beta.fract() == 0.0 {
        Provenance::ClosedForm
    } else {
        Provenance::ClosedFormNumericallyVerified
    };
    Ok(BenchmarkValue {
        fidelity_threshold: c.fidelity_threshold * s.fidelity_threshold,
        success_probability: p,
        formula_id: FormulaId::Gaussian1Mode,
        provenance,
    })
}

/// The M-copy threshold for the ensemble's family (ignores `k_weights`).
pub fn cft(spec: &EnsembleSpec) -> Result<BenchmarkValue, BenchmarkError> {
    spec.validate()?;
    let Widths { beta, lambda } = spec.widths;
    let (n, m) = (spec.n, spec.m);
    match spec.family {
        StateFamily::Qudit { d } => cft_qudit(d, n, m, beta),
        StateFamily::SpinCoherent { j, k } => cft_spin(j, k, n, m, beta),
        StateFamily::Coherent { gain } => cft_coherent(n, m, gain, lambda),
        StateFamily::SqueezedVacuum => cft_squeezed_vacuum(n, m, beta),
        StateFamily::GaussianOneMode => cft_gaussian_1mode(n, m, lambda, beta),
        StateFamily::Perelomov { j, k } => cft_perelomov(j.value(), k.value(), n, m, beta),
    }
}

/// Σ_k p(k)·F_c(M = k).
pub fn cft_kcopy(spec: &EnsembleSpec) -> Result<BenchmarkValue, BenchmarkError> {
    spec.validate()?;
    let weights = spec.k_weights.as_ref().ok_or(BenchmarkError::MissingWeights)?;
    let mut f = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        let v = cft(&spec.with_m(i as u32 + 1))?;
        f += w * v.fidelity_threshold;
        last = Some(v);
    }
    let base = last.expect("M ≥ 1 so at least one weight");
    Ok(BenchmarkValue {
        fidelity_threshold: f,
        success_probability: base.success_probability,
        formula_id: FormulaId::KCopy(Box::new(base.formula_id)),
        provenance: base.provenance,
    })
}

/// The k-copy threshold when weights are present, otherwise the M-copy one.
pub fn benchmark(spec: &EnsembleSpec) -> Result<BenchmarkValue, BenchmarkError> {
    if spec.k_weights.is_some() {
        cft_kcopy(spec)
    } else {
        cft(spec)
    }
}

/// Average probability that the optimal protocol accepts its input.
pub fn success_probability(spec: &EnsembleSpec) -> Result<f64, BenchmarkError> {
    cft(spec)?
        .success_probability
        .ok_or_else(|| BenchmarkError::ImproperPrior(spec.family.name().into()))
}

/// Evaluate the closed form named by `id` on the numeric parameters of `spec`.
///
/// Parameters the ensemble does not carry take their neutral values (d = 2,
/// j = k = 1/2, g = 1). Used to run a formula against a spec it was not derived for.
pub fn evaluate_formula(id: &FormulaId, spec: &EnsembleSpec) -> Result<BenchmarkValue, BenchmarkError> {
    let Widths { beta, lambda } = spec.widths;
    let (n, m) = (spec.n, spec.m);
    let d = match spec.family {
        StateFamily::Qudit { d } => d,
        _ => 2,
    };
    let (sj, sk) = match spec.family {
        StateFamily::SpinCoherent { j, k } => (j, k),
        _ => (Spin::from_twice(1)?, Spin::from_twice(1)?),
    };
    let (pj, pk) = spec.family.perelomov_indices().unwrap_or((0.5, 0.5));
    let gain = match spec.family {
        StateFamily::Coherent { gain } => gain,
        _ => Complex64::new(1.0, 0.0),
    };
    match id {
        FormulaId::Qudit => cft_qudit(d, n, m, beta),
        FormulaId::Spin => cft_spin(sj, sk, n, m, beta),
        FormulaId::Coherent => cft_coherent(n, m, gain, lambda),
        FormulaId::Perelomov => cft_perelomov(pj, pk, n, m, beta),
        FormulaId::SqueezedVacuum => cft_squeezed_vacuum(n, m, beta),
        FormulaId::Gaussian1Mode => cft_gaussian_1mode(n, m, lambda, beta),
        FormulaId::KCopy(inner) => {
            let weights = spec.k_weights.as_ref().ok_or(BenchmarkError::MissingWeights)?;
            let mut f = 0.0;
            for (i, &w) in weights.iter().enumerate() {
                f += w * evaluate_formula(inner, &spec.with_m(i as u32 + 1))?.fidelity_threshold;
            }
            let mut v = evaluate_formula(inner, spec)?;
            v.fidelity_threshold = f;
            v.formula_id = id.clone();
            Ok(v)
        }
    }
}
