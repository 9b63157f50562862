//! Spec files, experiment records and the certification verdict.
//!
//! A record certifies quantum behaviour when its pooled fidelity exceeds the
//! benchmark of the declared ensemble by at least `z` standard errors. The
//! declared prior is taken on trust: a wrong declaration gives a wrong verdict.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{benchmark, BenchmarkError, BenchmarkValue, EnsembleSpec, FormulaId};
use crate::ensembles::{GroupPoint, StateFamily, Widths};

pub const SCHEMA: &str = "qbench/1";
pub const DEFAULT_Z: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("unsupported schema {found:?}, expected {SCHEMA:?}")]
    Schema { found: String },
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("ensemble not in the catalog: {0}")]
    UnsupportedEnsemble(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}

/// Family names accepted by spec files and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Qudit,
    Spin,
    Coherent,
    SqueezedVacuum,
    Gaussian1Mode,
    Perelomov,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        Self::Qudit,
        Self::Spin,
        Self::Coherent,
        Self::SqueezedVacuum,
        Self::Gaussian1Mode,
        Self::Perelomov,
    ];

    pub fn canonical(self) -> &'static str {
        match self {
            Self::Qudit => "qudit",
            Self::Spin => "spin",
            Self::Coherent => "coherent",
            Self::SqueezedVacuum => "squeezed_vacuum",
            Self::Gaussian1Mode => "gaussian_1mode",
            Self::Perelomov => "perelomov",
        }
    }

    pub fn of(family: &StateFamily) -> Self {
        match family {
            StateFamily::Qudit { .. } => Self::Qudit,
            StateFamily::SpinCoherent { .. } => Self::Spin,
            StateFamily::Coherent { .. } => Self::Coherent,
            StateFamily::SqueezedVacuum => Self::SqueezedVacuum,
            StateFamily::GaussianOneMode => Self::Gaussian1Mode,
            StateFamily::Perelomov { .. } => Self::Perelomov,
        }
    }
}

impl FromStr for FamilyKind {
    type Err = CertifyError;

    /// Case-insensitive; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "qudit" | "qubit" => Self::Qudit,
            "spin" | "spin_coherent" => Self::Spin,
            "coherent" => Self::Coherent,
            "squeezed_vacuum" | "squeezed" => Self::SqueezedVacuum,
            "gaussian_1mode" | "gaussian1mode" | "gaussian" => Self::Gaussian1Mode,
            "perelomov" => Self::Perelomov,
            _ => return Err(CertifyError::UnknownFamily(s.into())),
        })
    }
}

/// A gain written as a real number, `[re, im]`, or `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainValue {
    Real(f64),
    Pair([f64; 2]),
    Complex { re: f64, im: f64 },
}

impl GainValue {
    pub fn value(self) -> Complex64 {
        match self {
            Self::Real(x) => Complex64::new(x, 0.0),
            Self::Pair([re, im]) | Self::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

/// One ensemble as written in a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainValue>,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_weights: Option<Vec<f64>>,
    /// Closed form the file claims applies; checked against the oracle by `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula_id: Option<String>,
}

fn unsupported(msg: impl Into<String>) -> CertifyError {
    CertifyError::UnsupportedEnsemble(msg.into())
}

impl SpecFile {
    pub fn kind(&self) -> Result<FamilyKind, CertifyError> {
        self.family.parse()
    }

    pub fn family(&self) -> Result<StateFamily, CertifyError> {
        let wrap = |r: Result<StateFamily, crate::ensembles::EnsembleError>| {
            r.map_err(|e| unsupported(e.to_string()))
        };
        Ok(match self.kind()? {
            FamilyKind::Qudit => wrap(StateFamily::qudit(self.d.ok_or_else(|| unsupported("qudit needs d"))?))?,
            FamilyKind::Spin => {
                let j = self.j.ok_or_else(|| unsupported("spin needs j"))?;
                wrap(StateFamily::spin(j, self.k.unwrap_or(j)))?
            }
            FamilyKind::Coherent => {
                wrap(StateFamily::coherent(self.gain.map_or(Complex64::new(1.0, 0.0), GainValue::value)))?
            }
            FamilyKind::SqueezedVacuum => StateFamily::SqueezedVacuum,
            FamilyKind::Gaussian1Mode => StateFamily::GaussianOneMode,
            FamilyKind::Perelomov => {
                let j = self.j.ok_or_else(|| unsupported("perelomov needs j"))?;
                wrap(StateFamily::perelomov(j, self.k.unwrap_or(j)))?
            }
        })
    }

    pub fn to_spec(&self) -> Result<EnsembleSpec, CertifyError> {
        let family = self.family()?;
        let widths = Widths::both(self.lambda.unwrap_or(0.0), self.beta.unwrap_or(0.0));
        let spec = EnsembleSpec::new(family, self.n, self.m, widths).map_err(|e| unsupported(e.to_string()))?;
        match &self.k_weights {
            Some(w) => spec.with_k_weights(w.clone()).map_err(|e| unsupported(e.to_string())),
            None => Ok(spec),
        }
    }

    pub fn formula(&self) -> Result<Option<FormulaId>, CertifyError> {
        self.formula_id
            .as_deref()
            .map(|s| s.parse::<FormulaId>().map_err(CertifyError::from))
            .transpose()
    }

    /// The inverse of [`SpecFile::to_spec`].
    pub fn from_spec(spec: &EnsembleSpec) -> Self {
        let mut out = SpecFile {
            family: FamilyKind::of(&spec.family).canonical().into(),
            d: None,
            j: None,
            k: None,
            gain: None,
            n: spec.n,
            m: spec.m,
            beta: None,
            lambda: None,
            k_weights: spec.k_weights.clone(),
            formula_id: None,
        };
        match spec.family {
            StateFamily::Qudit { d } => out.d = Some(d),
            StateFamily::SpinCoherent { j, k } => {
                out.j = Some(j.value());
                out.k = Some(k.value());
            }
            StateFamily::Perelomov { j, k } => {
                out.j = Some(j.value());
                out.k = Some(k.value());
            }
            StateFamily::Coherent { gain } => {
                out.gain = Some(if gain.im == 0.0 { GainValue::Real(gain.re) } else { GainValue::Pair([gain.re, gain.im]) })
            }
            _ => {}
        }
        if spec.family.uses_beta() {
            out.beta = Some(spec.widths.beta);
        }
        if spec.family.uses_lambda() {
            out.lambda = Some(spec.widths.lambda);
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<SpecFile>),
    One(SpecFile),
}

fn parse_err(e: serde_json::Error) -> CertifyError {
    CertifyError::Parse(e.to_string())
}

/// A spec file holds one spec object or an array of them.
pub fn parse_spec_file(text: &str) -> Result<Vec<SpecFile>, CertifyError> {
    // parse as a value first so syntax errors keep their line and column
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    match serde_json::from_value::<OneOrMany>(value.clone()) {
        Ok(OneOrMany::Many(v)) => Ok(v),
        Ok(OneOrMany::One(s)) => Ok(vec![s]),
        Err(_) => {
            // re-run the specific shape for a useful message
            let err = match value {
                serde_json::Value::Array(_) => serde_json::from_value::<Vec<SpecFile>>(value).err(),
                _ => serde_json::from_value::<SpecFile>(value).err(),
            };
            Err(CertifyError::Parse(err.map_or("unrecognized spec".into(), |e| e.to_string())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampledTag {
    #[serde(rename = "sampled")]
    Sampled,
}

/// Where a run's inputs came from: drawn from the declared prior, or one fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputParams {
    Sampled(SampledTag),
    Point(GroupPoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Run {
    Counts {
        input_params: InputParams,
        passed: u64,
        tested: u64,
    },
    Mean {
        mean_fidelity: f64,
        stderr: f64,
        samples: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema: String,
    pub ensemble: SpecFile,
    pub runs: Vec<Run>,
}

impl ExperimentRecord {
    pub fn new(ensemble: SpecFile, runs: Vec<Run>) -> Self {
        Self {
            schema: SCHEMA.into(),
            ensemble,
            runs,
        }
    }

    pub fn validate(&self) -> Result<(), CertifyError> {
        if self.schema != SCHEMA {
            return Err(CertifyError::Schema {
                found: self.schema.clone(),
            });
        }
        if self.runs.is_empty() {
            return Err(CertifyError::InvalidRecord("no runs".into()));
        }
        for (i, r) in self.runs.iter().enumerate() {
            match *r {
                Run::Counts { passed, tested, .. } if passed > tested => {
                    return Err(CertifyError::InvalidRecord(format!("run {i}: passed {passed} > tested {tested}")))
                }
                Run::Counts { tested: 0, .. } => {
                    return Err(CertifyError::InvalidRecord(format!("run {i}: nothing tested")))
                }
                Run::Mean { stderr, mean_fidelity, .. } if !(stderr >= 0.0) || !stderr.is_finite() || !mean_fidelity.is_finite() => {
                    return Err(CertifyError::InvalidRecord(format!("run {i}: stderr must be finite and ≥ 0")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub fn parse_experiment(text: &str) -> Result<ExperimentRecord, CertifyError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    let rec: ExperimentRecord = serde_json::from_value(value).map_err(parse_err)?;
    rec.validate()?;
    Ok(rec)
}

/// Pooled fidelity estimate of a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pooled {
    pub observed: f64,
    pub stderr: f64,
    pub notes: Vec<String>,
}

/// Binomial counts are pooled into one proportion whose variance uses the
/// (passed+½)/(tested+1) estimate, so all-pass or all-fail counts keep a nonzero
/// error. That estimate and every mean/stderr run are then inverse-variance weighted.
pub fn pool(runs: &[Run]) -> Result<Pooled, CertifyError> {
    let mut notes = Vec::new();
    let (mut passed, mut tested, mut fixed_points) = (0u64, 0u64, 0usize);
    let mut estimates: Vec<(f64, f64)> = Vec::new();
    for r in runs {
        match r {
            Run::Counts {
                input_params,
                passed: p,
                tested: t,
            } => {
                passed += p;
                tested += t;
                if matches!(input_params, InputParams::Point(_)) {
                    fixed_points += 1;
                }
            }
            Run::Mean { mean_fidelity, stderr, .. } => estimates.push((*mean_fidelity, *stderr)),
        }
    }
    if fixed_points > 0 {
        notes.push(format!(
            "{fixed_points} run(s) at fixed input points pooled as prior samples"
        ));
    }
    if tested > 0 {
        let p = passed as f64 / tested as f64;
        let shrunk = (passed as f64 + 0.5) / (tested as f64 + 1.0);
        estimates.push((p, (shrunk * (1.0 - shrunk) / tested as f64).sqrt()));
    }
    if estimates.is_empty() {
        return Err(CertifyError::InvalidRecord("no runs".into()));
    }
    let exact: Vec<f64> = estimates.iter().filter(|e| e.1 == 0.0).map(|e| e.0).collect();
    if !exact.is_empty() {
        notes.push("zero-stderr runs dominate the pooled estimate".into());
        let observed = exact.iter().sum::<f64>() / exact.len() as f64;
        return Ok(Pooled {
            observed,
            stderr: 0.0,
            notes,
        });
    }
    let (mut wsum, mut xsum) = (0.0, 0.0);
    for (x, s) in &estimates {
        let w = 1.0 / (s * s);
        wsum += w;
        xsum += w * x;
    }
    Ok(Pooled {
        observed: xsum / wsum,
        stderr: (1.0 / wsum).sqrt(),
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub schema: String,
    pub benchmark: BenchmarkValue,
    pub observed: f64,
    pub stderr: f64,
    /// ±∞ (serialized as null) when the stderr is zero and observed differs from the threshold.
    pub z_score: f64,
    pub z_threshold: f64,
    pub certified_quantum: bool,
    pub notes: Vec<String>,
}

fn z_score(observed: f64, threshold: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        (observed - threshold) / stderr
    } else if observed == threshold {
        0.0
    } else {
        (observed - threshold).signum() * f64::INFINITY
    }
}

pub fn certify(record: &ExperimentRecord, z_threshold: f64) -> Result<Verdict, CertifyError> {
    record.validate()?;
    if !(z_threshold >= 0.0) || !z_threshold.is_finite() {
        return Err(CertifyError::InvalidRecord(format!("z threshold {z_threshold} must be finite and ≥ 0")));
    }
    let spec = record.ensemble.to_spec()?;
    let bench = benchmark(&spec).map_err(|e| unsupported(e.to_string()))?;
    let pooled = pool(&record.runs)?;
    let z = z_score(pooled.observed, bench.fidelity_threshold, pooled.stderr);
    let mut notes = pooled.notes;
    notes.push(format!("declared ensemble: {}", spec.family));
    Ok(Verdict {
        schema: SCHEMA.into(),
        certified_quantum: z >= z_threshold,
        benchmark: bench,
        observed: pooled.observed,
        stderr: pooled.stderr,
        z_score: z,
        z_threshold,
        notes,
    })
}
