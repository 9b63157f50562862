//! State families, group-point parametrizations, priors and exact samplers.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special_math::{binom_real, MathError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),
    #[error("invalid prior width: {0}")]
    InvalidWidth(String),
    #[error("group point {point} does not belong to family {family}")]
    VariantMismatch { family: String, point: String },
    #[error("improper uniform prior is not samplable ({0})")]
    ImproperPrior(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// A spin quantum number stored as `2j`, so that half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Spin(u32);

impl Spin {
    pub fn from_twice(twice: u32) -> Result<Self, EnsembleError> {
        if twice == 0 {
            return Err(EnsembleError::InvalidFamily("spin must be positive".into()));
        }
        Ok(Self(twice))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl TryFrom<f64> for Spin {
    type Error = EnsembleError;
    fn try_from(j: f64) -> Result<Self, Self::Error> {
        let t = 2.0 * j;
        if !(t > 0.0) || t.fract() != 0.0 || t > u32::MAX as f64 {
            return Err(EnsembleError::InvalidFamily(format!(
                "spin {j} is not a positive half-integer"
            )));
        }
        Ok(Self(t as u32))
    }
}

impl From<Spin> for f64 {
    fn from(s: Spin) -> f64 {
        s.value()
    }
}

/// Positive real index of a Perelomov squeezed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PerelomovIndex(f64);

impl PerelomovIndex {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PerelomovIndex {
    type Error = EnsembleError;
    fn try_from(j: f64) -> Result<Self, Self::Error> {
        if !(j > 0.0) || !j.is_finite() {
            return Err(EnsembleError::InvalidFamily(format!(
                "Perelomov index {j} must be positive and finite"
            )));
        }
        Ok(Self(j))
    }
}

impl From<PerelomovIndex> for f64 {
    fn from(p: PerelomovIndex) -> f64 {
        p.0
    }
}

/// Input family together with its output family.
///
/// Only the pairings that have a benchmark are representable: a spin `j → k`
/// stretch, a coherent amplifier with gain `g`, a Perelomov `j → k` map, and the
/// identity map for qudits, the squeezed vacuum and one-mode Gaussian states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFamily {
    Qudit { d: usize },
    SpinCoherent { j: Spin, k: Spin },
    Coherent { gain: Complex64 },
    SqueezedVacuum,
    GaussianOneMode,
    Perelomov { j: PerelomovIndex, k: PerelomovIndex },
}

impl StateFamily {
    pub fn qudit(d: usize) -> Result<Self, EnsembleError> {
        if d < 2 {
            return Err(EnsembleError::InvalidFamily(format!("qudit dimension {d} < 2")));
        }
        Ok(Self::Qudit { d })
    }

    pub fn spin(j: f64, k: f64) -> Result<Self, EnsembleError> {
        Ok(Self::SpinCoherent {
            j: Spin::try_from(j)?,
            k: Spin::try_from(k)?,
        })
    }

    pub fn coherent(gain: Complex64) -> Result<Self, EnsembleError> {
        if !(gain.norm() > 0.0) || !gain.norm().is_finite() {
            return Err(EnsembleError::InvalidFamily(format!("gain {gain} must be nonzero")));
        }
        Ok(Self::Coherent { gain })
    }

    pub fn perelomov(j: f64, k: f64) -> Result<Self, EnsembleError> {
        Ok(Self::Perelomov {
            j: PerelomovIndex::try_from(j)?,
            k: PerelomovIndex::try_from(k)?,
        })
    }

    /// Re-check the invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), EnsembleError> {
        match *self {
            Self::Qudit { d } => Self::qudit(d).map(|_| ()),
            Self::Coherent { gain } => Self::coherent(gain).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Qudit { .. } => "qudit",
            Self::SpinCoherent { .. } => "spin",
            Self::Coherent { .. } => "coherent",
            Self::SqueezedVacuum => "squeezed_vacuum",
            Self::GaussianOneMode => "gaussian_1mode",
            Self::Perelomov { .. } => "perelomov",
        }
    }

    /// Whether the group manifold is compact (uniform prior is normalizable).
    pub fn is_compact(&self) -> bool {
        matches!(self, Self::Qudit { .. } | Self::SpinCoherent { .. })
    }

    /// Input and output Perelomov indices; the squeezed vacuum is j = k = 1/2.
    pub fn perelomov_indices(&self) -> Option<(f64, f64)> {
        match self {
            Self::SqueezedVacuum => Some((0.5, 0.5)),
            Self::Perelomov { j, k } => Some((j.value(), k.value())),
            _ => None,
        }
    }

    pub fn uses_beta(&self) -> bool {
        !matches!(self, Self::Coherent { .. })
    }

    pub fn uses_lambda(&self) -> bool {
        matches!(self, Self::Coherent { .. } | Self::GaussianOneMode)
    }

    /// The group point whose state is the fiducial state.
    pub fn fiducial_point(&self) -> GroupPoint {
        match *self {
            Self::Qudit { d } => GroupPoint::QuditAngles {
                theta: vec![0.0; d - 1],
                phi: vec![0.0; d - 1],
            },
            Self::SpinCoherent { .. } => GroupPoint::BlochAngles { theta: 0.0, phi: 0.0 },
            Self::Coherent { .. } => GroupPoint::Displacement {
                alpha: Complex64::new(0.0, 0.0),
            },
            Self::SqueezedVacuum | Self::Perelomov { .. } => {
                GroupPoint::Squeezing { s: 0.0, theta: 0.0 }
            }
            Self::GaussianOneMode => GroupPoint::DisplacedSqueezing {
                alpha: Complex64::new(0.0, 0.0),
                s: 0.0,
                theta: 0.0,
            },
        }
    }

    fn mismatch(&self, g: &GroupPoint) -> EnsembleError {
        EnsembleError::VariantMismatch {
            family: self.name().into(),
            point: g.variant_name().into(),
        }
    }

    /// Single-copy |⟨φ|φ_g⟩|² of the input state against the fiducial state.
    pub fn input_overlap_sq(&self, g: &GroupPoint) -> Result<f64, EnsembleError> {
        match (self, g) {
            (Self::Qudit { d }, GroupPoint::QuditAngles { theta, .. }) if theta.len() == d - 1 => {
                Ok(theta[0].cos().powi(2))
            }
            (Self::SpinCoherent { j, .. }, GroupPoint::BlochAngles { theta, .. }) => {
                Ok((0.5 * theta).cos().powi(2).powi(j.twice() as i32))
            }
            (Self::Coherent { .. }, GroupPoint::Displacement { alpha }) => {
                Ok((-alpha.norm_sqr()).exp())
            }
            (Self::SqueezedVacuum, GroupPoint::Squeezing { s, .. }) => Ok(1.0 / s.cosh()),
            (Self::Perelomov { j, .. }, GroupPoint::Squeezing { s, .. }) => {
                Ok(s.cosh().powf(-2.0 * j.value()))
            }
            (Self::GaussianOneMode, GroupPoint::DisplacedSqueezing { alpha, s, theta }) => {
                Ok(gaussian_overlap_sq(*alpha, *s, *theta))
            }
            _ => Err(self.mismatch(g)),
        }
    }

    /// Single-copy |⟨ψ|ψ_g⟩|² of the output state against the output fiducial state.
    pub fn target_overlap_sq(&self, g: &GroupPoint) -> Result<f64, EnsembleError> {
        match (self, g) {
            (Self::SpinCoherent { k, .. }, GroupPoint::BlochAngles { theta, .. }) => {
                Ok((0.5 * theta).cos().powi(2).powi(k.twice() as i32))
            }
            (Self::Coherent { gain }, GroupPoint::Displacement { alpha }) => {
                Ok((-gain.norm_sqr() * alpha.norm_sqr()).exp())
            }
            (Self::Perelomov { k, .. }, GroupPoint::Squeezing { s, .. }) => {
                Ok(s.cosh().powf(-2.0 * k.value()))
            }
            _ => self.input_overlap_sq(g),
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Qudit { d } => write!(f, "qudit(d={d})"),
            Self::SpinCoherent { j, k } => write!(f, "spin(j={}, k={})", j.value(), k.value()),
            Self::Coherent { gain } => write!(f, "coherent(g={gain})"),
            Self::SqueezedVacuum => write!(f, "squeezed_vacuum"),
            Self::GaussianOneMode => write!(f, "gaussian_1mode"),
            Self::Perelomov { j, k } => write!(f, "perelomov(j={}, k={})", j.value(), k.value()),
        }
    }
}

/// (1−t)X² + (1+t)Y² with t = tanh s and X + iY = e^{−iθ/2}α.
///
/// Equals |α|² − Re(e^{−iθ}α²) tanh s, written so that it stays accurate when
/// both terms are huge at large squeezing.
pub fn squeeze_quadratic(alpha: Complex64, s: f64, theta: f64) -> f64 {
    let r = Complex64::from_polar(1.0, -0.5 * theta) * alpha;
    let (one_minus_t, one_plus_t) = tanh_complements(s);
    one_minus_t * r.re * r.re + one_plus_t * r.im * r.im
}

/// (1 − tanh s, 1 + tanh s) without cancellation.
pub fn tanh_complements(s: f64) -> (f64, f64) {
    let e = (-2.0 * s).exp();
    (2.0 * e / (1.0 + e), 2.0 / (1.0 + e))
}

fn gaussian_overlap_sq(alpha: Complex64, s: f64, theta: f64) -> f64 {
    (-squeeze_quadratic(alpha, s, theta)).exp() / s.cosh()
}

/// Convenience wrapper: the input-state overlap of `family` at `g`.
pub fn overlap_sq(family: &StateFamily, g: &GroupPoint) -> Result<f64, EnsembleError> {
    family.input_overlap_sq(g)
}

/// A point of the group manifold in the family's own coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupPoint {
    /// Hurwitz angles θ_0..θ_{d−2} ∈ [0, π/2] and phases φ_0..φ_{d−2}.
    QuditAngles { theta: Vec<f64>, phi: Vec<f64> },
    BlochAngles { theta: f64, phi: f64 },
    Displacement { alpha: Complex64 },
    Squeezing { s: f64, theta: f64 },
    DisplacedSqueezing { alpha: Complex64, s: f64, theta: f64 },
}

impl GroupPoint {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::QuditAngles { .. } => "qudit_angles",
            Self::BlochAngles { .. } => "bloch_angles",
            Self::Displacement { .. } => "displacement",
            Self::Squeezing { .. } => "squeezing",
            Self::DisplacedSqueezing { .. } => "displaced_squeezing",
        }
    }

    /// Complex conjugation of the state in the computational basis.
    pub fn conjugate(&self) -> GroupPoint {
        let wrap = |x: f64| (-x).rem_euclid(2.0 * PI);
        match self {
            Self::QuditAngles { theta, phi } => Self::QuditAngles {
                theta: theta.clone(),
                phi: phi.iter().map(|&p| wrap(p)).collect(),
            },
            Self::BlochAngles { theta, phi } => Self::BlochAngles {
                theta: *theta,
                phi: wrap(*phi),
            },
            Self::Displacement { alpha } => Self::Displacement { alpha: alpha.conj() },
            Self::Squeezing { s, theta } => Self::Squeezing {
                s: *s,
                theta: wrap(*theta),
            },
            Self::DisplacedSqueezing { alpha, s, theta } => Self::DisplacedSqueezing {
                alpha: alpha.conj(),
                s: *s,
                theta: wrap(*theta),
            },
        }
    }

    /// Amplitudes of a qudit state in the computational basis.
    ///
    /// Bloch angles are read as a qubit with amplitudes (cos θ/2, e^{iφ} sin θ/2).
    pub fn qudit_amplitudes(&self) -> Option<Vec<Complex64>> {
        match self {
            Self::QuditAngles { theta, phi } => {
                let d = theta.len() + 1;
                let mut out = Vec::with_capacity(d);
                let mut sin_prod = 1.0;
                for i in 0..d {
                    let c = if i + 1 < d { theta[i].cos() } else { 1.0 };
                    let phase = if i == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::from_polar(1.0, phi[i - 1])
                    };
                    out.push(phase * (sin_prod * c));
                    if i + 1 < d {
                        sin_prod *= theta[i].sin();
                    }
                }
                Some(out)
            }
            Self::BlochAngles { theta, phi } => Some(vec![
                Complex64::new((0.5 * theta).cos(), 0.0),
                Complex64::from_polar((0.5 * theta).sin(), *phi),
            ]),
            _ => None,
        }
    }
}

/// Prior concentration parameters; 0 is the flat limit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Widths {
    pub beta: f64,
    pub lambda: f64,
}

impl Widths {
    pub fn beta(beta: f64) -> Self {
        Self { beta, lambda: 0.0 }
    }

    pub fn lambda(lambda: f64) -> Self {
        Self { beta: 0.0, lambda }
    }

    pub fn both(lambda: f64, beta: f64) -> Self {
        Self { beta, lambda }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        for (name, v) in [("beta", self.beta), ("lambda", self.lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(EnsembleError::InvalidWidth(format!("{name} = {v} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}

/// A family with its prior widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: StateFamily,
    pub widths: Widths,
}

impl PriorSpec {
    pub fn new(family: StateFamily, widths: Widths) -> Result<Self, EnsembleError> {
        family.validate()?;
        widths.validate()?;
        Ok(Self { family, widths })
    }

    /// Noncompact families with a zero width have no normalizable density.
    pub fn is_proper(&self) -> bool {
        let w = self.widths;
        match self.family {
            StateFamily::Qudit { .. } | StateFamily::SpinCoherent { .. } => true,
            StateFamily::Coherent { .. } => w.lambda > 0.0,
            StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. } => w.beta > 0.0,
            StateFamily::GaussianOneMode => w.lambda > 0.0 && w.beta > 0.0,
        }
    }

    /// Unnormalized prior density with the reference-measure weight included.
    ///
    /// Equals [`prior_density`] up to a width-dependent constant and stays finite
    /// at zero widths, where it becomes the flat kernel used in density ratios.
    pub fn kernel(&self, g: &GroupPoint) -> Result<f64, EnsembleError> {
        let (beta, lambda) = (self.widths.beta, self.widths.lambda);
        let fam = &self.family;
        match (fam, g) {
            (StateFamily::Qudit { d }, GroupPoint::QuditAngles { theta, phi })
                if theta.len() == d - 1 && phi.len() == d - 1 =>
            {
                let d = *d;
                let mut v = theta[0].cos().powf(2.0 * beta);
                for (jj, th) in theta.iter().enumerate() {
                    let a = 2 * (d - jj - 1) - 1;
                    v *= th.cos() * th.sin().powi(a as i32);
                }
                Ok(v)
            }
            (StateFamily::SpinCoherent { .. }, GroupPoint::BlochAngles { theta, .. }) => {
                let h = 0.5 * theta;
                Ok(h.cos().powf(2.0 * beta + 1.0) * h.sin() / (2.0 * PI))
            }
            (StateFamily::Coherent { .. }, GroupPoint::Displacement { alpha }) => {
                Ok((-lambda * alpha.norm_sqr()).exp() / PI)
            }
            (
                StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. },
                GroupPoint::Squeezing { s, .. },
            ) => Ok(s.sinh() * s.cosh().powf(-(beta + 1.0)) / (2.0 * PI)),
            (StateFamily::GaussianOneMode, GroupPoint::DisplacedSqueezing { alpha, s, theta }) => {
                let expo = -lambda * squeeze_quadratic(*alpha, *s, *theta);
                Ok(expo.exp() * s.sinh() * s.cosh().powf(-(beta + 2.0)) / (2.0 * PI * PI))
            }
            _ => Err(fam.mismatch(g)),
        }
    }

    /// Normalization constant turning [`PriorSpec::kernel`] into the density.
    pub fn kernel_normalization(&self) -> Result<f64, EnsembleError> {
        let (beta, lambda) = (self.widths.beta, self.widths.lambda);
        Ok(match self.family {
            StateFamily::Qudit { d } => {
                let mut fact = 1.0;
                for i in 1..d {
                    fact *= i as f64;
                }
                binom_real(beta + d as f64 - 1.0, d as u64 - 1)? * fact / PI.powi(d as i32 - 1)
            }
            StateFamily::SpinCoherent { .. } => beta + 1.0,
            StateFamily::Coherent { .. } => lambda,
            StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. } => beta,
            StateFamily::GaussianOneMode => lambda * beta,
        })
    }
}

/// Prior density at `g` w.r.t. the family's coordinate measure; 0 for improper priors.
///
/// Coordinates: ∏dθ_j dφ_j (Hurwitz), dθ dφ (Bloch), d²α, ds dθ, d²α ds dθ.
pub fn prior_density(spec: &PriorSpec, g: &GroupPoint) -> Result<f64, EnsembleError> {
    let k = spec.kernel(g)?;
    if !spec.is_proper() {
        return Ok(0.0);
    }
    Ok(spec.kernel_normalization()? * k)
}

fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b == 1.0 {
        // inverse CDF of Beta(a, 1)
        let u: f64 = rng.random();
        return u.powf(1.0 / a);
    }
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

/// One exact draw from the prior.
pub fn sample_point<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> Result<GroupPoint, EnsembleError> {
    if !spec.is_proper() {
        return Err(EnsembleError::ImproperPrior(spec.family.name().into()));
    }
    let (beta, lambda) = (spec.widths.beta, spec.widths.lambda);
    let squeeze = |rng: &mut R| {
        // cosh s = (1 − u)^{−1/β}
        let u: f64 = rng.random();
        let c = (1.0 - u).powf(-1.0 / beta);
        let s = c.acosh();
        let theta = 2.0 * PI * rng.random::<f64>();
        (s, theta)
    };
    Ok(match spec.family {
        StateFamily::Qudit { d } => {
            let mut theta = Vec::with_capacity(d - 1);
            let mut phi = Vec::with_capacity(d - 1);
            for jj in 0..d - 1 {
                let c2 = if jj == 0 {
                    beta_draw(beta + 1.0, (d - 1) as f64, rng)
                } else {
                    beta_draw(1.0, (d - jj - 1) as f64, rng)
                };
                theta.push(c2.sqrt().min(1.0).acos());
                phi.push(2.0 * PI * rng.random::<f64>());
            }
            GroupPoint::QuditAngles { theta, phi }
        }
        StateFamily::SpinCoherent { .. } => {
            let c2 = beta_draw(beta + 1.0, 1.0, rng);
            GroupPoint::BlochAngles {
                theta: 2.0 * c2.sqrt().min(1.0).acos(),
                phi: 2.0 * PI * rng.random::<f64>(),
            }
        }
        StateFamily::Coherent { .. } => {
            let n = Normal::new(0.0, (0.5 / lambda).sqrt()).expect("finite variance");
            GroupPoint::Displacement {
                alpha: Complex64::new(n.sample(rng), n.sample(rng)),
            }
        }
        StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. } => {
            let (s, theta) = squeeze(rng);
            GroupPoint::Squeezing { s, theta }
        }
        StateFamily::GaussianOneMode => {
            let (s, theta) = squeeze(rng);
            let (one_minus_t, one_plus_t) = tanh_complements(s);
            let nx = Normal::new(0.0, (0.5 / (lambda * one_minus_t)).sqrt()).expect("finite variance");
            let ny = Normal::new(0.0, (0.5 / (lambda * one_plus_t)).sqrt()).expect("finite variance");
            let frame = Complex64::new(nx.sample(rng), ny.sample(rng));
            GroupPoint::DisplacedSqueezing {
                alpha: Complex64::from_polar(1.0, 0.5 * theta) * frame,
                s,
                theta,
            }
        }
    })
}

/// `n` i.i.d. prior samples from a ChaCha8 stream seeded with `seed`.
pub fn sample_prior(spec: &PriorSpec, seed: u64, n: usize) -> Result<Vec<GroupPoint>, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::Domain("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_point(spec, &mut rng)).collect()
}

/// Squeezing that maximizes the fidelity of a squeezed single photon with an odd cat of amplitude |α|.
pub fn cat_squeezing_map(alpha_abs: f64) -> Result<f64, EnsembleError> {
    if !(alpha_abs > 0.0 && alpha_abs <= 1.0) {
        return Err(EnsembleError::Domain(format!("|α| = {alpha_abs} outside (0, 1]")));
    }
    let a2 = alpha_abs * alpha_abs;
    Ok(0.5 * (a2 / 3.0 + (9.0 + 4.0 * a2 * a2).sqrt() / 3.0).ln())
}

/// Smallest β whose squeezing prior puts mass `confidence` below s*(alpha_max).
pub fn cat_confidence_beta(alpha_max: f64, confidence: f64) -> Result<f64, EnsembleError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EnsembleError::Domain(format!("confidence {confidence} outside (0, 1)")));
    }
    let s = cat_squeezing_map(alpha_max)?;
    Ok((1.0 - confidence).ln() / -s.cosh().ln())
}
