//! Numerical evaluation of thresholds and success probabilities.
//!
//! Quadrature runs a tensor-product rule in a per-family chart whose radial
//! coordinates live on [0, 1] with the slowly decaying end mapped to 0:
//!
//! * Bloch: u = cos²(θ/2); Hurwitz: u_j = cos²θ_j
//! * displacement: v = e^{−a r²} with a = λ + N
//! * squeezing: y = sech s
//! * displaced squeezing: y = sech s, then the displacement in the frame that
//!   diagonalizes the Gaussian exponent, with v = e^{−ρ²}
//!
//! Radial rules are Gauss–Legendre after u = w⁴ clustering, angles use the
//! trapezoid rule. The error estimate compares `nodes_per_dim` with half as many.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{BenchmarkError, BenchmarkValue, EnsembleSpec, FormulaId, Provenance};
use crate::ensembles::{sample_point, tanh_complements, EnsembleError, GroupPoint, PriorSpec, StateFamily};
use crate::quadrature::{clustered_unit, periodic, Rule};
use crate::streams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("integral did not converge: value {value}, error estimate {error:e}")]
    Nonconvergent { value: f64, error: f64 },
    #[error("improper prior on {0}: normalized integrals are undefined")]
    ImproperPrior(String),
    #[error("acceptance probability {0} outside [0, 1]")]
    AcceptanceRange(f64),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GaussLegendre,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub scheme: Scheme,
    /// Gauss–Legendre nodes per radial coordinate.
    pub nodes_per_dim: usize,
    /// Trapezoid nodes per angular coordinate.
    pub periodic_nodes: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::GaussLegendre,
            nodes_per_dim: 48,
            periodic_nodes: 16,
            mc_samples: 100_000,
            seed: 0x5eed,
        }
    }
}

impl QuadratureConfig {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            scheme: Scheme::MonteCarlo,
            mc_samples: samples,
            seed,
            ..Self::default()
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes_per_dim = nodes;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.nodes_per_dim < 8 {
            return Err(OracleError::Config(format!("nodes_per_dim {} < 8", self.nodes_per_dim)));
        }
        if self.periodic_nodes < 1 {
            return Err(OracleError::Config("periodic_nodes must be positive".into()));
        }
        if self.scheme == Scheme::MonteCarlo && self.mc_samples < 10_000 {
            return Err(OracleError::Config(format!("mc_samples {} < 10^4", self.mc_samples)));
        }
        Ok(())
    }
}

/// A number with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// An oracle benchmark together with its error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericBenchmark {
    pub value: BenchmarkValue,
    pub fidelity_error: f64,
    pub success_probability_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureOfMerit {
    pub fidelity: Estimate,
    pub success_probability: Option<Estimate>,
}

const CLUSTER: u32 = 4;
const MAX_ERROR: f64 = 1e-3;
const BLOCK: usize = 4096;

type PointMap = Box<dyn Fn(&[f64]) -> (GroupPoint, f64) + Sync>;

/// Tensor-product chart: rules per coordinate plus the map to a group point and |Jacobian|.
struct Chart {
    rules: Vec<Rule>,
    map: PointMap,
}

impl Chart {
    fn size(&self) -> usize {
        self.rules.iter().map(Rule::len).product()
    }

    fn node(&self, mut flat: usize, coords: &mut [f64]) -> f64 {
        let mut w = 1.0;
        for (slot, r) in self.rules.iter().enumerate().rev() {
            let i = flat % r.len();
            flat /= r.len();
            coords[slot] = r.nodes[i];
            w *= r.weights[i];
        }
        w
    }
}

fn chart(prior: &PriorSpec, focus: f64, radial: usize, angular: usize) -> Chart {
    let rr = || clustered_unit(radial, CLUSTER);
    let ar = || periodic(angular);
    match prior.family {
        StateFamily::Qudit { d } => {
            let mut rules = Vec::new();
            for _ in 0..d - 1 {
                rules.push(rr());
                rules.push(ar());
            }
            Chart {
                rules,
                map: Box::new(move |c: &[f64]| {
                    let mut theta = Vec::with_capacity(d - 1);
                    let mut phi = Vec::with_capacity(d - 1);
                    let mut jac = 1.0;
                    for pair in c.chunks(2) {
                        let th = pair[0].sqrt().acos();
                        jac /= 2.0 * th.cos() * th.sin();
                        theta.push(th);
                        phi.push(pair[1]);
                    }
                    (GroupPoint::QuditAngles { theta, phi }, jac)
                }),
            }
        }
        StateFamily::SpinCoherent { .. } => Chart {
            rules: vec![rr(), ar()],
            map: Box::new(|c: &[f64]| {
                let h = c[0].sqrt().acos();
                let jac = 1.0 / (h.cos() * h.sin());
                (GroupPoint::BlochAngles { theta: 2.0 * h, phi: c[1] }, jac)
            }),
        },
        StateFamily::Coherent { .. } => {
            let a = prior.widths.lambda + focus;
            Chart {
                rules: vec![rr(), ar()],
                map: Box::new(move |c: &[f64]| {
                    let v = c[0];
                    let r = (-v.ln() / a).sqrt();
                    let alpha = Complex64::from_polar(r, c[1]);
                    (GroupPoint::Displacement { alpha }, 1.0 / (2.0 * a * v))
                }),
            }
        }
        StateFamily::SqueezedVacuum | StateFamily::Perelomov { .. } => Chart {
            rules: vec![rr(), ar()],
            map: Box::new(|c: &[f64]| {
                let s = (1.0 / c[0]).acosh();
                let jac = s.cosh().powi(2) / s.sinh();
                (GroupPoint::Squeezing { s, theta: c[1] }, jac)
            }),
        },
        StateFamily::GaussianOneMode => {
            let a = prior.widths.lambda + focus;
            Chart {
                rules: vec![rr(), ar(), rr(), ar()],
                map: Box::new(move |c: &[f64]| {
                    let s = (1.0 / c[0]).acosh();
                    let theta = c[1];
                    let (omt, opt) = tanh_complements(s);
                    let (sx, sy) = (1.0 / (a * omt).sqrt(), 1.0 / (a * opt).sqrt());
                    let rho = (-c[2].ln()).sqrt();
                    let frame = Complex64::new(sx * rho * c[3].cos(), sy * rho * c[3].sin());
                    let alpha = Complex64::from_polar(1.0, 0.5 * theta) * frame;
                    let jac = s.cosh().powi(2) / s.sinh() * sx * sy / (2.0 * c[2]);
                    (GroupPoint::DisplacedSqueezing { alpha, s, theta }, jac)
                }),
            }
        }
    }
}

/// ∫ kernel(g)·f(g) over the group in the chart tilted by `focus` input copies.
fn integrate_chart<const K: usize, F>(
    prior: &PriorSpec,
    focus: f64,
    radial: usize,
    angular: usize,
    f: &F,
) -> Result<[f64; K], OracleError>
where
    F: Fn(&GroupPoint) -> [f64; K] + Sync,
{
    let ch = chart(prior, focus, radial, angular);
    let total = ch.size();
    let dims = ch.rules.len();
    let blocks: Vec<Result<[f64; K], OracleError>> = (0..total.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = [0.0; K];
            let mut coords = vec![0.0; dims];
            for flat in b * BLOCK..((b + 1) * BLOCK).min(total) {
                let w = ch.node(flat, &mut coords);
                let (g, jac) = (ch.map)(&coords);
                let k = prior.kernel(&g)? * jac * w;
                if k == 0.0 || !k.is_finite() {
                    continue;
                }
                let v = f(&g);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += k * x;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut out = [0.0; K];
    for b in blocks {
        for (o, x) in out.iter_mut().zip(b?) {
            *o += x;
        }
    }
    Ok(out)
}

/// ∫ p(g)·f(g) dg with the normalized prior, plus the refinement error estimate.
///
/// `focus` only shapes the chart (use the number of input copies the integrand
/// carries); the value does not depend on it.
pub fn integrate_prior<F>(prior: &PriorSpec, focus: f64, cfg: &QuadratureConfig, f: F) -> Result<Estimate, OracleError>
where
    F: Fn(&GroupPoint) -> f64 + Sync,
{
    cfg.validate()?;
    if !prior.is_proper() {
        return Err(OracleError::ImproperPrior(prior.family.name().into()));
    }
    let norm = prior.kernel_normalization()?;
    let g = |p: &GroupPoint| [f(p)];
    let fine = integrate_chart(prior, focus, cfg.nodes_per_dim, cfg.periodic_nodes, &g)?[0] * norm;
    let coarse = integrate_chart(prior, focus, cfg.nodes_per_dim / 2, cfg.periodic_nodes, &g)?[0] * norm;
    Ok(Estimate {
        value: fine,
        error: refinement_error(fine, coarse),
    })
}

fn refinement_error(fine: f64, coarse: f64) -> f64 {
    (fine - coarse).abs().max(64.0 * f64::EPSILON * fine.abs())
}

fn check_error(e: Estimate) -> Result<Estimate, OracleError> {
    if !(e.error <= MAX_ERROR) || !e.value.is_finite() {
        return Err(OracleError::Nonconvergent {
            value: e.value,
            error: e.error,
        });
    }
    Ok(e)
}

/// Ratio ∫ p·acc·fid / ∫ p·acc together with ∫ p·acc, by quadrature.
fn quadrature_ratio<A, B>(
    prior: &PriorSpec,
    focus: f64,
    cfg: &QuadratureConfig,
    acc: &A,
    fid: &B,
) -> Result<(Estimate, Option<Estimate>), OracleError>
where
    A: Fn(&GroupPoint) -> f64 + Sync,
    B: Fn(&GroupPoint) -> f64 + Sync,
{
    let bad = std::sync::atomic::AtomicU64::new(f64::NAN.to_bits());
    let f = |g: &GroupPoint| {
        let a = acc(g);
        if !(0.0..=1.0).contains(&a) {
            bad.store(a.to_bits(), std::sync::atomic::Ordering::Relaxed);
        }
        [a * fid(g), a]
    };
    let run = |n| integrate_chart(prior, focus, n, cfg.periodic_nodes, &f);
    let fine = run(cfg.nodes_per_dim)?;
    let coarse = run(cfg.nodes_per_dim / 2)?;
    let flagged = f64::from_bits(bad.load(std::sync::atomic::Ordering::Relaxed));
    if !flagged.is_nan() {
        return Err(OracleError::AcceptanceRange(flagged));
    }
    let r_fine = fine[0] / fine[1];
    let r_coarse = coarse[0] / coarse[1];
    let fidelity = check_error(Estimate {
        value: r_fine,
        error: refinement_error(r_fine, r_coarse),
    })?;
    let success = if prior.is_proper() {
        let norm = prior.kernel_normalization()?;
        let (pf, pc) = (fine[1] * norm, coarse[1] * norm);
        Some(check_error(Estimate {
            value: pf,
            error: refinement_error(pf, pc),
        })?)
    } else {
        None
    };
    Ok((fidelity, success))
}

/// Same ratio by sampling the prior; errors are delta-method standard errors.
fn monte_carlo_ratio<A, B>(
    prior: &PriorSpec,
    cfg: &QuadratureConfig,
    acc: &A,
    fid: &B,
) -> Result<(Estimate, Option<Estimate>), OracleError>
where
    A: Fn(&GroupPoint) -> f64 + Sync,
    B: Fn(&GroupPoint) -> f64 + Sync,
{
    if !prior.is_proper() {
        return Err(OracleError::ImproperPrior(prior.family.name().into()));
    }
    // Σa, Σb, Σa², Σb², Σab with a = acc·fid and b = acc
    let parts: Vec<Result<[f64; 5], OracleError>> = streams::chunks(cfg.mc_samples)
        .into_par_iter()
        .map(|(idx, len)| {
            let mut rng = streams::stream(cfg.seed, idx);
            let mut s = [0.0; 5];
            for _ in 0..len {
                let g = sample_point(prior, &mut rng)?;
                let b = acc(&g);
                if !(0.0..=1.0).contains(&b) {
                    return Err(OracleError::AcceptanceRange(b));
                }
                let a = b * fid(&g);
                s[0] += a;
                s[1] += b;
                s[2] += a * a;
                s[3] += b * b;
                s[4] += a * b;
            }
            Ok(s)
        })
        .collect();
    let mut s = [0.0; 5];
    for p in parts {
        for (o, x) in s.iter_mut().zip(p?) {
            *o += x;
        }
    }
    let n = cfg.mc_samples as f64;
    let (ma, mb) = (s[0] / n, s[1] / n);
    let va = (s[2] / n - ma * ma) * n / (n - 1.0);
    let vb = (s[3] / n - mb * mb) * n / (n - 1.0);
    let cab = (s[4] / n - ma * mb) * n / (n - 1.0);
    let r = ma / mb;
    let var_r = ((va - 2.0 * r * cab + r * r * vb) / (mb * mb) / n).max(0.0);
    Ok((
        Estimate {
            value: r,
            error: var_r.sqrt(),
        },
        Some(Estimate {
            value: mb,
            error: (vb.max(0.0) / n).sqrt(),
        }),
    ))
}

/// Figure of merit of a general probabilistic strategy with acceptance `acc(g)`
/// and conditional fidelity `fid(g)`.
pub fn figure_of_merit<A, B>(acc: A, fid: B, spec: &EnsembleSpec, cfg: &QuadratureConfig) -> Result<FigureOfMerit, OracleError>
where
    A: Fn(&GroupPoint) -> f64 + Sync,
    B: Fn(&GroupPoint) -> f64 + Sync,
{
    cfg.validate()?;
    spec.validate()?;
    let prior = spec.prior();
    let (fidelity, success_probability) = match cfg.scheme {
        Scheme::GaussLegendre => quadrature_ratio(&prior, spec.n as f64, cfg, &acc, &fid)?,
        Scheme::MonteCarlo => monte_carlo_ratio(&prior, cfg, &acc, &fid)?,
    };
    Ok(FigureOfMerit {
        fidelity,
        success_probability,
    })
}

fn optimal_mp_merit(spec: &EnsembleSpec, m: u32, cfg: &QuadratureConfig) -> Result<FigureOfMerit, OracleError> {
    let fam = spec.family;
    let n = spec.n as i32;
    let acc = move |g: &GroupPoint| fam.input_overlap_sq(g).map(|x| x.powi(n)).unwrap_or(f64::NAN);
    let fid = move |g: &GroupPoint| fam.target_overlap_sq(g).map(|x| x.powi(m as i32)).unwrap_or(f64::NAN);
    figure_of_merit(acc, fid, &spec.with_m(m), cfg)
}

/// The threshold ∫p|⟨ψ|ψ_g⟩|^{2M}|⟨φ|φ_g⟩|^{2N} / ∫p|⟨φ|φ_g⟩|^{2N}, evaluated numerically.
///
/// With `k_weights` present the k-copy average is returned.
pub fn cft_numeric(spec: &EnsembleSpec, cfg: &QuadratureConfig) -> Result<NumericBenchmark, OracleError> {
    spec.validate()?;
    let provenance = match cfg.scheme {
        Scheme::GaussLegendre => Provenance::Quadrature,
        Scheme::MonteCarlo => Provenance::MonteCarlo,
    };
    let base_id = crate::benchmarks::cft(spec)?.formula_id;
    let (f, f_err, p) = match &spec.k_weights {
        None => {
            let r = optimal_mp_merit(spec, spec.m, cfg)?;
            (r.fidelity.value, r.fidelity.error, r.success_probability)
        }
        Some(w) => {
            let (mut f, mut e, mut p) = (0.0, 0.0, None);
            for (i, &wk) in w.iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                let r = optimal_mp_merit(spec, i as u32 + 1, cfg)?;
                f += wk * r.fidelity.value;
                e += wk * r.fidelity.error;
                p = r.success_probability;
            }
            (f, e, p)
        }
    };
    let formula_id = match spec.k_weights {
        Some(_) => FormulaId::KCopy(Box::new(base_id)),
        None => base_id,
    };
    Ok(NumericBenchmark {
        value: BenchmarkValue {
            fidelity_threshold: f,
            success_probability: p.map(|e| e.value),
            formula_id,
            provenance,
        },
        fidelity_error: f_err,
        success_probability_error: p.map(|e| e.error),
    })
}

/// ∫ p(g)|⟨φ|φ_g⟩|^{2N} dg, the denominator of [`cft_numeric`].
pub fn success_probability_numeric(spec: &EnsembleSpec, cfg: &QuadratureConfig) -> Result<Estimate, OracleError> {
    let prior = spec.prior();
    if !prior.is_proper() {
        return Err(OracleError::ImproperPrior(prior.family.name().into()));
    }
    let r = optimal_mp_merit(spec, spec.m, cfg)?;
    r.success_probability
        .ok_or_else(|| OracleError::ImproperPrior(prior.family.name().into()))
}

/// Volume check helper: ∫ prior_density over the family's domain.
pub fn prior_mass(prior: &PriorSpec, cfg: &QuadratureConfig) -> Result<Estimate, OracleError> {
    integrate_prior(prior, 0.0, cfg, |_| 1.0)
}
