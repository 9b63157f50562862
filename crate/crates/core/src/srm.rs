//! Square-root-measurement (SRM) strategies on qubits.
//!
//! The SRM built from the β = η prior measures ĝ with density
//! p(ĝ|g) = p_η(ĝ)·|⟨φ_g^{⊗N}|ρ_η^{−1/2}|φ_ĝ^{⊗N}⟩|² and re-prepares |ψ_ĝ⟩^{⊗M}.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{cft, BenchmarkError, EnsembleSpec};
use crate::ensembles::{prior_density, sample_point, EnsembleError, GroupPoint, PriorSpec, StateFamily, Widths};
use crate::operators::{qudit_eigenvalues, symmetric_embed, OperatorError};
use crate::oracle::{integrate_prior, Estimate, OracleError, QuadratureConfig};
use crate::quadrature::gauss_legendre_unit;
use crate::special_math::binom_real;
use num_complex::Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SrmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("η optimizer did not converge (bracket [{lo}, {hi}])")]
    Nonconvergent { lo: f64, hi: f64 },
    #[error("closed form {closed} and numerical optimum {numeric} disagree")]
    Disagreement { closed: f64, numeric: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}

fn check_nonneg(name: &str, x: f64) -> Result<(), SrmError> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(SrmError::InvalidParameter(format!("{name} = {x} must be finite and ≥ 0")));
    }
    Ok(())
}

/// Average fidelity of the η-SRM on one qubit copy, targets drawn from the β prior.
pub fn srm_fidelity_qubit(beta: f64, eta: f64) -> f64 {
    let (b, e) = (beta, eta);
    let root = (e + 1.0).sqrt();
    (e + 2.0) / (e + 3.0) * (b + 1.0) / (b + 3.0)
        + (1.0 + root).powi(2) / (e + 3.0) * (b + 1.0) / ((b + 2.0) * (b + 3.0))
        + 4.0 / ((e + 3.0) * (b + 3.0) * (b + 2.0))
}

fn radicand(beta: f64) -> f64 {
    let b = beta;
    b.powi(4) + 8.0 * b.powi(3) + 22.0 * b * b + 8.0 * b + 9.0
}

/// Maximizing η in closed form.
pub fn eta_opt_closed_form(beta: f64) -> f64 {
    let b = beta;
    let num = b.powi(4) + 8.0 * b.powi(3) + 16.0 * b * b - 4.0 * b + 3.0 + (b * b + 4.0 * b - 1.0) * radicand(b).sqrt();
    (num / (2.0 * (b + 1.0).powi(2))).max(0.0)
}

/// (β+2)/(β+3) − max_η F(β, η) in closed form.
pub fn gap_closed_form(beta: f64) -> f64 {
    let b = beta;
    4.0 * b / ((b + 2.0) * (b + 3.0) * ((b + 1.0) * (b + 3.0) + radicand(b).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmResult {
    pub beta: f64,
    pub eta_opt: f64,
    pub fidelity_opt: f64,
    pub benchmark: f64,
    pub gap: f64,
    pub eta_opt_closed_form: f64,
    pub gap_closed_form: f64,
}

const GOLDEN_TOL: f64 = 1e-10;
const AGREEMENT_TOL: f64 = 1e-9;

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64, SrmError> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (b - a) <= GOLDEN_TOL * (1.0 + a.abs() + b.abs()) {
            return Ok(0.5 * (a + b));
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    Err(SrmError::Nonconvergent { lo, hi })
}

/// Optimal η for the β prior: numerical maximum, cross-checked against the closed form.
pub fn srm_optimize(beta: f64) -> Result<SrmResult, SrmError> {
    check_nonneg("β", beta)?;
    // η_opt grows like β², so the bracket must too
    let hi = 10.0 * (beta + 1.0).powi(2) + 100.0;
    let eta = golden_max(|e| srm_fidelity_qubit(beta, e), 0.0, hi)?;
    let fidelity_opt = srm_fidelity_qubit(beta, eta).max(srm_fidelity_qubit(beta, 0.0));
    let eta = if srm_fidelity_qubit(beta, 0.0) >= srm_fidelity_qubit(beta, eta) { 0.0 } else { eta };
    let benchmark = (beta + 2.0) / (beta + 3.0);
    let eta_cf = eta_opt_closed_form(beta);
    let f_cf = srm_fidelity_qubit(beta, eta_cf);
    let gap_cf = gap_closed_form(beta);
    if (f_cf - fidelity_opt).abs() > AGREEMENT_TOL {
        return Err(SrmError::Disagreement {
            closed: f_cf,
            numeric: fidelity_opt,
        });
    }
    Ok(SrmResult {
        beta,
        eta_opt: eta,
        fidelity_opt,
        benchmark,
        gap: (benchmark - fidelity_opt).max(0.0),
        eta_opt_closed_form: eta_cf,
        gap_closed_form: gap_cf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformOptimality {
    pub f_srm: f64,
    pub f_c: f64,
    pub gap: f64,
}

/// Deterministic SRM fidelity under the flat prior of a compact family.
///
/// Haar invariance fixes g at the fiducial point, leaving
/// F_srm = d_φ ∫ |⟨φ|φ_ĝ⟩|^{2N} |⟨ψ|ψ_ĝ⟩|^{2M} dĝ with d_φ the N-copy symmetric dimension.
/// Both overlaps are powers of x = |⟨0|ĝ⟩|², whose Haar law is (d−1)(1−x)^{d−2} on a
/// qudit and uniform on a spin sphere, so the integral is one-dimensional.
pub fn srm_uniform_optimality(family: StateFamily, n: u32, m: u32) -> Result<UniformOptimality, SrmError> {
    let (d_phi, density, power): (f64, Box<dyn Fn(f64) -> f64>, i32) = match family {
        StateFamily::Qudit { d } => (
            binom_real((n as usize + d - 1) as f64, d as u64 - 1).map_err(EnsembleError::from)?,
            Box::new(move |x: f64| (d - 1) as f64 * (1.0 - x).powi(d as i32 - 2)),
            (n + m) as i32,
        ),
        StateFamily::SpinCoherent { j, k } => (
            (j.twice() * n + 1) as f64,
            Box::new(|_| 1.0),
            (j.twice() * n + k.twice() * m) as i32,
        ),
        other => {
            return Err(SrmError::Unsupported(format!(
                "{} has no normalizable flat prior",
                other.name()
            )))
        }
    };
    let spec = EnsembleSpec::new(family, n, m, Widths::beta(0.0))?;
    // polynomial integrand: exact once the rule has more than half its degree in nodes
    let rule = gauss_legendre_unit(power as usize + 64);
    let f_srm = d_phi * rule.integrate(|x| x.powi(power) * density(x));
    let f_c = cft(&spec)?.fidelity_threshold;
    Ok(UniformOptimality {
        f_srm,
        f_c,
        gap: f_c - f_srm,
    })
}

/// The qubit SRM built from the η prior, acting on N input copies.
#[derive(Debug, Clone, PartialEq)]
pub struct SrmPovm {
    eta: f64,
    copies: u32,
    prior: PriorSpec,
    rho_inv_sqrt: Vec<f64>,
    lambda_min: f64,
}

impl SrmPovm {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn copies(&self) -> u32 {
        self.copies
    }

    /// The η prior over outcomes.
    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn amplitude(&self, g: &GroupPoint, ghat: &GroupPoint) -> Result<Complex64, SrmError> {
        let amps = |p: &GroupPoint| -> Result<Vec<Complex64>, SrmError> {
            match p.qudit_amplitudes() {
                Some(v) if v.len() == 2 => Ok(symmetric_embed(&v, self.copies)?),
                _ => Err(EnsembleError::VariantMismatch {
                    family: "qubit".into(),
                    point: p.variant_name().into(),
                }
                .into()),
            }
        };
        let (a, b) = (amps(g)?, amps(ghat)?);
        Ok(a.iter()
            .zip(&b)
            .zip(&self.rho_inv_sqrt)
            .map(|((x, y), r)| x.conj() * y * *r)
            .sum())
    }

    /// p(ĝ|g) with respect to dθ dφ.
    pub fn density(&self, g: &GroupPoint, ghat: &GroupPoint) -> Result<f64, SrmError> {
        Ok(prior_density(&self.prior, ghat)? * self.amplitude(g, ghat)?.norm_sqr())
    }

    /// Draw an outcome by rejection from the η prior; the acceptance bound is 1/λ_min(ρ_η).
    pub fn sample_outcome<R: Rng + ?Sized>(&self, g: &GroupPoint, rng: &mut R) -> Result<GroupPoint, SrmError> {
        loop {
            let ghat = sample_point(&self.prior, rng)?;
            let accept = self.amplitude(g, &ghat)?.norm_sqr() * self.lambda_min;
            if rng.random::<f64>() < accept {
                return Ok(ghat);
            }
        }
    }

    /// ∫ p(ĝ|g)·f(ĝ) dĝ by quadrature over the outcome.
    pub fn expectation<F>(&self, g: &GroupPoint, cfg: &QuadratureConfig, f: F) -> Result<Estimate, SrmError>
    where
        F: Fn(&GroupPoint) -> f64 + Sync,
    {
        Ok(integrate_prior(&self.prior, self.copies as f64, cfg, |gh| {
            self.amplitude(g, gh).map(|a| a.norm_sqr()).unwrap_or(f64::NAN) * f(gh)
        })?)
    }
}

/// The η-SRM on N qubit copies.
pub fn srm_povm_qubit(eta: f64, copies: u32) -> Result<SrmPovm, SrmError> {
    check_nonneg("η", eta)?;
    if copies == 0 {
        return Err(SrmError::InvalidParameter("N must be at least 1".into()));
    }
    let rho = qudit_eigenvalues(copies, 2, eta)?;
    let lambda_min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SrmPovm {
        eta,
        copies,
        prior: PriorSpec::new(StateFamily::spin(0.5, 0.5)?, Widths::beta(eta))?,
        rho_inv_sqrt: rho.iter().map(|x| 1.0 / x.sqrt()).collect(),
        lambda_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_prior;
    use crate::oracle::figure_of_merit;
    use crate::streams::stream;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_point_matches_the_benchmark() {
        assert_relative_eq!(srm_fidelity_qubit(0.0, 0.0), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn optimum_at_beta_one() {
        let r = srm_optimize(1.0).unwrap();
        assert_relative_eq!(r.gap, 0.022_329, epsilon = 5e-7);
        assert_relative_eq!(r.fidelity_opt, 0.75 - r.gap_closed_form, epsilon = 1e-12);
        assert_relative_eq!(r.eta_opt, 3.0 + 2.0 * 3f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(r.eta_opt_closed_form, 3.0 + 2.0 * 3f64.sqrt(), max_relative = 1e-12);
        assert!((r.eta_opt - 1.0).abs() > 1.0);
    }

    #[test]
    fn flat_prior_has_no_gap() {
        let r = srm_optimize(0.0).unwrap();
        assert!(r.gap.abs() < 1e-12);
        assert_relative_eq!(r.fidelity_opt, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(eta_opt_closed_form(0.0), 0.0);
    }

    #[test]
    fn closed_form_matches_optimizer_on_a_grid() {
        for beta in [0.1, 0.5, 2.0, 3.7, 10.0, 55.0, 300.0] {
            let r = srm_optimize(beta).unwrap();
            assert!((r.gap - r.gap_closed_form).abs() < 1e-9, "β={beta}: {r:?}");
            assert!(r.gap > 0.0);
            assert!((r.eta_opt - r.eta_opt_closed_form).abs() <= 1e-5 * r.eta_opt_closed_form.max(1.0));
        }
    }

    #[test]
    fn printed_radicand_variant_does_not_match() {
        // 8β² in place of 8β moves the gap off the optimizer's value (the two agree at β = 1)
        let b = 2.0f64;
        let bad = b.powi(4) + 8.0 * b.powi(3) + 22.0 * b * b + 8.0 * b * b + 9.0;
        let gap_bad = 4.0 * b / ((b + 2.0) * (b + 3.0) * ((b + 1.0) * (b + 3.0) + bad.sqrt()));
        let r = srm_optimize(b).unwrap();
        assert!((gap_bad - r.gap).abs() > 1e-4);
    }

    #[test]
    fn fidelity_is_unimodal_in_eta() {
        for beta in [0.5, 1.0, 4.0, 20.0] {
            let hi = 10.0 * (beta + 1.0f64).powi(2) + 100.0;
            let vals: Vec<f64> = (0..=2000).map(|i| srm_fidelity_qubit(beta, hi * i as f64 / 2000.0)).collect();
            let peak = vals.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            assert!(vals[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-15));
            assert!(vals[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn gap_decays_as_inverse_cube() {
        let g2 = srm_optimize(1e2).unwrap().gap_closed_form;
        let g4 = srm_optimize(1e4).unwrap().gap_closed_form;
        let slope = (g4.ln() - g2.ln()) / (1e4f64.ln() - 1e2f64.ln());
        assert!((slope + 3.0).abs() < 0.1, "{slope}");
        let g3 = srm_optimize(1e3).unwrap();
        assert!(g3.gap <= 2.1 * 1e-9, "{:?}", g3);
    }

    #[test]
    fn povm_is_complete() {
        let cfg = QuadratureConfig::default();
        for eta in [0.0, 1.0, 5.0] {
            let povm = srm_povm_qubit(eta, 1).unwrap();
            for g in sample_prior(&PriorSpec::new(StateFamily::spin(0.5, 0.5).unwrap(), Widths::beta(0.0)).unwrap(), 3, 5).unwrap() {
                let total = povm.expectation(&g, &cfg, |_| 1.0).unwrap();
                assert!((total.value - 1.0).abs() < 1e-8, "η={eta}: {}", total.value);
            }
        }
    }

    #[test]
    fn povm_concentrates_for_peaked_outcomes() {
        let povm = srm_povm_qubit(200.0, 1).unwrap();
        let north = GroupPoint::BlochAngles { theta: 0.0, phi: 0.0 };
        let mut rng = stream(9, 0);
        let mean_cos: f64 = (0..2000)
            .map(|_| match povm.sample_outcome(&north, &mut rng).unwrap() {
                GroupPoint::BlochAngles { theta, .. } => theta.cos(),
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 2000.0;
        // E[cos θ] ≈ 1 − 2/η for the η prior on its own
        assert!(mean_cos > 0.98, "{mean_cos}");
    }

    #[test]
    fn nested_quadrature_reproduces_the_closed_form() {
        let spin = StateFamily::spin(0.5, 0.5).unwrap();
        let inner = QuadratureConfig::default().with_nodes(32);
        for (beta, eta) in [(1.0, 2.0), (2.0, 0.5)] {
            let spec = EnsembleSpec::new(spin, 1, 1, Widths::beta(beta)).unwrap();
            let povm = srm_povm_qubit(eta, 1).unwrap();
            let fid = |g: &GroupPoint| {
                let psi = g.qudit_amplitudes().unwrap();
                povm.expectation(g, &inner, |gh| {
                    let phi = gh.qudit_amplitudes().unwrap();
                    (psi[0].conj() * phi[0] + psi[1].conj() * phi[1]).norm_sqr()
                })
                .unwrap()
                .value
            };
            let fom = figure_of_merit(|_| 1.0, fid, &spec, &QuadratureConfig::default().with_nodes(24)).unwrap();
            assert!((fom.fidelity.value - srm_fidelity_qubit(beta, eta)).abs() < 1e-6, "β={beta} η={eta}: {}", fom.fidelity.value);
        }
    }

    #[test]
    fn monte_carlo_double_integral_agrees() {
        let spin = StateFamily::spin(0.5, 0.5).unwrap();
        for beta in [0.0, 1.0, 2.0, 5.0] {
            let prior = PriorSpec::new(spin, Widths::beta(beta)).unwrap();
            for eta in [0.0, 1.0, 2.0, 5.0] {
                let povm = srm_povm_qubit(eta, 1).unwrap();
                let mut rng = stream(1234, (beta * 10.0 + eta) as u64);
                let n = 40_000;
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    let g = sample_point(&prior, &mut rng).unwrap();
                    let gh = povm.sample_outcome(&g, &mut rng).unwrap();
                    let (a, b) = (g.qudit_amplitudes().unwrap(), gh.qudit_amplitudes().unwrap());
                    let f = (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr();
                    s += f;
                    s2 += f * f;
                }
                let mean = s / n as f64;
                let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
                let want = srm_fidelity_qubit(beta, eta);
                assert!((mean - want).abs() < 3.5 * se, "β={beta} η={eta}: {mean} vs {want} ± {se}");
            }
        }
    }

    #[test]
    fn uniform_prior_srm_is_optimal() {
        let cases = [
            (StateFamily::qudit(2).unwrap(), 1, 1, 2.0 / 3.0),
            (StateFamily::qudit(3).unwrap(), 1, 2, 0.3),
            (StateFamily::spin(1.0, 1.0).unwrap(), 1, 1, 0.6),
            (StateFamily::qudit(4).unwrap(), 2, 1, 10.0 / 20.0),
            (StateFamily::spin(0.5, 1.5).unwrap(), 2, 1, 3.0 / 6.0),
        ];
        for (fam, n, m, want) in cases {
            let r = srm_uniform_optimality(fam, n, m).unwrap();
            assert!((r.f_srm - want).abs() < 1e-9, "{fam}: {r:?}");
            assert!(r.gap.abs() < 1e-9);
        }
        // the reduction against the full-dimensional prior average on a small case
        let fam = StateFamily::qudit(3).unwrap();
        let prior = PriorSpec::new(fam, Widths::beta(0.0)).unwrap();
        let full = integrate_prior(&prior, 3.0, &QuadratureConfig::default().with_nodes(24), |g| {
            fam.input_overlap_sq(g).unwrap().powi(3)
        })
        .unwrap();
        assert!((3.0 * full.value - srm_uniform_optimality(fam, 1, 2).unwrap().f_srm).abs() < 1e-10);
        assert!(matches!(
            srm_uniform_optimality(StateFamily::SqueezedVacuum, 1, 1),
            Err(SrmError::Unsupported(_))
        ));
    }
}
