//! Monte Carlo simulation of the verification game.
//!
//! Each trial draws g from the prior, lets the strategy accept or abstain, and on
//! acceptance has the verifier run a binary test that passes with the strategy's
//! conditional fidelity. Both the pass/fail record and the exact fidelity values
//! are accumulated; the latter has lower variance.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{BenchmarkError, EnsembleSpec};
use crate::ensembles::{sample_point, EnsembleError, GroupPoint};
use crate::srm::{srm_povm_qubit, SrmError};
use crate::streams::{chunks, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("strategy {name} returned {what} = {value}, outside [0, 1]")]
    OutOfRange { name: String, what: &'static str, value: f64 },
    #[error("need at least one trial")]
    NoTrials,
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Srm(#[from] SrmError),
}

pub type AcceptanceFn = Arc<dyn Fn(&GroupPoint) -> f64 + Send + Sync>;
pub type FidelityFn = Arc<dyn Fn(&GroupPoint, &mut dyn RngCore) -> f64 + Send + Sync>;

/// A measure-and-prepare strategy seen through the game: acceptance probability and
/// conditional fidelity, both functions of the hidden group element.
#[derive(Clone)]
pub struct Strategy {
    pub name: String,
    acceptance: AcceptanceFn,
    fidelity: FidelityFn,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Strategy").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Strategy {
    pub fn new(name: impl Into<String>, acceptance: AcceptanceFn, fidelity: FidelityFn) -> Self {
        Self {
            name: name.into(),
            acceptance,
            fidelity,
        }
    }

    pub fn acceptance(&self, g: &GroupPoint) -> f64 {
        (self.acceptance)(g)
    }

    pub fn conditional_fidelity(&self, g: &GroupPoint, rng: &mut dyn RngCore) -> f64 {
        (self.fidelity)(g, rng)
    }
}

/// Project onto the fiducial input, re-prepare the fiducial target.
pub fn optimal_mp_strategy(spec: &EnsembleSpec) -> Result<Strategy, GameError> {
    spec.validate()?;
    let fam = spec.family;
    let (n, m) = (spec.n as i32, spec.m as i32);
    let weights = spec.k_weights.clone();
    let acceptance: AcceptanceFn = Arc::new(move |g| fam.input_overlap_sq(g).map(|x| x.powi(n)).unwrap_or(f64::NAN));
    let fidelity: FidelityFn = Arc::new(move |g, _| {
        let t = fam.target_overlap_sq(g).unwrap_or(f64::NAN);
        match &weights {
            // k copies tested with probability p_k
            Some(w) => w.iter().enumerate().map(|(i, p)| p * t.powi(i as i32 + 1)).sum(),
            None => t.powi(m),
        }
    });
    Ok(Strategy::new(format!("optimal_mp[{fam}]"), acceptance, fidelity))
}

/// Deterministic SRM on N qubit copies with M re-prepared copies.
pub fn srm_strategy(eta: f64, n: u32, m: u32) -> Result<Strategy, GameError> {
    let povm = Arc::new(srm_povm_qubit(eta, n)?);
    let fidelity: FidelityFn = Arc::new(move |g, rng| {
        let Ok(ghat) = povm.sample_outcome(g, rng) else { return f64::NAN };
        match (g.qudit_amplitudes(), ghat.qudit_amplitudes()) {
            (Some(a), Some(b)) if a.len() == 2 => {
                let ov = (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr();
                ov.powi(m as i32)
            }
            _ => f64::NAN,
        }
    });
    Ok(Strategy::new(format!("srm[eta={eta}, N={n}, M={m}]"), Arc::new(|_| 1.0), fidelity))
}

pub fn srm_strategy_qubit(eta: f64) -> Result<Strategy, GameError> {
    srm_strategy(eta, 1, 1)
}

/// Accumulated outcome of a batch of game rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub seed: u64,
    pub trials: u64,
    pub successes: u64,
    pub fidelity_sum: f64,
    pub fidelity_sq_sum: f64,
    /// Mean exact fidelity over accepted rounds; NaN when nothing was accepted.
    pub conditional_fidelity: f64,
    pub stderr: f64,
    pub success_rate: f64,
    pub success_stderr: f64,
    /// Rounds whose binary test passed.
    pub test_passes: u64,
    pub test_pass_rate: f64,
    pub test_stderr: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    successes: u64,
    passes: u64,
    sum: f64,
    sq: f64,
}

fn check(name: &str, what: &'static str, v: f64) -> Result<f64, GameError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(GameError::OutOfRange {
            name: name.into(),
            what,
            value: v,
        });
    }
    Ok(v)
}

fn run_chunk(spec: &EnsembleSpec, strategy: &Strategy, seed: u64, index: u64, len: usize) -> Result<Tally, GameError> {
    let prior = spec.prior();
    let mut rng = stream(seed, index);
    let mut t = Tally::default();
    for _ in 0..len {
        let g = sample_point(&prior, &mut rng)?;
        let a = check(&strategy.name, "acceptance", strategy.acceptance(&g))?;
        if rng.random::<f64>() >= a {
            continue;
        }
        let f = check(&strategy.name, "fidelity", strategy.conditional_fidelity(&g, &mut rng))?;
        t.successes += 1;
        t.sum += f;
        t.sq += f * f;
        if rng.random::<f64>() < f {
            t.passes += 1;
        }
    }
    Ok(t)
}

/// Play `trials` rounds. Chunk i always uses stream i of `seed`, and chunks are merged
/// in index order, so the batch is bit-identical for any thread count.
pub fn run_game(spec: &EnsembleSpec, strategy: &Strategy, trials: u64, seed: u64) -> Result<TrialBatch, GameError> {
    spec.validate()?;
    if trials == 0 {
        return Err(GameError::NoTrials);
    }
    let prior = spec.prior();
    if !prior.is_proper() {
        return Err(EnsembleError::ImproperPrior(spec.family.name().into()).into());
    }
    let parts: Vec<Result<Tally, GameError>> = chunks(trials as usize)
        .into_par_iter()
        .map(|(i, len)| run_chunk(spec, strategy, seed, i, len))
        .collect();
    let mut t = Tally::default();
    for p in parts {
        let p = p?;
        t.successes += p.successes;
        t.passes += p.passes;
        t.sum += p.sum;
        t.sq += p.sq;
    }
    let s = t.successes as f64;
    let n = trials as f64;
    let mean = if t.successes > 0 { t.sum / s } else { f64::NAN };
    let var = if t.successes > 1 {
        ((t.sq - s * mean * mean) / (s - 1.0)).max(0.0)
    } else {
        f64::NAN
    };
    let rate = s / n;
    let pass_rate = if t.successes > 0 { t.passes as f64 / s } else { f64::NAN };
    Ok(TrialBatch {
        seed,
        trials,
        successes: t.successes,
        fidelity_sum: t.sum,
        fidelity_sq_sum: t.sq,
        conditional_fidelity: mean,
        stderr: (var / s).sqrt(),
        success_rate: rate,
        success_stderr: (rate * (1.0 - rate) / n).sqrt(),
        test_passes: t.passes,
        test_pass_rate: pass_rate,
        test_stderr: (pass_rate * (1.0 - pass_rate) / s).sqrt(),
    })
}
