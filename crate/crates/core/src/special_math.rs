//! Real-argument special functions and combinatorial primitives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },
    #[error("partition sums to {found}, expected {expected}")]
    PartitionSum { expected: u64, found: u64 },
}

fn domain(func: &'static str, detail: impl Into<String>) -> MathError {
    MathError::Domain {
        func,
        detail: detail.into(),
    }
}

/// Occupation numbers of `total` bosons spread over `parts.len()` modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<u64>,
    total: u64,
}

impl Partition {
    pub fn new(parts: Vec<u64>) -> Self {
        let total = parts.iter().sum();
        Self { parts, total }
    }

    pub fn parts(&self) -> &[u64] {
        &self.parts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.parts.len()
    }

    /// Componentwise sum; both partitions must have the same length.
    pub fn add(&self, other: &Partition) -> Partition {
        assert_eq!(self.dim(), other.dim(), "partition length mismatch");
        Partition::new(
            self.parts
                .iter()
                .zip(&other.parts)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise difference, `None` if any entry would go negative.
    pub fn checked_sub(&self, other: &Partition) -> Option<Partition> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut out = Vec::with_capacity(self.dim());
        for (a, b) in self.parts.iter().zip(&other.parts) {
            out.push(a.checked_sub(*b)?);
        }
        Some(Partition::new(out))
    }
}

/// A binomial coefficient with real upper argument, evaluated once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealBinomial {
    pub upper: f64,
    pub lower: u64,
    pub value: f64,
}

impl RealBinomial {
    pub fn new(upper: f64, lower: u64) -> Result<Self, MathError> {
        Ok(Self {
            upper,
            lower,
            value: binom_real(upper, lower)?,
        })
    }
}

const STIRLING_SHIFT: f64 = 12.0;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

fn stirling_tail(z: f64) -> f64 {
    // Bernoulli-number corrections B_{2k}/(2k(2k-1) z^{2k-1})
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let w = 1.0 / (z * z);
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * w + c;
    }
    acc / z
}

fn ln_factorial_small(n: u64) -> f64 {
    let mut p = 1.0f64;
    for i in 2..=n {
        p *= i as f64;
    }
    p.ln()
}

/// Natural log of the Gamma function for positive real arguments.
pub fn log_gamma(x: f64) -> Result<f64, MathError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("log_gamma", format!("argument {x} is not a positive finite real")));
    }
    if x.fract() == 0.0 && x <= 30.0 {
        return Ok(ln_factorial_small(x as u64 - 1));
    }
    let mut z = x;
    let mut prod = 1.0f64;
    while z < STIRLING_SHIFT {
        prod *= z;
        z += 1.0;
    }
    let lg = (z - 0.5) * z.ln() - z + HALF_LN_TWO_PI + stirling_tail(z);
    Ok(lg - prod.ln())
}

/// Largest integer exactly representable in an f64 mantissa.
const EXACT_LIMIT: f64 = 9_007_199_254_740_992.0;

/// Generalized binomial Γ(a+1)/(Γ(k+1)Γ(a−k+1)).
///
/// Small `k` uses the falling-factorial recursion, which is exact for integer
/// inputs while the intermediates stay below 2^53.
pub fn binom_real(upper: f64, lower: u64) -> Result<f64, MathError> {
    let k = lower as f64;
    if !upper.is_finite() || !(upper - k > -1.0) {
        return Err(domain(
            "binom_real",
            format!("upper − lower = {} hits a Gamma pole", upper - k),
        ));
    }
    if lower == 0 {
        return Ok(1.0);
    }
    // integer upper: use the smaller of k and n−k
    let k_eff = if upper.fract() == 0.0 && upper >= k {
        lower.min((upper - k) as u64)
    } else {
        lower
    };
    if k_eff <= 64 {
        // c_{i+1} = c_i (a − i)/(i + 1); every c_i is an integer when a is
        let mut c = 1.0f64;
        for i in 0..k_eff {
            c = c * (upper - i as f64) / (i + 1) as f64;
        }
        if c.is_finite() {
            return Ok(c);
        }
    }
    Ok(ln_binom_real(upper, lower)?.exp())
}

/// Log of [`binom_real`]; all Gamma arguments are positive so the sign is always +.
pub fn ln_binom_real(upper: f64, lower: u64) -> Result<f64, MathError> {
    let k = lower as f64;
    if !upper.is_finite() || !(upper - k > -1.0) {
        return Err(domain(
            "ln_binom_real",
            format!("upper − lower = {} hits a Gamma pole", upper - k),
        ));
    }
    Ok(log_gamma(upper + 1.0)? - log_gamma(k + 1.0)? - log_gamma(upper - k + 1.0)?)
}

/// A multinomial coefficient carried both as its log and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multinomial {
    pub ln_value: f64,
    pub value: f64,
}

/// Γ(total+1)/∏Γ(parts_j+1) for an integer partition.
pub fn multinomial(total: u64, parts: &Partition) -> Result<Multinomial, MathError> {
    if parts.total() != total {
        return Err(MathError::PartitionSum {
            expected: total,
            found: parts.total(),
        });
    }
    // product of nested binomials is exact while the intermediates fit
    let mut value = 1.0f64;
    let mut running = 0u64;
    let mut exact = true;
    for &p in parts.parts() {
        running += p;
        value *= binom_real(running as f64, p)?;
        if value >= EXACT_LIMIT {
            exact = false;
            break;
        }
    }
    if exact {
        return Ok(Multinomial {
            ln_value: value.ln(),
            value,
        });
    }
    let reals: Vec<f64> = parts.parts().iter().map(|&p| p as f64).collect();
    multinomial_real(total as f64, &reals)
}

/// Real multinomial Γ(total+1)/∏Γ(parts_j+1) with Σ parts == total.
pub fn multinomial_real(total: f64, parts: &[f64]) -> Result<Multinomial, MathError> {
    let s: f64 = parts.iter().sum();
    if (s - total).abs() > 1e-9 * total.abs().max(1.0) {
        return Err(domain(
            "multinomial_real",
            format!("parts sum to {s}, expected {total}"),
        ));
    }
    let mut ln_value = log_gamma(total + 1.0)?;
    for &p in parts {
        ln_value -= log_gamma(p + 1.0)?;
    }
    Ok(Multinomial {
        ln_value,
        value: ln_value.exp(),
    })
}

/// All length-`d` partitions of `total`, in descending lexicographic order.
pub fn partitions(total: u64, d: usize) -> Vec<Partition> {
    assert!(d >= 1, "partitions need at least one mode");
    let mut out = Vec::new();
    let mut buf = vec![0u64; d];
    fill(total, 0, &mut buf, &mut out);
    out
}

fn fill(remaining: u64, slot: usize, buf: &mut Vec<u64>, out: &mut Vec<Partition>) {
    if slot + 1 == buf.len() {
        buf[slot] = remaining;
        out.push(Partition::new(buf.clone()));
        return;
    }
    for first in (0..=remaining).rev() {
        buf[slot] = first;
        fill(remaining - first, slot + 1, buf, out);
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 60.0 {
        // every term is positive, so the series stays accurate at large x
        let q = 0.25 * ax * ax;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 1.0f64;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        let r = 1.0 / (8.0 * ax);
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for k in 1..12 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd * r / k as f64;
            sum += term;
        }
        ax.exp() / (2.0 * std::f64::consts::PI * ax).sqrt() * sum
    }
}
