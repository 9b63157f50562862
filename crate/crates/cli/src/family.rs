//! Family flags shared by `benchmark` and `sweep`, with nearest-family suggestions.

use clap::Args;
use qbench::certify::{FamilyKind, GainValue, SpecFile};

use crate::error::CliError;

/// Family identity and its shape parameters.
#[derive(Args, Debug, Clone)]
pub struct FamilyParams {
    /// qudit, spin, coherent, squeezed_vacuum, gaussian_1mode or perelomov.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub j: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Complex gain as `re` or `re,im`.
    #[arg(long, value_parser = parse_gain, allow_hyphen_values = true)]
    pub gain: Option<GainValue>,
    /// k-copy test weights p(1),..,p(M), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub kweights: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone)]
pub struct FamilyFlags {
    #[command(flatten)]
    pub params: FamilyParams,
    #[arg(long = "N")]
    pub n: u32,
    #[arg(long = "M")]
    pub m: u32,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

fn parse_gain(s: &str) -> Result<GainValue, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("gain component {t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(GainValue::Real(num(re)?)),
        [re, im] => Ok(GainValue::Pair([num(re)?, num(im)?])),
        _ => Err(format!("gain {s:?} must be `re` or `re,im`")),
    }
}

/// Flags each family accepts besides N, M and the k-copy weights.
pub fn allowed(kind: FamilyKind) -> &'static [&'static str] {
    match kind {
        FamilyKind::Qudit => &["d", "beta"],
        FamilyKind::Spin => &["j", "k", "beta"],
        FamilyKind::Coherent => &["gain", "lambda"],
        FamilyKind::SqueezedVacuum => &["beta"],
        FamilyKind::Gaussian1Mode => &["lambda", "beta"],
        FamilyKind::Perelomov => &["j", "k", "beta"],
    }
}

/// The family whose flag set best covers `given`: most flags used, fewest left over.
pub fn nearest_for_flags(given: &[&str], exclude: FamilyKind) -> FamilyKind {
    let score = |k: FamilyKind| {
        let a = allowed(k);
        let hit = given.iter().filter(|f| a.contains(f)).count() as i64;
        let miss = given.len() as i64 - hit;
        2 * hit - 2 * miss - a.len() as i64
    };
    FamilyKind::ALL
        .into_iter()
        .filter(|&k| k != exclude)
        .max_by_key(|&k| score(k))
        .expect("several families")
}

/// The catalog name closest to a misspelled one.
pub fn nearest_by_name(name: &str) -> FamilyKind {
    let key = name.trim().to_ascii_lowercase().replace('-', "_");
    FamilyKind::ALL
        .into_iter()
        .max_by(|a, b| {
            strsim::jaro_winkler(&key, a.canonical()).total_cmp(&strsim::jaro_winkler(&key, b.canonical()))
        })
        .expect("non-empty catalog")
}

impl FamilyParams {
    pub fn kind(&self) -> Result<FamilyKind, CliError> {
        self.family.parse().map_err(|_| {
            CliError::Usage(format!(
                "unknown family {:?}; nearest valid family: {}",
                self.family,
                nearest_by_name(&self.family).canonical()
            ))
        })
    }

    fn shape_flags(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.d.is_some() {
            v.push("d");
        }
        if self.j.is_some() {
            v.push("j");
        }
        if self.k.is_some() {
            v.push("k");
        }
        if self.gain.is_some() {
            v.push("gain");
        }
        v
    }

    /// Reject flags the family does not take, naming the family they would suit.
    pub fn check(&self, width_flags: &[&'static str]) -> Result<FamilyKind, CliError> {
        let kind = self.kind()?;
        let mut given = self.shape_flags();
        given.extend_from_slice(width_flags);
        let bad: Vec<&str> = given.iter().copied().filter(|f| !allowed(kind).contains(f)).collect();
        if !bad.is_empty() {
            let listed = bad.iter().map(|f| format!("--{f}")).collect::<Vec<_>>().join(", ");
            return Err(CliError::Usage(format!(
                "--family {} does not take {listed}; nearest valid family for these flags: {}",
                kind.canonical(),
                nearest_for_flags(&given, kind).canonical()
            )));
        }
        Ok(kind)
    }

    pub fn spec_file(&self, kind: FamilyKind, n: u32, m: u32, beta: Option<f64>, lambda: Option<f64>) -> SpecFile {
        SpecFile {
            family: kind.canonical().into(),
            d: self.d,
            j: self.j,
            k: self.k,
            gain: self.gain,
            n,
            m,
            beta,
            lambda,
            k_weights: self.kweights.clone(),
            formula_id: None,
        }
    }
}

impl FamilyFlags {
    pub fn to_spec_file(&self) -> Result<SpecFile, CliError> {
        let mut widths = Vec::new();
        if self.beta.is_some() {
            widths.push("beta");
        }
        if self.lambda.is_some() {
            widths.push("lambda");
        }
        let kind = self.params.check(&widths)?;
        Ok(self.params.spec_file(kind, self.n, self.m, self.beta, self.lambda))
    }
}
