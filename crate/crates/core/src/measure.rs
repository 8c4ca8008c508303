use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the support of a measure lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// The unit torus, coordinates in `[0, 1)`.
    Torus,
    /// The real line.
    Real,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Torus => "torus",
            Domain::Real => "real",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A finite sum of weighted Dirac masses `Σ a_ℓ δ_{t_ℓ}`.
///
/// The support is strictly increasing and every amplitude is nonzero. The
/// zero measure has empty support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    domain: Domain,
    support: Vec<f64>,
    amplitudes: Vec<Complex64>,
}

impl DiscreteMeasure {
    pub fn new(domain: Domain, support: Vec<f64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if support.len() != amplitudes.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} support points but {} amplitudes",
                support.len(),
                amplitudes.len()
            )));
        }
        for (i, &t) in support.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidMeasure(format!("support point {i} is not finite")));
            }
            if domain == Domain::Torus && !(0.0..1.0).contains(&t) {
                return Err(Error::InvalidMeasure(format!("torus support point {t} outside [0, 1)")));
            }
        }
        if let Some(w) = support.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMeasure(format!(
                "support not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        for (i, a) in amplitudes.iter().enumerate() {
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidMeasure(format!("amplitude {i} is not finite")));
            }
            if a.norm() == 0.0 {
                return Err(Error::InvalidMeasure(format!("amplitude {i} is zero")));
            }
        }
        Ok(Self {
            domain,
            support,
            amplitudes,
        })
    }

    /// Builds a measure from unsorted atoms. Torus coordinates are wrapped into `[0, 1)`.
    pub fn from_atoms(domain: Domain, atoms: impl IntoIterator<Item = (f64, Complex64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, Complex64)> = atoms
            .into_iter()
            .map(|(t, a)| match domain {
                Domain::Torus => (wrap_unit(t), a),
                Domain::Real => (t, a),
            })
            .collect();
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (support, amplitudes) = atoms.into_iter().unzip();
        Self::new(domain, support, amplitudes)
    }

    pub fn zero(domain: Domain) -> Self {
        Self {
            domain,
            support: Vec::new(),
            amplitudes: Vec::new(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.support.iter().copied().zip(self.amplitudes.iter().copied())
    }

    /// Total-variation norm `Σ |a_ℓ|`.
    pub fn tv_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm()).sum()
    }

    pub(crate) fn require_torus(&self) -> Result<()> {
        match self.domain {
            Domain::Torus => Ok(()),
            Domain::Real => Err(Error::DomainMismatch {
                expected: "torus",
                found: "real",
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MeasureFile::from(self))?)
    }

    /// Parses `{"domain": ..., "atoms": [{"t", "re", "im"}, ...]}`.
    ///
    /// Atoms must already be sorted; duplicates and zero amplitudes are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text)?;
        let support = file.atoms.iter().map(|a| a.t).collect();
        let amplitudes = file.atoms.iter().map(|a| Complex64::new(a.re, a.im)).collect();
        Self::new(file.domain, support, amplitudes)
    }
}

pub(crate) fn wrap_unit(t: f64) -> f64 {
    let w = t.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureFile {
    domain: Domain,
    atoms: Vec<AtomRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomRecord {
    t: f64,
    re: f64,
    im: f64,
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(m: &DiscreteMeasure) -> Self {
        Self {
            domain: m.domain,
            atoms: m.atoms().map(|(t, a)| AtomRecord { t, re: a.re, im: a.im }).collect(),
        }
    }
}
