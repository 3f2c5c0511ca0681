//! Finite probability kernel and the information measures built on it.
//!
//! All logarithms are base 2, so every quantity is in Shannons (Sh). The
//! convention `0·log₂ 0 = 0` holds throughout.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::TOLERANCE;

/// An extended non-negative real: either a finite value or unbounded.
///
/// Used for self-information of impossible outcomes and for the realized ε of
/// channels that separate inputs perfectly. Serialized as a JSON number, or as
/// the string `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Unbounded,
}

/// Unbounded absorbs.
impl std::ops::Add for Extended {
    type Output = Extended;

    fn add(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Unbounded,
        }
    }
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Extended::Unbounded)
    }

    /// `self ≤ other + tol`, with unbounded ordered above every finite value.
    pub fn le_within(self, other: Extended, tol: f64) -> bool {
        match (self, other) {
            (_, Extended::Unbounded) => true,
            (Extended::Unbounded, Extended::Finite(_)) => false,
            (Extended::Finite(a), Extended::Finite(b)) => a <= b + tol,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Extended::Finite(v)),
            Raw::Tag(t) if t == "unbounded" => Ok(Extended::Unbounded),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"unbounded\", got {t:?}"
            ))),
        }
    }
}

/// `-p·log₂ p`, zero at `p = 0`.
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

fn check_probs(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::domain(format!("{what} has no outcomes")));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::domain(format!("{what} has invalid probability {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > TOLERANCE {
        return Err(Error::domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

fn check_labels(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::domain(format!("duplicate {what} label {l:?}")));
        }
    }
    Ok(())
}

/// A finite probability distribution over labelled outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist")]
pub struct Dist {
    outcomes: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    outcomes: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<RawDist> for Dist {
    type Error = Error;

    fn try_from(raw: RawDist) -> Result<Self> {
        Dist::new(raw.outcomes, raw.probs)
    }
}

impl Dist {
    pub fn new<S: Into<String>>(outcomes: Vec<S>, probs: Vec<f64>) -> Result<Self> {
        let outcomes: Vec<String> = outcomes.into_iter().map(Into::into).collect();
        if outcomes.len() != probs.len() {
            return Err(Error::domain(format!(
                "{} outcomes but {} probabilities",
                outcomes.len(),
                probs.len()
            )));
        }
        check_labels(&outcomes, "outcome")?;
        check_probs(&probs, "distribution")?;
        Ok(Dist { outcomes, probs })
    }

    pub fn uniform<S: Into<String>>(outcomes: Vec<S>) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::domain(
                "uniform distribution needs at least one outcome",
            ));
        }
        Dist::new(outcomes, vec![1.0 / n as f64; n])
    }

    pub fn point_mass<S: Into<String>>(outcomes: Vec<S>, at: usize) -> Result<Self> {
        let n = outcomes.len();
        if at >= n {
            return Err(Error::domain(format!("point mass index {at} out of range")));
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Dist::new(outcomes, probs)
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn index_of(&self, outcome: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }

    pub fn prob(&self, outcome: &str) -> Option<f64> {
        self.index_of(outcome).map(|i| self.probs[i])
    }
}

/// A joint distribution of two finite variables, stored as a dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct Joint {
    x: Vec<String>,
    y: Vec<String>,
    mass: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    x: Vec<String>,
    y: Vec<String>,
    mass: Vec<Vec<f64>>,
}

impl TryFrom<RawJoint> for Joint {
    type Error = Error;

    fn try_from(raw: RawJoint) -> Result<Self> {
        Joint::new(raw.x, raw.y, raw.mass)
    }
}

impl Joint {
    pub fn new<S: Into<String>, T: Into<String>>(
        x: Vec<S>,
        y: Vec<T>,
        mass: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let x: Vec<String> = x.into_iter().map(Into::into).collect();
        let y: Vec<String> = y.into_iter().map(Into::into).collect();
        check_labels(&x, "x")?;
        check_labels(&y, "y")?;
        if mass.len() != x.len() || mass.iter().any(|r| r.len() != y.len()) {
            return Err(Error::domain(format!(
                "joint mass must be {}x{}",
                x.len(),
                y.len()
            )));
        }
        let flat: Vec<f64> = mass.iter().flatten().copied().collect();
        check_probs(&flat, "joint")?;
        Ok(Joint { x, y, mass })
    }

    /// Product distribution `p(x)·p(y)`.
    pub fn independent(px: &Dist, py: &Dist) -> Self {
        let mass = px
            .probs
            .iter()
            .map(|a| py.probs.iter().map(|b| a * b).collect())
            .collect();
        Joint {
            x: px.outcomes.clone(),
            y: py.outcomes.clone(),
            mass,
        }
    }

    /// Builds a joint from a prior and a row-stochastic matrix `p(y|x)`.
    pub(crate) fn from_prior_and_rows(prior: &Dist, outputs: &[String], rows: &[Vec<f64>]) -> Self {
        let mass = prior
            .probs
            .iter()
            .zip(rows)
            .map(|(px, row)| row.iter().map(|pyx| px * pyx).collect())
            .collect();
        Joint {
            x: prior.outcomes.clone(),
            y: outputs.to_vec(),
            mass,
        }
    }

    pub fn x_outcomes(&self) -> &[String] {
        &self.x
    }

    pub fn y_outcomes(&self) -> &[String] {
        &self.y
    }

    pub fn mass(&self) -> &[Vec<f64>] {
        &self.mass
    }

    pub fn marginal_x(&self) -> Dist {
        let probs = self.mass.iter().map(|r| r.iter().sum()).collect();
        Dist {
            outcomes: self.x.clone(),
            probs,
        }
    }

    pub fn marginal_y(&self) -> Dist {
        let probs = (0..self.y.len())
            .map(|j| self.mass.iter().map(|r| r[j]).sum())
            .collect();
        Dist {
            outcomes: self.y.clone(),
            probs,
        }
    }

    pub fn transpose(&self) -> Joint {
        let mass = (0..self.y.len())
            .map(|j| self.mass.iter().map(|r| r[j]).collect())
            .collect();
        Joint {
            x: self.y.clone(),
            y: self.x.clone(),
            mass,
        }
    }
}

/// Structural/metrical content of a representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoMeasure {
    /// Selective information content in Sh.
    pub selective_sh: f64,
    /// Number of distinguishable groups.
    pub logons: u64,
    /// Number of indistinguishable elements.
    pub metrons: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unbounded: bool,
}

impl InfoMeasure {
    /// A purely selective measure with no structural or metrical component.
    pub fn selective(sh: f64) -> Self {
        InfoMeasure {
            selective_sh: sh,
            logons: 0,
            metrons: 0,
            unbounded: false,
        }
    }
}

/// A partition of element ids into distinguishable groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<String>>", into = "Vec<Vec<String>>")]
pub struct Representation {
    groups: Vec<Vec<String>>,
}

impl TryFrom<Vec<Vec<String>>> for Representation {
    type Error = Error;

    fn try_from(groups: Vec<Vec<String>>) -> Result<Self> {
        Representation::new(groups)
    }
}

impl From<Representation> for Vec<Vec<String>> {
    fn from(r: Representation) -> Self {
        r.groups
    }
}

impl Representation {
    pub fn new<S: Into<String>>(groups: Vec<Vec<S>>) -> Result<Self> {
        let groups: Vec<Vec<String>> = groups
            .into_iter()
            .map(|g| g.into_iter().map(Into::into).collect())
            .collect();
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::domain("representation contains an empty group"));
        }
        let all: Vec<String> = groups.iter().flatten().cloned().collect();
        check_labels(&all, "element")?;
        Ok(Representation { groups })
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }
}

/// Self-information `−log₂ p(outcome)` in Sh.
pub fn self_information(d: &Dist, outcome: &str) -> Result<Extended> {
    let p = d
        .prob(outcome)
        .ok_or_else(|| Error::domain(format!("unknown outcome {outcome:?}")))?;
    if p > 0.0 {
        Ok(Extended::Finite(-p.log2()))
    } else {
        Ok(Extended::Unbounded)
    }
}

pub fn entropy(d: &Dist) -> f64 {
    d.probs.iter().map(|&p| plogp(p)).sum()
}

/// Entropy of an unnormalized-free mass vector (already summing to 1).
pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum()
}

/// `E[log₂ p(x,y)/(p(x)p(y))]`; zero-mass cells contribute nothing.
pub fn mutual_information(j: &Joint) -> f64 {
    let px = j.marginal_x();
    let py = j.marginal_y();
    let mut mi = 0.0;
    for (row, &pa) in j.mass.iter().zip(&px.probs) {
        for (&pab, &pb) in row.iter().zip(&py.probs) {
            if pab > 0.0 {
                mi += pab * (pab / (pa * pb)).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Total variation distance `½Σ|p − q|` between distributions on the same outcomes.
pub fn total_variation(p: &Dist, q: &Dist) -> Result<f64> {
    if p.outcomes != q.outcomes {
        return Err(Error::domain(
            "total variation needs identical outcome spaces",
        ));
    }
    Ok(0.5
        * p.probs
            .iter()
            .zip(&q.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Logons, metrons and selective content of an explicit partition.
pub fn structural_metric_content(r: &Representation) -> Result<InfoMeasure> {
    if r.groups.is_empty() {
        return Err(Error::domain("empty representation"));
    }
    let logons = r.groups.len() as u64;
    let metrons = r.groups.iter().map(|g| g.len() as u64).sum();
    Ok(InfoMeasure {
        selective_sh: (logons as f64).log2(),
        logons,
        metrons,
        unbounded: false,
    })
}
