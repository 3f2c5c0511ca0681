//! Local ε-DP mechanisms modelled as channels `p(y|x)`.
//!
//! Adjacency follows the discrete metric, so every pair of distinct inputs is
//! adjacent and the realized ε of a channel is the largest log-ratio
//! `ln p(y|x)/p(y|x')` over all inputs `x ≠ x'` and outputs `y`.

use std::collections::HashMap;
use std::f64::consts::LOG2_E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infocore::{self, Dist, Extended, Joint};
use crate::TOLERANCE;

/// A row-stochastic matrix from input labels to output labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct Channel {
    inputs: Vec<String>,
    outputs: Vec<String>,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    inputs: Vec<String>,
    outputs: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawChannel> for Channel {
    type Error = Error;

    fn try_from(raw: RawChannel) -> Result<Self> {
        Channel::new(raw.inputs, raw.outputs, raw.rows)
    }
}

impl Channel {
    pub fn new<S: Into<String>, T: Into<String>>(
        inputs: Vec<S>,
        outputs: Vec<T>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let inputs: Vec<String> = inputs.into_iter().map(Into::into).collect();
        let outputs: Vec<String> = outputs.into_iter().map(Into::into).collect();
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::domain(
                "channel needs at least one input and one output",
            ));
        }
        for (what, labels) in [("input", &inputs), ("output", &outputs)] {
            let mut sorted: Vec<&String> = labels.iter().collect();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::domain(format!("duplicate {what} label")));
            }
        }
        if rows.len() != inputs.len() {
            return Err(Error::domain(format!(
                "{} rows for {} inputs",
                rows.len(),
                inputs.len()
            )));
        }
        for (x, row) in inputs.iter().zip(&rows) {
            if row.len() != outputs.len() {
                return Err(Error::domain(format!("row {x:?} has the wrong width")));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::domain(format!("row {x:?} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > TOLERANCE {
                return Err(Error::domain(format!("row {x:?} sums to {total}")));
            }
        }
        Ok(Channel {
            inputs,
            outputs,
            rows,
        })
    }

    /// The identity channel on `labels`: releases the input verbatim.
    pub fn identity<S: Into<String> + Clone>(labels: Vec<S>) -> Result<Self> {
        let n = labels.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Channel::new(labels.clone(), labels, rows)
    }

    /// Every input maps to the same output distribution.
    pub fn constant<S: Into<String>>(inputs: Vec<S>, output: &Dist) -> Result<Self> {
        let n = inputs.len();
        Channel::new(
            inputs,
            output.outcomes().to_vec(),
            vec![output.probs().to_vec(); n],
        )
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Output distribution for input index `x`.
    pub fn row_dist(&self, x: usize) -> Dist {
        Dist::new(self.outputs.clone(), self.rows[x].clone())
            .expect("channel rows are valid distributions")
    }

    /// Joint distribution of (input, output) under `prior`.
    pub fn joint(&self, prior: &Dist) -> Result<Joint> {
        if prior.outcomes() != self.inputs.as_slice() {
            return Err(Error::domain("prior is not over the channel's input space"));
        }
        Ok(Joint::from_prior_and_rows(prior, &self.outputs, &self.rows))
    }

    /// Mutual information between input and output under `prior`.
    pub fn mutual_information(&self, prior: &Dist) -> Result<f64> {
        Ok(infocore::mutual_information(&self.joint(prior)?))
    }

    pub fn uniform_prior(&self) -> Dist {
        Dist::uniform(self.inputs.clone()).expect("channel has inputs")
    }
}

/// The input pair and output attaining a channel's realized ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: String,
    pub x_prime: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsReport {
    pub realized_eps: Extended,
    pub witness: Option<Witness>,
}

/// Outcome of checking `I(X; A(X)) ≤ ε·log₂ e` for one channel and prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub eps: Extended,
    pub mi_sh: f64,
    pub bound_sh: Extended,
    pub holds: bool,
    pub witness: Option<Witness>,
}

/// k-ary randomized response: keep the true value with probability
/// `e^ε/(e^ε + k − 1)`, otherwise report one of the other values uniformly.
pub fn randomized_response(k: usize, eps: f64) -> Result<Channel> {
    if k < 2 {
        return Err(Error::domain(format!(
            "randomized response needs k >= 2, got {k}"
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::domain(format!(
            "eps must be finite and positive, got {eps}"
        )));
    }
    let denom = eps.exp() + (k - 1) as f64;
    let keep = eps.exp() / denom;
    let flip = 1.0 / denom;
    let labels: Vec<String> = (0..k).map(|i| i.to_string()).collect();
    let rows = (0..k)
        .map(|i| (0..k).map(|j| if i == j { keep } else { flip }).collect())
        .collect();
    Channel::new(labels.clone(), labels, rows)
}

/// Tightest ε the channel satisfies under discrete-metric adjacency.
///
/// `0/0` counts as ratio 1; a positive entry over a zero entry is unbounded.
pub fn realized_epsilon(c: &Channel) -> EpsReport {
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for (x, row) in c.rows.iter().enumerate() {
        for (xp, other) in c.rows.iter().enumerate() {
            if x == xp {
                continue;
            }
            for (y, (&p, &q)) in row.iter().zip(other).enumerate() {
                let log_ratio = match (p > 0.0, q > 0.0) {
                    (true, false) => {
                        return EpsReport {
                            realized_eps: Extended::Unbounded,
                            witness: Some(c.witness(x, xp, y)),
                        }
                    }
                    (false, _) => 0.0,
                    (true, true) => (p / q).ln(),
                };
                if best.is_none_or(|(b, ..)| log_ratio > b) {
                    best = Some((log_ratio, x, xp, y));
                }
            }
        }
    }
    match best {
        Some((eps, x, xp, y)) => EpsReport {
            realized_eps: Extended::Finite(eps.max(0.0)),
            witness: Some(c.witness(x, xp, y)),
        },
        None => EpsReport {
            realized_eps: Extended::Finite(0.0),
            witness: None,
        },
    }
}

impl Channel {
    fn witness(&self, x: usize, xp: usize, y: usize) -> Witness {
        Witness {
            x: self.inputs[x].clone(),
            x_prime: self.inputs[xp].clone(),
            y: self.outputs[y].clone(),
        }
    }

    /// Log-ratio `ln p(y|x)/p(y|x')` at a witness, if finite.
    pub fn witness_log_ratio(&self, w: &Witness) -> Option<f64> {
        let x = self.inputs.iter().position(|l| *l == w.x)?;
        let xp = self.inputs.iter().position(|l| *l == w.x_prime)?;
        let y = self.outputs.iter().position(|l| *l == w.y)?;
        let (p, q) = (self.rows[x][y], self.rows[xp][y]);
        match (p > 0.0, q > 0.0) {
            (true, true) => Some((p / q).ln()),
            (false, _) => Some(0.0),
            (true, false) => None,
        }
    }
}

/// Upper bound in Sh on the information released by `n` invocations of an
/// ε-DP mechanism: `n·ε·log₂ e`.
pub fn dp_to_mi_bound(eps: f64, n: u32) -> Result<f64> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::domain(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    Ok(n as f64 * eps * LOG2_E)
}

/// Computes the mutual information under `prior` and compares it with the
/// bound implied by the channel's realized ε.
pub fn check_mi_bound(c: &Channel, prior: &Dist) -> Result<BoundCertificate> {
    let mi_sh = c.mutual_information(prior)?;
    let report = realized_epsilon(c);
    let bound_sh = match report.realized_eps {
        Extended::Finite(eps) => Extended::Finite(dp_to_mi_bound(eps, 1)?),
        Extended::Unbounded => Extended::Unbounded,
    };
    Ok(BoundCertificate {
        eps: report.realized_eps,
        mi_sh,
        bound_sh,
        holds: Extended::Finite(mi_sh).le_within(bound_sh, TOLERANCE),
        witness: report.witness,
    })
}

/// Product channel: both mechanisms run on the same input with independent
/// randomness. Output labels are `"y1,y2"`.
pub fn compose(c1: &Channel, c2: &Channel) -> Result<Channel> {
    if c1.inputs != c2.inputs {
        return Err(Error::domain("composed channels must share an input space"));
    }
    let outputs: Vec<String> = c1
        .outputs
        .iter()
        .flat_map(|a| c2.outputs.iter().map(move |b| format!("{a},{b}")))
        .collect();
    let rows = c1
        .rows
        .iter()
        .zip(&c2.rows)
        .map(|(r1, r2)| {
            r1.iter()
                .flat_map(|a| r2.iter().map(move |b| a * b))
                .collect()
        })
        .collect();
    // Composite labels can collide when component labels contain commas.
    Channel::new(c1.inputs.clone(), outputs, rows)
}

/// Merges output columns according to `map`. New outputs keep the order in
/// which they first appear.
pub fn post_process<F>(c: &Channel, map: F) -> Channel
where
    F: Fn(&str) -> String,
{
    let mut outputs: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let targets: Vec<usize> = c
        .outputs
        .iter()
        .map(|y| {
            let label = map(y);
            *index.entry(label.clone()).or_insert_with(|| {
                outputs.push(label);
                outputs.len() - 1
            })
        })
        .collect();
    let rows = c
        .rows
        .iter()
        .map(|row| {
            let mut merged = vec![0.0; outputs.len()];
            for (&p, &t) in row.iter().zip(&targets) {
                merged[t] += p;
            }
            merged
        })
        .collect();
    Channel {
        inputs: c.inputs.clone(),
        outputs,
        rows,
    }
}

/// A channel with small mutual information but no finite ε:
/// `p(1|0) = 0`, `p(1|1) = 0.01`, under a uniform prior.
pub fn mi_without_dp_example() -> (Channel, BoundCertificate) {
    let c = Channel::new(
        vec!["0", "1"],
        vec!["0", "1"],
        vec![vec![1.0, 0.0], vec![0.99, 0.01]],
    )
    .expect("fixed channel is stochastic");
    let cert = check_mi_bound(&c, &c.uniform_prior()).expect("uniform prior matches inputs");
    (c, cert)
}

/// Draws a flat-Dirichlet probability vector, clipped below at `floor` and
/// renormalized.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let clipped: Vec<f64> = raw.iter().map(|v| (v / total).max(floor)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.into_iter().map(|v| v / total).collect()
}

/// A random channel whose rows are clipped Dirichlet draws, so ε is finite.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize) -> Channel {
    let rows = (0..inputs)
        .map(|_| random_simplex(rng, outputs, 1e-6))
        .collect();
    Channel::new(
        (0..inputs).map(|i| format!("x{i}")).collect(),
        (0..outputs).map(|j| format!("y{j}")).collect(),
        rows,
    )
    .expect("clipped simplex rows are stochastic")
}

pub fn random_prior<R: Rng + ?Sized>(rng: &mut R, c: &Channel) -> Dist {
    let probs = random_simplex(rng, c.inputs.len(), 0.0);
    Dist::new(c.inputs.clone(), probs).expect("simplex draw is a distribution")
}

/// Per-case RNG for sweeps: one ChaCha stream per case under a shared seed.
pub fn case_rng(seed: u64, case: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCase {
    pub case: u64,
    pub inputs: usize,
    pub outputs: usize,
    pub eps: f64,
    pub mi_sh: f64,
    pub bound_sh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub seed: u64,
    pub cases: u64,
    pub violations: Vec<SweepCase>,
    /// Largest `mi_sh / bound_sh` observed over cases with a positive bound.
    pub max_ratio: f64,
}

/// Checks the mutual-information bound on `cases` random channels and priors
/// with between 2 and `max_dim` inputs and outputs, in parallel.
pub fn bound_sweep(seed: u64, cases: u64, max_dim: usize) -> SweepSummary {
    let max_dim = max_dim.max(2);
    let results: Vec<SweepCase> = (0..cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = case_rng(seed, case);
            let inputs = rng.random_range(2..=max_dim);
            let outputs = rng.random_range(2..=max_dim);
            let c = random_channel(&mut rng, inputs, outputs);
            let prior = random_prior(&mut rng, &c);
            let cert = check_mi_bound(&c, &prior).expect("prior built on channel inputs");
            SweepCase {
                case,
                inputs,
                outputs,
                eps: cert.eps.finite().expect("clipped channels have finite eps"),
                mi_sh: cert.mi_sh,
                bound_sh: cert
                    .bound_sh
                    .finite()
                    .expect("finite eps gives finite bound"),
            }
        })
        .collect();
    let max_ratio = results
        .iter()
        .filter(|r| r.bound_sh > 0.0)
        .map(|r| r.mi_sh / r.bound_sh)
        .fold(0.0, f64::max);
    let violations = results
        .into_iter()
        .filter(|r| r.mi_sh > r.bound_sh + TOLERANCE)
        .collect();
    SweepSummary {
        seed,
        cases,
        violations,
        max_ratio,
    }
}
