use std::f64::consts::TAU;

use rand::Rng;

use super::BaselineError;
use crate::channel::{Position, RisPhases};
use crate::oracle::{PilotOracle, QueryMode, ReconfigVariable, ScenarioKind};

/// Phase values `{2 pi k / 2^bits : k = 0..2^bits - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePhaseBook {
    bits: u32,
    values: Vec<f64>,
}

impl DiscretePhaseBook {
    pub fn new(bits: u32) -> Result<Self, BaselineError> {
        if !(1..=16).contains(&bits) {
            return Err(BaselineError::Invalid(format!(
                "phase book bits {bits} outside 1..=16"
            )));
        }
        let n = 1usize << bits;
        let values = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        Ok(Self { bits, values })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How random-max sampling draws its candidates.
#[derive(Debug, Clone, PartialEq)]
pub enum RmsSampler {
    /// I.i.d. phases from a discrete book.
    PhaseBook(DiscretePhaseBook),
    /// I.i.d. continuous phases on `[0, 2pi)`.
    UniformPhase,
    /// Uniform positions in the oracle's movable region.
    Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsOutcome {
    pub best: ReconfigVariable,
    pub best_measured: f64,
    pub queries_used: usize,
}

/// Random-max sampling: query `n` random configurations once each and keep
/// the one with the highest measured power.
pub fn rms<R: Rng + ?Sized>(
    oracle: &mut PilotOracle,
    n: usize,
    sampler: &RmsSampler,
    rng: &mut R,
) -> Result<RmsOutcome, BaselineError> {
    if n == 0 {
        return Err(BaselineError::Invalid(
            "RMS needs at least one sample".into(),
        ));
    }
    check_power_budget(oracle, n)?;
    let m = oracle.dim();
    let before = oracle.used();
    let mut best: Option<(ReconfigVariable, f64)> = None;
    for _ in 0..n {
        let candidate = match (sampler, oracle.kind()) {
            (RmsSampler::PhaseBook(book), ScenarioKind::Ris) => {
                ReconfigVariable::Phases(RisPhases::new(
                    (0..m)
                        .map(|_| book.values[rng.random_range(0..book.len())])
                        .collect(),
                ))
            }
            (RmsSampler::UniformPhase, ScenarioKind::Ris) => ReconfigVariable::Phases(
                RisPhases::new((0..m).map(|_| rng.random_range(0.0..TAU)).collect()),
            ),
            (RmsSampler::Region, ScenarioKind::Ma) => {
                let side = oracle.region_side().expect("MA oracle has a region");
                ReconfigVariable::Position(Position::new(
                    rng.random_range(0.0..=side),
                    rng.random_range(0.0..=side),
                ))
            }
            (s, k) => {
                return Err(BaselineError::Invalid(format!(
                    "sampler {s:?} does not fit a {k:?} scenario"
                )))
            }
        };
        let v = oracle.query(&candidate)?.power();
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((candidate, v));
        }
    }
    let (best, best_measured) = best.expect("n >= 1");
    Ok(RmsOutcome {
        best,
        best_measured,
        queries_used: oracle.used() - before,
    })
}

fn check_power_budget(oracle: &PilotOracle, n: usize) -> Result<(), BaselineError> {
    if oracle.mode() != QueryMode::Power {
        return Err(BaselineError::Invalid(
            "sampling methods use power measurements".into(),
        ));
    }
    if let Some(r) = oracle.remaining_queries() {
        if r < n {
            return Err(BaselineError::Invalid(format!(
                "budget {r} below sample count {n}"
            )));
        }
    }
    Ok(())
}

/// Per-element argmax of the conditional sample mean of measured power.
///
/// `samples` holds `(book index per element, measured power)`. Ties and
/// empty cells resolve to book index 0 (the smallest value wins ties).
pub fn csm_select(samples: &[(Vec<usize>, f64)], elements: usize, book_len: usize) -> Vec<usize> {
    let mut sums = vec![0.0; elements * book_len];
    let mut counts = vec![0usize; elements * book_len];
    for (idx, power) in samples {
        for (m, &k) in idx.iter().enumerate() {
            sums[m * book_len + k] += power;
            counts[m * book_len + k] += 1;
        }
    }
    (0..elements)
        .map(|m| {
            let mut best_k = 0;
            let mut best_mean = f64::NEG_INFINITY;
            for k in 0..book_len {
                let c = counts[m * book_len + k];
                if c == 0 {
                    continue;
                }
                let mean = sums[m * book_len + k] / c as f64;
                if mean > best_mean {
                    best_mean = mean;
                    best_k = k;
                }
            }
            best_k
        })
        .collect()
}

/// Conditional sample mean beamforming over a discrete phase book.
pub fn csm<R: Rng + ?Sized>(
    oracle: &mut PilotOracle,
    n: usize,
    book: &DiscretePhaseBook,
    rng: &mut R,
) -> Result<(RisPhases, usize), BaselineError> {
    if n == 0 {
        return Err(BaselineError::Invalid(
            "CSM needs at least one sample".into(),
        ));
    }
    if oracle.kind() != ScenarioKind::Ris {
        return Err(BaselineError::Invalid("CSM applies to RIS phases".into()));
    }
    check_power_budget(oracle, n)?;
    let m = oracle.dim();
    let before = oracle.used();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..book.len())).collect();
        let phases = RisPhases::new(idx.iter().map(|&k| book.values[k]).collect());
        let v = oracle.query(&ReconfigVariable::Phases(phases))?.power();
        samples.push((idx, v));
    }
    let chosen = csm_select(&samples, m, book.len());
    let phases = RisPhases::new(chosen.iter().map(|&k| book.values[k]).collect());
    Ok((phases, oracle.used() - before))
}
