//! Coordinate-wise zeroth-order gradient estimation and projected ascent.
//!
//! The estimator only ever sees objective values. Per perturbed coordinate
//! `i` it forms `(f(x + mu e_i) - f(x)) / mu`, reusing one evaluation of
//! `f(x)` for the whole block.

use std::f64::consts::TAU;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{wrap_phase, RisPhases};

/// Failure reported by an [`Objective`] evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("query budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },
    #[error("objective evaluation failed: {0}")]
    Other(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZoError {
    #[error("budget exhausted after {evaluated} evaluations")]
    BudgetExceeded {
        /// Gradient entries completed before the budget ran out (zeros elsewhere).
        partial: Vec<f64>,
        evaluated: usize,
    },
    #[error("invalid ZO parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Eval(EvalError),
}

/// Black-box objective consumed by the ZO routines.
pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&mut self, x: &[f64]) -> Result<f64, EvalError>;
    /// Remaining evaluations, `None` when unlimited.
    fn remaining(&self) -> Option<usize>;
}

/// Closure-backed objective with an optional evaluation budget.
pub struct FnObjective<F> {
    f: F,
    dim: usize,
    budget: Option<usize>,
    used: usize,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, budget: Option<usize>, f: F) -> Self {
        Self {
            f,
            dim,
            budget,
            used: 0,
        }
    }

    pub fn used(&self) -> usize {
        self.used
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64, EvalError> {
        if let Some(b) = self.budget {
            if self.used >= b {
                return Err(EvalError::BudgetExceeded { budget: b });
            }
        }
        self.used += 1;
        Ok((self.f)(x))
    }

    fn remaining(&self) -> Option<usize> {
        self.budget.map(|b| b - self.used)
    }
}

/// Feasible set of the reconfigurable variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// Phases on the unit circle, stored in `[0, 2pi)`.
    PhaseWrap,
    /// Per-coordinate clamp to `[lo, hi]`.
    Box { lo: f64, hi: f64 },
}

impl Constraint {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Constraint::PhaseWrap => x.iter().all(|&v| (0.0..TAU).contains(&v)),
            Constraint::Box { lo, hi } => x.iter().all(|&v| (lo..=hi).contains(&v)),
        }
    }
}

pub fn project(x: &[f64], constraint: Constraint) -> Vec<f64> {
    match constraint {
        Constraint::PhaseWrap => x.iter().map(|&v| wrap_phase(v)).collect(),
        Constraint::Box { lo, hi } => x.iter().map(|&v| v.clamp(lo, hi)).collect(),
    }
}

/// Monotone map applied to measured values before differencing. Maximizers
/// are unchanged; only the gradient scale differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueTransform {
    #[default]
    Identity,
    /// `sqrt(f)`: received amplitude when `f` is a power.
    Sqrt,
    /// `ln(f)`, floored at a tiny positive value.
    Log,
}

impl ValueTransform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ValueTransform::Identity => v,
            ValueTransform::Sqrt => v.max(0.0).sqrt(),
            ValueTransform::Log => v.max(1e-300).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difference {
    #[default]
    Forward,
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoParams {
    /// Smoothing radius.
    pub mu: f64,
    /// Ascent step size.
    pub eta: f64,
    /// Coordinates perturbed per iteration.
    pub block_size: usize,
    /// Cap on queries spent by this run; `None` uses whatever the objective allows.
    pub max_queries: Option<usize>,
    /// Seed for coordinate-block sampling.
    pub seed: u64,
    pub transform: ValueTransform,
    pub difference: Difference,
}

impl ZoParams {
    /// Defaults for dimension `d`: block size `max(1, d/16)`.
    pub fn for_dim(d: usize) -> Self {
        Self {
            mu: 1e-3,
            eta: 0.5,
            block_size: default_block_size(d),
            max_queries: None,
            seed: 0,
            transform: ValueTransform::Identity,
            difference: Difference::Forward,
        }
    }

    pub fn validate(&self, d: usize) -> Result<(), ZoError> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(ZoError::InvalidParameter(format!(
                "mu must be > 0, got {}",
                self.mu
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ZoError::InvalidParameter(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        if self.block_size == 0 || self.block_size > d {
            return Err(ZoError::InvalidParameter(format!(
                "block size {} outside [1, {d}]",
                self.block_size
            )));
        }
        Ok(())
    }

    /// Queries one iteration costs.
    pub fn queries_per_iteration(&self) -> usize {
        match self.difference {
            Difference::Forward => self.block_size + 1,
            Difference::Central => 2 * self.block_size + 1,
        }
    }
}

pub fn default_block_size(d: usize) -> usize {
    (d / 16).max(1)
}

/// A probe point and its raw objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Gradient estimate plus the points evaluated while forming it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    pub probes: Vec<Probe>,
}

/// Perturbed point for coordinate `i`. Under a box constraint a step that
/// would leave the box is taken backwards instead, returning the signed
/// displacement actually applied.
fn perturb(x: &[f64], i: usize, step: f64, constraint: Option<Constraint>) -> (Vec<f64>, f64) {
    let mut xp = x.to_vec();
    let mut delta = step;
    match constraint {
        Some(Constraint::Box { lo, hi }) => {
            if x[i] + step > hi && x[i] - step >= lo {
                delta = -step;
            }
            xp[i] = (x[i] + delta).clamp(lo, hi);
            delta = xp[i] - x[i];
        }
        Some(Constraint::PhaseWrap) => xp[i] = wrap_phase(x[i] + step),
        None => xp[i] = x[i] + step,
    }
    (xp, delta)
}

fn eval_probe<O: Objective + ?Sized>(
    obj: &mut O,
    x: Vec<f64>,
    probes: &mut Vec<Probe>,
) -> Result<f64, EvalError> {
    let value = obj.evaluate(&x)?;
    probes.push(Probe { x, value });
    Ok(value)
}

fn budget_error(err: EvalError, partial: Vec<f64>, evaluated: usize) -> ZoError {
    match err {
        EvalError::BudgetExceeded { .. } => ZoError::BudgetExceeded { partial, evaluated },
        other => ZoError::Eval(other),
    }
}

/// Forward-difference gradient over `coords`; consumes `coords.len() + 1`
/// evaluations. Entries outside `coords` are zero.
pub fn zo_gradient<O: Objective + ?Sized>(
    obj: &mut O,
    x: &[f64],
    mu: f64,
    coords: &[usize],
) -> Result<Vec<f64>, ZoError> {
    estimate_gradient(
        obj,
        x,
        mu,
        coords,
        None,
        ValueTransform::Identity,
        Difference::Forward,
    )
    .map(|g| g.gradient)
}

/// General estimator used by [`run_zo`]: optional feasibility-aware
/// perturbation, value transform and central differences.
pub fn estimate_gradient<O: Objective + ?Sized>(
    obj: &mut O,
    x: &[f64],
    mu: f64,
    coords: &[usize],
    constraint: Option<Constraint>,
    transform: ValueTransform,
    difference: Difference,
) -> Result<GradientEstimate, ZoError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ZoError::InvalidParameter(format!(
            "mu must be > 0, got {mu}"
        )));
    }
    let d = x.len();
    if let Some(&bad) = coords.iter().find(|&&i| i >= d) {
        return Err(ZoError::InvalidParameter(format!(
            "coordinate {bad} >= dimension {d}"
        )));
    }
    let mut gradient = vec![0.0; d];
    let mut probes = Vec::with_capacity(coords.len() + 1);
    let base =
        eval_probe(obj, x.to_vec(), &mut probes).map_err(|e| budget_error(e, vec![0.0; d], 0))?;
    let t_base = transform.apply(base);

    for &i in coords {
        match difference {
            Difference::Forward => {
                let (xp, delta) = perturb(x, i, mu, constraint);
                let v = eval_probe(obj, xp, &mut probes)
                    .map_err(|e| budget_error(e, gradient.clone(), probes.len()))?;
                if delta != 0.0 {
                    gradient[i] = (transform.apply(v) - t_base) / delta;
                }
            }
            Difference::Central => {
                let (xp, dp) = perturb(x, i, mu, constraint);
                let (xm, dm) = perturb(x, i, -mu, constraint);
                let vp = eval_probe(obj, xp, &mut probes)
                    .map_err(|e| budget_error(e, gradient.clone(), probes.len()))?;
                let vm = eval_probe(obj, xm, &mut probes)
                    .map_err(|e| budget_error(e, gradient.clone(), probes.len()))?;
                if dp != dm {
                    gradient[i] = (transform.apply(vp) - transform.apply(vm)) / (dp - dm);
                }
            }
        }
    }
    Ok(GradientEstimate { gradient, probes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    /// Base point `x^t` of this iteration.
    pub x: Vec<f64>,
    /// Highest objective value observed so far.
    pub best_value: f64,
    pub queries_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.points.len()
    }

    /// CSV with columns `iter,queries_used,best_power`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,queries_used,best_power\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.iteration, p.queries_used, p.best_value
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoOutcome {
    /// Best queried variable; `x0` when nothing was queried.
    pub x_best: Vec<f64>,
    /// Its measured value, `None` when nothing was queried.
    pub best_value: Option<f64>,
    pub trajectory: Trajectory,
    pub queries_used: usize,
}

/// Projected ZO gradient ascent from `x0`.
///
/// Each iteration samples a fresh block of `block_size` coordinates, spends
/// `block_size + 1` queries on the gradient estimate (forward differences)
/// and moves to `project(x + eta * g)`. Stops as soon as the remaining
/// budget cannot pay for a full iteration.
pub fn run_zo<O: Objective + ?Sized>(
    obj: &mut O,
    x0: &[f64],
    params: &ZoParams,
    constraint: Constraint,
) -> Result<ZoOutcome, ZoError> {
    let d = x0.len();
    params.validate(d)?;
    if obj.dim() != d {
        return Err(ZoError::InvalidParameter(format!(
            "x0 has dimension {d}, objective expects {}",
            obj.dim()
        )));
    }
    if !constraint.contains(x0) {
        return Err(ZoError::InvalidParameter(
            "x0 violates the constraint".into(),
        ));
    }

    let per_iter = params.queries_per_iteration();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x = x0.to_vec();
    let mut best: Option<Probe> = None;
    let mut trajectory = Trajectory::default();
    let mut used = 0usize;

    loop {
        let remaining = match (obj.remaining(), params.max_queries) {
            (Some(r), Some(m)) => Some(r.min(m.saturating_sub(used))),
            (Some(r), None) => Some(r),
            (None, Some(m)) => Some(m.saturating_sub(used)),
            (None, None) => None,
        };
        match remaining {
            Some(r) if r < per_iter => break,
            // an unlimited objective with no cap would never stop
            None => {
                return Err(ZoError::InvalidParameter(
                    "unbounded budget: set max_queries".into(),
                ))
            }
            _ => {}
        }

        let mut coords = sample(&mut rng, d, params.block_size).into_vec();
        coords.sort_unstable();
        let est = estimate_gradient(
            obj,
            &x,
            params.mu,
            &coords,
            Some(constraint),
            params.transform,
            params.difference,
        )?;
        used += est.probes.len();
        for p in est.probes {
            if best.as_ref().is_none_or(|b| p.value > b.value) {
                best = Some(p);
            }
        }
        trajectory.points.push(TrajectoryPoint {
            iteration: trajectory.points.len(),
            x: x.clone(),
            best_value: best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value),
            queries_used: used,
        });

        let stepped: Vec<f64> = x
            .iter()
            .zip(&est.gradient)
            .map(|(xi, gi)| xi + params.eta * gi)
            .collect();
        x = project(&stepped, constraint);
    }

    let (x_best, best_value) = match best {
        Some(b) => (b.x, Some(b.value)),
        None => (x0.to_vec(), None),
    };
    Ok(ZoOutcome {
        x_best,
        best_value,
        trajectory,
        queries_used: used,
    })
}

/// Snap each phase to the nearest point of `{2 pi k / 2^bits}`, ties going
/// to the smaller `k`.
pub fn quantize_phases(phases: &[f64], bits: u32) -> RisPhases {
    assert!((1..=30).contains(&bits), "quantizer bits must be in 1..=30");
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    let snapped = phases
        .iter()
        .map(|&p| {
            let t = wrap_phase(p) / step;
            let lo = t.floor();
            let frac = t - lo;
            let lo = lo as u64 % levels;
            let k = if frac > 0.5 {
                (lo + 1) % levels
            } else if frac < 0.5 {
                lo
            } else {
                lo.min((lo + 1) % levels)
            };
            k as f64 * step
        })
        .collect();
    RisPhases::new(snapped)
}
