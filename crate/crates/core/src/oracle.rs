//! Pilot-driven black-box access to a scenario.
//!
//! Every optimizer and baseline sees the channel only through
//! [`PilotOracle::query`]. Each call models one pilot symbol: it is counted
//! against the budget and logged in the [`QueryLedger`]. The scenario itself
//! is never handed back out.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    complex_gaussian, fingerprint, ma_channel, ris_end_to_end, CascadedChannel, ChannelError,
    PathSet, Position, RisPhases,
};
use crate::zo::{quantize_phases, EvalError, Objective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("pilot budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },
    #[error("variable does not match the scenario: {0}")]
    DimensionMismatch(String),
    #[error("position ({x}, {y}) outside the movable region [0, {side}]^2")]
    OutOfRegion { x: f64, y: f64, side: f64 },
    #[error("SNR is infinite for zero reporting noise")]
    InfiniteSnr,
    #[error("invalid oracle setting: {0}")]
    InvalidSetting(String),
}

impl From<ChannelError> for OracleError {
    fn from(e: ChannelError) -> Self {
        OracleError::DimensionMismatch(e.to_string())
    }
}

impl From<OracleError> for EvalError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExceeded { budget } => EvalError::BudgetExceeded { budget },
            other => EvalError::Other(other.to_string()),
        }
    }
}

/// Ground truth for one coherence interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Ris(CascadedChannel),
    /// Movable antenna confined to `[0, side]^2`.
    Ma {
        paths: PathSet,
        side: f64,
    },
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Ris(_) => ScenarioKind::Ris,
            Scenario::Ma { .. } => ScenarioKind::Ma,
        }
    }

    /// Dimension of the flattened reconfigurable variable.
    pub fn dim(&self) -> usize {
        match self {
            Scenario::Ris(ch) => ch.elements(),
            Scenario::Ma { .. } => 2,
        }
    }

    /// Noiseless end-to-end channel at `a`.
    pub fn channel(&self, a: &ReconfigVariable) -> Result<Complex64, OracleError> {
        match (self, a) {
            (Scenario::Ris(ch), ReconfigVariable::Phases(p)) => Ok(ris_end_to_end(ch, p)?),
            (Scenario::Ma { paths, side }, ReconfigVariable::Position(p)) => {
                let inside = |v: f64| (0.0..=*side).contains(&v);
                if !(inside(p.x) && inside(p.y)) {
                    return Err(OracleError::OutOfRegion {
                        x: p.x,
                        y: p.y,
                        side: *side,
                    });
                }
                Ok(ma_channel(paths, *p))
            }
            _ => Err(OracleError::DimensionMismatch(format!(
                "{:?} variable for a {:?} scenario",
                a.kind(),
                self.kind()
            ))),
        }
    }

    /// `P |H(a)|^2`.
    pub fn power(&self, a: &ReconfigVariable, tx_power: f64) -> Result<f64, OracleError> {
        Ok(tx_power * self.channel(a)?.norm_sqr())
    }

    /// Hash of the realization, for checking that paired trials share it.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(|h| match self {
            Scenario::Ris(ch) => ch.hash_into(h),
            Scenario::Ma { paths, side } => {
                paths.hash_into(h);
                std::hash::Hash::hash(&side.to_bits(), h);
            }
        })
    }

    pub fn variable_from_flat(&self, x: &[f64]) -> Result<ReconfigVariable, OracleError> {
        if x.len() != self.dim() {
            return Err(OracleError::DimensionMismatch(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(match self {
            Scenario::Ris(_) => ReconfigVariable::Phases(RisPhases::new(x.to_vec())),
            Scenario::Ma { .. } => ReconfigVariable::Position(Position::new(x[0], x[1])),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Ris,
    Ma,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Ris => "ris",
            ScenarioKind::Ma => "ma",
        }
    }
}

/// The adjustable coefficients: RIS phases or an antenna position.
#[derive(Debug, Clone, PartialEq)]
pub enum ReconfigVariable {
    Phases(RisPhases),
    Position(Position),
}

impl ReconfigVariable {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ReconfigVariable::Phases(_) => ScenarioKind::Ris,
            ReconfigVariable::Position(_) => ScenarioKind::Ma,
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            ReconfigVariable::Phases(p) => p.as_slice().to_vec(),
            ReconfigVariable::Position(p) => p.to_array().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    /// Returns `|y|^2`.
    #[default]
    Power,
    /// Returns complex baseband `y`.
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    Power(f64),
    Coherent(Complex64),
}

impl Measurement {
    pub fn power(&self) -> f64 {
        match *self {
            Measurement::Power(p) => p,
            Measurement::Coherent(y) => y.norm_sqr(),
        }
    }

    pub fn as_power(&self) -> Option<f64> {
        match *self {
            Measurement::Power(p) => Some(p),
            Measurement::Coherent(_) => None,
        }
    }

    pub fn as_coherent(&self) -> Option<Complex64> {
        match *self {
            Measurement::Coherent(y) => Some(y),
            Measurement::Power(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Transmit power, linear watts.
    pub tx_power: f64,
    /// Pilot noise variance, linear watts.
    pub noise_var: f64,
    /// Maximum number of pilot symbols, `None` for unlimited.
    pub budget: Option<usize>,
    pub mode: QueryMode,
    /// RIS phase quantizer applied to every queried configuration.
    pub quant_bits: Option<u32>,
    /// Pilot symbols averaged per query; each query costs this many pilots.
    pub avg_len: usize,
    pub noise_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tx_power: 1.0,
            noise_var: 0.0,
            budget: None,
            mode: QueryMode::Power,
            quant_bits: None,
            avg_len: 1,
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub index: usize,
    /// Configuration actually applied, after quantization.
    pub variable: ReconfigVariable,
    pub value: Measurement,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryLedger {
    entries: Vec<LedgerEntry>,
}

impl QueryLedger {
    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with columns
    /// `query_index,scenario,variable,value_re,value_im,value_power`.
    /// `variable` is the flattened configuration as a comma-separated list;
    /// `value_re`/`value_im` are empty for power queries.
    pub fn write_csv<W: io::Write>(&self, scenario: ScenarioKind, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record([
            "query_index",
            "scenario",
            "variable",
            "value_re",
            "value_im",
            "value_power",
        ])?;
        for e in &self.entries {
            let mut var = String::new();
            for (i, v) in e.variable.to_flat().iter().enumerate() {
                if i > 0 {
                    var.push(',');
                }
                write!(var, "{v}").expect("writing to a String");
            }
            let (re, im) = match e.value {
                Measurement::Coherent(y) => (y.re.to_string(), y.im.to_string()),
                Measurement::Power(_) => (String::new(), String::new()),
            };
            w.write_record([
                e.index.to_string(),
                scenario.as_str().to_string(),
                var,
                re,
                im,
                e.value.power().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Black-box objective evaluator with pilot accounting.
#[derive(Debug, Clone)]
pub struct PilotOracle {
    scenario: Scenario,
    config: OracleConfig,
    used: usize,
    rng: ChaCha8Rng,
    ledger: QueryLedger,
}

impl PilotOracle {
    pub fn new(scenario: Scenario, config: OracleConfig) -> Result<Self, OracleError> {
        if !(config.tx_power >= 0.0 && config.tx_power.is_finite()) {
            return Err(OracleError::InvalidSetting(format!(
                "tx_power {}",
                config.tx_power
            )));
        }
        if !(config.noise_var >= 0.0 && config.noise_var.is_finite()) {
            return Err(OracleError::InvalidSetting(format!(
                "noise_var {}",
                config.noise_var
            )));
        }
        if config.avg_len == 0 {
            return Err(OracleError::InvalidSetting("avg_len must be >= 1".into()));
        }
        if matches!(config.quant_bits, Some(b) if !(1..=30).contains(&b)) {
            return Err(OracleError::InvalidSetting(
                "quant_bits must be in 1..=30".into(),
            ));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
        Ok(Self {
            scenario,
            config,
            used: 0,
            rng,
            ledger: QueryLedger::default(),
        })
    }

    pub fn kind(&self) -> ScenarioKind {
        self.scenario.kind()
    }

    pub fn dim(&self) -> usize {
        self.scenario.dim()
    }

    /// Side of the movable region for MA scenarios.
    pub fn region_side(&self) -> Option<f64> {
        match self.scenario {
            Scenario::Ma { side, .. } => Some(side),
            Scenario::Ris(_) => None,
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn mode(&self) -> QueryMode {
        self.config.mode
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn budget(&self) -> Option<usize> {
        self.config.budget
    }

    pub fn remaining(&self) -> Option<usize> {
        self.config.budget.map(|b| b - self.used)
    }

    /// Queries still affordable at `avg_len` pilots each.
    pub fn remaining_queries(&self) -> Option<usize> {
        self.remaining().map(|r| r / self.config.avg_len)
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn channel_fingerprint(&self) -> u64 {
        self.scenario.fingerprint()
    }

    /// Same scenario, settings and noise seed, with a fresh counter and ledger.
    pub fn fresh_clone(&self) -> Self {
        Self::new(self.scenario.clone(), self.config.clone()).expect("settings already validated")
    }

    fn applied(&self, a: &ReconfigVariable) -> ReconfigVariable {
        match (a, self.config.quant_bits) {
            (ReconfigVariable::Phases(p), Some(bits)) => {
                ReconfigVariable::Phases(quantize_phases(p.as_slice(), bits))
            }
            _ => a.clone(),
        }
    }

    /// Send pilot symbol(s) with configuration `a` and measure.
    pub fn query(&mut self, a: &ReconfigVariable) -> Result<Measurement, OracleError> {
        let cost = self.config.avg_len;
        if let Some(b) = self.config.budget {
            if self.used + cost > b {
                return Err(OracleError::BudgetExceeded { budget: b });
            }
        }
        let applied = self.applied(a);
        let h = self.scenario.channel(&applied)?;
        let signal = self.config.tx_power.sqrt() * h;
        let noisy = |rng: &mut ChaCha8Rng, var: f64| {
            if var > 0.0 {
                signal + complex_gaussian(rng, var)
            } else {
                signal
            }
        };
        let value = match self.config.mode {
            QueryMode::Coherent => {
                let sum: Complex64 = (0..cost)
                    .map(|_| noisy(&mut self.rng, self.config.noise_var))
                    .sum();
                Measurement::Coherent(sum / cost as f64)
            }
            QueryMode::Power => {
                let sum: f64 = (0..cost)
                    .map(|_| noisy(&mut self.rng, self.config.noise_var).norm_sqr())
                    .sum();
                Measurement::Power(sum / cost as f64)
            }
        };
        self.used += cost;
        self.ledger.entries.push(LedgerEntry {
            index: self.ledger.entries.len(),
            variable: applied,
            value,
        });
        Ok(value)
    }

    pub fn query_flat(&mut self, x: &[f64]) -> Result<Measurement, OracleError> {
        let a = self.scenario.variable_from_flat(x)?;
        self.query(&a)
    }

    /// Stage-II received SNR in dB at `a` against reporting noise
    /// `noise_var`. Noiseless and not counted as a pilot.
    pub fn snr_of(&self, a: &ReconfigVariable, noise_var: f64) -> Result<f64, OracleError> {
        if noise_var <= 0.0 {
            return Err(OracleError::InfiniteSnr);
        }
        let p = self
            .scenario
            .power(&self.applied(a), self.config.tx_power)?;
        Ok(10.0 * (p / noise_var).log10())
    }

    /// Write the ledger as CSV.
    pub fn write_ledger_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        self.ledger.write_csv(self.kind(), out)
    }
}

/// Power-mode view of an oracle as a ZO [`Objective`] over the flattened
/// variable.
pub struct PowerObjective<'a> {
    oracle: &'a mut PilotOracle,
}

impl<'a> PowerObjective<'a> {
    pub fn new(oracle: &'a mut PilotOracle) -> Result<Self, OracleError> {
        if oracle.mode() != QueryMode::Power {
            return Err(OracleError::InvalidSetting(
                "ZO needs a power-mode oracle".into(),
            ));
        }
        Ok(Self { oracle })
    }
}

impl Objective for PowerObjective<'_> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.oracle.query_flat(x)?.power())
    }

    fn remaining(&self) -> Option<usize> {
        self.oracle.remaining_queries()
    }
}

/// Uniform grid of `2^bits` phases, used when sampling from a phase book.
pub fn phase_grid(bits: u32) -> Vec<f64> {
    let n = 1usize << bits;
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}
