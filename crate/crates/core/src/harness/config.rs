//! Experiment configuration, read from TOML.
//!
//! ```toml
//! scenario = "ris"            # or "ma"
//! budgets = [256, 2048]       # strictly increasing pilot counts
//! trials = 50
//! base_seed = 1
//! pilot_noise_var = 0.0       # stage-I noise, linear
//! report_noise_var = 1.0      # stage-II reference noise for SNR
//! tx_power = 1.0
//! quant_bits = 2              # RIS phase resolution (optional)
//! avg_len = 1
//! record_wall_time = false
//!
//! [ris]
//! elements = 512
//! fading = 1.0
//! include_direct = true
//! direct_fading = 512.0       # defaults to elements * fading
//!
//! [ma]
//! paths = 5
//! wavelength = 1.0
//! region = 2.0                # side length in wavelengths
//!
//! [[methods]]
//! name = "zo"                 # pbf_perfect | po_perfect | ls_pbf | omp_po | rms | csm | zo
//! eta = 1.0
//! budgets = [256, 2048]       # optional per-method override
//! ```

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::oracle::ScenarioKind;
use crate::zo::{default_block_size, Difference, ValueTransform};

fn default_trials() -> usize {
    50
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub ris: RisSettings,
    #[serde(default)]
    pub ma: MaSettings,
    pub methods: Vec<MethodSpec>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub pilot_noise_var: f64,
    #[serde(default = "one")]
    pub report_noise_var: f64,
    #[serde(default = "one")]
    pub tx_power: f64,
    #[serde(default)]
    pub quant_bits: Option<u32>,
    #[serde(default = "one_usize")]
    pub avg_len: usize,
    #[serde(default)]
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RisSettings {
    pub elements: usize,
    pub fading: f64,
    pub include_direct: bool,
    /// Direct-link variance; `elements * fading` when unset.
    pub direct_fading: Option<f64>,
}

impl Default for RisSettings {
    fn default() -> Self {
        Self {
            elements: 512,
            fading: 1.0,
            include_direct: false,
            direct_fading: None,
        }
    }
}

impl RisSettings {
    pub fn direct_variance(&self) -> Option<f64> {
        self.include_direct.then(|| {
            self.direct_fading
                .unwrap_or(self.elements as f64 * self.fading)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaSettings {
    pub paths: usize,
    pub wavelength: f64,
    /// Side of the square movable region, in wavelengths.
    pub region: f64,
}

impl Default for MaSettings {
    fn default() -> Self {
        Self {
            paths: 5,
            wavelength: 1.0,
            region: 2.0,
        }
    }
}

impl MaSettings {
    pub fn side(&self) -> f64 {
        self.region * self.wavelength
    }
}

/// One method entry. `label` names the CSV rows (defaults to the method
/// name); `budgets` overrides the experiment-wide list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    PbfPerfect {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
    },
    PoPerfect {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
        /// Coarse step in wavelengths.
        coarse_step: Option<f64>,
        refine_levels: Option<usize>,
    },
    LsPbf {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
    },
    OmpPo {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
        grid_elevation: Option<usize>,
        grid_azimuth: Option<usize>,
        k_max: Option<usize>,
        residual_tol: Option<f64>,
    },
    Rms {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
    },
    Csm {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
        bits: Option<u32>,
    },
    Zo {
        label: Option<String>,
        budgets: Option<Vec<usize>>,
        mu: Option<f64>,
        eta: Option<f64>,
        block_size: Option<usize>,
        transform: Option<ValueTransform>,
        difference: Option<Difference>,
        /// Fraction of the budget spent on random warm-start probes.
        warm_start: Option<f64>,
    },
}

/// Fully resolved ZO settings for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoSettings {
    pub mu: f64,
    pub eta: f64,
    pub block_size: usize,
    pub transform: ValueTransform,
    pub difference: Difference,
    pub warm_start: f64,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::PbfPerfect { .. } => "pbf_perfect",
            MethodSpec::PoPerfect { .. } => "po_perfect",
            MethodSpec::LsPbf { .. } => "ls_pbf",
            MethodSpec::OmpPo { .. } => "omp_po",
            MethodSpec::Rms { .. } => "rms",
            MethodSpec::Csm { .. } => "csm",
            MethodSpec::Zo { .. } => "zo",
        }
    }

    pub fn label(&self) -> &str {
        let l = match self {
            MethodSpec::PbfPerfect { label, .. }
            | MethodSpec::PoPerfect { label, .. }
            | MethodSpec::LsPbf { label, .. }
            | MethodSpec::OmpPo { label, .. }
            | MethodSpec::Rms { label, .. }
            | MethodSpec::Csm { label, .. }
            | MethodSpec::Zo { label, .. } => label,
        };
        l.as_deref().unwrap_or(self.name())
    }

    pub fn budget_override(&self) -> Option<&[usize]> {
        match self {
            MethodSpec::PbfPerfect { budgets, .. }
            | MethodSpec::PoPerfect { budgets, .. }
            | MethodSpec::LsPbf { budgets, .. }
            | MethodSpec::OmpPo { budgets, .. }
            | MethodSpec::Rms { budgets, .. }
            | MethodSpec::Csm { budgets, .. }
            | MethodSpec::Zo { budgets, .. } => budgets.as_deref(),
        }
    }

    pub fn supports(&self, kind: ScenarioKind) -> bool {
        match self {
            MethodSpec::PbfPerfect { .. } | MethodSpec::LsPbf { .. } | MethodSpec::Csm { .. } => {
                kind == ScenarioKind::Ris
            }
            MethodSpec::PoPerfect { .. } | MethodSpec::OmpPo { .. } => kind == ScenarioKind::Ma,
            MethodSpec::Rms { .. } | MethodSpec::Zo { .. } => true,
        }
    }

    /// Resolved ZO settings; `None` for other methods.
    ///
    /// RIS defaults: amplitude objective, `eta = 1`, `mu = 1e-3`, block
    /// `max(1, M/16)`. MA defaults: log-power objective, `eta = 0.05 lambda`,
    /// `mu = 0.01 lambda`, full 2-D gradient, half the budget on warm start.
    pub fn zo_settings(&self, cfg: &ExperimentConfig) -> Option<ZoSettings> {
        let MethodSpec::Zo {
            mu,
            eta,
            block_size,
            transform,
            difference,
            warm_start,
            ..
        } = self
        else {
            return None;
        };
        let base = match cfg.scenario {
            ScenarioKind::Ris => ZoSettings {
                mu: 1e-3,
                eta: 1.0,
                block_size: default_block_size(cfg.ris.elements),
                transform: ValueTransform::Sqrt,
                difference: Difference::Forward,
                warm_start: 0.0,
            },
            ScenarioKind::Ma => ZoSettings {
                mu: 0.01 * cfg.ma.wavelength,
                eta: 0.05 * cfg.ma.wavelength,
                block_size: 2,
                transform: ValueTransform::Log,
                difference: Difference::Forward,
                warm_start: 0.5,
            },
        };
        Some(ZoSettings {
            mu: mu.unwrap_or(base.mu),
            eta: eta.unwrap_or(base.eta),
            block_size: block_size.unwrap_or(base.block_size),
            transform: transform.unwrap_or(base.transform),
            difference: difference.unwrap_or(base.difference),
            warm_start: warm_start.unwrap_or(base.warm_start),
        })
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn dim(&self) -> usize {
        match self.scenario {
            ScenarioKind::Ris => self.ris.elements,
            ScenarioKind::Ma => 2,
        }
    }

    pub fn budgets_for(&self, method: &MethodSpec) -> Vec<usize> {
        method.budget_override().unwrap_or(&self.budgets).to_vec()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return err("trials must be >= 1".into());
        }
        if self.budgets.is_empty() || !strictly_increasing(&self.budgets) {
            return err("budgets must be non-empty and strictly increasing".into());
        }
        if self.methods.is_empty() {
            return err("at least one method is required".into());
        }
        if !(self.pilot_noise_var >= 0.0 && self.pilot_noise_var.is_finite()) {
            return err("pilot_noise_var must be >= 0".into());
        }
        if !(self.report_noise_var > 0.0 && self.report_noise_var.is_finite()) {
            return err("report_noise_var must be > 0".into());
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return err("tx_power must be > 0".into());
        }
        if self.avg_len == 0 {
            return err("avg_len must be >= 1".into());
        }
        if matches!(self.quant_bits, Some(b) if !(1..=16).contains(&b)) {
            return err("quant_bits must be in 1..=16".into());
        }
        match self.scenario {
            ScenarioKind::Ris => {
                if self.ris.elements == 0 || !positive(self.ris.fading) {
                    return err("ris.elements and ris.fading must be positive".into());
                }
            }
            ScenarioKind::Ma => {
                if self.ma.paths == 0 || !positive(self.ma.wavelength) || !positive(self.ma.region)
                {
                    return err("ma.paths, ma.wavelength and ma.region must be positive".into());
                }
            }
        }
        let mut labels = std::collections::HashSet::new();
        for m in &self.methods {
            if !m.supports(self.scenario) {
                return err(format!(
                    "method {} does not apply to the {} scenario",
                    m.name(),
                    self.scenario.as_str()
                ));
            }
            if !labels.insert(m.label().to_string()) {
                return err(format!("duplicate method label {}", m.label()));
            }
            if let Some(b) = m.budget_override() {
                if b.is_empty() || !strictly_increasing(b) {
                    return err(format!(
                        "budgets of {} must be non-empty and strictly increasing",
                        m.label()
                    ));
                }
            }
            if let MethodSpec::Csm { bits: Some(b), .. } = m {
                if !(1..=16).contains(b) {
                    return err("csm bits must be in 1..=16".into());
                }
            }
            if let Some(z) = m.zo_settings(self) {
                if !(z.mu > 0.0 && z.eta > 0.0) {
                    return err("zo mu and eta must be positive".into());
                }
                if z.block_size == 0 || z.block_size > self.dim() {
                    return err(format!("zo block_size must be in 1..={}", self.dim()));
                }
                if !(0.0..1.0).contains(&z.warm_start) {
                    return err("zo warm_start must be in [0, 1)".into());
                }
            }
        }
        Ok(())
    }
}
