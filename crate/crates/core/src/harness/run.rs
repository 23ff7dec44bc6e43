use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MethodSpec};
use super::HarnessError;
use crate::baselines::{
    csm, dft_probe_book, ls_estimate_then_pbf, omp_estimate, pbf_perfect, po_grid, rms, AngleGrid,
    DiscretePhaseBook, GridSearch, RmsSampler,
};
use crate::channel::{gen_cascaded_channel, gen_path_set, ma_channel, Position, RisPhases};
use crate::oracle::{
    OracleConfig, PilotOracle, PowerObjective, QueryLedger, QueryMode, ReconfigVariable, Scenario,
    ScenarioKind,
};
use crate::zo::{quantize_phases, run_zo, Constraint, ZoParams};

/// One `(method, budget, trial)` outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub budget: usize,
    pub trial: usize,
    /// Noiseless `P |H|^2` at the method's final configuration.
    pub achieved_power: f64,
    pub snr_db: f64,
    pub queries_used: usize,
    pub wall_time_ms: f64,
}

/// Rows ordered by (method position in the config, budget, trial).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Rows of one method at one budget, in trial order.
    pub fn select<'a>(
        &'a self,
        method: &'a str,
        budget: usize,
    ) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.budget == budget)
    }

    /// Per-trial SNR of one method at one budget, in trial order.
    pub fn snr_series(&self, method: &str, budget: usize) -> Vec<f64> {
        self.select(method, budget).map(|r| r.snr_db).collect()
    }
}

/// Full record of one method run, including what the oracle saw.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub row: ResultRow,
    pub variable: ReconfigVariable,
    /// Fingerprint of the ground-truth channel the method ran against.
    pub channel_fingerprint: u64,
    /// Pilot ledger; `None` for perfect-CSI references.
    pub ledger: Option<QueryLedger>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Ground-truth seed of a trial; shared by every method so trials are paired.
pub fn scenario_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed ^ trial as u64
}

pub fn build_scenario(cfg: &ExperimentConfig, trial: usize) -> Result<Scenario, HarnessError> {
    let seed = scenario_seed(cfg.base_seed, trial);
    let channel_err = |e: crate::channel::ChannelError| HarnessError::Config(e.to_string());
    Ok(match cfg.scenario {
        ScenarioKind::Ris => Scenario::Ris(
            gen_cascaded_channel(
                cfg.ris.elements,
                seed,
                cfg.ris.fading,
                cfg.ris.direct_variance(),
            )
            .map_err(channel_err)?,
        ),
        ScenarioKind::Ma => Scenario::Ma {
            paths: gen_path_set(cfg.ma.paths, seed, cfg.ma.wavelength).map_err(channel_err)?,
            side: cfg.ma.side(),
        },
    })
}

struct MethodResult {
    variable: ReconfigVariable,
    oracle: Option<PilotOracle>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    scenario: &'a Scenario,
    budget: usize,
    noise_seed: u64,
    method_seed: u64,
}

impl Ctx<'_> {
    fn oracle(&self, mode: QueryMode, quant_bits: Option<u32>) -> Result<PilotOracle, String> {
        let config = OracleConfig {
            tx_power: self.cfg.tx_power,
            noise_var: self.cfg.pilot_noise_var,
            budget: Some(self.budget),
            mode,
            quant_bits,
            avg_len: self.cfg.avg_len,
            noise_seed: self.noise_seed,
        };
        PilotOracle::new(self.scenario.clone(), config).map_err(|e| e.to_string())
    }

    fn queries(&self) -> usize {
        self.budget / self.cfg.avg_len
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.method_seed)
    }
}

fn execute(ctx: &Ctx<'_>, method: &MethodSpec) -> Result<MethodResult, String> {
    let cfg = ctx.cfg;
    let needs_pilots = !matches!(
        method,
        MethodSpec::PbfPerfect { .. } | MethodSpec::PoPerfect { .. }
    );
    if needs_pilots && ctx.queries() == 0 {
        return Err(format!(
            "budget {} buys no query at avg_len {}",
            ctx.budget, cfg.avg_len
        ));
    }
    match (method, ctx.scenario) {
        (MethodSpec::PbfPerfect { .. }, Scenario::Ris(ch)) => Ok(MethodResult {
            variable: ReconfigVariable::Phases(pbf_perfect(ch)),
            oracle: None,
        }),
        (
            MethodSpec::PoPerfect {
                coarse_step,
                refine_levels,
                ..
            },
            Scenario::Ma { paths, side },
        ) => {
            let search = grid_search(cfg, *side, *coarse_step, *refine_levels);
            Ok(MethodResult {
                variable: ReconfigVariable::Position(po_grid(|p| ma_channel(paths, p), search)),
                oracle: None,
            })
        }
        (MethodSpec::LsPbf { .. }, Scenario::Ris(ch)) => {
            let mut oracle = ctx.oracle(QueryMode::Coherent, None)?;
            let with_direct = cfg.ris.include_direct;
            let book = dft_probe_book(ctx.queries(), ch.elements(), with_direct);
            let out =
                ls_estimate_then_pbf(&mut oracle, &book, with_direct).map_err(|e| e.to_string())?;
            Ok(MethodResult {
                variable: ReconfigVariable::Phases(out.phases),
                oracle: Some(oracle),
            })
        }
        (
            MethodSpec::OmpPo {
                grid_elevation,
                grid_azimuth,
                k_max,
                residual_tol,
                ..
            },
            Scenario::Ma { side, .. },
        ) => {
            let mut oracle = ctx.oracle(QueryMode::Coherent, None)?;
            let mut rng = ctx.rng();
            let n = ctx.queries();
            let amp = cfg.tx_power.sqrt();
            let mut positions = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let p = Position::new(rng.random_range(0.0..=*side), rng.random_range(0.0..=*side));
                let meas = oracle
                    .query(&ReconfigVariable::Position(p))
                    .map_err(|e| e.to_string())?;
                positions.push(p);
                y.push(meas.as_coherent().expect("coherent oracle") / amp);
            }
            let grid = AngleGrid::new(grid_elevation.unwrap_or(32), grid_azimuth.unwrap_or(32))
                .map_err(|e| e.to_string())?;
            // residual energy expected from pilot noise alone
            let floor =
                (n as f64 * cfg.pilot_noise_var / (cfg.avg_len as f64 * cfg.tx_power)).sqrt();
            let est = omp_estimate(
                &positions,
                &y,
                &grid,
                cfg.ma.wavelength,
                k_max.unwrap_or(2 * cfg.ma.paths),
                residual_tol.unwrap_or(1e-3),
                floor,
            )
            .map_err(|e| e.to_string())?;
            let search = grid_search(cfg, *side, None, None);
            let p = po_grid(|q| ma_channel(&est.paths, q), search);
            Ok(MethodResult {
                variable: ReconfigVariable::Position(p),
                oracle: Some(oracle),
            })
        }
        (MethodSpec::Rms { .. }, _) => {
            let sampler = match (ctx.scenario.kind(), cfg.quant_bits) {
                (ScenarioKind::Ma, _) => RmsSampler::Region,
                (ScenarioKind::Ris, Some(bits)) => {
                    RmsSampler::PhaseBook(DiscretePhaseBook::new(bits).map_err(|e| e.to_string())?)
                }
                (ScenarioKind::Ris, None) => RmsSampler::UniformPhase,
            };
            let mut oracle = ctx.oracle(QueryMode::Power, cfg.quant_bits)?;
            let out = rms(&mut oracle, ctx.queries(), &sampler, &mut ctx.rng())
                .map_err(|e| e.to_string())?;
            Ok(MethodResult {
                variable: out.best,
                oracle: Some(oracle),
            })
        }
        (MethodSpec::Csm { bits, .. }, Scenario::Ris(_)) => {
            let book = DiscretePhaseBook::new(bits.or(cfg.quant_bits).unwrap_or(2))
                .map_err(|e| e.to_string())?;
            let mut oracle = ctx.oracle(QueryMode::Power, cfg.quant_bits)?;
            let (phases, _) = csm(&mut oracle, ctx.queries(), &book, &mut ctx.rng())
                .map_err(|e| e.to_string())?;
            Ok(MethodResult {
                variable: ReconfigVariable::Phases(phases),
                oracle: Some(oracle),
            })
        }
        (MethodSpec::Zo { .. }, _) => run_zo_method(ctx, method),
        (m, s) => Err(format!(
            "method {} cannot run on a {} scenario",
            m.name(),
            s.kind().as_str()
        )),
    }
}

fn grid_search(
    cfg: &ExperimentConfig,
    side: f64,
    coarse_step: Option<f64>,
    refine_levels: Option<usize>,
) -> GridSearch {
    let mut search = GridSearch::for_region(side, cfg.ma.wavelength);
    if let Some(step) = coarse_step {
        search.coarse_step = step * cfg.ma.wavelength;
    }
    if let Some(levels) = refine_levels {
        search.refine_levels = levels;
    }
    search
}

fn run_zo_method(ctx: &Ctx<'_>, method: &MethodSpec) -> Result<MethodResult, String> {
    let cfg = ctx.cfg;
    let z = method.zo_settings(cfg).expect("zo method");
    let params = ZoParams {
        mu: z.mu,
        eta: z.eta,
        block_size: z.block_size,
        max_queries: None,
        seed: ctx.method_seed,
        transform: z.transform,
        difference: z.difference,
    };
    let mut oracle = ctx.oracle(QueryMode::Power, None)?;
    match ctx.scenario {
        Scenario::Ris(ch) => {
            let x0 = vec![0.0; ch.elements()];
            let out = run_zo(
                &mut PowerObjective::new(&mut oracle).map_err(|e| e.to_string())?,
                &x0,
                &params,
                Constraint::PhaseWrap,
            )
            .map_err(|e| e.to_string())?;
            Ok(MethodResult {
                variable: ReconfigVariable::Phases(RisPhases::new(out.x_best)),
                oracle: Some(oracle),
            })
        }
        Scenario::Ma { side, .. } => {
            let n = ctx.queries();
            let per_iter = params.queries_per_iteration();
            let warm_target = (z.warm_start * n as f64).floor() as usize;
            // whole iterations only; leftover pilots go to the warm start
            let zo_part = (n - warm_target) / per_iter * per_iter;
            let warm = n - zo_part;
            let mut start = Position::new(side / 2.0, side / 2.0);
            let mut warm_best = None;
            if warm > 0 {
                let out = rms(&mut oracle, warm, &RmsSampler::Region, &mut ctx.rng())
                    .map_err(|e| e.to_string())?;
                if let ReconfigVariable::Position(p) = out.best {
                    start = p;
                }
                warm_best = Some(out.best_measured);
            }
            let constraint = Constraint::Box { lo: 0.0, hi: *side };
            let out = run_zo(
                &mut PowerObjective::new(&mut oracle).map_err(|e| e.to_string())?,
                &start.to_array(),
                &params,
                constraint,
            )
            .map_err(|e| e.to_string())?;
            let pick = match (out.best_value, warm_best) {
                (Some(v), Some(w)) if w >= v => start,
                (Some(_), _) => Position::new(out.x_best[0], out.x_best[1]),
                (None, _) => start,
            };
            Ok(MethodResult {
                variable: ReconfigVariable::Position(pick),
                oracle: Some(oracle),
            })
        }
    }
}

/// Run one method at one budget on one trial.
pub fn run_trial(
    cfg: &ExperimentConfig,
    method_index: usize,
    budget: usize,
    trial: usize,
) -> Result<TrialRun, HarnessError> {
    let method = cfg
        .methods
        .get(method_index)
        .ok_or_else(|| HarnessError::Config(format!("no method at index {method_index}")))?;
    let scenario = build_scenario(cfg, trial)?;
    let ctx = Ctx {
        cfg,
        scenario: &scenario,
        budget,
        noise_seed: derive_seed(&[
            cfg.base_seed,
            trial as u64,
            method_index as u64,
            budget as u64,
            1,
        ]),
        method_seed: derive_seed(&[
            cfg.base_seed,
            trial as u64,
            method_index as u64,
            budget as u64,
            2,
        ]),
    };
    let started = Instant::now();
    let result = execute(&ctx, method).map_err(|message| HarnessError::Method {
        method: method.label().to_string(),
        budget,
        trial,
        message,
    })?;
    let wall_time_ms = if cfg.record_wall_time {
        started.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };

    let variable = match (result.variable, cfg.quant_bits) {
        (ReconfigVariable::Phases(p), Some(bits)) => {
            ReconfigVariable::Phases(quantize_phases(p.as_slice(), bits))
        }
        (v, _) => v,
    };
    let achieved_power =
        scenario
            .power(&variable, cfg.tx_power)
            .map_err(|e| HarnessError::Method {
                method: method.label().to_string(),
                budget,
                trial,
                message: e.to_string(),
            })?;
    let queries_used = result.oracle.as_ref().map_or(0, |o| o.used());
    debug_assert!(queries_used <= budget);
    Ok(TrialRun {
        row: ResultRow {
            scenario: cfg.scenario.as_str().to_string(),
            method: method.label().to_string(),
            budget,
            trial,
            achieved_power,
            snr_db: 10.0 * (achieved_power / cfg.report_noise_var).log10(),
            queries_used,
            wall_time_ms,
        },
        variable,
        channel_fingerprint: result
            .oracle
            .as_ref()
            .map_or_else(|| scenario.fingerprint(), |o| o.channel_fingerprint()),
        ledger: result.oracle.map(|o| o.ledger().clone()),
    })
}

/// Run every method at each of its budgets on `cfg.trials` paired trials.
///
/// Trials run in parallel; the returned rows are sorted, so output does not
/// depend on scheduling. Fails if methods within a trial saw different
/// channels.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .methods
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| {
            cfg.budgets_for(m)
                .into_iter()
                .flat_map(move |b| (0..cfg.trials).map(move |t| (mi, b, t)))
        })
        .collect();
    let mut runs: Vec<((usize, usize, usize), ResultRow, u64)> = jobs
        .into_par_iter()
        .map(|(mi, b, t)| {
            run_trial(cfg, mi, b, t).map(|r| ((mi, b, t), r.row, r.channel_fingerprint))
        })
        .collect::<Result<_, _>>()?;
    runs.sort_by_key(|(k, _, _)| *k);

    let mut seen: BTreeMap<usize, u64> = BTreeMap::new();
    for ((_, _, t), _, fp) in &runs {
        if *seen.entry(*t).or_insert(*fp) != *fp {
            return Err(HarnessError::Unpaired { trial: *t });
        }
    }
    Ok(ResultTable {
        rows: runs.into_iter().map(|(_, row, _)| row).collect(),
    })
}
