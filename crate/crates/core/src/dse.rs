//! Design-space exploration driver.
//!
//! Loop nest: RatioRram, ResRram, XbSize, duplication candidate, ResDAC.
//! Each surviving prefix is compiled and handed to the macro-partition
//! search, whose fitness runs allocation and simulation.

use std::sync::Mutex;
use std::time::Duration;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{allocate, class_params, dac_count, peripheral_budget, workload_matrix, CompAllocMatrix};
use crate::dataflow::{compile, DataflowDag, MappingParams};
use crate::error::{Error, Result};
use crate::hw::{DseDomains, HardwareParams};
use crate::model::CnnModel;
use crate::partition::{attach_comm_irs, build_macro_plan, ea_explore, EaConfig, GeneSpace, MacAllocGene, MacroPlan};
use crate::seed::mix;
use crate::sim::{mvm_bound_latency, simulate, EnergyMode, EvalResult, SimContext};
use crate::wtdup::{all_ones, crossbar_budget, default_alpha, proportional, sa_filter, CrossbarBudget, SaConfig, WtDupVector};

/// How duplication candidates are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WtDupMode {
    #[default]
    Annealing,
    /// One copy of every layer.
    AllOnes,
    /// Copies proportional to output positions.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub wtdup_mode: WtDupMode,
    pub identical_macros: bool,
    pub macro_sharing: bool,
    pub energy_mode: EnergyMode,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            wtdup_mode: WtDupMode::Annealing,
            identical_macros: false,
            macro_sharing: true,
            energy_mode: EnergyMode::Budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DseConfig {
    pub domains: DseDomains,
    pub sa: SaConfig,
    pub ea: EaConfig,
    pub seed: u64,
    /// Weight of the access-volume term; derived from the model when absent.
    pub alpha: Option<f64>,
    /// Skip prefixes whose MVM-only efficiency bound cannot beat the best
    /// point found so far for the same outer triple.
    pub prune: bool,
    pub options: SynthesisOptions,
}

impl Default for DseConfig {
    fn default() -> Self {
        DseConfig {
            domains: DseDomains::default(),
            sa: SaConfig::default(),
            ea: EaConfig::default(),
            seed: 0,
            alpha: None,
            prune: false,
            options: SynthesisOptions::default(),
        }
    }
}

impl DseConfig {
    /// Parse a TOML config; missing sections keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "config file".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// One complete candidate architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub ratio_rram: f64,
    pub xb_size: u32,
    pub res_rram: u32,
    pub res_dac: u32,
    pub adc_resolution: u32,
    pub wtdup: WtDupVector,
    pub mac_alloc: MacAllocGene,
    pub comp_alloc: CompAllocMatrix,
    pub plan: MacroPlan,
}

impl DesignPoint {
    pub fn mapping(&self) -> MappingParams {
        MappingParams {
            xb_size: self.xb_size,
            res_rram: self.res_rram,
            res_dac: self.res_dac,
        }
    }
}

/// A design point before macro partitioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    pub ratio_rram: f64,
    pub res_dac: u32,
    pub adc_resolution: u32,
    pub budget: CrossbarBudget,
    pub wtdup: WtDupVector,
}

impl Prefix {
    pub fn mapping(&self) -> MappingParams {
        MappingParams {
            xb_size: self.budget.xb_size,
            res_rram: self.budget.res_rram,
            res_dac: self.res_dac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub ratio_rram: f64,
    pub xb_size: u32,
    pub res_rram: u32,
    pub candidate: Option<usize>,
    pub res_dac: Option<u32>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploredPoint {
    pub ratio_rram: f64,
    pub xb_size: u32,
    pub res_rram: u32,
    pub res_dac: u32,
    pub candidate: usize,
    pub power_efficiency: f64,
    pub throughput: f64,
    pub latency: f64,
    pub genes_evaluated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoEntry {
    /// Position in `DseResult::explored`.
    pub index: usize,
    pub power_efficiency: f64,
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub best_point: DesignPoint,
    pub best_eval: EvalResult,
    pub explored_count: usize,
    /// Explored points no other point dominates in (power efficiency,
    /// throughput).
    pub pareto_set: Vec<ParetoEntry>,
    pub explored: Vec<ExploredPoint>,
    pub skipped: Vec<SkipRecord>,
    /// Best power efficiency after each explored point, in loop order.
    pub best_so_far: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Stage 3 and 4 for one gene: place macros, add communication IRs,
/// allocate peripherals and simulate.
pub fn evaluate_gene(
    model: &CnnModel,
    hw: &HardwareParams,
    total_power: f64,
    prefix: &Prefix,
    base: &DataflowDag,
    gene: &MacAllocGene,
    options: &SynthesisOptions,
) -> Result<(EvalResult, CompAllocMatrix, MacroPlan)> {
    let factors = &prefix.wtdup.factors;
    let plan = build_macro_plan(gene, model, factors, &prefix.budget.sets);
    let dag = attach_comm_irs(&plan, base, model)?;
    let wl = workload_matrix(&dag, &plan);
    let dacs = dac_count(model, factors, prefix.budget.xb_size);
    let budget = peripheral_budget(hw, total_power, prefix.ratio_rram, dacs, prefix.res_dac, plan.num_macros())?;
    let params = class_params(hw, prefix.adc_resolution)?;
    let macros: Vec<u32> = plan.groups.iter().map(|g| g.macros.len() as u32).collect();
    let alloc = allocate(wl, &params, budget, &macros, options.identical_macros)?;
    let ctx = SimContext {
        model,
        hw,
        mapping: prefix.mapping(),
        factors,
        adc_resolution: prefix.adc_resolution,
        total_power,
        energy_mode: options.energy_mode,
    };
    let eval = simulate(&dag, &plan, &alloc, &ctx)?;
    Ok((eval, alloc, plan))
}

/// Run the macro-partition search for one prefix and return the best point.
pub fn evaluate_point(
    model: &CnnModel,
    hw: &HardwareParams,
    total_power: f64,
    prefix: &Prefix,
    base: &DataflowDag,
    ea: &EaConfig,
    options: &SynthesisOptions,
) -> Result<(DesignPoint, EvalResult, usize)> {
    let mut space = GeneSpace::new(model, &prefix.wtdup.factors, prefix.budget.xb_size);
    space.allow_sharing = options.macro_sharing;
    let hard_error: Mutex<Option<Error>> = Mutex::new(None);
    let outcome = ea_explore(&space, ea, |gene| {
        match evaluate_gene(model, hw, total_power, prefix, base, gene, options) {
            Ok((eval, alloc, plan)) => Some((eval.power_efficiency, (eval, alloc, plan))),
            Err(e) if e.is_infeasibility() => None,
            Err(e) => {
                hard_error.lock().expect("not poisoned").get_or_insert(e);
                None
            }
        }
    });
    if let Some(e) = hard_error.into_inner().expect("not poisoned") {
        return Err(e);
    }
    let outcome = outcome?;
    let (eval, comp_alloc, plan) = outcome.best_payload;
    let point = DesignPoint {
        ratio_rram: prefix.ratio_rram,
        xb_size: prefix.budget.xb_size,
        res_rram: prefix.budget.res_rram,
        res_dac: prefix.res_dac,
        adc_resolution: prefix.adc_resolution,
        wtdup: prefix.wtdup.clone(),
        mac_alloc: outcome.best,
        comp_alloc,
        plan,
    };
    Ok((point, eval, outcome.evaluated.len()))
}

/// Re-simulate a stored design point with its stored allocation.
pub fn evaluate_design_point(
    model: &CnnModel,
    hw: &HardwareParams,
    total_power: f64,
    point: &DesignPoint,
    energy_mode: EnergyMode,
) -> Result<EvalResult> {
    let mapping = point.mapping();
    let factors = &point.wtdup.factors;
    let base = compile(model, factors, &mapping)?;
    let plan = build_macro_plan(&point.mac_alloc, model, factors, &point.wtdup.sets);
    let dag = attach_comm_irs(&plan, &base, model)?;
    let ctx = SimContext {
        model,
        hw,
        mapping,
        factors,
        adc_resolution: point.adc_resolution,
        total_power,
        energy_mode,
    };
    simulate(&dag, &plan, &point.comp_alloc, &ctx)
}

#[derive(Default)]
struct TripleOutcome {
    evaluated: Vec<(ExploredPoint, DesignPoint, EvalResult)>,
    skipped: Vec<SkipRecord>,
    shortfall: Option<u64>,
}

fn candidates(model: &CnnModel, budget: &CrossbarBudget, alpha: f64, cfg: &DseConfig, triple: usize) -> Vec<WtDupVector> {
    match cfg.options.wtdup_mode {
        WtDupMode::Annealing => {
            let sa = SaConfig {
                seed: mix(cfg.seed ^ cfg.sa.seed, triple as u64),
                top_k: cfg.domains.sa_top_k,
                ..cfg.sa.clone()
            };
            sa_filter(model, budget, alpha, &sa)
        }
        WtDupMode::AllOnes => vec![all_ones(model, budget, alpha)],
        WtDupMode::Proportional => vec![proportional(model, budget, alpha)],
    }
}

fn explore_triple(
    model: &CnnModel,
    hw: &HardwareParams,
    total_power: f64,
    cfg: &DseConfig,
    alpha: f64,
    triple: usize,
    (ratio_rram, res_rram, xb_size): (f64, u32, u32),
) -> Result<TripleOutcome> {
    let mut out = TripleOutcome::default();
    let skip = |candidate, res_dac, reason: String| {
        debug!("skip ratio={ratio_rram} xb={xb_size} rram={res_rram} cand={candidate:?} dac={res_dac:?}: {reason}");
        SkipRecord {
            ratio_rram,
            xb_size,
            res_rram,
            candidate,
            res_dac,
            reason,
        }
    };
    let budget = match crossbar_budget(model, hw, total_power, ratio_rram, xb_size, res_rram) {
        Ok(b) => b,
        Err(e) => {
            if let Error::InfeasibleBudget { shortfall, .. } = e {
                out.shortfall = Some(shortfall);
            }
            if !e.is_infeasibility() {
                return Err(e);
            }
            out.skipped.push(skip(None, None, e.to_string()));
            return Ok(out);
        }
    };
    let mut best_here = f64::NEG_INFINITY;
    for (k, wtdup) in candidates(model, &budget, alpha, cfg, triple).into_iter().enumerate() {
        for &res_dac in &cfg.domains.res_dac {
            let adc_resolution = match hw.required_adc_resolution(xb_size, res_rram, res_dac) {
                Ok(r) => r,
                Err(e) if e.is_infeasibility() => {
                    out.skipped.push(skip(Some(k), Some(res_dac), e.to_string()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let prefix = Prefix {
                ratio_rram,
                res_dac,
                adc_resolution,
                budget: budget.clone(),
                wtdup: wtdup.clone(),
            };
            let base = compile(model, &wtdup.factors, &prefix.mapping())?;
            if cfg.prune {
                let mvm = hw.crossbar(xb_size, res_rram)?.latency;
                let floor_power = wtdup.crossbars_used() as f64 * hw.crossbar_power(xb_size, res_rram)?
                    + dac_count(model, &wtdup.factors, xb_size) as f64 * hw.dac(res_dac)?.power;
                let bound = 2.0 * model.total_macs() as f64 / mvm_bound_latency(&base, mvm) / floor_power / 1e12;
                if bound < best_here {
                    out.skipped.push(skip(Some(k), Some(res_dac), format!("pruned: efficiency bound {bound:.4} TOPS/W")));
                    continue;
                }
            }
            let ea = EaConfig {
                seed: mix(mix(mix(cfg.seed ^ cfg.ea.seed, triple as u64), k as u64), u64::from(res_dac)),
                ..cfg.ea.clone()
            };
            match evaluate_point(model, hw, total_power, &prefix, &base, &ea, &cfg.options) {
                Ok((point, eval, genes)) => {
                    best_here = best_here.max(eval.power_efficiency);
                    out.evaluated.push((
                        ExploredPoint {
                            ratio_rram,
                            xb_size,
                            res_rram,
                            res_dac,
                            candidate: k,
                            power_efficiency: eval.power_efficiency,
                            throughput: eval.throughput,
                            latency: eval.latency,
                            genes_evaluated: genes,
                        },
                        point,
                        eval,
                    ));
                }
                Err(e) if e.is_infeasibility() => out.skipped.push(skip(Some(k), Some(res_dac), e.to_string())),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Indices of points not dominated in (efficiency, throughput).
pub fn pareto_indices(points: &[ExploredPoint]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let a = &points[i];
            !points.iter().enumerate().any(|(j, b)| {
                j != i
                    && b.power_efficiency >= a.power_efficiency
                    && b.throughput >= a.throughput
                    && (b.power_efficiency > a.power_efficiency || b.throughput > a.throughput || j < i)
            })
        })
        .collect()
}

/// Explore the whole loop nest and keep the most power-efficient point.
pub fn run_dse(model: &CnnModel, hw: &HardwareParams, total_power: f64, cfg: &DseConfig) -> Result<DseResult> {
    let started = std::time::Instant::now();
    if !(total_power > 0.0) {
        return Err(Error::Config(format!("total power must be positive, got {total_power}")));
    }
    cfg.domains.validate()?;
    hw.validate()?;
    let alpha = cfg.alpha.unwrap_or_else(|| default_alpha(model));
    let mut triples = Vec::new();
    for &ratio in &cfg.domains.ratio_rram {
        for &rr in &cfg.domains.res_rram {
            for &xb in &cfg.domains.xb_sizes {
                triples.push((ratio, rr, xb));
            }
        }
    }
    info!("exploring {} outer triples for {}", triples.len(), model.name);
    let outcomes: Vec<Result<TripleOutcome>> = triples
        .par_iter()
        .enumerate()
        .map(|(t, &triple)| explore_triple(model, hw, total_power, cfg, alpha, t, triple))
        .collect();

    let mut explored = Vec::new();
    let mut skipped = Vec::new();
    let mut best: Option<(DesignPoint, EvalResult)> = None;
    let mut best_so_far = Vec::new();
    let mut min_shortfall: Option<u64> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        if let Some(s) = outcome.shortfall {
            min_shortfall = Some(min_shortfall.map_or(s, |m| m.min(s)));
        }
        skipped.extend(outcome.skipped);
        for (summary, point, eval) in outcome.evaluated {
            if best.as_ref().is_none_or(|(_, b)| eval.power_efficiency > b.power_efficiency) {
                best = Some((point, eval));
            }
            best_so_far.push(best.as_ref().expect("just set").1.power_efficiency);
            explored.push(summary);
        }
    }
    let Some((best_point, best_eval)) = best else {
        let reason = match min_shortfall {
            Some(s) if skipped.iter().all(|r| r.candidate.is_none()) => {
                format!("crossbar budget short by at least {s} crossbars at every design point")
            }
            _ => skipped
                .first()
                .map_or_else(|| "empty design space".to_string(), |r| r.reason.clone()),
        };
        return Err(Error::GlobalInfeasibility(reason));
    };
    info!(
        "best: {:.4} TOPS/W at ratio={} xb={} rram={} dac={}",
        best_eval.power_efficiency, best_point.ratio_rram, best_point.xb_size, best_point.res_rram, best_point.res_dac
    );
    Ok(DseResult {
        best_point,
        best_eval,
        explored_count: explored.len(),
        pareto_set: pareto_indices(&explored)
            .into_iter()
            .map(|index| ParetoEntry {
                index,
                power_efficiency: explored[index].power_efficiency,
                throughput: explored[index].throughput,
            })
            .collect(),
        explored,
        skipped,
        best_so_far,
        wall_time: started.elapsed(),
    })
}
