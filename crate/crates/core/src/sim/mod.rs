//! Event-driven evaluation of a synthesized design.

mod engine;
mod lower;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use engine::{capacity_violations, critical_path, dependency_violations, run, SimProgram, Trace};
pub use lower::{lower, Lowered, PoolInfo, PoolKind};

use crate::alloc::{class_params, dac_count, CompAllocMatrix};
use crate::dataflow::{DataflowDag, Ir, MappingParams};
use crate::error::{Error, Result};
use crate::hw::HardwareParams;
use crate::model::CnnModel;
use crate::partition::MacroPlan;
use crate::wtdup::crossbar_set;

/// How energy is charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Allocated power times latency.
    #[default]
    Budget,
    /// Busy time times unit power, plus static register power.
    Activity,
}

/// Everything the evaluator needs besides the DAG, plan and allocation.
#[derive(Debug, Clone, Copy)]
pub struct SimContext<'a> {
    pub model: &'a CnnModel,
    pub hw: &'a HardwareParams,
    pub mapping: MappingParams,
    /// Duplication factor per weight-bearing layer.
    pub factors: &'a [u64],
    pub adc_resolution: u32,
    pub total_power: f64,
    pub energy_mode: EnergyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Seconds for one inference.
    pub latency: f64,
    /// Operations per second, two per MAC.
    pub throughput: f64,
    /// Allocated watts.
    pub power: f64,
    /// TOPS/W.
    pub power_efficiency: f64,
    pub energy: f64,
    pub edp: f64,
    /// TOPS/W with every crossbar computing each MVM cycle.
    pub peak_power_efficiency: f64,
    /// Critical path with unlimited units.
    pub lower_bound_latency: f64,
    pub power_breakdown: BTreeMap<String, f64>,
    /// Summed node busy time per pool class.
    pub busy_time: BTreeMap<String, f64>,
    /// Finish time of the last node of each layer.
    pub layer_finish: Vec<f64>,
}

fn pool_label(kind: &PoolKind) -> &'static str {
    match kind {
        PoolKind::Crossbars { .. } => "mvm",
        PoolKind::Component { class, .. } => class.name(),
        PoolKind::Memory { .. } => "scratchpad",
        PoolKind::Noc { .. } => "noc",
    }
}

/// Peak ops/s over total power, in TOPS/W: every used crossbar finishing one
/// `XbSize x XbSize` MVM per bit slice and weight slice.
pub fn peak_power_efficiency(
    hw: &HardwareParams,
    model: &CnnModel,
    mapping: &MappingParams,
    crossbars: u64,
    total_power: f64,
) -> Result<f64> {
    let xb = hw.crossbar(mapping.xb_size, mapping.res_rram)?;
    let slices = f64::from(model.weights_bits.div_ceil(mapping.res_rram));
    let bits = f64::from(model.activations_bits.div_ceil(mapping.res_dac));
    let side = f64::from(mapping.xb_size);
    let ops = crossbars as f64 * 2.0 * side * side / (xb.latency * slices * bits);
    Ok(ops / total_power / 1e12)
}

/// Power charged to a design: crossbars, DACs, allocated ADC/ALU units and
/// per-macro overhead.
pub fn power_breakdown(
    plan: &MacroPlan,
    alloc: &CompAllocMatrix,
    ctx: &SimContext<'_>,
) -> Result<BTreeMap<String, f64>> {
    let hw = ctx.hw;
    let mapping = &ctx.mapping;
    let crossbars: u64 = ctx
        .model
        .weight_bearing_layers()
        .zip(ctx.factors)
        .map(|(l, &d)| d * crossbar_set(l, mapping.xb_size, mapping.res_rram))
        .sum();
    let params = class_params(hw, ctx.adc_resolution)?;
    let mut out = BTreeMap::new();
    out.insert(
        "crossbar".to_string(),
        crossbars as f64 * hw.crossbar_power(mapping.xb_size, mapping.res_rram)?,
    );
    out.insert(
        "dac".to_string(),
        dac_count(ctx.model, ctx.factors, mapping.xb_size) as f64 * hw.dac(mapping.res_dac)?.power,
    );
    for class in crate::alloc::CLASSES {
        let units: u32 = alloc.counts.iter().map(|row| row[class.index()]).sum();
        out.insert(class.name().to_string(), f64::from(units) * params[class.index()].power);
    }
    out.insert(
        "macro_overhead".to_string(),
        plan.num_macros() as f64 * hw.macro_overhead_power(),
    );
    Ok(out)
}

/// Simulate and also return the program and its trace.
pub fn simulate_traced(
    dag: &DataflowDag,
    plan: &MacroPlan,
    alloc: &CompAllocMatrix,
    ctx: &SimContext<'_>,
) -> Result<(EvalResult, Lowered, Trace)> {
    let lowered = lower(dag, plan, alloc, ctx)?;
    let trace = run(&lowered.program)?;
    if cfg!(debug_assertions) {
        let deps = dependency_violations(&lowered.program, &trace);
        let caps = capacity_violations(&lowered.program, &trace);
        if !deps.is_empty() || !caps.is_empty() {
            return Err(Error::CompilerInternal(format!(
                "schedule breaks {} dependencies and {} pool capacities",
                deps.len(),
                caps.len()
            )));
        }
    }
    let latency = trace.makespan();
    if !(latency > 0.0) {
        return Err(Error::CompilerInternal("simulated latency is not positive".into()));
    }
    let throughput = 2.0 * ctx.model.total_macs() as f64 / latency;
    let breakdown = power_breakdown(plan, alloc, ctx)?;
    let power: f64 = breakdown.values().sum();

    let mut busy_time: BTreeMap<String, f64> = BTreeMap::new();
    let mut active_energy = 0.0;
    for v in 0..lowered.program.len() {
        let d = lowered.program.durations[v];
        if let Some(p) = lowered.program.resource[v] {
            let pool = &lowered.pools[p];
            *busy_time.entry(pool_label(&pool.kind).to_string()).or_insert(0.0) += d;
            active_energy += d * f64::from(lowered.program.demand[v]) * pool.unit_power;
        }
    }
    let energy = match ctx.energy_mode {
        EnergyMode::Budget => power * latency,
        EnergyMode::Activity => active_energy + ctx.hw.register.power * plan.num_macros() as f64 * latency,
    };

    let mut layer_finish = vec![0.0f64; ctx.model.layers().len()];
    for (v, node) in dag.nodes().iter().enumerate() {
        let slot = &mut layer_finish[node.layer() - 1];
        *slot = slot.max(trace.finish[v]);
    }
    let crossbars: u64 = ctx
        .model
        .weight_bearing_layers()
        .zip(ctx.factors)
        .map(|(l, &d)| d * crossbar_set(l, ctx.mapping.xb_size, ctx.mapping.res_rram))
        .sum();

    let result = EvalResult {
        latency,
        throughput,
        power,
        power_efficiency: throughput / power / 1e12,
        energy,
        edp: energy * latency,
        peak_power_efficiency: peak_power_efficiency(ctx.hw, ctx.model, &ctx.mapping, crossbars, ctx.total_power)?,
        lower_bound_latency: critical_path(&lowered.program),
        power_breakdown: breakdown,
        busy_time,
        layer_finish,
    };
    Ok((result, lowered, trace))
}

/// Cycle-level evaluation of a complete design.
pub fn simulate(dag: &DataflowDag, plan: &MacroPlan, alloc: &CompAllocMatrix, ctx: &SimContext<'_>) -> Result<EvalResult> {
    simulate_traced(dag, plan, alloc, ctx).map(|(r, _, _)| r)
}

/// Critical-path latency with unlimited units.
pub fn lower_bound_latency(
    dag: &DataflowDag,
    plan: &MacroPlan,
    alloc: &CompAllocMatrix,
    ctx: &SimContext<'_>,
) -> Result<f64> {
    Ok(critical_path(&lower(dag, plan, alloc, ctx)?.program))
}

/// Latency bound from MVM time alone, usable before any allocation exists.
pub fn mvm_bound_latency(dag: &DataflowDag, mvm_latency: f64) -> f64 {
    let durations: Vec<f64> = dag
        .nodes()
        .iter()
        .map(|n| if matches!(n, Ir::Mvm { .. }) { mvm_latency } else { 0.0 })
        .collect();
    let n = durations.len();
    let edges: Vec<(u32, u32)> = dag.edges().iter().map(|e| (e.from, e.to)).collect();
    critical_path(&SimProgram::new(durations, vec![None; n], vec![0; n], vec![], &edges))
}

/// Event-trace dump: one `start finish` line per node.
pub fn trace_dump(trace: &Trace) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (v, (s, f)) in trace.start.iter().zip(&trace.finish).enumerate() {
        let _ = writeln!(out, "{v} {s:e} {f:e}");
    }
    out
}
