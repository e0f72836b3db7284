use serde::{Deserialize, Serialize};

use super::engine::SimProgram;
use super::SimContext;
use crate::alloc::{ComponentClass, CompAllocMatrix};
use crate::dataflow::{DataflowDag, Ir};
use crate::error::{Error, Result};
use crate::model::CnnModel;
use crate::partition::{noc_latency, MacroPlan};
use crate::wtdup::{crossbar_set, row_groups};

/// What a simulation pool models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolKind {
    /// All crossbars of one layer, driven together.
    Crossbars { layer: usize },
    Component { group: usize, class: ComponentClass },
    /// Scratchpad ports of a macro group.
    Memory { group: usize },
    /// Routers of a macro group.
    Noc { group: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolInfo {
    pub kind: PoolKind,
    pub units: u32,
    /// Watts drawn per busy unit.
    pub unit_power: f64,
}

#[derive(Debug, Clone)]
pub struct Lowered {
    pub program: SimProgram,
    pub pools: Vec<PoolInfo>,
}

/// Scratchpad bytes a layer keeps for the inputs of one block.
fn input_buffer_bytes(model: &CnnModel, id: usize, positions_per_block: u64) -> f64 {
    let layer = model.layer(id);
    let window = model.window(id);
    let (in_w, in_h) = model.input_dims(id);
    let channels = f64::from(layer.in_channels) * layer.predecessors.len().max(1) as f64;
    let bytes = f64::from(layer.act_bits) / 8.0;
    if window.full {
        return channels * bytes;
    }
    let rows_out = positions_per_block.div_ceil(u64::from(layer.out_width)).max(1);
    let rows_in = ((rows_out - 1) * u64::from(window.stride_y) + u64::from(window.kernel)).min(u64::from(in_h));
    rows_in as f64 * f64::from(in_w) * channels * bytes
}

/// Turn the finished DAG into a schedulable program over per-group pools.
pub fn lower(dag: &DataflowDag, plan: &MacroPlan, alloc: &CompAllocMatrix, ctx: &SimContext<'_>) -> Result<Lowered> {
    let SimContext {
        model,
        hw,
        mapping,
        factors,
        adc_resolution,
        ..
    } = *ctx;
    let mut pools = Vec::new();
    let xb = hw.crossbar(mapping.xb_size, mapping.res_rram)?;
    let dac = hw.dac(mapping.res_dac)?;
    let adc = hw.adc(adc_resolution)?;

    let mut crossbar_pool = vec![usize::MAX; model.layers().len()];
    for (i, layer) in model.weight_bearing_layers().enumerate() {
        let crossbars = factors[i] * crossbar_set(layer, mapping.xb_size, mapping.res_rram);
        let dacs = factors[i] * row_groups(layer, mapping.xb_size) * u64::from(mapping.xb_size);
        crossbar_pool[layer.index - 1] = pools.len();
        pools.push(PoolInfo {
            kind: PoolKind::Crossbars { layer: layer.index },
            units: 1,
            unit_power: crossbars as f64 * xb.power + dacs as f64 * dac.power,
        });
    }
    let group_base = pools.len();
    let per_group = 7;
    for (g, group) in plan.groups.iter().enumerate() {
        let m = group.macros.len() as u32;
        for class in crate::alloc::CLASSES {
            let power = match class {
                ComponentClass::Adc => adc.power,
                ComponentClass::ShiftAdd => hw.alu.shift_add.power,
                ComponentClass::Pooling => hw.alu.pooling.power,
                ComponentClass::Relu => hw.alu.relu.power,
                ComponentClass::VectorAdd => hw.alu.vector_add.power,
            };
            pools.push(PoolInfo {
                kind: PoolKind::Component { group: g, class },
                units: alloc.counts[g][class.index()],
                unit_power: power,
            });
        }
        pools.push(PoolInfo {
            kind: PoolKind::Memory { group: g },
            units: m,
            unit_power: hw.scratchpad.power,
        });
        pools.push(PoolInfo {
            kind: PoolKind::Noc { group: g },
            units: m,
            unit_power: hw.noc.power,
        });
    }
    let component_pool = |g: usize, c: ComponentClass| group_base + g * per_group + c.index();
    let memory_pool = |g: usize| group_base + g * per_group + 5;
    let noc_pool = |g: usize| group_base + g * per_group + 6;

    // load slowdown from scratchpad overflow, per layer
    let spill: Vec<f64> = model
        .layers()
        .iter()
        .map(|l| {
            let g = plan.group_of(l.index);
            let group = &plan.groups[g];
            let capacity = (hw.scratchpad.size_bytes * group.macros.len() as u64) as f64 / group.hosted.len() as f64;
            let need = input_buffer_bytes(model, l.index, dag.layer_nodes(l.index).positions_per_block);
            let overflow = ((need - capacity) / need).max(0.0);
            1.0 + hw.scratchpad.spill_penalty * overflow
        })
        .collect();

    let n = dag.len();
    let mut durations = Vec::with_capacity(n);
    let mut resource = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    for node in dag.nodes() {
        let layer = node.layer();
        let g = plan.group_of(layer);
        let act_bits = model.layer(layer).act_bits;
        let m = plan.groups[g].macros.len() as u32;
        let (pool, seconds) = match *node {
            Ir::Mvm { .. } => (crossbar_pool[layer - 1], xb.latency),
            Ir::Adc { vec_width, .. } | Ir::Alu { vec_width, .. } => {
                let class = ComponentClass::of(node).expect("computation IR");
                let p = component_pool(g, class);
                let units = pools[p].units;
                if units == 0 {
                    return Err(Error::CompilerInternal(format!(
                        "layer {layer} needs {} units but its macros have none",
                        class.name()
                    )));
                }
                let freq = match class {
                    ComponentClass::Adc => adc.frequency,
                    ComponentClass::ShiftAdd => hw.alu.shift_add.frequency,
                    ComponentClass::Pooling => hw.alu.pooling.frequency,
                    ComponentClass::Relu => hw.alu.relu.frequency,
                    ComponentClass::VectorAdd => hw.alu.vector_add.frequency,
                };
                (p, vec_width as f64 / (freq * f64::from(units)))
            }
            Ir::Load { vec_width, .. } => {
                let bits = (vec_width * u64::from(act_bits)) as f64;
                (memory_pool(g), bits / (hw.scratchpad.bandwidth() * f64::from(m)) * spill[layer - 1])
            }
            Ir::Store { vec_width, .. } => {
                let bits = (vec_width * u64::from(act_bits)) as f64;
                (memory_pool(g), bits / (hw.scratchpad.bandwidth() * f64::from(m)))
            }
            Ir::Merge { vec_width, .. } => (
                noc_pool(g),
                noc_latency(vec_width, act_bits, plan.group_radius(g), m, &hw.noc),
            ),
            Ir::Transfer { src, dst, vec_width, .. } => (
                noc_pool(g),
                noc_latency(vec_width, act_bits, plan.hops(src, dst), m, &hw.noc),
            ),
        };
        durations.push(seconds);
        resource.push(Some(pool));
        demand.push(pools[pool].units);
    }
    let edges: Vec<(u32, u32)> = dag.edges().iter().map(|e| (e.from, e.to)).collect();
    let units = pools.iter().map(|p| p.units).collect();
    Ok(Lowered {
        program: SimProgram::new(durations, resource, demand, units, &edges),
        pools,
    })
}
