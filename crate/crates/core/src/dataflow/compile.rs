use serde::{Deserialize, Serialize};

use super::{AluOp, DataflowDag, DepKind, Edge, Ir, LayerNodes, NodeId};
use crate::error::{Error, Result};
use crate::model::{CnnModel, FusedOp, LayerKind, LayerSpec};
use crate::wtdup::{ceil_div, crossbar_set, row_groups, weight_slices};

/// Mapping choices the compiler needs besides the duplication factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingParams {
    pub xb_size: u32,
    pub res_rram: u32,
    pub res_dac: u32,
}

impl MappingParams {
    pub fn bits(&self, layer: &LayerSpec) -> u32 {
        layer.act_bits.div_ceil(self.res_dac)
    }
}

/// Output positions per block: the duplication factor for conv/fc, one
/// output row for ALU-only layers.
fn positions_per_block(layer: &LayerSpec, wtdup: u64) -> u64 {
    if layer.is_weight_bearing() {
        wtdup.min(layer.output_positions()).max(1)
    } else {
        u64::from(layer.out_width)
    }
}

fn block_positions(layer: &LayerSpec, ppb: u64, cnt: u64) -> u64 {
    let total = layer.output_positions();
    (total - cnt * ppb).min(ppb)
}

/// IR sequence of one layer, block-major: per block a load, the bit loop
/// (MVM, ADC, shift-add), fused ALU ops and a store.
pub fn emit_layer_irs(layer: &LayerSpec, wtdup: u64, params: &MappingParams) -> Vec<Ir> {
    let id = layer.index;
    let ppb = positions_per_block(layer, wtdup);
    let steps = ceil_div(layer.output_positions(), ppb);
    let c_o = u64::from(layer.out_channels);
    let mut out = Vec::new();

    if !layer.is_weight_bearing() {
        let (aluop, per_pos) = match layer.kind {
            LayerKind::Pool => (AluOp::MaxPool, u64::from(layer.in_channels) * u64::from(layer.kernel).pow(2)),
            LayerKind::Relu => (AluOp::Relu, u64::from(layer.in_channels)),
            LayerKind::ResidualAdd => (
                AluOp::VectorAdd,
                u64::from(layer.in_channels) * layer.predecessors.len() as u64,
            ),
            LayerKind::Conv | LayerKind::Fc => unreachable!(),
        };
        for cnt in 0..steps {
            let d = block_positions(layer, ppb, cnt);
            let cnt = cnt as u32;
            out.push(Ir::Load { layer: id, cnt, vec_width: d * per_pos });
            out.push(Ir::Alu { aluop, layer: id, cnt, bit: 0, vec_width: d * c_o });
            out.push(Ir::Store { layer: id, cnt, vec_width: d * c_o });
        }
        return out;
    }

    let bits = params.bits(layer);
    let xb_num = wtdup * crossbar_set(layer, params.xb_size, params.res_rram);
    let conversions = row_groups(layer, params.xb_size) * c_o * weight_slices(layer, params.res_rram);
    for cnt in 0..steps {
        let d = block_positions(layer, ppb, cnt);
        let cnt = cnt as u32;
        out.push(Ir::Load { layer: id, cnt, vec_width: d * layer.weight_rows() });
        for bit in 0..bits {
            out.push(Ir::Mvm { layer: id, cnt, bit, xb_num });
            out.push(Ir::Adc { layer: id, cnt, bit, vec_width: d * conversions });
            out.push(Ir::Alu {
                aluop: AluOp::ShiftAdd,
                layer: id,
                cnt,
                bit,
                vec_width: d * conversions,
            });
        }
        for op in &layer.fused {
            let aluop = match op {
                FusedOp::Relu => AluOp::Relu,
                FusedOp::MaxPool { .. } => AluOp::MaxPool,
                FusedOp::AvgPool { .. } => AluOp::AvgPool,
            };
            out.push(Ir::Alu { aluop, layer: id, cnt, bit: bits - 1, vec_width: d * c_o });
        }
        out.push(Ir::Store { layer: id, cnt, vec_width: d * c_o });
    }
    out
}

/// Earliest block of `producer` after which every input that block `cnt` of
/// `consumer` reads has been stored.
///
/// Blocks cover output positions in row-major order, so the last position
/// a consumer position needs is the bottom-right corner of its window,
/// expanded through the producer's fused pooling.
pub fn required_producer_block(
    model: &CnnModel,
    producer: usize,
    producer_ppb: u64,
    consumer: usize,
    consumer_ppb: u64,
    cnt: u64,
) -> u64 {
    let p = model.layer(producer);
    let c = model.layer(consumer);
    let p_steps = ceil_div(p.output_positions(), producer_ppb);
    let window = model.window(consumer);
    if window.full {
        return p_steps - 1;
    }
    let (in_w, in_h) = p.effective_output();
    let pool = p.fused_pool().unwrap_or(1).max(1);
    let first = cnt * consumer_ppb;
    let last = (first + consumer_ppb).min(c.output_positions());
    let width = u64::from(c.out_width);
    let mut need = 0u64;
    for pos in first..last {
        let (x, y) = ((pos % width) as u32, (pos / width) as u32);
        let (_, x_hi) = window.cols(x, in_w);
        let (_, y_hi) = window.rows(y, in_h);
        let px = (x_hi * pool + pool - 1).min(p.out_width - 1);
        let py = (y_hi * pool + pool - 1).min(p.out_height - 1);
        need = need.max(u64::from(py) * u64::from(p.out_width) + u64::from(px));
    }
    need / producer_ppb
}

fn index_layer(layer: &LayerSpec, wtdup: u64, params: &MappingParams, base: NodeId, irs: &[Ir]) -> LayerNodes {
    let ppb = positions_per_block(layer, wtdup);
    let steps = ceil_div(layer.output_positions(), ppb) as u32;
    let bits = if layer.is_weight_bearing() { params.bits(layer) } else { 1 };
    let mut t = LayerNodes {
        layer: layer.index,
        steps,
        bits,
        positions_per_block: ppb,
        loads: Vec::new(),
        stores: Vec::new(),
        mvm: Vec::new(),
        adc: Vec::new(),
        shift_add: Vec::new(),
        post: Vec::new(),
        post_per_block: if layer.is_weight_bearing() { layer.fused.len() as u32 } else { 1 },
    };
    for (k, ir) in irs.iter().enumerate() {
        let id = base + k as NodeId;
        match ir {
            Ir::Load { .. } => t.loads.push(id),
            Ir::Store { .. } => t.stores.push(id),
            Ir::Mvm { .. } => t.mvm.push(id),
            Ir::Adc { .. } => t.adc.push(id),
            Ir::Alu { aluop: AluOp::ShiftAdd, .. } => t.shift_add.push(id),
            Ir::Alu { .. } => t.post.push(id),
            Ir::Merge { .. } | Ir::Transfer { .. } => {}
        }
    }
    t
}

/// Compile a model into the base dataflow DAG (no inter-macro IRs yet).
/// `factors` holds one duplication factor per weight-bearing layer.
pub fn compile(model: &CnnModel, factors: &[u64], params: &MappingParams) -> Result<DataflowDag> {
    if factors.len() != model.num_weight_bearing() {
        return Err(Error::CompilerInternal(format!(
            "{} duplication factors for {} weight-bearing layers",
            factors.len(),
            model.num_weight_bearing()
        )));
    }
    let mut nodes = Vec::new();
    let mut tables = Vec::with_capacity(model.layers().len());
    for layer in model.layers() {
        let d = model
            .weight_bearing_ordinal(layer.index)
            .map_or(1, |i| factors[i]);
        if d == 0 {
            return Err(Error::CompilerInternal(format!("layer {} has zero duplication", layer.index)));
        }
        let irs = emit_layer_irs(layer, d, params);
        tables.push(index_layer(layer, d, params, nodes.len() as NodeId, &irs));
        nodes.extend(irs);
    }

    let mut edges = Vec::new();
    let mut add = |from: NodeId, to: NodeId, kind: DepKind| edges.push(Edge { from, to, kind });
    for t in &tables {
        for c in 0..t.steps {
            let load = t.loads[c as usize];
            let store = t.stores[c as usize];
            if t.mvm.is_empty() {
                let alu = t.post_of(c)[0];
                add(load, alu, DepKind::InterOperation);
                add(alu, store, DepKind::InterOperation);
            } else {
                add(load, t.mvm_at(c, 0), DepKind::InterOperation);
                for b in 0..t.bits {
                    let k = (c * t.bits + b) as usize;
                    add(t.mvm[k], t.adc[k], DepKind::InterOperation);
                    add(t.adc[k], t.shift_add[k], DepKind::InterOperation);
                    if b > 0 {
                        add(t.mvm[k - 1], t.mvm[k], DepKind::InterBit);
                        add(t.shift_add[k - 1], t.shift_add[k], DepKind::InterBit);
                    }
                    if c > 0 {
                        add(t.mvm_at(c - 1, b), t.mvm[k], DepKind::InterBlock);
                    }
                }
                let mut prev = t.shift_add[(c * t.bits + t.bits - 1) as usize];
                for &p in t.post_of(c) {
                    add(prev, p, DepKind::InterOperation);
                    prev = p;
                }
                add(prev, store, DepKind::InterOperation);
            }
            if c > 0 {
                add(t.stores[c as usize - 1], store, DepKind::InterBlock);
            }
        }
    }

    for layer in model.layers() {
        let t = &tables[layer.index - 1];
        for &p in &layer.predecessors {
            let pt = &tables[p - 1];
            for c in 0..t.steps {
                let need = required_producer_block(
                    model,
                    p,
                    pt.positions_per_block,
                    layer.index,
                    t.positions_per_block,
                    u64::from(c),
                );
                let Some(&store) = pt.stores.get(need as usize) else {
                    return Err(Error::CompilerInternal(format!(
                        "layer {} block {c} needs block {need} of layer {p}, which has {} blocks",
                        layer.index, pt.steps
                    )));
                };
                add(store, t.loads[c as usize], DepKind::InterLayer);
            }
        }
    }

    DataflowDag::from_parts(nodes, edges, tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{dag_stats, IrKind};
    use crate::model::build_model;

    fn conv(index: usize, k: u32, ci: u32, co: u32, w: u32, preds: Vec<usize>) -> LayerSpec {
        LayerSpec {
            index,
            kind: LayerKind::Conv,
            kernel: k,
            in_channels: ci,
            out_channels: co,
            out_width: w,
            out_height: w,
            stride: None,
            padding: None,
            weight_bits: 16,
            act_bits: 16,
            predecessors: preds,
            fused: vec![],
        }
    }

    fn count(irs: &[Ir], kind: IrKind) -> usize {
        irs.iter().filter(|n| n.kind() == kind).count()
    }

    const P1: MappingParams = MappingParams { xb_size: 128, res_rram: 2, res_dac: 1 };

    #[test]
    fn one_block_sixteen_bits() {
        let l = conv(1, 3, 8, 8, 4, vec![]);
        let irs = emit_layer_irs(&l, 16, &P1);
        assert_eq!(count(&irs, IrKind::Mvm), 16);
        assert_eq!(count(&irs, IrKind::Adc), 16);
        assert_eq!(count(&irs, IrKind::Load), 1);
    }

    #[test]
    fn single_position_single_bit() {
        let mut l = conv(1, 1, 1, 1, 1, vec![]);
        l.act_bits = 1;
        let irs = emit_layer_irs(&l, 1, &P1);
        assert_eq!(count(&irs, IrKind::Mvm), 1);
        assert_eq!(count(&irs, IrKind::Adc), 1);
    }

    #[test]
    fn blocks_times_bits() {
        let l = conv(1, 3, 8, 8, 32, vec![]);
        let p = MappingParams { res_dac: 2, ..P1 };
        let irs = emit_layer_irs(&l, 8, &p);
        assert_eq!(count(&irs, IrKind::Mvm), 1024);
        assert!(irs.iter().all(|n| n.bit().is_none_or(|b| b < 8)));
        assert!(irs.iter().all(|n| n.cnt().is_none_or(|c| c < 128)));
    }

    #[test]
    fn single_layer_has_no_inter_layer_edges() {
        let m = build_model("one", 16, 16, vec![conv(1, 3, 4, 4, 4, vec![])]).unwrap();
        let dag = compile(&m, &[2], &P1).unwrap();
        assert!(dag.edges().iter().all(|e| e.kind != DepKind::InterLayer));
    }

    #[test]
    fn bit_chain_length() {
        let m = build_model("one", 16, 16, vec![conv(1, 3, 4, 4, 2, vec![])]).unwrap();
        let p = MappingParams { res_dac: 4, ..P1 };
        let dag = compile(&m, &[4], &p).unwrap();
        let t = dag.layer_nodes(1);
        assert_eq!(t.bits, 4);
        let bit_edges = dag
            .edges()
            .iter()
            .filter(|e| e.kind == DepKind::InterBit && matches!(dag.node(e.from), Ir::Mvm { .. }))
            .count();
        assert_eq!(bit_edges, 3);
    }

    #[test]
    fn readiness_for_same_conv() {
        // 8x8 maps, one row per block on both layers.
        let m = build_model(
            "two",
            16,
            16,
            vec![conv(1, 3, 4, 4, 8, vec![]), conv(2, 3, 4, 4, 8, vec![1])],
        )
        .unwrap();
        assert_eq!(required_producer_block(&m, 1, 8, 2, 8, 0), 1);
        assert_eq!(required_producer_block(&m, 1, 8, 2, 8, 3), 4);
        assert_eq!(required_producer_block(&m, 1, 8, 2, 8, 7), 7);
        let dag = compile(&m, &[8, 8], &P1).unwrap();
        assert!(dag_stats(&dag).unwrap().depth > 0);
    }
}
