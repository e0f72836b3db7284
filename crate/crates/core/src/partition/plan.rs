use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::gene::MacAllocGene;
use crate::dataflow::{DataflowDag, DepKind, Edge, Ir, NodeId};
use crate::error::{Error, Result};
use crate::hw::NocParams;
use crate::model::CnnModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroInfo {
    pub id: u32,
    pub group: usize,
    /// `(layer id, crossbars)` for each resident weight-bearing layer.
    pub crossbars: Vec<(usize, u64)>,
}

/// Macros owned by one layer, possibly shared with one later layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroGroup {
    pub owner: usize,
    /// Resident weight-bearing layers (owner first).
    pub members: Vec<usize>,
    /// Every layer whose IRs run on these macros, pseudo-layers included.
    pub hosted: Vec<usize>,
    pub macros: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPlan {
    pub macros: Vec<MacroInfo>,
    pub groups: Vec<MacroGroup>,
    /// Group index of every layer, by `id - 1`.
    pub layer_group: Vec<usize>,
    /// Side of the square mesh the macros are placed on, row-major.
    pub mesh_side: u32,
}

impl MacroPlan {
    pub fn group_of(&self, layer: usize) -> usize {
        self.layer_group[layer - 1]
    }

    pub fn num_macros(&self) -> usize {
        self.macros.len()
    }

    /// Manhattan distance between two macros on the mesh.
    pub fn hops(&self, a: u32, b: u32) -> u32 {
        let (ax, ay) = (a % self.mesh_side, a / self.mesh_side);
        let (bx, by) = (b % self.mesh_side, b / self.mesh_side);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    /// Largest distance from a group's first macro to any of its macros.
    pub fn group_radius(&self, group: usize) -> u32 {
        let macros = &self.groups[group].macros;
        macros.iter().map(|&m| self.hops(macros[0], m)).max().unwrap_or(0)
    }

    pub fn layer_crossbars(&self, layer: usize) -> u64 {
        self.macros
            .iter()
            .flat_map(|m| m.crossbars.iter())
            .filter(|(l, _)| *l == layer)
            .map(|(_, c)| c)
            .sum()
    }
}

/// Distribute each layer's crossbars over its macros and place the macros.
/// `factors` and `sets` are indexed by weight-bearing ordinal.
pub fn build_macro_plan(gene: &MacAllocGene, model: &CnnModel, factors: &[u64], sets: &[u64]) -> MacroPlan {
    let ids = model.weight_bearing_ids();
    let mut groups: Vec<MacroGroup> = Vec::new();
    let mut group_by_owner: HashMap<usize, usize> = HashMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let owner = gene.owner(i);
        if let Some(&g) = group_by_owner.get(&owner) {
            groups[g].members.push(id);
        } else {
            group_by_owner.insert(owner, groups.len());
            groups.push(MacroGroup {
                owner,
                members: vec![id],
                hosted: Vec::new(),
                macros: Vec::new(),
            });
        }
    }

    let mut macros: Vec<MacroInfo> = Vec::new();
    for (g, group) in groups.iter_mut().enumerate() {
        let n = gene.macros(model.weight_bearing_ordinal(group.owner).expect("owner carries weights"));
        let first = macros.len() as u32;
        group.macros = (first..first + n).collect();
        for &m in &group.macros {
            macros.push(MacroInfo {
                id: m,
                group: g,
                crossbars: Vec::new(),
            });
        }
        for &layer in &group.members {
            let i = model.weight_bearing_ordinal(layer).expect("member carries weights");
            let total = factors[i] * sets[i];
            let (base, extra) = (total / u64::from(n), total % u64::from(n));
            for k in 0..n {
                let share = base + u64::from(u64::from(k) < extra);
                if share > 0 {
                    macros[(first + k) as usize].crossbars.push((layer, share));
                }
            }
        }
    }

    let mut layer_group = vec![0; model.layers().len()];
    for layer in model.layers() {
        let g = group_by_owner[&gene.owner(
            model
                .weight_bearing_ordinal(model.host_of(layer.index))
                .expect("host carries weights"),
        )];
        layer_group[layer.index - 1] = g;
        groups[g].hosted.push(layer.index);
    }
    let mesh_side = (macros.len() as f64).sqrt().ceil().max(1.0) as u32;
    MacroPlan {
        macros,
        groups,
        layer_group,
        mesh_side,
    }
}

/// NoC flits carrying `vec_width` activations.
pub fn flits(vec_width: u64, act_bits: u32, noc: &NocParams) -> u64 {
    (vec_width * u64::from(act_bits)).div_ceil(u64::from(noc.flit_size_bits))
}

/// Seconds to move `vec_width` activations over `hops` links when `lanes`
/// macros inject in parallel.
pub fn noc_latency(vec_width: u64, act_bits: u32, hops: u32, lanes: u32, noc: &NocParams) -> f64 {
    flits(vec_width, act_bits, noc) as f64 / (noc.frequency * f64::from(lanes.max(1)))
        + f64::from(hops) * noc.hop_latency
}

/// Splice merge IRs after the bit loop of every multi-macro layer and route
/// inter-layer edges that cross groups through transfer IRs. New nodes are
/// appended, so ids in the per-layer tables stay valid.
pub fn attach_comm_irs(plan: &MacroPlan, base: &DataflowDag, model: &CnnModel) -> Result<DataflowDag> {
    let mut nodes: Vec<Ir> = base.nodes().to_vec();
    let mut removed: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut added: Vec<Edge> = Vec::new();
    let push = |nodes: &mut Vec<Ir>, ir: Ir| {
        nodes.push(ir);
        (nodes.len() - 1) as NodeId
    };

    for &id in model.weight_bearing_ids() {
        let group = &plan.groups[plan.group_of(id)];
        let n = group.macros.len() as u32;
        if n < 2 {
            continue;
        }
        let t = base.layer_nodes(id);
        for c in 0..t.steps {
            let tail = t.shift_add[(c * t.bits + t.bits - 1) as usize];
            let next = t.post_of(c).first().copied().unwrap_or(t.stores[c as usize]);
            let Ir::Store { vec_width, .. } = *base.node(t.stores[c as usize]) else {
                return Err(Error::CompilerInternal(format!("layer {id} store table is corrupt")));
            };
            let m = push(
                &mut nodes,
                Ir::Merge {
                    layer: id,
                    macro_num: n,
                    vec_width,
                },
            );
            removed.insert((tail, next));
            added.push(Edge { from: tail, to: m, kind: DepKind::InterOperation });
            added.push(Edge { from: m, to: next, kind: DepKind::InterOperation });
        }
    }

    for layer in model.layers() {
        let gl = plan.group_of(layer.index);
        for &p in &layer.predecessors {
            let gp = plan.group_of(p);
            if gp == gl {
                continue;
            }
            let src = *plan.groups[gp].macros.last().expect("groups own macros");
            let dst = plan.groups[gl].macros[0];
            let pt = base.layer_nodes(p);
            let mut transfers = Vec::with_capacity(pt.steps as usize);
            for c in 0..pt.steps as usize {
                let store = pt.stores[c];
                let vec_width = base.node(store).vec_width().unwrap_or(0);
                let t = push(
                    &mut nodes,
                    Ir::Transfer {
                        layer: p,
                        src,
                        dst,
                        vec_width,
                    },
                );
                added.push(Edge { from: store, to: t, kind: DepKind::InterLayer });
                if let Some(&prev) = transfers.last() {
                    added.push(Edge { from: prev, to: t, kind: DepKind::InterBlock });
                }
                transfers.push(t);
            }
            let store_block: HashMap<NodeId, usize> =
                pt.stores.iter().enumerate().map(|(c, &s)| (s, c)).collect();
            let lt = base.layer_nodes(layer.index);
            for &load in &lt.loads {
                for e in base.predecessors(load) {
                    if let Some(&c) = store_block.get(&e.from) {
                        removed.insert((e.from, load));
                        added.push(Edge { from: transfers[c], to: load, kind: DepKind::InterLayer });
                    }
                }
            }
        }
    }

    let mut edges: Vec<Edge> = base
        .edges()
        .iter()
        .filter(|e| !removed.contains(&(e.from, e.to)))
        .copied()
        .collect();
    edges.extend(added);
    DataflowDag::from_parts(nodes, edges, base.layer_tables().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{compile, MappingParams};
    use crate::hw::HardwareParams;
    use crate::model::{build_model, LayerKind, LayerSpec};

    fn conv(index: usize, ci: u32, co: u32, preds: Vec<usize>) -> LayerSpec {
        LayerSpec {
            index,
            kind: LayerKind::Conv,
            kernel: 3,
            in_channels: ci,
            out_channels: co,
            out_width: 4,
            out_height: 4,
            stride: None,
            padding: None,
            weight_bits: 16,
            act_bits: 16,
            predecessors: preds,
            fused: vec![],
        }
    }

    #[test]
    fn round_robin_even() {
        let m = build_model("m", 16, 16, vec![conv(1, 64, 128, vec![])]).unwrap();
        let gene = MacAllocGene { codes: vec![1005] };
        let plan = build_macro_plan(&gene, &m, &[1], &[40]);
        assert_eq!(plan.num_macros(), 5);
        assert!(plan.macros.iter().all(|x| x.crossbars == vec![(1, 8)]));
        assert_eq!(plan.layer_crossbars(1), 40);
    }

    #[test]
    fn transfers_only_across_groups() {
        let m = build_model("m", 16, 16, vec![conv(1, 8, 8, vec![]), conv(2, 8, 8, vec![1])]).unwrap();
        let p = MappingParams { xb_size: 128, res_rram: 2, res_dac: 4 };
        let dag = compile(&m, &[2, 2], &p).unwrap();
        let count = |d: &DataflowDag| d.nodes().iter().filter(|n| matches!(n, Ir::Transfer { .. })).count();

        let shared = MacAllocGene { codes: vec![1001, 1001] };
        let plan = build_macro_plan(&shared, &m, &[2, 2], &[8, 8]);
        assert_eq!(count(&attach_comm_irs(&plan, &dag, &m).unwrap()), 0);

        let private = MacAllocGene { codes: vec![1001, 2001] };
        let plan = build_macro_plan(&private, &m, &[2, 2], &[8, 8]);
        let with = attach_comm_irs(&plan, &dag, &m).unwrap();
        assert_eq!(count(&with), 8);
        assert!(with.topological_order().is_ok());
    }

    #[test]
    fn payload_flits() {
        let noc = HardwareParams::default().noc;
        assert_eq!(flits(128, 16, &noc), 64);
    }

    #[test]
    fn mesh_hops() {
        let m = build_model("m", 16, 16, vec![conv(1, 64, 128, vec![])]).unwrap();
        let plan = build_macro_plan(&MacAllocGene { codes: vec![1005] }, &m, &[1], &[40]);
        assert_eq!(plan.mesh_side, 3);
        assert_eq!(plan.hops(0, 4), 2);
        assert_eq!(plan.hops(2, 3), 3);
    }
}
