//! IR-level dataflow DAG.
//!
//! Each layer is lowered into computation IRs indexed by `(layer, cnt, bit)`
//! plus intra-macro load/store, and the IRs are wired with inter-layer,
//! inter-block, inter-bit and inter-operation dependencies. Stage 3 later
//! splices merge/transfer IRs into the graph.

mod compile;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compile::{compile, emit_layer_irs, required_producer_block, MappingParams};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AluOp {
    ShiftAdd,
    Relu,
    MaxPool,
    AvgPool,
    VectorAdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrCategory {
    Computation,
    IntraMacroComm,
    InterMacroComm,
}

/// Operation kind without parameters, for histograms and indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrKind {
    Mvm,
    Adc,
    Alu,
    Load,
    Store,
    Merge,
    Transfer,
}

impl IrKind {
    pub fn name(self) -> &'static str {
        match self {
            IrKind::Mvm => "MVM",
            IrKind::Adc => "ADC",
            IrKind::Alu => "ALU",
            IrKind::Load => "load",
            IrKind::Store => "store",
            IrKind::Merge => "merge",
            IrKind::Transfer => "transfer",
        }
    }
}

/// One IR node. Each variant carries exactly its own parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Ir {
    /// Analog matrix-vector multiply; includes DAC drive and sample-and-hold.
    Mvm { layer: usize, cnt: u32, bit: u32, xb_num: u64 },
    Adc { layer: usize, cnt: u32, bit: u32, vec_width: u64 },
    Alu { aluop: AluOp, layer: usize, cnt: u32, bit: u32, vec_width: u64 },
    Load { layer: usize, cnt: u32, vec_width: u64 },
    Store { layer: usize, cnt: u32, vec_width: u64 },
    Merge { layer: usize, macro_num: u32, vec_width: u64 },
    Transfer { layer: usize, src: u32, dst: u32, vec_width: u64 },
}

impl Ir {
    pub fn layer(&self) -> usize {
        match *self {
            Ir::Mvm { layer, .. }
            | Ir::Adc { layer, .. }
            | Ir::Alu { layer, .. }
            | Ir::Load { layer, .. }
            | Ir::Store { layer, .. }
            | Ir::Merge { layer, .. }
            | Ir::Transfer { layer, .. } => layer,
        }
    }

    pub fn kind(&self) -> IrKind {
        match self {
            Ir::Mvm { .. } => IrKind::Mvm,
            Ir::Adc { .. } => IrKind::Adc,
            Ir::Alu { .. } => IrKind::Alu,
            Ir::Load { .. } => IrKind::Load,
            Ir::Store { .. } => IrKind::Store,
            Ir::Merge { .. } => IrKind::Merge,
            Ir::Transfer { .. } => IrKind::Transfer,
        }
    }

    pub fn category(&self) -> IrCategory {
        match self.kind() {
            IrKind::Mvm | IrKind::Adc | IrKind::Alu => IrCategory::Computation,
            IrKind::Load | IrKind::Store => IrCategory::IntraMacroComm,
            IrKind::Merge | IrKind::Transfer => IrCategory::InterMacroComm,
        }
    }

    pub fn vec_width(&self) -> Option<u64> {
        match *self {
            Ir::Mvm { .. } => None,
            Ir::Adc { vec_width, .. }
            | Ir::Alu { vec_width, .. }
            | Ir::Load { vec_width, .. }
            | Ir::Store { vec_width, .. }
            | Ir::Merge { vec_width, .. }
            | Ir::Transfer { vec_width, .. } => Some(vec_width),
        }
    }

    pub fn cnt(&self) -> Option<u32> {
        match *self {
            Ir::Mvm { cnt, .. }
            | Ir::Adc { cnt, .. }
            | Ir::Alu { cnt, .. }
            | Ir::Load { cnt, .. }
            | Ir::Store { cnt, .. } => Some(cnt),
            Ir::Merge { .. } | Ir::Transfer { .. } => None,
        }
    }

    pub fn bit(&self) -> Option<u32> {
        match *self {
            Ir::Mvm { bit, .. } | Ir::Adc { bit, .. } | Ir::Alu { bit, .. } => Some(bit),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Ir::Mvm { layer, cnt, bit, xb_num } => {
                format!("MVM layer={layer} cnt={cnt} bit={bit} xb_num={xb_num}")
            }
            Ir::Adc { layer, cnt, bit, vec_width } => {
                format!("ADC layer={layer} cnt={cnt} bit={bit} vec_width={vec_width}")
            }
            Ir::Alu { aluop, layer, cnt, bit, vec_width } => format!(
                "ALU aluop={aluop:?} layer={layer} cnt={cnt} bit={bit} vec_width={vec_width}"
            ),
            Ir::Load { layer, cnt, vec_width } => {
                format!("load layer={layer} cnt={cnt} vec_width={vec_width}")
            }
            Ir::Store { layer, cnt, vec_width } => {
                format!("store layer={layer} cnt={cnt} vec_width={vec_width}")
            }
            Ir::Merge { layer, macro_num, vec_width } => {
                format!("merge layer={layer} macro_num={macro_num} vec_width={vec_width}")
            }
            Ir::Transfer { layer, src, dst, vec_width } => {
                format!("transfer layer={layer} src={src} dst={dst} vec_width={vec_width}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepKind {
    InterLayer,
    InterBlock,
    InterBit,
    InterOperation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: DepKind,
}

/// Per-layer lookup tables into the node array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerNodes {
    pub layer: usize,
    pub steps: u32,
    pub bits: u32,
    /// Output positions computed by one block (the duplication factor for
    /// weight-bearing layers, one output row for pseudo-layers).
    pub positions_per_block: u64,
    pub loads: Vec<NodeId>,
    pub stores: Vec<NodeId>,
    /// Indexed `cnt * bits + bit`; empty for pseudo-layers.
    pub mvm: Vec<NodeId>,
    pub adc: Vec<NodeId>,
    pub shift_add: Vec<NodeId>,
    /// Per-block ALU ops after the bit loop, `post_per_block` per block.
    pub post: Vec<NodeId>,
    pub post_per_block: u32,
}

impl LayerNodes {
    pub fn mvm_at(&self, cnt: u32, bit: u32) -> NodeId {
        self.mvm[(cnt * self.bits + bit) as usize]
    }

    pub fn post_of(&self, cnt: u32) -> &[NodeId] {
        let k = self.post_per_block as usize;
        &self.post[cnt as usize * k..(cnt as usize + 1) * k]
    }

    /// Last node of a block's computation chain, right before its store.
    pub fn block_tail(&self, cnt: u32) -> NodeId {
        if let Some(&last) = self.post_of(cnt).last() {
            last
        } else if !self.shift_add.is_empty() {
            self.shift_add[(cnt * self.bits + self.bits - 1) as usize]
        } else {
            self.loads[cnt as usize]
        }
    }
}

/// The schedulable program: IR nodes plus tagged dependency edges.
#[derive(Debug, Clone)]
pub struct DataflowDag {
    nodes: Vec<Ir>,
    edges: Vec<Edge>,
    succ_offsets: Vec<u32>,
    succ_edges: Vec<u32>,
    pred_offsets: Vec<u32>,
    pred_edges: Vec<u32>,
    layers: Vec<LayerNodes>,
    /// Seconds per node, filled once resources are known.
    pub latency: Vec<f64>,
}

impl DataflowDag {
    /// Assemble a DAG, dropping duplicate edges and rejecting cycles.
    pub fn from_parts(nodes: Vec<Ir>, mut edges: Vec<Edge>, layers: Vec<LayerNodes>) -> Result<Self> {
        let n = nodes.len();
        if let Some(e) = edges.iter().find(|e| e.from as usize >= n || e.to as usize >= n) {
            return Err(Error::CompilerInternal(format!(
                "edge {} -> {} references a missing node",
                e.from, e.to
            )));
        }
        edges.sort_by_key(|e| (e.from, e.to, e.kind));
        edges.dedup_by_key(|e| (e.from, e.to));

        let (succ_offsets, succ_edges) = csr(n, edges.iter().map(|e| e.from));
        let (pred_offsets, pred_edges) = csr(n, edges.iter().map(|e| e.to));
        let dag = DataflowDag {
            latency: vec![0.0; n],
            nodes,
            edges,
            succ_offsets,
            succ_edges,
            pred_offsets,
            pred_edges,
            layers,
        };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn nodes(&self) -> &[Ir] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Ir {
        &self.nodes[id as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lookup tables of a layer by 1-based id.
    pub fn layer_nodes(&self, layer: usize) -> &LayerNodes {
        &self.layers[layer - 1]
    }

    pub fn layer_tables(&self) -> &[LayerNodes] {
        &self.layers
    }

    pub fn successors(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        let (a, b) = (self.succ_offsets[id as usize], self.succ_offsets[id as usize + 1]);
        self.succ_edges[a as usize..b as usize]
            .iter()
            .map(move |&e| &self.edges[e as usize])
    }

    pub fn predecessors(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        let (a, b) = (self.pred_offsets[id as usize], self.pred_offsets[id as usize + 1]);
        self.pred_edges[a as usize..b as usize]
            .iter()
            .map(move |&e| &self.edges[e as usize])
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        (self.pred_offsets[id as usize + 1] - self.pred_offsets[id as usize]) as usize
    }

    /// Kahn order, smallest ready id first.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indeg: Vec<u32> = (0..n as u32).map(|i| self.in_degree(i) as u32).collect();
        let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<NodeId>> = (0..n as u32)
            .filter(|&i| indeg[i as usize] == 0)
            .map(std::cmp::Reverse)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(std::cmp::Reverse(v)) = ready.pop() {
            order.push(v);
            for e in self.successors(v) {
                let d = &mut indeg[e.to as usize];
                *d -= 1;
                if *d == 0 {
                    ready.push(std::cmp::Reverse(e.to));
                }
            }
        }
        if order.len() != n {
            return Err(Error::Graph(format!(
                "dependency cycle among {} IR nodes",
                n - order.len()
            )));
        }
        Ok(order)
    }

    /// Human-readable dump: one `node` line per IR, one `edge` line per dependency.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "node {i} {} latency={:e}", node.describe(), self.latency[i]);
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {} {:?}", e.from, e.to, e.kind);
        }
        out
    }
}

fn csr(n: usize, keys: impl Iterator<Item = NodeId> + Clone) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; n + 1];
    for k in keys.clone() {
        offsets[k as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut slots = vec![0u32; offsets[n] as usize];
    for (edge, k) in keys.enumerate() {
        slots[fill[k as usize] as usize] = edge as u32;
        fill[k as usize] += 1;
    }
    (offsets, slots)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// Longest path counted in nodes.
    pub depth: usize,
    pub op_histogram: BTreeMap<IrKind, usize>,
    pub alu_histogram: BTreeMap<AluOp, usize>,
}

pub fn dag_stats(dag: &DataflowDag) -> Result<DagStats> {
    let order = dag.topological_order()?;
    let mut longest = vec![0usize; dag.len()];
    let mut depth = 0;
    for &v in &order {
        let here = dag
            .predecessors(v)
            .map(|e| longest[e.from as usize])
            .max()
            .unwrap_or(0)
            + 1;
        longest[v as usize] = here;
        depth = depth.max(here);
    }
    let mut op_histogram = BTreeMap::new();
    let mut alu_histogram = BTreeMap::new();
    for node in dag.nodes() {
        *op_histogram.entry(node.kind()).or_insert(0) += 1;
        if let Ir::Alu { aluop, .. } = node {
            *alu_histogram.entry(*aluop).or_insert(0) += 1;
        }
    }
    Ok(DagStats {
        node_count: dag.len(),
        edge_count: dag.edges().len(),
        depth,
        op_histogram,
        alu_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(lengths: &[u32]) -> DataflowDag {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (layer, &len) in lengths.iter().enumerate() {
            for i in 0..len {
                let id = nodes.len() as NodeId;
                nodes.push(Ir::Load { layer: layer + 1, cnt: i, vec_width: 1 });
                if i > 0 {
                    edges.push(Edge { from: id - 1, to: id, kind: DepKind::InterOperation });
                }
            }
        }
        DataflowDag::from_parts(nodes, edges, vec![]).unwrap()
    }

    #[test]
    fn depth_of_linear_chain() {
        assert_eq!(dag_stats(&chain(&[5])).unwrap().depth, 5);
    }

    #[test]
    fn depth_of_independent_chains() {
        let stats = dag_stats(&chain(&[3, 7])).unwrap();
        assert_eq!(stats.depth, 7);
        assert_eq!(stats.node_count, 10);
    }

    #[test]
    fn cycle_is_rejected() {
        let nodes = vec![
            Ir::Load { layer: 1, cnt: 0, vec_width: 1 },
            Ir::Store { layer: 1, cnt: 0, vec_width: 1 },
        ];
        let edges = vec![
            Edge { from: 0, to: 1, kind: DepKind::InterOperation },
            Edge { from: 1, to: 0, kind: DepKind::InterOperation },
        ];
        assert!(matches!(
            DataflowDag::from_parts(nodes, edges, vec![]),
            Err(Error::Graph(_))
        ));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let nodes = vec![
            Ir::Load { layer: 1, cnt: 0, vec_width: 1 },
            Ir::Store { layer: 1, cnt: 0, vec_width: 1 },
        ];
        let e = Edge { from: 0, to: 1, kind: DepKind::InterOperation };
        let dag = DataflowDag::from_parts(nodes, vec![e, e], vec![]).unwrap();
        assert_eq!(dag.edges().len(), 1);
        assert_eq!(dag.successors(0).count(), 1);
        assert_eq!(dag.predecessors(1).count(), 1);
    }

    #[test]
    fn table_parameter_presence() {
        let mvm = Ir::Mvm { layer: 1, cnt: 0, bit: 0, xb_num: 4 };
        assert_eq!(mvm.vec_width(), None);
        assert_eq!(mvm.category(), IrCategory::Computation);
        let load = Ir::Load { layer: 1, cnt: 0, vec_width: 9 };
        assert_eq!(load.bit(), None);
        assert_eq!(load.category(), IrCategory::IntraMacroComm);
        let merge = Ir::Merge { layer: 1, macro_num: 2, vec_width: 9 };
        assert_eq!(merge.cnt(), None);
        assert_eq!(merge.category(), IrCategory::InterMacroComm);
    }
}
