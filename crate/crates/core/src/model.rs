//! CNN model ingestion.
//!
//! The model file is a versioned JSON document describing layer shapes only:
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "toy",
//!   "quantization": { "weights_bits": 16, "activations_bits": 16 },
//!   "layers": [
//!     { "id": 1, "kind": "conv", "kernel": 3, "in_channels": 3, "out_channels": 16,
//!       "out_width": 8, "out_height": 8, "predecessors": [], "fused": [{ "op": "relu" }] }
//!   ]
//! }
//! ```
//!
//! Optional per-layer keys: `stride`, `padding`, `weight_bits`, `act_bits`.
//! When stride/padding are omitted they are inferred from the producer's
//! output size.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Fc,
    Pool,
    Relu,
    ResidualAdd,
}

impl LayerKind {
    pub fn is_weight_bearing(self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Fc)
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
            LayerKind::Pool => "pool",
            LayerKind::Relu => "relu",
            LayerKind::ResidualAdd => "residual_add",
        }
    }
}

/// Vector operations executed by the macro ALUs right after a layer's
/// crossbar computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FusedOp {
    Relu,
    MaxPool { size: u32 },
    AvgPool { size: u32 },
}

impl FusedOp {
    pub fn pool_size(self) -> Option<u32> {
        match self {
            FusedOp::Relu => None,
            FusedOp::MaxPool { size } | FusedOp::AvgPool { size } => Some(size),
        }
    }
}

/// One layer of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    /// 1-based id, equal to the position in the model plus one.
    pub index: usize,
    pub kind: LayerKind,
    /// Square kernel width `W_K` (pool window for pool layers).
    pub kernel: u32,
    pub in_channels: u32,
    pub out_channels: u32,
    pub out_width: u32,
    pub out_height: u32,
    pub stride: Option<u32>,
    pub padding: Option<u32>,
    pub weight_bits: u32,
    pub act_bits: u32,
    pub predecessors: Vec<usize>,
    pub fused: Vec<FusedOp>,
}

impl LayerSpec {
    pub fn is_weight_bearing(&self) -> bool {
        self.kind.is_weight_bearing()
    }

    /// `W_O * H_O`.
    pub fn output_positions(&self) -> u64 {
        u64::from(self.out_width) * u64::from(self.out_height)
    }

    /// Crossbar rows needed by one copy of the weights, `W_K * W_K * C_I`.
    pub fn weight_rows(&self) -> u64 {
        u64::from(self.kernel) * u64::from(self.kernel) * u64::from(self.in_channels)
    }

    pub fn fused_pool(&self) -> Option<u32> {
        self.fused.iter().find_map(|op| op.pool_size())
    }

    pub fn has_fused_relu(&self) -> bool {
        self.fused.contains(&FusedOp::Relu)
    }

    /// Output map size seen by consumers, after any fused pooling.
    pub fn effective_output(&self) -> (u32, u32) {
        match self.fused_pool() {
            Some(q) if q > 1 => (self.out_width.div_ceil(q), self.out_height.div_ceil(q)),
            _ => (self.out_width, self.out_height),
        }
    }
}

/// Multiply-accumulates of a weight-bearing layer.
pub fn macs_per_layer(layer: &LayerSpec) -> Result<u64> {
    if !layer.is_weight_bearing() {
        return Err(Error::UnsupportedLayer {
            layer: layer.index,
            kind: layer.kind.name().to_string(),
        });
    }
    Ok(layer.weight_rows() * u64::from(layer.out_channels) * layer.output_positions())
}

/// Sliding-window geometry mapping a layer's output coordinates to the
/// coordinates of its input map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub kernel: u32,
    pub stride_x: u32,
    pub stride_y: u32,
    pub pad_x: u32,
    pub pad_y: u32,
    /// Every output depends on the entire input (fully connected).
    pub full: bool,
}

impl Window {
    /// Inclusive input column range read by output column `x`, clipped to the map.
    pub fn cols(&self, x: u32, in_width: u32) -> (u32, u32) {
        axis_range(x, self.stride_x, self.pad_x, self.kernel, in_width)
    }

    /// Inclusive input row range read by output row `y`, clipped to the map.
    pub fn rows(&self, y: u32, in_height: u32) -> (u32, u32) {
        axis_range(y, self.stride_y, self.pad_y, self.kernel, in_height)
    }
}

fn axis_range(out: u32, stride: u32, pad: u32, kernel: u32, size: u32) -> (u32, u32) {
    let lo = i64::from(out) * i64::from(stride) - i64::from(pad);
    let hi = lo + i64::from(kernel) - 1;
    let max = i64::from(size) - 1;
    (lo.clamp(0, max) as u32, hi.clamp(0, max) as u32)
}

fn infer_axis(in_size: u32, out_size: u32, kernel: u32, stride: Option<u32>, pad: Option<u32>) -> (u32, u32) {
    let s = stride.unwrap_or_else(|| (in_size / out_size.max(1)).max(1));
    let p = pad.unwrap_or_else(|| {
        let need = (i64::from(out_size) - 1) * i64::from(s) + i64::from(kernel) - i64::from(in_size);
        if need <= 0 {
            0
        } else {
            ((need + 1) / 2) as u32
        }
    });
    (s, p)
}

/// A validated, ordered CNN description.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub name: String,
    pub weights_bits: u32,
    pub activations_bits: u32,
    layers: Vec<LayerSpec>,
    weight_bearing: Vec<usize>,
    hosts: Vec<usize>,
}

impl CnnModel {
    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Layer by 1-based id.
    pub fn layer(&self, id: usize) -> &LayerSpec {
        &self.layers[id - 1]
    }

    /// Ids of the conv/fc layers, ascending.
    pub fn weight_bearing_ids(&self) -> &[usize] {
        &self.weight_bearing
    }

    pub fn weight_bearing_layers(&self) -> impl Iterator<Item = &LayerSpec> + '_ {
        self.weight_bearing.iter().map(|&id| self.layer(id))
    }

    pub fn num_weight_bearing(&self) -> usize {
        self.weight_bearing.len()
    }

    /// Position of a weight-bearing layer within [`Self::weight_bearing_ids`].
    pub fn weight_bearing_ordinal(&self, id: usize) -> Option<usize> {
        self.weight_bearing.binary_search(&id).ok()
    }

    /// Weight-bearing layer whose macros execute the ALU work of layer `id`.
    /// Pseudo-layers are hosted by their first weight-bearing consumer, or by
    /// their nearest weight-bearing ancestor when nothing downstream carries
    /// weights.
    pub fn host_of(&self, id: usize) -> usize {
        self.hosts[id - 1]
    }

    pub fn total_macs(&self) -> u64 {
        self.weight_bearing_layers()
            .map(|l| macs_per_layer(l).expect("weight-bearing"))
            .sum()
    }

    /// Largest `id - predecessor` distance over all edges.
    pub fn max_predecessor_distance(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.predecessors.iter().map(move |&p| l.index - p))
            .max()
            .unwrap_or(0)
    }

    /// Input feature-map size of a layer.
    pub fn input_dims(&self, id: usize) -> (u32, u32) {
        let layer = self.layer(id);
        match layer.predecessors.first() {
            Some(&p) => self.layer(p).effective_output(),
            None => {
                let s = layer.stride.unwrap_or(1);
                (layer.out_width * s, layer.out_height * s)
            }
        }
    }

    pub fn window(&self, id: usize) -> Window {
        let layer = self.layer(id);
        let (in_w, in_h) = self.input_dims(id);
        let kernel = match layer.kind {
            LayerKind::Conv | LayerKind::Pool => layer.kernel,
            LayerKind::Fc | LayerKind::Relu | LayerKind::ResidualAdd => 1,
        };
        let (stride_x, pad_x, stride_y, pad_y) = match layer.kind {
            LayerKind::Relu | LayerKind::ResidualAdd => (1, 0, 1, 0),
            _ => {
                let (sx, px) = infer_axis(in_w, layer.out_width, kernel, layer.stride, layer.padding);
                let (sy, py) = infer_axis(in_h, layer.out_height, kernel, layer.stride, layer.padding);
                (sx, px, sy, py)
            }
        };
        Window {
            kernel,
            stride_x,
            stride_y,
            pad_x,
            pad_y,
            full: layer.kind == LayerKind::Fc,
        }
    }

    /// Ids of the layers that list `id` as a predecessor.
    pub fn consumers(&self, id: usize) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| l.predecessors.contains(&id))
            .map(|l| l.index)
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "model file".into(),
            message: e.to_string(),
        })?;
        file.into_model()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self)).expect("model serializes")
    }
}

/// Read and validate a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CnnModel::from_json_str(&text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    name: String,
    quantization: Quantization,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Quantization {
    weights_bits: u32,
    activations_bits: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    id: usize,
    kind: LayerKind,
    kernel: u32,
    in_channels: u32,
    out_channels: u32,
    out_width: u32,
    out_height: u32,
    #[serde(default)]
    predecessors: Vec<usize>,
    #[serde(default)]
    fused: Vec<FusedOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    padding: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    act_bits: Option<u32>,
}

impl ModelFile {
    fn from_model(model: &CnnModel) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| LayerEntry {
                id: l.index,
                kind: l.kind,
                kernel: l.kernel,
                in_channels: l.in_channels,
                out_channels: l.out_channels,
                out_width: l.out_width,
                out_height: l.out_height,
                predecessors: l.predecessors.clone(),
                fused: l.fused.clone(),
                stride: l.stride,
                padding: l.padding,
                weight_bits: (l.weight_bits != model.weights_bits).then_some(l.weight_bits),
                act_bits: (l.act_bits != model.activations_bits).then_some(l.act_bits),
            })
            .collect();
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            name: model.name.clone(),
            quantization: Quantization {
                weights_bits: model.weights_bits,
                activations_bits: model.activations_bits,
            },
            layers,
        }
    }

    fn into_model(self) -> Result<CnnModel> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse {
                what: "model file".into(),
                message: format!(
                    "unsupported version {} (expected {MODEL_FORMAT_VERSION})",
                    self.version
                ),
            });
        }
        check_bits(0, "quantization.weights_bits", self.quantization.weights_bits)?;
        check_bits(0, "quantization.activations_bits", self.quantization.activations_bits)?;

        let layers: Vec<LayerSpec> = self
            .layers
            .into_iter()
            .map(|e| LayerSpec {
                index: e.id,
                kind: e.kind,
                kernel: e.kernel,
                in_channels: e.in_channels,
                out_channels: e.out_channels,
                out_width: e.out_width,
                out_height: e.out_height,
                stride: e.stride,
                padding: e.padding,
                weight_bits: e.weight_bits.unwrap_or(self.quantization.weights_bits),
                act_bits: e.act_bits.unwrap_or(self.quantization.activations_bits),
                predecessors: e.predecessors,
                fused: e.fused,
            })
            .collect();

        build_model(
            self.name,
            self.quantization.weights_bits,
            self.quantization.activations_bits,
            layers,
        )
    }
}

fn check_bits(layer: usize, field: &'static str, bits: u32) -> Result<()> {
    if (1..=32).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Validation {
            layer,
            field,
            message: format!("precision {bits} outside 1..=32"),
        })
    }
}

fn positive(layer: usize, field: &'static str, value: u32) -> Result<()> {
    if value == 0 {
        Err(Error::Validation {
            layer,
            field,
            message: "must be at least 1".into(),
        })
    } else {
        Ok(())
    }
}

/// Validate a layer list and assemble a model.
pub fn build_model(
    name: impl Into<String>,
    weights_bits: u32,
    activations_bits: u32,
    layers: Vec<LayerSpec>,
) -> Result<CnnModel> {
    for (pos, layer) in layers.iter().enumerate() {
        let id = layer.index;
        if id != pos + 1 {
            return Err(Error::Validation {
                layer: id,
                field: "id",
                message: format!("expected contiguous id {}", pos + 1),
            });
        }
        positive(id, "kernel", layer.kernel)?;
        positive(id, "in_channels", layer.in_channels)?;
        positive(id, "out_channels", layer.out_channels)?;
        positive(id, "out_width", layer.out_width)?;
        positive(id, "out_height", layer.out_height)?;
        if let Some(s) = layer.stride {
            positive(id, "stride", s)?;
        }
        check_bits(id, "weight_bits", layer.weight_bits)?;
        check_bits(id, "act_bits", layer.act_bits)?;

        if layer.kind == LayerKind::Fc
            && (layer.kernel != 1 || layer.out_width != 1 || layer.out_height != 1)
        {
            return Err(Error::Validation {
                layer: id,
                field: "kernel",
                message: "fc layers require kernel = out_width = out_height = 1".into(),
            });
        }
        if !layer.is_weight_bearing() && !layer.fused.is_empty() {
            return Err(Error::Validation {
                layer: id,
                field: "fused",
                message: "only conv/fc layers carry fused operations".into(),
            });
        }
        for op in &layer.fused {
            if op.pool_size() == Some(0) {
                return Err(Error::Validation {
                    layer: id,
                    field: "fused",
                    message: "pool size must be at least 1".into(),
                });
            }
        }
        if layer.fused.iter().filter(|op| op.pool_size().is_some()).count() > 1 {
            return Err(Error::Validation {
                layer: id,
                field: "fused",
                message: "at most one fused pooling stage".into(),
            });
        }

        let mut seen = Vec::with_capacity(layer.predecessors.len());
        for &p in &layer.predecessors {
            if p == 0 || p >= id {
                return Err(Error::Graph(format!(
                    "layer {id} lists predecessor {p}, which is not an earlier layer"
                )));
            }
            if seen.contains(&p) {
                return Err(Error::Validation {
                    layer: id,
                    field: "predecessors",
                    message: format!("duplicate predecessor {p}"),
                });
            }
            seen.push(p);
        }
        if layer.kind == LayerKind::ResidualAdd && layer.predecessors.len() < 2 {
            return Err(Error::Validation {
                layer: id,
                field: "predecessors",
                message: "residual_add needs at least two inputs".into(),
            });
        }
        if matches!(layer.kind, LayerKind::Pool | LayerKind::Relu | LayerKind::ResidualAdd)
            && layer.in_channels != layer.out_channels
        {
            return Err(Error::Validation {
                layer: id,
                field: "out_channels",
                message: "channel count must pass through unchanged".into(),
            });
        }
        check_channels(&layers, layer)?;
    }

    let weight_bearing: Vec<usize> = layers
        .iter()
        .filter(|l| l.is_weight_bearing())
        .map(|l| l.index)
        .collect();
    if weight_bearing.is_empty() {
        return Err(Error::Validation {
            layer: 0,
            field: "layers",
            message: "model has no conv/fc layer".into(),
        });
    }

    let hosts = compute_hosts(&layers);
    Ok(CnnModel {
        name: name.into(),
        weights_bits,
        activations_bits,
        layers,
        weight_bearing,
        hosts,
    })
}

fn check_channels(layers: &[LayerSpec], layer: &LayerSpec) -> Result<()> {
    let id = layer.index;
    for &p in &layer.predecessors {
        let pred = &layers[p - 1];
        let expected = match layer.kind {
            LayerKind::Fc => {
                let (w, h) = pred.effective_output();
                u64::from(w) * u64::from(h) * u64::from(pred.out_channels)
            }
            _ => u64::from(pred.out_channels),
        };
        // A 1x1 producer feeding an fc layer flattens to its channel count either way.
        if u64::from(layer.in_channels) != expected {
            return Err(Error::Validation {
                layer: id,
                field: "in_channels",
                message: format!(
                    "expected {expected} from predecessor {p}, found {}",
                    layer.in_channels
                ),
            });
        }
        if layer.kind == LayerKind::ResidualAdd {
            let first = &layers[layer.predecessors[0] - 1];
            if pred.effective_output() != first.effective_output() {
                return Err(Error::Validation {
                    layer: id,
                    field: "predecessors",
                    message: "residual inputs differ in spatial size".into(),
                });
            }
        }
    }
    Ok(())
}

fn compute_hosts(layers: &[LayerSpec]) -> Vec<usize> {
    let n = layers.len();
    let mut hosts = vec![0usize; n];
    // Downstream pass: first weight-bearing consumer, following pseudo-layers.
    let mut downstream: Vec<Option<usize>> = vec![None; n];
    for pos in (0..n).rev() {
        let id = pos + 1;
        if layers[pos].is_weight_bearing() {
            downstream[pos] = Some(id);
            continue;
        }
        downstream[pos] = layers
            .iter()
            .filter(|l| l.predecessors.contains(&id))
            .filter_map(|l| downstream[l.index - 1])
            .min();
    }
    // Upstream fallback: nearest weight-bearing ancestor.
    let mut upstream: Vec<Option<usize>> = vec![None; n];
    for pos in 0..n {
        if layers[pos].is_weight_bearing() {
            upstream[pos] = Some(pos + 1);
        } else {
            upstream[pos] = layers[pos]
                .predecessors
                .iter()
                .filter_map(|&p| upstream[p - 1])
                .max();
        }
    }
    let first_wb = layers
        .iter()
        .find(|l| l.is_weight_bearing())
        .map(|l| l.index)
        .unwrap_or(1);
    for pos in 0..n {
        hosts[pos] = downstream[pos].or(upstream[pos]).unwrap_or(first_wb);
    }
    hosts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(id: usize, k: u32, ci: u32, co: u32, w: u32, preds: Vec<usize>) -> LayerSpec {
        LayerSpec {
            index: id,
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

    #[test]
    fn macs_examples() {
        let l = conv(1, 3, 64, 128, 32, vec![]);
        assert_eq!(macs_per_layer(&l).unwrap(), 75_497_472);
        let one = conv(1, 1, 1, 1, 1, vec![]);
        assert_eq!(macs_per_layer(&one).unwrap(), 1);
        let mut fc = conv(1, 1, 4096, 1000, 1, vec![]);
        fc.kind = LayerKind::Fc;
        assert_eq!(macs_per_layer(&fc).unwrap(), 4_096_000);
    }

    #[test]
    fn macs_rejects_pseudo_layers() {
        let mut pool = conv(2, 2, 8, 8, 4, vec![1]);
        pool.kind = LayerKind::Pool;
        assert!(matches!(
            macs_per_layer(&pool),
            Err(Error::UnsupportedLayer { layer: 2, .. })
        ));
    }

    #[test]
    fn forward_reference_is_graph_error() {
        let layers = vec![
            conv(1, 3, 3, 8, 8, vec![]),
            conv(2, 3, 8, 8, 8, vec![1]),
            conv(3, 3, 8, 8, 8, vec![4]),
            conv(4, 3, 8, 8, 8, vec![2]),
        ];
        let err = build_model("bad", 16, 16, layers).unwrap_err();
        assert!(matches!(err, Error::Graph(_)), "{err}");
    }

    #[test]
    fn self_reference_is_graph_error() {
        let layers = vec![conv(1, 3, 3, 8, 8, vec![1])];
        assert!(matches!(
            build_model("bad", 16, 16, layers),
            Err(Error::Graph(_))
        ));
    }

    #[test]
    fn zero_shape_reports_layer_and_field() {
        let layers = vec![conv(1, 3, 3, 8, 8, vec![]), conv(2, 3, 8, 0, 8, vec![1])];
        match build_model("bad", 16, 16, layers) {
            Err(Error::Validation { layer, field, .. }) => {
                assert_eq!((layer, field), (2, "out_channels"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fc_shape_invariant() {
        let mut fc = conv(1, 3, 16, 10, 1, vec![]);
        fc.kind = LayerKind::Fc;
        assert!(matches!(
            build_model("bad", 16, 16, vec![fc]),
            Err(Error::Validation { field: "kernel", .. })
        ));
    }

    #[test]
    fn same_padding_window_is_inferred() {
        let m = build_model(
            "m",
            16,
            16,
            vec![conv(1, 3, 3, 8, 8, vec![]), conv(2, 3, 8, 8, 8, vec![1])],
        )
        .unwrap();
        let w = m.window(2);
        assert_eq!((w.stride_x, w.pad_x, w.kernel), (1, 1, 3));
        assert_eq!(w.rows(0, 8), (0, 1));
        assert_eq!(w.rows(7, 8), (6, 7));
    }

    #[test]
    fn strided_valid_window_is_inferred() {
        // 224 -> 55 with an 11x11 kernel is stride 4, padding 2.
        let mut first = conv(1, 3, 3, 3, 224, vec![]);
        first.kind = LayerKind::Conv;
        let second = conv(2, 11, 3, 96, 55, vec![1]);
        let m = build_model("m", 16, 16, vec![first, second]).unwrap();
        let w = m.window(2);
        assert_eq!((w.stride_x, w.pad_x), (4, 2));
    }

    #[test]
    fn pseudo_layers_are_hosted_by_consumer() {
        let mut pool = conv(2, 2, 8, 8, 4, vec![1]);
        pool.kind = LayerKind::Pool;
        let layers = vec![conv(1, 3, 3, 8, 8, vec![]), pool, conv(3, 3, 8, 8, 4, vec![2])];
        let m = build_model("m", 16, 16, layers).unwrap();
        assert_eq!(m.host_of(2), 3);
        assert_eq!(m.weight_bearing_ids(), &[1, 3]);
    }

    #[test]
    fn trailing_pseudo_layer_falls_back_to_ancestor() {
        let mut pool = conv(2, 2, 8, 8, 4, vec![1]);
        pool.kind = LayerKind::Pool;
        let m = build_model("m", 16, 16, vec![conv(1, 3, 3, 8, 8, vec![]), pool]).unwrap();
        assert_eq!(m.host_of(2), 1);
    }

    #[test]
    fn unknown_version_rejected() {
        let text = r#"{"version": 9, "name": "x", "quantization": {"weights_bits": 16, "activations_bits": 16}, "layers": []}"#;
        assert!(matches!(CnnModel::from_json_str(text), Err(Error::Parse { .. })));
    }
}
