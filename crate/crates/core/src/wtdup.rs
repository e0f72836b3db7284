//! Stage 1: crossbar sizing and weight-duplication selection.
//!
//! A layer's weights occupy one *crossbar set*; duplicating the set lets the
//! layer compute several output positions per step. The crossbar budget comes
//! from the share of total power reserved for ReRAM, and a simulated-annealing
//! filter picks the duplication vectors that best balance per-layer step
//! counts and data-access volume.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hw::HardwareParams;
use crate::model::{CnnModel, LayerSpec};

pub(crate) fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Crossbars stacked along the input dimension, `ceil(W_K^2 C_I / XbSize)`.
pub fn row_groups(layer: &LayerSpec, xb_size: u32) -> u64 {
    ceil_div(layer.weight_rows(), u64::from(xb_size))
}

/// Crossbars side by side along the output channels, `ceil(C_O / XbSize)`.
pub fn col_groups(layer: &LayerSpec, xb_size: u32) -> u64 {
    ceil_div(u64::from(layer.out_channels), u64::from(xb_size))
}

/// Cells needed per weight, `ceil(PrecWt / ResRram)`.
pub fn weight_slices(layer: &LayerSpec, res_rram: u32) -> u64 {
    ceil_div(u64::from(layer.weight_bits), u64::from(res_rram))
}

/// Crossbars holding one full copy of a layer's weights.
pub fn crossbar_set(layer: &LayerSpec, xb_size: u32, res_rram: u32) -> u64 {
    row_groups(layer, xb_size) * col_groups(layer, xb_size) * weight_slices(layer, res_rram)
}

/// Pipeline steps a layer needs with `wtdup` copies: `ceil(W_O H_O / WtDup)`.
pub fn steps_for_layer(output_positions: u64, wtdup: u64) -> u64 {
    ceil_div(output_positions, wtdup.max(1))
}

/// `floor(total_power * ratio / crossbar_power)`.
pub fn crossbar_count(total_power: f64, ratio_rram: f64, crossbar_power: f64) -> u64 {
    let raw = total_power * ratio_rram / crossbar_power;
    // absorb representation error right below an integer
    (raw * (1.0 + 1e-12)).floor() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarBudget {
    pub total_power: f64,
    pub ratio_rram: f64,
    pub xb_size: u32,
    pub res_rram: u32,
    /// Crossbars affordable under the ReRAM power share.
    pub count: u64,
    /// Crossbar-set size of each weight-bearing layer.
    pub sets: Vec<u64>,
}

impl CrossbarBudget {
    /// Crossbars needed for one copy of every layer.
    pub fn minimum(&self) -> u64 {
        self.sets.iter().sum()
    }
}

/// Size the crossbar budget for one (RatioRram, XbSize, ResRram) choice.
pub fn crossbar_budget(
    model: &CnnModel,
    hw: &HardwareParams,
    total_power: f64,
    ratio_rram: f64,
    xb_size: u32,
    res_rram: u32,
) -> Result<CrossbarBudget> {
    let power = hw.crossbar_power(xb_size, res_rram)?;
    let count = crossbar_count(total_power, ratio_rram, power);
    let sets: Vec<u64> = model
        .weight_bearing_layers()
        .map(|l| crossbar_set(l, xb_size, res_rram))
        .collect();
    let required: u64 = sets.iter().sum();
    if count < required {
        return Err(Error::InfeasibleBudget {
            available: count,
            required,
            shortfall: required - count,
        });
    }
    Ok(CrossbarBudget {
        total_power,
        ratio_rram,
        xb_size,
        res_rram,
        count,
        sets,
    })
}

/// One weight-duplication candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtDupVector {
    /// Duplication factor per weight-bearing layer.
    pub factors: Vec<u64>,
    pub sets: Vec<u64>,
    pub energy: f64,
}

impl WtDupVector {
    pub fn crossbars_used(&self) -> u64 {
        used(&self.factors, &self.sets)
    }

    pub fn is_feasible(&self, budget: &CrossbarBudget, model: &CnnModel) -> bool {
        self.factors.len() == model.num_weight_bearing()
            && self.crossbars_used() <= budget.count
            && self
                .factors
                .iter()
                .zip(model.weight_bearing_layers())
                .all(|(&d, l)| d >= 1 && d <= l.output_positions())
    }
}

fn used(factors: &[u64], sets: &[u64]) -> u64 {
    factors.iter().zip(sets).map(|(d, s)| d * s).sum()
}

pub fn access_volume(layer: &LayerSpec, wtdup: u64) -> f64 {
    (wtdup * (layer.weight_rows() + u64::from(layer.out_channels))) as f64
}

pub fn population_stdev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Annealing energy: spread of per-layer step workload plus `alpha` times the
/// spread of per-layer access volume. Lower is better.
pub fn energy_sa(factors: &[u64], model: &CnnModel, alpha: f64) -> f64 {
    let mut work = Vec::with_capacity(factors.len());
    let mut access = Vec::with_capacity(factors.len());
    for (layer, &d) in model.weight_bearing_layers().zip(factors) {
        work.push(layer.output_positions() as f64 / d as f64);
        access.push(access_volume(layer, d));
    }
    population_stdev(&work) + alpha * population_stdev(&access)
}

/// `1 / mean(AccessVolume)` at unit duplication, which puts both spread
/// terms on comparable scales.
pub fn default_alpha(model: &CnnModel) -> f64 {
    let n = model.num_weight_bearing() as f64;
    let mean = model.weight_bearing_layers().map(|l| access_volume(l, 1)).sum::<f64>() / n;
    1.0 / mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub iters: usize,
    /// Geometric cooling factor applied every iteration.
    pub cooling: f64,
    /// Starting temperature; derived from random candidates when absent.
    pub initial_temperature: Option<f64>,
    pub seed: u64,
    pub top_k: usize,
    /// Probability of a power-of-two jump instead of a unit step.
    pub jump_probability: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            iters: 5000,
            cooling: 0.995,
            initial_temperature: None,
            seed: 0,
            top_k: 30,
            jump_probability: 0.2,
        }
    }
}

struct Archive {
    capacity: usize,
    entries: Vec<(f64, Vec<u64>)>,
    members: HashSet<Vec<u64>>,
}

impl Archive {
    fn new(capacity: usize) -> Self {
        Archive {
            capacity,
            entries: Vec::with_capacity(capacity + 1),
            members: HashSet::new(),
        }
    }

    fn offer(&mut self, energy: f64, factors: &[u64]) {
        if self.members.contains(factors) {
            return;
        }
        let key = (energy, factors);
        if self.entries.len() == self.capacity {
            let worst = self.entries.last().expect("non-empty at capacity");
            if cmp_entry(key, (worst.0, &worst.1)).is_ge() {
                return;
            }
        }
        let pos = self
            .entries
            .partition_point(|e| cmp_entry((e.0, &e.1), key).is_lt());
        self.entries.insert(pos, (energy, factors.to_vec()));
        self.members.insert(factors.to_vec());
        if self.entries.len() > self.capacity {
            let (_, evicted) = self.entries.pop().expect("over capacity");
            self.members.remove(&evicted);
        }
    }
}

fn cmp_entry(a: (f64, &[u64]), b: (f64, &[u64])) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

struct Annealer<'a> {
    model: &'a CnnModel,
    sets: &'a [u64],
    caps: Vec<u64>,
    count: u64,
    alpha: f64,
}

impl Annealer<'_> {
    fn energy(&self, factors: &[u64]) -> f64 {
        energy_sa(factors, self.model, self.alpha)
    }

    fn repair(&self, factors: &mut [u64]) {
        let mut total = used(factors, self.sets);
        while total > self.count {
            let (j, _) = factors
                .iter()
                .zip(self.sets)
                .enumerate()
                .filter(|(_, (d, _))| **d > 1)
                .map(|(j, (d, s))| (j, d * s))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("all-ones vector always fits a feasible budget");
            factors[j] -= 1;
            total -= self.sets[j];
        }
    }

    fn neighbour(&self, current: &[u64], jump_probability: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let mut next = current.to_vec();
        let i = rng.gen_range(0..next.len());
        let cap = self.caps[i];
        let step = if cap > 2 && rng.gen_bool(jump_probability) {
            let max_exp = 63 - cap.leading_zeros();
            1u64 << rng.gen_range(1..=max_exp.max(1))
        } else {
            1
        };
        next[i] = if rng.gen_bool(0.5) {
            next[i].saturating_add(step).min(cap)
        } else {
            next[i].saturating_sub(step).max(1)
        };
        self.repair(&mut next);
        next
    }

    fn random_feasible(&self, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let mut factors = vec![1u64; self.sets.len()];
        let mut remaining = self.count - used(&factors, self.sets);
        let mut order: Vec<usize> = (0..factors.len()).collect();
        order.shuffle(rng);
        for i in order {
            let room = (remaining / self.sets[i]).min(self.caps[i] - 1);
            let extra = rng.gen_range(0..=room);
            factors[i] += extra;
            remaining -= extra * self.sets[i];
        }
        factors
    }
}

/// Select the lowest-energy distinct duplication vectors seen along an
/// annealing trajectory that starts from the all-ones vector.
///
/// Returns at most `cfg.top_k` vectors sorted by ascending energy, none
/// worse than the all-ones baseline. Deterministic for a fixed seed.
pub fn sa_filter(model: &CnnModel, budget: &CrossbarBudget, alpha: f64, cfg: &SaConfig) -> Vec<WtDupVector> {
    let caps: Vec<u64> = model
        .weight_bearing_layers()
        .zip(&budget.sets)
        .map(|(l, &s)| {
            let by_budget = 1 + (budget.count - budget.minimum()) / s;
            l.output_positions().min(by_budget).max(1)
        })
        .collect();
    let annealer = Annealer {
        model,
        sets: &budget.sets,
        caps,
        count: budget.count,
        alpha,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut archive = Archive::new(cfg.top_k.max(1));

    let mut current = vec![1u64; budget.sets.len()];
    let baseline = annealer.energy(&current);
    let mut current_energy = baseline;
    archive.offer(current_energy, &current);

    let samples: Vec<f64> = (0..100)
        .map(|_| {
            let candidate = annealer.random_feasible(&mut rng);
            let e = annealer.energy(&candidate);
            archive.offer(e, &candidate);
            e
        })
        .collect();
    let mut temperature = cfg
        .initial_temperature
        .unwrap_or_else(|| population_stdev(&samples))
        .max(f64::MIN_POSITIVE);

    for _ in 0..cfg.iters {
        let next = annealer.neighbour(&current, cfg.jump_probability, &mut rng);
        let e = annealer.energy(&next);
        let delta = e - current_energy;
        if delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp() {
            current = next;
            current_energy = e;
            archive.offer(e, &current);
        }
        temperature *= cfg.cooling;
    }

    archive
        .entries
        .into_iter()
        .filter(|(e, _)| *e <= baseline)
        .map(|(energy, factors)| WtDupVector {
            factors,
            sets: budget.sets.clone(),
            energy,
        })
        .collect()
}

/// Every layer at a single copy.
pub fn all_ones(model: &CnnModel, budget: &CrossbarBudget, alpha: f64) -> WtDupVector {
    let factors = vec![1; budget.sets.len()];
    WtDupVector {
        energy: energy_sa(&factors, model, alpha),
        factors,
        sets: budget.sets.clone(),
    }
}

/// Duplication proportional to each layer's output positions, scaled to the
/// crossbar budget and floored.
pub fn proportional(model: &CnnModel, budget: &CrossbarBudget, alpha: f64) -> WtDupVector {
    let weighted: f64 = model
        .weight_bearing_layers()
        .zip(&budget.sets)
        .map(|(l, &s)| (l.output_positions() * s) as f64)
        .sum();
    let scale = budget.count as f64 / weighted;
    let mut factors: Vec<u64> = model
        .weight_bearing_layers()
        .map(|l| {
            let n = l.output_positions();
            ((scale * n as f64).floor() as u64).clamp(1, n)
        })
        .collect();
    let caps: Vec<u64> = model.weight_bearing_layers().map(|l| l.output_positions()).collect();
    Annealer {
        model,
        sets: &budget.sets,
        caps,
        count: budget.count,
        alpha,
    }
    .repair(&mut factors);
    WtDupVector {
        energy: energy_sa(&factors, model, alpha),
        factors,
        sets: budget.sets.clone(),
    }
}

#[derive(Serialize)]
struct CandidateRow {
    rank: usize,
    energy: f64,
    crossbars: u64,
    factors: String,
}

/// Dump a candidate list for inspection.
pub fn write_candidates_csv(path: impl AsRef<Path>, candidates: &[WtDupVector]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (rank, c) in candidates.iter().enumerate() {
        w.serialize(CandidateRow {
            rank,
            energy: c.energy,
            crossbars: c.crossbars_used(),
            factors: c.factors.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, LayerKind};

    fn layer(id: usize, k: u32, ci: u32, co: u32, w: u32, bits: u32) -> LayerSpec {
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
            weight_bits: bits,
            act_bits: 16,
            predecessors: if id > 1 { vec![id - 1] } else { vec![] },
            fused: vec![],
        }
    }

    #[test]
    fn crossbar_set_examples() {
        assert_eq!(crossbar_set(&layer(1, 3, 64, 128, 8, 16), 128, 2), 40);
        assert_eq!(crossbar_set(&layer(1, 1, 1, 1, 8, 2), 128, 2), 1);
        assert_eq!(crossbar_set(&layer(1, 3, 512, 512, 8, 16), 256, 4), 144);
    }

    #[test]
    fn crossbar_count_examples() {
        assert_eq!(crossbar_count(10.0, 0.2, 0.3e-3), 6666);
        assert_eq!(crossbar_count(1.0, 0.1, 4.8e-3), 20);
    }

    #[test]
    fn step_count_identity() {
        assert_eq!(steps_for_layer(1024, 8), 128);
        assert_eq!(steps_for_layer(1024, 1000), 2);
        assert_eq!(steps_for_layer(1, 1), 1);
        assert_eq!(steps_for_layer(10, 3), 4);
    }

    #[test]
    fn budget_shortfall_is_reported() {
        let m = build_model("m", 16, 16, vec![layer(1, 3, 64, 128, 8, 16)]).unwrap();
        let hw = HardwareParams::default();
        // 5*1*16 = 80 crossbars needed; 0.01 W * 0.1 / 0.3 mW = 3
        match crossbar_budget(&m, &hw, 0.01, 0.1, 128, 1) {
            Err(Error::InfeasibleBudget { available, required, shortfall }) => {
                assert_eq!(required, 80);
                assert_eq!(available, 3);
                assert_eq!(shortfall, required - available);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn energy_examples() {
        let single = build_model("m", 16, 16, vec![layer(1, 3, 8, 8, 8, 16)]).unwrap();
        assert_eq!(energy_sa(&[5], &single, 1.0), 0.0);

        // W_O H_O = 1024 and 256, W_K^2 C_I + C_O = 100 for both.
        let two = build_model(
            "m",
            16,
            16,
            vec![layer(1, 3, 10, 10, 32, 16), layer(2, 3, 10, 10, 16, 16)],
        )
        .unwrap();
        assert_eq!(energy_sa(&[4, 1], &two, 0.0), 0.0);
        // with alpha the access spread stdev{400, 100} = 150 shows up
        assert!((energy_sa(&[4, 1], &two, 1.0) - 150.0).abs() < 1e-9);
    }

    #[test]
    fn exact_budget_yields_only_all_ones() {
        let m = build_model(
            "m",
            16,
            16,
            vec![layer(1, 3, 16, 16, 8, 16), layer(2, 3, 16, 32, 4, 16)],
        )
        .unwrap();
        let sets: Vec<u64> = m.weight_bearing_layers().map(|l| crossbar_set(l, 128, 2)).collect();
        let budget = CrossbarBudget {
            total_power: 1.0,
            ratio_rram: 0.1,
            xb_size: 128,
            res_rram: 2,
            count: sets.iter().sum(),
            sets,
        };
        let out = sa_filter(&m, &budget, default_alpha(&m), &SaConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].factors, vec![1, 1]);
    }

    #[test]
    fn proportional_respects_budget() {
        let m = build_model(
            "m",
            16,
            16,
            vec![layer(1, 3, 16, 16, 16, 16), layer(2, 3, 16, 32, 4, 16)],
        )
        .unwrap();
        let hw = HardwareParams::default();
        let budget = crossbar_budget(&m, &hw, 1.0, 0.2, 128, 2).unwrap();
        let p = proportional(&m, &budget, 0.0);
        assert!(p.is_feasible(&budget, &m));
        // 16x16 map gets 16x the share of the 4x4 map (before flooring)
        assert!(p.factors[0] > p.factors[1]);
    }
}
