//! Stage 4: peripheral component allocation.
//!
//! Each macro group gets ADCs and ALU units in proportion to its per-step
//! workload so every (group, class) pair finishes its share of a pipeline
//! step at the same time, subject to the peripheral power budget.

use serde::{Deserialize, Serialize};

use crate::dataflow::{AluOp, DataflowDag, Ir};
use crate::error::{Error, Result};
use crate::hw::HardwareParams;
use crate::model::CnnModel;
use crate::partition::MacroPlan;
use crate::wtdup::row_groups;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentClass {
    Adc,
    ShiftAdd,
    Pooling,
    Relu,
    VectorAdd,
}

pub const CLASSES: [ComponentClass; 5] = [
    ComponentClass::Adc,
    ComponentClass::ShiftAdd,
    ComponentClass::Pooling,
    ComponentClass::Relu,
    ComponentClass::VectorAdd,
];

impl ComponentClass {
    pub fn of(ir: &Ir) -> Option<Self> {
        match ir {
            Ir::Adc { .. } => Some(ComponentClass::Adc),
            Ir::Alu { aluop, .. } => Some(match aluop {
                AluOp::ShiftAdd => ComponentClass::ShiftAdd,
                AluOp::MaxPool | AluOp::AvgPool => ComponentClass::Pooling,
                AluOp::Relu => ComponentClass::Relu,
                AluOp::VectorAdd => ComponentClass::VectorAdd,
            }),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentClass::Adc => "adc",
            ComponentClass::ShiftAdd => "shift_add",
            ComponentClass::Pooling => "pooling",
            ComponentClass::Relu => "relu",
            ComponentClass::VectorAdd => "vector_add",
        }
    }
}

/// Power per unit and service rate per unit of one component class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub power: f64,
    pub frequency: f64,
}

/// Parameters of all classes, in [`CLASSES`] order.
pub fn class_params(hw: &HardwareParams, adc_resolution: u32) -> Result<Vec<ClassParams>> {
    let adc = hw.adc(adc_resolution)?;
    let unit = |u: &crate::hw::UnitParams| ClassParams {
        power: u.power,
        frequency: u.frequency,
    };
    Ok(vec![
        ClassParams {
            power: adc.power,
            frequency: adc.frequency,
        },
        unit(&hw.alu.shift_add),
        unit(&hw.alu.pooling),
        unit(&hw.alu.relu),
        unit(&hw.alu.vector_add),
    ])
}

/// Per-step workload of every macro group (rows) and class (columns).
pub fn workload_matrix(dag: &DataflowDag, plan: &MacroPlan) -> Vec<Vec<f64>> {
    let mut wl = vec![vec![0.0; CLASSES.len()]; plan.groups.len()];
    for node in dag.nodes() {
        if let Some(class) = ComponentClass::of(node) {
            let layer = node.layer();
            let steps = f64::from(dag.layer_nodes(layer).steps);
            let work = node.vec_width().unwrap_or(0) as f64;
            wl[plan.group_of(layer)][class.index()] += work / steps;
        }
    }
    wl
}

/// DACs driving the crossbar rows: one per row of every row group of every
/// copy; column groups and weight slices of a row group share inputs.
pub fn dac_count(model: &CnnModel, factors: &[u64], xb_size: u32) -> u64 {
    model
        .weight_bearing_layers()
        .zip(factors)
        .map(|(l, &d)| d * row_groups(l, xb_size) * u64::from(xb_size))
        .sum()
}

/// Power left for ADCs and ALUs once crossbars, DACs and per-macro
/// scratchpad/NoC/register overhead are paid for.
pub fn peripheral_budget(
    hw: &HardwareParams,
    total_power: f64,
    ratio_rram: f64,
    dacs: u64,
    res_dac: u32,
    macros: usize,
) -> Result<f64> {
    let fixed = dacs as f64 * hw.dac(res_dac)?.power + macros as f64 * hw.macro_overhead_power();
    let budget = (1.0 - ratio_rram) * total_power - fixed;
    if budget <= 0.0 {
        return Err(Error::InfeasiblePeripheralPower {
            budget: (1.0 - ratio_rram) * total_power,
            required: fixed,
        });
    }
    Ok(budget)
}

/// Real-valued allocation that equalizes every positive-workload delay
/// `Wl / (Freq * alloc)` and spends the budget exactly.
pub fn continuous_alloc(wl: &[Vec<f64>], params: &[ClassParams], budget: f64) -> Result<Vec<Vec<f64>>> {
    let denom: f64 = wl
        .iter()
        .flat_map(|row| row.iter().zip(params).map(|(&w, p)| p.power * w / p.frequency))
        .sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateWorkload);
    }
    Ok(wl
        .iter()
        .map(|row| {
            row.iter()
                .zip(params)
                .map(|(&w, p)| budget * (w / p.frequency) / denom)
                .collect()
        })
        .collect())
}

fn delay(w: f64, p: &ClassParams, units: u32) -> f64 {
    w / (p.frequency * f64::from(units))
}

fn spent(counts: &[Vec<u32>], params: &[ClassParams]) -> f64 {
    counts
        .iter()
        .flat_map(|row| row.iter().zip(params).map(|(&n, p)| f64::from(n) * p.power))
        .sum()
}

/// Round a continuous allocation to unit counts within `budget`: floor,
/// lift used entries to one, then repeatedly add a unit to the slowest entry
/// while it still fits.
pub fn integer_round(
    continuous: &[Vec<f64>],
    wl: &[Vec<f64>],
    params: &[ClassParams],
    budget: f64,
) -> Result<Vec<Vec<u32>>> {
    let mut counts: Vec<Vec<u32>> = continuous
        .iter()
        .zip(wl)
        .map(|(row, wrow)| {
            row.iter()
                .zip(wrow)
                .map(|(&x, &w)| if w > 0.0 { (x.floor().min(f64::from(u32::MAX)) as u32).max(1) } else { 0 })
                .collect()
        })
        .collect();
    let minimum: f64 = wl
        .iter()
        .flat_map(|row| row.iter().zip(params).filter(|(&w, _)| w > 0.0).map(|(_, p)| p.power))
        .sum();
    // products of decimal powers rarely sum exactly
    let limit = budget * (1.0 + 1e-12);
    if minimum > limit {
        return Err(Error::InfeasiblePeripheralPower { budget, required: minimum });
    }

    let mut total = spent(&counts, params);
    while total > limit {
        // take back the unit whose removal hurts least
        let mut pick: Option<(f64, usize, usize)> = None;
        for (g, row) in counts.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                if n > 1 {
                    let d = delay(wl[g][c], &params[c], n - 1);
                    if pick.is_none_or(|(best, _, _)| d < best) {
                        pick = Some((d, g, c));
                    }
                }
            }
        }
        let (_, g, c) = pick.expect("all-ones fits the budget");
        counts[g][c] -= 1;
        total = spent(&counts, params);
    }

    loop {
        let mut slowest: Option<(f64, usize, usize)> = None;
        for (g, row) in counts.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                if n > 0 {
                    let d = delay(wl[g][c], &params[c], n);
                    if slowest.is_none_or(|(best, _, _)| d > best) {
                        slowest = Some((d, g, c));
                    }
                }
            }
        }
        let Some((_, g, c)) = slowest else { break };
        if total + params[c].power > limit {
            break;
        }
        counts[g][c] += 1;
        total = spent(&counts, params);
    }
    Ok(counts)
}

/// Slowest per-step delay over all used entries plus the analog MVM time.
pub fn pipeline_period(counts: &[Vec<u32>], wl: &[Vec<f64>], params: &[ClassParams], mvm_latency: f64) -> f64 {
    let mut worst = 0.0f64;
    for (g, row) in counts.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            if wl[g][c] > 0.0 && n > 0 {
                worst = worst.max(delay(wl[g][c], &params[c], n));
            }
        }
    }
    worst + mvm_latency
}

/// Unit counts per macro group and class, with the continuous solution kept
/// for the audit dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompAllocMatrix {
    pub counts: Vec<Vec<u32>>,
    pub continuous: Vec<Vec<f64>>,
    pub workload: Vec<Vec<f64>>,
    pub budget: f64,
    pub identical_macros: bool,
}

impl CompAllocMatrix {
    pub fn power(&self, params: &[ClassParams]) -> f64 {
        spent(&self.counts, params)
    }
}

/// Allocate per group; in identical mode every macro carries the same
/// per-class counts, sized by the most demanding group.
pub fn allocate(
    wl: Vec<Vec<f64>>,
    params: &[ClassParams],
    budget: f64,
    macros_per_group: &[u32],
    identical: bool,
) -> Result<CompAllocMatrix> {
    let continuous = continuous_alloc(&wl, params, budget)?;
    let counts = if identical {
        identical_round(&continuous, &wl, params, budget, macros_per_group)?
    } else {
        integer_round(&continuous, &wl, params, budget)?
    };
    Ok(CompAllocMatrix {
        counts,
        continuous,
        workload: wl,
        budget,
        identical_macros: identical,
    })
}

fn identical_round(
    continuous: &[Vec<f64>],
    wl: &[Vec<f64>],
    params: &[ClassParams],
    budget: f64,
    macros_per_group: &[u32],
) -> Result<Vec<Vec<u32>>> {
    let total_macros: f64 = macros_per_group.iter().map(|&m| f64::from(m)).sum();
    let per_macro: Vec<f64> = (0..params.len())
        .map(|c| {
            continuous
                .iter()
                .zip(macros_per_group)
                .map(|(row, &m)| row[c] / f64::from(m))
                .fold(0.0, f64::max)
        })
        .collect();
    let used: Vec<bool> = (0..params.len()).map(|c| wl.iter().any(|row| row[c] > 0.0)).collect();
    let cost: f64 = per_macro.iter().zip(params).map(|(&x, p)| x * p.power).sum::<f64>() * total_macros;
    let scale = budget / cost;
    let mut units: Vec<u32> = per_macro
        .iter()
        .zip(&used)
        .map(|(&x, &u)| if u { ((x * scale).floor() as u32).max(1) } else { 0 })
        .collect();
    let power = |units: &[u32]| -> f64 {
        units.iter().zip(params).map(|(&n, p)| f64::from(n) * p.power).sum::<f64>() * total_macros
    };
    while power(&units) > budget * (1.0 + 1e-12) {
        let Some(c) = (0..units.len())
            .filter(|&c| units[c] > 1)
            .max_by(|&a, &b| (f64::from(units[a]) * params[a].power).total_cmp(&(f64::from(units[b]) * params[b].power)))
        else {
            return Err(Error::InfeasiblePeripheralPower {
                budget,
                required: power(&units),
            });
        };
        units[c] -= 1;
    }
    Ok(macros_per_group
        .iter()
        .map(|&m| units.iter().map(|&u| u * m).collect())
        .collect())
}
