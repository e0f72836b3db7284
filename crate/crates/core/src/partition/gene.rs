use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::CnnModel;
use crate::wtdup::row_groups;

/// Largest macro count the `owner * 1000 + count` code can carry.
pub const MAX_MACROS: u32 = 999;

/// Macro allocation of every weight-bearing layer, one code per layer:
/// `owner * 1000 + macros`, where `owner` is the layer's own id for private
/// macros or the id of an earlier layer whose macros it shares.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MacAllocGene {
    pub codes: Vec<u32>,
}

impl MacAllocGene {
    pub fn encode(owner: usize, macros: u32) -> u32 {
        owner as u32 * 1000 + macros
    }

    pub fn owner(&self, i: usize) -> usize {
        (self.codes[i] / 1000) as usize
    }

    pub fn macros(&self, i: usize) -> u32 {
        self.codes[i] % 1000
    }

    /// Every layer on its own macros with the given counts.
    pub fn private(space: &GeneSpace, counts: &[u32]) -> Self {
        MacAllocGene {
            codes: space
                .layer_ids
                .iter()
                .zip(counts)
                .map(|(&id, &n)| Self::encode(id, n))
                .collect(),
        }
    }
}

impl fmt::Display for MacAllocGene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.codes.iter().map(u32::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Layer ids and per-layer macro caps a gene is checked against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneSpace {
    /// Weight-bearing layer ids, ascending.
    pub layer_ids: Vec<usize>,
    /// `WtDup * ceil(W_K^2 C_I / XbSize)`, limited to [`MAX_MACROS`].
    pub caps: Vec<u32>,
    pub allow_sharing: bool,
}

impl GeneSpace {
    pub fn new(model: &CnnModel, factors: &[u64], xb_size: u32) -> Self {
        let caps = model
            .weight_bearing_layers()
            .zip(factors)
            .map(|(l, &d)| (d * row_groups(l, xb_size)).clamp(1, u64::from(MAX_MACROS)) as u32)
            .collect();
        GeneSpace {
            layer_ids: model.weight_bearing_ids().to_vec(),
            caps,
            allow_sharing: true,
        }
    }

    pub fn len(&self) -> usize {
        self.layer_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layer_ids.is_empty()
    }

    fn ordinal(&self, id: usize) -> Option<usize> {
        self.layer_ids.binary_search(&id).ok()
    }

    /// Ordinal of the layer sharing `i`'s macros, if any.
    fn sharer_of(&self, gene: &MacAllocGene, i: usize) -> Option<usize> {
        let id = self.layer_ids[i];
        (i + 1..self.len()).find(|&k| gene.owner(k) == id)
    }

    /// The partner of `i` in a sharing pair, whichever side `i` is on.
    fn partner(&self, gene: &MacAllocGene, i: usize) -> Option<usize> {
        if gene.owner(i) != self.layer_ids[i] {
            self.ordinal(gene.owner(i))
        } else {
            self.sharer_of(gene, i)
        }
    }

    pub fn validate(&self, gene: &MacAllocGene) -> bool {
        if gene.codes.len() != self.len() {
            return false;
        }
        let mut shared_by = vec![0u32; self.len()];
        for i in 0..self.len() {
            let n = gene.macros(i);
            if n == 0 || n > self.caps[i] {
                return false;
            }
            let owner = gene.owner(i);
            if owner == self.layer_ids[i] {
                continue;
            }
            if !self.allow_sharing {
                return false;
            }
            let Some(j) = self.ordinal(owner) else {
                return false;
            };
            if j >= i || gene.owner(j) != owner || gene.macros(j) != n {
                return false;
            }
            shared_by[j] += 1;
            if shared_by[j] > 1 {
                return false;
            }
        }
        true
    }

    /// Change one layer's macro count by x2, /2, +1 or -1. Sharing partners
    /// move together. Returns the parent when no count can change.
    pub fn mutate_num(&self, gene: &MacAllocGene, rng: &mut impl Rng) -> MacAllocGene {
        let movable: Vec<(usize, u32)> = (0..self.len())
            .map(|i| {
                let cap = match self.partner(gene, i) {
                    Some(j) => self.caps[i].min(self.caps[j]),
                    None => self.caps[i],
                };
                (i, cap)
            })
            .filter(|&(_, cap)| cap > 1)
            .collect();
        if movable.is_empty() {
            return gene.clone();
        }
        let (i, cap) = movable[rng.gen_range(0..movable.len())];
        let n = gene.macros(i);
        let mut options: Vec<u32> = [n.saturating_mul(2), n / 2, n + 1, n.saturating_sub(1)]
            .into_iter()
            .map(|v| v.clamp(1, cap))
            .filter(|&v| v != n)
            .collect();
        options.dedup();
        if options.is_empty() {
            return gene.clone();
        }
        let value = options[rng.gen_range(0..options.len())];
        let mut child = gene.clone();
        for k in std::iter::once(i).chain(self.partner(gene, i)) {
            child.codes[k] = MacAllocGene::encode(child.owner(k), value);
        }
        child
    }

    /// Toggle one sharing relation: un-share a sharing layer, or let a private
    /// layer join an earlier private layer's macros. Returns the parent when
    /// no toggle exists.
    pub fn mutate_share(&self, gene: &MacAllocGene, rng: &mut impl Rng) -> MacAllocGene {
        if !self.allow_sharing {
            return gene.clone();
        }
        let mut options: Vec<(usize, usize)> = Vec::new();
        for i in 0..self.len() {
            let id = self.layer_ids[i];
            if gene.owner(i) != id {
                options.push((i, i));
                continue;
            }
            if self.sharer_of(gene, i).is_some() {
                continue;
            }
            for j in 0..i {
                let owner = self.layer_ids[j];
                if gene.owner(j) == owner
                    && self.sharer_of(gene, j).is_none()
                    && gene.macros(j) <= self.caps[i]
                {
                    options.push((i, j));
                }
            }
        }
        if options.is_empty() {
            return gene.clone();
        }
        let (i, j) = options[rng.gen_range(0..options.len())];
        let mut child = gene.clone();
        child.codes[i] = if i == j {
            MacAllocGene::encode(self.layer_ids[i], gene.macros(i))
        } else {
            MacAllocGene::encode(self.layer_ids[j], gene.macros(j))
        };
        child
    }

    /// Private gene with log-uniform random macro counts.
    pub fn random(&self, rng: &mut impl Rng) -> MacAllocGene {
        let counts: Vec<u32> = self
            .caps
            .iter()
            .map(|&cap| {
                let u: f64 = rng.gen();
                ((f64::from(cap) + 1.0).powf(u).floor() as u32).clamp(1, cap)
            })
            .collect();
        MacAllocGene::private(self, &counts)
    }

    /// Every valid gene, for exhaustive checks on tiny spaces.
    pub fn enumerate(&self) -> Vec<MacAllocGene> {
        let mut out = Vec::new();
        let mut codes = vec![0u32; self.len()];
        self.enumerate_from(0, &mut codes, &mut out);
        out
    }

    fn enumerate_from(&self, i: usize, codes: &mut Vec<u32>, out: &mut Vec<MacAllocGene>) {
        if i == self.len() {
            let g = MacAllocGene { codes: codes.clone() };
            if self.validate(&g) {
                out.push(g);
            }
            return;
        }
        for n in 1..=self.caps[i] {
            codes[i] = MacAllocGene::encode(self.layer_ids[i], n);
            self.enumerate_from(i + 1, codes, out);
        }
        if self.allow_sharing {
            for j in 0..i {
                codes[i] = MacAllocGene::encode(self.layer_ids[j], codes[j] % 1000);
                self.enumerate_from(i + 1, codes, out);
            }
        }
    }
}

/// Whether `gene` obeys the macro rules for this model and duplication.
pub fn validate_gene(gene: &MacAllocGene, factors: &[u64], model: &CnnModel, xb_size: u32) -> bool {
    factors.len() == model.num_weight_bearing() && GeneSpace::new(model, factors, xb_size).validate(gene)
}
