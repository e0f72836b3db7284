use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gene::{GeneSpace, MacAllocGene};
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EaConfig {
    pub pop_size: usize,
    /// Generations with count mutations only.
    pub max_iters: usize,
    /// Further generations that also mutate sharing relations. Only run
    /// when sharing is allowed.
    pub share_iters: usize,
    pub tournament_k: usize,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig {
            pop_size: 32,
            max_iters: 40,
            share_iters: 20,
            tournament_k: 3,
            elitism: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EaOutcome<T> {
    pub best: MacAllocGene,
    pub best_fitness: f64,
    pub best_payload: T,
    /// Best fitness after each generation, starting with the initial population.
    pub trace: Vec<f64>,
    /// Distinct genes in evaluation order.
    pub evaluated: Vec<MacAllocGene>,
}

type Scored<T> = Option<(f64, T)>;

struct Memo<T> {
    scores: HashMap<MacAllocGene, Scored<T>>,
    order: Vec<MacAllocGene>,
}

impl<T: Clone + Send> Memo<T> {
    fn score<F>(&mut self, genes: &[MacAllocGene], fitness: &F) -> Vec<f64>
    where
        F: Fn(&MacAllocGene) -> Scored<T> + Sync,
    {
        let mut fresh: Vec<MacAllocGene> = Vec::new();
        for g in genes {
            if !self.scores.contains_key(g) && !fresh.contains(g) {
                fresh.push(g.clone());
            }
        }
        let results: Vec<Scored<T>> = fresh.par_iter().map(fitness).collect();
        for (g, r) in fresh.into_iter().zip(results) {
            self.order.push(g.clone());
            self.scores.insert(g, r);
        }
        genes.iter().map(|g| self.value(g)).collect()
    }

    fn value(&self, g: &MacAllocGene) -> f64 {
        match &self.scores[g] {
            Some((f, _)) if f.is_finite() => *f,
            _ => f64::NEG_INFINITY,
        }
    }
}

fn ranked(pop: &[MacAllocGene], fit: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then_with(|| pop[a].cmp(&pop[b])));
    idx
}

/// Mutation-only evolutionary search over macro allocations, maximizing
/// `fitness`. Genes scoring `None` count as infeasible.
///
/// The first `max_iters` generations only mutate macro counts. When the
/// space allows sharing, `share_iters` more generations continue from that
/// population and also toggle sharing relations, so a run with sharing
/// never ends below the same-seed run without it.
pub fn ea_explore<T, F>(space: &GeneSpace, cfg: &EaConfig, fitness: F) -> Result<EaOutcome<T>>
where
    T: Clone + Send,
    F: Fn(&MacAllocGene) -> Scored<T> + Sync,
{
    if space.is_empty() {
        return Err(Error::InfeasiblePartition("model has no weight-bearing layers".into()));
    }
    let pop_size = cfg.pop_size.max(1);
    let mut memo = Memo {
        scores: HashMap::new(),
        order: Vec::new(),
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x1417));
    let mut pop = vec![MacAllocGene::private(space, &vec![1; space.len()])];
    while pop.len() < pop_size {
        pop.push(space.random(&mut init_rng));
    }
    let mut fit = memo.score(&pop, &fitness);
    let mut trace = vec![fit.iter().copied().fold(f64::NEG_INFINITY, f64::max)];

    let generations = cfg.max_iters + if space.allow_sharing { cfg.share_iters } else { 0 };
    for gen in 0..generations {
        let share = gen >= cfg.max_iters;
        let order = ranked(&pop, &fit);
        let mut next: Vec<MacAllocGene> = order
            .iter()
            .take(cfg.elitism.min(pop_size))
            .map(|&i| pop[i].clone())
            .collect();
        let children: Vec<MacAllocGene> = (next.len()..pop_size)
            .map(|slot| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(cfg.seed, gen as u64 + 1), slot as u64));
                let parent = tournament(&pop, &fit, cfg.tournament_k, &mut rng);
                let mut child = space.mutate_num(parent, &mut rng);
                if share && rng.gen_bool(0.5) {
                    child = space.mutate_share(&child, &mut rng);
                }
                debug_assert!(space.validate(&child));
                child
            })
            .collect();
        next.extend(children);
        pop = next;
        fit = memo.score(&pop, &fitness);
        let best_now = fit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        trace.push(best_now.max(*trace.last().expect("non-empty")));
    }

    let mut best: Option<(f64, &MacAllocGene)> = None;
    for g in &memo.order {
        let v = memo.value(g);
        if v.is_finite() && best.is_none_or(|(b, bg)| v > b || (v == b && g < bg)) {
            best = Some((v, g));
        }
    }
    let Some((best_fitness, gene)) = best else {
        return Err(Error::InfeasiblePartition(format!(
            "none of {} evaluated macro allocations fits the power budget",
            memo.order.len()
        )));
    };
    let payload = memo.scores[gene].as_ref().expect("scored").1.clone();
    Ok(EaOutcome {
        best: gene.clone(),
        best_fitness,
        best_payload: payload,
        trace,
        evaluated: memo.order.clone(),
    })
}

fn tournament<'a>(pop: &'a [MacAllocGene], fit: &[f64], k: usize, rng: &mut impl Rng) -> &'a MacAllocGene {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..k.max(1) {
        let c = rng.gen_range(0..pop.len());
        if fit[c] > fit[best] || (fit[c] == fit[best] && c < best) {
            best = c;
        }
    }
    &pop[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(caps: &[u32], share: bool) -> GeneSpace {
        GeneSpace {
            layer_ids: (1..=caps.len()).collect(),
            caps: caps.to_vec(),
            allow_sharing: share,
        }
    }

    fn bumpy(g: &MacAllocGene) -> Option<(f64, ())> {
        let mut f = 0.0;
        for i in 0..g.codes.len() {
            let n = f64::from(g.macros(i));
            f += -(n - 5.0 - i as f64).powi(2);
            if g.owner(i) != i + 1 {
                f += 3.0;
            }
        }
        Some((f, ()))
    }

    #[test]
    fn single_layer_trivial() {
        let s = space(&[1], true);
        let out = ea_explore(&s, &EaConfig::default(), bumpy).unwrap();
        assert_eq!(out.best.codes, vec![1001]);
    }

    #[test]
    fn trace_is_monotone_and_children_valid() {
        let s = space(&[12, 12, 12], true);
        let out = ea_explore(&s, &EaConfig::default(), bumpy).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.evaluated.iter().all(|g| s.validate(g)));
        assert_eq!(out.best_fitness, *out.trace.last().unwrap());
    }

    #[test]
    fn sharing_never_loses() {
        let cfg = EaConfig { seed: 5, ..EaConfig::default() };
        let on = ea_explore(&space(&[12, 12, 12], true), &cfg, bumpy).unwrap();
        let off = ea_explore(&space(&[12, 12, 12], false), &cfg, bumpy).unwrap();
        assert!(on.best_fitness >= off.best_fitness);
    }

    #[test]
    fn all_infeasible_is_an_error() {
        let s = space(&[4, 4], true);
        let r = ea_explore(&s, &EaConfig::default(), |_: &MacAllocGene| None::<(f64, ())>);
        assert!(matches!(r, Err(Error::InfeasiblePartition(_))));
    }

    #[test]
    fn deterministic() {
        let s = space(&[20, 9, 14], true);
        let cfg = EaConfig { seed: 42, ..EaConfig::default() };
        let a = ea_explore(&s, &cfg, bumpy).unwrap();
        let b = ea_explore(&s, &cfg, bumpy).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.evaluated, b.evaluated);
    }
}
