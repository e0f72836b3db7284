use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A schedulable program: node durations, the pool each node draws units
/// from, and precedence edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SimProgram {
    /// Seconds each node runs once its units are granted.
    pub durations: Vec<f64>,
    pub resource: Vec<Option<usize>>,
    pub demand: Vec<u32>,
    pub pool_units: Vec<u32>,
    succ_offsets: Vec<u32>,
    succ: Vec<u32>,
    pred_offsets: Vec<u32>,
    pred: Vec<u32>,
}

impl SimProgram {
    pub fn new(
        durations: Vec<f64>,
        resource: Vec<Option<usize>>,
        demand: Vec<u32>,
        pool_units: Vec<u32>,
        edges: &[(u32, u32)],
    ) -> Self {
        let n = durations.len();
        assert_eq!(resource.len(), n);
        assert_eq!(demand.len(), n);
        let (succ_offsets, succ) = adjacency(n, edges.iter().map(|&(a, b)| (a, b)));
        let (pred_offsets, pred) = adjacency(n, edges.iter().map(|&(a, b)| (b, a)));
        SimProgram {
            durations,
            resource,
            demand,
            pool_units,
            succ_offsets,
            succ,
            pred_offsets,
            pred,
        }
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[u32] {
        &self.succ[self.succ_offsets[v] as usize..self.succ_offsets[v + 1] as usize]
    }

    pub fn predecessors(&self, v: usize) -> &[u32] {
        &self.pred[self.pred_offsets[v] as usize..self.pred_offsets[v + 1] as usize]
    }
}

fn adjacency(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; n + 1];
    for (a, _) in pairs.clone() {
        offsets[a as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut out = vec![0u32; offsets[n] as usize];
    for (a, b) in pairs {
        out[fill[a as usize] as usize] = b;
        fill[a as usize] += 1;
    }
    (offsets, out)
}

/// Start and finish time of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
}

impl Trace {
    pub fn makespan(&self) -> f64 {
        self.finish.iter().copied().fold(0.0, f64::max)
    }
}

type Key = (OrderedFloat<f64>, u32);

/// List-scheduling discrete-event simulation.
///
/// A node becomes ready when its last predecessor finishes. Nodes without a
/// pool start at once; pooled nodes wait in their pool's queue, ordered by
/// ready time then node id, and only the queue head may start, once the pool
/// has `demand` free units.
pub fn run(program: &SimProgram) -> Result<Trace> {
    let n = program.len();
    let mut missing: Vec<u32> = (0..n).map(|v| program.predecessors(v).len() as u32).collect();
    let mut ready_at = vec![0.0f64; n];
    let mut start = vec![f64::NAN; n];
    let mut finish = vec![f64::NAN; n];
    let mut free = program.pool_units.clone();
    let mut queues: Vec<BTreeSet<Key>> = vec![BTreeSet::new(); program.pool_units.len()];
    let mut events: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    let mut dirty: BTreeSet<usize> = BTreeSet::new();
    let mut done = 0usize;

    let begin = |v: usize, now: f64, events: &mut BinaryHeap<Reverse<Key>>, start: &mut [f64], finish: &mut [f64]| {
        start[v] = now;
        finish[v] = now + program.durations[v];
        events.push(Reverse((OrderedFloat(finish[v]), v as u32)));
    };

    let arrive = |v: usize, now: f64, queues: &mut [BTreeSet<Key>], dirty: &mut BTreeSet<usize>, events: &mut BinaryHeap<Reverse<Key>>, start: &mut [f64], finish: &mut [f64]| {
        match program.resource[v] {
            None => begin(v, now, events, start, finish),
            Some(p) => {
                queues[p].insert((OrderedFloat(now), v as u32));
                dirty.insert(p);
            }
        }
    };

    for v in 0..n {
        if missing[v] == 0 {
            arrive(v, 0.0, &mut queues, &mut dirty, &mut events, &mut start, &mut finish);
        }
    }
    let mut now = 0.0;
    loop {
        for &p in &dirty {
            while let Some(&(ready, id)) = queues[p].first() {
                let need = program.demand[id as usize];
                if free[p] < need {
                    break;
                }
                queues[p].pop_first();
                free[p] -= need;
                debug_assert!(ready.0 <= now);
                begin(id as usize, now, &mut events, &mut start, &mut finish);
            }
        }
        dirty.clear();

        let Some(Reverse((t, _))) = events.peek().copied() else { break };
        now = t.0;
        while let Some(&Reverse((t2, v))) = events.peek() {
            if t2.0 != now {
                break;
            }
            events.pop();
            let v = v as usize;
            done += 1;
            if let Some(p) = program.resource[v] {
                free[p] += program.demand[v];
                dirty.insert(p);
            }
            for &s in program.successors(v) {
                let s = s as usize;
                ready_at[s] = ready_at[s].max(finish[v]);
                missing[s] -= 1;
                if missing[s] == 0 {
                    arrive(s, ready_at[s], &mut queues, &mut dirty, &mut events, &mut start, &mut finish);
                }
            }
        }
    }

    if done < n {
        let frontier: Vec<u32> = queues.iter().filter_map(|q| q.first().map(|&(_, id)| id)).collect();
        return Err(Error::Deadlock {
            unfinished: n - done,
            frontier,
        });
    }
    Ok(Trace { start, finish })
}

/// Longest duration-weighted path, i.e. the makespan with unlimited units.
pub fn critical_path(program: &SimProgram) -> f64 {
    let n = program.len();
    let mut missing: Vec<u32> = (0..n).map(|v| program.predecessors(v).len() as u32).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&v| missing[v] == 0).collect();
    let mut earliest = vec![0.0f64; n];
    let mut best = 0.0f64;
    while let Some(v) = stack.pop() {
        let end = earliest[v] + program.durations[v];
        best = best.max(end);
        for &s in program.successors(v) {
            let s = s as usize;
            earliest[s] = earliest[s].max(end);
            missing[s] -= 1;
            if missing[s] == 0 {
                stack.push(s);
            }
        }
    }
    best
}

/// Nodes that start before one of their predecessors finishes.
pub fn dependency_violations(program: &SimProgram, trace: &Trace) -> Vec<u32> {
    (0..program.len())
        .filter(|&v| program.predecessors(v).iter().any(|&p| trace.start[v] < trace.finish[p as usize]))
        .map(|v| v as u32)
        .collect()
}

/// Pools whose running demand exceeds their units at some instant.
pub fn capacity_violations(program: &SimProgram, trace: &Trace) -> Vec<usize> {
    let mut bad = Vec::new();
    for (p, &units) in program.pool_units.iter().enumerate() {
        // (time, +demand at start / -demand at finish); finishes sort first
        let mut points: Vec<(f64, i64)> = Vec::new();
        for v in 0..program.len() {
            if program.resource[v] == Some(p) && trace.finish[v] > trace.start[v] {
                let d = i64::from(program.demand[v]);
                points.push((trace.start[v], d));
                points.push((trace.finish[v], -d));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut level = 0i64;
        for (_, d) in points {
            level += d;
            if level > i64::from(units) {
                bad.push(p);
                break;
            }
        }
    }
    bad
}
