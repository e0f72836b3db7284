#![allow(dead_code)]

use std::path::PathBuf;

use pimsyn_core::model::{build_model, load_model, CnnModel, FusedOp, LayerKind, LayerSpec};
use pimsyn_core::sim::SimProgram;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn desk5() -> CnnModel {
    load_model(models_dir().join("desk5.json")).expect("desk5 model loads")
}

pub fn conv(id: usize, k: u32, ci: u32, co: u32, w: u32) -> LayerSpec {
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
        predecessors: if id > 1 { vec![id - 1] } else { vec![] },
        fused: vec![],
    }
}

pub fn with_fused(mut l: LayerSpec, ops: &[FusedOp]) -> LayerSpec {
    l.fused = ops.to_vec();
    l
}

pub fn fc(id: usize, ci: u32, co: u32) -> LayerSpec {
    let mut l = conv(id, 1, ci, co, 1);
    l.kind = LayerKind::Fc;
    l
}

/// Chain of same-padded convs with the given (kernel, in, out, width) shapes.
pub fn conv_chain(name: &str, shapes: &[(u32, u32, u32, u32)]) -> CnnModel {
    let layers = shapes
        .iter()
        .enumerate()
        .map(|(i, &(k, ci, co, w))| conv(i + 1, k, ci, co, w))
        .collect();
    build_model(name, 16, 16, layers).expect("valid chain")
}

/// Random DAG program: positive integer durations, up to three pools,
/// demands never above pool size, some nodes without a pool.
pub fn random_program(rng: &mut impl Rng, max_nodes: usize, max_pools: usize) -> SimProgram {
    let n = rng.gen_range(1..=max_nodes);
    let pools = rng.gen_range(1..=max_pools);
    let units: Vec<u32> = (0..pools).map(|_| rng.gen_range(1..=4)).collect();
    // random labels so node ids do not follow topological order
    let mut label: Vec<u32> = (0..n as u32).collect();
    label.shuffle(rng);
    let density = rng.gen_range(0.0..0.15);
    let mut edges = Vec::new();
    for v in 1..n {
        for u in 0..v {
            if rng.gen_bool(density) {
                edges.push((label[u], label[v]));
            }
        }
    }
    let mut durations = vec![0.0; n];
    let mut resource = vec![None; n];
    let mut demand = vec![0; n];
    for v in 0..n {
        durations[v] = f64::from(rng.gen_range(1..=9u32));
        if rng.gen_bool(0.85) {
            let p = rng.gen_range(0..pools);
            resource[v] = Some(p);
            demand[v] = rng.gen_range(1..=units[p]);
        }
    }
    SimProgram::new(durations, resource, demand, units, &edges)
}

/// Brute-force replay of list scheduling, written independently of the
/// event-queue engine: at every distinct completion instant, retire what
/// finished, collect every node whose predecessors are all done, and walk
/// each pool's waiting list in (ready time, id) order until the head does
/// not fit. Requires positive durations.
pub fn oracle_schedule(p: &SimProgram) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = p.len();
    let mut start = vec![f64::NAN; n];
    let mut finish = vec![f64::NAN; n];
    let mut started = vec![false; n];
    let mut retired = vec![false; n];
    let mut free = p.pool_units.clone();
    let mut t = 0.0f64;
    loop {
        for v in 0..n {
            if started[v] && !retired[v] && finish[v] <= t {
                retired[v] = true;
                if let Some(r) = p.resource[v] {
                    free[r] += p.demand[v];
                }
            }
        }
        let mut waiting: Vec<(f64, usize)> = Vec::new();
        for v in 0..n {
            if started[v] {
                continue;
            }
            let preds = p.predecessors(v);
            if preds.iter().all(|&u| retired[u as usize]) {
                let ready = preds.iter().map(|&u| finish[u as usize]).fold(0.0, f64::max);
                waiting.push((ready, v));
            }
        }
        waiting.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut blocked = vec![false; p.pool_units.len()];
        for &(_, v) in &waiting {
            match p.resource[v] {
                None => {
                    started[v] = true;
                    start[v] = t;
                    finish[v] = t + p.durations[v];
                }
                Some(r) => {
                    if blocked[r] {
                        continue;
                    }
                    if free[r] >= p.demand[v] {
                        free[r] -= p.demand[v];
                        started[v] = true;
                        start[v] = t;
                        finish[v] = t + p.durations[v];
                    } else {
                        blocked[r] = true;
                    }
                }
            }
        }
        let next = (0..n)
            .filter(|&v| started[v] && !retired[v])
            .map(|v| finish[v])
            .fold(f64::INFINITY, f64::min);
        if next.is_infinite() {
            break;
        }
        t = next;
    }
    retired.iter().all(|&r| r).then_some((start, finish))
}

/// Longest path weighted by `weight`, by memoized DFS from every node.
pub fn dfs_longest_path(n: usize, succ: impl Fn(usize) -> Vec<usize>, weight: impl Fn(usize) -> f64) -> f64 {
    fn visit(v: usize, succ: &dyn Fn(usize) -> Vec<usize>, weight: &dyn Fn(usize) -> f64, memo: &mut [Option<f64>]) -> f64 {
        if let Some(x) = memo[v] {
            return x;
        }
        let tail = succ(v)
            .into_iter()
            .map(|s| visit(s, succ, weight, memo))
            .fold(0.0, f64::max);
        let x = weight(v) + tail;
        memo[v] = Some(x);
        x
    }
    let mut memo = vec![None; n];
    (0..n).map(|v| visit(v, &succ, &weight, &mut memo)).fold(0.0, f64::max)
}

/// Every duplication vector with `1 <= d_i <= caps_i` and
/// `sum d_i * sets_i <= count`.
pub fn enumerate_wtdup(sets: &[u64], caps: &[u64], count: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![1u64; sets.len()];
    fn rec(i: usize, used: u64, sets: &[u64], caps: &[u64], count: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i == sets.len() {
            out.push(cur.clone());
            return;
        }
        let rest: u64 = sets[i + 1..].iter().sum();
        let mut d = 1;
        while d <= caps[i] && used + d * sets[i] + rest <= count {
            cur[i] = d;
            rec(i + 1, used + d * sets[i], sets, caps, count, cur, out);
            d += 1;
        }
    }
    rec(0, 0, sets, caps, count, &mut cur, &mut out);
    out
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
