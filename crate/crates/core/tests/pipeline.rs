mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use std::time::Duration;

use common::desk5;
use pimsyn_core::dse::{evaluate_design_point, run_dse, DseConfig, DseResult};
use pimsyn_core::hw::{DseDomains, HardwareParams};
use pimsyn_core::partition::EaConfig;
use pimsyn_core::report::{write_reports, ResultFile};
use pimsyn_core::wtdup::SaConfig;
use pimsyn_core::Error;

fn small_config() -> DseConfig {
    DseConfig {
        domains: DseDomains {
            ratio_rram: vec![0.2, 0.3],
            xb_sizes: vec![128, 256],
            res_rram: vec![2],
            res_dac: vec![1, 2],
            sa_top_k: 3,
        },
        sa: SaConfig { iters: 500, ..SaConfig::default() },
        ea: EaConfig {
            pop_size: 6,
            max_iters: 4,
            share_iters: 3,
            ..EaConfig::default()
        },
        seed: 7,
        ..DseConfig::default()
    }
}

/// The run with its wall time cleared, as it reads back from disk.
fn stored(r: &DseResult) -> DseResult {
    DseResult {
        wall_time: Duration::ZERO,
        ..r.clone()
    }
}

fn small_run() -> &'static DseResult {
    static RUN: OnceLock<DseResult> = OnceLock::new();
    RUN.get_or_init(|| run_dse(&desk5(), &HardwareParams::default(), 5.0, &small_config()).expect("feasible at 5 W"))
}

#[test]
fn stored_best_point_reevaluates_bit_exactly() {
    let model = desk5();
    let result = small_run();
    let file = ResultFile {
        model: model.name.clone(),
        total_power: 5.0,
        seed: 7,
        result: stored(result),
    };
    let back = ResultFile::from_json_str(&file.to_json()).unwrap();
    assert_eq!(back, file);
    let eval = evaluate_design_point(
        &model,
        &HardwareParams::default(),
        5.0,
        &back.result.best_point,
        small_config().options.energy_mode,
    )
    .unwrap();
    assert_eq!(eval, result.best_eval);
}

#[test]
fn best_so_far_is_monotone_and_ends_at_best() {
    let r = small_run();
    assert_eq!(r.best_so_far.len(), r.explored.len());
    assert_eq!(r.explored_count, r.explored.len());
    assert!(r.best_so_far.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*r.best_so_far.last().unwrap(), r.best_eval.power_efficiency);
    let max = r.explored.iter().map(|p| p.power_efficiency).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(max, r.best_eval.power_efficiency);
}

#[test]
fn pareto_entries_are_mutually_non_dominated_and_cover_the_rest() {
    let r = small_run();
    assert!(!r.pareto_set.is_empty());
    for a in &r.pareto_set {
        let p = &r.explored[a.index];
        assert_eq!((p.power_efficiency, p.throughput), (a.power_efficiency, a.throughput));
        for b in &r.pareto_set {
            if a.index != b.index {
                let dominates = b.power_efficiency >= a.power_efficiency
                    && b.throughput >= a.throughput
                    && (b.power_efficiency > a.power_efficiency || b.throughput > a.throughput);
                assert!(!dominates, "{} dominated by {}", a.index, b.index);
            }
        }
    }
    let front: BTreeSet<usize> = r.pareto_set.iter().map(|e| e.index).collect();
    for (i, p) in r.explored.iter().enumerate() {
        if front.contains(&i) {
            continue;
        }
        assert!(
            r.pareto_set
                .iter()
                .any(|e| e.power_efficiency >= p.power_efficiency && e.throughput >= p.throughput),
            "point {i} is neither on nor behind the front"
        );
    }
}

#[test]
fn explored_and_skipped_partition_the_loop_nest() {
    let cfg = small_config();
    let r = small_run();
    type Triple = (u64, u32, u32);
    let key = |ratio: f64, xb, rr| (ratio.to_bits(), xb, rr);
    let mut whole: BTreeSet<Triple> = BTreeSet::new();
    let mut cells: BTreeMap<(Triple, usize), Vec<u32>> = BTreeMap::new();
    for s in &r.skipped {
        match (s.candidate, s.res_dac) {
            (None, None) => assert!(whole.insert(key(s.ratio_rram, s.xb_size, s.res_rram))),
            (Some(k), Some(d)) => cells.entry((key(s.ratio_rram, s.xb_size, s.res_rram), k)).or_default().push(d),
            other => panic!("unexpected skip shape {other:?}"),
        }
    }
    for p in &r.explored {
        cells.entry((key(p.ratio_rram, p.xb_size, p.res_rram), p.candidate)).or_default().push(p.res_dac);
    }
    let mut seen_triples = whole.clone();
    for ((triple, k), dacs) in &mut cells {
        assert!(!whole.contains(triple));
        assert!(*k < cfg.domains.sa_top_k);
        dacs.sort_unstable();
        assert_eq!(*dacs, cfg.domains.res_dac, "candidate {k} of {triple:?}");
        seen_triples.insert(*triple);
    }
    let mut all = BTreeSet::new();
    for &ratio in &cfg.domains.ratio_rram {
        for &xb in &cfg.domains.xb_sizes {
            for &rr in &cfg.domains.res_rram {
                all.insert(key(ratio, xb, rr));
            }
        }
    }
    assert_eq!(seen_triples, all);
}

#[test]
fn single_valued_domains_evaluate_at_most_k_points() {
    let mut cfg = small_config();
    cfg.domains = DseDomains {
        ratio_rram: vec![0.3],
        xb_sizes: vec![128],
        res_rram: vec![2],
        res_dac: vec![1],
        sa_top_k: 2,
    };
    let r = run_dse(&desk5(), &HardwareParams::default(), 5.0, &cfg).unwrap();
    assert!((1..=2).contains(&r.explored.len()));
    assert_eq!(r.best_point.ratio_rram, 0.3);
    assert_eq!(r.best_point.xb_size, 128);
}

#[test]
fn tiny_power_is_globally_infeasible() {
    let err = run_dse(&desk5(), &HardwareParams::default(), 1e-4, &small_config()).unwrap_err();
    assert!(matches!(err, Error::GlobalInfeasibility(_)), "{err}");
    assert!(err.is_infeasibility());
}

#[test]
fn non_positive_power_is_a_config_error() {
    let err = run_dse(&desk5(), &HardwareParams::default(), 0.0, &small_config()).unwrap_err();
    assert!(!err.is_infeasibility(), "{err}");
}

#[test]
fn toml_config_overrides_only_what_it_names() {
    let cfg = DseConfig::from_toml_str(
        r#"
seed = 11
prune = true

[domains]
xb_sizes = [256]
sa_top_k = 5

[ea]
pop_size = 12

[options]
wtdup_mode = "proportional"
macro_sharing = false
"#,
    )
    .unwrap();
    let def = DseConfig::default();
    assert_eq!(cfg.seed, 11);
    assert!(cfg.prune);
    assert_eq!(cfg.domains.xb_sizes, vec![256]);
    assert_eq!(cfg.domains.sa_top_k, 5);
    assert_eq!(cfg.domains.res_dac, def.domains.res_dac);
    assert_eq!(cfg.ea.pop_size, 12);
    assert_eq!(cfg.ea.max_iters, def.ea.max_iters);
    assert_eq!(cfg.sa, def.sa);
    assert!(!cfg.options.macro_sharing);
    assert!(DseConfig::from_toml_str("[domains]\nxb_sizes = \"big\"").is_err());
    assert!(DseConfig::from_toml_str("").unwrap() == def);
}

#[test]
fn reports_land_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let model = desk5();
    write_reports(dir.path(), &model, 5.0, 7, small_run()).unwrap();
    let back = ResultFile::load(dir.path().join("result.json")).unwrap();
    assert_eq!(back.result, stored(small_run()));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains(&model.name));
    let pareto = std::fs::read_to_string(dir.path().join("pareto.csv")).unwrap();
    assert_eq!(pareto.lines().count(), small_run().pareto_set.len() + 1);
}
