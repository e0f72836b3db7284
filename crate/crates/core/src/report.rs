//! Report files written after a synthesis run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dse::{run_dse, DseConfig, DseResult, WtDupMode};
use crate::error::{Error, Result};
use crate::hw::HardwareParams;
use crate::model::CnnModel;
use crate::wtdup::csv_error;

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub model: String,
    pub total_power: f64,
    pub seed: u64,
    pub result: DseResult,
}

impl ResultFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "result file".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Human-readable table of the best architecture.
pub fn summary_text(model: &CnnModel, total_power: f64, result: &DseResult) -> String {
    let p = &result.best_point;
    let e = &result.best_eval;
    let mut s = String::new();
    let _ = writeln!(s, "model              {}", model.name);
    let _ = writeln!(s, "power budget       {total_power} W");
    let _ = writeln!(s, "explored points    {}", result.explored_count);
    let _ = writeln!(s, "skipped points     {}", result.skipped.len());
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<22}{:>14}", "metric", "value");
    let rows: [(&str, String); 9] = [
        ("throughput (GOPS)", format!("{:.3}", e.throughput / 1e9)),
        ("power (W)", format!("{:.4}", e.power)),
        ("efficiency (TOPS/W)", format!("{:.4}", e.power_efficiency)),
        ("peak eff. (TOPS/W)", format!("{:.4}", e.peak_power_efficiency)),
        ("latency (ms)", format!("{:.4}", e.latency * 1e3)),
        ("bound latency (ms)", format!("{:.4}", e.lower_bound_latency * 1e3)),
        ("energy (mJ)", format!("{:.4}", e.energy * 1e3)),
        ("EDP (J*s)", format!("{:.4e}", e.edp)),
        ("macros", p.plan.num_macros().to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<22}{v:>14}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "ratio_rram {}  xb_size {}  res_rram {}  res_dac {}  adc {} bits", p.ratio_rram, p.xb_size, p.res_rram, p.res_dac, p.adc_resolution);
    let _ = writeln!(s, "crossbars used {}", p.wtdup.crossbars_used());
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<7}{:<7}{:>8}{:>8}{:>8}", "layer", "kind", "wtdup", "owner", "macros");
    for (i, layer) in model.weight_bearing_layers().enumerate() {
        let _ = writeln!(
            s,
            "{:<7}{:<7}{:>8}{:>8}{:>8}",
            layer.index,
            layer.kind.name(),
            p.wtdup.factors[i],
            p.mac_alloc.owner(i),
            p.mac_alloc.macros(i)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<8}{:>6}{:>10}{:>8}{:>8}{:>11}", "group", "adc", "shift_add", "pool", "relu", "vector_add");
    for (g, row) in p.comp_alloc.counts.iter().enumerate() {
        let owner = p.plan.groups[g].owner;
        let _ = writeln!(s, "{:<8}{:>6}{:>10}{:>8}{:>8}{:>11}", owner, row[0], row[1], row[2], row[3], row[4]);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "power breakdown (W)");
    for (k, v) in &e.power_breakdown {
        let _ = writeln!(s, "  {k:<16}{v:.6}");
    }
    s
}

pub fn write_pareto_csv(path: &Path, result: &DseResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["ratio_rram", "xb_size", "res_rram", "res_dac", "candidate", "power_efficiency", "throughput", "latency"])
        .map_err(|e| csv_error(path, e))?;
    for entry in &result.pareto_set {
        let p = &result.explored[entry.index];
        w.write_record([
            p.ratio_rram.to_string(),
            p.xb_size.to_string(),
            p.res_rram.to_string(),
            p.res_dac.to_string(),
            p.candidate.to_string(),
            p.power_efficiency.to_string(),
            p.throughput.to_string(),
            p.latency.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `summary.txt`, `result.json` and `pareto.csv` into `dir`.
pub fn write_reports(dir: &Path, model: &CnnModel, total_power: f64, seed: u64, result: &DseResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("summary.txt"), &summary_text(model, total_power, result))?;
    let file = ResultFile {
        model: model.name.clone(),
        total_power,
        seed,
        result: result.clone(),
    };
    write(&dir.join("result.json"), &file.to_json())?;
    write_pareto_csv(&dir.join("pareto.csv"), result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub study: String,
    pub variant: String,
    pub baseline: String,
    pub variant_efficiency: f64,
    pub baseline_efficiency: f64,
    pub variant_throughput: f64,
    pub baseline_throughput: f64,
}

impl AblationRow {
    /// Relative efficiency gain of the variant in percent.
    pub fn efficiency_gain_pct(&self) -> f64 {
        (self.variant_efficiency / self.baseline_efficiency - 1.0) * 100.0
    }

    pub fn throughput_gain_pct(&self) -> f64 {
        (self.variant_throughput / self.baseline_throughput - 1.0) * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full: DseResult,
    pub proportional: DseResult,
    pub all_ones: DseResult,
    pub identical: DseResult,
    pub no_sharing: DseResult,
    pub rows: Vec<AblationRow>,
}

fn row(study: &str, variant: &str, v: &DseResult, baseline: &str, b: &DseResult) -> AblationRow {
    AblationRow {
        study: study.into(),
        variant: variant.into(),
        baseline: baseline.into(),
        variant_efficiency: v.best_eval.power_efficiency,
        baseline_efficiency: b.best_eval.power_efficiency,
        variant_throughput: v.best_eval.throughput,
        baseline_throughput: b.best_eval.throughput,
    }
}

/// Run the full configuration and one run per disabled feature, all with
/// the seeds of `cfg`.
pub fn ablation_suite(model: &CnnModel, hw: &HardwareParams, total_power: f64, cfg: &DseConfig) -> Result<AblationReport> {
    let with = |f: &dyn Fn(&mut DseConfig)| {
        let mut c = cfg.clone();
        f(&mut c);
        run_dse(model, hw, total_power, &c)
    };
    let full = with(&|_| {})?;
    let proportional = with(&|c| c.options.wtdup_mode = WtDupMode::Proportional)?;
    let all_ones = with(&|c| c.options.wtdup_mode = WtDupMode::AllOnes)?;
    let identical = with(&|c| c.options.identical_macros = true)?;
    let no_sharing = with(&|c| c.options.macro_sharing = false)?;
    let rows = vec![
        row("weight_duplication", "annealing", &full, "proportional", &proportional),
        row("weight_duplication", "annealing", &full, "all_ones", &all_ones),
        row("macro_design", "specialized", &full, "identical", &identical),
        row("macro_sharing", "sharing", &full, "no_sharing", &no_sharing),
    ];
    Ok(AblationReport {
        full,
        proportional,
        all_ones,
        identical,
        no_sharing,
        rows,
    })
}

pub fn write_ablation_csv(path: &Path, report: &AblationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "study",
        "variant",
        "baseline",
        "variant_efficiency",
        "baseline_efficiency",
        "efficiency_gain_pct",
        "variant_throughput",
        "baseline_throughput",
        "throughput_gain_pct",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in &report.rows {
        w.write_record([
            r.study.clone(),
            r.variant.clone(),
            r.baseline.clone(),
            r.variant_efficiency.to_string(),
            r.baseline_efficiency.to_string(),
            format!("{:.3}", r.efficiency_gain_pct()),
            r.variant_throughput.to_string(),
            r.baseline_throughput.to_string(),
            format!("{:.3}", r.throughput_gain_pct()),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn ablation_text(report: &AblationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20}{:<13}{:<14}{:>12}{:>12}", "study", "variant", "baseline", "eff. gain", "thr. gain");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<20}{:<13}{:<14}{:>11.2}%{:>11.2}%",
            r.study,
            r.variant,
            r.baseline,
            r.efficiency_gain_pct(),
            r.throughput_gain_pct()
        );
    }
    s
}
