use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use pimsyn_core::dataflow::{compile, dag_stats, MappingParams};
use pimsyn_core::dse::{run_dse, DseConfig, WtDupMode};
use pimsyn_core::hw::HardwareParams;
use pimsyn_core::model::{load_model, macs_per_layer, CnnModel};
use pimsyn_core::report::{ablation_suite, ablation_text, summary_text, write_ablation_csv, write_reports};
use pimsyn_core::Error;

#[derive(Parser, Debug)]
#[command(name = "pimsyn", version, about = "Synthesize ReRAM processing-in-memory CNN accelerators")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explore the design space and write the best architecture.
    Synth(RunArgs),
    /// Compare the full flow against runs with one feature disabled.
    Ablate(RunArgs),
    /// Validate a model file and print its shape statistics.
    ConvertCheck {
        model: PathBuf,
        /// Also compile the dataflow DAG with this crossbar size (duplication 1).
        #[arg(long)]
        xb_size: Option<u32>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Model description (JSON).
    model: PathBuf,
    /// Total power budget in watts.
    #[arg(long)]
    power: f64,
    /// Hardware parameter file; the bundled ISAAC-like set when omitted.
    #[arg(long, env = "PIMSYN_HW")]
    hw: Option<PathBuf>,
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    /// TOML file with domains, sa, ea and options sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Use one copy of every layer's weights.
    #[arg(long)]
    no_weight_duplication: bool,
    /// Give every macro the same component counts.
    #[arg(long)]
    identical_macros: bool,
    /// Forbid layers from sharing macros.
    #[arg(long)]
    no_macro_sharing: bool,
}

struct Setup {
    model: CnnModel,
    hw: HardwareParams,
    cfg: DseConfig,
}

fn setup(args: &RunArgs) -> anyhow::Result<Setup> {
    if !(args.power > 0.0) {
        return Err(Error::Config(format!("--power must be positive, got {}", args.power)).into());
    }
    let model = load_model(&args.model)?;
    let hw = match &args.hw {
        Some(p) => HardwareParams::load(p)?,
        None => HardwareParams::default(),
    };
    let mut cfg = match &args.config {
        Some(p) => DseConfig::load(p)?,
        None => DseConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.no_weight_duplication {
        cfg.options.wtdup_mode = WtDupMode::AllOnes;
    }
    if args.identical_macros {
        cfg.options.identical_macros = true;
    }
    if args.no_macro_sharing {
        cfg.options.macro_sharing = false;
    }
    Ok(Setup { model, hw, cfg })
}

fn synth(args: &RunArgs) -> anyhow::Result<()> {
    let s = setup(args)?;
    let result = run_dse(&s.model, &s.hw, args.power, &s.cfg)?;
    write_reports(&args.output, &s.model, args.power, s.cfg.seed, &result)?;
    info!("finished in {:.2?}", result.wall_time);
    print!("{}", summary_text(&s.model, args.power, &result));
    Ok(())
}

fn ablate(args: &RunArgs) -> anyhow::Result<()> {
    let s = setup(args)?;
    let report = ablation_suite(&s.model, &s.hw, args.power, &s.cfg)?;
    std::fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    write_reports(&args.output, &s.model, args.power, s.cfg.seed, &report.full)?;
    write_ablation_csv(&args.output.join("ablation.csv"), &report)?;
    let text = ablation_text(&report);
    std::fs::write(args.output.join("ablation.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn convert_check(path: &Path, xb_size: Option<u32>) -> anyhow::Result<()> {
    let model = load_model(path)?;
    println!("{}: {} layers, {} weight-bearing", model.name, model.layers().len(), model.num_weight_bearing());
    for layer in model.layers() {
        let macs = if layer.is_weight_bearing() { macs_per_layer(layer)? } else { 0 };
        println!(
            "  {:>3} {:<13} k={:<2} {:>5}->{:<5} out {}x{}  macs {}",
            layer.index,
            layer.kind.name(),
            layer.kernel,
            layer.in_channels,
            layer.out_channels,
            layer.out_width,
            layer.out_height,
            macs
        );
    }
    println!("total MACs {}", model.total_macs());
    if let Some(xb) = xb_size {
        let ones = vec![1; model.num_weight_bearing()];
        let params = MappingParams {
            xb_size: xb,
            res_rram: 2,
            res_dac: 1,
        };
        let stats = dag_stats(&compile(&model, &ones, &params)?)?;
        println!("dag: {} nodes, {} edges, depth {}", stats.node_count, stats.edge_count, stats.depth);
        for (kind, n) in &stats.op_histogram {
            println!("  {:<9}{n}", kind.name());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasibility() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Synth(args) => synth(args),
        Command::Ablate(args) => ablate(args),
        Command::ConvertCheck { model, xb_size } => convert_check(model, *xb_size),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
