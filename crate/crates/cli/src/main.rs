// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rotor_mle::sim::{CaseFile, FaultSpec};
use rotor_mle::*;
use serde::Serialize;

mod sweep;

#[derive(Parser)]
#[command(name = "rotor-mle", version, about = "Rotor angle stability assessment from post-fault rotor traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fault and write the rotor traces plus event metadata.
    Simulate(SimulateArgs),
    /// Assess a trace file and print the JSON report.
    Assess(AssessArgs),
    /// Print the swing pattern, Theiler window and estimation start per pair.
    Classify(AssessArgs),
    /// Simulate and assess a grid of fault buses and clearing times.
    Sweep(sweep::SweepArgs),
}

/// Fault overrides; unset fields come from the `[fault]` section of the network file.
#[derive(Args, Clone)]
pub struct FaultArgs {
    #[arg(long)]
    pub fault_bus: Option<u32>,
    #[arg(long)]
    pub fault_time: Option<f64>,
    #[arg(long)]
    pub clear_time: Option<f64>,
    /// Branch ids opened at clearing (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    pub remove_branch: Vec<u32>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network TOML file.
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    fault: FaultArgs,
    /// Output sample rate (Hz).
    #[arg(long, default_value_t = 120.0)]
    rate: f64,
    /// Simulated span from t = 0 (s); defaults to clearing time + 10.5 s.
    #[arg(long)]
    horizon: Option<f64>,
    /// Trace CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Event metadata TOML to write; defaults to the trace path with `.meta.toml`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct AssessArgs {
    /// Trace CSV (`t,gen_id,delta_rad,omega_rad_per_s`).
    #[arg(long)]
    traces: PathBuf,
    /// Event metadata TOML; defaults to the trace path with `.meta.toml`.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Assessment sample rate (Hz).
    #[arg(long, default_value_t = ASSESSMENT_RATE_HZ)]
    rate: u32,
    /// Severity threshold for generator pairing.
    #[arg(long, default_value_t = 0.7)]
    sigma: f64,
    /// Waiting limit for classification and criteria (s).
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Nominal speed to subtract when the file holds absolute speeds (rad/s).
    #[arg(long)]
    nominal_speed: Option<f64>,
    /// Write the MLE series of every pair as CSV.
    #[arg(long)]
    dump_mle: Option<PathBuf>,
    /// Write relative angle and distance series of every pair as CSV.
    #[arg(long)]
    dump_distance: Option<PathBuf>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate_cmd(&args).map(|()| 0),
        Command::Assess(args) => assess_cmd(&args),
        Command::Classify(args) => classify_cmd(&args).map(|()| 0),
        Command::Sweep(args) => sweep::run(&args).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn load_case(path: &Path) -> Result<CaseFile> {
    CaseFile::load(path).with_context(|| format!("reading network {}", path.display()))
}

/// Merges command-line overrides into the fault of the network file. Opened
/// branches are taken from the file only when the faulted bus is unchanged.
pub fn resolve_fault(case: &CaseFile, args: &FaultArgs) -> Result<FaultSpec> {
    let base = case.fault.as_ref();
    let Some(bus) = args.fault_bus.or(base.map(|f| f.bus)) else {
        bail!("no fault bus: pass --fault-bus or add a [fault] section to the network file");
    };
    let Some(fault_time) = args.fault_time.or(base.map(|f| f.fault_time)) else {
        bail!("no fault time: pass --fault-time or add a [fault] section to the network file");
    };
    let Some(clear_time) = args.clear_time.or(base.map(|f| f.clear_time)) else {
        bail!("no clearing time: pass --clear-time or add a [fault] section to the network file");
    };
    let remove_branches = if !args.remove_branch.is_empty() {
        args.remove_branch.clone()
    } else {
        base.filter(|f| f.bus == bus).map(|f| f.remove_branches.clone()).unwrap_or_default()
    };
    let label = base.filter(|f| f.bus == bus).and_then(|f| f.label.clone());
    let fault = FaultSpec { bus, fault_time, clear_time, remove_branches, label };
    fault.validate(&case.network)?;
    Ok(fault)
}

fn meta_path(traces: &Path, meta: Option<&PathBuf>) -> PathBuf {
    meta.cloned().unwrap_or_else(|| traces.with_extension("meta.toml"))
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    if !(args.rate > 0.0) {
        bail!("--rate must be positive");
    }
    let case = load_case(&args.network)?;
    let fault = resolve_fault(&case, &args.fault)?;
    let opts = SimOptions {
        dt: 1.0 / args.rate,
        horizon: args.horizon.unwrap_or(fault.clear_time + 10.5),
        ..Default::default()
    };
    let sim = simulate(&case.network, &fault, &opts)?;
    if sim.diverged {
        log::warn!("simulation diverged; traces end at the last finite sample");
    }
    std::fs::write(&args.out, write_traces(&sim.traces)).with_context(|| format!("writing {}", args.out.display()))?;
    let meta = EventMeta { fault_time: fault.fault_time, clear_time: fault.clear_time, label: fault.label.clone() };
    let meta_out = meta_path(&args.out, args.meta.as_ref());
    std::fs::write(&meta_out, meta.to_toml()).with_context(|| format!("writing {}", meta_out.display()))?;
    Ok(())
}

fn assessment_config(args: &AssessArgs, keep_series: bool) -> AssessConfig {
    let mut config = AssessConfig::default().with_t_max(args.t_max);
    config.sdgp.sigma = args.sigma;
    config.keep_series = keep_series;
    config
}

fn load_dataset(args: &AssessArgs) -> Result<(AlignedDataset, EventMeta)> {
    let meta_file = meta_path(&args.traces, args.meta.as_ref());
    let meta_text =
        std::fs::read_to_string(&meta_file).with_context(|| format!("reading event metadata {}", meta_file.display()))?;
    let meta = EventMeta::from_toml(&meta_text).with_context(|| format!("parsing {}", meta_file.display()))?;
    let text = std::fs::read_to_string(&args.traces).with_context(|| format!("reading traces {}", args.traces.display()))?;
    let traces = parse_traces(&text, &ParseOptions { nominal_speed: args.nominal_speed })
        .with_context(|| format!("parsing {}", args.traces.display()))?;
    let data = rotor_mle::ingest::align_at_rate(&traces, &meta, args.rate)?;
    Ok((data, meta))
}

fn assess_cmd(args: &AssessArgs) -> Result<i32> {
    let (data, meta) = load_dataset(args)?;
    let keep = args.dump_mle.is_some() || args.dump_distance.is_some();
    let report = run_assessment(&data, &meta, &assessment_config(args, keep))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let json = report.to_json();
    println!("{json}");
    if let Some(path) = &args.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.dump_mle {
        write_mle_dump(path, &report)?;
    }
    if let Some(path) = &args.dump_distance {
        write_distance_dump(path, &report, data.dt())?;
    }
    Ok(report.exit_code())
}

#[derive(Serialize)]
struct MleRow {
    severe: u32,
    least: u32,
    t: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct DistanceRow {
    severe: u32,
    least: u32,
    j: usize,
    t: f64,
    rel_angle: f64,
    d: Option<f64>,
}

fn write_mle_dump(path: &Path, report: &AssessmentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for s in &report.series {
        for (&t, &lambda) in s.mle.times.iter().zip(&s.mle.lambdas) {
            w.serialize(MleRow { severe: s.pair.severe, least: s.pair.least, t, lambda })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_distance_dump(path: &Path, report: &AssessmentReport, dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for s in &report.series {
        for (j, &rel_angle) in s.rel_angle.iter().enumerate() {
            let d = s.distance.as_ref().and_then(|d| d.d.get(j).copied());
            w.serialize(DistanceRow { severe: s.pair.severe, least: s.pair.least, j, t: j as f64 * dt, rel_angle, d })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ClassifyRow {
    severe: u32,
    least: u32,
    pattern: Option<SwingPattern>,
    w: Option<usize>,
    m_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn classify_cmd(args: &AssessArgs) -> Result<()> {
    let (data, meta) = load_dataset(args)?;
    let report = run_assessment(&data, &meta, &assessment_config(args, false))?;
    let rows: Vec<ClassifyRow> = report
        .pairs
        .iter()
        .map(|p| ClassifyRow { severe: p.severe, least: p.least, pattern: p.pattern, w: p.w, m_n: p.m_n, error: p.error.clone() })
        .collect();
    println!("{}", serde_json::to_string_pretty(&rows)?);
    Ok(())
}
