//! Batch study: every (fault bus, clearing time) grid point is simulated,
//! assessed and checked against the simulator's own stability verdict.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use rotor_mle::sim::FaultSpec;
use rotor_mle::*;
use serde::Serialize;

use crate::{load_case, resolve_fault, FaultArgs};

#[derive(Args)]
pub struct SweepArgs {
    /// Network TOML file.
    #[arg(long)]
    network: PathBuf,
    /// Faulted buses (comma separated); defaults to the bus of the file's fault.
    #[arg(long, value_delimiter = ',')]
    fault_bus: Vec<u32>,
    /// Fault inception time (s); defaults to the file's fault.
    #[arg(long)]
    fault_time: Option<f64>,
    /// Clearing times (s, comma separated); defaults to the file's fault.
    #[arg(long, value_delimiter = ',')]
    clear_time: Vec<f64>,
    /// Branch ids opened at clearing, applied to every grid point.
    #[arg(long, value_delimiter = ',')]
    remove_branch: Vec<u32>,
    /// Severity threshold for generator pairing.
    #[arg(long, default_value_t = 0.7)]
    sigma: f64,
    /// Post-clearing observation span and waiting limit (s).
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Per-case CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Summary CSV to write; the summary is printed to stdout either way.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct CaseRow {
    fault_bus: u32,
    fault_time: f64,
    clear_time: f64,
    patterns: String,
    verdict: String,
    oracle: String,
    agree: bool,
    latency_s: Option<f64>,
    error: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    cases: usize,
    agreements: usize,
    success_rate: f64,
    #[serde(rename = "I")]
    p1: usize,
    #[serde(rename = "II")]
    p2: usize,
    #[serde(rename = "III")]
    p3: usize,
    #[serde(rename = "IV")]
    p4: usize,
    #[serde(rename = "V")]
    p5: usize,
    #[serde(rename = "VI")]
    p6: usize,
}

fn oracle_label(v: OracleVerdict) -> &'static str {
    match v {
        OracleVerdict::Stable => "STABLE",
        OracleVerdict::Unstable => "UNSTABLE",
    }
}

fn status_label(s: SystemStatus) -> &'static str {
    match s {
        SystemStatus::Pending => "PENDING",
        SystemStatus::Stable => "STABLE",
        SystemStatus::Unstable => "UNSTABLE",
        SystemStatus::Undetermined => "UNDETERMINED",
    }
}

fn run_case(model: &NetworkModel, fault: &FaultSpec, config: &AssessConfig, observation: f64) -> CaseRow {
    let mut row = CaseRow {
        fault_bus: fault.bus,
        fault_time: fault.fault_time,
        clear_time: fault.clear_time,
        patterns: String::new(),
        verdict: String::new(),
        oracle: String::new(),
        agree: false,
        latency_s: None,
        error: String::new(),
    };
    let opts = SimOptions { horizon: fault.clear_time + observation + 0.5, ..Default::default() };
    let outcome = simulate(model, fault, &opts).and_then(|sim| {
        let oracle = stability_oracle(&sim, observation)?;
        Ok((oracle, assess_simulation(&sim, config)?))
    });
    match outcome {
        Ok((oracle, report)) => {
            row.patterns =
                report.pairs.iter().filter_map(|p| p.pattern).map(|p| p.to_string()).collect::<Vec<_>>().join(";");
            row.verdict = status_label(report.system.status).into();
            row.oracle = oracle_label(oracle).into();
            row.agree = row.verdict == row.oracle;
            row.latency_s = report.system.decision_time_s;
            row.error = report.error.unwrap_or_default();
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

fn summarize(rows: &[CaseRow]) -> Summary {
    let count = |p: &str| rows.iter().flat_map(|r| r.patterns.split(';')).filter(|x| *x == p).count();
    let agreements = rows.iter().filter(|r| r.agree).count();
    Summary {
        cases: rows.len(),
        agreements,
        success_rate: if rows.is_empty() { 0.0 } else { agreements as f64 / rows.len() as f64 },
        p1: count("I"),
        p2: count("II"),
        p3: count("III"),
        p4: count("IV"),
        p5: count("V"),
        p6: count("VI"),
    }
}

pub fn run(args: &SweepArgs) -> Result<()> {
    if !(args.t_max > 0.0) {
        bail!("--t-max must be positive");
    }
    let case = load_case(&args.network)?;
    let base = case.fault.as_ref();
    let buses = if args.fault_bus.is_empty() { base.map(|f| vec![f.bus]).unwrap_or_default() } else { args.fault_bus.clone() };
    let clears = if args.clear_time.is_empty() { base.map(|f| vec![f.clear_time]).unwrap_or_default() } else { args.clear_time.clone() };
    if buses.is_empty() || clears.is_empty() {
        bail!("empty grid: pass --fault-bus and --clear-time or add a [fault] section to the network file");
    }
    let mut faults = Vec::new();
    for &bus in &buses {
        for &clear in &clears {
            let overrides = FaultArgs {
                fault_bus: Some(bus),
                fault_time: args.fault_time,
                clear_time: Some(clear),
                remove_branch: args.remove_branch.clone(),
            };
            faults.push(resolve_fault(&case, &overrides)?);
        }
    }

    let mut config = AssessConfig::default().with_t_max(args.t_max);
    config.sdgp.sigma = args.sigma;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let rows: Vec<CaseRow> =
        pool.install(|| faults.par_iter().map(|f| run_case(&case.network, f, &config, args.t_max)).collect());

    let mut w = csv::Writer::from_path(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let summary = summarize(&rows);
    let mut out = csv::Writer::from_writer(Vec::new());
    out.serialize(&summary)?;
    let text = String::from_utf8(out.into_inner()?)?;
    print!("{text}");
    if let Some(path) = &args.summary {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
