//! Command-line front end: run a scenario to CSV artifacts, recompute a
//! summary from a trace, or align several summaries side by side.
//!
//! Exit codes: 0 success, 2 configuration error (bad file, bad flag value),
//! 3 a `--assert-requirements` check failed. Everything else (I/O, malformed
//! input files) exits 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use syncsim::config::{Overrides, RunConfig, ScenarioKind};
use syncsim::scenario::{run_scenario, CapturedRun, RunPaths, ScenarioError};
use syncsim::summary::{
    compare, parse_summary, summarize, summarize_positions, write_summary, RunSummary,
};
use syncsim::trace::{parse_positions, parse_trace};

/// Output directory fallback when `--out-dir` is absent.
const OUT_DIR_ENV: &str = "SYNCSIM_OUT_DIR";

const EXIT_CONFIG: u8 = 2;
const EXIT_REQUIREMENT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "syncsim",
    version,
    about = "Deterministic clock-sync simulator: wireline PTP, PTP over wireless, \
             and radio-frame-anchored correction"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write trace.csv, summary.csv and (with the
    /// demonstrator enabled) positions.csv.
    Run(RunArgs),
    /// Recompute summary statistics from a trace CSV and print them.
    Summarize(SummarizeArgs),
    /// Align two or more summary CSVs into a comparison table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario config; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// wireline_gptp | ptp_over_wireless | sfn_anchored (overrides the file).
    #[arg(long)]
    scenario: Option<String>,
    /// RNG seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration in seconds (overrides the file).
    #[arg(long)]
    duration: Option<f64>,
    /// Artifact directory; falls back to $SYNCSIM_OUT_DIR, then
    /// runs/<scenario>-seed<seed>.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit 3 unless every station stays under the 1 ms requirement.
    #[arg(long)]
    assert_requirements: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// trace.csv produced by `run`.
    trace: PathBuf,
    /// Matching positions.csv; adds the carriage-gap row to the summary.
    #[arg(long)]
    positions: Option<PathBuf>,
    /// Cruise speed used to invert the peak gap into a start skew (m/s).
    #[arg(long, default_value_t = 4.0)]
    v_max: f64,
}

#[derive(Args)]
struct CompareArgs {
    /// Two or more summary.csv files.
    summaries: Vec<PathBuf>,
    /// Also write the comparison as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Exit 3 unless every compared scenario meets the 1 ms requirement.
    #[arg(long)]
    assert_requirements: bool,
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run(args) => run_cmd(args),
        Cmd::Summarize(args) => summarize_cmd(args),
        Cmd::Compare(args) => compare_cmd(args),
    }
    .unwrap_or_else(|failure| {
        eprintln!("error: {}", failure.message);
        ExitCode::from(failure.code)
    })
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Failure { code: EXIT_CONFIG, message: message.to_string() }
    }

    fn other(message: impl ToString) -> Self {
        Failure { code: 1, message: message.to_string() }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::other(format!("{}: {e}", path.display())))
}

fn run_cmd(args: RunArgs) -> Result<ExitCode, Failure> {
    let scenario = args
        .scenario
        .as_deref()
        .map(|s| {
            s.parse::<ScenarioKind>().map_err(|_| {
                Failure::config(format!(
                    "unknown scenario {s:?}; expected wireline_gptp, ptp_over_wireless \
                     or sfn_anchored"
                ))
            })
        })
        .transpose()?;

    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(Failure::config)?,
        None => RunConfig::default_for(scenario.unwrap_or(ScenarioKind::WirelineGptp)),
    };
    cfg.apply_overrides(&Overrides { scenario, seed: args.seed, duration_s: args.duration })
        .map_err(Failure::config)?;

    let out_dir = args
        .out_dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| {
            PathBuf::from("runs").join(format!("{}-seed{}", cfg.scenario, cfg.seed))
        });

    let (captured, paths) = run_scenario(&cfg, &out_dir).map_err(|e| match e {
        ScenarioError::Config(c) => Failure::config(c),
        other => Failure::other(other),
    })?;
    report_run(&captured, &paths);

    if args.assert_requirements {
        let failing: Vec<&str> = captured
            .summary
            .nodes
            .iter()
            .filter(|n| !n.meets_1ms)
            .map(|n| n.node.as_str())
            .collect();
        if !failing.is_empty() {
            eprintln!(
                "requirement check failed: {} above 1 ms (or never corrected)",
                failing.join(", ")
            );
            return Ok(ExitCode::from(EXIT_REQUIREMENT));
        }
        println!("requirement check passed: all stations under 1 ms");
    }
    Ok(ExitCode::SUCCESS)
}

fn report_run(captured: &CapturedRun, paths: &RunPaths) {
    println!("wrote {}", paths.trace.display());
    if let Some(p) = &paths.positions {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", paths.summary.display());
    for n in &captured.summary.nodes {
        let steady = n
            .steady_max_abs_true_offset_ns
            .map(|v| format!("{v} ns"))
            .unwrap_or_else(|| "never corrected".to_string());
        println!(
            "{}: {} rows, max |offset| {} ns, steady max {}, {} corrections",
            n.node, n.rows, n.max_abs_true_offset_ns, steady, n.corrections
        );
    }
    if let Some(m) = &captured.summary.motion {
        println!(
            "carriage pair: peak gap {:.3} um (quantized {:.3}), recovered skew {} ns",
            m.ds_max_um, m.ds_max_quantized_um, m.recovered_dt_ns
        );
    }
}

fn summarize_cmd(args: SummarizeArgs) -> Result<ExitCode, Failure> {
    let rows = parse_trace(&read_file(&args.trace)?)
        .map_err(|e| Failure::other(format!("{}: {e}", args.trace.display())))?;
    let mut summary = summarize(&rows).map_err(Failure::other)?;
    if let Some(positions) = &args.positions {
        if !(args.v_max > 0.0) {
            return Err(Failure::config("--v-max must be positive"));
        }
        let samples = parse_positions(&read_file(positions)?)
            .map_err(|e| Failure::other(format!("{}: {e}", positions.display())))?;
        summary.motion = Some(summarize_positions(&samples, args.v_max));
    }
    print!("{}", write_summary(&summary));
    Ok(ExitCode::SUCCESS)
}

fn compare_cmd(args: CompareArgs) -> Result<ExitCode, Failure> {
    if args.summaries.len() < 2 {
        return Err(Failure::config(format!(
            "need at least 2 summaries to compare, got {}",
            args.summaries.len()
        )));
    }
    let mut summaries: Vec<RunSummary> = Vec::with_capacity(args.summaries.len());
    for path in &args.summaries {
        let parsed = parse_summary(&read_file(path)?)
            .map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
        summaries.push(parsed);
    }
    let cmp = compare(&summaries).map_err(Failure::other)?;
    print!("{}", cmp.to_text_table());
    if let Some(path) = &args.csv {
        fs::write(path, cmp.to_csv())
            .map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    if args.assert_requirements {
        let failing: Vec<&str> = cmp
            .rows
            .iter()
            .filter(|r| !r.meets_1ms)
            .map(|r| r.scenario.as_str())
            .collect();
        if !failing.is_empty() {
            eprintln!("requirement check failed: {}", failing.join(", "));
            return Ok(ExitCode::from(EXIT_REQUIREMENT));
        }
        println!("requirement check passed: all scenarios under 1 ms");
    }
    Ok(ExitCode::SUCCESS)
}
