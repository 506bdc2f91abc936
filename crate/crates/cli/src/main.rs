use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use qline_cli::commands::effective_defaults;
use qline_cli::output::{scenario_hash, write_json};
use qline_cli::{run, CliError, Command, RunContext, Scenario, EXIT_CHECK};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "qline", version, about = "Transmission-line qubit environments: regimes, baths and reduced dynamics")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// scenario JSON (or the metadata JSON of an earlier run)
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// evaluate the scenario's expectations; exit 4 if any fails
    #[arg(long)]
    check: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QLINE_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("QLINE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn execute(args: &Args) -> Result<bool, CliError> {
    init_threads()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut scenario = Scenario::from_json(&text)?;
    if let Some(seed) = args.seed {
        scenario.seed = Some(seed);
    }
    // the recorded scenario carries the seed actually used
    scenario.seed = Some(scenario.seed());
    let hash = scenario_hash(&scenario);
    let warnings = scenario.range_warnings();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let start = Instant::now();
    let ctx = RunContext { out: args.out.clone() };
    let outcome = run(args.command, &scenario, &ctx).map_err(|e| e.with_hash(&hash))?;
    let name = args.command.name();
    let meta = json!({
        "command": name,
        "library_version": qline::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario,
        "scenario_hash": hash,
        "seed": scenario.seed(),
        "defaults": effective_defaults(&scenario),
        "warnings": warnings,
        "wall_seconds": start.elapsed().as_secs_f64(),
        "result": outcome.summary,
        "checks": outcome.checks.iter().map(|(d, ok)| json!({ "check": d, "passed": ok })).collect::<Vec<_>>(),
    });
    write_json(&args.out.join(format!("{name}.meta.json")), &meta)?;
    println!("{}", outcome.message);
    let mut all_ok = true;
    if args.check {
        for (desc, ok) in &outcome.checks {
            println!("{} {desc}", if *ok { "PASS" } else { "FAIL" });
            all_ok &= ok;
        }
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
