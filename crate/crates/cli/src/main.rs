use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pbc_core::scenarios::{build, builtin_scenarios, load_scenario, run, verify_scenario, RunOutput, Scenario};
use pbc_core::simulation::write_trace_csv;
use pbc_core::Error;
use rayon::prelude::*;

/// Saturated passivity-based control workbench.
#[derive(Debug, Parser)]
#[command(name = "pbc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace and metrics.
    Simulate(RunArgs),
    /// Run every applicable structural and stability check.
    Verify(RunArgs),
    /// Simulate a scenario once per value of a controller parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to vary; several keys may be joined with `+`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values; an empty string runs nothing.
        #[arg(long)]
        values: Option<String>,
    },
    /// List the built-in scenarios.
    List,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long, env = "PBC_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Override a scenario key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Recording interval override.
    #[arg(long)]
    dt: Option<f64>,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure carrying its process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 2,
        Error::Invariant(_) => 3,
        _ => 1,
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

fn resolve(args: &RunArgs) -> Result<Scenario, Failure> {
    let mut s = load_scenario(&args.scenario)?;
    for o in &args.overrides {
        s.set_str(o)?;
    }
    if let Some(dt) = args.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")).into());
        }
        s.dt = dt;
    }
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn write_run(out: &Path, name: &str, result: &RunOutput) -> Result<(), Failure> {
    let trace_path = out.join(format!("{name}.trace.csv"));
    let file = File::create(&trace_path).map_err(|e| io_failure(&trace_path, e))?;
    let mut writer = BufWriter::new(file);
    write_trace_csv(&result.trace, &mut writer)?;
    writer.flush().map_err(|e| io_failure(&trace_path, e))?;
    let metrics = serde_json::to_string_pretty(&result.metrics).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    write_file(&out.join(format!("{name}.metrics.json")), &(metrics + "\n"))
}

fn prepare_out(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let s = resolve(args)?;
    prepare_out(&args.out)?;
    let result = run(&s)?;
    write_run(&args.out, &s.name, &result)?;
    println!("{}: {} samples written to {}", s.name, result.trace.len(), args.out.display());
    Ok(())
}

fn verify(args: &RunArgs) -> Result<(), Failure> {
    let s = resolve(args)?;
    prepare_out(&args.out)?;
    let report = verify_scenario(&s, args.seed)?;
    write_file(&args.out.join(format!("{}.verify.json", s.name)), &(report.to_json()? + "\n"))?;
    for c in &report.checks {
        println!("{:<4} {:<24} residual {:e} tolerance {:e}", if c.pass { "ok" } else { "FAIL" }, c.name, c.residual, c.tolerance);
    }
    if report.all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure { code: 3, message: format!("{}: failed checks: {}", s.name, failed.join(", ")) })
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| Failure { code: 1, message: format!("sweep value '{v}': {e}") }))
        .collect()
}

fn csv_list<T: ToString>(items: &[T]) -> Vec<String> {
    items.iter().map(T::to_string).collect()
}

fn sweep(args: &RunArgs, param: Option<&str>, values: Option<&str>) -> Result<(), Failure> {
    let base = resolve(args)?;
    let param = param
        .map(str::to_string)
        .or_else(|| base.sweep.as_ref().map(|w| w.param.clone()))
        .ok_or_else(|| Failure { code: 1, message: format!("{}: no sweep parameter given", base.name) })?;
    let values = match values {
        Some(text) => parse_values(text)?,
        None => base.sweep.as_ref().map(|w| w.values.clone()).unwrap_or_default(),
    };
    let members: Vec<Scenario> = values.iter().map(|v| base.with_sweep_value(&param, *v)).collect::<Result<_, _>>()?;
    let inputs = build(&base)?.closed_loop.layout().inputs;
    prepare_out(&args.out)?;

    let results: Vec<Result<RunOutput, Failure>> = members
        .par_iter()
        .map(|s| {
            let out = run(s)?;
            write_run(&args.out, &s.name, &out)?;
            Ok(out)
        })
        .collect();

    let mut header = vec!["value".to_string(), "status".to_string()];
    header.extend(base.outputs.iter().map(|c| format!("sse_{c}")));
    header.extend(base.outputs.iter().map(|c| format!("oscillations_{c}")));
    header.extend((1..=inputs).map(|i| format!("max_abs_u{i}")));
    header.extend((1..=inputs).map(|i| format!("saturation_intervals_u{i}")));
    header.push("settling_time".into());
    let mut summary = header.join(",") + "\n";
    let mut worst = 0u8;
    for (value, result) in values.iter().zip(&results) {
        let mut row = vec![format!("{value:?}")];
        match result {
            Ok(out) => {
                let m = &out.metrics;
                row.push("ok".into());
                row.extend(m.steady_state_error.iter().map(|v| format!("{v:?}")));
                row.extend(csv_list(&m.oscillation_count));
                row.extend(m.max_abs_input.iter().map(|v| format!("{v:?}")));
                row.extend(m.saturation_intervals.iter().map(|v| v.len().to_string()));
                row.push(m.settling_time.map(|t| format!("{t:?}")).unwrap_or_default());
            }
            Err(f) => {
                worst = worst.max(f.code);
                row.push(format!("failed (exit {})", f.code));
                row.resize(header.len(), String::new());
                eprintln!("{} {param}={value}: {}", base.name, f.message);
            }
        }
        summary += &(row.join(",") + "\n");
    }
    let summary_path = args.out.join(format!("{}.sweep.csv", base.name));
    write_file(&summary_path, &summary)?;
    println!("{}: {} runs summarized in {}", base.name, values.len(), summary_path.display());
    if worst == 0 {
        Ok(())
    } else {
        Err(Failure { code: worst, message: format!("{}: some sweep members failed", base.name) })
    }
}

fn list() {
    for s in builtin_scenarios() {
        println!("{:<24} {}", s.name, s.description);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Verify(args) => verify(args),
        Command::Sweep { run, param, values } => sweep(run, param.as_deref(), values.as_deref()),
        Command::List => {
            list();
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
