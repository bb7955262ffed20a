//! Command-line front end: `leakyguide run <config>`.
//!
//! Exit status 0 when every built-in check passes, 1 when a check or a
//! numerical task fails, 2 for configuration and output-path errors.

pub mod config;
pub mod output;
pub mod tasks;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use config::{Resolved, Task};
use tasks::{run_task, Check};

#[derive(Debug, Parser)]
#[command(
    name = "leakyguide",
    version,
    about = "Bound states of waveguides coupled through a semitransparent barrier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the tasks of a configuration file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file.
    config: PathBuf,
    /// Comma-separated tasks replacing those of the config.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Output directory replacing the config's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the Monte Carlo bound.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Validate the configuration and exit.
    #[arg(long)]
    validate_only: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Parses `args` (including the program name) and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
    }
}

fn config_error(path: &Path, e: &Error) -> i32 {
    match e {
        Error::Config { line, msg } => eprintln!("error: {}:{line}: {msg}", path.display()),
        other => eprintln!("error: {}: {other}", path.display()),
    }
    EXIT_CONFIG
}

fn run(args: RunArgs) -> i32 {
    let src = match std::fs::read_to_string(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let base = args.config.parent().unwrap_or(Path::new("."));
    let (cfg, mut resolved) = match config::parse(&src, base) {
        Ok(v) => v,
        Err(e) => return config_error(&args.config, &e),
    };
    if let Some(list) = &args.tasks {
        let mut tasks = Vec::new();
        for name in list {
            match Task::parse(name.trim()) {
                Some(t) => tasks.push(t),
                None => {
                    eprintln!("error: --tasks: unknown task `{name}`");
                    return EXIT_CONFIG;
                }
            }
        }
        if tasks.is_empty() {
            eprintln!("error: --tasks must name at least one task");
            return EXIT_CONFIG;
        }
        tasks.sort();
        tasks.dedup();
        resolved.tasks = tasks;
    }
    if let Some(out) = &args.out {
        resolved.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        resolved.seed = seed;
    }
    if args.jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_CONFIG;
    }
    if args.validate_only {
        println!(
            "config ok: {} task(s), {} sweep point(s)",
            resolved.tasks.len(),
            resolved.points.len()
        );
        return EXIT_OK;
    }
    if let Err(e) = std::fs::create_dir_all(&resolved.out_dir) {
        eprintln!("error: cannot create {}: {e}", resolved.out_dir.display());
        return EXIT_CONFIG;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_CHECK;
        }
    };
    let config_echo = serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null);
    pool.install(|| execute(&resolved, config_echo))
}

fn execute(r: &Resolved, config_echo: serde_json::Value) -> i32 {
    let mut all_checks: Vec<Check> = Vec::new();
    let mut task_entries = serde_json::Map::new();
    for &task in &r.tasks {
        let name = task.name();
        match run_task(task, r) {
            Ok(res) => {
                let csv = r.out_dir.join(format!("{name}.csv"));
                let dat = r.out_dir.join(format!("{name}.dat"));
                let written = output::write(&csv, &output::render_csv(&res.table))
                    .and_then(|_| output::write(&dat, &output::render_dat(name, &res.plot)));
                if let Err(e) = written {
                    eprintln!("error: cannot write {}: {e}", r.out_dir.display());
                    return EXIT_CONFIG;
                }
                task_entries.insert(
                    name.into(),
                    json!({
                        "csv": format!("{name}.csv"),
                        "plot": format!("{name}.dat"),
                        "rows": res.table.rows.len(),
                        "checks": checks_json(&res.checks),
                    }),
                );
                all_checks.extend(res.checks);
            }
            Err(e) => {
                let c = Check {
                    name: format!("{name}.run"),
                    passed: false,
                    detail: e.to_string(),
                };
                task_entries.insert(name.into(), json!({ "error": e.to_string(), "checks": checks_json(std::slice::from_ref(&c)) }));
                all_checks.push(c);
            }
        }
    }
    let passed = all_checks.iter().all(|c| c.passed);
    let summary = json!({
        "program": "leakyguide",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": r.seed,
        "sweep": { "axis": r.axis.name(), "points": r.points },
        "tolerances": serde_json::to_value(r.numerics).unwrap_or(serde_json::Value::Null),
        "config": config_echo,
        "tasks": task_entries,
        "passed": passed,
    });
    let text = serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n";
    if let Err(e) = output::write(&r.out_dir.join("summary.json"), &text) {
        eprintln!("error: cannot write summary: {e}");
        return EXIT_CONFIG;
    }
    for c in &all_checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        println!("{mark} {}: {}", c.name, c.detail);
    }
    if passed {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn checks_json(checks: &[Check]) -> serde_json::Value {
    checks
        .iter()
        .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail }))
        .collect()
}
