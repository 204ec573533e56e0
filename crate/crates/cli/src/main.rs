use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaugeks_cli::ledger::{self, Record, Status};
use gaugeks_cli::runner::{run_tasks, RunOptions, RunOutcome, DEFAULT_TRIALS};
use gaugeks_cli::spec::{parse_spec, ProblemSpec, TaskSpec};
use gaugeks_cli::suites::{run_suite, summarize, Suite};
use gaugeks_core::literal::parse_set;

/// Kurzweil-Stieltjes integration runs and verification suites.
#[derive(Parser)]
#[command(name = "gaugeks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Ledger file; defaults to `$GAUGEKS_LEDGER_DIR/<run>.jsonl`, else stdout.
    #[arg(long, global = true)]
    ledger: Option<PathBuf>,
    /// Stop at the first failing or erroring task.
    #[arg(long, global = true)]
    fail_fast: bool,
    /// Run independent tasks and trials concurrently.
    #[arg(long, global = true)]
    parallel: bool,
    /// Record wall time per task (ledgers stop being reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one task of a spec document.
    Integrate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        task: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run every task of a spec document.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the harnack tasks of a spec document.
    Harnack {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite: one record per trial, then a summary.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Print the minimal decomposition of a set literal.
    Decompose {
        #[arg(long)]
        set: String,
    },
}

fn load(path: &Path) -> Result<ProblemSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_spec(&text).map_err(|e| format!("{}:{e}", path.display()))
}

fn options(c: &Common) -> RunOptions {
    RunOptions { fail_fast: c.fail_fast, parallel: c.parallel, timing: c.timing, ..Default::default() }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "spec".into(), |s| s.to_string_lossy().into_owned())
}

fn emit(records: &[Record], common: &Common, name: &str) -> Result<(), String> {
    match ledger::destination(common.ledger.as_deref(), name) {
        Some(path) => {
            ledger::write_file(&path, records).map_err(|e| format!("{}: {e}", path.display()))?;
            let failed = records.iter().filter(|r| matches!(r.status, Status::Fail | Status::Error)).count();
            eprintln!("{} records ({failed} failed or errored) -> {}", records.len(), path.display());
            Ok(())
        }
        None => ledger::write_lines(&mut io::stdout().lock(), records).map_err(|e| e.to_string()),
    }
}

fn finish(out: RunOutcome, common: &Common, name: &str) -> Result<ExitCode, String> {
    emit(&out.records, common, name)?;
    Ok(ExitCode::from(out.exit_code() as u8))
}

fn main_inner(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Integrate { spec, task, common } => {
            let problem = load(&spec)?;
            let chosen: Vec<_> = problem.tasks.iter().filter(|t| t.name == task).cloned().collect();
            if chosen.is_empty() {
                return Err(format!("no task named {task:?} in {}", spec.display()));
            }
            let out = run_tasks(&problem, &chosen, &options(&common));
            finish(out, &common, &format!("{}-{task}", stem(&spec)))
        }
        Command::Run { spec, common } => {
            let problem = load(&spec)?;
            let out = run_tasks(&problem, &problem.tasks, &options(&common));
            finish(out, &common, &stem(&spec))
        }
        Command::Harnack { spec, terms, tol, common } => {
            let problem = load(&spec)?;
            let chosen: Vec<_> = problem.tasks.iter().filter(|t| matches!(t.spec, TaskSpec::Harnack { .. })).cloned().collect();
            let opts = RunOptions { terms, tol, ..options(&common) };
            finish(run_tasks(&problem, &chosen, &opts), &common, &format!("{}-harnack", stem(&spec)))
        }
        Command::Verify { suite, trials, seed, common } => {
            let suites = Suite::select(&suite).ok_or_else(|| format!("unknown suite {suite:?}"))?;
            let mut records = Vec::new();
            let mut failed = false;
            for s in suites {
                let trials = run_suite(s, trials, seed, common.parallel);
                let summary = summarize(s.name(), seed, &trials);
                failed |= summary.status != Status::Pass;
                eprintln!("{:<20} {}", s.name(), if summary.status == Status::Pass { "pass" } else { "FAIL" });
                let stop = common.fail_fast && summary.status != Status::Pass;
                records.extend(trials);
                records.push(summary);
                if stop {
                    break;
                }
            }
            emit(&records, &common, &format!("verify-{suite}-seed{seed}"))?;
            Ok(ExitCode::from(u8::from(failed)))
        }
        Command::Decompose { set } => {
            let s = parse_set(&set).map_err(|e| e.to_string())?;
            let comps: Vec<String> = s.components().iter().map(ToString::to_string).collect();
            let line = serde_json::json!({ "set": s.to_string(), "components": comps, "count": comps.len() });
            writeln!(io::stdout(), "{line}").map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("gaugeks: {msg}");
            ExitCode::from(2)
        }
    }
}
