use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fragalloc::policy::builtin_policy;
use fragalloc::rules::{parse_goal, query, FactBase};
use fragalloc::sim::{load_policy_file, run, Scenario};

#[derive(Parser)]
#[command(name = "fragalloc", version, about = "Rule-driven fragment allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-round metrics.
    Run(RunArgs),
    /// Check a scenario file and report problems.
    Validate { scenario: PathBuf },
    /// Print the initial fact base of a scenario.
    EmitFacts { scenario: PathBuf },
    /// Evaluate the scenario's policy over its facts and print matches of a goal.
    Query { scenario: PathBuf, goal: String },
    /// Print the rule text of a builtin policy.
    ExportPolicy { name: String },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Builtin policy overriding the scenario's.
    #[arg(long, conflicts_with = "policy_file")]
    policy: Option<String>,
    /// Rule file overriding the scenario's policy.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    /// Round count overriding the scenario's.
    #[arg(long)]
    rounds: Option<u64>,
    /// JSON-lines metrics destination; standard output if omitted.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Also write the metrics as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Trace synchronization, evaluation and transfers on standard error.
    #[arg(long)]
    trace: bool,
}

enum Failure {
    Input(String),
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => run_scenario(args),
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            println!(
                "ok: {} sites, {} fragments, {} workload entries, policy {}",
                s.sites().len(),
                s.fragments.len(),
                s.workload.len(),
                s.policy.name()
            );
            Ok(())
        }
        Command::EmitFacts { scenario } => {
            let s = load(&scenario)?;
            print_out(&s.emit_facts())
        }
        Command::Query { scenario, goal } => {
            let s = load(&scenario)?;
            let goal = parse_goal(&goal).map_err(|e| Failure::Input(format!("goal: {e}")))?;
            let base: FactBase = s.initial_facts().into_iter().collect();
            let result = query(s.policy.evaluation_program(), &base, &goal)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            if result.unknown_predicate {
                eprintln!("warning: unknown predicate {}", goal.predicate);
            }
            let mut out = String::new();
            for a in &result.answers {
                out.push_str(&a.fact.to_string());
                out.push('\n');
            }
            print_out(&out)
        }
        Command::ExportPolicy { name } => {
            let p = builtin_policy(&name).map_err(|e| Failure::Input(e.to_string()))?;
            print_out(&p.export_text())
        }
    }
}

fn run_scenario(args: RunArgs) -> Result<(), Failure> {
    if args.trace {
        env_logger::Builder::new()
            .filter_level(log::LevelFilter::Trace)
            .format_timestamp(None)
            .target(env_logger::Target::Stderr)
            .init();
    }
    let mut s = load(&args.scenario)?;
    if let Some(name) = &args.policy {
        s.policy = builtin_policy(name).map_err(|e| Failure::Input(e.to_string()))?;
    }
    if let Some(path) = &args.policy_file {
        s.policy = load_policy_file(path).map_err(|e| Failure::Input(e.to_string()))?;
    }
    if let Some(n) = args.rounds {
        if n == 0 {
            return Err(Failure::Input("--rounds must be at least 1".to_string()));
        }
        s.rounds = n;
    }
    let timeline = run(&s);
    match &args.metrics {
        Some(path) => write_file(path, |w| timeline.write_jsonl(w))?,
        None => timeline
            .write_jsonl(io::stdout().lock())
            .map_err(|e| Failure::Runtime(format!("writing metrics: {e}")))?,
    }
    if let Some(path) = &args.csv {
        write_file(path, |w| timeline.write_csv(w))?;
    }
    match timeline.failure {
        Some(msg) => Err(Failure::Runtime(msg)),
        None => Ok(()),
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), Failure> {
    let fail = |e: io::Error| Failure::Runtime(format!("writing {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(fail)?);
    write(&mut w).map_err(fail)?;
    w.flush().map_err(fail)
}

fn print_out(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| Failure::Runtime(format!("writing output: {e}")))
}
