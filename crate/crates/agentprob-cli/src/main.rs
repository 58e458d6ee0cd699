//! Command-line front end: evaluate, sample, compare, and optimize scenario
//! files. CSV goes to standard output, diagnostics to standard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use agentprob::{
    collab_cost, emit_report, estimate_goal_probability, exact_goal_probability, optimize_dof,
    parse_scenario, prefix_probabilities, serialize_scenario, Compiled, Error, ReportRow,
    ScenarioDoc, StrategyKind, REPORT_HEADER,
};

#[derive(Parser)]
#[command(
    name = "agentprob",
    version,
    about = "Exact and Monte Carlo goal probabilities for composed agent architectures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Fill the wall_time column (off by default so identical inputs give
    /// byte-identical output).
    #[arg(long, global = true)]
    timing: bool,
    /// Override the scenario's enumeration budget (leaf terms).
    #[arg(long, global = true)]
    enum_budget: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact goal probability of one scenario.
    Eval {
        scenario: PathBuf,
        /// Also print one row per goal prefix.
        #[arg(long)]
        prefixes: bool,
    },
    /// Monte Carlo estimate of the goal probability.
    Sample {
        scenario: PathBuf,
        /// Number of trajectories.
        #[arg(long)]
        n: u64,
        /// Master seed; every draw derives from it deterministically.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; the estimate is identical for any count.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Evaluate several scenarios that share one goal, one row each.
    Compare { scenarios: Vec<PathBuf> },
    /// Search the scenario's declared mutation domains under a strategy's
    /// degrees of freedom; log to stdout, best configuration to --out.
    Optimize {
        scenario: PathBuf,
        /// One of: ReAct, ComposableInference, DeepThinking, FineTuning,
        /// ControlFlow, MultiAgentNoCollab, MultiAgentCollab.
        #[arg(long)]
        strategy: String,
        /// Objective-evaluation budget; defaults to the scenario's.
        #[arg(long)]
        budget: Option<u64>,
        /// File to write the best configuration to.
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge CSV reports produced by the other subcommands.
    ReportMerge { reports: Vec<PathBuf> },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::BudgetExceeded { .. } => 3,
            Error::DofViolation { .. } => 4,
            Error::Io(_) => 1,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path, enum_budget: Option<u64>) -> Result<(ScenarioDoc, Compiled), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
    let doc = parse_scenario(&text)?;
    let mut compiled = doc.compile()?;
    if let Some(budget) = enum_budget {
        compiled.enumeration_budget = budget;
    }
    Ok((doc, compiled))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn eval_rows(
    query_id: &str,
    compiled: &Compiled,
    prefixes: bool,
    timing: bool,
) -> Result<Vec<ReportRow>, Failure> {
    let started = Instant::now();
    let p = exact_goal_probability(
        &compiled.system,
        &compiled.objective.goal,
        compiled.enumeration_budget,
    )?;
    let cost = collab_cost(&compiled.system.topology, &compiled.objective.cost_model);
    let mut row = ReportRow::new(query_id, "exact");
    row.probability = Some(p);
    row.cost = Some(cost);
    row.objective = Some(p - compiled.objective.lambda * cost);
    if timing {
        row.wall_time = Some(started.elapsed().as_secs_f64());
    }
    let mut rows = vec![row];
    if prefixes {
        let values = prefix_probabilities(
            &compiled.system,
            &compiled.objective.goal,
            compiled.enumeration_budget,
        )?;
        for (k, p) in values.iter().enumerate() {
            let mut row = ReportRow::new(format!("{query_id}:{}", k + 1), "prefix");
            row.probability = Some(*p);
            rows.push(row);
        }
    }
    Ok(rows)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eval { scenario, prefixes } => {
            let (_, compiled) = load(&scenario, cli.enum_budget)?;
            let rows = eval_rows(&stem(&scenario), &compiled, prefixes, cli.timing)?;
            print!("{}", emit_report(&rows));
            Ok(())
        }
        Command::Sample {
            scenario,
            n,
            seed,
            workers,
        } => {
            let (_, compiled) = load(&scenario, cli.enum_budget)?;
            let started = Instant::now();
            let est = estimate_goal_probability(
                &compiled.system,
                &compiled.objective.goal,
                n,
                seed,
                workers,
            )?;
            let mut row = ReportRow::new(stem(&scenario), "estimate");
            row.probability = Some(est.mean);
            row.stderr = Some(est.stderr);
            row.cost = Some(collab_cost(
                &compiled.system.topology,
                &compiled.objective.cost_model,
            ));
            if cli.timing {
                row.wall_time = Some(started.elapsed().as_secs_f64());
            }
            print!("{}", emit_report(&[row]));
            Ok(())
        }
        Command::Compare { scenarios } => {
            if scenarios.is_empty() {
                return Err(Failure::new(2, "compare needs at least one scenario"));
            }
            let mut loaded = Vec::new();
            for path in &scenarios {
                let (_, compiled) = load(path, cli.enum_budget)?;
                loaded.push((path, compiled));
            }
            let reference = &loaded[0].1.objective.goal;
            for (path, compiled) in &loaded[1..] {
                if compiled.objective.goal != *reference {
                    return Err(Failure::new(
                        2,
                        format!(
                            "{} does not share the goal of {}",
                            path.display(),
                            loaded[0].0.display()
                        ),
                    ));
                }
            }
            let mut rows = Vec::new();
            for (path, compiled) in &loaded {
                rows.extend(eval_rows(
                    &path.display().to_string(),
                    compiled,
                    false,
                    cli.timing,
                )?);
            }
            print!("{}", emit_report(&rows));
            Ok(())
        }
        Command::Optimize {
            scenario,
            strategy,
            budget,
            out,
        } => {
            let (doc, compiled) = load(&scenario, cli.enum_budget)?;
            let kind = StrategyKind::parse(&strategy)
                .ok_or_else(|| Failure::new(2, format!("unknown strategy {strategy:?}")))?;
            let budget = budget.unwrap_or(compiled.optimizer_budget);
            let outcome = optimize_dof(&doc, kind, budget)?;
            std::fs::write(&out, serialize_scenario(&outcome.doc))
                .map_err(|e| Failure::new(1, format!("{}: {e}", out.display())))?;
            let rows: Vec<ReportRow> = outcome
                .log
                .iter()
                .map(|c| {
                    let mut row = ReportRow::new(c.digest.clone(), "candidate");
                    row.probability = Some(c.probability);
                    row.cost = Some(c.cost);
                    row.objective = Some(c.objective);
                    row
                })
                .collect();
            print!("{}", emit_report(&rows));
            Ok(())
        }
        Command::ReportMerge { reports } => {
            if reports.is_empty() {
                return Err(Failure::new(2, "report-merge needs at least one report"));
            }
            let mut merged = String::from(REPORT_HEADER);
            merged.push('\n');
            for path in &reports {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
                let mut lines = text.lines();
                match lines.next() {
                    Some(header) if header == REPORT_HEADER => {}
                    _ => {
                        return Err(Failure::new(
                            2,
                            format!("{}: not a report (bad header)", path.display()),
                        ))
                    }
                }
                for line in lines {
                    merged.push_str(line);
                    merged.push('\n');
                }
            }
            print!("{merged}");
            Ok(())
        }
    }
}
