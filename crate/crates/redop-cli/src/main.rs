use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use redop_core::problem::parse_problem;
use redop_core::report::{emit_report, to_json, AnalysisReport, Command, Format};
use redop_core::run::{run_report, RunOptions};
use redop_core::singularity::ReducedXi;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    Analyze,
    Coorder,
    Detsys,
    Verify,
    Reduce,
    Bijection,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Analyze => Command::Analyze,
            CommandArg::Coorder => Command::Coorder,
            CommandArg::Detsys => Command::Detsys,
            CommandArg::Verify => Command::Verify,
            CommandArg::Reduce => Command::Reduce,
            CommandArg::Bijection => Command::Bijection,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum XiArg {
    #[value(name = "0")]
    Zero,
    #[value(name = "u")]
    U,
}

/// Singularity co-orders, determining equations and family
/// correspondences for reduction operators.
#[derive(Debug, Parser)]
#[command(name = "redop", version)]
struct Cli {
    command: CommandArg,
    /// Problem files; several files are processed in parallel.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    ansatz: Option<String>,
    #[arg(long, value_enum)]
    xi: Option<XiArg>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Exit status: 0 success, 1 verification failed, 2 input error,
/// 3 undecidable.
struct Outcome {
    report: Option<AnalysisReport>,
    message: Option<String>,
    code: u8,
}

fn process(path: &PathBuf, command: Command, opts: &RunOptions) -> Outcome {
    let fail = |code: u8, message: String| Outcome {
        report: None,
        message: Some(format!("{}: {message}", path.display())),
        code,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(2, e.to_string()),
    };
    let problem = match parse_problem(&text) {
        Ok(p) => p,
        Err(e) => return fail(2, e.to_string()),
    };
    match run_report(&problem, &[command], opts) {
        Ok(report) => Outcome {
            code: report.exit_code() as u8,
            report: Some(report),
            message: None,
        },
        Err(e) => fail(e.exit_code() as u8, e.to_string()),
    }
}

/// Input errors dominate, then failures, then undecidable verdicts.
fn severity(code: u8) -> u8 {
    match code {
        2 => 3,
        1 => 2,
        3 => 1,
        _ => 0,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let opts = RunOptions {
        field: cli.field,
        family: cli.family,
        ansatz: cli.ansatz,
        xi: cli.xi.map(|x| match x {
            XiArg::Zero => ReducedXi::Zero,
            XiArg::U => ReducedXi::U,
        }),
        samples: cli.samples,
        seed: cli.seed,
    };
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = cli
            .files
            .iter()
            .map(|path| {
                let opts = &opts;
                s.spawn(move || process(path, command, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let mut json_reports = Vec::new();
    for (path, outcome) in cli.files.iter().zip(&outcomes) {
        if let Some(msg) = &outcome.message {
            eprintln!("error: {msg}");
        }
        let Some(report) = &outcome.report else { continue };
        if cli.json {
            json_reports.push(report);
        } else {
            if cli.files.len() > 1 {
                println!("### {}", path.display());
            }
            print!("{}", emit_report(report, Format::Text));
        }
    }
    if cli.json {
        match json_reports.as_slice() {
            [one] => println!("{}", to_json(one)),
            many => {
                let values: Vec<serde_json::Value> = many
                    .iter()
                    .map(|r| serde_json::from_str(&to_json(r)).expect("report json is valid"))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&values).expect("values serialize"));
            }
        }
    }
    let code = outcomes
        .iter()
        .map(|o| o.code)
        .max_by_key(|c| severity(*c))
        .unwrap_or(0);
    ExitCode::from(code)
}
