//! Command-line driver: check, compile, run and explain contracts.

use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use decon::backend::{emit, EmitOptions};
use decon::ir::{dump, CompiledContract};
use decon::provenance::{explain, parse_fact, record_mode, render_dot, render_json, render_text};
use decon::runtime::{parse_script, run_script, ExecOptions, Outcome, RunSettings, ScriptRun};
use decon::{compile_source, CompileError};

#[derive(Parser)]
#[command(name = "decon", version, about = "Compile and run declarative smart contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a contract.
    Check {
        file: PathBuf,
        /// Print diagnostics as JSON lines.
        #[arg(long)]
        json: bool,
    },
    /// Emit Solidity, or the lowered update functions with --emit-ir.
    Compile {
        file: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        /// Omit the end-of-transaction violation check.
        #[arg(long)]
        no_instrument: bool,
        #[arg(long)]
        provenance_events: bool,
        #[arg(long, default_value = "^0.8.0")]
        pragma: String,
        /// Contract name; defaults to the file name.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        emit_ir: bool,
    },
    /// Deploy a contract and run a transaction script.
    Run {
        file: PathBuf,
        script: PathBuf,
        #[arg(long)]
        provenance: bool,
        /// Compare with the reference evaluator after every commit.
        #[arg(long)]
        oracle_check: bool,
        #[arg(long)]
        receipts_out: Option<PathBuf>,
        /// Print receipts as JSON lines.
        #[arg(long)]
        json: bool,
        /// Commit transactions even when a violation relation is nonempty.
        #[arg(long)]
        no_violation_check: bool,
    },
    /// Run a script with provenance and print the derivation of a tuple.
    Explain {
        file: PathBuf,
        script: PathBuf,
        #[arg(long)]
        tuple: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
    Text,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn color() -> bool {
    std::env::var("DECON_COLOR").map_or(true, |v| v != "0") && std::io::stderr().is_terminal()
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CompiledContract, Failure> {
    compile_source(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn run(path: &Path, script: &Path, settings: RunSettings, contract: Option<CompiledContract>) -> Result<ScriptRun, Failure> {
    let contract = match contract {
        Some(c) => c,
        None => load(path)?,
    };
    let script = parse_script(&contract.model, &read(script)?)?;
    Ok(run_script(&contract, &script, settings)?)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { file, json } => {
            let src = read(&file)?;
            let result = compile_source(&src);
            let diagnostics: Vec<serde_json::Value> = match &result {
                Ok(c) => c.model.warnings.iter().map(|d| d.to_json()).collect(),
                Err(CompileError::Analysis(errs)) => errs.0.iter().map(|d| d.to_json()).collect(),
                Err(CompileError::Parse(e)) => vec![json!({
                    "severity": "error",
                    "site": format!("{}:{}", e.line, e.column),
                    "code": "ParseError",
                    "message": e.kind.to_string(),
                })],
                Err(e) => vec![json!({"severity": "error", "site": "", "code": "Internal", "message": e.to_string()})],
            };
            if json {
                for d in &diagnostics {
                    println!("{d}");
                }
            } else {
                match &result {
                    Ok(c) => {
                        for w in &c.model.warnings {
                            eprintln!("{w}");
                        }
                        println!("{}: ok", file.display());
                    }
                    Err(e) => eprintln!("{e}"),
                }
            }
            result.map(|_| ()).map_err(|_| Failure(String::new()))
        }
        Command::Compile { file, output, no_instrument, provenance_events, pragma, name, emit_ir } => {
            let contract = load(&file)?;
            let text = if emit_ir {
                dump(&contract)
            } else {
                let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("Contract");
                let default_name: String = stem
                    .split(|c: char| !c.is_ascii_alphanumeric())
                    .filter(|p| !p.is_empty())
                    .map(|p| {
                        let mut cs = p.chars();
                        cs.next().map(|f| f.to_ascii_uppercase().to_string() + cs.as_str()).unwrap_or_default()
                    })
                    .collect();
                let options = EmitOptions {
                    instrument_violations: !no_instrument,
                    emit_provenance_events: provenance_events,
                    pragma,
                    contract_name: name.unwrap_or(default_name),
                };
                emit(&contract, &options)?.source
            };
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| Failure(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Run { file, script, provenance, oracle_check, receipts_out, json, no_violation_check } => {
            let options = ExecOptions { provenance, check_violations: !no_violation_check, ..Default::default() };
            let run = run(&file, &script, RunSettings { options, oracle_check }, None)?;
            if let Some(p) = receipts_out {
                std::fs::write(&p, run.receipts_json_lines()).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
            }
            if json {
                print!("{}", run.receipts_json_lines());
            } else {
                for r in &run.receipts {
                    let mut line = format!("#{} {} {}", r.index, r.transaction, r.outcome.name());
                    if let Outcome::Reverted(reason) = &r.outcome {
                        line.push_str(&format!(": {reason}"));
                    }
                    for (to, amount) in &r.sends {
                        line.push_str(&format!(" send({to},{amount})"));
                    }
                    println!("{line}");
                }
            }
            if provenance {
                for e in &run.executor.provenance().events {
                    eprintln!("{}", e.to_json());
                }
            }
            run.check()?;
            Ok(())
        }
        Command::Explain { file, script, tuple, format } => {
            let contract = record_mode(&load(&file)?);
            let fact = parse_fact(&contract.model, &tuple)?;
            let run = run(&file, &script, RunSettings::default(), Some(contract))?;
            let tree = explain(run.executor.provenance(), &fact)?;
            match format {
                Format::Dot => print!("{}", render_dot(&tree)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&render_json(&tree))?),
                Format::Text => print!("{}", render_text(&tree)),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            if !msg.is_empty() {
                if color() {
                    eprintln!("\x1b[31merror\x1b[0m: {msg}");
                } else {
                    eprintln!("error: {msg}");
                }
            }
            ExitCode::from(1)
        }
    }
}
