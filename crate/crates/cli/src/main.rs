mod analyze;
mod common;
mod diff;
mod evaluate;
mod generate;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "text2table", version, about = "Generate and evaluate tables extracted from text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a generation strategy over a corpus.
    Generate(generate::GenerateArgs),
    /// Score predictions against gold tables.
    Evaluate(evaluate::EvaluateArgs),
    /// Align predictions onto gold schemas and count structural errors.
    Analyze(analyze::AnalyzeArgs),
    /// Compare two versions of a table corpus.
    Diff(diff::DiffArgs),
    /// Render evaluation and analysis outputs as Markdown.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Diff(a) => diff::run(a),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<common::ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
