mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{describe, evaluate, ontology, pathways, pipeline, sample, similarity, split};
use error::{CliResult, EXIT_USAGE};

/// Cell metadata to text descriptions: ontology similarity, pathway scoring,
/// cohort sampling and evaluation.
#[derive(Parser, Debug)]
#[command(name = "celldesc", version)]
struct Cli {
    /// TOML or JSON run file whose settings override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Ontology(ontology::OntologyArgs),
    Similarity(similarity::SimilarityArgs),
    Pathways(pathways::PathwaysArgs),
    Sample(sample::SampleArgs),
    Split(split::SplitArgs),
    Describe(describe::DescribeArgs),
    Evaluate(evaluate::EvaluateArgs),
    Pipeline(pipeline::PipelineArgs),
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Ontology(a) => ontology::run(config::apply(a, file, "ontology")?),
        Command::Similarity(a) => similarity::run(config::apply(a, file, "similarity")?),
        Command::Pathways(a) => pathways::run(config::apply(a, file, "pathways")?),
        Command::Sample(a) => sample::run(config::apply(a, file, "sample")?),
        Command::Split(a) => split::run(config::apply(a, file, "split")?),
        Command::Describe(a) => describe::run(config::apply(a, file, "describe")?),
        Command::Evaluate(a) => evaluate::run(config::apply(a, file, "evaluate")?),
        Command::Pipeline(a) => pipeline::run(config::apply(a, file, "pipeline")?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::Cli;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
