use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use factgen::config::RunConfig;
use factgen::pipeline::{
    cmd_coverage, cmd_eval, cmd_eval_single, cmd_ingest, cmd_rag_answer, cmd_rag_index, cmd_report,
    cmd_synth, make_gateway, PipelineError,
};

/// Dataset factory and evaluation harness for knowledge-injection
/// fine-tuning experiments.
#[derive(Parser)]
#[command(name = "factgen", version)]
struct Cli {
    /// Path to the run configuration file (TOML).
    #[arg(long, global = true, default_value = "factgen.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch or load source articles and persist the cleaned corpus.
    Ingest {
        /// MediaWiki API endpoint; bundled fixtures are used when omitted.
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Generate token- and fact-scaled datasets, eval sets, and exports.
    Synth {
        /// Triage decisions for skipped facts (fact_id<TAB>filter|regenerate).
        #[arg(long)]
        decisions: Option<PathBuf>,
    },
    /// Embed facts and questions and compute fact-coverage reports.
    Coverage,
    /// Retrieval-augmented generation over the corpus.
    Rag {
        #[command(subcommand)]
        command: RagCommand,
    },
    /// Grade answer sources against evaluation sets.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Render tables and figures from persisted artifacts.
    Report,
}

#[derive(Subcommand)]
enum RagCommand {
    /// Build and persist the hybrid retrieval index per document.
    Index,
    /// Answer one question against a document's persisted index.
    Answer {
        #[arg(long)]
        doc: String,
        question: String,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Run the grading protocol over eval sets.
    Run {
        /// Answer source: endpoint, rag, or fixture:<path>.
        #[arg(long)]
        source: String,
        /// Evaluate a single eval-set manifest instead of every document.
        #[arg(long)]
        eval_set: Option<PathBuf>,
        /// Output directory for a single-manifest run.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let config = RunConfig::load(&cli.config).map_err(|e| PipelineError::Stage {
        stage: "config".into(),
        detail: e.to_string(),
    })?;
    match cli.command {
        Command::Ingest { endpoint } => cmd_ingest(&config, endpoint.as_deref()),
        Command::Synth { decisions } => {
            let gateway = make_gateway(&config)?;
            cmd_synth(&config, &gateway, decisions.as_deref())
        }
        Command::Coverage => {
            let gateway = make_gateway(&config)?;
            cmd_coverage(&config, &gateway)
        }
        Command::Rag { command } => {
            let gateway = make_gateway(&config)?;
            match command {
                RagCommand::Index => cmd_rag_index(&config, &gateway),
                RagCommand::Answer { doc, question } => {
                    let answer = cmd_rag_answer(&config, &gateway, &doc, &question)?;
                    println!("{answer}");
                    Ok(())
                }
            }
        }
        Command::Eval { command } => {
            let gateway = make_gateway(&config)?;
            match command {
                EvalCommand::Run {
                    source,
                    eval_set,
                    out,
                } => match eval_set {
                    Some(path) => {
                        let (run_id, report) =
                            cmd_eval_single(&config, &gateway, &path, &source, out.as_deref())?;
                        println!(
                            "{run_id}: accuracy {:.3} [{:.3}, {:.3}] n={}",
                            report.accuracy, report.wilson_95.0, report.wilson_95.1, report.n
                        );
                        Ok(())
                    }
                    None => {
                        for (run_id, report) in cmd_eval(&config, &gateway, &source)? {
                            println!(
                                "{run_id}: accuracy {:.3} [{:.3}, {:.3}] n={}",
                                report.accuracy, report.wilson_95.0, report.wilson_95.1, report.n
                            );
                        }
                        Ok(())
                    }
                },
            }
        }
        Command::Report => cmd_report(&config),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let config_error = matches!(
                &err,
                PipelineError::Stage { stage, .. } if stage == "config"
            );
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
