//! Thin command-line front end over the library pipeline.

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use amber_sets::pipeline::{
    run_all, run_build, run_evaluate, run_generate, run_report, run_retrieve, PipelineConfig,
};
use amber_sets::report::ReportFormat;
use amber_sets::Result;

#[derive(Parser)]
#[command(
    name = "amber",
    version,
    about = "Compile entity-ambiguity benchmark sets and score retrievers on them"
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "pipeline.toml")]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build ambiguity sets from the knowledge graph and corpus.
    Build,
    /// Generate task queries from previously built sets.
    Generate,
    /// Rank the corpus for every query with the built-in retriever.
    Retrieve {
        /// Override the configured ranking cutoff.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Score a run and write per-collection reports.
    Evaluate {
        /// External run file (JSONL); defaults to the built-in rankings.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Override the configured ranking cutoff.
        #[arg(long)]
        k: Option<usize>,
        /// Fail when a query has no ranking instead of scoring a miss.
        #[arg(long)]
        strict: bool,
    },
    /// Render the stored per-collection reports.
    Report {
        /// Output format: table, csv, or json-lines.
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Run build, generate, retrieve, and evaluate, then print the table.
    All,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = PipelineConfig::load(&cli.config)?;
    match cli.command {
        Command::Build => {
            let summary = run_build(&config)?;
            for (name, counters) in &summary.collections {
                println!(
                    "{name}: {} sets from {} candidate groups, {} facts aligned",
                    counters.sets, counters.candidate_groups, counters.tuples_aligned
                );
            }
        }
        Command::Generate => {
            let summary = run_generate(&config)?;
            for (name, counters) in &summary.collections {
                println!(
                    "{name}: {} qa, {} sf, {} fc queries from {} facts",
                    counters.qa_queries, counters.sf_queries, counters.fc_queries,
                    counters.tuples
                );
            }
        }
        Command::Retrieve { k } => {
            if let Some(k) = k {
                config.k = k;
            }
            let summary = run_retrieve(&config)?;
            for (name, ranked) in &summary.collections {
                println!("{name}: ranked {ranked} queries at k = {}", config.k);
            }
        }
        Command::Evaluate { run, k, strict } => {
            if let Some(k) = k {
                config.k = k;
            }
            if strict {
                config.strict = true;
            }
            let summary = run_evaluate(&config, run.as_deref())?;
            for (name, report) in &summary.collections {
                println!("{name}: evaluated run {} at k = {}", report.run_id, report.k);
            }
        }
        Command::Report { format } => {
            let format: ReportFormat = format.parse()?;
            print!("{}", run_report(&config, format)?);
        }
        Command::All => {
            run_all(&config)?;
            print!("{}", run_report(&config, ReportFormat::Table)?);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        process::exit(err.exit_code());
    }
}
