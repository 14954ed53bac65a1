mod args;
mod commands;
mod config;
mod fetch;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            anyhow::bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::BuildGraph(a) => commands::build_graph(a),
        Command::BuildCooc(a) => commands::build_cooc(a),
        Command::Louvain(a) => commands::louvain(a),
        Command::EmbedNr(a) => commands::embed_nr(a),
        Command::EmbedMf(a) => commands::embed_mf(a),
        Command::Eval(e) => commands::eval(e),
        Command::Probe(p) => commands::probe(p),
        Command::IntrusionGen(a) => commands::intrusion_gen(a),
        Command::IntrusionScore(a) => commands::intrusion_score(a),
        Command::FetchDatasets(a) => fetch::run(a),
    }
}

fn main() -> ExitCode {
    let args = match config::merge(&Cli::command(), std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
