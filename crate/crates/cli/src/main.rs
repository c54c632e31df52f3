//! Batch front door: `fracp <command> <config> [--out-dir DIR]`.
//!
//! Exit codes: 0 success, 1 input error, 2 hypothesis-check failure (the
//! certificate is still written, with fail flags).

mod config;
mod pipeline;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use config::Config;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Build the mesh and quadrature table, dump diagnostics
    Assemble,
    /// Estimate the embedding constants
    Constants,
    /// Check the hypotheses and compute the admissible λ-interval
    Certify,
    /// Search for distinct critical points at a fixed or certified λ
    Solve,
    /// Constants → certificate → solve on the built-in reference instance
    Example31,
}

#[derive(Parser, Debug)]
#[command(name = "fracp", about = "Nonlocal Neumann eigenvalue toolkit", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat key-value config file (see README for the schema)
    config: PathBuf,
    /// Overrides the config's out.dir
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let cfg = match Config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let out = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.string("out.dir", "reports")));
    let result = match cli.command {
        Command::Assemble => pipeline::cmd_assemble(&cfg, &out),
        Command::Constants => pipeline::cmd_constants(&cfg, &out),
        Command::Certify => pipeline::cmd_certify(&cfg, &out),
        Command::Solve => pipeline::cmd_solve(&cfg, &out),
        Command::Example31 => pipeline::cmd_example31(&cfg, &out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            1
        }
    }
}
