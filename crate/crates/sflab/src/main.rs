use std::path::PathBuf;

use clap::Parser;

use sflab::cli::{execute, Experiment, Format, RunConfig};

/// Numerical laboratory for spectral flow, spectral shift functions, and
/// the index of d/dt + A(t) on finite-dimensional operator paths.
#[derive(Parser, Debug)]
#[command(name = "sflab", version, about)]
struct Args {
    /// JSON run configuration (flags below override its fields).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Experiment to run: flow, ssf, index, trace-check, pushnitski,
    /// doi-check, eta, chain.
    #[arg(long)]
    experiment: Option<String>,

    /// Report destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,

    /// Seed for randomized sweeps.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    // SFL_THREADS caps the parallelism of everything running on the global
    // rayon pool (interval certification, paired eigensolves).
    if let Ok(threads) = std::env::var("SFL_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("sflab: ignoring non-numeric SFL_THREADS={threads}");
        }
    }

    let args = Args::parse();

    let mut config = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match RunConfig::from_json(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("sflab: {e}");
                    std::process::exit(2);
                }
            },
            Err(e) => {
                eprintln!("sflab: cannot read {}: {e}", path.display());
                std::process::exit(2);
            }
        },
        None => RunConfig::from_json(r#"{ "experiment": "chain" }"#)
            .expect("default config is valid"),
    };

    if let Some(name) = &args.experiment {
        match name.parse::<Experiment>() {
            Ok(e) => config.experiment = e,
            Err(e) => {
                eprintln!("sflab: {e}");
                eprintln!(
                    "usage: sflab [--config PATH] [--experiment NAME] [--out PATH] [--format csv|json] [--seed U64]"
                );
                std::process::exit(2);
            }
        }
    }
    if let Some(out) = args.out {
        config.output = Some(out);
    }
    if let Some(fmt) = &args.format {
        config.format = fmt.parse::<Format>().expect("validated by clap");
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    std::process::exit(execute(&config));
}
