use clap::Parser;

use ddsnn::cli::{execute, workers_from_env, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = workers_from_env() {
        // Only fails if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::process::exit(execute(cli));
}
