use clap::Parser;

use lattice_rewrite::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr();
    if let Err(err) = run(&cli, &mut stdout, &mut stderr) {
        eprintln!("error: {err}");
        std::process::exit(err.code);
    }
}
