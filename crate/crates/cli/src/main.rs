mod args;
mod artifacts;
mod commands;

use clap::Parser;

use args::{Cli, Command};
use artifacts::CliResult;
use commands::Ctx;

fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Ctx { out: cli.out.clone() };
    match &cli.command {
        Command::Validate(a) => commands::validate(&ctx, a),
        Command::Ged(a) => commands::ged(&ctx, a),
        Command::Train(a) => commands::train_cmd(&ctx, a),
        Command::Embed(a) => commands::embed(&ctx, a),
        Command::Retrieve(a) => commands::retrieve(&ctx, a),
        Command::Explain(a) => commands::explain(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Aggregate(a) => commands::aggregate(&ctx, a),
        Command::Kernel(a) => commands::kernel(&ctx, a),
        Command::Star(a) => commands::star(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    if let Err(e) = run(&cli) {
        let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
        eprintln!("{msg}");
        std::process::exit(e.exit_code());
    }
}
