use clap::Parser;
use kda_service::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())?;
    Ok(())
}
