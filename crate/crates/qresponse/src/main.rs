use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use qresponse::io::{render_json, ArtifactDir};
use qresponse::{Command, ExperimentConfig, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Density,
    Response,
    Correlations,
    Variance,
    Annealed,
    Cone,
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Density => Command::Density,
            Cmd::Response => Command::Response,
            Cmd::Correlations => Command::Correlations,
            Cmd::Variance => Command::Variance,
            Cmd::Annealed => Command::Annealed,
            Cmd::Cone => Command::Cone,
            Cmd::Report => Command::Report,
        }
    }
}

/// Random expanding circle maps: densities, linear response, CLT variance
/// and cone diagnostics.
#[derive(Debug, Parser)]
#[command(name = "qresponse", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Artifacts go to `<out>/<config hash>/`.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "warn")]
    log_level: log::LevelFilter,
}

fn execute(cli: &Cli) -> Result<(), (RunError, Option<ArtifactDir>)> {
    let text =
        std::fs::read_to_string(&cli.config).map_err(|e| (RunError::io(&cli.config, e), None))?;
    let config = ExperimentConfig::from_json(&text).map_err(|e| (e, None))?;
    let hash = config.hash();
    let exp = config.validate().map_err(|e| (e, None))?;
    let dir = ArtifactDir::create(&cli.out, &hash).map_err(|e| (e, None))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| (RunError::Convergence(format!("thread pool: {e}")), None))?;
    log::info!("{} → {}", cli.command_name(), dir.path().display());
    pool.install(|| qresponse::runner::run(cli.command.into(), &exp, &dir))
        .map_err(|e| (e, Some(dir)))
}

impl Cli {
    fn command_name(&self) -> &'static str {
        Command::from(self.command).name()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    if cli.threads == Some(0) {
        let e = RunError::Config {
            field: String::from("--threads"),
            reason: String::from("must be at least 1"),
        };
        eprintln!(
            "{}",
            serde_json::to_string(&e.record()).expect("record serializes")
        );
        return ExitCode::from(e.exit_code() as u8);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, dir)) => {
            let record = e.record();
            eprintln!(
                "{}",
                serde_json::to_string(&record).expect("record serializes")
            );
            if let Some(dir) = dir {
                let _ = dir.write("error.json", &render_json(&record));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
