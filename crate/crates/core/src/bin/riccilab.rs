use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riccilab::config::ScenarioConfig;
use riccilab::drivers;
use riccilab::Error;

/// Ricci flow with boundary via doubling and the DeTurck gauge.
#[derive(Parser)]
#[command(name = "riccilab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Resolution override.
    #[arg(long)]
    resolution_override: Option<usize>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write diagnostics, checkpoints and the final state.
    Run(Common),
    /// Run the configured parameter study and check its thresholds.
    Study(Common),
    /// Report cone margins, boundary classification and parabolicity of a field file.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print version, supported domains, presets and constants.
    Info,
}

fn load(c: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = c.resolution_override {
        cfg = cfg.with_resolution(r);
    }
    if let Some(o) = &c.out {
        cfg.output.dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("riccilab-out"))
}

fn execute(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = drivers::run(&cfg)?;
            let dir = out_dir(&cfg);
            drivers::write_run(&dir, &cfg, &out)?;
            if !c.quiet {
                eprintln!("wrote {} rows to {}", out.rows.len(), dir.display());
            }
            match out.failure {
                Some(e) => Err(e),
                None => Ok(0),
            }
        }
        Command::Study(c) => {
            let cfg = load(&c)?;
            let rep = drivers::study(&cfg)?;
            let dir = out_dir(&cfg);
            std::fs::create_dir_all(&dir)?;
            let text = rep.to_text();
            std::fs::write(dir.join("study.txt"), &text)?;
            let json = serde_json::to_string_pretty(&rep).map_err(|e| Error::Format(e.to_string()))?;
            std::fs::write(dir.join("study.json"), json)?;
            if !c.quiet {
                print!("{text}");
            }
            Ok(if rep.passed() { 0 } else { 3 })
        }
        Command::Check { file, seed } => {
            print!("{}", drivers::check(&file, seed)?);
            Ok(0)
        }
        Command::Info => {
            print!("{}", drivers::info());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
