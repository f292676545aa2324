use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use hjlb::harness::{bundled, run_scenario, HarnessError, ScenarioConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Solve,
    Chars,
    Bounds,
    Convolve,
    Herglotz,
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Chars => "chars",
            Self::Bounds => "bounds",
            Self::Convolve => "convolve",
            Self::Herglotz => "herglotz",
            Self::Verify => "verify",
        }
    }
}

/// Gradient lower bounds for Hamilton-Jacobi equations: scenario runner.
#[derive(Debug, Parser)]
#[command(name = "hjlb", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file, or `bundled:NAME` for a scenario shipped with the crate.
    #[arg(long)]
    config: String,
    /// Output directory (default: output.dir from the config, else hjlb-out/NAME).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted key=value replacing a config entry; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, HarnessError> {
    match cli.config.strip_prefix("bundled:") {
        Some(name) => {
            let text = bundled(name)
                .ok_or_else(|| HarnessError::Config(format!("no bundled scenario `{name}`")))?;
            ScenarioConfig::parse(text, &cli.overrides)
        }
        None => ScenarioConfig::load(cli.config.as_ref(), &cli.overrides),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result =
        load(&cli).and_then(|config| run_scenario(cli.command.name(), &config, cli.out.as_deref()));
    match result {
        Ok(report) => {
            for o in &report.outcomes {
                println!("{:<18} {:<8} {}", o.name, o.status, o.summary);
            }
            println!(
                "{}: {}",
                report.name,
                if report.passed() { "pass" } else { "FAIL" }
            );
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("hjlb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
