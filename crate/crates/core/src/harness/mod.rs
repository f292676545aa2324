//! Scenario-driven verification: runs the solver, oracles, bounds,
//! characteristics, convolutions and Herglotz minimisation on a configured
//! example and writes CSV tables and SVG plots.

pub mod checks;
pub mod config;
pub mod report;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use checks::{
    check_barrier, verify_comparison, verify_lower_bound, BarrierReport, ComparisonPoint,
    ComparisonReport, VerificationRow,
};
pub use config::{Mode, ScenarioConfig, CHECK_NAMES};
pub use report::{Plot, Table};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("no positive lower bound on initial gradients over the ball")]
    ThetaUnavailable,
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub summary: String,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
}

impl CheckOutcome {
    fn with(name: &str, status: CheckStatus, summary: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status,
            summary: summary.into(),
            tables: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn passed(name: &str, summary: impl Into<String>) -> Self {
        Self::with(name, CheckStatus::Pass, summary)
    }

    pub fn failed(name: &str, summary: impl Into<String>) -> Self {
        Self::with(name, CheckStatus::Fail, summary)
    }

    pub fn skipped(name: &str, summary: impl Into<String>) -> Self {
        Self::with(name, CheckStatus::Skipped, summary)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn run_check(name: &str, config: &ScenarioConfig) -> Result<CheckOutcome, HarnessError> {
    match name {
        "profiles" => checks::profiles(config),
        "lower_bound" => checks::lower_bound(config),
        "bound_table" => checks::bound_table(config),
        "f_sweep" => checks::f_sweep(config),
        "characteristics" => checks::characteristics(config),
        "initial_gap" => checks::initial_gap(config),
        "residual" => checks::residual(config),
        "comparison" => checks::comparison(config),
        "convergence" => checks::convergence(config),
        "herglotz" => checks::herglotz(config),
        "barrier" => checks::barrier(config),
        "domain_inclusion" => checks::domain_inclusion(config),
        other => Err(HarnessError::Config(format!("unknown check `{other}`"))),
    }
}

/// The checks behind each CLI subcommand; `verify` runs the config's list.
pub fn checks_for_command(
    command: &str,
    config: &ScenarioConfig,
) -> Result<Vec<String>, HarnessError> {
    let fixed: &[&str] = match command {
        "solve" => &["profiles"],
        "chars" => &["characteristics"],
        "bounds" => &["bound_table"],
        "convolve" => &["initial_gap", "residual", "comparison"],
        "herglotz" => &["herglotz"],
        "verify" => {
            if config.checks.is_empty() {
                return Err(HarnessError::Config("the config lists no checks".into()));
            }
            return Ok(config.checks.clone());
        }
        other => return Err(HarnessError::Config(format!("unknown command `{other}`"))),
    };
    Ok(fixed.iter().map(|s| s.to_string()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub outcomes: Vec<CheckOutcome>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.status != CheckStatus::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn outcome(&self, name: &str) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new("summary", &["check", "status", "detail"]);
        for o in &self.outcomes {
            t.push(vec![
                o.name.clone(),
                o.status.to_string(),
                o.summary.replace(',', ";"),
            ]);
        }
        t
    }
}

/// Runs `checks` in order.
pub fn run_checks(
    config: &ScenarioConfig,
    checks: &[String],
) -> Result<ScenarioReport, HarnessError> {
    if checks.is_empty() {
        return Err(HarnessError::Config("no checks requested".into()));
    }
    let mut outcomes = Vec::with_capacity(checks.len());
    for c in checks {
        outcomes.push(run_check(c, config)?);
    }
    Ok(ScenarioReport {
        name: config.name.clone(),
        outcomes,
    })
}

/// Writes every table as `<table>.csv`, plots as `<plot>.svg` (unless
/// disabled) and `summary.csv`. Returns the written paths in order.
pub fn write_artifacts(
    report: &ScenarioReport,
    dir: &Path,
    plots: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for o in &report.outcomes {
        for t in &o.tables {
            put(format!("{}.csv", t.name), t.to_csv())?;
        }
        if plots {
            for p in &o.plots {
                put(format!("{}.svg", p.name), p.to_svg())?;
            }
        }
    }
    put("summary.csv".into(), report.summary_table().to_csv())?;
    Ok(written)
}

/// Config, checks, artifacts: the whole CLI pipeline minus argument parsing.
pub fn run_scenario(
    command: &str,
    config: &ScenarioConfig,
    out_dir: Option<&Path>,
) -> Result<ScenarioReport, HarnessError> {
    let checks = checks_for_command(command, config)?;
    let report = run_checks(config, &checks)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("hjlb-out").join(&config.name));
    write_artifacts(&report, &dir, config.output.plots)?;
    Ok(report)
}

/// Scenario files shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "fig-transport",
        include_str!("../../scenarios/fig-transport.toml"),
    ),
    (
        "thm52-grid",
        include_str!("../../scenarios/thm52-grid.toml"),
    ),
    (
        "transport-tight",
        include_str!("../../scenarios/transport-tight.toml"),
    ),
    (
        "transport-slack",
        include_str!("../../scenarios/transport-slack.toml"),
    ),
    (
        "transport-negu",
        include_str!("../../scenarios/transport-negu.toml"),
    ),
    (
        "eikonal-tight",
        include_str!("../../scenarios/eikonal-tight.toml"),
    ),
    (
        "quadratic-herglotz",
        include_str!("../../scenarios/quadratic-herglotz.toml"),
    ),
    (
        "scheme-transport",
        include_str!("../../scenarios/scheme-transport.toml"),
    ),
    (
        "barrier-domains",
        include_str!("../../scenarios/barrier-domains.toml"),
    ),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
