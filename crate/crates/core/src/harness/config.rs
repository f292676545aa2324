//! Scenario files: TOML with lowercase snake-case keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::hamiltonians::{BuiltinHamiltonian, BuiltinKind, Hamiltonian, StructuralConstants};
use crate::initial_data::InitialDatum;
use crate::solver::GridSpec;

/// Names accepted in `checks`.
pub const CHECK_NAMES: &[&str] = &[
    "profiles",
    "lower_bound",
    "bound_table",
    "f_sweep",
    "characteristics",
    "initial_gap",
    "residual",
    "comparison",
    "convergence",
    "herglotz",
    "barrier",
    "domain_inclusion",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub checks: Vec<String>,
    pub hamiltonian: HamiltonianConfig,
    pub datum: DatumConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub characteristics: CharacteristicsConfig,
    #[serde(default)]
    pub convolution: ConvolutionConfig,
    #[serde(default)]
    pub herglotz: HerglotzConfig,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub kind: String,
    /// Eikonal speed.
    pub c: Option<f64>,
    /// Quadratic coefficient of `u`.
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub dimension: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub kind: String,
    pub param: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub x0: f64,
    pub r: f64,
    pub theta: Option<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            x0: 0.0,
            r: 1.0,
            theta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Oracle,
    Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub points: usize,
    pub tolerance: Option<f64>,
    pub profile_times: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Oracle,
            times: vec![0.1, 0.2, 0.3, 0.5],
            points: 41,
            tolerance: None,
            profile_times: Vec::new(),
        }
    }
}

impl VerifyConfig {
    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(match self.mode {
            Mode::Oracle => 1e-9,
            Mode::Scheme => 5e-2,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub samples: usize,
    pub horizon: Option<f64>,
    pub t0: Option<f64>,
    pub c1: Option<f64>,
    pub beta: Option<f64>,
    pub k3: Option<f64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            horizon: None,
            t0: None,
            c1: None,
            beta: None,
            k3: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacteristicsConfig {
    pub paths: usize,
    pub steps: usize,
    pub t: f64,
    pub seed: u64,
}

impl Default for CharacteristicsConfig {
    fn default() -> Self {
        Self {
            paths: 100,
            steps: 1000,
            t: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvolutionConfig {
    pub epsilons: Vec<f64>,
    pub cells: usize,
    pub levels: usize,
    pub t_end: f64,
}

impl Default for ConvolutionConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.05, 0.1, 0.2],
            cells: 1200,
            levels: 61,
            t_end: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HerglotzConfig {
    pub points: usize,
    pub t: f64,
    pub half_width: f64,
    pub nodes: usize,
    pub restarts: usize,
    pub random_curves: usize,
    pub seed: u64,
}

impl Default for HerglotzConfig {
    fn default() -> Self {
        Self {
            points: 21,
            t: 0.25,
            half_width: 0.5,
            nodes: 7,
            restarts: 4,
            random_curves: 100,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierConfig {
    /// `(A2, B2)` pairs; empty means the model's own constants.
    pub pairs: Vec<[f64; 2]>,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub constant_sets: usize,
    pub seed: u64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            epsilons: vec![0.05, 0.2],
            samples: 10_000,
            constant_sets: 20,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            plots: true,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: Self = value
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.model()?;
        self.initial_datum()?;
        if !(self.domain.r > 0.0) {
            return bad(format!("domain.r must be positive, got {}", self.domain.r));
        }
        if let Some(t) = self.domain.theta {
            if !(t > 0.0) {
                return bad(format!("domain.theta must be positive, got {t}"));
            }
        }
        self.grid
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        for c in &self.checks {
            if !CHECK_NAMES.contains(&c.as_str()) {
                return bad(format!("unknown check `{c}`"));
            }
        }
        if self.verify.points < 2 {
            return bad("verify.points must be at least 2".into());
        }
        if self
            .verify
            .times
            .iter()
            .chain(&self.verify.profile_times)
            .any(|t| !(*t >= 0.0))
        {
            return bad("verify times must be nonnegative".into());
        }
        if self.convolution.levels < 3
            || self.convolution.cells < 16
            || !(self.convolution.t_end > 0.0)
        {
            return bad("convolution needs levels >= 3, cells >= 16 and t_end > 0".into());
        }
        if self
            .convolution
            .epsilons
            .iter()
            .chain(&self.barrier.epsilons)
            .any(|e| !(*e > 0.0))
        {
            return bad("epsilons must be positive".into());
        }
        if !(self.herglotz.t > 0.0)
            || !(self.characteristics.t > 0.0)
            || self.characteristics.steps == 0
        {
            return bad(
                "herglotz.t, characteristics.t and characteristics.steps must be positive".into(),
            );
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<BuiltinKind, HarnessError> {
        let param = match self.hamiltonian.kind.as_str() {
            "eikonal" => self.hamiltonian.c,
            "quadratic" => self.hamiltonian.lambda,
            _ => None,
        };
        BuiltinKind::from_name(&self.hamiltonian.kind, param)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<BuiltinHamiltonian, HarnessError> {
        BuiltinHamiltonian::new(self.kind()?, self.hamiltonian.dimension)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn initial_datum(&self) -> Result<InitialDatum, HarnessError> {
        InitialDatum::from_name(
            &self.datum.kind,
            self.hamiltonian.dimension,
            self.datum.param,
        )
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn x0(&self) -> Vec<f64> {
        let mut x0 = vec![0.0; self.hamiltonian.dimension];
        x0[0] = self.domain.x0;
        x0
    }

    /// The model's constants with any `[bounds]` overrides applied.
    pub fn bound_constants(&self) -> Result<StructuralConstants, HarnessError> {
        let mut c = self.model()?.constants();
        if let Some(v) = self.bounds.c1 {
            c.c1 = v;
        }
        if let Some(v) = self.bounds.beta {
            c.beta = v;
        }
        if let Some(v) = self.bounds.k3 {
            c.k3 = v;
        }
        c.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(c)
    }
}

/// Sets the dotted `key` of `key=value`; the value is read as TOML and falls
/// back to a bare string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), HarnessError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{spec}` is not key=value")))?;
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| {
            HarnessError::Config(format!("override `{key}`: `{part}` is not inside a table"))
        })?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(HarnessError::Config(format!(
        "empty override key in `{spec}`"
    )))
}
