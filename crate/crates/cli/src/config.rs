//! JSON experiment configuration.

use std::path::PathBuf;

use mbent_core::dynamics::{TimeGrid, TrajectoryConfig};
use mbent_core::operators::SpecDocument;
use mbent_core::rdm::EntropyKind;
use mbent_core::symmetry::ChargePartition;
use mbent_core::{build_hubbard, build_syk, HamiltonianSpec, InitialState, LatticeSpec};
use serde::{Deserialize, Serialize};

use crate::seeds::derive_seed;
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GsSweep,
    Dynamics,
    Ensemble,
    TheoremCheck,
    Bounds,
    RefinedBounds,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GsSweep => "gs-sweep",
            ExperimentKind::Dynamics => "dynamics",
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::TheoremCheck => "theorem-check",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::RefinedBounds => "refined-bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Syk {
        #[serde(rename = "D")]
        d: usize,
        #[serde(default)]
        lambda1: f64,
        #[serde(default)]
        lambda2: f64,
        #[serde(default)]
        lambda3: f64,
    },
    Hubbard {
        lattice: LatticeSpec,
        u: f64,
        /// Overrides `lattice.zeeman`. Ground-state sweeps default to
        /// `1e-3·τ` to select a definite `S_z` ground state.
        #[serde(default)]
        zeeman: Option<f64>,
    },
    /// A fully specified Hamiltonian document.
    Spec { spec: SpecDocument },
}

pub const SWEEP_PARAMETERS: [&str; 7] = ["lambda1", "lambda2", "lambda3", "u", "tau", "tau_prime", "zeeman"];

impl ModelConfig {
    pub fn orbitals(&self) -> usize {
        match self {
            ModelConfig::Syk { d, .. } => *d,
            ModelConfig::Hubbard { lattice, .. } => 2 * lattice.sites(),
            ModelConfig::Spec { spec } => spec.d,
        }
    }

    /// Whether `name` is a parameter of this model.
    pub fn has_parameter(&self, name: &str) -> bool {
        match self {
            ModelConfig::Syk { .. } => matches!(name, "lambda1" | "lambda2" | "lambda3"),
            ModelConfig::Hubbard { .. } => matches!(name, "u" | "tau" | "tau_prime" | "zeeman"),
            ModelConfig::Spec { .. } => false,
        }
    }

    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        match &mut out {
            ModelConfig::Syk {
                lambda1,
                lambda2,
                lambda3,
                ..
            } => match name {
                "lambda1" => *lambda1 = value,
                "lambda2" => *lambda2 = value,
                "lambda3" => *lambda3 = value,
                _ => return Err(ConfigError::new(format!("SYK model has no parameter {name:?}"))),
            },
            ModelConfig::Hubbard { lattice, u, zeeman } => match name {
                "u" => *u = value,
                "tau" => lattice.tau = value,
                "tau_prime" => lattice.tau_prime = value,
                "zeeman" => *zeeman = Some(value),
                _ => return Err(ConfigError::new(format!("Hubbard model has no parameter {name:?}"))),
            },
            ModelConfig::Spec { .. } => return Err(ConfigError::new("an explicit spec has no sweepable parameters")),
        }
        Ok(out)
    }

    /// Largest coupling strength, the unit of inverse time.
    pub fn dominant_scale(&self) -> f64 {
        match self {
            ModelConfig::Syk {
                lambda1,
                lambda2,
                lambda3,
                ..
            } => lambda1.abs().max(lambda2.abs()).max(lambda3.abs()),
            ModelConfig::Hubbard { lattice, u, .. } => lattice.tau.abs().max(lattice.tau_prime.abs()).max(u.abs()),
            ModelConfig::Spec { spec } => spec.terms.iter().map(|t| t.lambda.abs()).fold(0.0, f64::max),
        }
    }

    /// Builds the Hamiltonian. SYK orders draw their tensors from seeds
    /// derived from `member_seed`; `pin_field` is the Zeeman default for a
    /// Hubbard model without an explicit field.
    pub fn build(&self, member_seed: u64, pin_field: bool) -> mbent_core::Result<HamiltonianSpec> {
        match self {
            ModelConfig::Syk {
                d,
                lambda1,
                lambda2,
                lambda3,
            } => build_syk(
                *d,
                *lambda1,
                *lambda2,
                *lambda3,
                [1, 2, 3].map(|k| derive_seed(member_seed, k)),
            ),
            ModelConfig::Hubbard { lattice, u, zeeman } => {
                let field = match zeeman {
                    Some(h) => *h,
                    None if pin_field => 1e-3 * lattice.tau,
                    None => lattice.zeeman,
                };
                build_hubbard(&lattice.clone().with_zeeman(field), *u)
            }
            ModelConfig::Spec { spec } => HamiltonianSpec::from_document(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub master: u64,
    /// Ensemble size; member `i` uses `derive_seed(master, i)`.
    #[serde(default = "one")]
    pub members: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { master: 0, members: 1 }
    }
}

fn one() -> usize {
    1
}

/// A Schatten index, a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PIndex {
    Finite(f64),
    Named(PName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PName {
    Inf,
}

impl PIndex {
    pub fn value(self) -> f64 {
        match self {
            PIndex::Finite(p) => p,
            PIndex::Named(PName::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    /// Interaction order `s₀` whose norm is bounded.
    pub order: usize,
    pub p: Vec<PIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedConfig {
    #[serde(rename = "D")]
    pub d: usize,
    pub l: usize,
    pub m: usize,
    /// One `N_σ` list per evaluation.
    pub species_counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnits {
    Absolute,
    /// Times are multiplied by `1/λ`, λ the model's dominant scale.
    InverseScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub m: usize,
    /// Fit window in the configured time units.
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    #[serde(default)]
    pub exponent: Option<f64>,
    /// Target entropy for the saturation estimate, default `ln C(D,M)`.
    #[serde(default)]
    pub s_star: Option<f64>,
}

fn default_window() -> (f64, f64) {
    (1e-3, 1e-2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub m: usize,
    #[serde(default = "renyi")]
    pub kind: EntropyKind,
    #[serde(default = "half")]
    pub tail: f64,
    #[serde(default = "crossing")]
    pub fraction: f64,
}

fn renyi() -> EntropyKind {
    EntropyKind::Renyi2
}

fn half() -> f64 {
    0.5
}

fn crossing() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInitial {
    pub label: String,
    #[serde(flatten)]
    pub state: InitialState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub grid: TimeGrid,
    #[serde(default = "absolute")]
    pub time_units: TimeUnits,
    pub orders: Vec<usize>,
    #[serde(default = "both_kinds")]
    pub kinds: Vec<EntropyKind>,
    pub initial: Vec<NamedInitial>,
    /// Species count for the charge partition, `2` for spinful lattices.
    #[serde(default)]
    pub species: Option<usize>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub plateau: Option<PlateauConfig>,
}

fn absolute() -> TimeUnits {
    TimeUnits::Absolute
}

fn both_kinds() -> Vec<EntropyKind> {
    vec![EntropyKind::VonNeumann, EntropyKind::Renyi2]
}

impl DynamicsConfig {
    pub fn trajectory(&self, initial: &NamedInitial, model: &ModelConfig) -> Result<TrajectoryConfig, ConfigError> {
        let scale = match self.time_units {
            TimeUnits::Absolute => 1.0,
            TimeUnits::InverseScale => 1.0 / model.dominant_scale(),
        };
        let grid = scale_grid(&self.grid, scale);
        let mut cfg = TrajectoryConfig::new(grid, self.orders.clone(), initial.state.clone());
        cfg.kinds = self.kinds.clone();
        if let Some(l) = self.species {
            cfg.partition = Some(ChargePartition::new(model.orbitals(), l).map_err(ConfigError::from)?);
        }
        Ok(cfg)
    }

    pub fn time_scale(&self, model: &ModelConfig) -> f64 {
        match self.time_units {
            TimeUnits::Absolute => 1.0,
            TimeUnits::InverseScale => 1.0 / model.dominant_scale(),
        }
    }
}

fn scale_grid(grid: &TimeGrid, c: f64) -> TimeGrid {
    match grid {
        TimeGrid::Uniform { start, stop, points } => TimeGrid::Uniform {
            start: start * c,
            stop: stop * c,
            points: *points,
        },
        TimeGrid::Logarithmic { start, stop, points } => TimeGrid::Logarithmic {
            start: start * c,
            stop: stop * c,
            points: *points,
        },
        TimeGrid::Explicit { times } => TimeGrid::Explicit {
            times: times.iter().map(|t| t * c).collect(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    /// Particle number.
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub seeds: SeedConfig,
    /// RDM orders; defaults to `1..=min(N, 3)`.
    #[serde(default)]
    pub orders: Vec<usize>,
    /// Theorem and bound tolerance.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    /// Also check `-H`, whose ground state is the top state of `H`.
    #[serde(default)]
    pub include_negated: bool,
    #[serde(default)]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub refined: Option<RefinedConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_tol() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new(format!("malformed config: {e}")))
    }

    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: Some(kind),
            model: None,
            n: None,
            sweep: None,
            seeds: SeedConfig::default(),
            orders: Vec::new(),
            tolerance: default_tol(),
            include_negated: false,
            dynamics: None,
            bounds: None,
            refined: None,
            output: None,
        }
    }

    pub fn model(&self) -> Result<&ModelConfig, ConfigError> {
        self.model
            .as_ref()
            .ok_or_else(|| ConfigError::new("config has no model"))
    }

    pub fn particles(&self) -> Result<usize, ConfigError> {
        let n = self
            .n
            .ok_or_else(|| ConfigError::new("config has no particle number N"))?;
        let d = self.model()?.orbitals();
        if n > d {
            return Err(ConfigError::new(format!("N = {n} exceeds D = {d}")));
        }
        Ok(n)
    }

    pub fn orders(&self) -> Result<Vec<usize>, ConfigError> {
        let n = self.particles()?;
        if self.orders.is_empty() {
            return Ok((1..=n.min(3)).collect());
        }
        if let Some(m) = self.orders.iter().find(|&&m| m == 0 || m > n) {
            return Err(ConfigError::new(format!("order M = {m} outside 1..={n}")));
        }
        Ok(self.orders.clone())
    }

    /// Sweep points as `(value, model)`; without a sweep, one point at
    /// `NaN` carrying the base model.
    pub fn sweep_points(&self) -> Result<Vec<(f64, ModelConfig)>, ConfigError> {
        let model = self.model()?;
        match &self.sweep {
            None => Ok(vec![(f64::NAN, model.clone())]),
            Some(sw) => sw
                .values
                .iter()
                .map(|&v| Ok((v, model.with_parameter(&sw.parameter, v)?)))
                .collect(),
        }
    }

    /// Checks the fields required by `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(ConfigError::new(format!(
                    "config is for {:?}, not {:?}",
                    k.name(),
                    kind.name()
                )));
            }
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(ConfigError::new("tolerance must be finite and non-negative"));
        }
        if let Some(sw) = &self.sweep {
            if !SWEEP_PARAMETERS.contains(&sw.parameter.as_str()) {
                return Err(ConfigError::new(format!("unknown sweep parameter {:?}", sw.parameter)));
            }
            if let Some(model) = &self.model {
                if !model.has_parameter(&sw.parameter) {
                    return Err(ConfigError::new(format!(
                        "sweep parameter {:?} does not exist for this model",
                        sw.parameter
                    )));
                }
            }
            if sw.values.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::new("sweep values must be finite"));
            }
        }
        match kind {
            ExperimentKind::RefinedBounds => {
                let r = self
                    .refined
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("refined-bounds needs a `refined` block"))?;
                if r.l == 0 || r.d % r.l != 0 {
                    return Err(ConfigError::new(format!("D = {} is not divisible by l = {}", r.d, r.l)));
                }
                if let Some(c) = r.species_counts.iter().find(|c| c.len() != r.l) {
                    return Err(ConfigError::new(format!(
                        "species counts {c:?} do not have l = {} entries",
                        r.l
                    )));
                }
            }
            _ => {
                self.orders()?;
                if self.seeds.members == 0 {
                    return Err(ConfigError::new("seeds.members must be at least 1"));
                }
            }
        }
        match kind {
            ExperimentKind::Dynamics => {
                let dy = self
                    .dynamics
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("dynamics needs a `dynamics` block"))?;
                if dy.initial.is_empty() {
                    return Err(ConfigError::new("dynamics needs at least one initial state"));
                }
                if dy.time_units == TimeUnits::InverseScale && !(self.model()?.dominant_scale() > 0.0) {
                    return Err(ConfigError::new("inverse-scale time units need a nonzero coupling"));
                }
                for m in dy
                    .orders
                    .iter()
                    .chain(dy.fit.as_ref().map(|f| &f.m))
                    .chain(dy.plateau.as_ref().map(|p| &p.m))
                {
                    if *m == 0 || *m > self.particles()? {
                        return Err(ConfigError::new(format!("dynamics order M = {m} outside 1..=N")));
                    }
                }
            }
            ExperimentKind::Bounds => {
                let b = self
                    .bounds
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("bounds needs a `bounds` block"))?;
                if b.p.iter().any(|p| !(p.value() >= 1.0)) {
                    return Err(ConfigError::new("Schatten indices must be at least 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
