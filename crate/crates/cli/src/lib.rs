//! Configuration, seeding, scheduling and persistence for `mbent`
//! experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;
pub mod seeds;

use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use mbent_core::SolverOptions;

pub use config::{ExperimentConfig, ExperimentKind, ModelConfig};
pub use experiments::{aggregate, Aggregate};
pub use output::RunManifest;
pub use seeds::derive_seed;

/// An invalid or unreadable configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<mbent_core::Error> for ConfigError {
    fn from(e: mbent_core::Error) -> Self {
        Self(e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    /// Overrides the master seed.
    pub seed: Option<u64>,
    /// Worker threads; `0` uses every logical core.
    pub jobs: usize,
    pub dense_cap: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out: PathBuf,
    pub violations: usize,
}

impl RunOutcome {
    pub fn failures(&self) -> &[String] {
        &self.manifest.failures
    }
}

/// Runs one experiment and writes its outputs and `manifest.json`.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    config.validate(kind)?;
    let mut cfg = config.clone();
    cfg.experiment = Some(kind);
    if let Some(seed) = opts.seed {
        cfg.seeds.master = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate(kind)?;
    let root = cfg
        .output
        .clone()
        .ok_or_else(|| ConfigError::new("no output directory: pass --out or set `output`"))?;
    let solver = SolverOptions {
        dense_cap: opts.dense_cap.unwrap_or(SolverOptions::default().dense_cap),
        ..SolverOptions::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .context("building the worker pool")?;

    let mut dir = output::OutputDir::create(&root)?;
    let manifest = RunManifest {
        experiment: kind.name().to_string(),
        config: serde_json::to_value(&cfg)?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.seeds.master,
        jobs: pool.current_num_threads(),
        started: output::unix_time(),
        finished: 0.0,
        files: Vec::new(),
        failures: Vec::new(),
    };
    let mut tally = experiments::Tally::default();
    pool.install(|| match kind {
        ExperimentKind::GsSweep => experiments::gs_sweep(&cfg, &solver, &mut dir, &mut tally),
        ExperimentKind::Ensemble => experiments::ensemble(&cfg, &solver, &mut dir, &mut tally),
        ExperimentKind::Dynamics => experiments::dynamics(&cfg, &solver, &mut dir, &mut tally),
        ExperimentKind::TheoremCheck => experiments::theorem_check(&cfg, &solver, &mut dir, &mut tally),
        ExperimentKind::Bounds => experiments::bounds(&cfg, &solver, &mut dir, &mut tally),
        ExperimentKind::RefinedBounds => experiments::refined_bounds(&cfg, &mut dir, &mut tally),
    })?;
    let manifest = dir.finish(RunManifest {
        failures: tally.failures,
        ..manifest
    })?;
    Ok(RunOutcome {
        manifest,
        out: root,
        violations: tally.violations,
    })
}
