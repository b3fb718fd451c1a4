//! Entropy trajectories under `exp(-iHt)` from Slater-determinant starts,
//! early-time growth fits, and saturation estimates.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fockspace::{binomial_f64, OccupationState, SectorBasis};
use crate::operators::{assemble_sector_matrix, sample_random_tensor, HamiltonianSpec};
use crate::rdm::{compute_rdm, purity_deficit, renyi2_entropy, von_neumann_entropy, EntropyKind, Normalization};
use crate::spectra::{diagonalize_dense, CVector, Propagator, SolverOptions};
use crate::symmetry::{block_decompose, charge_sector_of, refined_entropy_bound, ChargePartition};

/// Smallest excess entropy treated as signal by the growth fit.
pub const SIGNAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeGrid {
    /// `points` equally spaced times from `start` to `stop` inclusive.
    Uniform {
        start: f64,
        stop: f64,
        points: usize,
    },
    /// `points` geometrically spaced times, `0 < start < stop`.
    Logarithmic {
        start: f64,
        stop: f64,
        points: usize,
    },
    Explicit {
        times: Vec<f64>,
    },
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        let times: Vec<f64> = match self {
            TimeGrid::Uniform { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*points)
                    .map(|k| start + (stop - start) * k as f64 / (*points - 1) as f64)
                    .collect(),
            },
            TimeGrid::Logarithmic { start, stop, points } => {
                if *start <= 0.0 {
                    return domain("logarithmic grid needs a positive start");
                }
                match points {
                    0 => Vec::new(),
                    1 => vec![*start],
                    _ => (0..*points)
                        .map(|k| start * (stop / start).powf(k as f64 / (*points - 1) as f64))
                        .collect(),
                }
            }
            TimeGrid::Explicit { times } => times.clone(),
        };
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "time grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    /// `c†_{i1}⋯c†_{iN}|0⟩` over the listed 1-based orbitals.
    Occupied { orbitals: Vec<usize> },
    /// The same orbitals after a seeded one-body rotation
    /// `U = exp(-i·angle·K)`, `K` a unit-variance random Hermitian matrix.
    RotatedSd {
        orbitals: Vec<usize>,
        seed: u64,
        angle: f64,
    },
}

impl InitialState {
    pub fn build(&self, basis: &SectorBasis) -> Result<CVector> {
        match self {
            InitialState::Occupied { orbitals } => {
                let s = OccupationState::from_orbitals(orbitals)?;
                let k = basis.rank(s)?;
                let mut v = CVector::zeros(basis.dim());
                v[k] = Complex64::new(1.0, 0.0);
                Ok(v)
            }
            InitialState::RotatedSd { orbitals, seed, angle } => {
                let s = OccupationState::from_orbitals(orbitals)?;
                if s.particle_count() != basis.particles() {
                    return domain("rotated determinant has the wrong particle count");
                }
                let u = one_body_rotation(basis.orbitals(), *seed, *angle)?;
                Ok(rotated_determinant(basis, &u, &s.orbitals()))
            }
        }
    }
}

/// `exp(-i·angle·K)` for a seeded random Hermitian `K`.
pub fn one_body_rotation(d: usize, seed: u64, angle: f64) -> Result<DMatrix<Complex64>> {
    let k = sample_random_tensor(d, 1, seed)?;
    let eig = diagonalize_dense(k.flat());
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        eig.eigenvalues.iter().map(|e| Complex64::new(0.0, -angle * e).exp()),
    ));
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

/// Amplitudes of `Π_j (Σ_i U_{i,o_j} c†_i)|0⟩`: minors of `U`.
pub fn rotated_determinant(basis: &SectorBasis, u: &DMatrix<Complex64>, occupied: &[usize]) -> CVector {
    let n = occupied.len();
    let mut v = CVector::from_iterator(
        basis.dim(),
        basis.iter().map(|s| {
            let rows = s.orbitals();
            let minor = DMatrix::from_fn(n, n, |r, c| u[(rows[r] - 1, occupied[c] - 1)]);
            minor.determinant()
        }),
    );
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    v
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub grid: TimeGrid,
    pub orders: Vec<usize>,
    pub kinds: Vec<EntropyKind>,
    pub initial: InitialState,
    #[serde(default)]
    pub partition: Option<ChargePartition>,
    #[serde(default = "default_block_tol")]
    pub block_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_block_tol() -> f64 {
    1e-10
}

impl TrajectoryConfig {
    pub fn new(grid: TimeGrid, orders: Vec<usize>, initial: InitialState) -> Self {
        Self {
            grid,
            orders,
            kinds: vec![EntropyKind::VonNeumann, EntropyKind::Renyi2],
            initial,
            partition: None,
            block_tol: default_block_tol(),
            seed: 0,
        }
    }

    pub fn with_partition(mut self, partition: ChargePartition) -> Self {
        self.partition = Some(partition);
        self
    }
}

/// One entropy time series; von Neumann is unnormalized, Rényi-2 is
/// trace-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    pub m: usize,
    pub kind: EntropyKind,
    pub normalization: Normalization,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSeries {
    pub m: usize,
    pub species_counts: Vec<usize>,
    pub refined_bound: f64,
    pub off_block_residual: Vec<f64>,
    /// Entropy of each block, one row per time.
    pub block_entropies: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub spec_hash: String,
    pub model: String,
    pub seeds: Vec<u64>,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub propagator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub series: Vec<EntropySeries>,
    /// `S₂ - ln C(N,M)` computed at full relative precision, per order.
    pub renyi2_excess: Vec<(usize, Vec<f64>)>,
    pub norms: Vec<f64>,
    /// Largest `|Tr ρ^(M) - C(N,M)|` over orders, per time.
    pub trace_errors: Vec<f64>,
    pub blocks: Vec<BlockSeries>,
    pub metadata: TraceMetadata,
}

fn kind_tag(kind: EntropyKind) -> &'static str {
    match kind {
        EntropyKind::VonNeumann => "vn",
        EntropyKind::Renyi2 => "renyi2",
    }
}

impl EntropyTrace {
    pub fn series(&self, m: usize, kind: EntropyKind) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.m == m && s.kind == kind)
            .map(|s| s.values.as_slice())
    }

    pub fn excess(&self, m: usize) -> Option<&[f64]> {
        self.renyi2_excess
            .iter()
            .find(|(o, _)| *o == m)
            .map(|(_, v)| v.as_slice())
    }

    /// CSV with columns `t`, `S_<kind>_M<m>` per series, `norm`; numbers in
    /// 17-significant-digit scientific notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.series {
            let _ = write!(out, ",S_{}_M{}", kind_tag(s.kind), s.m);
        }
        out.push_str(",norm\n");
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.16e}");
            for s in &self.series {
                let _ = write!(out, ",{:.16e}", s.values[i]);
            }
            let _ = writeln!(out, ",{:.16e}", self.norms[i]);
        }
        out
    }
}

/// Propagates the configured initial state over the grid and records
/// entropies of every requested order.
pub fn evolve_and_measure(
    spec: &HamiltonianSpec,
    basis: &SectorBasis,
    config: &TrajectoryConfig,
    solver: &SolverOptions,
) -> Result<EntropyTrace> {
    let times = config.grid.times()?;
    let n = basis.particles();
    if let Some(&m) = config.orders.iter().find(|&&m| m == 0 || m > n) {
        return domain(format!("order M = {m} outside 1..={n}"));
    }
    let op = assemble_sector_matrix(spec, basis)?;
    let prop = Propagator::new(&op, solver)?;
    let psi0 = config.initial.build(basis)?;

    let block_setup = match &config.partition {
        None => None,
        Some(part) => {
            let counts = charge_sector_of(psi0.as_slice(), basis, part, config.block_tol).ok_or_else(|| {
                Error::NotChargeEigenstate {
                    residual: f64::NAN,
                    species: (0..part.species()).collect(),
                }
            })?;
            Some((part, counts))
        }
    };

    let mut trace = EntropyTrace {
        times: times.clone(),
        series: Vec::new(),
        renyi2_excess: Vec::new(),
        norms: Vec::with_capacity(times.len()),
        trace_errors: Vec::with_capacity(times.len()),
        blocks: Vec::new(),
        metadata: TraceMetadata {
            spec_hash: spec.content_hash(),
            model: spec.metadata.model.clone(),
            seeds: spec.metadata.seeds.iter().copied().chain([config.seed]).collect(),
            d: basis.orbitals(),
            n,
            propagator: match prop {
                Propagator::Dense { .. } => "dense".into(),
                Propagator::Krylov { .. } => "krylov".into(),
            },
        },
    };
    for &m in &config.orders {
        for &kind in &config.kinds {
            trace.series.push(EntropySeries {
                m,
                kind,
                normalization: match kind {
                    EntropyKind::VonNeumann => Normalization::Unnormalized,
                    EntropyKind::Renyi2 => Normalization::TraceNormalized,
                },
                values: Vec::with_capacity(times.len()),
            });
        }
        if config.kinds.contains(&EntropyKind::Renyi2) {
            trace.renyi2_excess.push((m, Vec::with_capacity(times.len())));
        }
        if let Some((part, counts)) = &block_setup {
            trace.blocks.push(BlockSeries {
                m,
                species_counts: counts.clone(),
                refined_bound: refined_entropy_bound(counts, basis.orbitals(), part.species(), m)?.value,
                off_block_residual: Vec::new(),
                block_entropies: Vec::new(),
            });
        }
    }

    let mut psi = psi0.clone();
    let mut last_t = 0.0;
    for &t in &times {
        let at = |e: Error| Error::AtTime {
            time: t,
            source: Box::new(e),
        };
        psi = match prop {
            Propagator::Dense { .. } => prop.evolve(&psi0, t).map_err(at)?,
            Propagator::Krylov { .. } => prop.evolve(&psi, t - last_t).map_err(at)?,
        };
        last_t = t;
        trace.norms.push(psi.norm());
        let mut trace_err = 0.0f64;
        for &m in &config.orders {
            let rho = compute_rdm(psi.as_slice(), basis, m).map_err(at)?;
            trace_err = trace_err.max((rho.trace() - binomial_f64(n, m)).abs());
            for s in trace.series.iter_mut().filter(|s| s.m == m) {
                let value = match s.kind {
                    EntropyKind::VonNeumann => {
                        von_neumann_entropy(&rho, Normalization::Unnormalized)
                            .map_err(at)?
                            .value
                    }
                    EntropyKind::Renyi2 => renyi2_entropy(&rho).value,
                };
                s.values.push(value);
            }
            if let Some((_, ex)) = trace.renyi2_excess.iter_mut().find(|(o, _)| *o == m) {
                let d = purity_deficit(&rho, psi.as_slice(), basis).map_err(at)?;
                ex.push(-(-d).ln_1p());
            }
            if let Some((part, counts)) = &block_setup {
                let dec = block_decompose(&rho, part, counts, config.block_tol).map_err(at)?;
                let bs = trace
                    .blocks
                    .iter_mut()
                    .find(|b| b.m == m)
                    .expect("block series per order");
                bs.off_block_residual.push(dec.off_block_residual);
                bs.block_entropies.push(dec.entropies().map_err(at)?);
            }
        }
        trace.trace_errors.push(trace_err);
    }
    Ok(trace)
}

/// Power law `ΔS₂(t) ≈ A t^m` fitted in a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    /// RMS residual of `ln ΔS₂` about the fit.
    pub residual: f64,
    pub points: usize,
    pub exponent_fixed: bool,
}

impl GrowthFit {
    /// `g` in `ΔS₂ ≈ g (λt)^m`.
    pub fn coefficient(&self, lambda: f64) -> f64 {
        self.amplitude / lambda.powf(self.exponent)
    }
}

/// Least squares on `ln ΔS = ln A + m ln t` over window points with
/// `ΔS > SIGNAL_FLOOR`; with `exponent` given only `A` is fitted.
pub fn fit_power_law(times: &[f64], excess: &[f64], window: (f64, f64), exponent: Option<f64>) -> Result<GrowthFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(excess)
        .filter(|(t, s)| **t > 0.0 && **t >= window.0 && **t <= window.1 && **s > SIGNAL_FLOOR)
        .map(|(t, s)| (t.ln(), s.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSignal(format!(
            "{} points above {SIGNAL_FLOOR:e} in window [{}, {}], need 3",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let k = pts.len() as f64;
    let (slope, intercept) = match exponent {
        Some(m) => (m, pts.iter().map(|(x, y)| y - m * x).sum::<f64>() / k),
        None => {
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
            let slope = sxy / sxx;
            (slope, my - slope * mx)
        }
    };
    let residual = (pts
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(GrowthFit {
        exponent: slope,
        amplitude: intercept.exp(),
        window,
        residual,
        points: pts.len(),
        exponent_fixed: exponent.is_some(),
    })
}

/// Growth fit of the order-`m` Rényi-2 excess of a trace.
pub fn fit_early_growth(
    trace: &EntropyTrace,
    m: usize,
    window: (f64, f64),
    exponent: Option<f64>,
) -> Result<GrowthFit> {
    let ex = trace
        .excess(m)
        .ok_or_else(|| Error::Validation(format!("trace has no Rényi-2 series for M = {m}")))?;
    fit_power_law(&trace.times, ex, window, exponent)
}

/// `g` from a single early point, `ΔS₂ / (λt)^m`.
pub fn single_point_coefficient(t: f64, excess: f64, exponent: f64, lambda: f64) -> f64 {
    excess / (lambda * t).powf(exponent)
}

/// Time at which the fitted growth reaches `S* - ln C(N,M)`:
/// `λ⁻¹ [(S* - ln C(N,M)) / g]^{1/m}`, `S*` defaulting to `ln C(D,M)`.
pub fn estimate_saturation_time(
    fit: &GrowthFit,
    d: usize,
    n: usize,
    m: usize,
    lambda: f64,
    s_star: Option<f64>,
) -> Result<f64> {
    let g = fit.coefficient(lambda);
    if !(g > 0.0) {
        return domain(format!("growth coefficient g = {g} must be positive"));
    }
    let target = s_star.unwrap_or_else(|| binomial_f64(d, m).ln()) - binomial_f64(n, m).ln();
    Ok((target / g).powf(1.0 / fit.exponent) / lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub t_observed: f64,
    pub value: f64,
    pub tail_std: f64,
}

/// Largest relative standard deviation of the tail accepted as a plateau.
pub const PLATEAU_TAIL_TOL: f64 = 0.05;

/// Tail mean over the final `window` fraction of the series and the first
/// time the series reaches `frac` of it.
pub fn detect_plateau(times: &[f64], values: &[f64], window: f64, frac: f64) -> Result<Plateau> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::Validation(
            "plateau detection needs matching, non-empty series".into(),
        ));
    }
    if !(window > 0.0 && window <= 1.0) {
        return domain(format!("tail window fraction {window} outside (0, 1]"));
    }
    let len = values.len();
    let start = len - ((len as f64 * window).ceil() as usize).clamp(1, len);
    let tail = &values[start..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let std = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    if std > PLATEAU_TAIL_TOL * mean.abs() + 1e-12 {
        return Err(Error::NoPlateau(format!(
            "tail standard deviation {std:.3e} against mean {mean:.3e}"
        )));
    }
    let k = values.iter().position(|v| *v >= frac * mean).unwrap_or(len - 1);
    Ok(Plateau {
        t_observed: times[k],
        value: mean,
        tail_std: std,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub m: usize,
    pub steps: Vec<f64>,
    /// Central-difference estimates of the first three derivatives of
    /// `C(N,M)·Tr ϱ²` at `t = 0`, one per step.
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub third: Vec<f64>,
}

impl DerivativeReport {
    /// Ratios `|est(h_k)| / |est(h_{k+1})|`; near `4` for an `h²` error.
    pub fn refinement_ratios(estimates: &[f64]) -> Vec<f64> {
        estimates.windows(2).map(|w| w[0].abs() / w[1].abs()).collect()
    }
}

/// Finite-difference derivatives of the purity at `t = 0` for an SD start.
pub fn zero_derivative_check(
    spec: &HamiltonianSpec,
    basis: &SectorBasis,
    initial: &InitialState,
    m: usize,
    steps: &[f64],
    solver: &SolverOptions,
) -> Result<DerivativeReport> {
    let op = assemble_sector_matrix(spec, basis)?;
    let prop = Propagator::new(&op, solver)?;
    let psi0 = initial.build(basis)?;
    // f(t) = C·Tr ϱ² - 1 = -deficit(t)
    let f = |t: f64| -> Result<f64> {
        let psi = prop.evolve(&psi0, t)?;
        let rho = compute_rdm(psi.as_slice(), basis, m)?;
        Ok(-purity_deficit(&rho, psi.as_slice(), basis)?)
    };
    let f0 = f(0.0)?;
    let mut report = DerivativeReport {
        m,
        steps: steps.to_vec(),
        first: Vec::new(),
        second: Vec::new(),
        third: Vec::new(),
    };
    for &h in steps {
        let (p1, m1, p2, m2) = (f(h)?, f(-h)?, f(2.0 * h)?, f(-2.0 * h)?);
        report.first.push((p1 - m1) / (2.0 * h));
        report.second.push((p1 - 2.0 * f0 + m1) / (h * h));
        report.third.push((p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h));
    }
    Ok(report)
}
