//! M-body reduced density matrices and their entropies.
//!
//! `ρ_{αβ} = ⟨Ψ| C†_β C_α |Ψ⟩` over composite indices in lexicographic order,
//! with `C_α = c_{iM}⋯c_{i1}`. Stored unnormalized (trace `C(N,M)`) unless
//! a normalized view is requested.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fockspace::{annihilate_mask, binomial, binomial_f64, for_each_submask, lex_rank, SectorBasis};

/// Default cap on the number of RDM entries, `C(D,M)²`.
pub const DEFAULT_RDM_CAP: u128 = 1 << 26;

/// Eigenvalues above this (negative) threshold are treated as PSD noise.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyKind {
    VonNeumann,
    Renyi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Unnormalized,
    TraceNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub kind: EntropyKind,
    pub value: f64,
    pub normalization: Normalization,
}

#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    d: usize,
    n: usize,
    m: usize,
    matrix: DMatrix<Complex64>,
    normalized: bool,
}

impl ReducedDensityMatrix {
    /// Wraps a matrix in the unnormalized convention.
    pub fn from_matrix(d: usize, n: usize, m: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = binomial(d, m) as usize;
        if matrix.shape() != (dim, dim) {
            return Err(Error::Validation(format!(
                "RDM of order {m} over {d} orbitals must be {dim}×{dim}"
            )));
        }
        Ok(Self {
            d,
            n,
            m,
            matrix,
            normalized: false,
        })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `C(N,M)` in the unnormalized convention.
    pub fn nominal_trace(&self) -> f64 {
        binomial_f64(self.n, self.m)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn normalized(&self) -> Self {
        self.rescaled(true)
    }

    pub fn unnormalized(&self) -> Self {
        self.rescaled(false)
    }

    fn rescaled(&self, normalized: bool) -> Self {
        let c = self.nominal_trace();
        let factor = match (self.normalized, normalized) {
            (false, true) => 1.0 / c,
            (true, false) => c,
            _ => 1.0,
        };
        Self {
            matrix: self.matrix.map(|v| v * factor),
            normalized,
            ..self.clone()
        }
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `Tr ρ²` of the stored matrix.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn to_document(&self) -> RdmDocument {
        RdmDocument {
            d: self.d,
            n: self.n,
            m: self.m,
            normalized: self.normalized,
            matrix: self
                .matrix
                .row_iter()
                .map(|r| r.iter().map(|v| [v.re, v.im]).collect())
                .collect(),
        }
    }
}

/// JSON dump of an RDM with its sector header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdmDocument {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub normalized: bool,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn check_order(basis: &SectorBasis, m: usize) -> Result<()> {
    if m == 0 || m > basis.particles() {
        return domain(format!(
            "RDM order M = {m} must satisfy 1 ≤ M ≤ N = {}",
            basis.particles()
        ));
    }
    Ok(())
}

/// `M`-body RDM of a state in `basis`, unnormalized.
pub fn compute_rdm(state: &[Complex64], basis: &SectorBasis, m: usize) -> Result<ReducedDensityMatrix> {
    compute_rdm_with_cap(state, basis, m, DEFAULT_RDM_CAP)
}

pub fn compute_rdm_with_cap(
    state: &[Complex64],
    basis: &SectorBasis,
    m: usize,
    cap: u128,
) -> Result<ReducedDensityMatrix> {
    check_order(basis, m)?;
    if state.len() != basis.dim() {
        return Err(Error::Validation(format!(
            "state has length {}, sector dimension is {}",
            state.len(),
            basis.dim()
        )));
    }
    let d = basis.orbitals();
    let n = basis.particles();
    let dim = binomial(d, m) as u128;
    if dim * dim > cap {
        return Err(Error::Capacity {
            what: format!("{m}-body RDM over {d} orbitals"),
            requested: dim * dim,
            cap,
        });
    }
    let dim = dim as usize;
    let full = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);

    // Group by the residual (N-M)-particle state l:
    // ρ_{αβ} = Σ_l a_α(l) conj(a_β(l)), a_α(l) = ⟨l|C_α|Ψ⟩.
    let mut amps: Vec<(usize, Complex64)> = Vec::new();
    let mut residual = Vec::with_capacity(binomial(d, n - m) as usize);
    crate::fockspace::for_each_combination(d, n - m, |l| residual.push(l));
    for &l in &residual {
        amps.clear();
        for_each_submask(full & !l, m, |alpha| {
            let k = l | alpha;
            let psi = state[basis.rank_mask(k)];
            if psi.re == 0.0 && psi.im == 0.0 {
                return;
            }
            let (_, neg) = annihilate_mask(k, alpha).expect("alpha is occupied in k");
            amps.push((lex_rank(d, m, alpha), if neg { -psi } else { psi }));
        });
        for &(a, va) in &amps {
            for &(b, vb) in &amps {
                rho[(a, b)] += va * vb.conj();
            }
        }
    }
    ReducedDensityMatrix::from_matrix(d, n, m, rho)
}

fn clipped_spectrum(rdm: &ReducedDensityMatrix) -> Result<Vec<f64>> {
    let scale = if rdm.normalized {
        1.0
    } else {
        rdm.nominal_trace().max(1.0)
    };
    let mut ev = rdm.eigenvalues();
    for v in ev.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_TOL * scale {
                return Err(Error::NumericalPsd(*v));
            }
            *v = 0.0;
        }
    }
    Ok(ev)
}

fn shannon(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| -v * v.ln())
        .sum::<f64>()
        .max(0.0)
}

/// `-Tr ρ ln ρ` in the requested normalization.
pub fn von_neumann_entropy(rdm: &ReducedDensityMatrix, normalization: Normalization) -> Result<EntropyValue> {
    let ev = clipped_spectrum(rdm)?;
    Ok(EntropyValue {
        kind: EntropyKind::VonNeumann,
        value: von_neumann_from_spectrum(&ev, rdm.is_normalized(), rdm.nominal_trace(), normalization),
        normalization,
    })
}

/// von Neumann entropy from a clipped spectrum stored in either convention.
pub(crate) fn von_neumann_from_spectrum(
    ev: &[f64],
    stored_normalized: bool,
    trace: f64,
    normalization: Normalization,
) -> f64 {
    let factor = match (stored_normalized, normalization) {
        (false, Normalization::TraceNormalized) => 1.0 / trace,
        (true, Normalization::Unnormalized) => trace,
        _ => 1.0,
    };
    let scaled: Vec<f64> = ev.iter().map(|v| v * factor).collect();
    shannon(&scaled)
}

/// `-ln Tr ϱ²` of the trace-normalized matrix.
pub fn renyi2_entropy(rdm: &ReducedDensityMatrix) -> EntropyValue {
    let t = if rdm.normalized { 1.0 } else { rdm.nominal_trace() };
    EntropyValue {
        kind: EntropyKind::Renyi2,
        value: (-(rdm.purity() / (t * t)).ln()).max(0.0),
        normalization: Normalization::TraceNormalized,
    }
}

/// `1 - C(N,M)·Tr ϱ²`, the purity deficit of the normalized RDM relative
/// to a Slater determinant, computed without cancellation.
///
/// Uses `C - Σ|ρ_αβ|² = Σ_α ρ_αα h_α - Σ_{α≠β} |ρ_αβ|²`, where the hole
/// weight `h_α` is the probability that some orbital of `α` is empty. Every
/// term is small near a Slater determinant, so the deficit keeps its
/// relative precision far below the 1e-16 floor of the direct route.
pub fn purity_deficit(rdm: &ReducedDensityMatrix, state: &[Complex64], basis: &SectorBasis) -> Result<f64> {
    let rho = rdm.unnormalized();
    let d = basis.orbitals();
    let m = rho.order();
    if basis.orbitals() != rho.orbitals() || basis.particles() != rho.particles() || state.len() != basis.dim() {
        return Err(Error::Validation("state, basis and RDM do not share a sector".into()));
    }
    let norm2: f64 = state.iter().map(|v| v.norm_sqr()).sum();
    let mut holes = vec![0.0f64; rho.dim()];
    let mut idx = 0;
    crate::fockspace::for_each_combination(d, m, |alpha| {
        holes[idx] = basis
            .masks()
            .iter()
            .zip(state)
            .filter(|(k, _)| *k & alpha != alpha)
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            / norm2;
        idx += 1;
    });
    let mat = rho.matrix();
    let mut diag = 0.0;
    let mut off = 0.0;
    for a in 0..rho.dim() {
        diag += mat[(a, a)].re / norm2 * holes[a];
        for b in 0..rho.dim() {
            if a != b {
                off += mat[(a, b)].norm_sqr() / (norm2 * norm2);
            }
        }
    }
    Ok(((diag - off) / rho.nominal_trace()).max(0.0))
}

/// `S₂ - ln C(N,M)` from [`purity_deficit`].
pub fn renyi2_excess(rdm: &ReducedDensityMatrix, state: &[Complex64], basis: &SectorBasis) -> Result<f64> {
    Ok(-(-purity_deficit(rdm, state, basis)?).ln_1p())
}

/// Largest entropy any state of the sector can reach.
pub fn max_entropy_bound(
    d: usize,
    n: usize,
    m: usize,
    kind: EntropyKind,
    normalization: Normalization,
) -> Result<EntropyValue> {
    if m > n || n > d {
        return domain(format!("bound needs M ≤ N ≤ D, got M={m}, N={n}, D={d}"));
    }
    let cdm = binomial_f64(d, m);
    let cnm = binomial_f64(n, m);
    let (value, normalization) = match (kind, normalization) {
        (EntropyKind::VonNeumann, Normalization::Unnormalized) => (cnm * (cdm / cnm).ln(), normalization),
        _ => (cdm.ln(), Normalization::TraceNormalized),
    };
    Ok(EntropyValue {
        kind,
        value,
        normalization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixednessCheck {
    pub maximal: bool,
    /// Unnormalized von Neumann ceiling minus the entropy.
    pub deficit: f64,
    pub distance: f64,
}

/// Whether `ρ ∝ I` within `tol` (max elementwise distance), with the
/// entropy deficit to the ceiling.
pub fn is_maximally_mixed(rdm: &ReducedDensityMatrix, tol: f64) -> Result<MixednessCheck> {
    let n = rdm.dim();
    let level = rdm.trace() / n as f64;
    let mut distance = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { level } else { 0.0 };
            distance = distance.max((rdm.matrix()[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    let bound = max_entropy_bound(
        rdm.orbitals(),
        rdm.particles(),
        rdm.order(),
        EntropyKind::VonNeumann,
        Normalization::Unnormalized,
    )?;
    let s = von_neumann_entropy(rdm, Normalization::Unnormalized)?;
    Ok(MixednessCheck {
        maximal: distance < tol,
        deficit: bound.value - s.value,
        distance,
    })
}
