//! Spectral mean of a sector, Schatten norms, the Hölder lower bound on the
//! interaction strength, and the ground-state entanglement check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fockspace::{binomial_f64, SectorBasis};
use crate::operators::{assemble_sector_matrix, flat_prefactor, HamiltonianSpec, SectorOperator};
use crate::rdm::{
    compute_rdm, hermitian_eigenvalues, max_entropy_bound, von_neumann_entropy, EntropyKind, Normalization,
    ReducedDensityMatrix,
};
use crate::spectra::{full_diagonalize, lanczos_ground_state, CVector, SolverOptions};

/// Relative gap below which a Hamiltonian counts as trivial in its sector.
pub const TRIVIAL_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMean {
    pub mu1: f64,
    /// `(s, contribution)` in ascending order of `s`.
    pub per_order: Vec<(usize, f64)>,
}

/// Mean of the `N`-particle spectrum,
/// `μ₁ = Σ_s λ_s C(N,s)/C(D,s) (s!)² Tr flat_s`.
pub fn spectral_mean(spec: &HamiltonianSpec, n: usize) -> Result<SpectralMean> {
    let d = spec.orbitals();
    if n > d {
        return domain(format!("N = {n} exceeds D = {d}"));
    }
    let mut per_order: Vec<(usize, f64)> = Vec::new();
    for term in spec.terms() {
        let s = term.order();
        let tr = term.tensor.flat().trace().re;
        let c = term.weight * binomial_f64(n, s) / binomial_f64(d, s) * flat_prefactor(s) * tr;
        match per_order.iter_mut().find(|(o, _)| *o == s) {
            Some(entry) => entry.1 += c,
            None => per_order.push((s, c)),
        }
    }
    per_order.sort_by_key(|(s, _)| *s);
    Ok(SpectralMean {
        mu1: per_order.iter().map(|(_, c)| c).sum(),
        per_order,
    })
}

/// Closed form for the Hubbard model: hopping is traceless and the on-site
/// term contributes `[C(N,2)/C(D,2)] · D U / 2`.
pub fn hubbard_mean(d: usize, n: usize, u: f64) -> f64 {
    binomial_f64(n, 2) / binomial_f64(d, 2) * 0.5 * d as f64 * u
}

/// `Tr H / dim` of an assembled sector operator.
pub fn brute_force_mean(op: &SectorOperator) -> Result<f64> {
    if op.dim() == 0 {
        return domain("empty sector");
    }
    Ok(op.trace() / op.dim() as f64)
}

/// `Σ_s Tr(H^(s) ρ^(s)_max)` with `ρ^(s)_max = I · C(N,s)/C(D,s)`.
pub fn maximally_mixed_energy(spec: &HamiltonianSpec, n: usize) -> Result<f64> {
    let d = spec.orbitals();
    if n > d {
        return domain(format!("N = {n} exceeds D = {d}"));
    }
    let mut e = 0.0;
    for term in spec.terms() {
        let s = term.order();
        let h = term.coupling_matrix();
        let level = binomial_f64(n, s) / binomial_f64(d, s);
        let rho = DMatrix::<Complex64>::from_diagonal_element(h.nrows(), h.nrows(), Complex64::new(level, 0.0));
        e += (0..h.nrows())
            .flat_map(|a| (0..h.nrows()).map(move |b| (a, b)))
            .map(|(a, b)| h[(a, b)] * rho[(b, a)])
            .sum::<Complex64>()
            .re;
    }
    Ok(e)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return domain(format!("Schatten index p = {p} must lie in [1, ∞]"));
    }
    Ok(())
}

fn p_norm(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    let v: Vec<f64> = values.map(f64::abs).collect();
    let top = v.iter().copied().fold(0.0, f64::max);
    if p.is_infinite() || top == 0.0 {
        return top;
    }
    top * v.iter().map(|x| (x / top).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `‖A‖_p = [Tr (A†A)^{p/2}]^{1/p}` via singular values; `p = ∞` is the
/// spectral norm.
pub fn schatten_norm(a: &DMatrix<Complex64>, p: f64) -> Result<f64> {
    check_p(p)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sv = a.clone().singular_values();
    Ok(p_norm(sv.iter().copied(), p))
}

/// Schatten norm of a Hermitian matrix from its eigenvalues.
pub fn schatten_norm_hermitian(a: &DMatrix<Complex64>, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(p_norm(hermitian_eigenvalues(a).into_iter(), p))
}

/// `q` with `1/p + 1/q = 1`.
pub fn holder_conjugate(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    })
}

/// `(μ₁ - E_GS) / ‖ρ^(s₀)_max - ρ^(s₀)_GS‖_q`, a lower bound on
/// `‖H^(s₀)‖_p` for a Hamiltonian of the single order `s₀`.
///
/// Returns `+∞` when the denominator vanishes but the gap does not.
pub fn interaction_lower_bound(e_gs: f64, mu1: f64, rho_gs: &ReducedDensityMatrix, p: f64) -> Result<f64> {
    let q = holder_conjugate(p)?;
    let numerator = mu1 - e_gs;
    if numerator < -1e-9 * mu1.abs().max(1.0) {
        return Err(Error::InconsistentInput(format!(
            "ground energy {e_gs} lies above the spectral mean {mu1}"
        )));
    }
    let numerator = numerator.max(0.0);
    let rho = rho_gs.unnormalized();
    let n = rho.dim();
    let level = rho.nominal_trace() / n as f64;
    let diff = DMatrix::<Complex64>::from_diagonal_element(n, n, Complex64::new(level, 0.0)) - rho.matrix();
    let denominator = schatten_norm_hermitian(&diff, q)?;
    if denominator < 1e-13 {
        return Ok(if numerator > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(numerator / denominator)
}

/// Both sides of the Hölder inequality for one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionBound {
    pub order: usize,
    pub p: f64,
    pub bound: f64,
    /// `‖H^(s₀)‖_p` of the actual coupling.
    pub norm: f64,
    /// Set when other orders are present, so the bound is not rigorous.
    pub mixed_order: bool,
}

/// Extremal eigenpairs of a sector: `(E_min, ψ_min, E_max, ψ_max, residual)`.
pub struct SectorExtremes {
    pub e_min: f64,
    pub ground: CVector,
    pub e_max: f64,
    pub top: CVector,
    pub residual: f64,
}

pub fn sector_extremes(op: &SectorOperator, opts: &SolverOptions) -> Result<SectorExtremes> {
    if op.dim() <= opts.dense_cap {
        let sol = full_diagonalize(op, opts.dense_cap)?;
        return Ok(SectorExtremes {
            e_min: sol.eigenvalues[0],
            ground: sol.ground_state(),
            e_max: *sol.eigenvalues.last().unwrap(),
            top: sol.top_state(),
            residual: sol.residuals[0].max(*sol.residuals.last().unwrap()),
        });
    }
    let lo = lanczos_ground_state(op, opts)?;
    let hi = lanczos_ground_state(&op.scaled(-1.0), opts)?;
    Ok(SectorExtremes {
        e_min: lo.energy,
        ground: lo.vector,
        e_max: -hi.energy,
        top: hi.vector,
        residual: lo.residual.max(hi.residual),
    })
}

/// Hölder bound for the order-`s₀` part of `spec` at each `p`.
pub fn interaction_bounds(
    spec: &HamiltonianSpec,
    n: usize,
    s0: usize,
    ps: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<InteractionBound>> {
    let h = spec
        .coupling_matrix(s0)
        .ok_or_else(|| Error::Domain(format!("spec has no order-{s0} term")))?;
    let mixed_order = spec.terms().iter().any(|t| t.weight != 0.0 && t.order() != s0);
    let basis = SectorBasis::new(spec.orbitals(), n)?;
    let op = assemble_sector_matrix(spec, &basis)?;
    let ext = sector_extremes(&op, opts)?;
    let mu1 = spectral_mean(spec, n)?.mu1;
    let rho = compute_rdm(ext.ground.as_slice(), &basis, s0)?;
    ps.iter()
        .map(|&p| {
            Ok(InteractionBound {
                order: s0,
                p,
                bound: interaction_lower_bound(ext.e_min, mu1, &rho, p)?,
                norm: schatten_norm_hermitian(&h, p)?,
                mixed_order,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDeficit {
    pub m: usize,
    pub entropy: f64,
    pub bound: f64,
    /// `bound - entropy`, unnormalized von Neumann.
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub e_gs: f64,
    pub mu1: f64,
    pub gap: f64,
    pub norm_h: f64,
    pub residual: f64,
    pub trivial: bool,
    pub deficits: Vec<OrderDeficit>,
    pub violation: bool,
}

/// Ground-state check for orders `1..=min(max order, N)`.
pub fn theorem_check(spec: &HamiltonianSpec, n: usize, tol: f64, opts: &SolverOptions) -> Result<TheoremReport> {
    let top = spec.max_order().max(1).min(n);
    let orders: Vec<usize> = (1..=top).collect();
    theorem_check_orders(spec, n, &orders, tol, opts)
}

/// Computes `E_GS`, `μ₁` and the ground-state entropy deficit at each `M`.
/// A violation is a nontrivial gap (`> tol`) together with a deficit `≤ 0`.
pub fn theorem_check_orders(
    spec: &HamiltonianSpec,
    n: usize,
    orders: &[usize],
    tol: f64,
    opts: &SolverOptions,
) -> Result<TheoremReport> {
    let d = spec.orbitals();
    let basis = SectorBasis::new(d, n)?;
    let op = assemble_sector_matrix(spec, &basis)?;
    let ext = sector_extremes(&op, opts)?;
    let mu1 = spectral_mean(spec, n)?.mu1;
    let norm_h = ext.e_min.abs().max(ext.e_max.abs());
    let gap = mu1 - ext.e_min;
    let trivial = ext.e_max - ext.e_min < TRIVIAL_GAP_TOL * norm_h.max(1.0);
    let mut deficits = Vec::new();
    for &m in orders {
        if m == 0 || m > n {
            continue;
        }
        let rho = compute_rdm(ext.ground.as_slice(), &basis, m)?;
        let entropy = von_neumann_entropy(&rho, Normalization::Unnormalized)?.value;
        let bound = max_entropy_bound(d, n, m, EntropyKind::VonNeumann, Normalization::Unnormalized)?.value;
        deficits.push(OrderDeficit {
            m,
            entropy,
            bound,
            deficit: bound - entropy,
        });
    }
    let violation = !trivial && gap > tol && deficits.iter().any(|x| x.deficit <= 0.0);
    Ok(TheoremReport {
        d,
        n,
        e_gs: ext.e_min,
        mu1,
        gap,
        norm_h,
        residual: ext.residual,
        trivial,
        deficits,
        violation,
    })
}
