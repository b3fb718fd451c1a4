//! Eigensolvers and unitary propagation for sector operators.
//!
//! Small sectors go through a dense Hermitian eigendecomposition. Larger
//! ones use Lanczos with full reorthogonalization for the ground state and a
//! Lanczos-Krylov approximation of `exp(-iHt)ψ` with step-size control.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operators::SectorOperator;

pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default largest dimension handled by dense diagonalization.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Anything that can apply a Hermitian matrix to a vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl LinearOperator for SectorOperator {
    fn dim(&self) -> usize {
        SectorOperator::dim(self)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        SectorOperator::apply(self, x, y)
    }
}

impl LinearOperator for DMatrix<Complex64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub dense_cap: usize,
    /// Absolute residual target `‖Hv - Ev‖` for iterative eigenpairs.
    pub tol: f64,
    pub max_restarts: usize,
    pub lanczos_max_basis: usize,
    pub seed: u64,
    pub krylov_dim: usize,
    /// Allowed Krylov truncation error per unit time.
    pub krylov_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_cap: DEFAULT_DENSE_CAP,
            tol: 1e-9,
            max_restarts: 50,
            lanczos_max_basis: 250,
            seed: 0x5eed,
            krylov_dim: 30,
            krylov_tol: 1e-12,
        }
    }
}

/// Complete spectrum with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
    pub residuals: Vec<f64>,
}

impl EigenSolution {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> CVector {
        self.eigenvectors.column(0).into_owned()
    }

    pub fn top_state(&self) -> CVector {
        self.eigenvectors.column(self.eigenvalues.len() - 1).into_owned()
    }

    /// `‖H‖₂ = max |E|`.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Dense Hermitian eigendecomposition, eigenvalues ascending.
pub fn diagonalize_dense(m: &DMatrix<Complex64>) -> EigenSolution {
    let n = m.nrows();
    if n == 0 {
        return EigenSolution {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
            residuals: Vec::new(),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let hv = m * &eigenvectors;
    let residuals = (0..n)
        .map(|c| (hv.column(c) - eigenvectors.column(c) * Complex64::new(eigenvalues[c], 0.0)).norm())
        .collect();
    EigenSolution {
        eigenvalues,
        eigenvectors,
        residuals,
    }
}

/// Full spectrum of a sector operator, refused above `dense_cap`.
pub fn full_diagonalize(op: &SectorOperator, dense_cap: usize) -> Result<EigenSolution> {
    if op.dim() > dense_cap {
        return Err(Error::Capacity {
            what: format!("dense diagonalization of dimension {} (use the Lanczos path)", op.dim()),
            requested: op.dim() as u128,
            cap: dense_cap as u128,
        });
    }
    Ok(diagonalize_dense(&op.to_dense()))
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub energy: f64,
    pub vector: CVector,
    pub residual: f64,
}

/// Lowest eigenpair: dense below `dense_cap`, Lanczos above.
pub fn ground_state(op: &SectorOperator, opts: &SolverOptions) -> Result<Eigenpair> {
    if op.dim() <= opts.dense_cap {
        let sol = full_diagonalize(op, opts.dense_cap)?;
        return Ok(Eigenpair {
            energy: sol.eigenvalues[0],
            vector: sol.ground_state(),
            residual: sol.residuals[0],
        });
    }
    lanczos_ground_state(op, opts)
}

/// Unit vector with seeded Gaussian components.
pub fn seeded_unit_vector(dim: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = CVector::from_fn(dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let n = v.norm();
    v /= Complex64::new(n, 0.0);
    v
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal Lanczos basis and tridiagonal coefficients.
struct LanczosRun {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    breakdown: bool,
}

/// Runs up to `m` Lanczos steps from unit vector `start`, with full
/// reorthogonalization. `beta[k]` couples `basis[k]` and `basis[k + 1]`;
/// the final entry is the residual norm of the last step.
fn lanczos<A: LinearOperator + ?Sized>(
    a: &A,
    start: &[Complex64],
    m: usize,
    mut stop: impl FnMut(&[f64], &[f64]) -> bool,
) -> LanczosRun {
    let dim = a.dim();
    let mut basis: Vec<Vec<Complex64>> = vec![start.to_vec()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![ZERO; dim];
    loop {
        let j = basis.len() - 1;
        a.apply(&basis[j], &mut w);
        let aj = dot(&basis[j], &w).re;
        alpha.push(aj);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let bj = norm(&w);
        beta.push(bj);
        let scale = alpha.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if bj <= 1e-13 * scale {
            return LanczosRun {
                basis,
                alpha,
                beta,
                breakdown: true,
            };
        }
        if basis.len() >= m.min(dim) || stop(&alpha, &beta) {
            return LanczosRun {
                basis,
                alpha,
                beta,
                breakdown: false,
            };
        }
        let next: Vec<Complex64> = w.iter().map(|v| v / bj).collect();
        basis.push(next);
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    })
}

fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(tridiagonal(alpha, beta));
    let (k, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (theta, eig.eigenvectors.column(k).into_owned())
}

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
///
/// The start vector is seeded, so degenerate ground spaces return the same
/// member on every run.
pub fn lanczos_ground_state<A: LinearOperator + ?Sized>(a: &A, opts: &SolverOptions) -> Result<Eigenpair> {
    let dim = a.dim();
    if dim == 0 {
        return Err(Error::Domain("empty operator".into()));
    }
    let mut start: Vec<Complex64> = seeded_unit_vector(dim, opts.seed).iter().copied().collect();
    let mut residual = f64::INFINITY;
    let mut w = vec![ZERO; dim];
    for _ in 0..=opts.max_restarts {
        let run = lanczos(a, &start, opts.lanczos_max_basis, |alpha, beta| {
            if alpha.len() % 10 != 0 {
                return false;
            }
            let (_, y) = lowest_ritz(alpha, beta);
            beta[beta.len() - 1] * y[y.len() - 1].abs() < 0.1 * opts.tol
        });
        let k = run.alpha.len();
        let (theta, y) = lowest_ritz(&run.alpha, &run.beta[..k - 1]);
        let mut x = vec![ZERO; dim];
        for (q, &c) in run.basis.iter().zip(y.iter()) {
            axpy(Complex64::new(c, 0.0), q, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        a.apply(&x, &mut w);
        let energy = dot(&x, &w).re;
        axpy(Complex64::new(-energy, 0.0), &x, &mut w);
        residual = norm(&w);
        if residual <= opts.tol || (run.breakdown && residual <= 1e3 * opts.tol) {
            let _ = theta;
            return Ok(Eigenpair {
                energy,
                vector: CVector::from_vec(x),
                residual,
            });
        }
        start = x;
    }
    Err(Error::Convergence {
        iterations: opts.max_restarts,
        residual,
    })
}

/// Time-evolution engine `ψ ↦ exp(-iHt) ψ` for one operator.
pub enum Propagator<'a> {
    Dense {
        values: Vec<f64>,
        vectors: DMatrix<Complex64>,
    },
    Krylov {
        op: &'a SectorOperator,
        krylov_dim: usize,
        tol: f64,
    },
}

impl<'a> Propagator<'a> {
    /// Dense spectral propagator below `dense_cap`, Krylov above.
    pub fn new(op: &'a SectorOperator, opts: &SolverOptions) -> Result<Self> {
        if op.dim() <= opts.dense_cap {
            Self::dense(op, opts.dense_cap)
        } else {
            Ok(Self::krylov(op, opts.krylov_dim, opts.krylov_tol))
        }
    }

    pub fn dense(op: &SectorOperator, dense_cap: usize) -> Result<Self> {
        let sol = full_diagonalize(op, dense_cap)?;
        Ok(Self::from_solution(sol))
    }

    pub fn from_solution(sol: EigenSolution) -> Self {
        Propagator::Dense {
            values: sol.eigenvalues,
            vectors: sol.eigenvectors,
        }
    }

    pub fn krylov(op: &'a SectorOperator, krylov_dim: usize, tol: f64) -> Self {
        Propagator::Krylov {
            op,
            krylov_dim: krylov_dim.max(2),
            tol,
        }
    }

    pub fn evolve(&self, psi: &CVector, t: f64) -> Result<CVector> {
        match self {
            Propagator::Dense { values, vectors } => Ok(dense_evolve(values, vectors, psi, t)),
            Propagator::Krylov { op, krylov_dim, tol } => krylov_evolve(op, psi, t, *krylov_dim, *tol),
        }
    }
}

fn dense_evolve(values: &[f64], vectors: &DMatrix<Complex64>, psi: &CVector, t: f64) -> CVector {
    // ψ + V (e^{-iΛt} - 1) V†ψ keeps ψ(0) exact and the error ∝ t.
    let mut c = vectors.ad_mul(psi);
    for (ck, &e) in c.iter_mut().zip(values) {
        let phase = e * t;
        let half = (0.5 * phase).sin();
        *ck *= Complex64::new(-2.0 * half * half, -phase.sin());
    }
    psi + vectors * c
}

fn krylov_evolve(op: &SectorOperator, psi: &CVector, t: f64, m: usize, tol: f64) -> Result<CVector> {
    let total = t.abs();
    let scale = psi.norm();
    if total == 0.0 || scale == 0.0 {
        return Ok(psi.clone());
    }
    let dir = t.signum();
    let mut cur: Vec<Complex64> = psi.iter().map(|v| v / scale).collect();
    let mut done = 0.0;
    let mut h = total;
    let floor = total * 1e-13;
    while done < total {
        let run = lanczos(op, &cur, m, |_, _| false);
        let k = run.alpha.len();
        let eig = SymmetricEigen::new(tridiagonal(&run.alpha, &run.beta[..k - 1]));
        let tail = run.beta[k - 1];
        loop {
            let step = h.min(total - done);
            let mut u = vec![ZERO; k];
            for j in 0..k {
                let y0 = eig.eigenvectors[(0, j)];
                let ph = Complex64::new(0.0, -eig.eigenvalues[j] * step * dir).exp();
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui += eig.eigenvectors[(i, j)] * y0 * ph;
                }
            }
            let err = if run.breakdown { 0.0 } else { tail * u[k - 1].norm() };
            // The small exponential carries roundoff of order ε·‖T‖.
            let noise = 1e2 * f64::EPSILON * tail.max(1.0);
            if err <= tol * step.max(floor) + noise || run.breakdown {
                let mut next = vec![ZERO; cur.len()];
                for (q, &c) in run.basis.iter().zip(&u) {
                    axpy(c, q, &mut next);
                }
                cur = next;
                done += step;
                h = (2.0 * step).min(total);
                break;
            }
            h = 0.5 * step;
            if h < floor {
                return Err(Error::Convergence {
                    iterations: 0,
                    residual: err,
                });
            }
        }
    }
    Ok(CVector::from_vec(cur) * Complex64::new(scale, 0.0))
}

/// One-shot `exp(-iHt) ψ`.
pub fn propagate(op: &SectorOperator, psi: &CVector, t: f64, opts: &SolverOptions) -> Result<CVector> {
    Propagator::new(op, opts)?.evolve(psi, t)
}
