//! Lattice geometries and the spinful Hubbard model.
//!
//! Spinful orbitals are packed species-major: site `a` (1-based) with spin
//! `σ ∈ {↑, ↓}` is orbital `a + σ·L`, all spin-up sites first.

use std::collections::HashSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CouplingTensor, HamiltonianSpec, TensorSource, HERMITIAN_TOL};
use crate::error::{Error, Result};
use crate::fockspace::{binomial, lex_rank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatticeKind {
    Chain {
        sites: usize,
    },
    /// `lx × ly` sheared square lattice; bonds along `(1,0)` and `(0,1)`
    /// carry `τ`, the diagonal `(1,1)` carries `τ′`.
    Triangular {
        lx: usize,
        ly: usize,
    },
    /// User hopping matrix `τ_ab`, entries as `[re, im]`.
    Explicit {
        hopping: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    #[serde(flatten)]
    pub kind: LatticeKind,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default)]
    pub tau_prime: f64,
    #[serde(default = "open")]
    pub boundary: Boundary,
    /// Zeeman field `h` entering as `-h (n↑ - n↓) / 2` per site.
    #[serde(default)]
    pub zeeman: f64,
}

fn one() -> f64 {
    1.0
}

fn open() -> Boundary {
    Boundary::Open
}

impl LatticeSpec {
    pub fn chain(sites: usize, tau: f64, boundary: Boundary) -> Self {
        Self {
            kind: LatticeKind::Chain { sites },
            tau,
            tau_prime: 0.0,
            boundary,
            zeeman: 0.0,
        }
    }

    pub fn triangular(lx: usize, ly: usize, tau: f64, tau_prime: f64, boundary: Boundary) -> Self {
        Self {
            kind: LatticeKind::Triangular { lx, ly },
            tau,
            tau_prime,
            boundary,
            zeeman: 0.0,
        }
    }

    pub fn explicit(hopping: &DMatrix<Complex64>) -> Self {
        Self {
            kind: LatticeKind::Explicit {
                hopping: hopping
                    .row_iter()
                    .map(|r| r.iter().map(|v| [v.re, v.im]).collect())
                    .collect(),
            },
            tau: 1.0,
            tau_prime: 0.0,
            boundary: Boundary::Open,
            zeeman: 0.0,
        }
    }

    pub fn with_zeeman(mut self, h: f64) -> Self {
        self.zeeman = h;
        self
    }

    pub fn sites(&self) -> usize {
        match &self.kind {
            LatticeKind::Chain { sites } => *sites,
            LatticeKind::Triangular { lx, ly } => lx * ly,
            LatticeKind::Explicit { hopping } => hopping.len(),
        }
    }
}

/// Hopping amplitudes `τ_ab` between sites; the Hamiltonian uses `-τ_ab`.
///
/// On small periodic lattices a wrap bond that coincides with an existing
/// bond is dropped rather than doubled.
pub fn build_lattice_hoppings(lattice: &LatticeSpec) -> Result<DMatrix<Complex64>> {
    let l = lattice.sites();
    if l == 0 {
        return Err(Error::Validation("lattice has no sites".into()));
    }
    let mut t = DMatrix::zeros(l, l);
    let mut seen = HashSet::new();
    let mut bond = |a: usize, b: usize, amp: f64, t: &mut DMatrix<Complex64>| {
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            return;
        }
        t[(a, b)] = Complex64::new(amp, 0.0);
        t[(b, a)] = Complex64::new(amp, 0.0);
    };
    let periodic = lattice.boundary == Boundary::Periodic;
    match &lattice.kind {
        LatticeKind::Chain { sites } => {
            for a in 0..sites.saturating_sub(1) {
                bond(a, a + 1, lattice.tau, &mut t);
            }
            if periodic && *sites > 2 {
                bond(sites - 1, 0, lattice.tau, &mut t);
            }
        }
        LatticeKind::Triangular { lx, ly } => {
            let (lx, ly) = (*lx as isize, *ly as isize);
            let dirs = [(1, 0, lattice.tau), (0, 1, lattice.tau), (1, 1, lattice.tau_prime)];
            for y in 0..ly {
                for x in 0..lx {
                    for &(dx, dy, amp) in &dirs {
                        let (mut nx, mut ny) = (x + dx, y + dy);
                        if periodic {
                            nx = nx.rem_euclid(lx);
                            ny = ny.rem_euclid(ly);
                        } else if nx >= lx || ny >= ly {
                            continue;
                        }
                        bond((x + lx * y) as usize, (nx + lx * ny) as usize, amp, &mut t);
                    }
                }
            }
        }
        LatticeKind::Explicit { hopping } => {
            if hopping.iter().any(|r| r.len() != l) {
                return Err(Error::Validation("explicit hopping matrix is not square".into()));
            }
            for a in 0..l {
                for b in 0..l {
                    t[(a, b)] = Complex64::new(hopping[a][b][0], hopping[a][b][1]);
                }
            }
            for a in 0..l {
                for b in a..l {
                    let res = (t[(a, b)] - t[(b, a)].conj()).norm();
                    if res > HERMITIAN_TOL {
                        return Err(Error::Validation(format!(
                            "explicit hopping matrix is not Hermitian at ({a},{b})"
                        )));
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Hubbard model `-Σ τ_ab c†_{aσ} c_{bσ} + U Σ_a n_{a↑} n_{a↓}` plus the
/// optional Zeeman term, over `D = 2L` orbitals.
pub fn build_hubbard(lattice: &LatticeSpec, u: f64) -> Result<HamiltonianSpec> {
    let hop = build_lattice_hoppings(lattice)?;
    let l = lattice.sites();
    let d = 2 * l;
    let mut one = DMatrix::zeros(d, d);
    for spin in 0..2 {
        let off = spin * l;
        for a in 0..l {
            for b in 0..l {
                one[(a + off, b + off)] = -hop[(a, b)];
            }
            let zee = if spin == 0 { -0.5 } else { 0.5 } * lattice.zeeman;
            one[(a + off, a + off)] += Complex64::new(zee, 0.0);
        }
    }
    let n2 = binomial(d, 2) as usize;
    let mut two = DMatrix::zeros(n2, n2);
    for a in 0..l {
        let k = lex_rank(d, 2, (1u64 << a) | (1u64 << (a + l)));
        two[(k, k)] = Complex64::new(u / 4.0, 0.0);
    }
    let mut spec = HamiltonianSpec::new(d).with_model("hubbard");
    spec.push_term(1.0, CouplingTensor::new(1, d, one)?, TensorSource::Inline)?;
    spec.push_term(1.0, CouplingTensor::new(2, d, two)?, TensorSource::Inline)?;
    spec.metadata.lattice = Some(lattice.clone());
    Ok(spec)
}
