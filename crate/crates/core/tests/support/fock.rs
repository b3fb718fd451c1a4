//! Full Fock-space reference built from Jordan-Wigner matrices.
//!
//! Basis state `n` (bit `j` = orbital `j+1`) stands for
//! `(c†_1)^{n_1} ⋯ (c†_D)^{n_D} |0⟩`.
#![allow(dead_code)]

use mbent_core::Complex64;
use nalgebra::DMatrix;

pub type Mat = DMatrix<Complex64>;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Annihilator `c_j` (0-based `j`) on the `2^d` Fock space.
pub fn annihilator(d: usize, j: usize) -> Mat {
    let dim = 1usize << d;
    let mut m = Mat::zeros(dim, dim);
    for n in 0..dim {
        if n >> j & 1 == 1 {
            let below = (n & ((1 << j) - 1)).count_ones();
            let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
            m[(n ^ (1 << j), n)] = one() * sign;
        }
    }
    m
}

pub struct Fock {
    pub d: usize,
    pub c: Vec<Mat>,
    pub cdag: Vec<Mat>,
}

impl Fock {
    pub fn new(d: usize) -> Self {
        let c: Vec<Mat> = (0..d).map(|j| annihilator(d, j)).collect();
        let cdag = c.iter().map(|m| m.adjoint()).collect();
        Self { d, c, cdag }
    }

    pub fn dim(&self) -> usize {
        1 << self.d
    }

    pub fn identity(&self) -> Mat {
        Mat::identity(self.dim(), self.dim())
    }

    /// `c_{jM} ⋯ c_{j1}` for 0-based ascending `js`.
    pub fn annihilation_string(&self, js: &[usize]) -> Mat {
        let mut m = self.identity();
        for &j in js {
            m = &self.c[j] * m;
        }
        m
    }

    /// `c†_{i1} ⋯ c†_{iM}`.
    pub fn creation_string(&self, is: &[usize]) -> Mat {
        let mut m = self.identity();
        for &i in is {
            m *= &self.cdag[i];
        }
        m
    }

    pub fn number(&self, orbitals: impl Iterator<Item = usize>) -> Mat {
        let mut m = Mat::zeros(self.dim(), self.dim());
        for j in orbitals {
            m += &self.cdag[j] * &self.c[j];
        }
        m
    }

    /// `Σ raw_{i,j} c†_{i1}⋯c†_{is} c_{js}⋯c_{j1}` over all index tuples.
    pub fn raw_operator(&self, s: usize, raw: impl Fn(&[usize], &[usize]) -> Complex64) -> Mat {
        let tuples = all_tuples(self.d, s);
        let mut h = Mat::zeros(self.dim(), self.dim());
        let ann: Vec<Mat> = tuples.iter().map(|t| self.annihilation_string(t)).collect();
        let cre: Vec<Mat> = tuples.iter().map(|t| self.creation_string(t)).collect();
        for (a, i) in tuples.iter().enumerate() {
            for (b, j) in tuples.iter().enumerate() {
                let v = raw(i, j);
                if v.norm() != 0.0 {
                    h += (&cre[a] * &ann[b]) * v;
                }
            }
        }
        h
    }

    /// `λ (s!)² Σ_{α,β ordered} flat_{αβ} C†_α C_β`.
    pub fn flat_operator(&self, s: usize, weight: f64, flat: &Mat) -> Mat {
        let tuples = ordered_tuples(self.d, s);
        let fact: f64 = (1..=s).map(|k| k as f64).product();
        let mut h = Mat::zeros(self.dim(), self.dim());
        for (a, i) in tuples.iter().enumerate() {
            for (b, j) in tuples.iter().enumerate() {
                let v = flat[(a, b)];
                if v.norm() != 0.0 {
                    h += (self.creation_string(i) * self.annihilation_string(j)) * (v * weight * fact * fact);
                }
            }
        }
        h
    }

    /// Fock-space states with `n` particles, ascending lexicographic on the
    /// occupied tuple.
    pub fn sector(&self, n: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.dim()).filter(|s| s.count_ones() as usize == n).collect();
        v.sort_by_key(|s| occupied(*s));
        v
    }
}

pub fn occupied(state: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|j| state >> j & 1 == 1).collect()
}

/// Strictly increasing `s`-tuples in lexicographic order.
pub fn ordered_tuples(d: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0usize..1 << d)
        .filter(|m| m.count_ones() as usize == s)
        .map(occupied)
        .collect();
    out.sort();
    out
}

pub fn all_tuples(d: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..s {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                (0..d).map(move |j| {
                    let mut u = t.clone();
                    u.push(j);
                    u
                })
            })
            .collect();
    }
    out
}

/// `⟨Ψ| c†_{j1}⋯c†_{jM} c_{iM}⋯c_{i1} |Ψ⟩` for every ordered pair, with
/// `Ψ` given on the Fock space.
pub fn direct_rdm(fock: &Fock, psi: &[Complex64], m: usize) -> Mat {
    let tuples = ordered_tuples(fock.d, m);
    let v = nalgebra::DVector::from_column_slice(psi);
    let ann: Vec<Mat> = tuples.iter().map(|t| fock.annihilation_string(t)).collect();
    let cre: Vec<Mat> = tuples.iter().map(|t| fock.creation_string(t)).collect();
    let ket: Vec<nalgebra::DVector<Complex64>> = ann.iter().map(|a| a * &v).collect();
    Mat::from_fn(tuples.len(), tuples.len(), |a, b| v.dotc(&(&cre[b] * &ket[a])))
}

/// Embeds a sector vector into the Fock space.
pub fn embed(fock: &Fock, n: usize, psi: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); fock.dim()];
    for (k, s) in fock.sector(n).into_iter().enumerate() {
        out[s] = psi[k];
    }
    out
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
