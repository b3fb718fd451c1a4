//! Number-conserving Hamiltonians in flattened-tensor form.
//!
//! An order-`s` term is stored as the `C(D,s) × C(D,s)` Hermitian matrix
//! `flat` over ordered orbital tuples, and expands to
//!
//! ```text
//! Ĥ_s = λ_s (s!)² Σ_{αβ} flat_{αβ} C†_α C_β,
//! C†_α = c†_{i1} ⋯ c†_{is},   C_β = c_{js} ⋯ c_{j1}.
//! ```
//!
//! The `(s!)²` prefactor is applied at assembly time and never folded into
//! `flat`.

mod lattice;
mod syk;

pub use lattice::{build_hubbard, build_lattice_hoppings, Boundary, LatticeKind, LatticeSpec};
pub use syk::build_syk;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::fockspace::{
    annihilate_mask, binomial, create_mask, for_each_combination, for_each_submask, lex_rank, SectorBasis, MAX_ORBITALS,
};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Tolerance on elementwise Hermiticity of coupling matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default cap on stored nonzeros of an assembled sector matrix.
pub const DEFAULT_NNZ_CAP: usize = 1 << 26;

pub fn factorial(s: usize) -> f64 {
    (1..=s).map(|k| k as f64).product()
}

/// `(s!)²`, the expansion prefactor of an order-`s` flattened tensor.
pub fn flat_prefactor(s: usize) -> f64 {
    factorial(s).powi(2)
}

fn hermiticity_residual(m: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Order-`s` Hermitian coupling in flattened form.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensor {
    order: usize,
    d: usize,
    flat: DMatrix<Complex64>,
}

impl CouplingTensor {
    pub fn new(order: usize, d: usize, flat: DMatrix<Complex64>) -> Result<Self> {
        if order == 0 || order > d || d > MAX_ORBITALS {
            return domain(format!("coupling order {order} invalid for D = {d}"));
        }
        let n = binomial(d, order) as usize;
        if flat.nrows() != n || flat.ncols() != n {
            return Err(Error::Validation(format!(
                "flat matrix is {}x{}, expected {n}x{n}",
                flat.nrows(),
                flat.ncols()
            )));
        }
        let res = hermiticity_residual(&flat);
        if res > HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "coupling matrix is not Hermitian (residual {res:.3e})"
            )));
        }
        Ok(Self { order, d, flat })
    }

    pub fn zeros(order: usize, d: usize) -> Result<Self> {
        let n = binomial(d, order) as usize;
        Self::new(order, d, DMatrix::zeros(n, n))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    pub fn flat(&self) -> &DMatrix<Complex64> {
        &self.flat
    }

    /// `(s!)² flat`, the matrix that pairs with the order-`s` RDM.
    pub fn expanded(&self) -> DMatrix<Complex64> {
        self.flat.scale(flat_prefactor(self.order))
    }

    /// Masks of the composite indices labelling rows and columns.
    pub fn composite_masks(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.flat.nrows());
        for_each_combination(self.d, self.order, |m| out.push(m));
        out
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.flat)
    }

    fn column_nonzeros(&self) -> Vec<Vec<(usize, Complex64)>> {
        (0..self.flat.ncols())
            .map(|c| {
                (0..self.flat.nrows())
                    .filter_map(|r| {
                        let v = self.flat[(r, c)];
                        (v != Complex64::new(0.0, 0.0)).then_some((r, v))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Dense order-`s` tensor `H_{i1…is, j1…js}` over the full index ranges
/// (0-based, row-major with the creation indices first).
#[derive(Debug, Clone)]
pub struct RawTensor {
    order: usize,
    d: usize,
    data: Vec<Complex64>,
}

impl RawTensor {
    pub fn zeros(order: usize, d: usize) -> Self {
        Self {
            order,
            d,
            data: vec![Complex64::new(0.0, 0.0); d.pow(2 * order as u32)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    fn offset(&self, i: &[usize], j: &[usize]) -> usize {
        debug_assert_eq!(i.len(), self.order);
        debug_assert_eq!(j.len(), self.order);
        i.iter().chain(j).fold(0, |acc, &x| acc * self.d + x)
    }

    pub fn get(&self, i: &[usize], j: &[usize]) -> Complex64 {
        self.data[self.offset(i, j)]
    }

    pub fn set(&mut self, i: &[usize], j: &[usize], v: Complex64) {
        let k = self.offset(i, j);
        self.data[k] = v;
    }

    /// Calls `f(i, j, value)` for every entry.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], &[usize], Complex64)) {
        let s = self.order;
        let mut idx = vec![0usize; 2 * s];
        for (k, &v) in self.data.iter().enumerate() {
            let mut rem = k;
            for slot in idx.iter_mut().rev() {
                *slot = rem % self.d;
                rem /= self.d;
            }
            f(&idx[..s], &idx[s..], v);
        }
    }
}

/// All permutations of `0..s` with their signs.
fn signed_permutations(s: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; s], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut inversions = 0;
            for a in 0..s {
                for b in a + 1..s {
                    if p[a] > p[b] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

/// Projects a raw tensor onto its antisymmetric part and restricts it to
/// ordered tuples, so that `(s!)² Σ flat C†C` equals the raw operator sum.
pub fn antisymmetrize_and_flatten(raw: &RawTensor) -> Result<CouplingTensor> {
    let (s, d) = (raw.order, raw.d);
    if s == 0 || s > d {
        return domain(format!("raw tensor order {s} invalid for D = {d}"));
    }
    let comps: Vec<Vec<usize>> = {
        let mut v = Vec::new();
        for_each_combination(d, s, |m| v.push((0..d).filter(|&i| m & (1 << i) != 0).collect()));
        v
    };
    let perms = signed_permutations(s);
    let n = comps.len();
    let norm = flat_prefactor(s);
    let mut flat = DMatrix::zeros(n, n);
    let mut pi = vec![0usize; s];
    let mut pj = vec![0usize; s];
    for (a, alpha) in comps.iter().enumerate() {
        for (b, beta) in comps.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, sp) in &perms {
                for (k, &q) in p.iter().enumerate() {
                    pi[k] = alpha[q];
                }
                for (p2, sp2) in &perms {
                    for (k, &q) in p2.iter().enumerate() {
                        pj[k] = beta[q];
                    }
                    acc += raw.get(&pi, &pj) * (sp * sp2);
                }
            }
            flat[(a, b)] = acc / norm;
        }
    }
    let res = hermiticity_residual(&flat);
    if res > HERMITIAN_TOL * (1.0 + flat.iter().map(|v| v.norm()).fold(0.0, f64::max)) {
        return Err(Error::Validation(format!(
            "antisymmetrized tensor is not Hermitian (residual {res:.3e})"
        )));
    }
    let herm = (&flat + flat.adjoint()).scale(0.5);
    CouplingTensor::new(s, d, herm)
}

/// Samples a Hermitian flat matrix with unit elementwise variance: real
/// N(0,1) diagonal, off-diagonal real and imaginary parts N(0,1/2).
pub fn sample_random_tensor(d: usize, s: usize, seed: u64) -> Result<CouplingTensor> {
    if s == 0 || s > d || d > MAX_ORBITALS {
        return domain(format!("cannot sample order {s} tensor for D = {d}"));
    }
    let n = binomial(d, s) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut flat = DMatrix::zeros(n, n);
    for r in 0..n {
        let x: f64 = StandardNormal.sample(&mut rng);
        flat[(r, r)] = Complex64::new(x, 0.0);
        for c in r + 1..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let v = Complex64::new(re * half, im * half);
            flat[(r, c)] = v;
            flat[(c, r)] = v.conj();
        }
    }
    CouplingTensor::new(s, d, flat)
}

/// Where a term's tensor came from; seeded tensors serialize by seed only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorSource {
    Inline,
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub tensor: CouplingTensor,
    pub source: TensorSource,
}

impl Term {
    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    /// `λ (s!)² flat`: the coupling matrix `H^(s)` paired with `ρ^(s)`.
    pub fn coupling_matrix(&self) -> DMatrix<Complex64> {
        self.tensor.expanded().scale(self.weight)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecMetadata {
    pub model: String,
    pub seeds: Vec<u64>,
    pub lattice: Option<LatticeSpec>,
}

/// A particle-number-conserving Hamiltonian as a list of weighted terms.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    d: usize,
    terms: Vec<Term>,
    pub metadata: SpecMetadata,
}

impl HamiltonianSpec {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            terms: Vec::new(),
            metadata: SpecMetadata::default(),
        }
    }

    pub fn with_model(mut self, model: &str) -> Self {
        self.metadata.model = model.to_string();
        self
    }

    pub fn push_term(&mut self, weight: f64, tensor: CouplingTensor, source: TensorSource) -> Result<()> {
        if tensor.orbitals() != self.d {
            return domain(format!(
                "tensor over D = {} added to spec over D = {}",
                tensor.orbitals(),
                self.d
            ));
        }
        self.terms.push(Term { weight, tensor, source });
        Ok(())
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Highest order carrying a nonzero weight (0 for the zero operator).
    pub fn max_order(&self) -> usize {
        self.terms
            .iter()
            .filter(|t| t.weight != 0.0)
            .map(Term::order)
            .max()
            .unwrap_or(0)
    }

    /// Terms of one order summed into a single coupling matrix `H^(s)`.
    pub fn coupling_matrix(&self, s: usize) -> Option<DMatrix<Complex64>> {
        self.terms
            .iter()
            .filter(|t| t.order() == s)
            .map(Term::coupling_matrix)
            .reduce(|a, b| a + b)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.weight *= factor);
        out
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Operator sum of two specs over the same orbitals.
    pub fn sum(&self, other: &HamiltonianSpec) -> Result<Self> {
        if self.d != other.d {
            return domain("cannot add specs over different orbital counts");
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.metadata.seeds.extend(&other.metadata.seeds);
        Ok(out)
    }

    pub fn to_document(&self) -> SpecDocument {
        SpecDocument {
            d: self.d,
            model: self.metadata.model.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| TermDocument {
                    s: t.order(),
                    lambda: t.weight,
                    tensor: match t.source {
                        TensorSource::Seeded(seed) => TensorDocument::Seeded { seed },
                        TensorSource::Inline => TensorDocument::Inline(
                            t.tensor
                                .flat()
                                .row_iter()
                                .map(|row| row.iter().map(|v| [v.re, v.im]).collect())
                                .collect(),
                        ),
                    },
                })
                .collect(),
            lattice: self.metadata.lattice.clone(),
            seeds: self.metadata.seeds.clone(),
        }
    }

    pub fn from_document(doc: &SpecDocument) -> Result<Self> {
        let mut spec = HamiltonianSpec::new(doc.d);
        spec.metadata = SpecMetadata {
            model: doc.model.clone(),
            seeds: doc.seeds.clone(),
            lattice: doc.lattice.clone(),
        };
        for t in &doc.terms {
            let (tensor, source) = match &t.tensor {
                TensorDocument::Seeded { seed } => {
                    (sample_random_tensor(doc.d, t.s, *seed)?, TensorSource::Seeded(*seed))
                }
                TensorDocument::Inline(rows) => {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Validation("inline tensor is not square".into()));
                    }
                    let flat = DMatrix::from_fn(n, n, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1]));
                    (CouplingTensor::new(t.s, doc.d, flat)?, TensorSource::Inline)
                }
            };
            spec.push_term(t.lambda, tensor, source)?;
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("spec document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDocument = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        Self::from_document(&doc)
    }

    /// SHA-256 of the canonical JSON document, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TensorDocument {
    #[serde(rename = "inline-dense-hermitian")]
    Inline(Vec<Vec<[f64; 2]>>),
    #[serde(rename = "seeded")]
    Seeded { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDocument {
    pub s: usize,
    pub lambda: f64,
    pub tensor: TensorDocument,
}

/// Serialized form of a [`HamiltonianSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDocument {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(default)]
    pub model: String,
    pub terms: Vec<TermDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

/// A Hamiltonian restricted to one N-particle sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    d: usize,
    n: usize,
    matrix: CsrMatrix,
}

impl SectorOperator {
    pub fn from_csr(d: usize, n: usize, matrix: CsrMatrix) -> Self {
        Self { d, n, matrix }
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal_sum().re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.matrix.hermiticity_residual()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d,
            n: self.n,
            matrix: self.matrix.scaled(factor),
        }
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matrix.matvec_into(x, y)
    }

    /// `⟨ψ|H|ψ⟩` for a normalized state.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut y);
        psi.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Sector matrix `⟨SD_k|Ĥ|SD_l⟩` of `spec`, with the default nonzero cap.
pub fn assemble_sector_matrix(spec: &HamiltonianSpec, basis: &SectorBasis) -> Result<SectorOperator> {
    assemble_sector_matrix_with_cap(spec, basis, DEFAULT_NNZ_CAP)
}

pub fn assemble_sector_matrix_with_cap(
    spec: &HamiltonianSpec,
    basis: &SectorBasis,
    nnz_cap: usize,
) -> Result<SectorOperator> {
    let (d, n) = (basis.orbitals(), basis.particles());
    if spec.orbitals() != d {
        return domain(format!(
            "spec over D = {} assembled in a basis over D = {d}",
            spec.orbitals()
        ));
    }
    let dim = basis.dim();
    let mut builder = TripletBuilder::new(dim, dim);
    for term in spec.terms() {
        let s = term.order();
        if term.weight == 0.0 || s > n {
            continue;
        }
        let pref = term.weight * flat_prefactor(s);
        let comps = term.tensor.composite_masks();
        let cols = term.tensor.column_nonzeros();
        for (l, &ket) in basis.masks().iter().enumerate() {
            let mut overflow = false;
            for_each_submask(ket, s, |beta| {
                let (rest, neg_b) = annihilate_mask(ket, beta).expect("submask is occupied");
                for &(a, v) in &cols[lex_rank(d, s, beta)] {
                    let Some((bra, neg_a)) = create_mask(rest, comps[a]) else {
                        continue;
                    };
                    let sign = if neg_a ^ neg_b { -pref } else { pref };
                    builder.push(basis.rank_mask(bra), l, v * sign);
                }
                overflow |= builder.len() > nnz_cap;
            });
            if overflow {
                return Err(Error::Capacity {
                    what: format!("sector matrix D={d}, N={n}"),
                    requested: builder.len() as u128,
                    cap: nnz_cap as u128,
                });
            }
        }
    }
    Ok(SectorOperator {
        d,
        n,
        matrix: builder.finalize(),
    })
}
