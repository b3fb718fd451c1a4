//! U(1)^l charge structure of reduced density matrices.
//!
//! With `l` conserved species the orbitals split as `(site a, species σ)`
//! and `ρ^(M)` of a charge eigenstate is block diagonal in the species
//! content `(m₁, …, m_l)` of its composite indices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fockspace::{binomial, binomial_f64, for_each_combination, SectorBasis};
use crate::rdm::{hermitian_eigenvalues, EntropyKind, EntropyValue, Normalization, ReducedDensityMatrix, PSD_TOL};

/// Species-major split of `D` orbitals: orbital `a + σ·(D/l)` (1-based
/// site `a`, 0-based species `σ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargePartition {
    l: usize,
    sites: usize,
}

impl ChargePartition {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if l == 0 || !d.is_multiple_of(l) {
            return domain(format!("cannot split D = {d} orbitals into {l} species"));
        }
        Ok(Self { l, sites: d / l })
    }

    /// Two species (spin up, spin down) over `sites` sites.
    pub fn spinful(sites: usize) -> Self {
        Self { l: 2, sites }
    }

    pub fn species(&self) -> usize {
        self.l
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn orbitals(&self) -> usize {
        self.l * self.sites
    }

    /// `(site, species)` of a 1-based orbital; site is 1-based.
    pub fn locate(&self, orbital: usize) -> (usize, usize) {
        let i = orbital - 1;
        (i % self.sites + 1, i / self.sites)
    }

    pub fn orbital(&self, site: usize, species: usize) -> usize {
        site + species * self.sites
    }

    pub fn species_mask(&self, sigma: usize) -> u64 {
        ((1u64 << self.sites) - 1) << (sigma * self.sites)
    }

    /// Per-species occupation counts of a mask.
    pub fn label_of(&self, mask: u64) -> BlockLabel {
        BlockLabel(
            (0..self.l)
                .map(|s| (mask & self.species_mask(s)).count_ones() as usize)
                .collect(),
        )
    }
}

/// Species content `(m₁, …, m_l)` of a composite index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockLabel(pub Vec<usize>);

impl BlockLabel {
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Number of labels with `Σ m_σ = M`: `C(M+l-1, l-1)`.
pub fn block_count(m: usize, l: usize) -> u64 {
    binomial(m + l - 1, l - 1)
}

/// `Π_σ C(N_σ, m_σ)`; zero for blocks that cannot be occupied.
pub fn block_trace(label: &BlockLabel, n_sigma: &[usize]) -> f64 {
    label.0.iter().zip(n_sigma).map(|(&m, &n)| binomial_f64(n, m)).product()
}

/// `Π_σ C(D/l, m_σ)`.
pub fn block_dimension(label: &BlockLabel, d: usize, l: usize) -> u64 {
    label.0.iter().map(|&m| binomial(d / l, m)).product()
}

/// All labels of order `m` over `l` species, lexicographically ascending.
pub fn enumerate_labels(m: usize, l: usize) -> Vec<BlockLabel> {
    fn rec(rest: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<BlockLabel>) {
        if slots == 1 {
            cur.push(rest);
            out.push(BlockLabel(cur.clone()));
            cur.pop();
            return;
        }
        for k in 0..=rest {
            cur.push(k);
            rec(rest - k, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if l > 0 {
        rec(m, l, &mut Vec::with_capacity(l), &mut out);
    }
    out
}

fn check_sector(n_sigma: &[usize], d: usize, l: usize) -> Result<()> {
    if l == 0 || !d.is_multiple_of(l) || n_sigma.len() != l {
        return domain(format!("need {l} species counts for an l = {l} split of D = {d}"));
    }
    if let Some(n) = n_sigma.iter().find(|&&n| n > d / l) {
        return domain(format!("species count {n} exceeds {} sites", d / l));
    }
    Ok(())
}

/// Largest unnormalized von Neumann entropy of `ρ^(M)` for a state with
/// definite species counts: `Σ' trace · ln(dimension / trace)` over labels
/// with `m_σ ≤ N_σ`.
pub fn refined_entropy_bound(n_sigma: &[usize], d: usize, l: usize, m: usize) -> Result<EntropyValue> {
    check_sector(n_sigma, d, l)?;
    let value = enumerate_labels(m, l)
        .iter()
        .filter(|lab| lab.0.iter().zip(n_sigma).all(|(m, n)| m <= n))
        .map(|lab| {
            let t = block_trace(lab, n_sigma);
            t * (block_dimension(lab, d, l) as f64 / t).ln()
        })
        .sum();
    Ok(EntropyValue {
        kind: EntropyKind::VonNeumann,
        value,
        normalization: Normalization::Unnormalized,
    })
}

#[derive(Debug, Clone)]
pub struct Block {
    pub label: BlockLabel,
    /// RDM rows belonging to the block, ascending.
    pub indices: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
    pub trace: f64,
    pub expected_trace: f64,
}

impl Block {
    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    /// Unnormalized von Neumann entropy of the block.
    pub fn entropy(&self) -> Result<f64> {
        let mut s = 0.0;
        for v in hermitian_eigenvalues(&self.matrix) {
            if v < -PSD_TOL * self.expected_trace.max(1.0) {
                return Err(Error::NumericalPsd(v));
            }
            if v > 0.0 {
                s -= v * v.ln();
            }
        }
        Ok(s.max(0.0))
    }

    pub fn max_entropy(&self) -> f64 {
        self.expected_trace * (self.dimension() as f64 / self.expected_trace).ln()
    }
}

#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
    /// Largest `|ρ_αβ|` outside the retained diagonal blocks.
    pub off_block_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub labels: Vec<BlockLabel>,
    pub traces: Vec<f64>,
    pub dimensions: Vec<usize>,
    pub entropies: Vec<f64>,
    pub off_block_residual: f64,
}

impl BlockDecomposition {
    pub fn entropies(&self) -> Result<Vec<f64>> {
        self.blocks.iter().map(Block::entropy).collect()
    }

    /// Sum of block entropies, equal to the entropy of the full RDM.
    pub fn total_entropy(&self) -> Result<f64> {
        Ok(self.entropies()?.iter().sum())
    }

    pub fn summary(&self) -> Result<BlockSummary> {
        Ok(BlockSummary {
            labels: self.blocks.iter().map(|b| b.label.clone()).collect(),
            traces: self.blocks.iter().map(|b| b.trace).collect(),
            dimensions: self.blocks.iter().map(Block::dimension).collect(),
            entropies: self.entropies()?,
            off_block_residual: self.off_block_residual,
        })
    }
}

/// Splits `ρ^(M)` into charge blocks. Blocks with some `m_σ > N_σ` are
/// dropped; their entries count toward the off-block residual.
pub fn block_decompose(
    rdm: &ReducedDensityMatrix,
    partition: &ChargePartition,
    n_sigma: &[usize],
    tol: f64,
) -> Result<BlockDecomposition> {
    let d = rdm.orbitals();
    if partition.orbitals() != d {
        return Err(Error::Validation(format!(
            "partition covers {} orbitals, RDM has {d}",
            partition.orbitals()
        )));
    }
    check_sector(n_sigma, d, partition.species())?;
    let rho = rdm.unnormalized();
    let mut labels = Vec::with_capacity(rho.dim());
    for_each_combination(d, rho.order(), |mask| labels.push(partition.label_of(mask)));

    let allowed = |lab: &BlockLabel| lab.0.iter().zip(n_sigma).all(|(m, n)| m <= n);
    let mut blocks: Vec<Block> = enumerate_labels(rho.order(), partition.species())
        .into_iter()
        .filter(|lab| allowed(lab))
        .map(|label| Block {
            indices: (0..labels.len()).filter(|&i| labels[i] == label).collect(),
            expected_trace: block_trace(&label, n_sigma),
            label,
            matrix: DMatrix::zeros(0, 0),
            trace: 0.0,
        })
        .collect();

    let mat = rho.matrix();
    let mut residual = 0.0f64;
    let mut violated = vec![false; partition.species()];
    for a in 0..labels.len() {
        for b in 0..labels.len() {
            let inside = labels[a] == labels[b] && allowed(&labels[a]);
            if inside {
                continue;
            }
            let v = mat[(a, b)].norm();
            residual = residual.max(v);
            if v > tol {
                for (s, flag) in violated.iter_mut().enumerate() {
                    if labels[a].0[s] != labels[b].0[s] || labels[a].0[s] > n_sigma[s] {
                        *flag = true;
                    }
                }
            }
        }
    }
    if residual > tol {
        return Err(Error::NotChargeEigenstate {
            residual,
            species: (0..violated.len()).filter(|&s| violated[s]).collect(),
        });
    }
    for block in &mut blocks {
        let idx = &block.indices;
        block.matrix = DMatrix::from_fn(idx.len(), idx.len(), |r, c| mat[(idx[r], idx[c])]);
        block.trace = block.matrix.trace().re;
    }
    Ok(BlockDecomposition {
        blocks,
        off_block_residual: residual,
    })
}

/// Per-species counts if `state` is an eigenvector of every `N̂_σ`
/// (variance below `tol`), `None` otherwise.
pub fn charge_sector_of(
    state: &[Complex64],
    basis: &SectorBasis,
    partition: &ChargePartition,
    tol: f64,
) -> Option<Vec<usize>> {
    let norm2: f64 = state.iter().map(|v| v.norm_sqr()).sum();
    if norm2 == 0.0 || partition.orbitals() != basis.orbitals() {
        return None;
    }
    let mut out = Vec::with_capacity(partition.species());
    for s in 0..partition.species() {
        let sm = partition.species_mask(s);
        let (mut mean, mut sq) = (0.0, 0.0);
        for (k, v) in basis.masks().iter().zip(state) {
            let c = (k & sm).count_ones() as f64;
            let w = v.norm_sqr() / norm2;
            mean += w * c;
            sq += w * c * c;
        }
        if sq - mean * mean > tol {
            return None;
        }
        out.push(mean.round() as usize);
    }
    Some(out)
}
