//! Occupation-number basis of the N-particle sector.
//!
//! A basis state is a Slater determinant `c†_{i1} ⋯ c†_{iN} |0⟩` with
//! `i1 < ⋯ < iN`, stored as a bit mask where bit `i - 1` marks orbital `i`.
//! Orbitals are 1-based at every public boundary. Sector states are ordered
//! lexicographically on their occupied-index tuple, so the rank of a state is
//! a combinadic and never needs a lookup table.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest orbital count representable by the bit-mask encoding.
pub const MAX_ORBITALS: usize = 63;

/// Default refusal threshold for sector dimensions.
pub const DEFAULT_SECTOR_CAP: usize = 1 << 21;

/// Exact binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Binomial coefficient as `f64`, convenient for formulas.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n, k) as f64
}

#[inline]
fn below(orbital0: u32) -> u64 {
    (1u64 << orbital0) - 1
}

/// Applies `c_{iM} ⋯ c_{i1}` (rightmost acts first) to a raw mask.
///
/// Returns the resulting mask and whether the fermionic sign is negative.
#[inline]
pub(crate) fn annihilate_mask(state: u64, orbitals: u64) -> Option<(u64, bool)> {
    if state & orbitals != orbitals {
        return None;
    }
    let mut cur = state;
    let mut parity = 0u32;
    let mut rest = orbitals;
    while rest != 0 {
        let i = rest.trailing_zeros();
        parity ^= (cur & below(i)).count_ones() & 1;
        cur &= !(1u64 << i);
        rest &= rest - 1;
    }
    Some((cur, parity == 1))
}

/// Applies `c†_{i1} ⋯ c†_{iM}` (rightmost acts first) to a raw mask.
#[inline]
pub(crate) fn create_mask(state: u64, orbitals: u64) -> Option<(u64, bool)> {
    if state & orbitals != 0 {
        return None;
    }
    // Creating the highest orbital first means the already-added ones never
    // sit below a later target, so the count uses the original state only.
    let mut parity = 0u32;
    let mut rest = orbitals;
    while rest != 0 {
        let i = rest.trailing_zeros();
        parity ^= (state & below(i)).count_ones() & 1;
        rest &= rest - 1;
    }
    Some((state | orbitals, parity == 1))
}

fn mask_from_orbitals(orbitals: &[usize], strictly_increasing: bool) -> Result<u64> {
    let mut mask = 0u64;
    let mut prev = 0usize;
    for &o in orbitals {
        if o == 0 || o > MAX_ORBITALS {
            return domain(format!("orbital index {o} outside 1..={MAX_ORBITALS}"));
        }
        if strictly_increasing && o <= prev {
            return domain(format!("orbital tuple {orbitals:?} is not strictly increasing"));
        }
        if mask & (1 << (o - 1)) != 0 {
            return domain(format!("orbital {o} listed twice"));
        }
        mask |= 1 << (o - 1);
        prev = o;
    }
    Ok(mask)
}

fn orbitals_of(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut rest = mask;
    while rest != 0 {
        out.push(rest.trailing_zeros() as usize + 1);
        rest &= rest - 1;
    }
    out
}

/// One Slater determinant of the occupation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationState(u64);

impl OccupationState {
    pub const VACUUM: OccupationState = OccupationState(0);

    /// Builds a state from 1-based occupied orbitals (any order, no repeats).
    pub fn from_orbitals(orbitals: &[usize]) -> Result<Self> {
        mask_from_orbitals(orbitals, false).map(Self)
    }

    pub fn from_mask(mask: u64) -> Self {
        Self(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    /// Occupied orbitals, 1-based and ascending.
    pub fn orbitals(self) -> Vec<usize> {
        orbitals_of(self.0)
    }

    pub fn particle_count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_occupied(self, orbital: usize) -> bool {
        (1..=MAX_ORBITALS).contains(&orbital) && self.0 & (1 << (orbital - 1)) != 0
    }
}

/// Strictly increasing orbital tuple `(i1 < ⋯ < is)` labelling a row or
/// column of a flattened coupling tensor or reduced density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeIndex {
    mask: u64,
}

impl CompositeIndex {
    pub fn new(orbitals: &[usize]) -> Result<Self> {
        if orbitals.is_empty() {
            return domain("composite index needs at least one orbital");
        }
        mask_from_orbitals(orbitals, true).map(|mask| Self { mask })
    }

    pub(crate) fn from_mask(mask: u64) -> Self {
        Self { mask }
    }

    pub fn mask(self) -> u64 {
        self.mask
    }

    pub fn order(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn tuple(self) -> Vec<usize> {
        orbitals_of(self.mask)
    }
}

/// Applies the annihilation string `c_{iM} ⋯ c_{i1}` to `state`.
///
/// Returns `None` when any listed orbital is empty; otherwise the reduced
/// state and the fermionic sign (`±1.0`).
pub fn apply_annihilation_string(state: OccupationState, orbitals: CompositeIndex) -> Option<(OccupationState, f64)> {
    annihilate_mask(state.0, orbitals.mask).map(|(m, neg)| (OccupationState(m), if neg { -1.0 } else { 1.0 }))
}

/// Applies the creation string `c†_{i1} ⋯ c†_{iM}`, the adjoint of
/// [`apply_annihilation_string`] for the same tuple.
pub fn apply_creation_string(state: OccupationState, orbitals: CompositeIndex) -> Option<(OccupationState, f64)> {
    create_mask(state.0, orbitals.mask).map(|(m, neg)| (OccupationState(m), if neg { -1.0 } else { 1.0 }))
}

/// Calls `f` with every `k`-subset mask of `d` orbitals in lexicographic
/// order of the occupied tuple.
pub(crate) fn for_each_combination(d: usize, k: usize, mut f: impl FnMut(u64)) {
    if k > d {
        return;
    }
    if k == 0 {
        f(0);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(idx.iter().fold(0u64, |m, &i| m | (1 << i)));
        let mut p = k;
        while p > 0 && idx[p - 1] == d - k + p - 1 {
            p -= 1;
        }
        if p == 0 {
            return;
        }
        idx[p - 1] += 1;
        for q in p..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Calls `f` with every `k`-subset of the set bits of `mask`.
#[inline]
pub(crate) fn for_each_submask(mask: u64, k: usize, mut f: impl FnMut(u64)) {
    let bits: Vec<u32> = {
        let mut v = Vec::with_capacity(mask.count_ones() as usize);
        let mut rest = mask;
        while rest != 0 {
            v.push(rest.trailing_zeros());
            rest &= rest - 1;
        }
        v
    };
    for_each_combination(bits.len(), k, |sel| {
        let mut out = 0u64;
        let mut rest = sel;
        while rest != 0 {
            out |= 1 << bits[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        f(out)
    });
}

/// Ordered list of all `C(d, s)` composite indices of order `s`.
pub fn enumerate_composites(d: usize, s: usize) -> Result<Vec<CompositeIndex>> {
    if s == 0 || s > d || d > MAX_ORBITALS {
        return domain(format!("composite order {s} out of range for D = {d}"));
    }
    let mut out = Vec::with_capacity(binomial(d, s) as usize);
    for_each_combination(d, s, |m| out.push(CompositeIndex::from_mask(m)));
    Ok(out)
}

/// Lexicographic rank of a `k`-subset mask among all `k`-subsets of `d`.
#[inline]
pub(crate) fn lex_rank(d: usize, k: usize, mask: u64) -> usize {
    // rank = C(d,k) - 1 - Σ_j C(d-1-c_j, k-j) over the sorted members c_j
    let mut acc = 0u64;
    let mut rest = mask;
    let mut j = 0;
    while rest != 0 {
        let c = rest.trailing_zeros() as usize;
        acc += binomial(d - 1 - c, k - j);
        j += 1;
        rest &= rest - 1;
    }
    (binomial(d, k) - 1 - acc) as usize
}

/// All `C(D, N)` Slater determinants of the N-particle sector.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    d: usize,
    n: usize,
    states: Vec<u64>,
    binom: Vec<Vec<u64>>,
}

impl SectorBasis {
    /// Enumerates the sector, refusing anything above [`DEFAULT_SECTOR_CAP`].
    pub fn new(d: usize, n: usize) -> Result<Self> {
        Self::with_cap(d, n, DEFAULT_SECTOR_CAP)
    }

    pub fn with_cap(d: usize, n: usize, cap: usize) -> Result<Self> {
        if d > MAX_ORBITALS {
            return domain(format!("D = {d} exceeds the {MAX_ORBITALS}-orbital limit"));
        }
        if n > d {
            return domain(format!("N = {n} exceeds D = {d}"));
        }
        let dim = binomial(d, n);
        if dim > cap as u64 {
            return Err(Error::Capacity {
                what: format!("sector D={d}, N={n}"),
                requested: dim as u128,
                cap: cap as u128,
            });
        }
        let mut states = Vec::with_capacity(dim as usize);
        for_each_combination(d, n, |m| states.push(m));
        let binom = (0..=d).map(|a| (0..=n + 1).map(|b| binomial(a, b)).collect()).collect();
        Ok(Self { d, n, states, binom })
    }

    pub fn orbitals(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, k: usize) -> OccupationState {
        OccupationState(self.states[k])
    }

    pub fn masks(&self) -> &[u64] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = OccupationState> + '_ {
        self.states.iter().map(|&m| OccupationState(m))
    }

    /// Inverse of [`SectorBasis::unrank`], validated.
    pub fn rank(&self, state: OccupationState) -> Result<usize> {
        if state.particle_count() != self.n {
            return domain(format!(
                "state has {} particles, sector holds {}",
                state.particle_count(),
                self.n
            ));
        }
        if self.d < 64 && state.0 >> self.d != 0 {
            return domain(format!("state occupies orbitals beyond D = {}", self.d));
        }
        Ok(self.rank_mask(state.0))
    }

    /// Unchecked combinadic rank of a mask known to lie in this sector.
    #[inline]
    pub fn rank_mask(&self, mask: u64) -> usize {
        let (d, k) = (self.d, self.n);
        let mut acc = 0u64;
        let mut rest = mask;
        let mut j = 0;
        while rest != 0 {
            let c = rest.trailing_zeros() as usize;
            acc += self.binom[d - 1 - c][k - j];
            j += 1;
            rest &= rest - 1;
        }
        (self.binom[d][k] - 1 - acc) as usize
    }

    /// The `k`-th state in canonical order, computed combinatorially.
    pub fn unrank(&self, k: usize) -> Result<OccupationState> {
        if k >= self.dim() {
            return domain(format!("rank {k} outside sector of dimension {}", self.dim()));
        }
        let mut rem = k as u64;
        let mut mask = 0u64;
        let mut c = 0usize;
        for p in 0..self.n {
            loop {
                let count = binomial(self.d - 1 - c, self.n - 1 - p);
                if rem < count {
                    break;
                }
                rem -= count;
                c += 1;
            }
            mask |= 1 << c;
            c += 1;
        }
        Ok(OccupationState(mask))
    }
}

/// Convenience wrapper matching the sector-enumeration contract.
pub fn enumerate_sector(d: usize, n: usize) -> Result<SectorBasis> {
    SectorBasis::new(d, n)
}
