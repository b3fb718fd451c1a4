mod support;

use approx::assert_abs_diff_eq;
use mbent_core::operators::TensorSource;
use mbent_core::*;
use nalgebra::DMatrix;
use support::fock::{self, Fock};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sector_block(fock: &Fock, h: &fock::Mat, n: usize) -> fock::Mat {
    let states = fock.sector(n);
    DMatrix::from_fn(states.len(), states.len(), |r, k| h[(states[r], states[k])])
}

fn full_hamiltonian(fock: &Fock, spec: &HamiltonianSpec) -> fock::Mat {
    let mut h = fock::Mat::zeros(fock.dim(), fock.dim());
    for term in spec.terms() {
        h += fock.flat_operator(term.order(), term.weight, term.tensor.flat());
    }
    h
}

#[test]
fn sector_assembly_matches_fock_space() {
    for d in 3..=6 {
        let fock = Fock::new(d);
        let spec = build_syk(d, 0.8, 1.1, 0.6, [d as u64, 40 + d as u64, 80 + d as u64]).unwrap();
        let h = full_hamiltonian(&fock, &spec);
        for n in 0..=d {
            let op = assemble_sector_matrix(&spec, &enumerate_sector(d, n).unwrap()).unwrap();
            let diff = op.to_dense() - sector_block(&fock, &h, n);
            assert!(fock::max_abs(&diff) < 1e-12, "D={d} N={n}");
        }
    }
}

#[test]
fn fock_space_hamiltonian_conserves_number() {
    for d in 3..=6 {
        let fock = Fock::new(d);
        let spec = build_syk(d, 1.0, 1.0, 1.0, [1, 2, 3]).unwrap();
        let h = full_hamiltonian(&fock, &spec);
        let n = fock.number(0..d);
        assert!(fock::max_abs(&(&h * &n - &n * &h)) < 1e-12);
    }
}

#[test]
fn hubbard_conserves_each_spin_species() {
    for sites in 1..=3 {
        for lattice in [
            LatticeSpec::chain(sites, 1.0, Boundary::Open),
            LatticeSpec::chain(sites, 0.7, Boundary::Periodic).with_zeeman(0.3),
        ] {
            let spec = build_hubbard(&lattice, 2.5).unwrap();
            let fock = Fock::new(2 * sites);
            let h = full_hamiltonian(&fock, &spec);
            let up = fock.number(0..sites);
            let down = fock.number(sites..2 * sites);
            assert!(fock::max_abs(&(&h * &up - &up * &h)) < 1e-12);
            assert!(fock::max_abs(&(&h * &down - &down * &h)) < 1e-12);
        }
    }
}

#[test]
fn hubbard_matches_second_quantized_form() {
    // -τ Σ c†_{aσ} c_{bσ} + U Σ n_{a↑} n_{a↓} - h/2 Σ (n↑ - n↓)
    let (sites, tau, u, h) = (3usize, 0.9, 3.0, 0.2);
    let spec = build_hubbard(&LatticeSpec::chain(sites, tau, Boundary::Open).with_zeeman(h), u).unwrap();
    let fock = Fock::new(2 * sites);
    let mut want = fock::Mat::zeros(fock.dim(), fock.dim());
    for spin in 0..2 {
        for a in 0..sites - 1 {
            let (i, j) = (a + spin * sites, a + 1 + spin * sites);
            want -= (&fock.cdag[i] * &fock.c[j] + &fock.cdag[j] * &fock.c[i]) * c(tau, 0.0);
        }
    }
    for a in 0..sites {
        let nu = &fock.cdag[a] * &fock.c[a];
        let nd = &fock.cdag[a + sites] * &fock.c[a + sites];
        want += (&nu * &nd) * c(u, 0.0);
        want -= (nu - nd) * c(h / 2.0, 0.0);
    }
    assert!(fock::max_abs(&(full_hamiltonian(&fock, &spec) - want)) < 1e-12);
}

#[test]
fn raw_two_body_tensor_flattens_faithfully() {
    // arbitrary (non-antisymmetric) raw tensor with raw_{ij} = conj(raw_{ji})
    let d = 4;
    let noise = mbent_core::spectra::seeded_unit_vector(d * d * d * d * 2, 77);
    let idx = |i: &[usize], j: &[usize]| ((i[0] * d + i[1]) * d + j[0]) * d + j[1];
    let base = |i: &[usize], j: &[usize]| noise[2 * idx(i, j)] * 5.0;
    let raw_fn = |i: &[usize], j: &[usize]| base(i, j) + base(j, i).conj();
    let mut raw = RawTensor::zeros(2, d);
    for i0 in 0..d {
        for i1 in 0..d {
            for j0 in 0..d {
                for j1 in 0..d {
                    raw.set(&[i0, i1], &[j0, j1], raw_fn(&[i0, i1], &[j0, j1]));
                }
            }
        }
    }
    let flat = antisymmetrize_and_flatten(&raw).unwrap();
    let mut spec = HamiltonianSpec::new(d);
    spec.push_term(1.0, flat, TensorSource::Inline).unwrap();
    let fock = Fock::new(d);
    let want = fock.raw_operator(2, raw_fn);
    let op = assemble_sector_matrix(&spec, &enumerate_sector(d, 2).unwrap()).unwrap();
    let block = sector_block(&fock, &want, 2);
    assert_eq!(block.len(), 36);
    assert!(fock::max_abs(&(op.to_dense() - block)) < 1e-12);
}

#[test]
fn two_site_hubbard_spectrum() {
    for (tau, u) in [(1.0, 3.0), (0.5, 1.0), (1.0, 0.0)] {
        let spec = build_hubbard(&LatticeSpec::chain(2, tau, Boundary::Open), u).unwrap();
        let op = assemble_sector_matrix(&spec, &enumerate_sector(4, 2).unwrap()).unwrap();
        let sol = full_diagonalize(&op, 4096).unwrap();
        let root = (u * u + 16.0 * tau * tau).sqrt();
        // S_z = 0 block {0, U, (U ± root)/2} plus the two polarized triplets at 0
        let mut want = vec![0.0, 0.0, 0.0, u, (u + root) / 2.0, (u - root) / 2.0];
        want.sort_by(f64::total_cmp);
        for (a, b) in sol.eigenvalues.iter().zip(&want) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
    // atomic limit: doubly occupied states at U, singly occupied at 0
    let spec = build_hubbard(&LatticeSpec::chain(2, 0.0, Boundary::Open), 2.0).unwrap();
    let op = assemble_sector_matrix(&spec, &enumerate_sector(4, 2).unwrap()).unwrap();
    let ev = full_diagonalize(&op, 4096).unwrap().eigenvalues;
    for (a, b) in ev.iter().zip([0.0, 0.0, 0.0, 0.0, 2.0, 2.0]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
    }
}

#[test]
fn gram_rdm_matches_direct_evaluation() {
    for d in 1..=6 {
        let fock = Fock::new(d);
        for n in 1..=d {
            let basis = enumerate_sector(d, n).unwrap();
            for trial in 0..3u64 {
                let psi = mbent_core::spectra::seeded_unit_vector(basis.dim(), trial * 1000 + (d * 10 + n) as u64);
                let full = fock::embed(&fock, n, psi.as_slice());
                for m in 1..=n {
                    let rho = compute_rdm(psi.as_slice(), &basis, m).unwrap();
                    let want = fock::direct_rdm(&fock, &full, m);
                    assert!(fock::max_abs(&(rho.matrix() - want)) < 1e-12, "D={d} N={n} M={m}");
                }
            }
        }
    }
}

#[test]
fn free_hubbard_ground_state_is_slater() {
    // U = 0 ground states are determinants: S^(M) = 0
    let spec = build_hubbard(&LatticeSpec::chain(3, 1.0, Boundary::Open).with_zeeman(0.05), 0.0).unwrap();
    let basis = enumerate_sector(6, 3).unwrap();
    let op = assemble_sector_matrix(&spec, &basis).unwrap();
    let gs = ground_state(&op, &SolverOptions::default()).unwrap();
    for m in 1..=3 {
        let rho = compute_rdm(gs.vector.as_slice(), &basis, m).unwrap();
        assert!(
            von_neumann_entropy(&rho, Normalization::Unnormalized)
                .unwrap()
                .value
                .abs()
                < 1e-9
        );
    }
}
