mod common;

use common::*;
use nucdyn::hamiltonian::{exact_diagonalize, load_builtin_dmanh, NuclearHamiltonian, DMANH_TRANSFORMED_MILLIHARTREE};
use nucdyn::symmetry::*;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_params(n: usize, transverse: bool, rng: &mut ChaCha8Rng) -> IsingParameters {
    let mut p = IsingParameters::zeros(n);
    p.jx = random_couplings(n, 0.01, rng);
    p.jy = random_couplings(n, 0.01, rng);
    p.jz = random_couplings(n, 0.01, rng);
    p.bz = random_fields(n, 0.01, rng);
    if transverse {
        p.bx = random_fields(n, 0.01, rng);
        p.by = random_fields(n, 0.01, rng);
    }
    p
}

/// Toeplitz kinetic part plus an arbitrary diagonal.
fn toeplitz_hamiltonian(t: &[f64], diag: &[f64]) -> NuclearHamiltonian {
    let n = diag.len();
    let m = RMat::from_fn(n, n, |i, l| if i == l { diag[i] } else { t[i.abs_diff(l)] });
    NuclearHamiltonian::from_matrix(m, None).unwrap()
}

#[test]
fn computational_ising_matches_kronecker_products() {
    let mut rng = rng(21);
    for n in 1..=4 {
        let p = random_params(n, true, &mut rng);
        let reference = ising_kronecker(n, &p.jx, &p.jy, &p.jz, &p.bx, &p.by, &p.bz);
        assert!(max_entry_distance(&ising_matrix_computational(&p), &reference) < 1e-15);
    }
}

#[test]
fn permuted_ising_is_a_relabeling() {
    let mut rng = rng(22);
    let p = random_params(3, true, &mut rng);
    let comp = ising_matrix_computational(&p);
    let perm = parity_permutation(3);
    let permuted = ising_matrix(&p);
    for a in 0..8 {
        for b in 0..8 {
            assert_eq!(permuted[(a, b)], comp[(perm[a], perm[b])]);
        }
    }
    assert_eq!(perm, vec![0, 3, 5, 6, 1, 2, 4, 7]);
}

#[test]
fn longitudinal_ising_is_block_diagonal() {
    let mut rng = rng(23);
    for n in 2..=4 {
        let p = random_params(n, false, &mut rng);
        let m = ising_matrix(&p);
        let h = m.nrows() / 2;
        assert!(m.view((0, h), (h, h)).iter().all(|z| z.norm() == 0.0));
        assert!(m.view((h, 0), (h, h)).iter().all(|z| z.norm() == 0.0));
        assert!(ising_blocks(&p).is_ok());
    }
    let p = random_params(3, true, &mut rng);
    assert!(ising_blocks(&p).is_err());
}

#[test]
fn handle_counts() {
    let expected = [(1, 1), (2, 5), (3, 12), (4, 22), (5, 35), (6, 51)];
    for (n, count) in expected {
        assert_eq!(handle_count(n), count);
    }
}

#[test]
fn builtin_transform_against_printed_table() {
    let h = load_builtin_dmanh();
    let b = transform(&h).unwrap();
    let printed = RMat::from_fn(8, 8, |i, j| DMANH_TRANSFORMED_MILLIHARTREE[i][j] * 1e-3);
    let block_part = |m: &RMat| {
        let mut out = m.clone();
        out.view_mut((0, 4), (4, 4)).fill(0.0);
        out.view_mut((4, 0), (4, 4)).fill(0.0);
        out
    };
    let dev = (block_part(b.full()) - printed).amax();
    assert!(dev <= 0.05e-3, "block deviation {dev:e} Ha");
    assert!((b.off_block_residual - 0.06e-3).abs() < 1e-9);
    assert!(b.needs_warning());
    assert!(b.formula_residual < 1e-15);
}

#[test]
fn transform_spectrum_matches_when_blocks_decouple() {
    let t = [0.0, -7.478e-3, 0.5691e-3, 0.2715e-3, -0.2739e-3, 0.1491e-3, -0.0584e-3, 0.0168e-3];
    let half = [37.66e-3, 7.03e-3, 0.0e-3, 0.018e-3];
    let diag: Vec<f64> = half.iter().chain(half.iter().rev()).copied().collect();
    let h = toeplitz_hamiltonian(&t, &diag);
    let b = transform(&h).unwrap();
    assert!(b.off_block_residual <= 1e-12);
    assert!(!b.needs_warning());
    let exact = exact_diagonalize(&h).unwrap().eigenvalues;
    for (x, y) in b.block_eigenvalues().iter().zip(exact.iter()) {
        assert!((x - y).abs() <= 1e-10);
    }
}

#[test]
fn fit_round_trips_longitudinal_parameters() {
    let mut rng = rng(24);
    for n in 2..=4 {
        let p = random_params(n, false, &mut rng);
        let fit = fit_ising_params(&ising_blocks(&p).unwrap()).unwrap();
        assert!(fit.residual < 1e-12);
        assert!((fit.params.bz.iter().zip(&p.bz)).all(|(a, b)| (a - b).abs() <= 1e-10));
        for i in 0..n {
            for j in i + 1..n {
                assert!((fit.params.jz[(i, j)] - p.jz[(i, j)]).abs() <= 1e-10);
                assert!((fit.params.jx[(i, j)] - p.jx[(i, j)]).abs() <= 1e-10);
                assert!((fit.params.jy[(i, j)] - p.jy[(i, j)]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn fit_of_builtin_blocks_reports_residual() {
    let fit = fit_ising_params(&transform(&load_builtin_dmanh()).unwrap()).unwrap();
    assert!(fit.residual > 0.0 && fit.residual.is_finite());
    assert!(fit.params.is_longitudinal());
}

#[test]
fn csv_round_trips() {
    let mut rng = rng(25);
    let p = random_params(3, true, &mut rng);
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    assert_eq!(IsingParameters::read_csv(buf.as_slice(), 3).unwrap(), p);

    let m = transform(&load_builtin_dmanh()).unwrap().full().clone();
    let mut buf = Vec::new();
    write_entries_csv(&m, &mut buf).unwrap();
    assert_eq!(read_entries_csv(buf.as_slice()).unwrap(), m);

    assert!(IsingParameters::read_csv("term,i,j,value\njx,1,0,0.1\n".as_bytes(), 3).is_err());
    assert!(IsingParameters::read_csv("term,i,j,value\nbz,4,4,0.1\n".as_bytes(), 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflector_is_orthogonal(log_n in 1u32..6, entries in prop::collection::vec(-1.0f64..1.0, 32 * 32)) {
        let n = 1usize << log_n;
        let g = build_reflector(n).unwrap();
        let gm = g.matrix();
        prop_assert!((gm * gm.transpose() - RMat::identity(n, n)).amax() <= 1e-12);
        let a = RMat::from_fn(n, n, |i, j| entries[i * 32 + j]);
        let h = &a + a.transpose();
        let back = gm.transpose() * (gm * &h * gm.transpose()) * gm;
        prop_assert!((back - h).amax() <= 1e-12);
    }

    #[test]
    fn closed_form_matches_similarity(
        t in prop::collection::vec(-0.01f64..0.01, 16),
        diag in prop::collection::vec(-0.05f64..0.05, 16),
    ) {
        let h = toeplitz_hamiltonian(&t, &diag);
        let g = build_reflector(16).unwrap();
        let direct = g.matrix() * h.matrix() * g.matrix().transpose();
        prop_assert!((closed_form_transform(&h) - direct).amax() <= 1e-14);
    }

    #[test]
    fn symmetric_diagonal_decouples_blocks(
        t in prop::collection::vec(-0.01f64..0.01, 8),
        half in prop::collection::vec(-0.05f64..0.05, 4),
    ) {
        let diag: Vec<f64> = half.iter().chain(half.iter().rev()).copied().collect();
        let h = toeplitz_hamiltonian(&t, &diag);
        let b = transform(&h).unwrap();
        prop_assert!(b.off_block_residual <= 1e-12);
        let exact = exact_diagonalize(&h).unwrap().eigenvalues;
        for (x, y) in b.block_eigenvalues().iter().zip(exact.iter()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn fit_inverts_forward_construction(seed in 0u64..10_000, n in 2usize..5) {
        let mut rng = rng(seed);
        let p = random_params(n, false, &mut rng);
        let fit = fit_ising_params(&ising_blocks(&p).unwrap()).unwrap();
        let rebuilt = ising_matrix(&fit.params);
        prop_assert!(max_entry_distance(&rebuilt, &ising_matrix(&p)) <= 1e-10);
    }
}
