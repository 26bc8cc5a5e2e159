mod common;

use common::*;
use nalgebra::DVector;
use nucdyn::hamiltonian::{DafKineticSpec, SpatialGrid};
use nucdyn::mps::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_mps(dims: &[usize], bonds: &[usize], rng: &mut ChaCha8Rng) -> MpsState {
    let mut b = vec![1];
    b.extend_from_slice(bonds);
    b.push(1);
    let cores = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| MpsCore {
            left: b[k],
            site: d,
            right: b[k + 1],
            data: (0..b[k] * d * b[k + 1]).map(|_| gaussian(rng)).collect(),
        })
        .collect();
    MpsState::new(cores).unwrap()
}

fn random_mpo(dims: &[usize], bonds: &[usize], rng: &mut ChaCha8Rng) -> MpoOperator {
    let mut b = vec![1];
    b.extend_from_slice(bonds);
    b.push(1);
    let cores = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| MpoCore {
            left: b[k],
            out: d,
            inp: d,
            right: b[k + 1],
            data: (0..b[k] * d * d * b[k + 1]).map(|_| gaussian(rng)).collect(),
        })
        .collect();
    MpoOperator::new(cores).unwrap()
}

/// Sums over every bond index assignment explicitly.
fn contract_mps(psi: &MpsState) -> DVector<C64> {
    let dims = psi.site_dims();
    let total: usize = dims.iter().product();
    DVector::from_fn(total, |flat, _| {
        let mut idx = vec![0; dims.len()];
        let mut rem = flat;
        for k in (0..dims.len()).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        let mut row = vec![C64::new(1.0, 0.0)];
        for (k, core) in psi.cores().iter().enumerate() {
            row = (0..core.right)
                .map(|r| (0..core.left).map(|l| row[l] * core.get(l, idx[k], r)).sum())
                .collect();
        }
        row[0]
    })
}

fn contract_mpo(op: &MpoOperator) -> CMat {
    let dims: Vec<usize> = op.cores().iter().map(|c| c.out).collect();
    let total: usize = dims.iter().product();
    let split = |flat: usize| {
        let mut idx = vec![0; dims.len()];
        let mut rem = flat;
        for k in (0..dims.len()).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        idx
    };
    CMat::from_fn(total, total, |i, j| {
        let (a, b) = (split(i), split(j));
        let mut row = vec![C64::new(1.0, 0.0)];
        for (k, core) in op.cores().iter().enumerate() {
            row = (0..core.right)
                .map(|r| (0..core.left).map(|l| row[l] * core.get(l, a[k], b[k], r)).sum())
                .collect();
        }
        row[0]
    })
}

fn vec_distance(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn dense_views_match_explicit_contraction() {
    let mut rng = rng(61);
    let psi = random_mps(&[3, 4, 2], &[2, 3], &mut rng);
    assert!(vec_distance(&psi.to_dense(), &contract_mps(&psi)) < 1e-12);
    let op = random_mpo(&[2, 3, 2], &[3, 2], &mut rng);
    assert!(max_entry_distance(&op.to_dense(), &contract_mpo(&op)) < 1e-12);
}

#[test]
fn apply_mpo_equals_dense_product() {
    let mut rng = rng(62);
    for _ in 0..10 {
        let psi = random_mps(&[2, 3, 4], &[2, 3], &mut rng);
        let op = random_mpo(&[2, 3, 4], &[3, 2], &mut rng);
        let out = apply_mpo(&op, &psi).unwrap();
        assert_eq!(out.bond_dims(), vec![6, 6]);
        let expected = contract_mpo(&op) * contract_mps(&psi);
        assert!(vec_distance(&contract_mps(&out), &expected) < 1e-10);
    }
}

#[test]
fn tt_svd_is_exact_without_truncation() {
    let mut rng = rng(63);
    let dims = [3, 2, 4, 2];
    let v = DVector::from_fn(48, |_, _| gaussian(&mut rng));
    let (psi, report) = mps_from_dense(&v, &dims, 0.0, usize::MAX).unwrap();
    assert!(report.discarded_weight < 1e-20);
    assert!(vec_distance(&contract_mps(&psi), &v) < 1e-12);
    assert_eq!(psi.bond_dims(), vec![3, 6, 2]);
}

#[test]
fn mpo_from_dense_is_exact_without_truncation() {
    let mut rng = rng(64);
    let u = haar_unitary(12, &mut rng);
    let (op, _) = mpo_from_dense(&u, &[3, 4], 0.0, usize::MAX).unwrap();
    assert!(max_entry_distance(&contract_mpo(&op), &u) < 1e-12);
}

#[test]
fn unitary_application_keeps_norm() {
    let mut rng = rng(65);
    let dims = [2, 4, 2];
    let u = haar_unitary(16, &mut rng);
    let (op, _) = mpo_from_dense(&u, &dims, 0.0, usize::MAX).unwrap();
    let v = DVector::from_fn(16, |_, _| gaussian(&mut rng));
    let v = &v / C64::new(v.norm(), 0.0);
    let (psi, _) = mps_from_dense(&v, &dims, 0.0, usize::MAX).unwrap();
    let out = apply_mpo(&op, &psi).unwrap();
    assert!((out.norm() - 1.0).abs() <= 1e-9);
    let (squeezed, _) = compress(&out, 0.0, usize::MAX, false).unwrap();
    assert!((squeezed.norm() - 1.0).abs() <= 1e-9);
    assert!(vec_distance(&contract_mps(&squeezed), &(u * v)) < 1e-10);
}

#[test]
fn discarded_weight_grows_as_bond_shrinks() {
    let mut rng = rng(66);
    let psi = random_mps(&[4, 4, 4, 4], &[4, 8, 4], &mut rng);
    let mut last = -1.0;
    for chi in [8, 6, 4, 3, 2, 1] {
        let (c, report) = compress(&psi, 0.0, chi, false).unwrap();
        assert!(c.max_bond() <= chi);
        assert!(report.discarded_weight >= last - 1e-12);
        last = report.discarded_weight;
    }
    assert!(last > 0.0);
}

#[test]
fn kinetic_mpo_is_sum_of_locals() {
    let grid = SpatialGrid::new(8, -1.0, 1.0).unwrap();
    let spec = DafKineticSpec::for_grid(&grid, 1836.0).unwrap();
    let mut counts = Vec::new();
    for n in 1..=6 {
        let op = kinetic_mpo(&vec![(grid, spec); n]).unwrap();
        assert!(op.bond_dims().iter().all(|&b| b == 2));
        counts.push(op.parameter_count());
        assert!(op.parameter_count() <= 4 * 64 * n);
        if n <= 3 {
            let k = nucdyn::hamiltonian::kinetic_matrix(&grid, &spec).map(|x| C64::new(x, 0.0));
            let dense = dense_sum_of_locals(&vec![k; n]);
            assert!(max_entry_distance(&contract_mpo(&op), &dense) < 1e-15);
        }
    }
    let steps: Vec<usize> = counts.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps[1..].iter().all(|&s| s == steps[1]), "{counts:?}");
}

#[test]
fn text_forms_round_trip() {
    let mut rng = rng(67);
    let psi = random_mps(&[2, 3, 2], &[2, 2], &mut rng);
    assert_eq!(MpsState::from_text(&psi.to_text()).unwrap(), psi);
    let op = random_mpo(&[2, 2], &[3], &mut rng);
    assert_eq!(MpoOperator::from_text(&op.to_text()).unwrap(), op);
    assert!(MpsState::from_text("mps 1\ncore 1 2 1\n1 0\n").is_err());
}

#[test]
fn propagation_matches_dense_marginals() {
    let (dims, h) = coupled_double_well_model(8, 0.002).unwrap();
    let mut well = DVector::from_element(8, C64::new(0.0, 0.0));
    well[0] = C64::new(1.0, 0.0);
    let ho = DVector::from_fn(8, |i, _| C64::new((-((i as f64 - 3.5) / 1.5).powi(2)).exp(), 0.0));
    let ho = &ho / C64::new(ho.norm(), 0.0);
    let psi = MpsState::product(&[well.clone(), ho.clone()]).unwrap();
    let t = nucdyn::units::fs_to_au(10.0);
    let traj = propagate_nd(&h, &psi, t, 20, PropagationOptions::default()).unwrap();
    let psi0 = well.kronecker(&ho);
    for (k, state) in traj.states.iter().enumerate() {
        let exact = propagator_taylor(&h, t * k as f64 / 20.0) * &psi0;
        for site in 0..2 {
            let mut want = vec![0.0; dims[site]];
            for (k, a) in exact.iter().enumerate() {
                want[if site == 0 { k / dims[1] } else { k % dims[1] }] += a.norm_sqr();
            }
            let got = state.marginal(site).unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
    }
    assert!(traj.max_bond_pre_compression.iter().all(|&b| b <= 4 * 64));
}

#[test]
fn propagation_guards_bond_growth() {
    let (_, h) = coupled_double_well_model(8, 0.002).unwrap();
    let mut rng = rng(68);
    let v = DVector::from_fn(64, |_, _| gaussian(&mut rng));
    let v = &v / C64::new(v.norm(), 0.0);
    let (psi, _) = mps_from_dense(&v, &[8, 8], 0.0, usize::MAX).unwrap();
    let opts = PropagationOptions {
        chi_max: 1,
        ..Default::default()
    };
    assert!(propagate_nd(&h, &psi, 1000.0, 2, opts).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_three_site_networks_match_dense(
        seed in 0u64..100_000,
        d in prop::collection::vec(2usize..4, 3),
        sb in prop::collection::vec(1usize..4, 2),
        ob in prop::collection::vec(1usize..4, 2),
    ) {
        let mut rng = rng(seed);
        let psi = random_mps(&d, &sb, &mut rng);
        let op = random_mpo(&d, &ob, &mut rng);
        let out = apply_mpo(&op, &psi).unwrap();
        prop_assert_eq!(out.bond_dims(), vec![sb[0] * ob[0], sb[1] * ob[1]]);
        let expected = contract_mpo(&op) * contract_mps(&psi);
        let scale = expected.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(vec_distance(&contract_mps(&out), &expected) <= 1e-10 * scale);
        let (c, _) = compress(&out, 0.0, usize::MAX, false).unwrap();
        prop_assert!(vec_distance(&contract_mps(&c), &expected) <= 1e-10 * scale);
    }
}
