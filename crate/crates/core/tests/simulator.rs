mod common;

use common::*;
use nucdyn::compiler::{cartan_decompose, Gate, GateProgram, TwoQubitUnitary};
use nucdyn::simulator::*;
use proptest::prelude::*;

/// Depolarizing channel written as a uniform Pauli twirl on `qubits`.
fn depolarize_pauli(rho: &CMat, qubits: &[usize], n: usize, p: f64) -> CMat {
    let paulis = paulis();
    let k = qubits.len();
    let terms = 1usize << (2 * k);
    let mut twirled = CMat::zeros(rho.nrows(), rho.ncols());
    for code in 0..terms {
        let factors: Vec<CMat> = (0..k).map(|q| paulis[(code >> (2 * q)) & 3].clone()).collect();
        let local = kron_chain(&factors);
        let full = embed(&local, qubits, n);
        twirled += &full * rho * full.adjoint();
    }
    rho * C64::new(1.0 - p, 0.0) + twirled * C64::new(p / terms as f64, 0.0)
}

fn random_program(n: usize, seed: u64) -> GateProgram {
    let mut rng = rng(seed);
    let mut p = GateProgram::new(n);
    use rand::Rng;
    for _ in 0..12 {
        let q = rng.random_range(0..n);
        let r = (q + 1 + rng.random_range(0..n - 1)) % n;
        let a = rng.random_range(-3.0..3.0);
        p.push(match rng.random_range(0..5) {
            0 => Gate::Rz(q, a),
            1 => Gate::Ry(q, a),
            2 => Gate::R(q, a, rng.random_range(-3.0..3.0)),
            3 => Gate::Cnot(q, r),
            _ => Gate::Ms(q, r, a),
        });
    }
    p
}

#[test]
fn depolarizing_matches_pauli_twirl() {
    let mut rng = rng(31);
    let n = 3;
    let psi = haar_unitary(8, &mut rng).column(0).into_owned();
    for qubits in [vec![0], vec![2], vec![0, 2], vec![1, 0]] {
        let mut rho = DensityMatrix::from_pure(&psi).unwrap();
        let reference = depolarize_pauli(rho.matrix(), &qubits, n, 0.07);
        rho.depolarize(&qubits, 0.07);
        assert!(max_entry_distance(rho.matrix(), &reference) < 1e-14);
    }
}

#[test]
fn readout_flip_matches_kronecker_channel() {
    let probs = [0.5, 0.1, 0.0, 0.05, 0.15, 0.0, 0.2, 0.0];
    let f = 0.03;
    let flip = RMat::from_row_slice(2, 2, &[1.0 - f, f, f, 1.0 - f]);
    let channel = flip.kronecker(&flip).kronecker(&flip);
    let expected = channel * nalgebra::DVector::from_row_slice(&probs);
    let got = apply_readout_error(&probs, f);
    for (a, b) in got.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn noiseless_density_matrix_equals_statevector() {
    for seed in 0..20 {
        let p = random_program(3, seed);
        let psi = program_unitary(&p).column(0).into_owned();
        let pure: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let run = run_program(&p, None, None, 0).unwrap();
        let quiet = run_program(&p, Some(&NoiseModel::noiseless()), None, 0).unwrap();
        for k in 0..8 {
            assert!((run.probabilities[k] - pure[k]).abs() <= 1e-10);
            assert!((quiet.probabilities[k] - pure[k]).abs() <= 1e-10);
        }
        let rp = run_pure(&p);
        assert!(rp.iter().zip(psi.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
    }
}

#[test]
fn noisy_runs_stay_physical() {
    let noise = NoiseModel::default();
    for seed in 0..10 {
        let p = random_program(3, 100 + seed);
        let run = run_program(&p, Some(&noise), None, 0).unwrap();
        assert!((run.state.trace().re - 1.0).abs() <= 1e-10);
        assert!(run.state.trace().im.abs() <= 1e-12);
        assert!(run.state.min_eigenvalue() >= -1e-10);
        assert!(run.state.hermiticity_defect() < 1e-12);
        assert!((run.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn fully_depolarized_register_is_uniform() {
    let mut p = GateProgram::new(2);
    for _ in 0..40 {
        p.push(Gate::Cnot(0, 1));
    }
    let noise = NoiseModel {
        fidelity_cnot: 0.5,
        ..NoiseModel::noiseless()
    };
    let run = run_program(&p, Some(&noise), None, 0).unwrap();
    assert!(run.probabilities.iter().all(|&x| (x - 0.25).abs() < 1e-10));
}

#[test]
fn million_uniform_shots_within_five_sigma() {
    let probs = vec![1.0 / 8.0; 8];
    let n = 1_000_000u64;
    let shots = sample_counts(&probs, n, 2024).unwrap();
    assert_eq!(shots.counts.iter().sum::<u64>(), n);
    let sigma = (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
    for &c in &shots.counts {
        assert!((c as f64 - n as f64 / 8.0).abs() <= 5.0 * sigma, "count {c}");
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let p = random_program(2, 7);
    let a = run_program(&p, Some(&NoiseModel::default()), Some(1000), 99).unwrap();
    let b = run_program(&p, Some(&NoiseModel::default()), Some(1000), 99).unwrap();
    let c = run_program(&p, Some(&NoiseModel::default()), Some(1000), 100).unwrap();
    assert_eq!(a.shots, b.shots);
    assert_ne!(a.shots.as_ref().unwrap().counts, c.shots.as_ref().unwrap().counts);
}

#[test]
fn invalid_requests_are_rejected() {
    let p = GateProgram::new(1);
    assert!(run_program(&p, None, Some(0), 0).is_err());
    let bad = NoiseModel {
        fidelity_1q: 1.2,
        ..NoiseModel::default()
    };
    assert!(run_program(&p, Some(&bad), None, 0).is_err());
    assert!(sample_counts(&[0.5, 0.6], 10, 0).is_err());
    assert!(sample_counts(&[0.5, 0.5, 0.0], 10, 0).is_err());
}

#[test]
fn cartan_template_fidelity_budget() {
    let mut rng = rng(32);
    let u = TwoQubitUnitary::new(haar_unitary(4, &mut rng)).unwrap();
    let prog = cartan_decompose(&u).unwrap();
    assert_eq!(rotation_slot_count(&prog), 7);
    let f = circuit_fidelity_estimate(&prog, &NoiseModel::default());
    let expected = 0.965f64.powi(3) * 0.995f64.powi(7);
    assert!((f - expected).abs() < 1e-12);
    assert!((0.85..=0.90).contains(&f));
}

#[test]
fn csv_outputs() {
    let shots = sample_counts(&[0.25, 0.25, 0.5, 0.0], 40, 1).unwrap();
    let mut buf = Vec::new();
    shots.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let parsed: Vec<(String, u64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(parsed.len(), 4);
    assert_eq!(parsed[3], ("11".to_string(), 0));
    assert_eq!(parsed.iter().map(|r| r.1).sum::<u64>(), 40);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_channel_preserves_trace_and_positivity(
        seed in 0u64..1000,
        f1 in 0.9f64..1.0,
        f2 in 0.8f64..1.0,
    ) {
        let p = random_program(3, seed);
        let noise = NoiseModel { fidelity_1q: f1, fidelity_cnot: f2, fidelity_ms: f2, readout_flip: 0.0 };
        let mut rho = DensityMatrix::ground(3);
        for g in p.body() {
            if let Some(m) = g.local_matrix() {
                let q = g.qubits();
                rho.apply_unitary(&q, &m);
                rho.depolarize(&q, if q.len() == 1 { 1.0 - noise.fidelity_1q } else { 1.0 - noise.fidelity_cnot });
                prop_assert!((rho.trace().re - 1.0).abs() <= 1e-10);
                prop_assert!(rho.min_eigenvalue() >= -1e-10);
            }
        }
    }

    #[test]
    fn shot_counts_sum_and_follow_support(
        weights in prop::collection::vec(0.0f64..1.0, 8),
        shots in 1u64..5000,
        seed in 0u64..u64::MAX,
    ) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 1e-6);
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let r = sample_counts(&probs, shots, seed).unwrap();
        prop_assert_eq!(r.counts.iter().sum::<u64>(), shots);
        for (c, p) in r.counts.iter().zip(&probs) {
            if *p == 0.0 {
                prop_assert_eq!(*c, 0);
            }
        }
    }
}
