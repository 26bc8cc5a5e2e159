mod common;

use std::f64::consts::PI;

use common::*;
use nucdyn::dynamics::{run_dynamics, Backend, DynamicsConfig, InitialStateSpec, TimeSeries};
use nucdyn::hamiltonian::{exact_diagonalize, load_builtin_dmanh};
use nucdyn::simulator::NoiseModel;
use nucdyn::spectrum::*;
use nucdyn::units::{inverse_fs_to_cm1, CM1_PER_HARTREE, FS_PER_AU_TIME};
use nucdyn::Error;
use proptest::prelude::*;
use rand::Rng;

/// Direct O(N²) one-sided magnitude `|Σ x_k e^{−2πi jk/N}|/√N`.
fn naive_dft(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|j| {
            let z: C64 = x
                .iter()
                .enumerate()
                .map(|(k, &v)| C64::from_polar(v, -2.0 * PI * (j * k) as f64 / n as f64))
                .sum();
            z.norm() / (n as f64).sqrt()
        })
        .collect()
}

fn synthetic(freqs_cm1: &[(f64, f64)], dt_fs: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            freqs_cm1
                .iter()
                .map(|&(w, a)| a * (2.0 * PI * w / inverse_fs_to_cm1(1.0) * k as f64 * dt_fs).cos())
                .sum()
        })
        .collect()
}

fn levels_to_peaks(levels: &[f64], jitter: impl Fn() -> f64) -> (PeakSet, Vec<Splitting>) {
    let mut predicted = Vec::new();
    let mut peaks = PeakSet::default();
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            let w = levels[j] - levels[i];
            predicted.push(Splitting::from((i, j, w)));
            peaks.peaks.push(Peak {
                frequency_cm1: w + jitter(),
                amplitude: 1.0,
                uncertainty_cm1: 1.0,
                bin: 0,
            });
        }
    }
    (peaks, predicted)
}

fn exact_levels() -> Vec<f64> {
    exact_diagonalize(&load_builtin_dmanh()).unwrap().relative_levels_cm1()
}

#[test]
fn magnitudes_match_direct_transform() {
    let mut rng = rng(51);
    let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s = spectrum_of_traces(std::slice::from_ref(&x), 0.5, Window::Rectangular, "noise").unwrap();
    for (a, b) in s.amplitudes.iter().zip(naive_dft(&x)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn frequency_axis_uses_energy_conversion() {
    let s = spectrum_of_traces(&[vec![0.0; 32768]], 0.5, Window::Rectangular, "z").unwrap();
    let expected = 2.0 * PI * FS_PER_AU_TIME * CM1_PER_HARTREE / (32768.0 * 0.5);
    assert!((s.bin_width() - expected).abs() < 1e-12);
    assert!((s.bin_width() - 2.036).abs() < 1e-3);
}

#[test]
fn two_eigenstate_superposition_gives_one_peak() {
    let h = load_builtin_dmanh();
    let eig = exact_diagonalize(&h).unwrap();
    let dim = 8;
    let psi = (eig.eigenvectors.column(0) + eig.eigenvectors.column(1)) / 2f64.sqrt();
    let mut amps = nalgebra::DVector::from_element(dim, C64::new(0.0, 0.0));
    for k in 0..dim {
        amps[k] = C64::new(psi[k], 0.0);
    }
    let n = 4096;
    let dt = 0.5;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let rows: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let t_au = t / FS_PER_AU_TIME;
            let mut out = vec![0.0; dim];
            for (site, o) in out.iter_mut().enumerate() {
                let z: C64 = (0..2)
                    .map(|k| C64::from_polar(eig.eigenvectors[(site, k)] / 2f64.sqrt(), -eig.eigenvalues[k] * t_au))
                    .sum();
                *o = z.norm_sqr();
            }
            out
        })
        .collect();
    let series = TimeSeries {
        times_fs: times,
        site_probabilities: rows,
        backend: Backend::Oracle,
        remap: None,
        seed: 0,
        amplitudes: None,
    };
    let peaks = detect_peaks(&fourier_spectrum(&series, &[], Window::Rectangular).unwrap(), 5.0).unwrap();
    assert_eq!(peaks.len(), 1, "{:?}", peaks.frequencies());
    let want = eig.splittings_cm1()[0].2;
    let p = peaks.peaks[0];
    assert!((p.frequency_cm1 - want).abs() <= p.uncertainty_cm1 + 1e-9, "{} vs {want}", p.frequency_cm1);
}

#[test]
fn synthetic_lines_are_resolved_and_interpolated() {
    let lines = [(612.5, 1.0), (916.6, 0.5), (1340.0, 0.25)];
    let x = synthetic(&lines, 0.5, 32768);
    let s = spectrum_of_traces(&[x], 0.5, Window::Rectangular, "lines").unwrap();
    let peaks = detect_peaks(&s, DEFAULT_THRESHOLD_FACTOR).unwrap();
    assert_eq!(peaks.len(), 3);
    for (p, (w, _)) in peaks.peaks.iter().zip(lines) {
        assert!((p.frequency_cm1 - w).abs() <= p.uncertainty_cm1, "{} vs {w}", p.frequency_cm1);
    }
}

#[test]
fn oracle_peaks_are_eigen_splittings() {
    let h = load_builtin_dmanh();
    let splittings: Vec<f64> = exact_diagonalize(&h).unwrap().splittings_cm1().iter().map(|s| s.2).collect();
    let cfg = DynamicsConfig {
        n_steps: 8192,
        ..Default::default()
    };
    for spec in [InitialStateSpec::Site(0), InitialStateSpec::Site(1)] {
        let series = run_dynamics(&h, &spec, &cfg).unwrap();
        let s = fourier_spectrum(&series, &[], Window::Rectangular).unwrap();
        let peaks = detect_peaks(&s, DEFAULT_THRESHOLD_FACTOR).unwrap();
        assert!(!peaks.is_empty());
        for p in &peaks.peaks {
            let nearest = splittings.iter().map(|w| (w - p.frequency_cm1).abs()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= s.bin_width(), "spurious peak at {} cm-1 ({nearest} away)", p.frequency_cm1);
        }
    }
}

#[test]
fn depolarizing_keeps_dominant_bin() {
    let h = load_builtin_dmanh();
    let clean = DynamicsConfig {
        n_steps: 8192,
        backend: Backend::CircuitIdeal,
        ..Default::default()
    };
    let noisy = DynamicsConfig {
        backend: Backend::CircuitNoisy {
            noise: NoiseModel::default(),
            shots: None,
        },
        ..clean
    };
    let spectrum = |cfg: &DynamicsConfig| {
        fourier_spectrum(&run_dynamics(&h, &InitialStateSpec::Site(0), cfg).unwrap(), &[], Window::Rectangular)
            .unwrap()
    };
    let (a, b) = (spectrum(&clean), spectrum(&noisy));
    let dominant = |s: &Spectrum| (1..s.len()).max_by(|&i, &j| s.amplitudes[i].total_cmp(&s.amplitudes[j])).unwrap();
    assert_eq!(dominant(&a), dominant(&b));
}

#[test]
fn ladder_from_exact_splittings_is_exact() {
    let levels = exact_levels();
    let (peaks, predicted) = levels_to_peaks(&levels, || 0.0);
    let ladder = reconstruct_ladder(&peaks, &predicted).unwrap();
    assert!(ladder.rms_against(&levels) < 1e-9);
    assert!(ladder.residual_rms < 1e-9);
    assert_eq!(ladder.assignments.len(), 28);
}

#[test]
fn ladder_with_half_wavenumber_noise() {
    let levels = exact_levels();
    let mut rng = rng(52);
    for _ in 0..20 {
        let noise: Vec<f64> = (0..28).map(|_| rng.random_range(-0.5..0.5)).collect();
        let k = std::cell::Cell::new(0);
        let (peaks, predicted) = levels_to_peaks(&levels, || {
            let v = noise[k.get()];
            k.set(k.get() + 1);
            v
        });
        let ladder = reconstruct_ladder(&peaks, &predicted).unwrap();
        for (a, b) in ladder.levels.iter().zip(&levels) {
            assert!((a - b).abs() <= 1.0);
        }
    }
}

#[test]
fn ladder_residual_grows_with_noise() {
    let levels = exact_levels();
    let mut rng = rng(53);
    let scales = [0.0, 0.5, 2.0, 8.0];
    let mut mean = vec![0.0; scales.len()];
    for _ in 0..100 {
        let unit: Vec<f64> = (0..28).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (m, &scale) in mean.iter_mut().zip(&scales) {
            let k = std::cell::Cell::new(0);
            let (peaks, predicted) = levels_to_peaks(&levels, || {
                let v = unit[k.get()] * scale;
                k.set(k.get() + 1);
                v
            });
            *m += reconstruct_ladder(&peaks, &predicted).unwrap().residual_rms / 100.0;
        }
    }
    assert!(mean[0] < 1e-9);
    assert!(mean.windows(2).all(|w| w[0] <= w[1]), "{mean:?}");
}

#[test]
fn missing_levels_are_reported() {
    let predicted = vec![Splitting::from((0, 1, 100.0)), Splitting::from((2, 3, 50.0))];
    let peaks = PeakSet {
        peaks: vec![
            Peak {
                frequency_cm1: 100.0,
                amplitude: 1.0,
                uncertainty_cm1: 1.0,
                bin: 0,
            },
            Peak {
                frequency_cm1: 50.0,
                amplitude: 1.0,
                uncertainty_cm1: 1.0,
                bin: 0,
            },
        ],
    };
    match reconstruct_ladder(&peaks, &predicted) {
        Err(Error::UnderConstrained { missing }) => assert_eq!(missing, vec![2, 3]),
        other => panic!("expected under-constrained error, got {other:?}"),
    }
}

#[test]
fn autocorrelation_needs_amplitudes() {
    let h = load_builtin_dmanh();
    let cfg = DynamicsConfig {
        n_steps: 2048,
        ..Default::default()
    };
    let spec = InitialStateSpec::Site(0);
    let plain = run_dynamics(&h, &spec, &cfg).unwrap();
    assert!(autocorrelation_spectrum(&plain, Window::Rectangular).is_err());
    let full = run_dynamics(&h, &spec, &DynamicsConfig { keep_amplitudes: true, ..cfg }).unwrap();
    let s = autocorrelation_spectrum(&full, Window::Rectangular).unwrap();
    let peak = detect_peaks(&s, 5.0).unwrap();
    let splittings: Vec<f64> = exact_diagonalize(&h).unwrap().splittings_cm1().iter().map(|s| s.2).collect();
    for p in &peak.peaks {
        assert!(splittings.iter().any(|w| (w - p.frequency_cm1).abs() <= s.bin_width()));
    }
}

#[test]
fn csv_round_trips() {
    let x = synthetic(&[(1000.0, 1.0)], 0.5, 512);
    let s = spectrum_of_traces(&[x], 0.5, Window::Hann, "c").unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let back = Spectrum::read_csv(buf.as_slice()).unwrap();
    for (a, b) in back.amplitudes.iter().zip(&s.amplitudes) {
        assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300));
    }

    let peaks = detect_peaks(&s, 5.0).unwrap();
    let mut buf = Vec::new();
    peaks.write_csv(&mut buf).unwrap();
    let back = PeakSet::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), peaks.len());

    let levels = exact_levels();
    let (p, predicted) = levels_to_peaks(&levels, || 0.0);
    let ladder = reconstruct_ladder(&p, &predicted).unwrap();
    let mut buf = Vec::new();
    ladder.write_csv(&mut buf).unwrap();
    let (e, _) = EnergyLadder::read_csv(buf.as_slice()).unwrap();
    assert!(e.iter().zip(&ladder.levels).all(|(a, b)| (a - b).abs() <= 1e-8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_holds(x in prop::collection::vec(-1.0f64..1.0, 8..600)) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        prop_assert!(parseval_defect(&x) <= 1e-9);
    }

    #[test]
    fn peaks_survive_rescaling(scale in 1e-3f64..1e3, w in 300.0f64..3000.0) {
        let x = synthetic(&[(w, 1.0), (w * 1.7, 0.4)], 0.5, 4096);
        let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let a = detect_peaks(&spectrum_of_traces(&[x], 0.5, Window::Rectangular, "a").unwrap(), 5.0).unwrap();
        let b = detect_peaks(&spectrum_of_traces(&[y], 0.5, Window::Rectangular, "b").unwrap(), 5.0).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.peaks.iter().zip(&b.peaks) {
            prop_assert_eq!(p.bin, q.bin);
            prop_assert!((p.frequency_cm1 - q.frequency_cm1).abs() <= 1e-3 * p.frequency_cm1);
        }
    }

    #[test]
    fn exact_ladders_are_exact(gaps in prop::collection::vec(20.0f64..2000.0, 1..7)) {
        let mut levels = vec![0.0];
        for g in &gaps {
            levels.push(levels.last().unwrap() + g);
        }
        let (peaks, predicted) = levels_to_peaks(&levels, || 0.0);
        let ladder = reconstruct_ladder(&peaks, &predicted).unwrap();
        prop_assert!(ladder.rms_against(&levels) <= 1e-8);
    }
}
