//! Density-matrix execution of gate programs with depolarizing gate noise,
//! readout bit flips and seeded shot sampling.
//!
//! Shot sampling uses the ChaCha8 stream cipher generator
//! (`rand_chacha::ChaCha8Rng`) seeded from a `u64`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::compiler::program::{apply_local, apply_local_adjoint_right, Gate, GateKind, GateProgram};
use crate::error::{Error, Result};
use crate::linalg::{herm_eigen_sorted, CMat, CVec, C64, ONE};

/// Gate and readout fidelities. Each gate is followed by a depolarizing
/// channel on its support with probability `1 − fidelity`.
///
/// A run of consecutive single-qubit gates on one qubit (not interrupted
/// by a two-qubit gate on that qubit) is executed as one rotation slot and
/// charged `fidelity_1q` once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub fidelity_1q: f64,
    pub fidelity_ms: f64,
    pub fidelity_cnot: f64,
    /// Probability that a measured bit is reported flipped.
    pub readout_flip: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            fidelity_1q: 0.995,
            fidelity_ms: 0.97,
            fidelity_cnot: 0.965,
            readout_flip: 0.01,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            fidelity_1q: 1.0,
            fidelity_ms: 1.0,
            fidelity_cnot: 1.0,
            readout_flip: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fidelity_1q", self.fidelity_1q),
            ("fidelity_ms", self.fidelity_ms),
            ("fidelity_cnot", self.fidelity_cnot),
            ("readout_flip", self.readout_flip),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn depolarizing(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::SingleQubit => 1.0 - self.fidelity_1q,
            GateKind::Ms => 1.0 - self.fidelity_ms,
            GateKind::Cnot => 1.0 - self.fidelity_cnot,
            GateKind::Bookkeeping => 0.0,
        }
    }
}

/// Mixed state of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMat,
    n_qubits: usize,
}

impl DensityMatrix {
    /// `|0…0⟩⟨0…0|`.
    pub fn ground(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut m = CMat::zeros(dim, dim);
        m[(0, 0)] = ONE;
        Self { matrix: m, n_qubits }
    }

    pub fn from_pure(state: &CVec) -> Result<Self> {
        let dim = state.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::invalid("state length must be a power of two"));
        }
        Ok(Self {
            matrix: state * state.adjoint(),
            n_qubits: dim.trailing_zeros() as usize,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        herm_eigen_sorted(&h).0[0]
    }

    /// Diagonal of ρ: outcome probabilities of an ideal measurement.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// `ρ ← U ρ U†` for a gate on `qubits`.
    pub fn apply_unitary(&mut self, qubits: &[usize], u: &CMat) {
        apply_local(&mut self.matrix, qubits, u, self.n_qubits);
        apply_local_adjoint_right(&mut self.matrix, qubits, u, self.n_qubits);
    }

    /// Depolarizing channel `ρ ← (1 − p)ρ + p · Tr_S(ρ) ⊗ I_S / d_S` on the
    /// qubit subset `S`.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) {
        if p <= 0.0 {
            return;
        }
        let n = self.n_qubits;
        let mask: usize = qubits.iter().map(|q| 1usize << (n - 1 - q)).sum();
        let d = 1usize << qubits.len();
        let dim = self.matrix.nrows();
        // all assignments of the masked bits
        let subs: Vec<usize> = (0..dim).filter(|s| s & !mask == 0).collect();
        let mut out = &self.matrix * C64::new(1.0 - p, 0.0);
        for i in (0..dim).filter(|i| i & mask == 0) {
            for j in (0..dim).filter(|j| j & mask == 0) {
                let reduced: C64 = subs.iter().map(|&s| self.matrix[(i | s, j | s)]).sum();
                let add = reduced * (p / d as f64);
                for &s in &subs {
                    out[(i | s, j | s)] += add;
                }
            }
        }
        self.matrix = out;
    }
}

/// Outcome of a sampled measurement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotResult {
    /// Counts indexed by basis outcome.
    pub counts: Vec<u64>,
    pub n_shots: u64,
    pub seed: u64,
    pub n_qubits: usize,
}

impl ShotResult {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n_shots as f64)
            .collect()
    }

    /// Nonzero counts keyed by bitstring (qubit 0 first).
    pub fn counts_map(&self) -> std::collections::BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (bitstring(i, self.n_qubits), c))
            .collect()
    }

    /// CSV `bitstring,count`, one row per outcome.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "bitstring,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{c}", bitstring(i, self.n_qubits))?;
        }
        Ok(())
    }
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    format!("{index:0width$b}", width = n_qubits)
}

/// CSV `bitstring,probability` with 16 significant digits.
pub fn write_probabilities_csv(probs: &[f64], mut w: impl Write) -> std::io::Result<()> {
    let n = probs.len().trailing_zeros() as usize;
    writeln!(w, "bitstring,probability")?;
    for (i, p) in probs.iter().enumerate() {
        writeln!(w, "{},{p:.15e}", bitstring(i, n))?;
    }
    Ok(())
}

/// Multinomial draw of `n_shots` outcomes by sequential conditional
/// binomials. Deterministic for a given seed.
pub fn sample_counts(probabilities: &[f64], n_shots: u64, seed: u64) -> Result<ShotResult> {
    if n_shots == 0 {
        return Err(Error::invalid("sampling needs at least one shot"));
    }
    let dim = probabilities.len();
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::invalid("outcome count must be a power of two"));
    }
    if let Some(p) = probabilities.iter().find(|&&p| !p.is_finite() || p < -1e-12) {
        return Err(Error::numeric(format!("invalid outcome probability {p}")));
    }
    let p: Vec<f64> = probabilities.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::numeric(format!("probabilities sum to {total}, not 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; dim];
    let mut remaining = n_shots;
    let mut mass = total;
    for (k, &pk) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == dim - 1 || mass <= 0.0 {
            counts[k] = remaining;
            break;
        }
        let q = (pk / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::numeric(format!("binomial draw failed: {e}")))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= pk;
    }
    Ok(ShotResult {
        counts,
        n_shots,
        seed,
        n_qubits: dim.trailing_zeros() as usize,
    })
}

/// Independent bit flips with probability `f` on every measured qubit.
pub fn apply_readout_error(probs: &[f64], f: f64) -> Vec<f64> {
    let mut p = probs.to_vec();
    if f <= 0.0 {
        return p;
    }
    let n = probs.len().trailing_zeros() as usize;
    for q in 0..n {
        let mask = 1usize << (n - 1 - q);
        let prev = p.clone();
        for i in 0..p.len() {
            p[i] = (1.0 - f) * prev[i] + f * prev[i ^ mask];
        }
    }
    p
}

/// Instruction stream with consecutive single-qubit gates on the same
/// qubit fused into one rotation slot.
enum Step {
    Slot(usize, CMat),
    Gate(Gate),
}

fn schedule(program: &GateProgram) -> Vec<Step> {
    let n = program.n_qubits();
    let mut pending: Vec<Option<CMat>> = vec![None; n];
    let mut out = Vec::new();
    let flush = |q: usize, pending: &mut Vec<Option<CMat>>, out: &mut Vec<Step>| {
        if let Some(m) = pending[q].take() {
            out.push(Step::Slot(q, m));
        }
    };
    for g in program.gates() {
        match g.kind() {
            GateKind::SingleQubit => {
                let q = g.qubits()[0];
                let m = g.local_matrix().expect("rotation has a matrix");
                pending[q] = Some(match pending[q].take() {
                    Some(prev) => m * prev,
                    None => m,
                });
            }
            GateKind::Cnot | GateKind::Ms => {
                for q in g.qubits() {
                    flush(q, &mut pending, &mut out);
                }
                out.push(Step::Gate(*g));
            }
            GateKind::Bookkeeping => {
                if *g == Gate::MeasureAll {
                    for q in 0..n {
                        flush(q, &mut pending, &mut out);
                    }
                }
            }
        }
    }
    for q in 0..n {
        flush(q, &mut pending, &mut out);
    }
    out
}

/// Product of per-slot fidelities (rotation runs, MS and CNOT gates).
pub fn circuit_fidelity_estimate(program: &GateProgram, noise: &NoiseModel) -> f64 {
    schedule(program)
        .iter()
        .map(|s| match s {
            Step::Slot(..) => noise.fidelity_1q,
            Step::Gate(g) => 1.0 - noise.depolarizing(g.kind()),
        })
        .product()
}

/// Number of fused single-qubit rotation slots in a program.
pub fn rotation_slot_count(program: &GateProgram) -> usize {
    schedule(program)
        .iter()
        .filter(|s| matches!(s, Step::Slot(..)))
        .count()
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Outcome distribution reported by the detector (readout error
    /// included when a noise model is active).
    pub probabilities: Vec<f64>,
    pub shots: Option<ShotResult>,
    pub state: DensityMatrix,
}

/// Executes a program from `|0…0⟩`. Global phases are ignored.
pub fn run_program(
    program: &GateProgram,
    noise: Option<&NoiseModel>,
    n_shots: Option<u64>,
    seed: u64,
) -> Result<RunResult> {
    program.validate()?;
    if let Some(nm) = noise {
        nm.validate()?;
    }
    if n_shots == Some(0) {
        return Err(Error::invalid("sampling requested with zero shots"));
    }
    let mut rho = DensityMatrix::ground(program.n_qubits());
    for step in schedule(program) {
        let (qubits, m, kind) = match step {
            Step::Slot(q, m) => (vec![q], m, GateKind::SingleQubit),
            Step::Gate(g) => (g.qubits(), g.local_matrix().expect("entangler"), g.kind()),
        };
        rho.apply_unitary(&qubits, &m);
        if let Some(nm) = noise {
            rho.depolarize(&qubits, nm.depolarizing(kind));
        }
    }
    let ideal = rho.probabilities();
    let probabilities = match noise {
        Some(nm) => apply_readout_error(&ideal, nm.readout_flip),
        None => ideal,
    };
    let shots = n_shots
        .map(|n| sample_counts(&probabilities, n, seed))
        .transpose()?;
    Ok(RunResult {
        probabilities,
        shots,
        state: rho,
    })
}

/// Noise-free statevector execution from `|0…0⟩`.
pub fn run_pure(program: &GateProgram) -> CVec {
    let mut psi = CVec::zeros(1 << program.n_qubits());
    psi[0] = ONE;
    program.apply_to_state(&psi)
}
