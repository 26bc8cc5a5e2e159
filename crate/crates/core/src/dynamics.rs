//! Wavepacket preparation, time propagation and the block-to-site remap.
//!
//! Three backends share one driver ([`run_dynamics`]):
//! * [`Backend::Oracle`] applies `e^{−iHt}` of the full grid Hamiltonian;
//! * [`Backend::CircuitIdeal`] compiles each block's propagator (with the
//!   block's initial state folded in) into a gate program per timestep and
//!   executes it as a statevector;
//! * [`Backend::CircuitNoisy`] runs the same programs on the density-matrix
//!   simulator with gate noise, readout error and optional shot sampling.
//!
//! Circuit backends evolve the two reflection blocks independently and
//! recombine them with [`remap_probabilities`].

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::compiler::cartan::synthesize;
use crate::compiler::{GateProgram, TwoQubitUnitary};
use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::{exact_diagonalize, NuclearHamiltonian};
use crate::linalg::{cis, propagator_from_eigen, sym_eigen_sorted, CMat, CVec, RMat, C64, ONE, ZERO};
use crate::simulator::{run_program, run_pure, NoiseModel};
use crate::symmetry::{build_reflector, transform, BlockDiagonalHamiltonian, GivensReflector};
use crate::units::fs_to_au;

/// Normalized grid wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketState {
    amplitudes: CVec,
}

impl WavepacketState {
    pub fn new(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("wavepacket norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialStateSpec {
    /// All amplitude on one grid point.
    Site(usize),
    /// `(|i⟩ + e^{iφ}|j⟩)/√2`.
    TwoSite { i: usize, j: usize, phase: f64 },
    /// The k-th eigenvector of the Hamiltonian (ascending energy).
    Eigenstate(usize),
}

impl InitialStateSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check = |k: usize| {
            if k < dim {
                Ok(())
            } else {
                Err(Error::invalid(format!("index {k} outside grid of {dim} points")))
            }
        };
        match *self {
            InitialStateSpec::Site(k) | InitialStateSpec::Eigenstate(k) => check(k),
            InitialStateSpec::TwoSite { i, j, phase } => {
                check(i)?;
                check(j)?;
                if i == j {
                    return Err(Error::invalid("two-site state needs distinct sites"));
                }
                if !(-PI..=PI).contains(&phase) {
                    return Err(Error::invalid(format!("relative phase {phase} outside [-π, π]")));
                }
                Ok(())
            }
        }
    }
}

pub fn prepare_initial(spec: &InitialStateSpec, h: &NuclearHamiltonian) -> Result<WavepacketState> {
    let dim = h.dim();
    spec.validate(dim)?;
    let mut psi = CVec::zeros(dim);
    match *spec {
        InitialStateSpec::Site(k) => psi[k] = ONE,
        InitialStateSpec::TwoSite { i, j, phase } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            psi[i] = C64::new(s, 0.0);
            psi[j] = cis(phase) * s;
        }
        InitialStateSpec::Eigenstate(k) => {
            let eig = exact_diagonalize(h)?;
            for (dst, &x) in psi.iter_mut().zip(eig.eigenvectors.column(k).iter()) {
                *dst = C64::new(x, 0.0);
            }
        }
    }
    WavepacketState::new(psi)
}

/// `G·ψ` split into the even (upper) and odd (lower) halves.
pub fn to_block_states(state: &WavepacketState, reflector: &GivensReflector) -> Result<(CVec, CVec)> {
    check_dim(reflector.dim(), state.amplitudes.len(), "wavepacket vs reflector")?;
    let half = reflector.half();
    let g = reflector.matrix().map(|x| C64::new(x, 0.0));
    let rotated = g * &state.amplitudes;
    Ok((rotated.rows(0, half).into_owned(), rotated.rows(half, half).into_owned()))
}

/// Inverse of [`to_block_states`] for amplitude data.
///
/// For a site `i` in the left half, with `j = half − 1 − i`:
/// `ψ_i = (u_i − l_j)/√2` and `ψ_{n−i} = (u_i + l_j)/√2`.
pub fn from_block_states(upper: &CVec, lower: &CVec) -> CVec {
    let half = upper.len();
    let dim = 2 * half;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = CVec::zeros(dim);
    for i in 0..half {
        let j = half - 1 - i;
        psi[i] = (upper[i] - lower[j]) * s;
        psi[dim - 1 - i] = (upper[i] + lower[j]) * s;
    }
    psi
}

/// Measured outcome distributions of the two block registers, each
/// weighted by its block's share of the total norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProbabilities {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemapKind {
    FirstOrder,
    ExactPhase,
}

impl RemapKind {
    pub fn name(self) -> &'static str {
        match self {
            RemapKind::FirstOrder => "first_order",
            RemapKind::ExactPhase => "exact_phase",
        }
    }
}

/// Source of the cross-term phase when recombining blocks.
#[derive(Debug, Clone, Copy)]
pub enum RemapMode<'a> {
    /// Phase accrued as `−H̃_nn·t` on each block diagonal, offset by the
    /// initial relative phase `arg u_i(0) − arg l_j(0)` per left-half site.
    FirstOrder { initial_phase: &'a [f64] },
    /// Phases of simulated block amplitudes; magnitudes still come from
    /// the supplied probabilities.
    ExactPhase { upper: &'a CVec, lower: &'a CVec },
}

/// Initial relative phases for [`RemapMode::FirstOrder`].
pub fn initial_relative_phases(upper: &CVec, lower: &CVec) -> Vec<f64> {
    let half = upper.len();
    (0..half)
        .map(|i| {
            let (u, l) = (upper[i], lower[half - 1 - i]);
            if u.norm() > 0.0 && l.norm() > 0.0 {
                u.arg() - l.arg()
            } else {
                0.0
            }
        })
        .collect()
}

/// Site probabilities from block probabilities.
///
/// `P(x_i) = ½(P_u + P_l) ∓ √(P_u P_l)·cos Δφ`, with `−` for left-half
/// sites and `+` for their mirrors.
pub fn remap_probabilities(
    block: &BlockProbabilities,
    t_au: f64,
    h: &BlockDiagonalHamiltonian,
    mode: RemapMode<'_>,
) -> Result<Vec<f64>> {
    let half = h.half();
    check_dim(half, block.upper.len(), "upper block probabilities")?;
    check_dim(half, block.lower.len(), "lower block probabilities")?;
    if let Some(p) = block.upper.iter().chain(&block.lower).find(|&&p| !p.is_finite() || p < -1e-12) {
        return Err(Error::numeric(format!("invalid block probability {p}")));
    }
    let phase_diff: Vec<f64> = match mode {
        RemapMode::FirstOrder { initial_phase } => {
            check_dim(half, initial_phase.len(), "initial relative phases")?;
            (0..half)
                .map(|i| {
                    let j = half - 1 - i;
                    initial_phase[i] - (h.upper[(i, i)] - h.lower[(j, j)]) * t_au
                })
                .collect()
        }
        RemapMode::ExactPhase { upper, lower } => {
            check_dim(half, upper.len(), "upper block amplitudes")?;
            check_dim(half, lower.len(), "lower block amplitudes")?;
            (0..half).map(|i| upper[i].arg() - lower[half - 1 - i].arg()).collect()
        }
    };
    let dim = 2 * half;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let j = half - 1 - i;
        let pu = block.upper[i].max(0.0);
        let pl = block.lower[j].max(0.0);
        let cross = (pu * pl).sqrt() * phase_diff[i].cos();
        out[i] = 0.5 * (pu + pl) - cross;
        out[dim - 1 - i] = 0.5 * (pu + pl) + cross;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Oracle,
    CircuitIdeal,
    CircuitNoisy { noise: NoiseModel, shots: Option<u64> },
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::CircuitIdeal => "circuit_ideal",
            Backend::CircuitNoisy { .. } => "circuit_noisy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub dt_fs: f64,
    pub n_steps: usize,
    pub backend: Backend,
    /// Ignored by the oracle backend.
    pub remap: RemapKind,
    /// Timestep `k` samples with seed `seed + k`.
    pub seed: u64,
    /// Keep per-step grid amplitudes (oracle and ideal-circuit backends).
    pub keep_amplitudes: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dt_fs: 0.5,
            n_steps: 32768,
            backend: Backend::Oracle,
            remap: RemapKind::ExactPhase,
            seed: 0,
            keep_amplitudes: false,
        }
    }
}

/// Site-occupation probabilities on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times_fs: Vec<f64>,
    /// `[timestep][site]`.
    pub site_probabilities: Vec<Vec<f64>>,
    pub backend: Backend,
    pub remap: Option<RemapKind>,
    pub seed: u64,
    /// Grid amplitudes per timestep, when requested and available.
    pub amplitudes: Option<Vec<CVec>>,
}

impl TimeSeries {
    pub fn n_sites(&self) -> usize {
        self.site_probabilities.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times_fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_fs.is_empty()
    }

    pub fn dt_fs(&self) -> Option<f64> {
        (self.times_fs.len() >= 2).then(|| self.times_fs[1] - self.times_fs[0])
    }

    pub fn site_trace(&self, site: usize) -> Vec<f64> {
        self.site_probabilities.iter().map(|row| row[site]).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.site_probabilities.iter().map(|r| r.iter().sum()).collect()
    }

    /// CSV `t_fs,p_site_0,…,row_sum` with 12 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let n = self.n_sites();
        let mut header = vec!["t_fs".to_string()];
        header.extend((0..n).map(|i| format!("p_site_{i}")));
        header.push("row_sum".into());
        writeln!(w, "{}", header.join(","))?;
        for (t, row) in self.times_fs.iter().zip(&self.site_probabilities) {
            let mut fields = vec![format!("{t:.11e}")];
            fields.extend(row.iter().map(|p| format!("{p:.11e}")));
            fields.push(format!("{:.11e}", row.iter().sum::<f64>()));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Parses the CSV written by [`TimeSeries::write_csv`]. Backend
    /// metadata is not stored in the file; the result is tagged as oracle.
    pub fn read_csv(r: impl std::io::Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        let n_cols = headers.len();
        if n_cols < 3 || &headers[0] != "t_fs" || &headers[n_cols - 1] != "row_sum" {
            return Err(Error::parse(1, "expected header t_fs,p_site_0,…,row_sum"));
        }
        for (k, name) in headers.iter().enumerate().take(n_cols - 1).skip(1) {
            if name != format!("p_site_{}", k - 1) {
                return Err(Error::parse(1, format!("unexpected column {name}")));
            }
        }
        let mut times_fs = Vec::new();
        let mut rows = Vec::new();
        for (idx, rec) in reader.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::parse(line, format!("{f}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != n_cols {
                return Err(Error::parse(line, "wrong number of fields"));
            }
            times_fs.push(vals[0]);
            rows.push(vals[1..n_cols - 1].to_vec());
        }
        Ok(Self {
            times_fs,
            site_probabilities: rows,
            backend: Backend::Oracle,
            remap: None,
            seed: 0,
            amplitudes: None,
        })
    }
}

/// Block seeds within one timestep: the upper register samples with the
/// timestep seed, the lower register with the seed xor this salt.
pub const LOWER_BLOCK_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Unitary whose first column is `v/|v|` (a phased Householder reflection).
pub fn state_preparation_unitary(v: &CVec) -> Result<CMat> {
    let n = v.len();
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::invalid("cannot prepare the zero vector"));
    }
    let theta = if v[0].norm() > 0.0 { v[0].arg() } else { 0.0 };
    // y has a real non-negative first entry, so e₀ ↦ y is a Householder map.
    let y = v.map(|z| z * cis(-theta) / norm);
    let mut w = -y;
    w[0] += ONE;
    let wn = w.norm_squared();
    let mut h = CMat::identity(n, n);
    if wn > 1e-300 {
        h -= (&w * w.adjoint()) * C64::new(2.0 / wn, 0.0);
    }
    Ok(h * cis(theta))
}

struct BlockEvolver {
    values: DVector<f64>,
    vectors: RMat,
    /// Initial block state; `None` when the block carries no amplitude.
    state: Option<CVec>,
    weight: f64,
    prep: Option<CMat>,
}

impl BlockEvolver {
    fn new(block: &RMat, state: CVec) -> Result<Self> {
        let (values, vectors) = sym_eigen_sorted(block);
        let weight = state.norm_squared();
        let (state, prep) = if weight > 1e-28 {
            let prep = state_preparation_unitary(&state)?;
            (Some(state), Some(prep))
        } else {
            (None, None)
        };
        Ok(Self {
            values,
            vectors,
            state,
            weight,
            prep,
        })
    }

    fn half(&self) -> usize {
        self.values.len()
    }

    /// Program for `U(t)·S`, where `S|0⟩` is the normalized initial state.
    fn program(&self, t_au: f64) -> Result<Option<GateProgram>> {
        let Some(prep) = &self.prep else { return Ok(None) };
        let u = propagator_from_eigen(&self.values, &self.vectors, t_au) * prep;
        Ok(Some(synthesize(&TwoQubitUnitary::new(u)?)?))
    }

    fn exact(&self, t_au: f64) -> CVec {
        match &self.state {
            Some(s) => propagator_from_eigen(&self.values, &self.vectors, t_au) * s,
            None => CVec::zeros(self.half()),
        }
    }
}

struct StepOutput {
    probabilities: Vec<f64>,
    amplitudes: Option<CVec>,
}

/// Propagates a prepared wavepacket and records site probabilities at
/// `t_k = k·dt` for `k = 0..n_steps`.
pub fn run_dynamics(
    h: &NuclearHamiltonian,
    spec: &InitialStateSpec,
    config: &DynamicsConfig,
) -> Result<TimeSeries> {
    if !(config.dt_fs > 0.0 && config.dt_fs.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {}", config.dt_fs)));
    }
    if config.n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    if let Backend::CircuitNoisy { noise, shots } = &config.backend {
        noise.validate()?;
        if *shots == Some(0) {
            return Err(Error::invalid("noisy backend with zero shots"));
        }
    }
    let psi0 = prepare_initial(spec, h)?;
    let times_fs: Vec<f64> = (0..config.n_steps).map(|k| k as f64 * config.dt_fs).collect();
    let steps: Vec<StepOutput> = match config.backend {
        Backend::Oracle => oracle_steps(h, &psi0, &times_fs),
        _ => circuit_steps(h, &psi0, &times_fs, config)?,
    };
    let keep = config.keep_amplitudes && !matches!(config.backend, Backend::CircuitNoisy { .. });
    let mut site_probabilities = Vec::with_capacity(steps.len());
    let mut amplitudes = keep.then(|| Vec::with_capacity(steps.len()));
    for s in steps {
        site_probabilities.push(s.probabilities);
        if let (Some(store), Some(a)) = (amplitudes.as_mut(), s.amplitudes) {
            store.push(a);
        }
    }
    Ok(TimeSeries {
        times_fs,
        site_probabilities,
        backend: config.backend,
        remap: (!matches!(config.backend, Backend::Oracle)).then_some(config.remap),
        seed: config.seed,
        amplitudes,
    })
}

fn oracle_steps(h: &NuclearHamiltonian, psi0: &WavepacketState, times_fs: &[f64]) -> Vec<StepOutput> {
    let (values, vectors) = sym_eigen_sorted(h.matrix());
    // Work in the eigenbasis: c = Vᵀψ₀, ψ(t) = V e^{−iΛt} c.
    let vc = vectors.map(|x| C64::new(x, 0.0));
    let coeffs = vc.transpose() * psi0.amplitudes();
    times_fs
        .par_iter()
        .map(|&t| {
            let t_au = fs_to_au(t);
            let evolved = CVec::from_iterator(
                coeffs.len(),
                coeffs.iter().zip(values.iter()).map(|(c, e)| c * cis(-e * t_au)),
            );
            let psi = &vc * evolved;
            StepOutput {
                probabilities: psi.iter().map(|a| a.norm_sqr()).collect(),
                amplitudes: Some(psi),
            }
        })
        .collect()
}

fn circuit_steps(
    h: &NuclearHamiltonian,
    psi0: &WavepacketState,
    times_fs: &[f64],
    config: &DynamicsConfig,
) -> Result<Vec<StepOutput>> {
    let blocks = transform(h)?;
    if blocks.half() > 4 {
        return Err(Error::invalid(format!(
            "circuit backends synthesize blocks of at most 2 qubits; this Hamiltonian has {}-dimensional blocks",
            blocks.half()
        )));
    }
    let g = build_reflector(h.dim())?;
    let (u0, l0) = to_block_states(psi0, &g)?;
    let initial_phase = initial_relative_phases(&u0, &l0);
    let upper = BlockEvolver::new(&blocks.upper, u0)?;
    let lower = BlockEvolver::new(&blocks.lower, l0)?;
    times_fs
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let t_au = fs_to_au(t);
            let seed = config.seed.wrapping_add(k as u64);
            let (ua, up) = run_block(&upper, t_au, &config.backend, seed)?;
            let (la, lp) = run_block(&lower, t_au, &config.backend, seed ^ LOWER_BLOCK_SEED_SALT)?;
            let probs = BlockProbabilities { upper: up, lower: lp };
            let mode = match config.remap {
                RemapKind::FirstOrder => RemapMode::FirstOrder {
                    initial_phase: &initial_phase,
                },
                RemapKind::ExactPhase => RemapMode::ExactPhase { upper: &ua, lower: &la },
            };
            let probabilities = remap_probabilities(&probs, t_au, &blocks, mode)?;
            let amplitudes = matches!(config.backend, Backend::CircuitIdeal).then(|| from_block_states(&ua, &la));
            Ok(StepOutput {
                probabilities,
                amplitudes,
            })
        })
        .collect()
}

/// Runs one block register. Returns the ideal compiled-circuit amplitudes
/// (scaled by the block norm, used for phases) and the measured block
/// probabilities (scaled by the block weight).
fn run_block(block: &BlockEvolver, t_au: f64, backend: &Backend, seed: u64) -> Result<(CVec, Vec<f64>)> {
    let Some(program) = block.program(t_au)? else {
        let z = CVec::zeros(block.half());
        return Ok((z, vec![0.0; block.half()]));
    };
    let scale = block.weight.sqrt();
    let amps = run_pure(&program).map(|z| z * scale);
    let probs = match backend {
        Backend::CircuitNoisy { noise, shots } => {
            let run = run_program(&program, Some(noise), *shots, seed)?;
            let measured = match run.shots {
                Some(s) => s.frequencies(),
                None => run.probabilities,
            };
            measured.into_iter().map(|p| p * block.weight).collect()
        }
        _ => amps.iter().map(|a| a.norm_sqr()).collect(),
    };
    Ok((amps, probs))
}

/// Compiled upper and lower block programs at time `t_au`, as run by the
/// circuit backends. A block without amplitude has no program.
pub fn block_programs(
    h: &NuclearHamiltonian,
    psi0: &WavepacketState,
    t_au: f64,
) -> Result<(Option<GateProgram>, Option<GateProgram>)> {
    let blocks = transform(h)?;
    if blocks.half() > 4 {
        return Err(Error::invalid("block programs need blocks of at most 2 qubits"));
    }
    let g = build_reflector(h.dim())?;
    let (u0, l0) = to_block_states(psi0, &g)?;
    let up = BlockEvolver::new(&blocks.upper, u0)?;
    let lo = BlockEvolver::new(&blocks.lower, l0)?;
    Ok((up.program(t_au)?, lo.program(t_au)?))
}

/// Exact block-evolved amplitudes (no circuit synthesis), recombined on
/// the grid. Equals full-space evolution when the off-block residual
/// vanishes.
pub fn block_evolved_state(h: &NuclearHamiltonian, psi0: &WavepacketState, t_au: f64) -> Result<CVec> {
    let blocks = transform(h)?;
    let g = build_reflector(h.dim())?;
    let (u0, l0) = to_block_states(psi0, &g)?;
    let up = BlockEvolver::new(&blocks.upper, u0)?;
    let lo = BlockEvolver::new(&blocks.lower, l0)?;
    Ok(from_block_states(&up.exact(t_au), &lo.exact(t_au)))
}

/// Full-space `e^{−iHt}ψ₀`.
pub fn evolve_exact(h: &NuclearHamiltonian, psi0: &WavepacketState, t_au: f64) -> CVec {
    let (values, vectors) = sym_eigen_sorted(h.matrix());
    propagator_from_eigen(&values, &vectors, t_au) * psi0.amplitudes()
}

/// Grid vector with a single nonzero entry.
pub fn basis_state(dim: usize, k: usize) -> CVec {
    let mut v = CVec::from_element(dim, ZERO);
    v[k] = ONE;
    v
}
