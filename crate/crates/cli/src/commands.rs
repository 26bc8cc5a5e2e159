use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nucdyn::compiler::{block_propagator, cartan_decompose, cnot_to_ms, emit_text, trotter_compile, GateKind};
use nucdyn::dynamics::{
    block_programs, prepare_initial, run_dynamics, Backend, DynamicsConfig, InitialStateSpec, TimeSeries,
};
use nucdyn::hamiltonian::{
    build_hamiltonian, exact_diagonalize, load_builtin_dmanh, DafKineticSpec, EigenSolution, NuclearHamiltonian,
    PotentialCurve, SpatialGrid,
};
use nucdyn::linalg::{propagator_from_eigen, sym_eigen_sorted, CVec, C64};
use nucdyn::mps::{coupled_double_well_model, marginal, propagate_nd, MpsState, PropagationOptions};
use nucdyn::simulator::circuit_fidelity_estimate;
use nucdyn::spectrum::{
    combine_spectra, detect_peaks, fourier_spectrum, reconstruct_ladder_from, EnergyLadder, LadderOptions, PeakSet,
    Spectrum, Splitting,
};
use nucdyn::symmetry::{fit_ising_params, read_entries_csv, transform as block_transform, write_entries_csv};
use nucdyn::units::{fs_to_au, hartree_to_cm1, nyquist_cm1, MILLIHARTREE};
use rayon::prelude::*;

use crate::config::{initial_label, parse_initial_arg, PotentialSource, RunConfig};
use crate::output::OutputDir;
use crate::plot::plot_script;
use crate::CliError;

pub struct Context {
    pub cfg: RunConfig,
    pub out: OutputDir,
    pub quiet: bool,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn kinetic_spec(cfg: &RunConfig, grid: &SpatialGrid) -> Result<DafKineticSpec, CliError> {
    let default = DafKineticSpec::for_grid(grid, cfg.kinetic.mass)?;
    Ok(DafKineticSpec::new(
        cfg.kinetic.mass,
        cfg.kinetic.sigma.unwrap_or(default.sigma),
        cfg.kinetic.m_daf.unwrap_or(default.m_daf),
    )?)
}

/// The configured Hamiltonian, or the entry-list CSV at `file`.
fn load_hamiltonian(cfg: &RunConfig, file: Option<&Path>) -> Result<NuclearHamiltonian, CliError> {
    if let Some(path) = file {
        let m = read_entries_csv(open(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        return Ok(NuclearHamiltonian::from_matrix(m, None)?);
    }
    let grid = || SpatialGrid::new(cfg.grid.n_points, cfg.grid.x_min, cfg.grid.x_max);
    let h = match cfg.potential_source() {
        PotentialSource::Builtin => load_builtin_dmanh(),
        PotentialSource::Harmonic => {
            let grid = grid()?;
            let k = cfg.kinetic.mass * cfg.potential.omega.powi(2);
            let v = PotentialCurve::from_fn(&grid, |x| 0.5 * k * x * x)?;
            build_hamiltonian(&grid, &v, &kinetic_spec(cfg, &grid)?)?
        }
        PotentialSource::Box => {
            let grid = grid()?;
            let mut v = vec![0.0; grid.n_points()];
            v[0] = cfg.potential.wall;
            v[grid.n_points() - 1] = cfg.potential.wall;
            build_hamiltonian(&grid, &PotentialCurve::new(v)?, &kinetic_spec(cfg, &grid)?)?
        }
        PotentialSource::File(path) => {
            let (grid, v) = PotentialCurve::load_csv(&path)?;
            build_hamiltonian(&grid, &v, &kinetic_spec(cfg, &grid)?)?
        }
    };
    Ok(h)
}

fn write_eigen_csv(eig: &EigenSolution, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "level_index,energy_hartree,relative_cm1")?;
    for (k, (e, rel)) in eig.eigenvalues.iter().zip(eig.relative_levels_cm1()).enumerate() {
        writeln!(w, "{k},{e:.16e},{rel:.12e}")?;
    }
    Ok(())
}

pub fn build(mut ctx: Context, potential: Option<String>) -> Result<(), CliError> {
    if let Some(src) = potential {
        ctx.cfg.override_potential(&src)?;
    }
    let h = load_hamiltonian(&ctx.cfg, None)?;
    let eig = exact_diagonalize(&h)?;
    ctx.out.write_with("hamiltonian.csv", |w| write_entries_csv(h.matrix(), w))?;
    ctx.out.write_with("eigenvalues.csv", |w| write_eigen_csv(&eig, w))?;
    ctx.say(format!(
        "{n}x{n} Hamiltonian, H[0][0] = {:.4} mHa, ground-to-first splitting {:.3} cm-1",
        h.matrix()[(0, 0)] / MILLIHARTREE,
        eig.relative_levels_cm1().get(1).copied().unwrap_or(0.0),
        n = h.dim(),
    ));
    let asym = h.diagonal_asymmetry();
    if asym > 0.0 {
        ctx.say(format!("diagonal reflection asymmetry {:.4} mHa", asym / MILLIHARTREE));
    }
    Ok(())
}

pub fn transform(ctx: &Context, hamiltonian: Option<&Path>) -> Result<(), CliError> {
    let h = load_hamiltonian(&ctx.cfg, hamiltonian)?;
    let blocks = block_transform(&h)?;
    ctx.out.write_with("blocks.csv", |w| write_entries_csv(blocks.full(), w))?;
    if blocks.needs_warning() {
        eprintln!(
            "warning: off-block residual {:.4} mHa; the potential is not reflection symmetric and the blocks only approximate H",
            blocks.off_block_residual / MILLIHARTREE
        );
    }
    let fit = fit_ising_params(&blocks)?;
    ctx.out.write_with("ising_params.csv", |w| fit.params.write_csv(w))?;
    ctx.say(format!(
        "off-block residual {:.3e} Ha, closed-form residual {:.3e} Ha, Ising fit residual {:.3e} Ha{}",
        blocks.off_block_residual,
        blocks.formula_residual,
        fit.residual,
        if fit.rank_deficient { " (rank deficient)" } else { "" }
    ));
    Ok(())
}

pub fn compile(
    ctx: &Context,
    hamiltonian: Option<&Path>,
    t_fs: f64,
    ms: bool,
    trotter_steps: Option<usize>,
) -> Result<(), CliError> {
    let h = load_hamiltonian(&ctx.cfg, hamiltonian)?;
    let blocks = block_transform(&h)?;
    let t_au = fs_to_au(t_fs);
    let noise = ctx.cfg.noise_model();
    if blocks.half() == 4 {
        for (name, block) in [("upper", &blocks.upper), ("lower", &blocks.lower)] {
            let mut prog = cartan_decompose(&block_propagator(block, t_au)?)?;
            if ms {
                prog = cnot_to_ms(&prog);
            }
            ctx.out.write_str(&format!("programs/{name}.gates"), &emit_text(&prog))?;
            ctx.say(format!(
                "{name} block: {} CNOT, {} MS, {} gates, fidelity estimate {:.4}",
                prog.count(GateKind::Cnot),
                prog.count(GateKind::Ms),
                prog.body().len(),
                circuit_fidelity_estimate(&prog, &noise)
            ));
        }
    } else if trotter_steps.is_none() {
        return Err(CliError::config(format!(
            "Cartan synthesis needs 4x4 blocks, this Hamiltonian has {0}x{0} blocks; pass --trotter-steps",
            blocks.half()
        )));
    }
    if let Some(n) = trotter_steps {
        let fit = fit_ising_params(&blocks)?;
        let mut prog = trotter_compile(&fit.params, t_au, n)?;
        if ms {
            prog = cnot_to_ms(&prog);
        }
        ctx.out.write_str("programs/ising_trotter.gates", &emit_text(&prog))?;
        ctx.say(format!(
            "Ising Trotter program: {n} steps, {} gates, fit residual {:.3e} Ha",
            prog.body().len(),
            fit.residual
        ));
    }
    Ok(())
}

/// Warns when `dt` cannot resolve the largest level splitting.
fn check_nyquist(h: &NuclearHamiltonian, dt_fs: f64) -> Result<(), CliError> {
    let eig = exact_diagonalize(h)?;
    let range = hartree_to_cm1(eig.eigenvalues[eig.len() - 1] - eig.eigenvalues[0]);
    let limit = nyquist_cm1(dt_fs);
    if range > limit {
        eprintln!(
            "warning: dt = {dt_fs} fs resolves up to {limit:.1} cm-1 but the spectrum spans {range:.1} cm-1; \
             dt must not exceed {:.4} fs",
            dt_fs * limit / range
        );
    }
    Ok(())
}

pub fn simulate(
    ctx: &Context,
    hamiltonian: Option<&Path>,
    initial: &[String],
    emit_programs: bool,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let h = load_hamiltonian(cfg, hamiltonian)?;
    let specs: Vec<InitialStateSpec> = if initial.is_empty() {
        vec![cfg.initial_spec().map_err(CliError::config)?]
    } else {
        initial
            .iter()
            .map(|s| parse_initial_arg(s).map_err(CliError::config))
            .collect::<Result<_, _>>()?
    };
    check_nyquist(&h, cfg.dynamics.dt_fs)?;
    let dyn_cfg = DynamicsConfig {
        dt_fs: cfg.dynamics.dt_fs,
        n_steps: cfg.dynamics.n_steps,
        backend: cfg.backend(),
        remap: cfg.remap(),
        seed: cfg.seed,
        keep_amplitudes: false,
    };
    let programs = (emit_programs || cfg.dynamics.emit_programs) && !matches!(dyn_cfg.backend, Backend::Oracle);
    for spec in &specs {
        let label = initial_label(spec);
        let series = run_dynamics(&h, spec, &dyn_cfg)?;
        ctx.out.write_with(&format!("series_{label}.csv"), |w| series.write_csv(w))?;
        let drift = series.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        ctx.say(format!(
            "{label}: {} steps on the {} backend, max |row sum - 1| = {drift:.2e}",
            series.len(),
            series.backend.name()
        ));
        if programs {
            write_step_programs(ctx, &h, spec, &label, &series.times_fs)?;
        }
    }
    Ok(())
}

fn write_step_programs(
    ctx: &Context,
    h: &NuclearHamiltonian,
    spec: &InitialStateSpec,
    label: &str,
    times_fs: &[f64],
) -> Result<(), CliError> {
    let psi0 = prepare_initial(spec, h)?;
    let texts: Vec<(Option<String>, Option<String>)> = times_fs
        .par_iter()
        .map(|&t| {
            let (up, lo) = block_programs(h, &psi0, fs_to_au(t))?;
            Ok((up.as_ref().map(emit_text), lo.as_ref().map(emit_text)))
        })
        .collect::<Result<_, nucdyn::Error>>()?;
    for (k, (up, lo)) in texts.iter().enumerate() {
        for (name, text) in [("upper", up), ("lower", lo)] {
            if let Some(text) = text {
                ctx.out.write_str(&format!("programs/{label}/step_{k:06}_{name}.gates"), text)?;
            }
        }
    }
    Ok(())
}

fn read_series(path: &Path) -> Result<TimeSeries, CliError> {
    TimeSeries::read_csv(open(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn read_peaks(path: &Path) -> Result<PeakSet, CliError> {
    PeakSet::read_csv(open(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

fn write_assignments(ladder: &EnergyLadder, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "peak_cm1,lower,upper,fitted_cm1,residual_cm1")?;
    for a in &ladder.assignments {
        let fitted = ladder.levels[a.splitting.upper] - ladder.levels[a.splitting.lower];
        writeln!(
            w,
            "{:.12e},{},{},{fitted:.12e},{:.12e}",
            a.peak.frequency_cm1,
            a.splitting.lower,
            a.splitting.upper,
            a.peak.frequency_cm1 - fitted
        )?;
    }
    Ok(())
}

fn write_levels(levels: &[f64], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "level_index,energy_cm1")?;
    for (k, e) in levels.iter().enumerate() {
        writeln!(w, "{k},{e:.12e}")?;
    }
    Ok(())
}

/// Fits the ladder and writes its CSVs; the reference levels are written
/// first so a failed fit still leaves them for plotting.
fn fit_and_write_ladder(ctx: &Context, sets: &[PeakSet], hamiltonian: Option<&Path>) -> Result<(), CliError> {
    let h = load_hamiltonian(&ctx.cfg, hamiltonian)?;
    let eig = exact_diagonalize(&h)?;
    let reference = eig.relative_levels_cm1();
    ctx.out.write_with("reference_levels.csv", |w| write_levels(&reference, w))?;
    let predicted: Vec<Splitting> = eig.splittings_cm1().into_iter().map(Splitting::from).collect();
    let options = LadderOptions {
        max_deviation_cm1: ctx.cfg.spectrum.max_deviation_cm1,
    };
    let ladder = reconstruct_ladder_from(sets, &predicted, options)?;
    ctx.out.write_with("ladder.csv", |w| ladder.write_csv(w))?;
    ctx.out.write_with("assignments.csv", |w| write_assignments(&ladder, w))?;
    ctx.say(format!(
        "{} assigned peaks, fit residual {:.3} cm-1, RMS against exact diagonalization {:.3} cm-1",
        ladder.assignments.len(),
        ladder.residual_rms,
        ladder.rms_against(&reference)
    ));
    Ok(())
}

pub fn spectrum(ctx: &Context, files: &[PathBuf], hamiltonian: Option<&Path>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let series: Vec<TimeSeries> = files.iter().map(|p| read_series(p)).collect::<Result<_, _>>()?;
    for (s, path) in series.iter().zip(files).skip(1) {
        if !same_grid(&s.times_fs, &series[0].times_fs) {
            return Err(CliError::config(format!(
                "time grid of {} differs from {}",
                path.display(),
                files[0].display()
            )));
        }
    }
    let spectra: Vec<Spectrum> = series
        .iter()
        .map(|s| fourier_spectrum(s, &[], cfg.window()))
        .collect::<Result<_, _>>()?;
    let combined = combine_spectra(&spectra)?;
    let peaks = detect_peaks(&combined, cfg.spectrum.threshold_factor)?;
    ctx.out.write_with("spectrum.csv", |w| combined.write_csv(w))?;
    ctx.out.write_with("peaks.csv", |w| peaks.write_csv(w))?;
    let stems: Vec<String> = files.iter().map(|p| stem(p)).collect();
    if files.len() > 1 {
        for (s, name) in spectra.iter().zip(&stems) {
            let individual = detect_peaks(s, cfg.spectrum.threshold_factor)?;
            ctx.out.write_with(&format!("spectrum_{name}.csv"), |w| s.write_csv(w))?;
            ctx.out.write_with(&format!("peaks_{name}.csv"), |w| individual.write_csv(w))?;
        }
    }
    let absolute: Vec<PathBuf> = files.iter().map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone())).collect();
    ctx.out.write_str("plot_spectra.py", &plot_script(&absolute, &stems))?;
    ctx.say(format!(
        "{} input(s), {} bins of {:.3} cm-1, {} peaks",
        files.len(),
        combined.len(),
        combined.bin_width(),
        peaks.len()
    ));
    fit_and_write_ladder(ctx, std::slice::from_ref(&peaks), hamiltonian)
}

pub fn ladder(ctx: &Context, files: &[PathBuf], hamiltonian: Option<&Path>) -> Result<(), CliError> {
    let sets: Vec<PeakSet> = files.iter().map(|p| read_peaks(p)).collect::<Result<_, _>>()?;
    fit_and_write_ladder(ctx, &sets, hamiltonian)
}

pub fn mps_demo(ctx: &Context) -> Result<(), CliError> {
    let m = &ctx.cfg.mps;
    let (dims, h) = coupled_double_well_model(m.n_harmonic, m.coupling_hartree)?;
    let mut well = CVec::zeros(dims[0]);
    well[0] = C64::new(1.0, 0.0);
    let centre = (dims[1] as f64 - 1.0) / 2.0;
    let width = (dims[1] as f64 / 5.0).max(1.0);
    let mode = CVec::from_fn(dims[1], |i, _| C64::new((-((i as f64 - centre) / width).powi(2)).exp(), 0.0));
    let mode = &mode / C64::new(mode.norm(), 0.0);
    let psi = MpsState::product(&[well.clone(), mode.clone()])?;
    let t_au = fs_to_au(m.t_fs);
    let options = PropagationOptions {
        chi_max: m.chi_max,
        tol: m.tol,
        ..Default::default()
    };
    let traj = propagate_nd(&h, &psi, t_au, m.substeps, options)?;
    let dt_fs = m.t_fs / m.substeps as f64;

    let (values, vectors) = sym_eigen_sorted(&h);
    let psi0 = well.kronecker(&mode);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (k, state) in traj.states.iter().enumerate() {
        let exact = propagator_from_eigen(&values, &vectors, t_au * k as f64 / m.substeps as f64) * &psi0;
        for site in 0..dims.len() {
            let got = state.marginal(site)?;
            let want = marginal(&exact, &dims, site)?;
            for (i, (a, b)) in got.iter().zip(&want).enumerate() {
                worst = worst.max((a - b).abs());
                rows.push((k, site, i, *a, *b));
            }
        }
    }
    ctx.out.write_with("mps_marginals.csv", |w| {
        writeln!(w, "t_fs,mode,index,probability,dense_probability")?;
        for (k, site, i, a, b) in &rows {
            writeln!(w, "{:.6e},{site},{i},{a:.12e},{b:.12e}", *k as f64 * dt_fs)?;
        }
        Ok(())
    })?;
    ctx.out.write_with("mps_bonds.csv", |w| {
        writeln!(w, "t_fs,max_bond,max_bond_pre_compression,discarded_weight")?;
        for (k, state) in traj.states.iter().enumerate() {
            let pre = traj.max_bond_pre_compression.get(k).copied().unwrap_or(state.max_bond());
            let disc = traj.discarded.get(k).copied().unwrap_or(0.0);
            writeln!(w, "{:.6e},{},{pre},{disc:.6e}", k as f64 * dt_fs, state.max_bond())?;
        }
        Ok(())
    })?;
    ctx.say(format!(
        "{} substeps on {:?} sites, max bond {}, largest marginal deviation from dense {worst:.2e}",
        m.substeps,
        dims,
        traj.states.iter().map(MpsState::max_bond).max().unwrap_or(0)
    ));
    Ok(())
}
