use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::symmetry::IsingParameters;

use super::program::{Gate, GateProgram};

/// First-order product formula for `exp(−i H_Ising t)` in the
/// computational basis.
///
/// Each of the `n_steps` slices applies, in order: `B^z` fields as `Rz`,
/// then `ZZ`, `XX` and `YY` couplings over ascending `(i, j)` as MS
/// interactions with basis-change wrappers, then any transverse fields as
/// `R` rotations. Terms whose parameter is exactly zero are omitted.
pub fn trotter_compile(params: &IsingParameters, t: f64, n_steps: usize) -> Result<GateProgram> {
    if n_steps == 0 {
        return Err(Error::invalid("Trotter compilation needs n_steps >= 1"));
    }
    params.validate()?;
    let n = params.n_qubits;
    let dt = t / n_steps as f64;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut step = Vec::new();
    for (q, &b) in params.bz.iter().enumerate() {
        if b != 0.0 {
            step.push(Gate::Rz(q, 2.0 * b * dt));
        }
    }
    for &(i, j) in &pairs {
        let jz = params.jz[(i, j)];
        if jz != 0.0 {
            step.extend([
                Gate::Ry(i, FRAC_PI_2),
                Gate::Ry(j, FRAC_PI_2),
                Gate::Ms(i, j, 2.0 * jz * dt),
                Gate::Ry(i, -FRAC_PI_2),
                Gate::Ry(j, -FRAC_PI_2),
            ]);
        }
    }
    for &(i, j) in &pairs {
        let jx = params.jx[(i, j)];
        if jx != 0.0 {
            step.push(Gate::Ms(i, j, 2.0 * jx * dt));
        }
    }
    for &(i, j) in &pairs {
        let jy = params.jy[(i, j)];
        if jy != 0.0 {
            step.extend([
                Gate::Rz(i, -FRAC_PI_2),
                Gate::Rz(j, -FRAC_PI_2),
                Gate::Ms(i, j, 2.0 * jy * dt),
                Gate::Rz(i, FRAC_PI_2),
                Gate::Rz(j, FRAC_PI_2),
            ]);
        }
    }
    for q in 0..n {
        let (bx, by) = (params.bx[q], params.by[q]);
        if bx != 0.0 || by != 0.0 {
            step.push(Gate::R(q, 2.0 * bx.hypot(by) * dt, by.atan2(bx)));
        }
    }
    let mut prog = GateProgram::new(n);
    for _ in 0..n_steps {
        prog.extend(step.iter().copied());
    }
    Ok(prog.normalized())
}
