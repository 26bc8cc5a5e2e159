use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::program::{Gate, GateProgram};

/// `CNOT(c, t)` as one Mølmer–Sørensen interaction with local wrappers,
/// in time order. Exact including the trailing phase.
pub fn cnot_as_ms(control: usize, target: usize) -> [Gate; 6] {
    [
        Gate::Ry(control, FRAC_PI_2),
        Gate::Ms(control, target, FRAC_PI_2),
        Gate::R(control, -FRAC_PI_2, 0.0),
        Gate::R(target, -FRAC_PI_2, 0.0),
        Gate::Ry(control, -FRAC_PI_2),
        Gate::GlobalPhase(-FRAC_PI_4),
    ]
}

/// Replaces every CNOT with its MS expansion. Programs without CNOTs are
/// returned unchanged.
pub fn cnot_to_ms(program: &GateProgram) -> GateProgram {
    if !program.gates().iter().any(|g| matches!(g, Gate::Cnot(..))) {
        return program.clone();
    }
    let mut out = GateProgram::new(program.n_qubits());
    if !program.has_measurement() {
        out = GateProgram::from_gates(program.n_qubits(), vec![Gate::PrepareAll])
            .expect("bare preparation is valid");
    }
    for g in program.body() {
        match *g {
            Gate::Cnot(c, t) => out.extend(cnot_as_ms(c, t)),
            g => out.push(g),
        }
    }
    out.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::program::GateKind;
    use crate::linalg::max_abs_c;

    #[test]
    fn single_cnot_expands_exactly() {
        for (c, t) in [(0, 1), (1, 0)] {
            let mut p = GateProgram::new(2);
            p.push(Gate::Cnot(c, t));
            let m = cnot_to_ms(&p);
            assert_eq!(m.count(GateKind::Ms), 1);
            assert_eq!(m.count(GateKind::Cnot), 0);
            assert!(max_abs_c(&(m.compose() - p.compose())) < 1e-14);
        }
    }

    #[test]
    fn no_cnot_is_identity_map() {
        let mut p = GateProgram::new(2);
        p.extend([Gate::Rz(0, 0.2), Gate::Ms(0, 1, 0.4)]);
        assert_eq!(cnot_to_ms(&p), p);
    }
}
