use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{cis, wrap_angle, CMat, CVec, C64, I, ONE, ZERO};

/// One instruction of a gate program. Angles are radians; qubit 0 is the
/// most significant bit of a basis index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    PrepareAll,
    /// `exp(−iθZ/2)`.
    Rz(usize, f64),
    /// `exp(−iθY/2)`.
    Ry(usize, f64),
    /// `exp(−iθ(cos φ X + sin φ Y)/2)`.
    R(usize, f64, f64),
    Cnot(usize, usize),
    /// Mølmer–Sørensen interaction `exp(−iθ X⊗X/2)`.
    Ms(usize, usize, f64),
    GlobalPhase(f64),
    MeasureAll,
}

/// Gate families with distinct noise calibrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    SingleQubit,
    Cnot,
    Ms,
    /// Preparation, measurement and global phase.
    Bookkeeping,
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Rz(..) | Gate::Ry(..) | Gate::R(..) => GateKind::SingleQubit,
            Gate::Cnot(..) => GateKind::Cnot,
            Gate::Ms(..) => GateKind::Ms,
            Gate::PrepareAll | Gate::MeasureAll | Gate::GlobalPhase(_) => GateKind::Bookkeeping,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rz(q, _) | Gate::Ry(q, _) | Gate::R(q, _, _) => vec![q],
            Gate::Cnot(a, b) | Gate::Ms(a, b, _) => vec![a, b],
            _ => Vec::new(),
        }
    }

    pub fn is_rotation(&self) -> bool {
        self.kind() == GateKind::SingleQubit
    }

    /// Matrix on the gate's own qubits (ordered as [`Gate::qubits`]), or
    /// `None` for bookkeeping instructions.
    pub fn local_matrix(&self) -> Option<CMat> {
        let m = match *self {
            Gate::Rz(_, t) => rz(t),
            Gate::Ry(_, t) => ry(t),
            Gate::R(_, t, p) => r(t, p),
            Gate::Cnot(..) => {
                let mut m = CMat::zeros(4, 4);
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
                m[(2, 3)] = ONE;
                m[(3, 2)] = ONE;
                m
            }
            Gate::Ms(_, _, t) => ms(t),
            _ => return None,
        };
        Some(m)
    }

    /// Same gate with every angle wrapped into `[−π, π]`, plus the global
    /// phase the wrap introduced (a 2π shift of a half-angle rotation flips
    /// its sign).
    fn wrapped(&self) -> (Gate, f64) {
        let fold = |t: f64| {
            let w = wrap_angle(t);
            let turns = ((t - w) / (2.0 * PI)).round();
            (w, if turns as i64 % 2 != 0 { PI } else { 0.0 })
        };
        match *self {
            Gate::Rz(q, t) => {
                let (w, p) = fold(t);
                (Gate::Rz(q, w), p)
            }
            Gate::Ry(q, t) => {
                let (w, p) = fold(t);
                (Gate::Ry(q, w), p)
            }
            Gate::R(q, t, phi) => {
                let (w, p) = fold(t);
                (Gate::R(q, w, wrap_angle(phi)), p)
            }
            Gate::Ms(a, b, t) => {
                let (w, p) = fold(t);
                (Gate::Ms(a, b, w), p)
            }
            Gate::GlobalPhase(a) => (Gate::GlobalPhase(wrap_angle(a)), 0.0),
            g => (g, 0.0),
        }
    }

    fn angles(&self) -> Vec<f64> {
        match *self {
            Gate::Rz(_, t) | Gate::Ry(_, t) | Gate::Ms(_, _, t) | Gate::GlobalPhase(t) => vec![t],
            Gate::R(_, t, p) => vec![t, p],
            _ => Vec::new(),
        }
    }
}

pub fn rz(theta: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[cis(-theta / 2.0), ZERO, ZERO, cis(theta / 2.0)])
}

pub fn ry(theta: f64) -> CMat {
    let (s, c) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c.into(), (-s).into(), s.into(), c.into()])
}

pub fn r(theta: f64, phi: f64) -> CMat {
    let (s, c) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(
        2,
        2,
        &[c.into(), -I * cis(-phi) * s, -I * cis(phi) * s, c.into()],
    )
}

pub fn ms(theta: f64) -> CMat {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = C64::new(c, 0.0);
    let d = -I * s;
    CMat::from_row_slice(
        4,
        4,
        &[
            c, ZERO, ZERO, d, //
            ZERO, c, d, ZERO, //
            ZERO, d, c, ZERO, //
            d, ZERO, ZERO, c,
        ],
    )
}

/// Applies a 1- or 2-qubit matrix to the rows of `target` (a state vector
/// or a matrix whose columns are states).
pub fn apply_local(target: &mut CMat, qubits: &[usize], m: &CMat, n_qubits: usize) {
    let dim = 1usize << n_qubits;
    let cols = target.ncols();
    match qubits {
        [q] => {
            let mask = 1usize << (n_qubits - 1 - q);
            for base in (0..dim).filter(|i| i & mask == 0) {
                let j = base | mask;
                for c in 0..cols {
                    let (a, b) = (target[(base, c)], target[(j, c)]);
                    target[(base, c)] = m[(0, 0)] * a + m[(0, 1)] * b;
                    target[(j, c)] = m[(1, 0)] * a + m[(1, 1)] * b;
                }
            }
        }
        [q0, q1] => {
            let m0 = 1usize << (n_qubits - 1 - q0);
            let m1 = 1usize << (n_qubits - 1 - q1);
            for base in (0..dim).filter(|i| i & (m0 | m1) == 0) {
                let idx = [base, base | m1, base | m0, base | m0 | m1];
                for c in 0..cols {
                    let v = idx.map(|i| target[(i, c)]);
                    for (r, &i) in idx.iter().enumerate() {
                        target[(i, c)] = (0..4).map(|k| m[(r, k)] * v[k]).sum();
                    }
                }
            }
        }
        _ => unreachable!("gates act on one or two qubits"),
    }
}

/// Right-multiplies `target` by the adjoint of a local gate:
/// `target ← target · M†` on the selected qubits.
pub fn apply_local_adjoint_right(target: &mut CMat, qubits: &[usize], m: &CMat, n_qubits: usize) {
    // (ρ M†) = (M ρ†)† and ρ is handled column-wise via the transpose.
    let mut t = target.adjoint();
    apply_local(&mut t, qubits, m, n_qubits);
    *target = t.adjoint();
}

/// Ordered gate list over a fixed qubit register.
///
/// The first instruction is always `PrepareAll`; `MeasureAll`, when
/// present, is the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct GateProgram {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl GateProgram {
    /// `prepare_all` followed by `measure_all`.
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: vec![Gate::PrepareAll, Gate::MeasureAll],
        }
    }

    /// Builds a program from a full instruction list and validates it.
    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let p = Self { n_qubits, gates };
        p.validate()?;
        Ok(p)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Gates between preparation and measurement.
    pub fn body(&self) -> &[Gate] {
        let end = if self.gates.last() == Some(&Gate::MeasureAll) {
            self.gates.len() - 1
        } else {
            self.gates.len()
        };
        &self.gates[1..end]
    }

    pub fn has_measurement(&self) -> bool {
        self.gates.last() == Some(&Gate::MeasureAll)
    }

    /// Inserts a gate before the trailing measurement.
    pub fn push(&mut self, gate: Gate) {
        let at = if self.has_measurement() {
            self.gates.len() - 1
        } else {
            self.gates.len()
        };
        self.gates.insert(at, gate);
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) {
        for g in gates {
            self.push(g);
        }
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    pub fn count_where(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(g)).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::invalid("program needs at least one qubit"));
        }
        if self.gates.first() != Some(&Gate::PrepareAll) {
            return Err(Error::invalid("program must start with prepare_all"));
        }
        if self.gates.iter().filter(|g| **g == Gate::PrepareAll).count() != 1 {
            return Err(Error::invalid("prepare_all must appear exactly once"));
        }
        let measures = self.gates.iter().filter(|g| **g == Gate::MeasureAll).count();
        if measures > 1 || (measures == 1 && !self.has_measurement()) {
            return Err(Error::invalid("measure_all may only appear once, at the end"));
        }
        for g in &self.gates {
            let qs = g.qubits();
            if let Some(&q) = qs.iter().find(|&&q| q >= self.n_qubits) {
                return Err(Error::invalid(format!(
                    "qubit {q} out of range for a {}-qubit program",
                    self.n_qubits
                )));
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::invalid(format!("two-qubit gate on repeated qubit {}", qs[0])));
            }
            for a in g.angles() {
                if !a.is_finite() || a.abs() > PI {
                    return Err(Error::invalid(format!("angle {a} outside [-pi, pi] in {g:?}")));
                }
            }
        }
        Ok(())
    }

    /// Wraps every angle into `[−π, π]`, folding the sign flips into a
    /// single trailing `GlobalPhase` (merged with any existing ones).
    pub fn normalized(&self) -> Self {
        let mut phase = 0.0;
        let mut out = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match g {
                Gate::GlobalPhase(a) => phase += a,
                g => {
                    let (w, p) = g.wrapped();
                    phase += p;
                    out.push(w);
                }
            }
        }
        let mut prog = Self {
            n_qubits: self.n_qubits,
            gates: out,
        };
        prog.push(Gate::GlobalPhase(wrap_angle(phase)));
        prog
    }

    /// Full `2^n × 2^n` unitary, including global phases.
    pub fn compose(&self) -> CMat {
        let dim = 1usize << self.n_qubits;
        let mut u = CMat::identity(dim, dim);
        for g in &self.gates {
            match g {
                Gate::GlobalPhase(a) => u *= cis(*a),
                g => {
                    if let Some(m) = g.local_matrix() {
                        apply_local(&mut u, &g.qubits(), &m, self.n_qubits);
                    }
                }
            }
        }
        u
    }

    /// Applies the program to a state vector.
    pub fn apply_to_state(&self, state: &CVec) -> CVec {
        let mut m = CMat::from_column_slice(state.len(), 1, state.as_slice());
        for g in &self.gates {
            match g {
                Gate::GlobalPhase(a) => m *= cis(*a),
                g => {
                    if let Some(u) = g.local_matrix() {
                        apply_local(&mut m, &g.qubits(), &u, self.n_qubits);
                    }
                }
            }
        }
        CVec::from_column_slice(m.as_slice())
    }

    /// Sequence of gate families with angles stripped; equal skeletons
    /// differ only in rotation angles.
    pub fn skeleton(&self) -> Vec<(std::mem::Discriminant<Gate>, Vec<usize>)> {
        self.gates
            .iter()
            .map(|g| (std::mem::discriminant(g), g.qubits()))
            .collect()
    }

    /// Appends `other`'s body after this program's body.
    pub fn then(&self, other: &GateProgram) -> Result<Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::invalid("cannot concatenate programs on different registers"));
        }
        let mut p = self.clone();
        p.extend(other.body().iter().copied());
        Ok(p)
    }
}
