//! Two-qubit synthesis through the magic-basis (KAK) decomposition
//! `U = e^{iφ} (A₁⊗B₁) exp(i(a XX + b YY + c ZZ)) (A₂⊗B₂)`, with the
//! non-local core realized by three CNOTs.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::linalg::{kron, paulis, sym_eigen_sorted, CMat, RMat, C64, I, ONE, ZERO};

use super::euler::euler_zyz;
use super::program::{rz, Gate, GateProgram};
use super::propagator::TwoQubitUnitary;

/// Columns are the magic (Bell-like) basis in which local gates are real
/// orthogonal and `XX`, `YY`, `ZZ` are diagonal.
fn magic() -> &'static CMat {
    static B: OnceLock<CMat> = OnceLock::new();
    B.get_or_init(|| {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (o, z, i) = (ONE * h, ZERO, I * h);
        CMat::from_row_slice(
            4,
            4,
            &[
                o, z, z, i, //
                z, i, o, z, //
                z, i, -o, z, //
                o, z, z, -i,
            ],
        )
    })
}

/// Inverse of the linear map `(g, a, b, c) ↦ g + a·xx_k + b·yy_k + c·zz_k`
/// where `xx_k` etc. are the magic-basis diagonals of the Pauli products.
fn coefficient_solver() -> &'static Matrix4<f64> {
    static S: OnceLock<Matrix4<f64>> = OnceLock::new();
    S.get_or_init(|| {
        let [_, x, y, z] = paulis();
        let b = magic();
        let diag = |p: &CMat| {
            let d = b.adjoint() * kron(p, p) * b;
            Vector4::from_fn(|k, _| d[(k, k)].re)
        };
        let (dx, dy, dz) = (diag(&x), diag(&y), diag(&z));
        let m = Matrix4::from_fn(|k, col| match col {
            0 => 1.0,
            1 => dx[k],
            2 => dy[k],
            _ => dz[k],
        });
        m.try_inverse().expect("Pauli diagonals are linearly independent")
    })
}

/// Interaction coefficients of the non-local core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KakCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Factors of `U = e^{iφ} L₁ · exp(i(a XX + b YY + c ZZ)) · L₂`.
#[derive(Debug, Clone)]
pub struct KakDecomposition {
    pub coefficients: KakCoefficients,
    /// Applied last.
    pub left: (CMat, CMat),
    /// Applied first.
    pub right: (CMat, CMat),
    pub phase: f64,
}

/// Fixed real combinations of `Re(M)` and `Im(M)` whose eigenvectors
/// diagonalize a symmetric unitary `M`. Tried in order; the first that
/// diagonalizes to tolerance wins, which keeps the output deterministic.
const MIX: [(f64, f64); 6] = [
    (1.0, 0.618_033_988_749_894_9),
    (0.414_213_562_373_095, 1.0),
    (1.0, -1.732_050_807_568_877),
    (0.271_828_182_845_904_5, -1.0),
    (1.0, 0.0),
    (0.0, 1.0),
];

fn real_diagonalizer(m: &CMat) -> Result<RMat> {
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let mut best: Option<(f64, RMat)> = None;
    for (cr, ci) in MIX {
        let s = &re * cr + &im * ci;
        let s = (&s + s.transpose()) * 0.5;
        let (_, p) = sym_eigen_sorted(&s);
        let pc = p.map(|x| C64::new(x, 0.0));
        let d = pc.transpose() * m * &pc;
        let off = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(0.0_f64, |acc, (i, j)| acc.max(d[(i, j)].norm()));
        if off < 1e-13 {
            return Ok(p);
        }
        if best.as_ref().is_none_or(|(b, _)| off < *b) {
            best = Some((off, p));
        }
    }
    match best {
        Some((off, p)) if off < 1e-9 => Ok(p),
        _ => Err(Error::numeric("could not diagonalize the magic-basis square of U")),
    }
}

/// Splits a 4×4 matrix that is (numerically) a Kronecker product into
/// `A ⊗ B` with `det B = 1`.
pub fn factor_local(l: &CMat) -> Result<(CMat, CMat)> {
    let block = |r: usize, c: usize| l.view((2 * r, 2 * c), (2, 2)).into_owned();
    let (mut br, mut bc, mut bn) = (0, 0, -1.0);
    for r in 0..2 {
        for c in 0..2 {
            let n = block(r, c).norm();
            if n > bn {
                (br, bc, bn) = (r, c, n);
            }
        }
    }
    let pivot = block(br, bc);
    let det = pivot[(0, 0)] * pivot[(1, 1)] - pivot[(0, 1)] * pivot[(1, 0)];
    if det.norm() < 1e-12 {
        return Err(Error::numeric("local factor is singular"));
    }
    let b = pivot / det.sqrt();
    let a = CMat::from_fn(2, 2, |r, c| (b.adjoint() * block(r, c)).trace() * 0.5);
    let residual = (kron(&a, &b) - l).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if residual > 1e-8 {
        return Err(Error::numeric(format!(
            "operator is not a product of single-qubit gates (residual {residual:e})"
        )));
    }
    Ok((a, b))
}

pub fn kak_decompose(u: &TwoQubitUnitary) -> Result<KakDecomposition> {
    let m = u.matrix();
    if m.nrows() != 4 {
        return Err(Error::invalid("KAK decomposition needs a 4x4 unitary"));
    }
    let b = magic();
    let det = m.determinant();
    let det_root = C64::from_polar(1.0, det.arg() / 4.0);
    let su = m / det_root;
    let up = b.adjoint() * &su * b;
    let m2 = up.transpose() * &up;

    let mut p = real_diagonalizer(&m2)?;
    if p.determinant() < 0.0 {
        p.column_mut(0).neg_mut();
    }
    let pc = p.map(|x| C64::new(x, 0.0));
    let d = pc.transpose() * &m2 * &pc;
    let mut theta: Vec<f64> = (0..4).map(|k| d[(k, k)].arg() / 2.0).collect();
    // Σθ must vanish mod 2π so that the left factor has unit determinant.
    let total: f64 = theta.iter().sum();
    let turns = (total / std::f64::consts::PI).round() as i64;
    if turns.rem_euclid(2) == 1 {
        theta[0] -= std::f64::consts::PI;
    }
    let delta_inv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        theta.iter().map(|&t| C64::from_polar(1.0, -t)),
    ));
    let k1 = &up * &pc * delta_inv;

    let sol = coefficient_solver() * Vector4::from_column_slice(&theta);
    let (g, a, bb, c) = (sol[0], sol[1], sol[2], sol[3]);

    let left = b * k1 * b.adjoint();
    let right = b * pc.transpose() * b.adjoint();
    Ok(KakDecomposition {
        coefficients: KakCoefficients { a, b: bb, c },
        left: factor_local(&left)?,
        right: factor_local(&right)?,
        phase: det_root.arg() + g,
    })
}

fn push_zyz(prog: &mut GateProgram, q: usize, m: &CMat) -> Result<()> {
    let e = euler_zyz(m)?;
    prog.extend([Gate::Rz(q, e.delta), Gate::Ry(q, e.gamma), Gate::Rz(q, e.beta)]);
    Ok(())
}

/// Synthesizes a two-qubit unitary as seven local-rotation slots and three
/// CNOTs. The four outer slots are Euler-expanded into `Rz Ry Rz`, so the
/// gate skeleton is the same for every input.
pub fn cartan_decompose(u: &TwoQubitUnitary) -> Result<GateProgram> {
    let kak = kak_decompose(u)?;
    let KakCoefficients { a, b, c } = kak.coefficients;
    let mut prog = GateProgram::new(2);
    // The core exp(i(aXX + bYY + cZZ)) opens with Rz(−π/2) on qubit 1 and
    // closes with Rz(π/2) on qubit 0; both merge into the outer slots.
    push_zyz(&mut prog, 0, &kak.right.0)?;
    push_zyz(&mut prog, 1, &(rz(-FRAC_PI_2) * &kak.right.1))?;
    prog.push(Gate::Cnot(1, 0));
    prog.push(Gate::Rz(0, FRAC_PI_2 - 2.0 * c));
    prog.push(Gate::Ry(1, 2.0 * a - FRAC_PI_2));
    prog.push(Gate::Cnot(0, 1));
    prog.push(Gate::Ry(1, FRAC_PI_2 - 2.0 * b));
    prog.push(Gate::Cnot(1, 0));
    push_zyz(&mut prog, 0, &(&kak.left.0 * rz(FRAC_PI_2)))?;
    push_zyz(&mut prog, 1, &kak.left.1)?;

    let bare = prog.compose();
    let overlap: C64 = bare.iter().zip(u.matrix().iter()).map(|(x, y)| x.conj() * y).sum();
    prog.push(Gate::GlobalPhase(overlap.arg()));
    Ok(prog.normalized())
}

/// Synthesizes a one- or two-qubit unitary with the fixed skeleton for its
/// size (Euler angles for one qubit, [`cartan_decompose`] for two).
pub fn synthesize(u: &TwoQubitUnitary) -> Result<GateProgram> {
    match u.n_qubits() {
        1 => {
            let e = euler_zyz(u.matrix())?;
            let mut p = GateProgram::new(1);
            p.extend([
                Gate::Rz(0, e.delta),
                Gate::Ry(0, e.gamma),
                Gate::Rz(0, e.beta),
                Gate::GlobalPhase(e.alpha),
            ]);
            Ok(p.normalized())
        }
        2 => cartan_decompose(u),
        n => Err(Error::invalid(format!(
            "direct synthesis covers 1 or 2 qubits, got {n}; use the Trotter path"
        ))),
    }
}
