//! Small dense linear-algebra helpers shared by the pipeline stages.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}

pub fn symmetry_defect(m: &RMat) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// `‖U†U − I‖_max`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs_c(&(u.adjoint() * u - CMat::identity(n, n)))
}

/// Real symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen_sorted(m: &RMat) -> (DVector<f64>, RMat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = RMat::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn herm_eigen_sorted(m: &CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMat::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(exp(−i λ t)) Vᵀ` from a precomputed real eigendecomposition.
pub fn propagator_from_eigen(values: &DVector<f64>, vectors: &RMat, t: f64) -> CMat {
    let n = values.len();
    let v = to_complex(vectors);
    let mut scaled = v.clone();
    for k in 0..n {
        let phase = cis(-values[k] * t);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    scaled * v.transpose()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Max-abs distance between `a` and `b` after removing the global phase
/// that best aligns them in the Frobenius sense.
pub fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    max_abs_c(&(a - b * phase))
}

/// Wraps an angle into `[−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Single-qubit Pauli matrices in the order I, X, Y, Z.
pub fn paulis() -> [CMat; 4] {
    let i2 = CMat::identity(2, 2);
    let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [i2, x, y, z]
}

/// Embeds a single-qubit operator acting on `qubit` of an `n`-qubit
/// register. Qubit 0 is the most significant bit of the basis index.
pub fn embed_one(op: &CMat, qubit: usize, n: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    let id = CMat::identity(2, 2);
    for q in 0..n {
        out = if q == qubit { out.kronecker(op) } else { out.kronecker(&id) };
    }
    out
}

/// Bit of `qubit` in basis index `index` of an `n`-qubit register.
#[inline]
pub fn bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}
