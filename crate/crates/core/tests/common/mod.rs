//! Test-side oracles shared by the integration suites. Nothing here calls
//! into the library's own exponentials or decompositions.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// R's diagonal divided out.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let z = CMat::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..n {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(k).iter_mut().for_each(|x| *x *= ph);
    }
    q
}

/// Matrix exponential `exp(A)` by scaling and squaring of a Taylor series.
pub fn expm_taylor(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a * C64::new(1.0 / 2f64.powi(s), 0.0);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(−iHt)` for a real symmetric matrix via Taylor scaling and squaring.
pub fn propagator_taylor(h: &RMat, t: f64) -> CMat {
    let a = h.map(|x| C64::new(0.0, -x * t));
    expm_taylor(&a)
}

/// `min_φ max_ij |a_ij − e^{iφ} b_ij|`, with φ from the overlap.
pub fn phase_free_distance(a: &CMat, b: &CMat) -> f64 {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    a.iter().zip(b.iter()).map(|(x, y)| (x - ph * y).norm()).fold(0.0, f64::max)
}

pub fn paulis() -> [CMat; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        CMat::from_row_slice(2, 2, &[l, o, o, l]),
        CMat::from_row_slice(2, 2, &[o, l, l, o]),
        CMat::from_row_slice(2, 2, &[o, -i, i, o]),
        CMat::from_row_slice(2, 2, &[l, o, o, -l]),
    ]
}

/// `op` acting on the listed qubits (qubit 0 most significant), identity
/// elsewhere, by explicit Kronecker products.
pub fn kron_chain(factors: &[CMat]) -> CMat {
    let mut out = CMat::from_element(1, 1, C64::new(1.0, 0.0));
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Naive tensor-product assembly of the Ising Hamiltonian in the
/// computational basis.
pub fn ising_kronecker(
    n: usize,
    jx: &RMat,
    jy: &RMat,
    jz: &RMat,
    bx: &[f64],
    by: &[f64],
    bz: &[f64],
) -> CMat {
    let p = paulis();
    let dim = 1 << n;
    let mut h = CMat::zeros(dim, dim);
    let single = |q: usize, m: &CMat| {
        let f: Vec<CMat> = (0..n).map(|k| if k == q { m.clone() } else { p[0].clone() }).collect();
        kron_chain(&f)
    };
    let pair = |a: usize, b: usize, m: &CMat| {
        let f: Vec<CMat> = (0..n)
            .map(|k| if k == a || k == b { m.clone() } else { p[0].clone() })
            .collect();
        kron_chain(&f)
    };
    for i in 0..n {
        for j in i + 1..n {
            h += pair(i, j, &p[1]) * C64::new(jx[(i, j)], 0.0);
            h += pair(i, j, &p[2]) * C64::new(jy[(i, j)], 0.0);
            h += pair(i, j, &p[3]) * C64::new(jz[(i, j)], 0.0);
        }
        h += single(i, &p[1]) * C64::new(bx[i], 0.0);
        h += single(i, &p[2]) * C64::new(by[i], 0.0);
        h += single(i, &p[3]) * C64::new(bz[i], 0.0);
    }
    h
}

/// Random symmetric coupling matrix with zero diagonal, entries in
/// `[−scale, scale]`.
pub fn random_couplings(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> RMat {
    let mut m = RMat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(-scale..scale);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn random_fields(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Probabilities `|ψ|²` of `exp(−iHt)ψ₀` by Taylor propagation.
pub fn dense_probabilities(h: &RMat, psi0: &DVector<C64>, t: f64) -> Vec<f64> {
    (propagator_taylor(h, t) * psi0).iter().map(|z| z.norm_sqr()).collect()
}

/// Power iteration for the largest-magnitude eigenvalue of a symmetric
/// matrix.
pub fn power_iteration(m: &RMat, iters: usize) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = m * &v;
        lambda = v.dot(&w) / v.dot(&v);
        v = &w / w.norm();
    }
    lambda
}

/// Full-register matrix of a local operator on `qubits` (qubit 0 most
/// significant), assembled entry by entry.
pub fn embed(local: &CMat, qubits: &[usize], n: usize) -> CMat {
    let dim = 1 << n;
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let sub = |idx: usize| qubits.iter().fold(0, |acc, &q| (acc << 1) | bit(idx, q));
    let rest = |idx: usize| {
        let mut r = idx;
        for &q in qubits {
            r &= !(1 << (n - 1 - q));
        }
        r
    };
    CMat::from_fn(dim, dim, |i, j| {
        if rest(i) == rest(j) {
            local[(sub(i), sub(j))]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn rz_ref(t: f64) -> CMat {
    let o = C64::new(0.0, 0.0);
    CMat::from_row_slice(2, 2, &[C64::from_polar(1.0, -t / 2.0), o, o, C64::from_polar(1.0, t / 2.0)])
}

pub fn ry_ref(t: f64) -> CMat {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    CMat::from_row_slice(2, 2, &[c, -s, s, c].map(|x| C64::new(x, 0.0)))
}

pub fn r_ref(t: f64, phi: f64) -> CMat {
    let p = paulis();
    let g = &p[1] * C64::new(phi.cos(), 0.0) + &p[2] * C64::new(phi.sin(), 0.0);
    expm_taylor(&(g * C64::new(0.0, -t / 2.0)))
}

pub fn cnot_ref() -> CMat {
    let mut m = CMat::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    m
}

pub fn ms_ref(t: f64) -> CMat {
    let p = paulis();
    expm_taylor(&(p[1].kronecker(&p[1]) * C64::new(0.0, -t / 2.0)))
}

/// Unitary of a gate program built from the reference gate matrices.
pub fn program_unitary(program: &nucdyn::compiler::GateProgram) -> CMat {
    use nucdyn::compiler::Gate;
    let n = program.n_qubits();
    let dim = 1 << n;
    let mut u = CMat::identity(dim, dim);
    for g in program.gates() {
        let step = match *g {
            Gate::Rz(q, t) => embed(&rz_ref(t), &[q], n),
            Gate::Ry(q, t) => embed(&ry_ref(t), &[q], n),
            Gate::R(q, t, p) => embed(&r_ref(t, p), &[q], n),
            Gate::Cnot(c, t) => embed(&cnot_ref(), &[c, t], n),
            Gate::Ms(a, b, t) => embed(&ms_ref(t), &[a, b], n),
            Gate::GlobalPhase(a) => CMat::identity(dim, dim) * C64::from_polar(1.0, a),
            Gate::PrepareAll | Gate::MeasureAll => continue,
        };
        u = step * u;
    }
    u
}

pub fn max_entry_distance(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
