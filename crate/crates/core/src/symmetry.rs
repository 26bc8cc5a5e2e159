//! Reflection (Givens) basis change that block-diagonalizes
//! reflection-symmetric grid Hamiltonians, and the Ising-model
//! parameterization of the resulting blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::NuclearHamiltonian;
use crate::linalg::{bit, max_abs, symmetry_defect, CMat, RMat, C64, I, ONE};

/// Off-block magnitude above which the two-block evolution is flagged as
/// approximate.
pub const OFF_BLOCK_WARNING: f64 = 1e-6;

/// Orthogonal map pairing grid point `i` with its mirror `n − i`.
///
/// Rows `i < 2^N / 2` are `(e_i + e_{n−i})/√2` (even combinations, the
/// upper block); the remaining rows are `(e_i − e_{n−i})/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GivensReflector {
    matrix: RMat,
    pairing: Vec<usize>,
}

impl GivensReflector {
    pub fn matrix(&self) -> &RMat {
        &self.matrix
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn dim(&self) -> usize {
        self.pairing.len()
    }

    pub fn half(&self) -> usize {
        self.pairing.len() / 2
    }
}

pub fn build_reflector(n_points: usize) -> Result<GivensReflector> {
    if n_points < 2 || !n_points.is_power_of_two() {
        return Err(Error::invalid(format!(
            "reflector size must be a power of two >= 2, got {n_points}"
        )));
    }
    let n = n_points - 1;
    let half = n_points / 2;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = RMat::zeros(n_points, n_points);
    for i in 0..n_points {
        g[(i, i)] += r;
        g[(i, n - i)] += if i < half { r } else { -r };
    }
    Ok(GivensReflector {
        matrix: g,
        pairing: (0..n_points).map(|i| n - i).collect(),
    })
}

/// `G H Gᵀ` split into its two diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonalHamiltonian {
    pub upper: RMat,
    pub lower: RMat,
    /// Largest magnitude in the off-diagonal blocks, Hartree.
    pub off_block_residual: f64,
    /// Agreement between the closed-form block entries and the similarity
    /// transform, Hartree.
    pub formula_residual: f64,
    full: RMat,
}

impl BlockDiagonalHamiltonian {
    /// Assembles a block-diagonal Hamiltonian from two symmetric blocks of
    /// equal size.
    pub fn from_blocks(upper: RMat, lower: RMat) -> Result<Self> {
        let h = upper.nrows();
        check_dim(h, upper.ncols(), "upper block must be square")?;
        check_dim(h, lower.nrows(), "lower block size")?;
        check_dim(h, lower.ncols(), "lower block must be square")?;
        if symmetry_defect(&upper) > 1e-12 || symmetry_defect(&lower) > 1e-12 {
            return Err(Error::invalid("blocks must be symmetric"));
        }
        let mut full = RMat::zeros(2 * h, 2 * h);
        full.view_mut((0, 0), (h, h)).copy_from(&upper);
        full.view_mut((h, h), (h, h)).copy_from(&lower);
        Ok(Self {
            upper,
            lower,
            off_block_residual: 0.0,
            formula_residual: 0.0,
            full,
        })
    }

    pub fn half(&self) -> usize {
        self.upper.nrows()
    }

    /// The full transformed matrix including any off-block residue.
    pub fn full(&self) -> &RMat {
        &self.full
    }

    pub fn needs_warning(&self) -> bool {
        self.off_block_residual > OFF_BLOCK_WARNING
    }

    /// Eigenvalues of both blocks, merged and sorted ascending.
    pub fn block_eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = crate::linalg::sym_eigen_sorted(&self.upper)
            .0
            .iter()
            .chain(crate::linalg::sym_eigen_sorted(&self.lower).0.iter())
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }
}

/// Closed-form entries of the transformed Hamiltonian.
///
/// Requires a Toeplitz off-diagonal part `T(d) = H[0][d]` and arbitrary
/// diagonal `D_i`:
/// * diagonal blocks: `½(D_i + D_{n−i}) δ_il + T(|i−l|)(1 − δ_il) ± T(|i+l−n|)`
///   with `+` in the even (upper) block and `−` in the odd block;
/// * off-diagonal blocks: `½(D_{n−i} − D_i) δ_{i,n−l}` (row in the upper block).
pub fn closed_form_transform(h: &NuclearHamiltonian) -> RMat {
    let m = h.matrix();
    let dim = h.dim();
    let n = dim - 1;
    let half = dim / 2;
    let t = |d: usize| m[(0, d)];
    let diag = |i: usize| m[(i, i)];
    RMat::from_fn(dim, dim, |i, l| {
        let upper_i = i < half;
        let upper_l = l < half;
        match (upper_i, upper_l) {
            (true, true) | (false, false) => {
                let sign = if upper_i { 1.0 } else { -1.0 };
                let mirror = t((i + l).abs_diff(n));
                if i == l {
                    0.5 * (diag(i) + diag(n - i)) + sign * mirror
                } else {
                    t(i.abs_diff(l)) + sign * mirror
                }
            }
            (true, false) => {
                if i == n - l {
                    0.5 * (diag(n - i) - diag(i))
                } else {
                    0.0
                }
            }
            (false, true) => {
                if l == n - i {
                    0.5 * (diag(n - l) - diag(l))
                } else {
                    0.0
                }
            }
        }
    })
}

/// Agreement threshold between the closed form and `G H Gᵀ`.
const FORMULA_TOLERANCE: f64 = 1e-10;

pub fn transform(h: &NuclearHamiltonian) -> Result<BlockDiagonalHamiltonian> {
    let g = build_reflector(h.dim())?;
    let full = g.matrix() * h.matrix() * g.matrix().transpose();
    let closed = closed_form_transform(h);
    let formula_residual = max_abs(&(&closed - &full));
    if formula_residual > FORMULA_TOLERANCE {
        return Err(Error::numeric(format!(
            "closed-form block entries disagree with G H Gᵀ by {formula_residual:e} Ha"
        )));
    }
    let half = g.half();
    // Symmetrize away round-off so the blocks satisfy the symmetric contract exactly.
    let sym = |m: RMat| (&m + m.transpose()) * 0.5;
    let upper = sym(full.view((0, 0), (half, half)).into_owned());
    let lower = sym(full.view((half, half), (half, half)).into_owned());
    let off = full.view((0, half), (half, half)).into_owned();
    Ok(BlockDiagonalHamiltonian {
        upper,
        lower,
        off_block_residual: max_abs(&off),
        formula_residual,
        full,
    })
}

/// Basis permutation grouping computational states by popcount parity:
/// even-parity states (ascending) first, then odd-parity states.
///
/// `perm[k]` is the computational index placed at position `k`.
pub fn parity_permutation(n_qubits: usize) -> Vec<usize> {
    let dim = 1usize << n_qubits;
    let even = (0..dim).filter(|s| s.count_ones() % 2 == 0);
    let odd = (0..dim).filter(|s| s.count_ones() % 2 == 1);
    even.chain(odd).collect()
}

/// Couplings and local fields of the Ising Hamiltonian
/// `Σ_γ Σ_{i<j} J^γ_ij σ^γ_i σ^γ_j + Σ_γ Σ_i B^γ_i σ^γ_i` (Hartree).
///
/// Coupling matrices are symmetric with zero diagonal; only `i < j` is read.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingParameters {
    pub n_qubits: usize,
    pub jx: RMat,
    pub jy: RMat,
    pub jz: RMat,
    pub bx: Vec<f64>,
    pub by: Vec<f64>,
    pub bz: Vec<f64>,
}

impl IsingParameters {
    pub fn zeros(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            jx: RMat::zeros(n_qubits, n_qubits),
            jy: RMat::zeros(n_qubits, n_qubits),
            jz: RMat::zeros(n_qubits, n_qubits),
            bx: vec![0.0; n_qubits],
            by: vec![0.0; n_qubits],
            bz: vec![0.0; n_qubits],
        }
    }

    /// Sets `J^γ_ij = J^γ_ji = value`.
    pub fn set_coupling(&mut self, axis: Axis, i: usize, j: usize, value: f64) {
        let m = match axis {
            Axis::X => &mut self.jx,
            Axis::Y => &mut self.jy,
            Axis::Z => &mut self.jz,
        };
        m[(i, j)] = value;
        m[(j, i)] = value;
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        for m in [&self.jx, &self.jy, &self.jz] {
            check_dim(n, m.nrows(), "coupling matrix rows")?;
            check_dim(n, m.ncols(), "coupling matrix columns")?;
            if symmetry_defect(m) > 0.0 {
                return Err(Error::invalid("coupling matrices must be symmetric"));
            }
            if (0..n).any(|i| m[(i, i)] != 0.0) {
                return Err(Error::invalid("coupling matrices must have zero diagonal"));
            }
        }
        for b in [&self.bx, &self.by, &self.bz] {
            check_dim(n, b.len(), "local field length")?;
        }
        Ok(())
    }

    /// True when no transverse field is present.
    pub fn is_longitudinal(&self) -> bool {
        self.bx.iter().chain(&self.by).all(|&b| b == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Independent controls with `B^x = B^y = 0`: `N(N+1)/2` diagonal handles
/// (`B^z_i`, `J^z_ij`) plus `N(N−1)` in-block couplings (`J^x_ij ± J^y_ij`).
pub fn handle_count(n_qubits: usize) -> usize {
    n_qubits * (n_qubits + 1) / 2 + n_qubits * n_qubits.saturating_sub(1)
}

/// Ising Hamiltonian in the computational basis, assembled from the
/// bit-flip structure: `J^x ± J^y` couples states differing on two sites
/// (`−` when the flipped bits agree, `+` when they differ), `B^x ∓ iB^y`
/// couples single flips, and `B^z`, `J^z` fill the diagonal.
pub fn ising_matrix_computational(params: &IsingParameters) -> CMat {
    let n = params.n_qubits;
    let dim = 1usize << n;
    let mut h = CMat::zeros(dim, dim);
    for s in 0..dim {
        let spin = |q: usize| if bit(s, q, n) == 0 { 1.0 } else { -1.0 };
        let mut diag = 0.0;
        for i in 0..n {
            diag += params.bz[i] * spin(i);
            for j in i + 1..n {
                diag += params.jz[(i, j)] * spin(i) * spin(j);
            }
        }
        h[(s, s)] += C64::new(diag, 0.0);
        for i in 0..n {
            let flipped = s ^ (1 << (n - 1 - i));
            // ⟨s⊕i| σ^x_i |s⟩ = 1, ⟨s⊕i| σ^y_i |s⟩ = ±i depending on the source bit.
            let y_phase = if bit(s, i, n) == 0 { I } else { -I };
            h[(flipped, s)] += ONE * params.bx[i] + y_phase * params.by[i];
            for j in i + 1..n {
                let t = flipped ^ (1 << (n - 1 - j));
                let same = bit(s, i, n) == bit(s, j, n);
                let yy = if same { -params.jy[(i, j)] } else { params.jy[(i, j)] };
                h[(t, s)] += C64::new(params.jx[(i, j)] + yy, 0.0);
            }
        }
    }
    h
}

/// Ising Hamiltonian in the parity-permuted basis (even block first).
pub fn ising_matrix(params: &IsingParameters) -> CMat {
    let h = ising_matrix_computational(params);
    let perm = parity_permutation(params.n_qubits);
    let dim = perm.len();
    CMat::from_fn(dim, dim, |a, b| h[(perm[a], perm[b])])
}

/// Result of fitting Ising handles to a block-diagonal target.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingFit {
    pub params: IsingParameters,
    /// `‖ising_matrix(params) − target‖_F`, Hartree.
    pub residual: f64,
    /// Set when the design matrix is rank-deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

/// Least-squares fit of `{B^z, J^z, J^x ± J^y}` (with `B^x = B^y = 0`) to
/// the permuted-basis entries of `target`.
///
/// The upper block is matched to the even-parity sector and the lower
/// block to the odd-parity sector. The fit is generally inexact; the
/// residual is the contract.
pub fn fit_ising_params(target: &BlockDiagonalHamiltonian) -> Result<IsingFit> {
    let dim = 2 * target.half();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::invalid(format!("target dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    // Column layout: bz (n) | jz (pairs) | jx+jy (pairs) | jx−jy (pairs)
    let n_cols = n + 3 * pairs.len();
    debug_assert_eq!(n_cols, handle_count(n));

    let perm = parity_permutation(n);
    let mut pos = vec![0usize; dim];
    for (k, &s) in perm.iter().enumerate() {
        pos[s] = k;
    }
    let mut target_full = RMat::zeros(dim, dim);
    let h = target.half();
    target_full.view_mut((0, 0), (h, h)).copy_from(&target.upper);
    target_full.view_mut((h, h), (h, h)).copy_from(&target.lower);

    let mut design = DMatrix::<f64>::zeros(dim * dim, n_cols);
    let row = |a: usize, b: usize| a * dim + b;
    for s in 0..dim {
        let spin = |q: usize| if bit(s, q, n) == 0 { 1.0 } else { -1.0 };
        let r = row(pos[s], pos[s]);
        for i in 0..n {
            design[(r, i)] += spin(i);
        }
        for (p, &(i, j)) in pairs.iter().enumerate() {
            design[(r, n + p)] += spin(i) * spin(j);
            let t = s ^ (1 << (n - 1 - i)) ^ (1 << (n - 1 - j));
            let col = if bit(s, i, n) == bit(s, j, n) {
                n + 2 * pairs.len() + p
            } else {
                n + pairs.len() + p
            };
            design[(row(pos[t], pos[s]), col)] += 1.0;
        }
    }
    let rhs = DVector::from_iterator(dim * dim, (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| target_full[(a, b)]));

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-12 * n_cols as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let solution = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::numeric(format!("Ising least squares failed: {e}")))?;

    let mut params = IsingParameters::zeros(n);
    for i in 0..n {
        params.bz[i] = solution[i];
    }
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let plus = solution[n + pairs.len() + p];
        let minus = solution[n + 2 * pairs.len() + p];
        params.set_coupling(Axis::Z, i, j, solution[n + p]);
        params.set_coupling(Axis::X, i, j, 0.5 * (plus + minus));
        params.set_coupling(Axis::Y, i, j, 0.5 * (plus - minus));
    }
    let fitted = ising_matrix(&params);
    let residual = fitted
        .iter()
        .zip(target_full.iter())
        .map(|(a, b)| (a - C64::new(*b, 0.0)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(IsingFit {
        params,
        residual,
        rank_deficient: rank < n_cols,
    })
}

/// Splits a permuted-basis Ising matrix into its even/odd blocks. Fails if
/// the cross blocks are non-zero or the diagonal blocks are not real.
pub fn ising_blocks(params: &IsingParameters) -> Result<BlockDiagonalHamiltonian> {
    let m = ising_matrix(params);
    let dim = m.nrows();
    let h = dim / 2;
    let cross = m.view((0, h), (h, h)).iter().fold(0.0_f64, |a, x| a.max(x.norm()));
    if cross > 0.0 {
        return Err(Error::invalid("transverse fields couple the parity sectors"));
    }
    if m.iter().any(|x| x.im != 0.0) {
        return Err(Error::invalid("Ising blocks are not real"));
    }
    let re = m.map(|x| x.re);
    BlockDiagonalHamiltonian::from_blocks(
        re.view((0, 0), (h, h)).into_owned(),
        re.view((h, h), (h, h)).into_owned(),
    )
}

/// Entry list CSV `i,j,value` of a real matrix (all entries, row-major).
pub fn write_entries_csv(m: &RMat, mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "i,j,value")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            writeln!(w, "{i},{j},{:.16e}", m[(i, j)])?;
        }
    }
    Ok(())
}

/// Parses an `i,j,value` entry list into a dense matrix sized by the
/// largest indices present.
pub fn read_entries_csv(r: impl std::io::Read) -> Result<RMat> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if header.iter().map(str::trim).ne(["i", "j", "value"]) {
        return Err(Error::parse(1, "expected header i,j,value"));
    }
    let mut entries = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != 3 {
            return Err(Error::parse(line, "expected three fields"));
        }
        let idx = |f: &str| f.trim().parse::<usize>().map_err(|e| Error::parse(line, format!("{f}: {e}")));
        let v = rec[2].trim().parse::<f64>().map_err(|e| Error::parse(line, e.to_string()))?;
        entries.push((idx(&rec[0])?, idx(&rec[1])?, v));
    }
    let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let cols = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    let mut m = RMat::zeros(rows, cols);
    for (i, j, v) in entries {
        m[(i, j)] = v;
    }
    Ok(m)
}

impl IsingParameters {
    /// CSV `term,i,j,value` for every nonzero handle: couplings `jx`, `jy`,
    /// `jz` with `i < j`, and fields `bx`, `by`, `bz` with `j = i`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "term,i,j,value")?;
        for (name, m) in [("jx", &self.jx), ("jy", &self.jy), ("jz", &self.jz)] {
            for i in 0..self.n_qubits {
                for j in i + 1..self.n_qubits {
                    if m[(i, j)] != 0.0 {
                        writeln!(w, "{name},{i},{j},{:.16e}", m[(i, j)])?;
                    }
                }
            }
        }
        for (name, b) in [("bx", &self.bx), ("by", &self.by), ("bz", &self.bz)] {
            for (i, v) in b.iter().enumerate() {
                if *v != 0.0 {
                    writeln!(w, "{name},{i},{i},{v:.16e}")?;
                }
            }
        }
        Ok(())
    }

    /// Parses the [`IsingParameters::write_csv`] layout. Handles absent
    /// from the file are zero.
    pub fn read_csv(r: impl std::io::Read, n_qubits: usize) -> Result<Self> {
        let mut p = Self::zeros(n_qubits);
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?;
        if header.iter().map(str::trim).ne(["term", "i", "j", "value"]) {
            return Err(Error::parse(1, "expected header term,i,j,value"));
        }
        for (k, rec) in reader.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            if rec.len() != 4 {
                return Err(Error::parse(line, "expected four fields"));
            }
            let idx = |f: &str| {
                f.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&q| q < n_qubits)
                    .ok_or_else(|| Error::parse(line, format!("qubit index `{f}` out of range")))
            };
            let (i, j) = (idx(&rec[1])?, idx(&rec[2])?);
            let v = rec[3].trim().parse::<f64>().map_err(|e| Error::parse(line, e.to_string()))?;
            let term = rec[0].trim();
            match term {
                "jx" | "jy" | "jz" if i < j => {
                    let axis = match term {
                        "jx" => Axis::X,
                        "jy" => Axis::Y,
                        _ => Axis::Z,
                    };
                    p.set_coupling(axis, i, j, v);
                }
                "bx" | "by" | "bz" if i == j => {
                    let b = match term {
                        "bx" => &mut p.bx,
                        "by" => &mut p.by,
                        _ => &mut p.bz,
                    };
                    b[i] = v;
                }
                _ => return Err(Error::parse(line, format!("bad term `{term}` at ({i}, {j})"))),
            }
        }
        p.validate()?;
        Ok(p)
    }
}
