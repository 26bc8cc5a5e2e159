//! Tensor-train (MPS/MPO) representations of multi-dimensional grid
//! wavefunctions and propagators.
//!
//! Every core is stored as a rank-3 (state) or rank-4 (operator) array with
//! explicit boundary bonds of size 1, so the two end cores are the order-2
//! and order-3 tensors of the usual picture with a trivial index attached.
//! Dense vectors use row-major order with dimension 0 most significant.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::{kinetic_matrix, DafKineticSpec, SpatialGrid};
use crate::linalg::{propagator_from_eigen, sym_eigen_sorted, CMat, CVec, RMat, C64, ONE, ZERO};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_CHI_MAX: usize = 64;

/// State core `A[l][s][r]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsCore {
    pub left: usize,
    pub site: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl MpsCore {
    fn zeros(left: usize, site: usize, right: usize) -> Self {
        Self {
            left,
            site,
            right,
            data: vec![ZERO; left * site * right],
        }
    }

    fn idx(&self, l: usize, s: usize, r: usize) -> usize {
        (l * self.site + s) * self.right + r
    }

    pub fn get(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[self.idx(l, s, r)]
    }

    /// `(l·s) × r` matricization.
    fn left_matrix(&self) -> CMat {
        CMat::from_row_slice(self.left * self.site, self.right, &self.data)
    }

    /// `l × (s·r)` matricization.
    fn right_matrix(&self) -> CMat {
        CMat::from_row_slice(self.left, self.site * self.right, &self.data)
    }

    fn from_row_major(left: usize, site: usize, right: usize, m: &CMat) -> Self {
        let mut data = Vec::with_capacity(left * site * right);
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter().copied());
        }
        Self { left, site, right, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    cores: Vec<MpsCore>,
}

impl MpsState {
    pub fn new(cores: Vec<MpsCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::invalid("an MPS needs at least one core"));
        }
        check_dim(1, cores[0].left, "left boundary bond")?;
        check_dim(1, cores[cores.len() - 1].right, "right boundary bond")?;
        for w in cores.windows(2) {
            check_dim(w[0].right, w[1].left, "adjacent MPS bonds")?;
        }
        for c in &cores {
            check_dim(c.left * c.site * c.right, c.data.len(), "MPS core data length")?;
        }
        Ok(Self { cores })
    }

    /// Product state from one vector per dimension.
    pub fn product(factors: &[CVec]) -> Result<Self> {
        Self::new(
            factors
                .iter()
                .map(|f| MpsCore {
                    left: 1,
                    site: f.len(),
                    right: 1,
                    data: f.iter().copied().collect(),
                })
                .collect(),
        )
    }

    pub fn cores(&self) -> &[MpsCore] {
        &self.cores
    }

    pub fn n_sites(&self) -> usize {
        self.cores.len()
    }

    pub fn site_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.site).collect()
    }

    /// Internal bond dimensions (length `N − 1`).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn parameter_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    pub fn to_dense(&self) -> CVec {
        let mut acc = CMat::from_element(1, 1, ONE);
        for c in &self.cores {
            // acc: (prefix) × l  →  (prefix·s) × r
            let prefix = acc.nrows();
            let m = c.right_matrix();
            let prod = &acc * m; // prefix × (s·r)
            let mut next = CMat::zeros(prefix * c.site, c.right);
            for p in 0..prefix {
                for s in 0..c.site {
                    for r in 0..c.right {
                        next[(p * c.site + s, r)] = prod[(p, s * c.right + r)];
                    }
                }
            }
            acc = next;
        }
        CVec::from_column_slice(acc.as_slice())
    }

    pub fn norm(&self) -> f64 {
        self.to_dense().norm()
    }

    /// Probability marginal of one dimension.
    pub fn marginal(&self, site: usize) -> Result<Vec<f64>> {
        marginal(&self.to_dense(), &self.site_dims(), site)
    }

    /// Text serialization: `mps <n>` then, per core, a shape line
    /// `core <l> <s> <r>` and a line of row-major `re im` pairs with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("mps {}\n", self.cores.len());
        for c in &self.cores {
            let _ = writeln!(out, "core {} {} {}", c.left, c.site, c.right);
            out.push_str(&values_line(&c.data));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = TextLines::new(text);
        let n = lines.header("mps")?;
        let mut cores = Vec::with_capacity(n);
        for _ in 0..n {
            let shape = lines.shape("core", 3)?;
            let data = lines.values(shape.iter().product())?;
            cores.push(MpsCore {
                left: shape[0],
                site: shape[1],
                right: shape[2],
                data,
            });
        }
        Self::new(cores)
    }
}

/// Marginal probabilities `Σ_{other dims} |ψ|²` of dimension `site`.
pub fn marginal(psi: &CVec, dims: &[usize], site: usize) -> Result<Vec<f64>> {
    if site >= dims.len() {
        return Err(Error::invalid(format!("dimension {site} out of range")));
    }
    check_dim(dims.iter().product(), psi.len(), "dense state vs site dims")?;
    let inner: usize = dims[site + 1..].iter().product();
    let d = dims[site];
    let mut out = vec![0.0; d];
    for (k, a) in psi.iter().enumerate() {
        out[(k / inner) % d] += a.norm_sqr();
    }
    Ok(out)
}

/// Operator core `W[l][o][i][r]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MpoCore {
    pub left: usize,
    pub out: usize,
    pub inp: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl MpoCore {
    fn idx(&self, l: usize, o: usize, i: usize, r: usize) -> usize {
        ((l * self.out + o) * self.inp + i) * self.right + r
    }

    pub fn get(&self, l: usize, o: usize, i: usize, r: usize) -> C64 {
        self.data[self.idx(l, o, i, r)]
    }

    /// Core holding local operator matrices at the given `(left, right)`
    /// bond positions, zero elsewhere.
    fn block(left: usize, right: usize, entries: &[(usize, usize, &CMat)]) -> Self {
        let d = entries[0].2.nrows();
        let mut c = MpoCore {
            left,
            out: d,
            inp: d,
            right,
            data: vec![ZERO; left * d * d * right],
        };
        for &(l, r, m) in entries {
            for o in 0..d {
                for i in 0..d {
                    let k = c.idx(l, o, i, r);
                    c.data[k] = m[(o, i)];
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpoOperator {
    cores: Vec<MpoCore>,
}

impl MpoOperator {
    pub fn new(cores: Vec<MpoCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::invalid("an MPO needs at least one core"));
        }
        check_dim(1, cores[0].left, "left boundary bond")?;
        check_dim(1, cores[cores.len() - 1].right, "right boundary bond")?;
        for w in cores.windows(2) {
            check_dim(w[0].right, w[1].left, "adjacent MPO bonds")?;
        }
        for c in &cores {
            check_dim(c.left * c.out * c.inp * c.right, c.data.len(), "MPO core data length")?;
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[MpoCore] {
        &self.cores
    }

    pub fn n_sites(&self) -> usize {
        self.cores.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.right).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    pub fn to_dense(&self) -> CMat {
        // Contract into a (out-prefix, in-prefix) matrix per bond index.
        let mut acc: Vec<CMat> = vec![CMat::from_element(1, 1, ONE)];
        for c in &self.cores {
            let (po, pi) = (acc[0].nrows(), acc[0].ncols());
            let mut next = vec![CMat::zeros(po * c.out, pi * c.inp); c.right];
            for (l, a) in acc.iter().enumerate() {
                for o in 0..c.out {
                    for i in 0..c.inp {
                        for (r, n) in next.iter_mut().enumerate() {
                            let w = c.get(l, o, i, r);
                            if w == ZERO {
                                continue;
                            }
                            for x in 0..po {
                                for y in 0..pi {
                                    n[(x * c.out + o, y * c.inp + i)] += a[(x, y)] * w;
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
        }
        acc.swap_remove(0)
    }

    /// Same layout as [`MpsState::to_text`] with `mpo <n>` and
    /// `core <l> <o> <i> <r>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("mpo {}\n", self.cores.len());
        for c in &self.cores {
            let _ = writeln!(out, "core {} {} {} {}", c.left, c.out, c.inp, c.right);
            out.push_str(&values_line(&c.data));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = TextLines::new(text);
        let n = lines.header("mpo")?;
        let mut cores = Vec::with_capacity(n);
        for _ in 0..n {
            let shape = lines.shape("core", 4)?;
            let data = lines.values(shape.iter().product())?;
            cores.push(MpoCore {
                left: shape[0],
                out: shape[1],
                inp: shape[2],
                right: shape[3],
                data,
            });
        }
        Self::new(cores)
    }
}

fn values_line(data: &[C64]) -> String {
    let mut s = String::new();
    for (k, z) in data.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.16e} {:.16e}", z.re, z.im);
    }
    s.push('\n');
    s
}

struct TextLines<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> TextLines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(0, "unexpected end of input"))
    }

    fn header(&mut self, tag: &str) -> Result<usize> {
        let (no, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(Error::parse(no, format!("expected `{tag} <n>`")));
        }
        parts
            .next()
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::parse(no, "missing core count"))
    }

    fn shape(&mut self, tag: &str, rank: usize) -> Result<Vec<usize>> {
        let (no, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(Error::parse(no, format!("expected `{tag}` shape line")));
        }
        let shape: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| Error::parse(no, format!("bad dimension {p}"))))
            .collect::<Result<_>>()?;
        if shape.len() != rank {
            return Err(Error::parse(no, format!("expected {rank} dimensions")));
        }
        Ok(shape)
    }

    fn values(&mut self, count: usize) -> Result<Vec<C64>> {
        let (no, line) = self.next()?;
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|p| p.parse().map_err(|_| Error::parse(no, format!("bad value {p}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 2 * count {
            return Err(Error::parse(no, format!("expected {} numbers, found {}", 2 * count, nums.len())));
        }
        Ok(nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompressionReport {
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
    pub max_bond_before: usize,
    pub max_bond_after: usize,
}

/// Number of singular values kept: drop those with `σ²/Σσ² < tol`, cap at
/// `chi_max`, keep at least one.
fn truncation_rank(sv: &[f64], tol: f64, chi_max: usize) -> usize {
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 1;
    }
    let keep = sv.iter().take_while(|&&s| s * s / total >= tol).count();
    keep.clamp(1, chi_max)
}

fn check_chi(chi_max: usize) -> Result<()> {
    if chi_max < 1 {
        return Err(Error::invalid("chi_max must be at least 1"));
    }
    Ok(())
}

/// Truncated SVD `m ≈ U S Vᴴ`; returns `(U, S·Vᴴ, discarded weight)`.
fn split(m: CMat, tol: f64, chi_max: usize) -> (CMat, CMat, f64) {
    let svd = m.svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let k = truncation_rank(&sv, tol, chi_max).min(sv.len());
    let discarded: f64 = sv[k..].iter().map(|s| s * s).sum();
    let u = svd.u.expect("u requested").columns(0, k).into_owned();
    let vt = svd.v_t.expect("v_t requested").rows(0, k).into_owned();
    let mut sv_t = vt;
    for (r, s) in sv.iter().take(k).enumerate() {
        sv_t.row_mut(r).iter_mut().for_each(|z| *z *= C64::new(*s, 0.0));
    }
    (u, sv_t, discarded)
}

/// TT-SVD of a dense tensor given as a row-major vector.
pub fn mps_from_dense(tensor: &CVec, dims: &[usize], tol: f64, chi_max: usize) -> Result<(MpsState, CompressionReport)> {
    check_chi(chi_max)?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::invalid("site dimensions must be positive"));
    }
    check_dim(dims.iter().product(), tensor.len(), "dense tensor vs site dims")?;
    let mut cores = Vec::with_capacity(dims.len());
    let mut discarded = 0.0;
    let mut rest = CMat::from_row_slice(1, tensor.len(), tensor.as_slice());
    let mut left = 1;
    for &d in &dims[..dims.len() - 1] {
        let cols = rest.len() / (left * d);
        let m = CMat::from_row_slice(left * d, cols, &row_major(&rest));
        let (u, svt, w) = split(m, tol, chi_max);
        discarded += w;
        let k = u.ncols();
        cores.push(MpsCore::from_row_major(left, d, k, &u));
        rest = svt;
        left = k;
    }
    let last = *dims.last().expect("non-empty");
    cores.push(MpsCore {
        left,
        site: last,
        right: 1,
        data: row_major(&rest),
    });
    let state = MpsState::new(cores)?;
    let max_bond = state.max_bond();
    Ok((
        state,
        CompressionReport {
            discarded_weight: discarded,
            max_bond_before: max_bond,
            max_bond_after: max_bond,
        },
    ))
}

fn row_major(m: &CMat) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

/// TT-SVD of a dense operator with paired `(out, in)` site indices.
pub fn mpo_from_dense(op: &CMat, dims: &[usize], tol: f64, chi_max: usize) -> Result<(MpoOperator, CompressionReport)> {
    let total: usize = dims.iter().product();
    check_dim(total, op.nrows(), "operator rows vs site dims")?;
    check_dim(total, op.ncols(), "operator columns vs site dims")?;
    // Interleave indices: (o_1 i_1)(o_2 i_2)… as one row-major tensor.
    let n = dims.len();
    let paired: Vec<usize> = dims.iter().map(|d| d * d).collect();
    let mut tensor = CVec::zeros(total * total);
    let mut o_digits = vec![0; n];
    let mut i_digits = vec![0; n];
    for row in 0..total {
        digits(row, dims, &mut o_digits);
        for col in 0..total {
            digits(col, dims, &mut i_digits);
            let mut idx = 0;
            for k in 0..n {
                idx = idx * paired[k] + o_digits[k] * dims[k] + i_digits[k];
            }
            tensor[idx] = op[(row, col)];
        }
    }
    let (mps, report) = mps_from_dense(&tensor, &paired, tol, chi_max)?;
    let cores = mps
        .cores
        .into_iter()
        .zip(dims)
        .map(|(c, &d)| {
            // [l][(o,i)][r] is already [l][o][i][r] in row-major order.
            MpoCore {
                left: c.left,
                out: d,
                inp: d,
                right: c.right,
                data: c.data,
            }
        })
        .collect();
    Ok((MpoOperator::new(cores)?, report))
}

fn digits(mut k: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = k % d;
        k /= d;
    }
}

/// Bond-2 MPO for `Σ_j I ⊗ … ⊗ K_j ⊗ … ⊗ I` from per-dimension local
/// operators.
pub fn sum_of_local_mpo(locals: &[CMat]) -> Result<MpoOperator> {
    let n = locals.len();
    if n == 0 {
        return Err(Error::invalid("need at least one local term"));
    }
    if n == 1 {
        return MpoOperator::new(vec![MpoCore::block(1, 1, &[(0, 0, &locals[0])])]);
    }
    let mut cores = Vec::with_capacity(n);
    for (j, k) in locals.iter().enumerate() {
        let id = CMat::identity(k.nrows(), k.ncols());
        // Bond state 0: "term not yet placed", 1: "term placed".
        let core = if j == 0 {
            MpoCore::block(1, 2, &[(0, 0, &id), (0, 1, k)])
        } else if j == n - 1 {
            MpoCore::block(2, 1, &[(0, 0, k), (1, 0, &id)])
        } else {
            MpoCore::block(2, 2, &[(0, 0, &id), (0, 1, k), (1, 1, &id)])
        };
        cores.push(core);
    }
    MpoOperator::new(cores)
}

/// Separable kinetic-energy MPO over several grid dimensions.
pub fn kinetic_mpo(dims: &[(SpatialGrid, DafKineticSpec)]) -> Result<MpoOperator> {
    let locals: Vec<CMat> = dims
        .iter()
        .map(|(g, s)| kinetic_matrix(g, s).map(|x| C64::new(x, 0.0)))
        .collect();
    sum_of_local_mpo(&locals)
}

/// Per-core contraction of an MPO with an MPS. Bond dimensions multiply;
/// nothing is truncated.
pub fn apply_mpo(op: &MpoOperator, state: &MpsState) -> Result<MpsState> {
    check_dim(state.n_sites(), op.n_sites(), "MPO vs MPS site count")?;
    for (w, a) in op.cores.iter().zip(&state.cores) {
        check_dim(a.site, w.inp, "MPO input vs MPS site dimension")?;
    }
    let cores: Vec<MpsCore> = op
        .cores
        .par_iter()
        .zip(state.cores.par_iter())
        .map(|(w, a)| {
            let (left, right) = (a.left * w.left, a.right * w.right);
            let mut c = MpsCore::zeros(left, w.out, right);
            for al in 0..a.left {
                for bl in 0..w.left {
                    for o in 0..w.out {
                        for i in 0..w.inp {
                            for br in 0..w.right {
                                let wv = w.get(bl, o, i, br);
                                if wv == ZERO {
                                    continue;
                                }
                                for ar in 0..a.right {
                                    let k = c.idx(al * w.left + bl, o, ar * w.right + br);
                                    c.data[k] += wv * a.get(al, i, ar);
                                }
                            }
                        }
                    }
                }
            }
            c
        })
        .collect();
    MpsState::new(cores)
}

/// Left-canonical QR sweep followed by a right-to-left truncating SVD
/// sweep.
pub fn compress(state: &MpsState, tol: f64, chi_max: usize, renormalize: bool) -> Result<(MpsState, CompressionReport)> {
    check_chi(chi_max)?;
    let before = state.max_bond();
    let mut cores = state.cores.clone();
    let n = cores.len();
    for j in 0..n - 1 {
        let c = &cores[j];
        let qr = c.left_matrix().qr();
        let (q, r) = (qr.q(), qr.r());
        let k = q.ncols();
        let (l, s) = (c.left, c.site);
        cores[j] = MpsCore::from_row_major(l, s, k, &q);
        let next = &cores[j + 1];
        let merged = r * next.right_matrix();
        cores[j + 1] = MpsCore::from_row_major(k, next.site, next.right, &merged);
    }
    let mut discarded = 0.0;
    for j in (1..n).rev() {
        let c = &cores[j];
        // Split the right matricization as (U S)·Vᴴ and keep Vᴴ here.
        let m = c.right_matrix().adjoint();
        let (u, svt, w) = split(m, tol, chi_max);
        discarded += w;
        let k = u.ncols();
        cores[j] = MpsCore::from_row_major(k, c.site, c.right, &u.adjoint());
        let prev = &cores[j - 1];
        let merged = prev.left_matrix() * svt.adjoint();
        cores[j - 1] = MpsCore::from_row_major(prev.left, prev.site, k, &merged);
    }
    if renormalize {
        let norm = norm_of_left_core(&cores[0]);
        if norm > 0.0 {
            cores[0].data.iter_mut().for_each(|z| *z /= norm);
        }
    }
    let out = MpsState::new(cores)?;
    let after = out.max_bond();
    Ok((
        out,
        CompressionReport {
            discarded_weight: discarded,
            max_bond_before: before,
            max_bond_after: after,
        },
    ))
}

/// After the right-to-left sweep all other cores are right-orthonormal,
/// so the state norm is the Frobenius norm of core 0.
fn norm_of_left_core(c: &MpsCore) -> f64 {
    c.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States at `t = 0, Δt, …, t_final`.
    pub states: Vec<MpsState>,
    pub discarded: Vec<f64>,
    pub max_bond_pre_compression: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub chi_max: usize,
    pub tol: f64,
    /// Truncation tolerance for the substep propagator MPO.
    pub operator_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            chi_max: DEFAULT_CHI_MAX,
            tol: DEFAULT_TOL,
            operator_tol: 1e-20,
        }
    }
}

/// Repeated `apply_mpo(U_Δt)` + [`compress`] with `U_Δt` the TT-SVD of the
/// dense substep exponential of a real symmetric Hamiltonian.
pub fn propagate_nd(
    h_dense: &RMat,
    initial: &MpsState,
    t: f64,
    n_substeps: usize,
    options: PropagationOptions,
) -> Result<Trajectory> {
    check_chi(options.chi_max)?;
    if n_substeps == 0 {
        return Err(Error::invalid("n_substeps must be at least 1"));
    }
    let dims = initial.site_dims();
    let total: usize = dims.iter().product();
    check_dim(total, h_dense.nrows(), "Hamiltonian vs state dimension")?;
    if crate::linalg::symmetry_defect(h_dense) > 1e-12 {
        return Err(Error::invalid("Hamiltonian must be symmetric"));
    }
    let (values, vectors) = sym_eigen_sorted(h_dense);
    let u = propagator_from_eigen(&values, &vectors, t / n_substeps as f64);
    let (op, _) = mpo_from_dense(&u, &dims, options.operator_tol, usize::MAX)?;
    let guard = options.chi_max.saturating_mul(4);
    let mut states = vec![initial.clone()];
    let mut discarded = vec![0.0];
    let mut pre = vec![initial.max_bond()];
    let mut cur = initial.clone();
    for step in 0..n_substeps {
        let applied = apply_mpo(&op, &cur)?;
        let bond = applied.max_bond();
        if bond > guard {
            return Err(Error::numeric(format!(
                "bond dimension {bond} at substep {step} exceeds 4·chi_max = {guard}"
            )));
        }
        let (next, report) = compress(&applied, options.tol, options.chi_max, false)?;
        pre.push(bond);
        discarded.push(report.discarded_weight);
        states.push(next.clone());
        cur = next;
    }
    Ok(Trajectory {
        states,
        discarded,
        max_bond_pre_compression: pre,
    })
}

/// Two-dimensional test model: a double well (first coordinate, the
/// builtin 8-point proton Hamiltonian) bilinearly coupled to a DAF-discretized
/// harmonic mode on `n` points. Returns the site dimensions and the dense
/// Hamiltonian.
pub fn coupled_double_well_model(n_harmonic: usize, coupling_hartree: f64) -> Result<(Vec<usize>, RMat)> {
    let well = crate::hamiltonian::load_builtin_dmanh();
    let h1 = well.matrix().clone();
    let grid = SpatialGrid::new(n_harmonic, -1.0, 1.0)?;
    let spec = DafKineticSpec::for_grid(&grid, crate::units::PROTON_MASS_AU)?;
    let omega = 0.005;
    let mut h2 = kinetic_matrix(&grid, &spec);
    for (k, x) in grid.points().iter().enumerate() {
        h2[(k, k)] += 0.5 * crate::units::PROTON_MASS_AU * omega * omega * x * x;
    }
    let d1 = h1.nrows();
    let xi1: Vec<f64> = (0..d1).map(|i| (2.0 * i as f64 - (d1 - 1) as f64) / (d1 - 1) as f64).collect();
    let xi2 = grid.points();
    let id1 = RMat::identity(d1, d1);
    let id2 = RMat::identity(n_harmonic, n_harmonic);
    let mut h = h1.kronecker(&id2) + id1.kronecker(&h2);
    for i in 0..d1 {
        for k in 0..n_harmonic {
            h[(i * n_harmonic + k, i * n_harmonic + k)] += coupling_hartree * xi1[i] * xi2[k];
        }
    }
    Ok((vec![d1, n_harmonic], (&h + h.transpose()) * 0.5))
}

/// Dense `Σ_j I ⊗ … ⊗ K_j ⊗ … ⊗ I`.
pub fn dense_sum_of_locals(locals: &[CMat]) -> CMat {
    let dims: Vec<usize> = locals.iter().map(|m| m.nrows()).collect();
    let total: usize = dims.iter().product();
    let mut out = CMat::zeros(total, total);
    for (j, k) in locals.iter().enumerate() {
        let mut term = CMat::from_element(1, 1, ONE);
        for (i, &d) in dims.iter().enumerate() {
            let f = if i == j { k.clone() } else { CMat::identity(d, d) };
            term = term.kronecker(&f);
        }
        out += term;
    }
    out
}
