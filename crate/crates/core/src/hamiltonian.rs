//! Discretized one-dimensional nuclear Hamiltonians.
//!
//! The kinetic energy is represented by a distributed approximating
//! functional (DAF): a Gaussian envelope times a truncated series of even
//! Hermite polynomials, which depends only on the separation between grid
//! points and therefore yields a Toeplitz kinetic matrix. The potential is
//! diagonal in the grid basis.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{max_abs, sym_eigen_sorted, RMat};
use crate::units::{hartree_to_cm1, MILLIHARTREE};

/// Largest DAF truncation order accepted. Higher orders lose precision in
/// the alternating Hermite sum.
pub const MAX_DAF_ORDER: u32 = 200;

/// Uniform grid of `2^N` points on `[x_min, x_max]` (Bohr).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

impl SpatialGrid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid size must be a power of two >= 2, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::invalid(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            n_points,
            x_min,
            x_max,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of qubits needed to index the grid.
    pub fn n_qubits(&self) -> usize {
        self.n_points.trailing_zeros() as usize
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }
}

/// Parameters of the DAF kinetic kernel, in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DafKineticSpec {
    pub mass: f64,
    pub sigma: f64,
    pub m_daf: u32,
}

impl DafKineticSpec {
    pub fn new(mass: f64, sigma: f64, m_daf: u32) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be positive, got {mass}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !m_daf.is_multiple_of(2) {
            return Err(Error::invalid(format!("DAF order must be even, got {m_daf}")));
        }
        if m_daf > MAX_DAF_ORDER {
            return Err(Error::invalid(format!(
                "DAF order {m_daf} exceeds the supported maximum {MAX_DAF_ORDER}"
            )));
        }
        Ok(Self { mass, sigma, m_daf })
    }

    /// Default kernel for a grid: `sigma = 2 Δx`, `M_DAF = 20`.
    pub fn for_grid(grid: &SpatialGrid, mass: f64) -> Result<Self> {
        Self::new(mass, 2.0 * grid.spacing(), 20)
    }
}

/// Physicists' Hermite polynomial `H_k(z)` for even `k`.
pub fn hermite_even(k: u32, z: f64) -> Result<f64> {
    if !k.is_multiple_of(2) {
        return Err(Error::invalid(format!("Hermite order must be even, got {k}")));
    }
    Ok(hermite(k, z))
}

/// Upward three-term recurrence `H_{k+1} = 2z H_k − 2k H_{k−1}`.
fn hermite(k: u32, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * z);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = 2.0 * z * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// DAF kinetic kernel `K(|x − x′|)` in Hartree per Bohr.
///
/// This is the continuous kernel; grid matrix elements carry an extra
/// quadrature weight `Δx` (see [`build_hamiltonian`]).
pub fn daf_kernel(displacement: f64, spec: &DafKineticSpec) -> f64 {
    let s = spec.sigma;
    let z = displacement.abs() / (2.0_f64.sqrt() * s);
    let prefactor = -1.0 / (4.0 * spec.mass * s.powi(3) * (2.0 * PI).sqrt());
    let envelope = (-displacement * displacement / (2.0 * s * s)).exp();

    // Walk the Hermite recurrence once, picking up H_{2n+2} on the way.
    let top = spec.m_daf + 2;
    let (mut prev, mut cur) = (1.0, 2.0 * z);
    let mut sum = 0.0;
    let mut coeff = 1.0; // (−1/4)^n / n!
    let mut n = 0u32;
    for order in 1..top {
        let next = 2.0 * z * cur - 2.0 * order as f64 * prev;
        prev = cur;
        cur = next;
        let reached = order + 1;
        if reached % 2 == 0 && reached >= 2 {
            sum += coeff * cur;
            n += 1;
            coeff *= -0.25 / n as f64;
        }
    }
    prefactor * envelope * sum
}

/// Potential energy on the grid points (Hartree).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    values: Vec<f64>,
}

impl PotentialCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("potential value at index {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.points().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max |V(x_i) − V(x_{n−i})|`.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.values.len();
        (0..n)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// Reads `x_bohr,v_hartree` rows (header required, ascending uniform x,
    /// power-of-two count).
    pub fn read_csv<R: Read>(reader: R) -> Result<(SpatialGrid, Self)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "x_bohr" || &headers[1] != "v_hartree" {
            return Err(Error::parse(1, "expected header `x_bohr,v_hartree`"));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::parse(line, "expected two columns"));
            }
            let x: f64 = rec[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad x value `{}`", &rec[0])))?;
            let v: f64 = rec[1]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad potential value `{}`", &rec[1])))?;
            if let Some(&last) = xs.last() {
                if x <= last {
                    return Err(Error::parse(line, "x values must be strictly ascending"));
                }
            }
            xs.push(x);
            vs.push(v);
        }
        let grid = SpatialGrid::new(xs.len(), *xs.first().unwrap_or(&0.0), *xs.last().unwrap_or(&0.0))?;
        let h = grid.spacing();
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.point(i)).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::parse(i + 2, "grid points are not uniformly spaced"));
            }
        }
        Ok((grid, Self::new(vs)?))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<(SpatialGrid, Self)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

/// Dense real symmetric Hamiltonian on a `2^N`-point grid (Hartree).
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearHamiltonian {
    matrix: RMat,
    grid: Option<SpatialGrid>,
    donor_acceptor_angstrom: Option<f64>,
}

impl NuclearHamiltonian {
    /// Wraps a matrix after validating shape, finiteness and symmetry.
    pub fn from_matrix(matrix: RMat, grid: Option<SpatialGrid>) -> Result<Self> {
        let n = matrix.nrows();
        check_dim(n, matrix.ncols(), "Hamiltonian must be square")?;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "Hamiltonian dimension must be a power of two >= 2, got {n}"
            )));
        }
        if let Some(g) = &grid {
            check_dim(g.n_points(), n, "grid size vs Hamiltonian dimension")?;
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("Hamiltonian has non-finite entries"));
        }
        let defect = crate::linalg::symmetry_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::invalid(format!(
                "Hamiltonian is not symmetric (defect {defect:e} Ha)"
            )));
        }
        let h = Self {
            matrix,
            grid,
            donor_acceptor_angstrom: None,
        };
        let toeplitz = h.toeplitz_defect();
        if toeplitz > 1e-12 {
            return Err(Error::invalid(format!(
                "off-diagonal (kinetic) part is not Toeplitz (defect {toeplitz:e} Ha)"
            )));
        }
        Ok(h)
    }

    pub fn matrix(&self) -> &RMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// Grid metadata, absent for matrices loaded without grid coordinates.
    pub fn grid(&self) -> Option<&SpatialGrid> {
        self.grid.as_ref()
    }

    pub fn donor_acceptor_angstrom(&self) -> Option<f64> {
        self.donor_acceptor_angstrom
    }

    /// Diagonal entries (potential plus the constant kinetic self-term).
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// `max |H_ii − H_{n−i,n−i}|`.
    pub fn diagonal_asymmetry(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| (self.matrix[(i, i)] - self.matrix[(n - 1 - i, n - 1 - i)]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the off-diagonal part from Toeplitz form.
    pub fn toeplitz_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for l in 0..n {
                if i != l {
                    let d = i.abs_diff(l);
                    worst = worst.max((self.matrix[(i, l)] - self.matrix[(0, d)]).abs());
                }
            }
        }
        worst
    }

    /// Returns the Hamiltonian with grid indices reversed (`i → n−i`).
    pub fn reversed(&self) -> Self {
        let n = self.dim();
        let m = RMat::from_fn(n, n, |i, l| self.matrix[(n - 1 - i, n - 1 - l)]);
        Self {
            matrix: m,
            grid: self.grid,
            donor_acceptor_angstrom: self.donor_acceptor_angstrom,
        }
    }
}

/// Kinetic part `Δx · K(x_i − x_l)` of the grid Hamiltonian.
pub fn kinetic_matrix(grid: &SpatialGrid, spec: &DafKineticSpec) -> RMat {
    let n = grid.n_points();
    let h = grid.spacing();
    // One kernel evaluation per offset keeps every sub-diagonal exactly constant.
    let by_offset: Vec<f64> = (0..n).map(|d| h * daf_kernel(d as f64 * h, spec)).collect();
    RMat::from_fn(n, n, |i, l| by_offset[i.abs_diff(l)])
}

/// Builds `H[i][l] = Δx · K(x_i − x_l) + V(x_i) δ_il`.
pub fn build_hamiltonian(
    grid: &SpatialGrid,
    potential: &PotentialCurve,
    spec: &DafKineticSpec,
) -> Result<NuclearHamiltonian> {
    let n = grid.n_points();
    check_dim(n, potential.len(), "potential length vs grid size")?;
    let mut m = kinetic_matrix(grid, spec);
    for (i, v) in potential.values().iter().enumerate() {
        m[(i, i)] += v;
    }
    NuclearHamiltonian::from_matrix(m, Some(*grid))
}

/// Donor–acceptor (N–N) distance of the bundled DMANH⁺ potential.
pub const DMANH_NN_DISTANCE_ANGSTROM: f64 = 2.53;

/// The 8-point shared-proton Hamiltonian for DMANH⁺, in milliHartree, as
/// printed (row-major).
#[rustfmt::skip]
pub const DMANH_MILLIHARTREE: [[f64; 8]; 8] = [
    [37.72,   -7.478,   0.5691,  0.2715, -0.2739,  0.1491, -0.0584,  0.0168],
    [-7.478,   7.050,  -7.478,   0.5691,  0.2715, -0.2739,  0.1491, -0.0584],
    [0.5691,  -7.478,   0.00197, -7.478,  0.5691,  0.2715, -0.2739,  0.1491],
    [0.2715,   0.5691, -7.478,   0.0168, -7.478,   0.5691,  0.2715, -0.2739],
    [-0.2739,  0.2715,  0.5691, -7.478,   0.0190, -7.478,   0.5691,  0.2715],
    [0.1491,  -0.2739,  0.2715,  0.5691, -7.478,   0.0,    -7.478,   0.5691],
    [-0.0584,  0.1491, -0.2739,  0.2715,  0.5691, -7.478,   7.015,  -7.478],
    [0.0168,  -0.0584,  0.1491, -0.2739,  0.2715,  0.5691, -7.478,  37.60],
];

/// Block-diagonal form of [`DMANH_MILLIHARTREE`] as printed, in milliHartree.
#[rustfmt::skip]
pub const DMANH_TRANSFORMED_MILLIHARTREE: [[f64; 8]; 8] = [
    [37.68,  -7.537,   0.7182, -0.0024,  0.0,     0.0,     0.0,    0.0],
    [-7.5367, 7.182,  -7.752,   0.8407,  0.0,     0.0,     0.0,    0.0],
    [0.7182, -7.752,   0.2725, -6.909,   0.0,     0.0,     0.0,    0.0],
    [-0.0024, 0.8407, -6.909,  -7.460,   0.0,     0.0,     0.0,    0.0],
    [0.0,     0.0,     0.0,     0.0,     7.4960, -8.0473,  0.2976, 0.5454],
    [0.0,     0.0,     0.0,     0.0,    -8.0473, -0.2705, -7.204,  0.4200],
    [0.0,     0.0,     0.0,     0.0,     0.2976, -7.204,   6.884, -7.420],
    [0.0,     0.0,     0.0,     0.0,     0.5454,  0.4200, -7.420,  37.64],
];

/// The bundled DMANH⁺ Hamiltonian in Hartree, symmetrized as `(M + Mᵀ)/2`.
///
/// The grid coordinates behind the matrix are not published, so the
/// result carries no [`SpatialGrid`].
pub fn load_builtin_dmanh() -> NuclearHamiltonian {
    let m = RMat::from_fn(8, 8, |i, j| DMANH_MILLIHARTREE[i][j] * MILLIHARTREE);
    let sym = (&m + m.transpose()) * 0.5;
    let mut h = NuclearHamiltonian::from_matrix(sym, None).expect("bundled matrix is valid");
    h.donor_acceptor_angstrom = Some(DMANH_NN_DISTANCE_ANGSTROM);
    h
}

/// Full spectral decomposition of a nuclear Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Hartree, ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns; each column's largest-magnitude entry is positive.
    pub eigenvectors: RMat,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Energies relative to the lowest level, in cm⁻¹.
    pub fn relative_levels_cm1(&self) -> Vec<f64> {
        let e0 = self.eigenvalues[0];
        self.eigenvalues.iter().map(|e| hartree_to_cm1(e - e0)).collect()
    }

    /// All `E_j − E_i` (i < j) in cm⁻¹, ordered by `(i, j)`.
    pub fn splittings_cm1(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push((i, j, hartree_to_cm1(self.eigenvalues[j] - self.eigenvalues[i])));
            }
        }
        out
    }

    /// `‖V Λ Vᵀ − H‖_max`.
    pub fn reconstruction_error(&self, h: &RMat) -> f64 {
        let rebuilt = &self.eigenvectors
            * RMat::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose();
        max_abs(&(rebuilt - h))
    }

    /// `‖VᵀV − I‖_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        max_abs(&(self.eigenvectors.transpose() * &self.eigenvectors - RMat::identity(n, n)))
    }
}

pub fn exact_diagonalize(h: &NuclearHamiltonian) -> Result<EigenSolution> {
    if h.matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("Hamiltonian has non-finite entries"));
    }
    let (values, mut vectors) = sym_eigen_sorted(h.matrix());
    for mut col in vectors.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    Ok(EigenSolution {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}
