use crate::error::{Error, Result};
use crate::linalg::{propagator_from_eigen, sym_eigen_sorted, symmetry_defect, unitarity_defect, CMat, RMat};

/// A unitary small enough to synthesize directly (4×4 for the two-qubit
/// path, but any power-of-two size is accepted).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitUnitary {
    matrix: CMat,
    unitarity_defect: f64,
}

/// Largest `‖U†U − I‖_max` accepted for synthesis input.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

impl TwoQubitUnitary {
    pub fn new(matrix: CMat) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() || n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "unitary must be square with power-of-two size, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = unitarity_defect(&matrix);
        if defect.is_nan() || defect > UNITARITY_TOLERANCE {
            return Err(Error::invalid(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(Self {
            matrix,
            unitarity_defect: defect,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    pub fn n_qubits(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }
}

/// `exp(−i·block·t)` for a real symmetric block, via its eigendecomposition.
pub fn block_propagator(block: &RMat, t: f64) -> Result<TwoQubitUnitary> {
    if block.nrows() != block.ncols() {
        return Err(Error::invalid("block must be square"));
    }
    let defect = symmetry_defect(block);
    if defect.is_nan() || defect > 1e-12 {
        return Err(Error::invalid(format!("block is not symmetric (defect {defect:e})")));
    }
    let (vals, vecs) = sym_eigen_sorted(block);
    TwoQubitUnitary::new(propagator_from_eigen(&vals, &vecs, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::load_builtin_dmanh;
    use crate::linalg::{cis, max_abs_c, to_complex, C64};
    use crate::symmetry::transform;

    /// Scaling-and-squaring Taylor exponential, independent of any
    /// eigensolver.
    fn expm_taylor(a: &CMat) -> CMat {
        let norm = a.iter().map(|x| x.norm()).sum::<f64>();
        let s = norm.log2().ceil().max(0.0) as i32 + 4;
        let scaled = a / C64::new(2f64.powi(s), 0.0);
        let n = a.nrows();
        let mut term = CMat::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn zero_time_is_identity() {
        let b = RMat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -2.0]);
        let u = block_propagator(&b, 0.0).unwrap();
        assert!(max_abs_c(&(u.matrix() - CMat::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn diagonal_block_gives_phases() {
        let d = [0.5, -1.0, 2.0, 0.25];
        let b = RMat::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let u = block_propagator(&b, 1.7).unwrap();
        for (k, v) in d.iter().enumerate() {
            assert!((u.matrix()[(k, k)] - cis(-v * 1.7)).norm() < 1e-14);
        }
    }

    #[test]
    fn builtin_upper_block_matches_series_exponential() {
        let blocks = transform(&load_builtin_dmanh()).unwrap();
        let t = 10.0;
        let u = block_propagator(&blocks.upper, t).unwrap();
        let oracle = expm_taylor(&(to_complex(&blocks.upper) * C64::new(0.0, -t)));
        assert!(max_abs_c(&(u.matrix() - oracle)) < 1e-10);
        assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn rejects_non_symmetric() {
        let b = RMat::from_row_slice(2, 2, &[1.0, 0.3, 0.2, -2.0]);
        assert!(block_propagator(&b, 1.0).is_err());
        let bad = CMat::from_element(2, 2, C64::new(1.0, 0.0));
        assert!(TwoQubitUnitary::new(bad).is_err());
    }
}
