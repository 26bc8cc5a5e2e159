use crate::error::{Error, Result};
use crate::linalg::{cis, unitarity_defect, wrap_angle, CMat};

use super::program::{ry, rz};

/// `U = e^{iα} Rz(β) Ry(γ) Rz(δ)`, each angle in `[−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl EulerAngles {
    pub fn matrix(&self) -> CMat {
        rz(self.beta) * ry(self.gamma) * rz(self.delta) * cis(self.alpha)
    }
}

pub fn euler_zyz(u: &CMat) -> Result<EulerAngles> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(Error::invalid("Euler decomposition needs a 2x2 matrix"));
    }
    let defect = unitarity_defect(u);
    if defect.is_nan() || defect > 1e-10 {
        return Err(Error::invalid(format!("matrix is not unitary (defect {defect:e})")));
    }
    // In V = e^{−iα}U ∈ SU(2), V00 = e^{−i(β+δ)/2} cos(γ/2) and
    // V10 = e^{i(β−δ)/2} sin(γ/2); reading the half-angles directly avoids
    // a branch ambiguity.
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let v = u * cis(-det.arg() / 2.0);
    let (x, y) = (v[(0, 0)], v[(1, 0)]);
    let gamma = 2.0 * y.norm().atan2(x.norm());
    let half_sum = if x.norm() > 1e-300 { -x.arg() } else { 0.0 };
    let half_diff = if y.norm() > 1e-300 { y.arg() } else { 0.0 };
    let beta = wrap_angle(half_sum + half_diff);
    let delta = wrap_angle(half_sum - half_diff);
    let bare = rz(beta) * ry(gamma) * rz(delta);
    let overlap: num_complex::Complex64 = bare.iter().zip(u.iter()).map(|(b, x)| b.conj() * x).sum();
    Ok(EulerAngles {
        alpha: wrap_angle(overlap.arg()),
        beta,
        gamma: wrap_angle(gamma),
        delta,
    })
}
