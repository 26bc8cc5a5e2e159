//! Atomic-unit conversion constants (ħ = 1, energies in Hartree, lengths in
//! Bohr, masses in electron masses). CODATA values.

/// Wavenumbers per Hartree.
pub const CM1_PER_HARTREE: f64 = 219_474.631_363_2;

/// Femtoseconds per atomic unit of time.
pub const FS_PER_AU_TIME: f64 = 0.024_188_842_54;

/// Ångström per Bohr.
pub const ANGSTROM_PER_BOHR: f64 = 0.529_177_210_903;

/// Proton mass in electron masses.
pub const PROTON_MASS_AU: f64 = 1_836.152_673_43;

pub const MILLIHARTREE: f64 = 1.0e-3;

pub fn hartree_to_cm1(e: f64) -> f64 {
    e * CM1_PER_HARTREE
}

pub fn cm1_to_hartree(w: f64) -> f64 {
    w / CM1_PER_HARTREE
}

pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs / FS_PER_AU_TIME
}

pub fn au_to_fs(t_au: f64) -> f64 {
    t_au * FS_PER_AU_TIME
}

/// Wavenumber of an oscillation with frequency `f` in fs⁻¹, using the same
/// constants as the energy conversions so that `ΔE` maps exactly onto
/// `hartree_to_cm1(ΔE)`.
pub fn inverse_fs_to_cm1(f: f64) -> f64 {
    f * 2.0 * std::f64::consts::PI * FS_PER_AU_TIME * CM1_PER_HARTREE
}

/// Highest resolvable wavenumber for a sampling step in fs.
pub fn nyquist_cm1(dt_fs: f64) -> f64 {
    inverse_fs_to_cm1(0.5 / dt_fs)
}
