//! Unit system: lengths in nm, times in fs, energies in eV, dipoles in e·nm,
//! velocities as fractions of c.

/// ħc in eV·nm.
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;
/// Speed of light in nm/fs.
pub const C_NM_PER_FS: f64 = 299.792_458;
/// Fine-structure constant.
pub const ALPHA: f64 = 1.0 / 137.035_999_084;
/// ħ in eV·fs.
pub const HBAR_EV_FS: f64 = HBAR_C_EV_NM / C_NM_PER_FS;

/// Photon energy (eV) for a vacuum wavelength (nm).
pub fn energy_from_wavelength(lambda_nm: f64) -> f64 {
    std::f64::consts::TAU * HBAR_C_EV_NM / lambda_nm
}

/// Vacuum wavelength (nm) for a photon energy (eV).
pub fn wavelength_from_energy(hbar_omega_ev: f64) -> f64 {
    std::f64::consts::TAU * HBAR_C_EV_NM / hbar_omega_ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_energy_round_trip() {
        let e = energy_from_wavelength(500.0);
        assert!((e - 2.479_683_9).abs() < 1e-6);
        assert!((wavelength_from_energy(e) - 500.0).abs() < 1e-10);
    }
}
