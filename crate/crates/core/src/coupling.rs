//! Electron kinematics, emitter geometry and the electron–emitter coupling
//! constant.
//!
//! For emitter `i` at longitudinal position `z_i` and impact parameter `r_i`
//! the coupling is
//!
//! ```text
//! g_i = 2α (ω0/c) / β² · [ d⊥ K1(ξ_i) + d_z K0(ξ_i) / γ ] · exp(-i ω0 z_i / v),
//! ξ_i = ω0 r_i / (γ v)
//! ```
//!
//! with dipoles in e·nm, so that `e d/(2π ε0 ħ v²) · ω0` collapses to the
//! dimensionless prefactor above.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::special::bessel_k01;
use crate::units::{ALPHA, C_NM_PER_FS, HBAR_EV_FS};

/// Relative agreement of `|g_i|` required for a coupling set to count as uniform.
pub const UNIFORM_MAGNITUDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronParams<T> {
    beta: T,
    gamma: T,
}

impl<T: Real> ElectronParams<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta < T::one()) {
            return Err(Error::Domain(format!("electron speed beta must lie in (0, 1), got {beta}")));
        }
        let gamma = T::one() / ((T::one() - beta) * (T::one() + beta)).sqrt();
        Ok(Self { beta, gamma })
    }

    /// Speed as a fraction of c.
    pub fn beta(&self) -> T {
        self.beta
    }

    /// Lorentz factor.
    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Speed in nm/fs.
    pub fn velocity(&self) -> T {
        self.beta * T::lit(C_NM_PER_FS)
    }
}

/// N identical two-level emitters along the electron path.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterEnsemble<T> {
    omega0: T,
    d_perp: T,
    d_z: T,
    positions: Vec<T>,
    impact_params: Vec<T>,
    refr_index: T,
}

impl<T: Real> EmitterEnsemble<T> {
    /// `omega0` in rad/fs, positions and impact parameters in nm, dipoles in e·nm.
    pub fn new(
        omega0: T,
        positions: Vec<T>,
        impact_params: Vec<T>,
        d_perp: T,
        d_z: T,
        refr_index: T,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Domain("ensemble needs at least one emitter".into()));
        }
        if positions.len() != impact_params.len() {
            return Err(Error::DimensionMismatch { expected: positions.len(), found: impact_params.len() });
        }
        if !(omega0 > T::zero() && omega0.is_finite()) {
            return Err(Error::Domain(format!("transition frequency must be positive, got {omega0}")));
        }
        if let Some(r) = impact_params.iter().find(|r| !(**r > T::zero() && r.is_finite())) {
            return Err(Error::Domain(format!("impact parameters must be positive, got {r}")));
        }
        if positions.iter().any(|z| !z.is_finite()) {
            return Err(Error::Domain("emitter positions must be finite".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("emitter positions must be strictly increasing".into()));
        }
        if !(refr_index >= T::one()) {
            return Err(Error::Domain(format!("refractive index must be >= 1, got {refr_index}")));
        }
        if !(d_perp.is_finite() && d_z.is_finite()) {
            return Err(Error::Domain("dipole components must be finite".into()));
        }
        Ok(Self { omega0, d_perp, d_z, positions, impact_params, refr_index })
    }

    /// Builds an ensemble from the vacuum transition wavelength in nm.
    pub fn from_wavelength(
        lambda0: T,
        positions: Vec<T>,
        impact_params: Vec<T>,
        d_perp: T,
        d_z: T,
        refr_index: T,
    ) -> Result<Self> {
        if !(lambda0 > T::zero()) {
            return Err(Error::Domain(format!("wavelength must be positive, got {lambda0}")));
        }
        let omega0 = T::TAU() * T::lit(C_NM_PER_FS) / lambda0;
        Self::new(omega0, positions, impact_params, d_perp, d_z, refr_index)
    }

    /// `n` emitters at `z = 0, dz, 2 dz, ...`, all at impact parameter `r_perp`.
    pub fn equally_spaced(
        n: usize,
        dz: T,
        lambda0: T,
        r_perp: T,
        d_perp: T,
        d_z: T,
        refr_index: T,
    ) -> Result<Self> {
        let positions = (0..n).map(|i| T::from_usize_lossy(i) * dz).collect();
        Self::from_wavelength(lambda0, positions, vec![r_perp; n], d_perp, d_z, refr_index)
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// Transition angular frequency, rad/fs.
    pub fn omega0(&self) -> T {
        self.omega0
    }

    /// Vacuum wavenumber ω0/c, rad/nm.
    pub fn wavenumber(&self) -> T {
        self.omega0 / T::lit(C_NM_PER_FS)
    }

    pub fn lambda0(&self) -> T {
        T::TAU() * T::lit(C_NM_PER_FS) / self.omega0
    }

    pub fn hbar_omega0(&self) -> T {
        self.omega0 * T::lit(HBAR_EV_FS)
    }

    pub fn d_perp(&self) -> T {
        self.d_perp
    }

    pub fn d_z(&self) -> T {
        self.d_z
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn impact_params(&self) -> &[T] {
        &self.impact_params
    }

    pub fn refr_index(&self) -> T {
        self.refr_index
    }

    /// Common spacing if the positions form an arithmetic progression within `tol` nm.
    pub fn uniform_spacing(&self, tol: T) -> Option<T> {
        if self.count() < 2 {
            return None;
        }
        let dz = self.positions[1] - self.positions[0];
        let first = self.positions[0];
        let ok = self
            .positions
            .iter()
            .enumerate()
            .all(|(i, &z)| (z - first - T::from_usize_lossy(i) * dz).abs() <= tol);
        ok.then_some(dz)
    }

    /// Same ensemble with every position shifted by `dz`.
    pub fn translated(&self, dz: T) -> Self {
        let mut out = self.clone();
        out.positions.iter_mut().for_each(|z| *z += dz);
        out
    }

    /// Phase ω0 z_i / v the electron accumulates on its way to emitter `i`.
    pub fn transit_phases(&self, e: &ElectronParams<T>) -> Vec<T> {
        let k = self.omega0 / e.velocity();
        self.positions.iter().map(|&z| k * z).collect()
    }
}

/// Complex couplings of one electron to every emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet<T> {
    values: Vec<Complex<T>>,
    uniform_magnitude: bool,
}

impl<T: Real> CouplingSet<T> {
    pub fn from_values(values: Vec<Complex<T>>) -> Self {
        let uniform_magnitude = is_uniform(&values);
        Self { values, uniform_magnitude }
    }

    /// Couplings of fixed magnitude carrying the transit phases `exp(-i ω0 z_i / v)`.
    pub fn uniform(magnitude: T, ens: &EmitterEnsemble<T>, e: &ElectronParams<T>) -> Self {
        let values = ens
            .transit_phases(e)
            .into_iter()
            .map(|phi| Complex::from_polar(magnitude, -phi))
            .collect();
        Self { values, uniform_magnitude: true }
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn uniform_magnitude(&self) -> bool {
        self.uniform_magnitude
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.values.iter().map(|g| g.norm()).collect()
    }

    /// `arg g_i`, the phase each emitter's raising transition picks up.
    pub fn phases(&self) -> Vec<T> {
        self.values.iter().map(|g| g.arg()).collect()
    }

    /// Mean magnitude; equals `|g|` for uniform sets.
    pub fn mean_magnitude(&self) -> T {
        self.values.iter().map(|g| g.norm()).sum::<T>() / T::from_usize_lossy(self.values.len().max(1))
    }
}

fn is_uniform<T: Real>(values: &[Complex<T>]) -> bool {
    let Some(first) = values.first() else { return true };
    let reference = first.norm();
    let tol = T::lit(UNIFORM_MAGNITUDE_TOL) * reference.max(T::min_positive_value());
    values.iter().all(|g| (g.norm() - reference).abs() <= tol)
}

/// Argument `ω0 r / (γ v)` of the Bessel functions for impact parameter `r_perp`.
pub fn bessel_argument<T: Real>(e: &ElectronParams<T>, ens: &EmitterEnsemble<T>, r_perp: T) -> T {
    ens.omega0() * r_perp / (e.gamma() * e.velocity())
}

/// Coupling constant of the electron to emitter `emitter_index`.
pub fn coupling_constant<T: Real>(
    e: &ElectronParams<T>,
    ens: &EmitterEnsemble<T>,
    emitter_index: usize,
) -> Result<Complex<T>> {
    if emitter_index >= ens.count() {
        return Err(Error::Domain(format!(
            "emitter index {emitter_index} out of range for {} emitters",
            ens.count()
        )));
    }
    let r = ens.impact_params()[emitter_index];
    let z = ens.positions()[emitter_index];
    let xi = bessel_argument(e, ens, r);
    let (k0, k1) = bessel_k01(xi);
    let beta = e.beta();
    let prefactor = T::lit(2.0 * ALPHA) * ens.wavenumber() / (beta * beta);
    let magnitude = prefactor * (ens.d_perp() * k1 + ens.d_z() * k0 / e.gamma());
    let phase = -ens.omega0() * z / e.velocity();
    Ok(Complex::new(magnitude * phase.cos(), magnitude * phase.sin()))
}

pub fn coupling_set<T: Real>(e: &ElectronParams<T>, ens: &EmitterEnsemble<T>) -> Result<CouplingSet<T>> {
    let values = (0..ens.count())
        .map(|i| coupling_constant(e, ens, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingSet::from_values(values))
}
