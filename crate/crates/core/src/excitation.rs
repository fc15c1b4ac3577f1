//! Tilted-wavefront laser excitation of the emitter array and the
//! phase-matching resonances it produces with the electron.
//!
//! A pulse travelling through a medium of index `n` at angle `θ` reaches
//! emitter `i` with carrier phase `k0 n cos θ z_i`; the electron reaches it
//! with phase `ω0 z_i / v`. Both enter the emitter's raising amplitude with
//! the same sign as the coupling phase `exp(-i ω0 z_i / v)`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::coupling::{coupling_set, CouplingSet, ElectronParams, EmitterEnsemble};
use crate::eels::{effective_coupling, spectrum_from_joint, spectrum_from_ladder, EelsSpectrum, ElectronComb};
use crate::error::{Error, Result};
use crate::joint::{full_evolution, EmitterInput, MAX_FULL_N};
use crate::ladder::{product_to_ladder, LadderProjection, ProductState};
use crate::real::Real;
use crate::scattering::{exact_elements, ScatteringKernel};

/// Spacing uniformity (nm) required for Smith-Purcell resonances.
pub const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationPulse<T> {
    theta: T,
    area: T,
}

impl<T: Real> ExcitationPulse<T> {
    /// Pulse at angle `theta` (rad, in `[0, π/2]`) with rotation angle `area`.
    pub fn new(theta: T, area: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::FRAC_PI_2() + T::epsilon()) {
            return Err(Error::Domain(format!("pulse angle must lie in [0, π/2], got {theta}")));
        }
        if !area.is_finite() {
            return Err(Error::Domain("pulse area must be finite".into()));
        }
        Ok(Self { theta: theta.min(T::FRAC_PI_2()), area })
    }

    /// Pulse of duration `tau` (fs) at Rabi rate `rabi` (rad/fs).
    pub fn from_duration(theta: T, tau: T, rabi: T) -> Result<Self> {
        if !(tau >= T::zero()) {
            return Err(Error::Domain(format!("pulse duration must be nonnegative, got {tau}")));
        }
        if !(rabi > T::zero()) {
            return Err(Error::Domain(format!("Rabi rate must be positive, got {rabi}")));
        }
        Self::new(theta, tau * rabi)
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn area(&self) -> T {
        self.area
    }
}

/// Carrier phase imprinted on each emitter for carrier wavenumber `k` (rad/nm).
fn imprinted_phases<T: Real>(ens: &EmitterEnsemble<T>, theta: T, k: T) -> Vec<T> {
    let slope = -k * ens.refr_index() * theta.cos();
    ens.positions().iter().map(|&z| slope * z).collect()
}

/// Product state left behind by `pulse`.
pub fn excite<T: Real>(ens: &EmitterEnsemble<T>, pulse: &ExcitationPulse<T>) -> ProductState<T> {
    let azimuth = imprinted_phases(ens, pulse.theta, ens.wavenumber());
    ProductState::new(vec![pulse.area; ens.count()], azimuth).expect("ensemble is non-empty")
}

/// Cherenkov angle `arccos(1/(nβ))`, or `None` when `nβ < 1`.
pub fn cherenkov_angle<T: Real>(e: &ElectronParams<T>, n: T) -> Result<Option<T>> {
    if !(n >= T::one()) {
        return Err(Error::Domain(format!("refractive index must be >= 1, got {n}")));
    }
    let nb = n * e.beta();
    Ok((nb >= T::one()).then(|| (T::one() / nb).min(T::one()).acos()))
}

/// `|Σ_i exp(i ω0 z_i (n cos θ / c − 1/v))|²` for each angle (dipole in units of `d0²`).
pub fn dipole_map<T: Real>(ens: &EmitterEnsemble<T>, e: &ElectronParams<T>, thetas: &[T]) -> Result<Vec<T>> {
    if thetas.is_empty() {
        return Err(Error::Precondition("angle grid is empty".into()));
    }
    let k = ens.wavenumber();
    let inv_beta = T::one() / e.beta();
    Ok(thetas
        .iter()
        .map(|&th| {
            let slope = k * (ens.refr_index() * th.cos() - inv_beta);
            let sum: Complex<T> = ens.positions().iter().map(|&z| Complex::from_polar(T::one(), slope * z)).sum();
            sum.norm_sqr()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance<T> {
    /// Smith-Purcell order; 0 is the Cherenkov angle.
    pub order: i64,
    pub angle: T,
}

/// Angles in `[0, π/2]` with `cos θ = 1/(nβ) + q λ0/(n Δz)` for `q` in `orders`.
pub fn resonance_angles<T: Real>(
    ens: &EmitterEnsemble<T>,
    e: &ElectronParams<T>,
    orders: std::ops::RangeInclusive<i64>,
) -> Result<Vec<Resonance<T>>> {
    let dz = ens
        .uniform_spacing(T::lit(SPACING_TOL))
        .ok_or_else(|| Error::Precondition("resonance angles need equally spaced emitters (N >= 2)".into()))?;
    let n = ens.refr_index();
    let base = T::one() / (n * e.beta());
    let step = ens.lambda0() / (n * dz);
    let mut out: Vec<Resonance<T>> = orders
        .filter_map(|q| {
            let c = base + T::from_i64_lossy(q) * step;
            (c >= T::zero() && c <= T::one()).then(|| Resonance { order: q, angle: c.acos() })
        })
        .collect();
    out.sort_by(|a, b| a.angle.partial_cmp(&b.angle).expect("finite angles"));
    Ok(out)
}

/// Every resonance that can fall inside `[0, π/2]`.
pub fn all_resonances<T: Real>(ens: &EmitterEnsemble<T>, e: &ElectronParams<T>) -> Result<Vec<Resonance<T>>> {
    let dz = ens
        .uniform_spacing(T::lit(SPACING_TOL))
        .ok_or_else(|| Error::Precondition("resonance angles need equally spaced emitters (N >= 2)".into()))?;
    let span = (T::lit(2.0) * ens.refr_index() * dz / ens.lambda0()).ceil().to_i64().unwrap_or(0) + 1;
    resonance_angles(ens, e, -span..=span)
}

/// Sorted positions drawn uniformly in `[0, span)` nm.
pub fn randomized_positions<T: Real>(n: usize, span: T, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<T> = (0..n).map(|_| span * T::lit(rng.random::<f64>())).collect();
    z.sort_by(|a, b| a.partial_cmp(b).expect("finite positions"));
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pathway {
    /// Always evolve in the full `2^N` space.
    ExactFull,
    /// Use the ladder kernel when the excited state lies on the ladder.
    LadderFast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingChoice<T> {
    /// Couplings from geometry and dipoles.
    Geometry,
    /// Fixed magnitude with the electron transit phases.
    Uniform(T),
}

/// Carrier-frequency jitter averaging: detuning drawn from `N(0, 1/τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthJitter {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig<T> {
    pub thetas: Vec<T>,
    pub durations: Vec<T>,
    pub rabi: T,
    pub pathway: Pathway,
    pub coupling: CouplingChoice<T>,
    /// Experimental spectral-bandwidth model; `None` uses the pulse-area model only.
    pub jitter: Option<BandwidthJitter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub thetas: Vec<T>,
    pub durations: Vec<T>,
    pub areas: Vec<T>,
    /// `g_eff[i][j]` at `thetas[i]`, `durations[j]`.
    pub g_eff: Vec<Vec<T>>,
    /// `|⟨d(θ)⟩|²/d0²` per angle.
    pub dipole_sq: Vec<T>,
    pub cherenkov: Option<T>,
    pub resonances: Vec<Resonance<T>>,
}

impl<T: Real> SweepResult<T> {
    /// Index of the angle maximising `g_eff` at duration index `j` (first on ties).
    pub fn argmax_theta(&self, j: usize) -> usize {
        let mut best = 0;
        for i in 1..self.thetas.len() {
            if self.g_eff[i][j] > self.g_eff[best][j] {
                best = i;
            }
        }
        best
    }
}

fn check_grid<T: Real>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Precondition(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

struct SweepContext<'a, T: Real> {
    ens: &'a EmitterEnsemble<T>,
    coupl: CouplingSet<T>,
    kernel: Option<ScatteringKernel<T>>,
    pathway: Pathway,
}

impl<T: Real> SweepContext<'_, T> {
    fn spectrum(&self, state: &ProductState<T>) -> Result<EelsSpectrum<T>> {
        if let (Pathway::LadderFast, Some(kernel)) = (self.pathway, &self.kernel) {
            if let LadderProjection::Ladder(l) = product_to_ladder(state, &self.coupl.phases())? {
                return spectrum_from_ladder(kernel, &l);
            }
        }
        let joint = full_evolution(&self.coupl, EmitterInput::Product(state), &ElectronComb::delta())?;
        spectrum_from_joint(&joint)
    }
}

fn mix<T: Real>(spectra: &[EelsSpectrum<T>]) -> Result<EelsSpectrum<T>> {
    let lo = spectra.iter().map(|s| s.min_loss()).min().expect("non-empty");
    let hi = spectra.iter().map(|s| s.max_loss()).max().expect("non-empty");
    let w = T::one() / T::from_usize_lossy(spectra.len());
    let probs = (lo..=hi).map(|l| spectra.iter().map(|s| s.probability(l)).sum::<T>() * w).collect();
    EelsSpectrum::new(lo, probs)
}

/// Effective coupling over an (angle, duration) grid.
pub fn sweep<T: Real>(ens: &EmitterEnsemble<T>, e: &ElectronParams<T>, cfg: &SweepConfig<T>) -> Result<SweepResult<T>> {
    check_grid("angle", &cfg.thetas)?;
    check_grid("duration", &cfg.durations)?;
    if !(cfg.rabi > T::zero()) {
        return Err(Error::Domain(format!("Rabi rate must be positive, got {}", cfg.rabi)));
    }
    let n = ens.count();
    if cfg.pathway == Pathway::ExactFull && n > MAX_FULL_N {
        return Err(Error::Capacity { n, max: MAX_FULL_N });
    }
    let coupl = match cfg.coupling {
        CouplingChoice::Geometry => coupling_set(e, ens)?,
        CouplingChoice::Uniform(mag) => CouplingSet::uniform(mag, ens, e),
    };
    let kernel = if cfg.pathway == Pathway::LadderFast && coupl.uniform_magnitude() {
        Some(exact_elements(n, Complex::new(coupl.mean_magnitude(), T::zero()))?)
    } else {
        None
    };
    let ctx = SweepContext { ens, coupl, kernel, pathway: cfg.pathway };

    let nt = cfg.durations.len();
    let points: Vec<(usize, usize)> =
        (0..cfg.thetas.len()).flat_map(|i| (0..nt).map(move |j| (i, j))).collect();
    let values: Vec<T> = points
        .par_iter()
        .map(|&(i, j)| {
            let theta = cfg.thetas[i];
            let tau = cfg.durations[j];
            let pulse = ExcitationPulse::from_duration(theta, tau, cfg.rabi)?;
            let spectrum = match cfg.jitter {
                Some(jit) if tau > T::zero() && jit.samples > 0 => {
                    let mut rng = ChaCha8Rng::seed_from_u64(jit.seed);
                    rng.set_stream((i * nt + j) as u64);
                    let width = (T::one() / tau).as_f64();
                    let normal = Normal::new(0.0, width).expect("positive width");
                    let spectra = (0..jit.samples)
                        .map(|_| {
                            let omega = ctx.ens.omega0() + T::lit(normal.sample(&mut rng));
                            let k = omega / T::lit(crate::units::C_NM_PER_FS);
                            let azimuth = imprinted_phases(ctx.ens, theta, k);
                            let state = ProductState::new(vec![pulse.area(); n], azimuth)?;
                            ctx.spectrum(&state)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    mix(&spectra)?
                }
                _ => ctx.spectrum(&excite(ctx.ens, &pulse))?,
            };
            Ok(effective_coupling(&spectrum))
        })
        .collect::<Result<Vec<T>>>()?;

    let g_eff = values.chunks(nt).map(|c| c.to_vec()).collect();
    let resonances = all_resonances(ens, e).unwrap_or_default();
    Ok(SweepResult {
        thetas: cfg.thetas.clone(),
        durations: cfg.durations.clone(),
        areas: cfg.durations.iter().map(|&t| t * cfg.rabi).collect(),
        g_eff,
        dipole_sq: dipole_map(ens, e, &cfg.thetas)?,
        cherenkov: cherenkov_angle(e, ens.refr_index())?,
        resonances,
    })
}

/// Electron arrival relative to the ensemble's dephasing time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentTimings<T> {
    pub electron_delay_fs: T,
    pub t2_star_fs: T,
}

impl<T: Real> ExperimentTimings<T> {
    /// Warning text when the electron arrives after the emitters have dephased.
    pub fn check(&self) -> Option<String> {
        (self.electron_delay_fs > self.t2_star_fs).then(|| {
            format!(
                "electron delay {} fs exceeds T2* = {} fs; inter-emitter coherence is lost and the ladder picture does not apply",
                self.electron_delay_fs, self.t2_star_fs
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn setup() -> (EmitterEnsemble<f64>, ElectronParams<f64>) {
        // λ0/Δz = 0.45
        let ens = EmitterEnsemble::equally_spaced(6, 10.0, 4.5, 10.0, 0.1, 0.0, 1.5).unwrap();
        (ens, ElectronParams::new(0.7).unwrap())
    }

    #[test]
    fn cherenkov_values() {
        let e = ElectronParams::new(0.7f64).unwrap();
        let th = cherenkov_angle(&e, 1.5).unwrap().unwrap();
        assert!((th.to_degrees() - 17.752_790_161_946_683).abs() < 1e-10);
        let e = ElectronParams::new(0.5).unwrap();
        assert_eq!(cherenkov_angle(&e, 2.0).unwrap(), Some(0.0));
        assert_eq!(cherenkov_angle(&e, 1.2).unwrap(), None);
        assert!(cherenkov_angle(&e, 0.5).is_err());
    }

    #[test]
    fn excitation_at_cherenkov_is_on_ladder() {
        let (ens, e) = setup();
        let th = cherenkov_angle(&e, ens.refr_index()).unwrap().unwrap();
        let state = excite(&ens, &ExcitationPulse::new(th, FRAC_PI_2).unwrap());
        let coupl = CouplingSet::uniform(0.1, &ens, &e);
        assert!(matches!(product_to_ladder(&state, &coupl.phases()).unwrap(), LadderProjection::Ladder(_)));
        let off = excite(&ens, &ExcitationPulse::new(th + 0.3, FRAC_PI_2).unwrap());
        assert_eq!(product_to_ladder(&off, &coupl.phases()).unwrap(), LadderProjection::Mismatch);
    }

    #[test]
    fn excitation_edge_cases() {
        let (ens, _) = setup();
        let s = excite(&ens, &ExcitationPulse::new(0.4, 0.0).unwrap());
        assert!(s.polar().iter().all(|&t| t == 0.0));
        let s = excite(&ens, &ExcitationPulse::new(FRAC_PI_2, 1.0).unwrap());
        assert!(s.azimuth().iter().all(|&p| p.abs() < 1e-12));
        assert!(ExcitationPulse::new(-0.1, 1.0).is_err());
        assert!(ExcitationPulse::from_duration(0.1, 1.0, 0.0).is_err());
        assert!(ExcitationPulse::from_duration(0.1, -1.0, 1.0).is_err());
    }

    #[test]
    fn resonances_for_periodic_array() {
        let (ens, e) = setup();
        let r = resonance_angles(&ens, &e, -2..=0).unwrap();
        let deg: Vec<f64> = r.iter().map(|r| r.angle.to_degrees()).collect();
        assert!((deg[0] - 17.752_790_161_946_683).abs() < 1e-9);
        assert!((deg[1] - 49.278_643_052_209_68).abs() < 1e-9);
        assert!((deg[2] - 69.366_985_871_335_57).abs() < 1e-9);
        assert!(resonance_angles(&ens, &e, 1..=5).unwrap().is_empty());
        // no N dependence
        let big = EmitterEnsemble::equally_spaced(40, 10.0, 4.5, 10.0, 0.1, 0.0, 1.5).unwrap();
        assert_eq!(resonance_angles(&big, &e, -2..=0).unwrap(), r);
        let irregular = EmitterEnsemble::from_wavelength(4.5, vec![0.0, 10.0, 25.0], vec![10.0; 3], 0.1, 0.0, 1.5).unwrap();
        assert!(matches!(resonance_angles(&irregular, &e, -1..=0), Err(Error::Precondition(_))));
    }

    #[test]
    fn dipole_map_peaks() {
        let (ens, e) = setup();
        let r = resonance_angles(&ens, &e, -2..=0).unwrap();
        let thetas: Vec<f64> = r.iter().map(|r| r.angle).collect();
        for v in dipole_map(&ens, &e, &thetas).unwrap() {
            assert!((v - 36.0).abs() < 1e-9);
        }
        let single = EmitterEnsemble::from_wavelength(4.5, vec![3.0], vec![10.0], 0.1, 0.0, 1.5).unwrap();
        for v in dipole_map(&single, &e, &[0.0, 0.5, 1.2]).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(dipole_map(&ens, &e, &[]).is_err());
    }

    #[test]
    fn t2_star_warning() {
        assert!(ExperimentTimings { electron_delay_fs: 100.0, t2_star_fs: 1000.0 }.check().is_none());
        assert!(ExperimentTimings { electron_delay_fs: 2000.0, t2_star_fs: 1000.0 }.check().is_some());
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let (ens, e) = setup();
        let cfg = SweepConfig {
            thetas: vec![0.2, 0.1],
            durations: vec![1.0],
            rabi: 1.0,
            pathway: Pathway::LadderFast,
            coupling: CouplingChoice::Uniform(0.1),
            jitter: None,
        };
        assert!(sweep(&ens, &e, &cfg).is_err());
    }
}
