//! Electron energy-loss spectra over integer loss index `ℓ` (quanta of ħω0;
//! `ℓ > 0` the electron lost energy, `ℓ < 0` it gained).

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::JointState;
use crate::ladder::LadderState;
use crate::real::{KahanSum, Real};
use crate::scattering::ScatteringKernel;

/// Normalisation tolerance of a spectrum.
pub const SPECTRUM_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct EelsSpectrum<T> {
    min_loss: i64,
    probs: Vec<T>,
    /// Energy of one loss quantum in eV; 1 when only indices are meaningful.
    hbar_omega0: T,
}

impl<T: Real> EelsSpectrum<T> {
    /// Spectrum with `probs[i]` the probability of loss `min_loss + i`.
    pub fn new(min_loss: i64, probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidState("empty spectrum".into()));
        }
        if probs.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::InvalidState("spectrum has negative or NaN probabilities".into()));
        }
        let total = probs.iter().copied().collect::<KahanSum<T>>().value();
        if !((total - T::one()).abs() <= T::lit(SPECTRUM_NORM_TOL)) {
            return Err(Error::InvalidState(format!("spectrum not normalised: ΣP = {total}")));
        }
        Ok(Self { min_loss, probs, hbar_omega0: T::one() })
    }

    /// Point spectrum at a single loss.
    pub fn delta(loss: i64) -> Self {
        Self { min_loss: loss, probs: vec![T::one()], hbar_omega0: T::one() }
    }

    pub fn with_quantum(mut self, hbar_omega0: T) -> Self {
        self.hbar_omega0 = hbar_omega0;
        self
    }

    pub fn hbar_omega0(&self) -> T {
        self.hbar_omega0
    }

    pub fn min_loss(&self) -> i64 {
        self.min_loss
    }

    pub fn max_loss(&self) -> i64 {
        self.min_loss + self.probs.len() as i64 - 1
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probs
    }

    pub fn probability(&self, loss: i64) -> T {
        if loss < self.min_loss || loss > self.max_loss() {
            T::zero()
        } else {
            self.probs[(loss - self.min_loss) as usize]
        }
    }

    /// `(ℓ, P_ℓ)` pairs in increasing `ℓ`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        self.probs.iter().enumerate().map(|(i, p)| (self.min_loss + i as i64, *p))
    }

    pub fn mean_loss(&self) -> T {
        self.iter().map(|(l, p)| T::from_i64_lossy(l) * p).collect::<KahanSum<T>>().value()
    }

    /// Standard deviation in quanta.
    pub fn std_loss(&self) -> T {
        let mean = self.mean_loss();
        self.iter()
            .map(|(l, p)| {
                let d = T::from_i64_lossy(l) - mean;
                d * d * p
            })
            .collect::<KahanSum<T>>()
            .value()
            .max(T::zero())
            .sqrt()
    }

    /// Standard deviation in eV.
    pub fn sigma_ev(&self) -> T {
        self.std_loss() * self.hbar_omega0
    }

    /// `σ / (√2 ħω0)`.
    pub fn effective_coupling(&self) -> T {
        effective_coupling(self)
    }

    /// Same spectrum re-indexed onto `[lo, hi]`; fails if mass lies outside.
    pub fn on_range(&self, lo: i64, hi: i64) -> Result<Self> {
        if self.iter().any(|(l, p)| (l < lo || l > hi) && p > T::zero()) {
            return Err(Error::Domain(format!("spectrum has weight outside [{lo}, {hi}]")));
        }
        let probs = (lo..=hi).map(|l| self.probability(l)).collect();
        Ok(Self { min_loss: lo, probs, hbar_omega0: self.hbar_omega0 })
    }
}

/// Total-variation distance `½ Σ |P_ℓ − Q_ℓ|`.
pub fn total_variation<T: Real>(a: &EelsSpectrum<T>, b: &EelsSpectrum<T>) -> T {
    let lo = a.min_loss().min(b.min_loss());
    let hi = a.max_loss().max(b.max_loss());
    T::lit(0.5) * (lo..=hi).map(|l| (a.probability(l) - b.probability(l)).abs()).sum::<T>()
}

/// `g_eff = std(ℓ)/√2`, in sideband units.
pub fn effective_coupling<T: Real>(sp: &EelsSpectrum<T>) -> T {
    sp.std_loss() / T::SQRT_2()
}

/// Mixes ladder-eigenstate spectra with the state's populations.
pub fn spectrum_from_ladder<T: Real>(kernel: &ScatteringKernel<T>, st: &LadderState<T>) -> Result<EelsSpectrum<T>> {
    let n = kernel.n();
    if st.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: st.n() });
    }
    let weights = st.weights();
    let probs: Vec<T> = (-(n as i64)..=n as i64)
        .map(|l| {
            weights
                .iter()
                .enumerate()
                .map(|(m, w)| *w * kernel.loss_probability(l, m))
                .collect::<KahanSum<T>>()
                .value()
        })
        .collect();
    EelsSpectrum::new(-(n as i64), probs)
}

/// Electron marginal of a joint emitter–electron state.
pub fn spectrum_from_joint<T: Real>(j: &JointState<T>) -> Result<EelsSpectrum<T>> {
    let (lo, probs) = j.loss_marginal();
    EelsSpectrum::new(lo, probs)
}

/// Incoming electron prepared in a superposition of energy sidebands,
/// indexed by loss index (`ℓ = −k` for energy `E0 + kħω0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ElectronComb<T> {
    start: i64,
    amps: Vec<Complex<T>>,
}

impl<T: Real> ElectronComb<T> {
    pub fn new(start: i64, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("electron comb needs at least one sideband".into()));
        }
        let norm: T = amps.iter().map(|a| a.norm_sqr()).sum();
        if !((norm - T::one()).abs() <= T::lit(1e-12)) {
            return Err(Error::InvalidState(format!("electron comb not normalised: Σ|g_k|² = {norm}")));
        }
        Ok(Self { start, amps })
    }

    /// Unshaped electron.
    pub fn delta() -> Self {
        Self { start: 0, amps: vec![Complex::new(T::one(), T::zero())] }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.amps.len() as i64 - 1
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amplitude(&self, loss: i64) -> Complex<T> {
        if loss < self.start || loss > self.end() {
            Complex::new(T::zero(), T::zero())
        } else {
            self.amps[(loss - self.start) as usize]
        }
    }

    pub fn spectrum(&self) -> EelsSpectrum<T> {
        EelsSpectrum {
            min_loss: self.start,
            probs: self.amps.iter().map(|a| a.norm_sqr()).collect(),
            hbar_omega0: T::one(),
        }
    }
}

/// Spectrum of a shaped electron: paths ending in the same sideband and the
/// same final ladder level interfere; different final levels add incoherently.
pub fn spectrum_shaped<T: Real>(
    kernel: &ScatteringKernel<T>,
    st: &LadderState<T>,
    comb: &ElectronComb<T>,
) -> Result<EelsSpectrum<T>> {
    let n = kernel.n();
    if st.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: st.n() });
    }
    let c = st
        .amplitudes()
        .ok_or_else(|| Error::InvalidState("shaped-electron spectra need a pure ladder state".into()))?;
    let big_n = n as i64;
    let lo = comb.start() - big_n;
    let hi = comb.end() + big_n;
    let probs: Vec<T> = (lo..=hi)
        .map(|l| {
            (0..=n)
                .map(|fin| {
                    let amp: Complex<T> = (0..=n)
                        .map(|m| {
                            let shift = fin as i64 - m as i64;
                            comb.amplitude(l - shift) * c[m] * kernel.element(fin, m)
                        })
                        .sum();
                    amp.norm_sqr()
                })
                .collect::<KahanSum<T>>()
                .value()
        })
        .collect();
    EelsSpectrum::new(lo, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::ladder_from_pulse;
    use crate::scattering::exact_elements;
    use crate::special::bessel_j_sequence;

    #[test]
    fn ground_state_only_loses() {
        let k = exact_elements(6, Complex::new(0.5, 0.0)).unwrap();
        let sp = spectrum_from_ladder(&k, &LadderState::ground(6).unwrap()).unwrap();
        assert!((-6..0).all(|l| sp.probability(l) == 0.0));
        let sp = spectrum_from_ladder(&k, &LadderState::fully_excited(6).unwrap()).unwrap();
        assert!((1..=6).all(|l| sp.probability(l) == 0.0));
    }

    #[test]
    fn single_emitter_ground() {
        let k = exact_elements(1, Complex::new(0.5f64, 0.0)).unwrap();
        let sp = spectrum_from_ladder(&k, &LadderState::ground(1).unwrap()).unwrap();
        assert!((sp.probability(1) - 0.229_848_847_065_930_15).abs() < 1e-15);
        assert!((sp.probability(0) - 0.770_151_152_934_069_9).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let k = exact_elements(3, Complex::new(0.5, 0.0)).unwrap();
        assert!(matches!(
            spectrum_from_ladder(&k, &LadderState::ground(4).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn effective_coupling_of_delta_and_pinem() {
        assert_eq!(EelsSpectrum::<f64>::delta(3).effective_coupling(), 0.0);
        for &x in &[0.25f64, 0.5, 1.0, 2.0] {
            let j = bessel_j_sequence(2.0 * x, 60);
            let probs: Vec<f64> = (-60i64..=60).map(|l| j[l.unsigned_abs() as usize].powi(2)).collect();
            let total: f64 = probs.iter().sum();
            let sp = EelsSpectrum::new(-60, probs.iter().map(|p| p / total).collect()).unwrap();
            assert!((sp.effective_coupling() - x).abs() < 1e-10);
        }
    }

    #[test]
    fn shaped_reduces_to_plain_for_delta_comb() {
        let k = exact_elements(5, Complex::from_polar(0.4, 0.3)).unwrap();
        let st = ladder_from_pulse(5, 1.2).unwrap();
        let a = spectrum_shaped(&k, &st, &ElectronComb::delta()).unwrap();
        let b = spectrum_from_ladder(&k, &st).unwrap();
        assert!(total_variation(&a, &b) < 1e-14);
    }

    #[test]
    fn shaped_without_coupling_returns_comb() {
        let k = exact_elements(3, Complex::new(0.0, 0.0)).unwrap();
        let st = ladder_from_pulse(3, 1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let comb = ElectronComb::new(-1, vec![Complex::new(h, 0.0), Complex::new(0.0, h)]).unwrap();
        let sp = spectrum_shaped(&k, &st, &comb).unwrap();
        assert!(total_variation(&sp, &comb.spectrum()) < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(EelsSpectrum::new(0, vec![0.5f64, 0.4]).is_err());
        assert!(EelsSpectrum::new(0, vec![1.1f64, -0.1]).is_err());
        assert!(ElectronComb::<f64>::new(0, vec![Complex::new(0.5, 0.0)]).is_err());
        let sp = EelsSpectrum::new(-1, vec![0.5f64, 0.5, 0.0]).unwrap();
        assert!(sp.on_range(-1, 0).is_ok());
        assert!(sp.on_range(0, 1).is_err());
    }
}
