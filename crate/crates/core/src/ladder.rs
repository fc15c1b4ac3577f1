//! Emitter states: Dicke-ladder states and per-emitter product states.
//!
//! Ladder state `|m⟩` is the normalised symmetric state with `m` excitations
//! in which emitter `i` carries the phase `χ_i = arg g_i` of its coupling, so
//! that the collective raising operator `Σ_i g_i σ₊^i` equals `|g| S₊` on it.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::special::{ln_binomial, LnFactorials};

/// Largest ensemble handled by the ladder representation.
pub const MAX_LADDER_N: usize = 1000;
/// Normalisation tolerance checked by the constructors.
pub const NORM_TOL: f64 = 1e-12;
/// Phase agreement (rad) required for a product state to lie on the ladder.
pub const PHASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LadderStateJson", into = "LadderStateJson")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum LadderState<T: Real> {
    /// Coherent superposition `Σ c_m |m⟩`.
    Pure(Vec<Complex<T>>),
    /// Incoherent mixture with populations `p_m`.
    Diagonal(Vec<T>),
}

fn check_size(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::InvalidState("ladder needs N >= 1 (at least two levels)".into()));
    }
    if len - 1 > MAX_LADDER_N {
        return Err(Error::Capacity { n: len - 1, max: MAX_LADDER_N });
    }
    Ok(())
}

impl<T: Real> LadderState<T> {
    pub fn pure(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        check_size(amplitudes.len())?;
        let norm: T = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !((norm - T::one()).abs() <= T::lit(NORM_TOL)) {
            return Err(Error::InvalidState(format!("amplitudes not normalised: Σ|c|² = {norm}")));
        }
        Ok(Self::Pure(amplitudes))
    }

    pub fn diagonal(populations: Vec<T>) -> Result<Self> {
        check_size(populations.len())?;
        if populations.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::InvalidState("populations must be nonnegative".into()));
        }
        let total: T = populations.iter().copied().sum();
        if !((total - T::one()).abs() <= T::lit(NORM_TOL)) {
            return Err(Error::InvalidState(format!("populations not normalised: Σp = {total}")));
        }
        Ok(Self::Diagonal(populations))
    }

    /// Pure ladder eigenstate `|m⟩`.
    pub fn fock(n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(Error::InvalidState(format!("level {m} above top of ladder {n}")));
        }
        let mut c = vec![Complex::new(T::zero(), T::zero()); n + 1];
        c[m] = Complex::new(T::one(), T::zero());
        Self::pure(c)
    }

    pub fn ground(n: usize) -> Result<Self> {
        Self::fock(n, 0)
    }

    pub fn fully_excited(n: usize) -> Result<Self> {
        Self::fock(n, n)
    }

    /// Number of emitters.
    pub fn n(&self) -> usize {
        match self {
            Self::Pure(c) => c.len() - 1,
            Self::Diagonal(p) => p.len() - 1,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[Complex<T>]> {
        match self {
            Self::Pure(c) => Some(c),
            Self::Diagonal(_) => None,
        }
    }

    /// Ladder populations: `|c_m|²` or `p_m`.
    pub fn weights(&self) -> Vec<T> {
        match self {
            Self::Pure(c) => c.iter().map(|c| c.norm_sqr()).collect(),
            Self::Diagonal(p) => p.clone(),
        }
    }

    /// Same populations with coherences dropped.
    pub fn dephased(&self) -> Self {
        Self::Diagonal(self.weights())
    }

    /// `⟨m⟩`.
    pub fn mean_excitation(&self) -> T {
        self.weights()
            .iter()
            .enumerate()
            .map(|(m, w)| T::from_usize_lossy(m) * *w)
            .sum()
    }

    /// `⟨m²⟩ − ⟨m⟩²`.
    pub fn excitation_variance(&self) -> T {
        let mean = self.mean_excitation();
        self.weights()
            .iter()
            .enumerate()
            .map(|(m, w)| {
                let d = T::from_usize_lossy(m) - mean;
                d * d * *w
            })
            .sum()
    }

    /// Amplitudes in the `2^N` configuration basis (bit `i` set = emitter `i`
    /// excited) for ladder phases `phases[i] = χ_i`.
    pub fn configuration_amplitudes(&self, phases: &[T]) -> Result<Vec<Complex<T>>> {
        let Self::Pure(c) = self else {
            return Err(Error::InvalidState("configuration expansion needs a pure state".into()));
        };
        let n = c.len() - 1;
        if phases.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: phases.len() });
        }
        let inv_sqrt_binom: Vec<T> =
            (0..=n).map(|m| (-T::lit(0.5) * ln_binomial::<T>(n, m)).exp()).collect();
        Ok((0..1usize << n)
            .map(|x| {
                let m = x.count_ones() as usize;
                if c[m] == Complex::new(T::zero(), T::zero()) {
                    return c[m];
                }
                let phase: T = (0..n).filter(|i| x >> i & 1 == 1).map(|i| phases[i]).sum();
                c[m] * Complex::from_polar(inv_sqrt_binom[m], phase)
            })
            .collect())
    }
}

/// `base^exp` for a possibly negative or zero base, through logarithms.
fn ln_abs_power<T: Real>(base: T, exp: usize) -> (T, bool) {
    if exp == 0 {
        return (T::zero(), false);
    }
    let negative = base < T::zero() && exp % 2 == 1;
    (T::from_usize_lossy(exp) * base.abs().ln(), negative)
}

/// Binomial amplitudes `√C(N,m) cos(φ/2)^(N−m) sin(φ/2)^m` as real numbers.
fn binomial_amplitudes<T: Real>(n: usize, area: T) -> Vec<T> {
    let (s, c) = (area * T::lit(0.5)).sin_cos();
    let lnf = LnFactorials::<T>::new(n);
    (0..=n)
        .map(|m| {
            let (lc, nc) = ln_abs_power(c, n - m);
            let (ls, ns) = ln_abs_power(s, m);
            let ln_binom = lnf.get(n) - lnf.get(m) - lnf.get(n - m);
            let v = (T::lit(0.5) * ln_binom + lc + ls).exp();
            if nc ^ ns {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Spin-coherent ladder state reached from the ground state by a pulse of
/// area `area` whose phases are aligned with the electron.
pub fn ladder_from_pulse<T: Real>(n: usize, area: T) -> Result<LadderState<T>> {
    check_size(n + 1)?;
    let amps = binomial_amplitudes(n, area)
        .into_iter()
        .map(|a| Complex::new(a, T::zero()))
        .collect::<Vec<_>>();
    // renormalise away rounding in the log-domain products
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    LadderState::pure(amps.into_iter().map(|c| c / norm).collect())
}

/// Pure product state `⊗_i [cos(ϑ_i/2)|g⟩ + e^{iφ_i} sin(ϑ_i/2)|e⟩]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductState<T> {
    polar: Vec<T>,
    azimuth: Vec<T>,
}

impl<T: Real> ProductState<T> {
    pub fn new(polar: Vec<T>, azimuth: Vec<T>) -> Result<Self> {
        if polar.len() != azimuth.len() {
            return Err(Error::DimensionMismatch { expected: polar.len(), found: azimuth.len() });
        }
        if polar.is_empty() {
            return Err(Error::InvalidState("product state needs at least one emitter".into()));
        }
        if polar.iter().chain(&azimuth).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("Bloch angles must be finite".into()));
        }
        Ok(Self { polar, azimuth })
    }

    /// Every emitter rotated by `area` with azimuth equal to its ladder phase.
    pub fn phase_matched(area: T, phases: &[T]) -> Result<Self> {
        Self::new(vec![area; phases.len()], phases.to_vec())
    }

    pub fn n(&self) -> usize {
        self.polar.len()
    }

    pub fn polar(&self) -> &[T] {
        &self.polar
    }

    pub fn azimuth(&self) -> &[T] {
        &self.azimuth
    }

    /// Amplitudes in the `2^N` configuration basis.
    pub fn configuration_amplitudes(&self) -> Vec<Complex<T>> {
        let n = self.n();
        let factors: Vec<(Complex<T>, Complex<T>)> = self
            .polar
            .iter()
            .zip(&self.azimuth)
            .map(|(&th, &ph)| {
                let (s, c) = (th * T::lit(0.5)).sin_cos();
                (Complex::new(c, T::zero()), Complex::from_polar(s, ph))
            })
            .collect();
        let mut out = vec![Complex::new(T::one(), T::zero())];
        out.reserve(1 << n);
        for (ground, excited) in factors.iter().take(n) {
            // bit i of the index is emitter i: new high bit doubles the table
            let lower: Vec<_> = out.iter().map(|a| *a * *ground).collect();
            let upper: Vec<_> = out.iter().map(|a| *a * *excited).collect();
            out = lower;
            out.extend(upper);
        }
        out
    }
}

/// Outcome of mapping a product state onto the ladder.
#[derive(Debug, Clone, PartialEq)]
pub enum LadderProjection<T: Real> {
    Ladder(LadderState<T>),
    /// The state is not symmetric in the electron frame; evolve it in the full space.
    Mismatch,
}

impl<T: Real> LadderProjection<T> {
    pub fn ladder(self) -> Option<LadderState<T>> {
        match self {
            Self::Ladder(s) => Some(s),
            Self::Mismatch => None,
        }
    }
}

fn wrap_phase<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let mut r = x % tau;
    if r > T::PI() {
        r -= tau;
    } else if r <= -T::PI() {
        r += tau;
    }
    r
}

/// Maps a pure product state onto the ladder whose emitter phases are
/// `phases[i]` (`arg g_i`).
pub fn product_to_ladder<T: Real>(s: &ProductState<T>, phases: &[T]) -> Result<LadderProjection<T>> {
    let n = s.n();
    if phases.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: phases.len() });
    }
    check_size(n + 1)?;
    let tol = T::lit(PHASE_TOL);
    let theta = s.polar[0];
    if s.polar.iter().any(|t| (*t - theta).abs() > tol) {
        return Ok(LadderProjection::Mismatch);
    }
    let residuals: Vec<T> = s.azimuth.iter().zip(phases).map(|(a, b)| *a - *b).collect();
    let (sin_half, cos_half) = (theta * T::lit(0.5)).sin_cos();
    let zero = Complex::new(T::zero(), T::zero());

    // Poles of the Bloch sphere carry no relative phase information.
    if sin_half.abs() <= tol {
        let mut c = vec![zero; n + 1];
        c[0] = Complex::new(cos_half.signum(), T::zero());
        return Ok(LadderProjection::Ladder(LadderState::pure(c)?));
    }
    if cos_half.abs() <= tol {
        let total: T = residuals.iter().copied().sum();
        let mut c = vec![zero; n + 1];
        c[n] = Complex::from_polar(sin_half.signum().powi(n as i32), total);
        return Ok(LadderProjection::Ladder(LadderState::pure(c)?));
    }

    let alpha = residuals[0];
    if residuals.iter().any(|r| wrap_phase(*r - alpha).abs() > tol) {
        return Ok(LadderProjection::Mismatch);
    }
    let amps = binomial_amplitudes(n, theta);
    let c: Vec<Complex<T>> = amps
        .into_iter()
        .enumerate()
        .map(|(m, a)| Complex::from_polar(a, T::from_usize_lossy(m) * alpha))
        .collect();
    let norm = c.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
    Ok(LadderProjection::Ladder(LadderState::pure(c.into_iter().map(|v| v / norm).collect())?))
}

/// Wire format: `{"N", "kind": "pure"|"diagonal", "re", "im"}` or `{"N", "kind", "p"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderStateJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub re: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub im: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<Vec<f64>>,
}

impl<T: Real> From<LadderState<T>> for LadderStateJson {
    fn from(s: LadderState<T>) -> Self {
        let n = s.n();
        match s {
            LadderState::Pure(c) => Self {
                n,
                kind: "pure".into(),
                re: Some(c.iter().map(|v| v.re.as_f64()).collect()),
                im: Some(c.iter().map(|v| v.im.as_f64()).collect()),
                p: None,
            },
            LadderState::Diagonal(p) => Self {
                n,
                kind: "diagonal".into(),
                re: None,
                im: None,
                p: Some(p.iter().map(|v| v.as_f64()).collect()),
            },
        }
    }
}

impl<T: Real> TryFrom<LadderStateJson> for LadderState<T> {
    type Error = Error;

    fn try_from(j: LadderStateJson) -> Result<Self> {
        let state = match (j.kind.as_str(), j.re, j.im, j.p) {
            ("pure", Some(re), Some(im), None) => {
                if re.len() != im.len() {
                    return Err(Error::DimensionMismatch { expected: re.len(), found: im.len() });
                }
                Self::pure(re.iter().zip(&im).map(|(a, b)| Complex::new(T::lit(*a), T::lit(*b))).collect())?
            }
            ("diagonal", None, None, Some(p)) => Self::diagonal(p.iter().map(|v| T::lit(*v)).collect())?,
            (kind, ..) => {
                return Err(Error::InvalidState(format!(
                    "kind {kind:?} needs re/im (pure) or p (diagonal) and nothing else"
                )))
            }
        };
        if state.n() != j.n {
            return Err(Error::DimensionMismatch { expected: j.n, found: state.n() });
        }
        Ok(state)
    }
}
