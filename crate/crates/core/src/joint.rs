//! Exact evolution of N emitters and the electron's energy sidebands in the
//! full `2^N`-configuration space.
//!
//! The interaction `exp(i Σ_i (g_i σ₊^i b + g_i* σ₋^i b†))` conserves the
//! charge `c = n_exc − ℓ`, so the joint state splits into blocks of fixed
//! charge. Inside a block the sideband is slaved to the configuration and the
//! generator is the same `2^N × 2^N` spin operator for every block.

use num_complex::Complex;
use rayon::prelude::*;

use crate::coupling::CouplingSet;
use crate::eels::ElectronComb;
use crate::error::{Error, Result};
use crate::ladder::{LadderState, ProductState};
use crate::real::{KahanSum, Real};
use crate::special::ln_binomial;

/// Largest ensemble evolved exactly.
pub const MAX_FULL_N: usize = 16;
/// Taylor series stops once a term's norm falls below this fraction of the state norm.
pub const TAYLOR_TOL: f64 = 1e-14;
/// Generator 1-norm per scaling step.
pub const STEP_NORM: f64 = 0.5;

/// Emitter state fed to [`full_evolution`].
#[derive(Debug, Clone, Copy)]
pub enum EmitterInput<'a, T: Real> {
    Product(&'a ProductState<T>),
    /// Pure ladder state with emitter phases `arg g_i`.
    Ladder(&'a LadderState<T>),
}

#[derive(Debug, Clone, PartialEq)]
struct Block<T> {
    charge: i64,
    amps: Vec<Complex<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T> {
    n: usize,
    blocks: Vec<Block<T>>,
}

impl<T: Real> JointState<T> {
    /// Emitters in `emitters` (configuration basis) and electron in `comb`.
    pub fn from_parts(n: usize, emitters: &[Complex<T>], comb: &ElectronComb<T>) -> Result<Self> {
        if n > MAX_FULL_N {
            return Err(Error::Capacity { n, max: MAX_FULL_N });
        }
        if emitters.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, found: emitters.len() });
        }
        let norm: T = emitters.iter().map(|a| a.norm_sqr()).sum();
        if !((norm - T::one()).abs() <= T::lit(1e-10)) {
            return Err(Error::InvalidState(format!("emitter state not normalised: {norm}")));
        }
        let lo = -comb.end();
        let hi = n as i64 - comb.start();
        let blocks = (lo..=hi)
            .map(|charge| Block {
                charge,
                amps: emitters
                    .iter()
                    .enumerate()
                    .map(|(x, a)| *a * comb.amplitude(x.count_ones() as i64 - charge))
                    .collect(),
            })
            .filter(|b| b.amps.iter().any(|a| a.norm_sqr() > T::zero()))
            .collect();
        Ok(Self { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Conserved charges present.
    pub fn charges(&self) -> Vec<i64> {
        self.blocks.iter().map(|b| b.charge).collect()
    }

    pub fn norm_sqr(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.amps.iter().map(|a| a.norm_sqr()))
            .collect::<KahanSum<T>>()
            .value()
    }

    /// Amplitude of configuration `config` with electron loss `loss`.
    pub fn amplitude(&self, config: usize, loss: i64) -> Complex<T> {
        let charge = config.count_ones() as i64 - loss;
        self.blocks
            .iter()
            .find(|b| b.charge == charge)
            .map_or(Complex::new(T::zero(), T::zero()), |b| b.amps[config])
    }

    /// Loss range and electron marginal `P_ℓ = Σ_x |ψ(x, ℓ)|²`.
    pub fn loss_marginal(&self) -> (i64, Vec<T>) {
        let n = self.n as i64;
        let (Some(cmin), Some(cmax)) = (self.blocks.first().map(|b| b.charge), self.blocks.last().map(|b| b.charge))
        else {
            return (0, vec![]);
        };
        let lo = -cmax;
        let hi = n - cmin;
        let mut acc = vec![KahanSum::new(); (hi - lo + 1) as usize];
        for b in &self.blocks {
            for (x, a) in b.amps.iter().enumerate() {
                let loss = x.count_ones() as i64 - b.charge;
                acc[(loss - lo) as usize].add(a.norm_sqr());
            }
        }
        (lo, acc.iter().map(|s| s.value()).collect())
    }

    /// Mean number of excited emitters.
    pub fn mean_excitation(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.amps.iter().enumerate().map(|(x, a)| T::from_usize_lossy(x.count_ones() as usize) * a.norm_sqr()))
            .collect::<KahanSum<T>>()
            .value()
    }

    /// Projection onto ladder level `level` (emitter phases `phases`) with electron loss `loss`.
    pub fn ladder_amplitude(&self, level: usize, loss: i64, phases: &[T]) -> Result<Complex<T>> {
        if phases.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: phases.len() });
        }
        if level > self.n {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let scale = (-T::lit(0.5) * ln_binomial::<T>(self.n, level)).exp();
        let total: Complex<T> = (0..1usize << self.n)
            .filter(|x| x.count_ones() as usize == level)
            .map(|x| {
                let phase: T = (0..self.n).filter(|i| x >> i & 1 == 1).map(|i| phases[i]).sum();
                Complex::from_polar(scale, -phase) * self.amplitude(x, loss)
            })
            .sum();
        Ok(total)
    }
}

/// `out = A v` with `A = i Σ_i (g_i σ₊^i + g_i* σ₋^i)`.
fn apply_generator<T: Real>(g: &[Complex<T>], v: &[Complex<T>], out: &mut [Complex<T>]) {
    let iu = Complex::new(T::zero(), T::one());
    let raise: Vec<Complex<T>> = g.iter().map(|g| iu * *g).collect();
    let lower: Vec<Complex<T>> = g.iter().map(|g| iu * g.conj()).collect();
    // gather form: each target sums its n neighbours
    for (x, o) in out.iter_mut().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..g.len() {
            let bit = 1usize << i;
            let src = x ^ bit;
            // x has bit set: reached by raising src; otherwise by lowering src
            if x & bit != 0 {
                acc += raise[i] * v[src];
            } else {
                acc += lower[i] * v[src];
            }
        }
        *o = acc;
    }
}

fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
}

/// `exp(A) v` by scaled Taylor series.
fn expm_action<T: Real>(g: &[Complex<T>], v: &mut [Complex<T>]) {
    let one_norm: T = g.iter().map(|g| g.norm()).sum();
    if one_norm == T::zero() {
        return;
    }
    let steps = (one_norm / T::lit(STEP_NORM)).ceil().to_usize().unwrap_or(1).max(1);
    let h = T::one() / T::from_usize_lossy(steps);
    let tol = T::lit(TAYLOR_TOL);
    let mut term = vec![Complex::new(T::zero(), T::zero()); v.len()];
    let mut scratch = term.clone();
    for _ in 0..steps {
        term.copy_from_slice(v);
        let state_norm = norm(v);
        for k in 1..=60usize {
            apply_generator(g, &term, &mut scratch);
            let f = h / T::from_usize_lossy(k);
            for ((t, s), out) in term.iter_mut().zip(&scratch).zip(v.iter_mut()) {
                *t = *s * f;
                *out += *t;
            }
            if norm(&term) < tol * state_norm {
                break;
            }
        }
    }
}

/// Applies the scattering operator for couplings `coupl` to the emitters in
/// `initial` and the electron in `comb`.
pub fn full_evolution<T: Real>(
    coupl: &CouplingSet<T>,
    initial: EmitterInput<'_, T>,
    comb: &ElectronComb<T>,
) -> Result<JointState<T>> {
    let n = coupl.len();
    if n > MAX_FULL_N {
        return Err(Error::Capacity { n, max: MAX_FULL_N });
    }
    let emitters = match initial {
        EmitterInput::Product(p) => {
            if p.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.n() });
            }
            p.configuration_amplitudes()
        }
        EmitterInput::Ladder(l) => {
            if l.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: l.n() });
            }
            l.configuration_amplitudes(&coupl.phases())?
        }
    };
    let mut state = JointState::from_parts(n, &emitters, comb)?;
    let g = coupl.values();
    state.blocks.par_iter_mut().for_each(|b| expm_action(g, &mut b.amps));
    Ok(state)
}
