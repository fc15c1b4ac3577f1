//! Superradiant relaxation of an inverted ensemble and the energy-loss
//! spectra an electron records along it.
//!
//! Two models are provided. [`dicke_cascade`] solves the rate equations of
//! the symmetric ladder, `|m⟩ → |m−1⟩` at rate `Γ m (N−m+1)`. [`twa_long_sample`]
//! samples semiclassical spin trajectories for an extended sample in which
//! each emitter is driven by the field radiated by the emitters upstream of
//! it. The second model is a reconstruction: it conserves every spin's
//! length, reduces to single-spin decay for `N = 1`, and shows the
//! shot-to-shot fluctuating pulses of long samples, but it is not derived
//! from a specific published scheme.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coupling::{ElectronParams, EmitterEnsemble};
use crate::eels::{spectrum_from_ladder, EelsSpectrum};
use crate::error::{Error, Result};
use crate::ladder::LadderState;
use crate::real::Real;
use crate::scattering::ScatteringKernel;

/// Local error tolerance of the adaptive rate-equation integrator.
pub const DICKE_TOL: f64 = 1e-10;
/// Spin-trajectory step as a fraction of `1/(NΓ)`.
pub const TWA_STEP_FRACTION: f64 = 0.01;
/// Default decay rate (fs⁻¹).
pub const DEFAULT_GAMMA: f64 = 1e-3;
/// Default initial tipping angle (rad) of every spin.
pub const DEFAULT_TRIGGER_ANGLE: f64 = 0.05;

fn check_times<T: Real>(times: &[T]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Precondition("time grid is empty".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= T::zero())) {
        return Err(Error::Precondition("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("times must be nondecreasing".into()));
    }
    Ok(())
}

fn check_rate<T: Real>(gamma: T) -> Result<()> {
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(Error::Domain(format!("decay rate must be positive, got {gamma}")));
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau; the right-hand sides here are autonomous.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_ERR: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Advances `y` from `t0` to `t1` with adaptive Dormand–Prince steps; returns
/// the last accepted step size.
fn dopri5<T: Real, F: Fn(&[T], &mut [T])>(f: &F, y: &mut [T], t0: T, t1: T, mut h: T, tol: T) -> Result<T> {
    let n = y.len();
    let mut k = vec![vec![T::zero(); n]; 7];
    let mut stage = vec![T::zero(); n];
    let mut t = t0;
    let mut guard = 0usize;
    f(y, &mut k[0]);
    while t < t1 {
        guard += 1;
        if guard > 10_000_000 {
            return Err(Error::NonConvergence { iterations: guard, residual: (t1 - t).as_f64() });
        }
        let last = t + h >= t1;
        let step = if last { t1 - t } else { h };
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += step * T::lit(A[s][j]) * kj[i];
                }
                stage[i] = acc;
            }
            f(&stage, &mut k[s]);
        }
        // stage now holds the 5th-order solution (FSAL row), k[6] its slope
        let mut err = T::zero();
        for i in 0..n {
            let e: T = (0..7).map(|s| T::lit(B_ERR[s]) * k[s][i]).sum::<T>() * step;
            let sc = tol + tol * y[i].abs().max(stage[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= T::one() {
            t = if last { t1 } else { t + step };
            y.copy_from_slice(&stage);
            k.swap(0, 6);
        }
        let factor = if err == T::zero() {
            T::lit(5.0)
        } else {
            (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
        };
        if !(err <= T::one()) || !last {
            h = step * factor;
        }
        if h <= T::epsilon() * t1.abs().max(T::one()) {
            return Err(Error::NonConvergence { iterations: guard, residual: err.as_f64() });
        }
    }
    Ok(h)
}

/// Populations of the ladder along a rate-equation cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeTrajectory<T> {
    n: usize,
    gamma: T,
    times: Vec<T>,
    populations: Vec<Vec<T>>,
    intensity: Vec<T>,
    mean_m: Vec<T>,
}

fn cascade_rhs<T: Real>(n: usize, gamma: T) -> impl Fn(&[T], &mut [T]) {
    let rates: Vec<T> = (0..=n).map(|m| gamma * T::from_usize_lossy(m * (n - m + 1))).collect();
    move |p: &[T], dp: &mut [T]| {
        for m in 0..=n {
            let inflow = if m < n { rates[m + 1] * p[m + 1] } else { T::zero() };
            dp[m] = inflow - rates[m] * p[m];
        }
    }
}

fn emission_rate<T: Real>(n: usize, gamma: T, p: &[T]) -> T {
    gamma * p.iter().enumerate().map(|(m, pm)| T::from_usize_lossy(m * (n - m + 1)) * *pm).sum::<T>()
}

fn mean_of<T: Real>(p: &[T]) -> T {
    p.iter().enumerate().map(|(m, pm)| T::from_usize_lossy(m) * *pm).sum()
}

/// Rate-equation decay from the populations of `initial`, sampled at `times`
/// (units of `1/gamma`, starting from 0).
pub fn dicke_cascade<T: Real>(gamma: T, initial: &LadderState<T>, times: &[T]) -> Result<DickeTrajectory<T>> {
    check_rate(gamma)?;
    check_times(times)?;
    let n = initial.n();
    let rhs = cascade_rhs(n, gamma);
    let mut p = initial.weights();
    let tol = T::lit(DICKE_TOL);
    let mut h = T::lit(0.01) / (gamma * T::from_usize_lossy(n.max(1) * n.max(1)));
    let mut t = T::zero();
    let mut populations = Vec::with_capacity(times.len());
    for &target in times {
        if target > t {
            h = dopri5(&rhs, &mut p, t, target, h, tol)?;
            t = target;
        }
        populations.push(p.clone());
    }
    let intensity = populations.iter().map(|p| emission_rate(n, gamma, p)).collect();
    let mean_m = populations.iter().map(|p| mean_of(p)).collect();
    Ok(DickeTrajectory { n, gamma, times: times.to_vec(), populations, intensity, mean_m })
}

impl<T: Real> DickeTrajectory<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// `p_m` at each stored time.
    pub fn populations(&self) -> &[Vec<T>] {
        &self.populations
    }

    /// Emitted quanta per unit time.
    pub fn intensity(&self) -> &[T] {
        &self.intensity
    }

    pub fn mean_m(&self) -> &[T] {
        &self.mean_m
    }

    /// Stored time of maximal intensity.
    pub fn peak_time(&self) -> T {
        let i = argmax(&self.intensity);
        self.times[i]
    }

    pub fn peak_intensity(&self) -> T {
        self.intensity[argmax(&self.intensity)]
    }

    /// Populations at an arbitrary `t` inside the integrated range, obtained
    /// by integrating on from the preceding stored time.
    pub fn populations_at(&self, t: T) -> Result<Vec<T>> {
        let last = *self.times.last().expect("non-empty");
        if !(t >= T::zero() && t <= last) {
            return Err(Error::Domain(format!("delay {t} outside integrated range [0, {last}]")));
        }
        let idx = self.times.partition_point(|s| *s <= t);
        let (mut p, t0) = if idx == 0 {
            // before the first sample: step back is not possible, restart from it
            return Err(Error::Domain(format!("delay {t} precedes the first stored time")));
        } else {
            (self.populations[idx - 1].clone(), self.times[idx - 1])
        };
        if t > t0 {
            let rhs = cascade_rhs(self.n, self.gamma);
            let h = (t - t0) * T::lit(0.1);
            dopri5(&rhs, &mut p, t0, t, h, T::lit(DICKE_TOL))?;
        }
        Ok(p)
    }

    /// Ladder state at delay `t`, with integrator round-off removed.
    pub fn state_at(&self, t: T) -> Result<LadderState<T>> {
        LadderState::diagonal(clean_populations(self.populations_at(t)?))
    }

    /// Energy-loss spectrum recorded at each delay.
    pub fn timeline_eels(&self, kernel: &ScatteringKernel<T>, delays: &[T]) -> Result<Vec<EelsSpectrum<T>>> {
        if kernel.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: kernel.n() });
        }
        delays.iter().map(|&d| spectrum_from_ladder(kernel, &self.state_at(d)?)).collect()
    }
}

fn clean_populations<T: Real>(mut p: Vec<T>) -> Vec<T> {
    p.iter_mut().for_each(|v| *v = v.max(T::zero()));
    let total: T = p.iter().copied().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Settings of a semiclassical long-sample run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwaConfig<T> {
    /// Single-emitter rate (fs⁻¹).
    pub gamma: T,
    pub trajectories: usize,
    pub seed: u64,
    /// Initial tipping angle of every spin away from full inversion (rad).
    pub trigger_angle: T,
    /// Integration step as a fraction of `1/(NΓ)`.
    pub step_fraction: T,
}

impl<T: Real> TwaConfig<T> {
    pub fn new(gamma: T, trajectories: usize, seed: u64) -> Self {
        Self {
            gamma,
            trajectories,
            seed,
            trigger_angle: T::lit(DEFAULT_TRIGGER_ANGLE),
            step_fraction: T::lit(TWA_STEP_FRACTION),
        }
    }
}

/// Trajectories of the semiclassical long-sample model.
///
/// Each emitter carries an inversion `s_i` and a coherence `σ_i` with
/// `s_i² + 4|σ_i|² = 1`. Emitter `i` feels
/// `F_i = σ_i/2 + Σ_{j<i} exp(iω0(z_i − z_j)/v) σ_j`, and
/// `dσ_i/dt = Γ s_i F_i`, `ds_i/dt = −4Γ Re(σ_i* F_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwaEnsemble<T> {
    n: usize,
    gamma: T,
    seed: u64,
    trigger_angle: T,
    step: T,
    times: Vec<T>,
    /// `[trajectory][time]` excitation number `Σ (1 + s_i)/2`.
    inversion: Vec<Vec<T>>,
    /// `[trajectory][time]` emitted quanta per unit time.
    intensity: Vec<Vec<T>>,
    /// `[trajectory][time]` quanta emitted since `t = 0`.
    emitted: Vec<Vec<T>>,
    spin_length_error: Vec<T>,
    final_inversion: Vec<Vec<T>>,
    final_coherence: Vec<Vec<Complex<T>>>,
}

struct Cascade<T> {
    gamma: T,
    /// `exp(iω0 z_i / v)`.
    phase: Vec<Complex<T>>,
}

impl<T: Real> Cascade<T> {
    /// State layout: `s[0..n]`, `Re σ[n..2n]`, `Im σ[2n..3n]`, emitted `[3n]`.
    fn rhs(&self, y: &[T], dy: &mut [T]) {
        let n = self.phase.len();
        let mut upstream = Complex::new(T::zero(), T::zero());
        let half = T::lit(0.5);
        let four = T::lit(4.0);
        let mut out = T::zero();
        for i in 0..n {
            let s = y[i];
            let sig = Complex::new(y[n + i], y[2 * n + i]);
            let field = sig * half + self.phase[i] * upstream;
            upstream += self.phase[i].conj() * sig;
            let d_sig = field * (self.gamma * s);
            let flux = self.gamma * (sig.conj() * field).re;
            dy[i] = -four * flux;
            dy[n + i] = d_sig.re;
            dy[2 * n + i] = d_sig.im;
            out += flux;
        }
        dy[3 * n] = T::lit(2.0) * out;
    }

    fn intensity(&self, y: &[T]) -> T {
        let mut dy = vec![T::zero(); y.len()];
        self.rhs(y, &mut dy);
        dy[y.len() - 1]
    }
}

struct Rk4<T> {
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

impl<T: Real> Rk4<T> {
    fn new(len: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![T::zero(); len]), tmp: vec![T::zero(); len] }
    }

    fn step(&mut self, sys: &Cascade<T>, y: &mut [T], h: T) {
        let half = T::lit(0.5) * h;
        let [k1, k2, k3, k4] = &mut self.k;
        sys.rhs(y, k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * k1[i];
        }
        sys.rhs(&self.tmp, k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * k2[i];
        }
        sys.rhs(&self.tmp, k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(&self.tmp, k4);
        let sixth = h / T::lit(6.0);
        for i in 0..y.len() {
            y[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

struct Track<T> {
    inversion: Vec<T>,
    intensity: Vec<T>,
    emitted: Vec<T>,
    spin_error: T,
    s: Vec<T>,
    sigma: Vec<Complex<T>>,
}

fn spin_error<T: Real>(y: &[T], n: usize) -> T {
    (0..n)
        .map(|i| {
            let (s, re, im) = (y[i], y[n + i], y[2 * n + i]);
            (s * s + T::lit(4.0) * (re * re + im * im) - T::one()).abs()
        })
        .fold(T::zero(), T::max)
}

/// Samples `cfg.trajectories` spin trajectories of the fully inverted
/// ensemble, recorded at `times` (fs). Trajectory `k` draws its coherence
/// phases from its own random stream `(seed, k)`, so results do not depend
/// on thread scheduling.
pub fn twa_long_sample<T: Real>(
    ens: &EmitterEnsemble<T>,
    e: &ElectronParams<T>,
    cfg: &TwaConfig<T>,
    times: &[T],
) -> Result<TwaEnsemble<T>> {
    check_rate(cfg.gamma)?;
    check_times(times)?;
    if cfg.trajectories == 0 {
        return Err(Error::Precondition("need at least one trajectory".into()));
    }
    if !(cfg.trigger_angle > T::zero() && cfg.trigger_angle < T::FRAC_PI_2()) {
        return Err(Error::Domain(format!(
            "trigger angle must lie in (0, π/2) for an inverted start, got {}",
            cfg.trigger_angle
        )));
    }
    if !(cfg.step_fraction > T::zero() && cfg.step_fraction <= T::lit(TWA_STEP_FRACTION)) {
        return Err(Error::Domain(format!(
            "step fraction must lie in (0, {TWA_STEP_FRACTION}], got {}",
            cfg.step_fraction
        )));
    }
    let n = ens.count();
    let k_e = ens.omega0() / e.velocity();
    let two_pi = T::TAU();
    let phase = ens
        .positions()
        .iter()
        .map(|&z| Complex::from_polar(T::one(), (k_e * z) % two_pi))
        .collect();
    let sys = Cascade { gamma: cfg.gamma, phase };
    let hmax = cfg.step_fraction / (T::from_usize_lossy(n) * cfg.gamma);
    let (s0, r0) = (cfg.trigger_angle.cos(), T::lit(0.5) * cfg.trigger_angle.sin());

    let tracks: Vec<Track<T>> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|traj| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(traj as u64);
            let mut y = vec![T::zero(); 3 * n + 1];
            for i in 0..n {
                let eta = two_pi * T::lit(rng.random::<f64>());
                y[i] = s0;
                y[n + i] = r0 * eta.cos();
                y[2 * n + i] = r0 * eta.sin();
            }
            let mut rk = Rk4::new(y.len());
            let mut t = T::zero();
            let mut track = Track {
                inversion: Vec::with_capacity(times.len()),
                intensity: Vec::with_capacity(times.len()),
                emitted: Vec::with_capacity(times.len()),
                spin_error: T::zero(),
                s: Vec::new(),
                sigma: Vec::new(),
            };
            for &target in times {
                if target > t {
                    let steps = ((target - t) / hmax).ceil().to_usize().unwrap_or(1).max(1);
                    let h = (target - t) / T::from_usize_lossy(steps);
                    for _ in 0..steps {
                        rk.step(&sys, &mut y, h);
                    }
                    t = target;
                }
                let inv = y[..n].iter().map(|s| T::lit(0.5) * (T::one() + *s)).sum();
                track.inversion.push(inv);
                track.intensity.push(sys.intensity(&y));
                track.emitted.push(y[3 * n]);
                track.spin_error = track.spin_error.max(spin_error(&y, n));
            }
            track.s = y[..n].to_vec();
            track.sigma = (0..n).map(|i| Complex::new(y[n + i], y[2 * n + i])).collect();
            track
        })
        .collect();

    let mut out = TwaEnsemble {
        n,
        gamma: cfg.gamma,
        seed: cfg.seed,
        trigger_angle: cfg.trigger_angle,
        step: hmax,
        times: times.to_vec(),
        inversion: Vec::with_capacity(tracks.len()),
        intensity: Vec::with_capacity(tracks.len()),
        emitted: Vec::with_capacity(tracks.len()),
        spin_length_error: Vec::with_capacity(tracks.len()),
        final_inversion: Vec::with_capacity(tracks.len()),
        final_coherence: Vec::with_capacity(tracks.len()),
    };
    for tr in tracks {
        out.inversion.push(tr.inversion);
        out.intensity.push(tr.intensity);
        out.emitted.push(tr.emitted);
        out.spin_length_error.push(tr.spin_error);
        out.final_inversion.push(tr.s);
        out.final_coherence.push(tr.sigma);
    }
    Ok(out)
}

impl<T: Real> TwaEnsemble<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trigger_angle(&self) -> T {
        self.trigger_angle
    }

    /// Largest integration step used.
    pub fn step(&self) -> T {
        self.step
    }

    pub fn trajectories(&self) -> usize {
        self.inversion.len()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn inversion(&self) -> &[Vec<T>] {
        &self.inversion
    }

    pub fn intensity(&self) -> &[Vec<T>] {
        &self.intensity
    }

    pub fn emitted(&self) -> &[Vec<T>] {
        &self.emitted
    }

    /// Largest `|s² + 4|σ|² − 1|` seen at the stored times, per trajectory.
    pub fn spin_length_error(&self) -> &[T] {
        &self.spin_length_error
    }

    /// Per-emitter `s_i` at the last stored time.
    pub fn final_inversion(&self) -> &[Vec<T>] {
        &self.final_inversion
    }

    pub fn final_coherence(&self) -> &[Vec<Complex<T>>] {
        &self.final_coherence
    }

    fn average(rows: &[Vec<T>]) -> Vec<T> {
        let m = T::from_usize_lossy(rows.len());
        (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum::<T>() / m).collect()
    }

    pub fn mean_inversion(&self) -> Vec<T> {
        Self::average(&self.inversion)
    }

    pub fn mean_intensity(&self) -> Vec<T> {
        Self::average(&self.intensity)
    }

    /// Stored time of maximal intensity, per trajectory.
    pub fn peak_delays(&self) -> Vec<T> {
        self.intensity.iter().map(|row| self.times[argmax(row)]).collect()
    }

    pub fn mean_peak_delay(&self) -> T {
        let d = self.peak_delays();
        d.iter().copied().sum::<T>() / T::from_usize_lossy(d.len())
    }

    /// Mean quanta emitted up to the last stored time.
    pub fn mean_total_emitted(&self) -> T {
        *self.mean_emitted().last().expect("non-empty")
    }

    pub fn mean_emitted(&self) -> Vec<T> {
        Self::average(&self.emitted)
    }

    /// Largest relative mismatch between emitted quanta and the drop in
    /// excitation, over trajectories.
    pub fn energy_balance_error(&self) -> T {
        let start = T::from_usize_lossy(self.n) * T::lit(0.5) * (T::one() + self.trigger_angle.cos());
        self.inversion
            .iter()
            .zip(&self.emitted)
            .map(|(inv, em)| {
                let drop = start - *inv.last().expect("non-empty");
                let out = *em.last().expect("non-empty");
                (out - drop).abs() / drop.abs().max(T::epsilon())
            })
            .fold(T::zero(), T::max)
    }

    /// Excitation number of every trajectory at delay `t`, interpolated
    /// linearly between stored times.
    pub fn inversion_at(&self, t: T) -> Result<Vec<T>> {
        let first = self.times[0];
        let last = *self.times.last().expect("non-empty");
        if !(t >= first && t <= last) {
            return Err(Error::Domain(format!("delay {t} outside integrated range [{first}, {last}]")));
        }
        let hi = self.times.partition_point(|s| *s < t).min(self.times.len() - 1);
        let lo = hi.saturating_sub(1);
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { T::one() };
        Ok(self.inversion.iter().map(|r| r[lo] + w * (r[hi] - r[lo])).collect())
    }

    /// Trajectory-averaged energy-loss spectrum at each delay. Each
    /// trajectory contributes the spectrum of the ladder level nearest its
    /// excitation number, or with `interpolate` a mixture of the two
    /// neighbouring levels weighted by distance.
    pub fn timeline_eels(
        &self,
        kernel: &ScatteringKernel<T>,
        delays: &[T],
        interpolate: bool,
    ) -> Result<Vec<EelsSpectrum<T>>> {
        if kernel.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: kernel.n() });
        }
        let top = T::from_usize_lossy(self.n);
        delays
            .iter()
            .map(|&d| {
                let mut hist = vec![T::zero(); self.n + 1];
                let share = T::one() / T::from_usize_lossy(self.trajectories());
                for m in self.inversion_at(d)? {
                    let m = m.max(T::zero()).min(top);
                    if interpolate {
                        let lo = m.floor();
                        let w = m - lo;
                        let i = lo.to_usize().expect("in range");
                        hist[i] += share * (T::one() - w);
                        if w > T::zero() {
                            hist[i + 1] += share * w;
                        }
                    } else {
                        hist[m.round().to_usize().expect("in range")] += share;
                    }
                }
                spectrum_from_ladder(kernel, &LadderState::diagonal(clean_populations(hist))?)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::exact_elements;

    fn grid(end: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| end * i as f64 / (count - 1) as f64).collect()
    }

    #[test]
    fn single_emitter_exponential() {
        let tr = dicke_cascade(1.0, &LadderState::fully_excited(1).unwrap(), &grid(5.0, 11)).unwrap();
        for (t, p) in tr.times().iter().zip(tr.populations()) {
            assert!((p[1] - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn two_emitter_closed_form() {
        let tr = dicke_cascade(2.0f64, &LadderState::fully_excited(2).unwrap(), &[0.25]).unwrap();
        let p = &tr.populations()[0];
        assert!((p[2] - 0.367879441171442).abs() < 1e-9);
        assert!((p[1] - 0.367879441171442).abs() < 1e-9);
        assert!((p[0] - 0.264241117657115).abs() < 1e-9);
    }

    #[test]
    fn cascade_conserves_and_relaxes() {
        let tr = dicke_cascade(1.0, &LadderState::fully_excited(12).unwrap(), &grid(3.0, 61)).unwrap();
        for p in tr.populations() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(p.iter().all(|v| *v >= -1e-12));
        }
        assert!(tr.mean_m().windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn populations_between_samples() {
        let tr = dicke_cascade(1.0, &LadderState::fully_excited(2).unwrap(), &[0.0, 1.0]).unwrap();
        let p = tr.populations_at(0.5).unwrap();
        assert!((p[2] - (-1.0f64).exp()).abs() < 1e-9);
        assert!(tr.populations_at(1.5).is_err());
    }

    #[test]
    fn timeline_endpoints() {
        let k = exact_elements(4, Complex::new(0.3, 0.0)).unwrap();
        let tr = dicke_cascade(1.0, &LadderState::fully_excited(4).unwrap(), &grid(40.0, 5)).unwrap();
        let sp = tr.timeline_eels(&k, &[0.0, 40.0]).unwrap();
        assert!(sp[0].iter().all(|(l, p)| l <= 0 || p < 1e-15));
        assert!(sp[1].iter().all(|(l, p)| l >= 0 || p < 1e-9));
    }

    #[test]
    fn twa_single_spin_emits_one_quantum() {
        let ens = EmitterEnsemble::equally_spaced(1, 10.0, 500.0, 10.0, 0.1, 0.0, 1.0).unwrap();
        let e = ElectronParams::new(0.7).unwrap();
        let cfg = TwaConfig::new(1.0, 1, 3);
        let tr = twa_long_sample(&ens, &e, &cfg, &grid(40.0, 401)).unwrap();
        assert!((tr.mean_total_emitted() - 1.0).abs() < 1e-3);
        assert!(tr.spin_length_error()[0] < 1e-9);
        assert!(tr.energy_balance_error() < 1e-4);
    }

    #[test]
    fn twa_reproducible() {
        let ens = EmitterEnsemble::equally_spaced(5, 10.0, 500.0, 10.0, 0.1, 0.0, 1.0).unwrap();
        let e = ElectronParams::new(0.7).unwrap();
        let cfg = TwaConfig::new(1.0, 8, 42);
        let a = twa_long_sample(&ens, &e, &cfg, &grid(10.0, 21)).unwrap();
        let b = twa_long_sample(&ens, &e, &cfg, &grid(10.0, 21)).unwrap();
        assert_eq!(a, b);
        let c = twa_long_sample(&ens, &e, &TwaConfig::new(1.0, 8, 43), &grid(10.0, 21)).unwrap();
        assert_ne!(a.inversion(), c.inversion());
    }

    #[test]
    fn twa_rejects_bad_input() {
        let ens = EmitterEnsemble::equally_spaced(2, 10.0, 500.0, 10.0, 0.1, 0.0, 1.0).unwrap();
        let e = ElectronParams::new(0.7).unwrap();
        assert!(twa_long_sample(&ens, &e, &TwaConfig::new(1.0, 0, 1), &[0.0, 1.0]).is_err());
        assert!(twa_long_sample(&ens, &e, &TwaConfig::new(-1.0, 1, 1), &[0.0, 1.0]).is_err());
        assert!(twa_long_sample(&ens, &e, &TwaConfig::new(1.0, 1, 1), &[1.0, 0.5]).is_err());
    }
}
