//! Electron–ensemble scattering kernel on the Dicke ladder.
//!
//! For uniform coupling `g` the interaction `exp(i(g S₊ b + g* S₋ b†))` acts
//! on the ladder as a spin-`N/2` rotation by angle `2|g|`. Its elements
//!
//! ```text
//! s[n][m] = i^(n−m) e^{i(n−m) arg g} Σ_k (−1)^k cos|g|^(N−(n−m)−2k) sin|g|^((n−m)+2k)
//!           × √(m! n! (N−n)! (N−m)!) / (k! (m−k)! (n−m+k)! (N−n−k)!)
//! ```
//!
//! are evaluated in sin/cos power form, which stays finite up to `|g| = π/2`
//! and for large `N`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eels::EelsSpectrum;
use crate::error::{Error, Result};
use crate::ladder::MAX_LADDER_N;
use crate::real::{DoubleWord, Real};
use crate::linalg::tridiagonal_eigen;
use crate::special::{bessel_j_sequence, LnFactorials};

/// Largest estimated rounding error of a power-sum element before the
/// kernel is rebuilt from eigenvectors.
pub const SUM_ERROR_TOL: f64 = 1e-13;
/// Tail mass dropped when truncating Bessel-approximation spectra.
pub const BESSEL_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "KernelJson", try_from = "KernelJson")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ScatteringKernel<T: Real> {
    n: usize,
    g: Complex<T>,
    /// `s[n][m]`, row-major `(N+1)×(N+1)`.
    s: Vec<Complex<T>>,
    /// `D[ℓ][m] = |s[m+ℓ][m]|²`, row-major `(2N+1)×(N+1)`, row `ℓ + N`.
    d: Vec<T>,
}

impl<T: Real> ScatteringKernel<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> Complex<T> {
        self.g
    }

    /// `⟨n|S|m⟩` without the electron-shift factor.
    pub fn element(&self, n: usize, m: usize) -> Complex<T> {
        self.s[n * (self.n + 1) + m]
    }

    /// Probability that an electron meeting ladder state `|m⟩` loses `loss` quanta.
    pub fn loss_probability(&self, loss: i64, m: usize) -> T {
        let n = self.n as i64;
        if loss < -n || loss > n || m > self.n {
            return T::zero();
        }
        self.d[(loss + n) as usize * (self.n + 1) + m]
    }

    /// Column `m` of the loss kernel over `ℓ = −N..=N`.
    pub fn loss_column(&self, m: usize) -> Vec<T> {
        let n = self.n as i64;
        (-n..=n).map(|l| self.loss_probability(l, m)).collect()
    }

    /// Loss kernel rows `ℓ = −N..=N`, columns `m = 0..=N`.
    pub fn loss_matrix(&self) -> Vec<Vec<T>> {
        self.d.chunks(self.n + 1).map(|r| r.to_vec()).collect()
    }
}

fn i_power<T: Real>(p: i64) -> Complex<T> {
    let (o, z) = (T::one(), T::zero());
    match p.rem_euclid(4) {
        0 => Complex::new(o, z),
        1 => Complex::new(z, o),
        2 => Complex::new(-o, z),
        _ => Complex::new(z, -o),
    }
}

/// Real sum multiplying `i^(n−m) e^{i(n−m) arg g}`.
///
/// The alternating sum cancels heavily for large `N`. Only its largest term
/// is taken from the log domain; the others follow from it through the exact
/// term ratios `−tan²|g| (m−k)(N−n−k) / ((k+1)(n−m+k+1))`, accumulated in
/// double-word arithmetic so that the cancellation does not eat the result.
///
/// Returns the sum and an estimate of its absolute rounding error.
fn rotation_sum<T: Real>(big_n: usize, n: usize, m: usize, trig: &Trig<T>, lnf: &LnFactorials<T>) -> (T, T) {
    let diff = n as i64 - m as i64;
    let k_min = (m as i64 - n as i64).max(0) as usize;
    let k_max = m.min(big_n - n);
    if k_min > k_max {
        return (T::zero(), T::zero());
    }
    let int = |k: i64| T::from_i64_lossy(k);
    // |term_{k+1} / term_k| without the tan² factor
    let up = |k: usize| (int((m - k) as i64) * int((big_n - n - k) as i64), int(k as i64 + 1) * int(diff + k as i64 + 1));
    let tan_sq = trig.sin_sq.div(trig.cos_sq);
    let tan_sq_v = tan_sq.value();
    let mut anchor = k_min;
    while anchor < k_max {
        let (a, b) = up(anchor);
        if !(tan_sq_v * a > b) {
            break;
        }
        anchor += 1;
    }

    let half = T::lit(0.5);
    let outer = half * (lnf.get(m) + lnf.get(n) + lnf.get(big_n - n) + lnf.get(big_n - m));
    let cos_pow = (big_n as i64 - diff - 2 * anchor as i64) as usize;
    let sin_pow = (diff + 2 * anchor as i64) as usize;
    let mut ln_term = outer
        - (lnf.get(anchor) + lnf.get(m - anchor) + lnf.get((diff + anchor as i64) as usize) + lnf.get(big_n - n - anchor));
    if cos_pow > 0 {
        ln_term += T::from_usize_lossy(cos_pow) * trig.ln_cos;
    }
    if sin_pow > 0 {
        ln_term += T::from_usize_lossy(sin_pow) * trig.ln_sin;
    }
    let magnitude = ln_term.exp();
    if magnitude == T::zero() {
        return (T::zero(), T::zero());
    }

    let one = DoubleWord::new(T::one());
    let mut total = one;
    let mut gross = T::one();
    if trig.cos_sq.hi > T::zero() {
        let mut rho = one;
        for k in anchor..k_max {
            let (a, b) = up(k);
            rho = rho.mul(tan_sq).mul_scalar(a).div_scalar(b).neg();
            if rho.hi == T::zero() {
                break;
            }
            total = total.add(rho);
            gross += rho.hi.abs();
        }
    }
    if trig.sin_sq.hi > T::zero() {
        let cot_sq = trig.cos_sq.div(trig.sin_sq);
        let mut rho = one;
        for k in (k_min + 1..=anchor).rev() {
            let (a, b) = up(k - 1);
            rho = rho.mul(cot_sq).mul_scalar(b).div_scalar(a).neg();
            if rho.hi == T::zero() {
                break;
            }
            total = total.add(rho);
            gross += rho.hi.abs();
        }
    }
    let terms = T::from_usize_lossy(k_max - k_min + 1);
    let error = magnitude * (T::lit(8.0) * terms * gross * T::epsilon() * T::epsilon() + total.value().abs() * T::epsilon());
    let sign = if anchor.is_multiple_of(2) { T::one() } else { -T::one() };
    (sign * magnitude * total.value(), error)
}

struct Trig<T> {
    ln_sin: T,
    ln_cos: T,
    sin_sq: DoubleWord<T>,
    cos_sq: DoubleWord<T>,
}

/// Exact ladder scattering matrix for uniform coupling `g`, `|g| ≤ π/2`.
pub fn exact_elements<T: Real>(n: usize, g: Complex<T>) -> Result<ScatteringKernel<T>> {
    if n == 0 {
        return Err(Error::Domain("scattering kernel needs N >= 1".into()));
    }
    if n > MAX_LADDER_N {
        return Err(Error::Capacity { n, max: MAX_LADDER_N });
    }
    let mag = g.norm();
    if !(mag <= T::FRAC_PI_2() + T::epsilon() * T::lit(4.0)) {
        return Err(Error::Domain(format!("|g| = {mag} outside [0, π/2]")));
    }
    let mag = mag.min(T::FRAC_PI_2());
    let arg = if mag > T::zero() { g.arg() } else { T::zero() };
    let (sin, cos) = mag.sin_cos();
    let trig = Trig {
        ln_sin: sin.ln(),
        ln_cos: cos.ln(),
        sin_sq: DoubleWord::square(sin),
        cos_sq: DoubleWord::square(cos),
    };
    let lnf = LnFactorials::<T>::new(n);

    let tol = T::lit(SUM_ERROR_TOL);
    let columns: Option<Vec<Vec<Complex<T>>>> = (0..=n)
        .into_par_iter()
        .map(|m| {
            (0..=n)
                .map(|row| {
                    let diff = row as i64 - m as i64;
                    let (value, error) = rotation_sum(n, row, m, &trig, &lnf);
                    (error <= tol).then(|| {
                        let phase = Complex::from_polar(T::one(), T::from_i64_lossy(diff) * arg);
                        i_power::<T>(diff) * phase * value
                    })
                })
                .collect()
        })
        .collect();

    let dim = n + 1;
    let s = match columns {
        Some(columns) => {
            let mut s = vec![Complex::new(T::zero(), T::zero()); dim * dim];
            for (m, col) in columns.iter().enumerate() {
                for (row, v) in col.iter().enumerate() {
                    s[row * dim + m] = *v;
                }
            }
            s
        }
        None => rotation_by_eigenvectors(n, mag, arg)?,
    };
    let d = loss_kernel(n, &s);
    Ok(ScatteringKernel { n, g, s, d })
}

/// `exp(i|g|(S₊ + S₋))` with the raising phases, from the eigenvectors of
/// the real tridiagonal ladder generator. Used where the power sum cancels
/// beyond what double-word arithmetic resolves (large `N`).
fn rotation_by_eigenvectors<T: Real>(n: usize, mag: T, arg: T) -> Result<Vec<Complex<T>>> {
    let dim = n + 1;
    let off: Vec<T> = (0..n).map(|m| T::from_usize_lossy((m + 1) * (n - m)).sqrt()).collect();
    let (vals, vecs) = tridiagonal_eigen(&vec![T::zero(); dim], &off)
        .ok_or(Error::NonConvergence { iterations: 60, residual: f64::NAN })?;
    let weights: Vec<Complex<T>> = vals.iter().map(|&l| Complex::from_polar(T::one(), mag * l)).collect();
    // component-major copy so the inner sum runs over contiguous memory
    let comp: Vec<Vec<T>> = (0..dim).map(|i| vecs.iter().map(|v| v[i]).collect()).collect();
    let rows: Vec<Vec<Complex<T>>> = (0..dim)
        .into_par_iter()
        .map(|row| {
            (0..dim)
                .map(|m| {
                    let (a, b) = (&comp[row], &comp[m]);
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (k, w) in weights.iter().enumerate() {
                        acc += *w * (a[k] * b[k]);
                    }
                    let diff = row as i64 - m as i64;
                    acc * Complex::from_polar(T::one(), T::from_i64_lossy(diff) * arg)
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn loss_kernel<T: Real>(n: usize, s: &[Complex<T>]) -> Vec<T> {
    let dim = n + 1;
    let mut d = vec![T::zero(); (2 * n + 1) * dim];
    for m in 0..dim {
        for row in 0..dim {
            let loss = row as i64 - m as i64;
            d[(loss + n as i64) as usize * dim + m] = s[row * dim + m].norm_sqr();
        }
    }
    d
}

/// PINEM-like spectrum `P_ℓ = J_ℓ(2|g|√(Nm − m²))²` valid far from the ladder edges.
pub fn bessel_approx_spectrum<T: Real>(n: usize, m: usize, g_mag: T) -> Result<EelsSpectrum<T>> {
    if m == 0 || m >= n {
        return Err(Error::Domain(format!(
            "Bessel approximation needs 0 < m < N (got m = {m}, N = {n}); use the exact kernel"
        )));
    }
    if !(g_mag >= T::zero() && g_mag.is_finite()) {
        return Err(Error::Domain(format!("coupling magnitude must be nonnegative, got {g_mag}")));
    }
    let nm = T::from_usize_lossy(n * m - m * m);
    let x = T::lit(2.0) * g_mag * nm.sqrt();
    let j = bessel_j_sequence(x, n);
    // smallest cutoff L with two-sided tail mass below tolerance
    let mut covered = j[0] * j[0];
    let mut cutoff = 0usize;
    while cutoff < n && T::one() - covered >= T::lit(BESSEL_TAIL_TOL) {
        cutoff += 1;
        covered += T::lit(2.0) * j[cutoff] * j[cutoff];
    }
    let big_n = n as i64;
    let mut probs = vec![T::zero(); 2 * n + 1];
    for l in -(cutoff as i64)..=(cutoff as i64) {
        let v = j[l.unsigned_abs() as usize];
        probs[(l + big_n) as usize] = v * v;
    }
    let total: T = probs.iter().copied().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    EelsSpectrum::new(-big_n, probs)
}

/// Wire format for fixtures: `N`, `g` as `[re, im]`, elements row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub g: [f64; 2],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl<T: Real> From<ScatteringKernel<T>> for KernelJson {
    fn from(k: ScatteringKernel<T>) -> Self {
        Self {
            n: k.n,
            g: [k.g.re.as_f64(), k.g.im.as_f64()],
            re: k.s.iter().map(|v| v.re.as_f64()).collect(),
            im: k.s.iter().map(|v| v.im.as_f64()).collect(),
        }
    }
}

impl<T: Real> TryFrom<KernelJson> for ScatteringKernel<T> {
    type Error = Error;

    fn try_from(j: KernelJson) -> Result<Self> {
        let dim = j.n + 1;
        if j.re.len() != dim * dim || j.im.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: j.re.len().min(j.im.len()) });
        }
        let s: Vec<Complex<T>> = j.re.iter().zip(&j.im).map(|(a, b)| Complex::new(T::lit(*a), T::lit(*b))).collect();
        let d = loss_kernel(j.n, &s);
        Ok(Self { n: j.n, g: Complex::new(T::lit(j.g[0]), T::lit(j.g[1])), s, d })
    }
}
