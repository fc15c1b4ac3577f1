//! Special functions: log-gamma, modified Bessel functions of the second
//! kind (orders 0 and 1) and integer-order Bessel functions of the first kind.

use crate::error::{Error, Result};
use crate::real::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x < T::lit(0.5) {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEFFS[0]);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G + 0.5);
    T::lit(0.5) * (T::TAU()).ln() + (x + T::lit(0.5)) * t.ln() - t + acc.ln()
}

/// `ln n!`.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < 2 {
        T::zero()
    } else {
        ln_gamma(T::from_usize_lossy(n + 1))
    }
}

/// `ln C(n, k)`; `k > n` yields `-inf`.
pub fn ln_binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::neg_infinity();
    }
    ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)
}

/// Table of `ln k!` for `k = 0..=n`, built once per kernel.
#[derive(Debug, Clone)]
pub struct LnFactorials<T> {
    table: Vec<T>,
}

impl<T: Real> LnFactorials<T> {
    pub fn new(n: usize) -> Self {
        Self { table: (0..=n).map(ln_factorial).collect() }
    }

    #[inline]
    pub fn get(&self, k: usize) -> T {
        self.table[k]
    }
}

fn check_positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}: argument must be positive and finite, got {x}")))
    }
}

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0<T: Real>(x: T) -> Result<T> {
    check_positive("bessel_k0", x)?;
    Ok(bessel_k01(x).0)
}

/// Modified Bessel function of the second kind, order one.
pub fn bessel_k1<T: Real>(x: T) -> Result<T> {
    check_positive("bessel_k1", x)?;
    Ok(bessel_k01(x).1)
}

/// `(K0(x), K1(x))` for `x > 0`: power series below 2, Steed's continued
/// fraction (Temme's normalisation) above.
pub(crate) fn bessel_k01<T: Real>(x: T) -> (T, T) {
    if x <= T::lit(2.0) {
        k01_series(x)
    } else {
        k01_continued_fraction(x)
    }
}

fn k01_series<T: Real>(x: T) -> (T, T) {
    let eps = T::epsilon() * T::lit(0.25);
    let y = x * x * T::lit(0.25);
    let ln_half = (x * T::lit(0.5)).ln();
    let gamma = T::lit(EULER_GAMMA);

    // I0, and the harmonic-weighted tail for K0
    let mut i0 = T::one();
    let mut tail0 = T::zero();
    // I1/(x/2) and the digamma-weighted tail for K1
    let mut i1 = T::one();
    let mut tail1 = T::lit(1.0) - T::lit(2.0) * gamma; // psi(1) + psi(2)

    let mut t0 = T::one(); // y^k / (k!)^2
    let mut t1 = T::one(); // y^k / (k! (k+1)!)
    let mut harmonic = T::zero(); // H_k
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = T::from_usize_lossy(k);
        t0 = t0 * y / (kf * kf);
        t1 = t1 * y / (kf * (kf + T::one()));
        harmonic += T::one() / kf;
        let h_next = harmonic + T::one() / (kf + T::one());
        i0 += t0;
        tail0 += t0 * harmonic;
        i1 += t1;
        tail1 += t1 * (h_next + harmonic - T::lit(2.0) * gamma);
        if (t0 * (harmonic + T::one()) < eps * i0 && t1 * (h_next + T::one()) < eps * i1) || k > 200 {
            break;
        }
    }
    let k0 = -(ln_half + gamma) * i0 + tail0;
    let half_x = x * T::lit(0.5);
    let k1 = T::one() / x + ln_half * half_x * i1 - T::lit(0.5) * half_x * tail1;
    (k0, k1)
}

fn k01_continued_fraction<T: Real>(x: T) -> (T, T) {
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut b = two * (T::one() + x);
    let mut d = T::one() / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = T::lit(0.25);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;
    for i in 2..10_000usize {
        let fi = T::from_usize_lossy(i);
        a -= two * (fi - T::one());
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += two;
        d = T::one() / (b + a * d);
        delh = (b * d - T::one()) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < eps {
            break;
        }
    }
    h = a1 * h;
    let k0 = (T::PI() / (two * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + T::lit(0.5) - h) / x;
    (k0, k1)
}

/// `J_0(x) ..= J_nmax(x)` for `x >= 0` by Miller's backward recurrence,
/// normalised with `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_sequence<T: Real>(x: T, nmax: usize) -> Vec<T> {
    let mut out = vec![T::zero(); nmax + 1];
    if x == T::zero() {
        out[0] = T::one();
        return out;
    }
    let x = x.abs();
    let scale = x.as_f64().ceil() as usize;
    let top = nmax.max(scale);
    let mut start = top + 30 + ((50 * top.max(1)) as f64).sqrt() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let big = T::max_value().sqrt();
    let tiny = T::one() / big;

    let mut next = T::zero(); // J_{k+1}
    let mut cur = tiny; // J_k
    let mut norm = T::zero();
    for k in (1..=start).rev() {
        if k <= nmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += T::lit(2.0) * cur;
        }
        let prev = T::from_usize_lossy(2 * k) / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > big {
            cur = cur * tiny;
            next = next * tiny;
            norm = norm * tiny;
            for v in out.iter_mut() {
                *v = *v * tiny;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in out.iter_mut() {
        *v = *v / norm;
    }
    out
}

/// `J_n(x)` for integer `n` (negative orders via `J_{-n} = (-1)^n J_n`).
pub fn bessel_j<T: Real>(n: i64, x: T) -> T {
    let order = n.unsigned_abs() as usize;
    let mut v = bessel_j_sequence(x.abs(), order)[order];
    if n < 0 && order % 2 == 1 {
        v = -v;
    }
    if x < T::zero() && order % 2 == 1 {
        v = -v;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..=20usize {
            fact *= n as f64;
            let got: f64 = ln_factorial(n);
            assert!((got - fact.ln()).abs() < 1e-13 * fact.ln().max(1.0), "n = {n}");
        }
        // Γ(1/2) = √π
        let half: f64 = ln_gamma(0.5);
        assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_binomial_small_cases() {
        let v: f64 = ln_binomial(10, 3);
        assert!((v.exp() - 120.0).abs() < 1e-10);
        assert_eq!(ln_binomial::<f64>(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn k0_k1_at_one() {
        assert!((bessel_k0(1.0f64).unwrap() - 0.421_024_438_241).abs() < 1e-12);
        assert!((bessel_k1(1.0f64).unwrap() - 0.601_907_230_197).abs() < 1e-12);
    }

    #[test]
    fn k1_small_argument_limit() {
        let x = 1e-6f64;
        let v = bessel_k1(x).unwrap() * x;
        assert!((v - 1.0).abs() < 1e-5);
    }

    #[test]
    fn k_domain_errors() {
        assert!(matches!(bessel_k0(0.0f64), Err(Error::Domain(_))));
        assert!(matches!(bessel_k1(-1.0f64), Err(Error::Domain(_))));
        assert!(bessel_k0(f64::NAN).is_err());
    }

    #[test]
    fn k_continuous_across_branch_point() {
        let (a0, a1) = k01_series(2.0f64);
        let (b0, b1) = k01_continued_fraction(2.0f64);
        assert!((a0 - b0).abs() < 1e-14);
        assert!((a1 - b1).abs() < 1e-14);
    }

    #[test]
    fn k_is_decreasing() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for i in 0..400 {
            let x = 1e-3 * 1.03f64.powi(i);
            let v = bessel_k01(x);
            assert!(v.0 < prev.0 && v.1 < prev.1, "x = {x}");
            prev = v;
        }
    }

    #[test]
    fn j_values_at_one() {
        let j = bessel_j_sequence(1.0f64, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(-1, 1.0f64) + j[1]).abs() < 1e-15);
    }

    #[test]
    fn j_squares_sum_to_one() {
        for &x in &[0.1f64, 1.0, 5.0, 40.0] {
            let j = bessel_j_sequence(x, 200);
            let total: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-13, "x = {x}: {total}");
        }
    }

    #[test]
    fn f32_is_usable() {
        let v = bessel_k0(1.0f32).unwrap();
        assert!((v - 0.421_024_4).abs() < 1e-5);
    }
}
