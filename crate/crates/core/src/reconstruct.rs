//! Recovery of ladder populations from an energy-loss spectrum.
//!
//! The loss kernel spans many orders of magnitude: at small `|g|` the
//! extreme sidebands of high ladder levels are down by `sin^{2N}|g|`. Those
//! tiny entries carry most of the information separating level `m` from
//! level `N − m`, so every sideband is weighted by the inverse of its row
//! maximum (a relative-error fit). The weighted problem
//! `min ‖W(D p − P)‖² + λ‖p‖²` is solved over the probability simplex by an
//! active-set method (Lawson–Hanson adapted to `Σp = 1`) whose face
//! subproblems use Householder QR. Each accepted step moves along a feasible
//! segment towards the minimiser of the current face, so the objective never
//! increases.

use serde::Serialize;

use crate::eels::EelsSpectrum;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, singular_values, Dense};
use crate::real::Real;
use crate::scattering::ScatteringKernel;

/// Condition number above which a recovery is flagged unreliable.
pub const KAPPA_WARN: f64 = 1e8;

/// Loss kernel as a dense matrix: rows `ℓ = −N..=N`, columns `m = 0..=N`,
/// together with the per-row weights of the relative-error fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    n: usize,
    raw: Dense<T>,
    weights: Vec<T>,
    weighted: Dense<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        2 * self.n + 1
    }

    pub fn cols(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.raw.at(row, col)
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.rows()).map(|r| self.at(r, col)).collect()
    }

    /// Row weights `1 / max_m D[ℓ][m]`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Predicted spectrum `D p`.
    pub fn apply(&self, p: &[T]) -> Vec<T> {
        self.raw.apply(p)
    }

    fn weigh(&self, measured: &[T]) -> Vec<T> {
        measured.iter().zip(&self.weights).map(|(p, w)| *p * *w).collect()
    }

    /// `σ_max / σ_min` of the weighted kernel; infinite when rank deficient.
    pub fn condition_number(&self) -> T {
        let sv = singular_values(&self.weighted);
        let lo = *sv.last().expect("non-empty");
        if lo <= T::zero() {
            T::infinity()
        } else {
            sv[0] / lo
        }
    }
}

pub fn build_kernel_matrix<T: Real>(kernel: &ScatteringKernel<T>) -> Result<KernelMatrix<T>> {
    if kernel.coupling().norm() == T::zero() {
        return Err(Error::SingularKernel(
            "zero coupling: every ladder level gives the same delta spectrum".into(),
        ));
    }
    let n = kernel.n();
    let (rows, cols) = (2 * n + 1, n + 1);
    let raw = Dense { rows, cols, data: kernel.loss_matrix().into_iter().flatten().collect() };
    let weights: Vec<T> = (0..rows)
        .map(|r| {
            let top = (0..cols).map(|c| raw.at(r, c)).fold(T::zero(), T::max);
            if top > T::zero() {
                T::one() / top
            } else {
                T::zero()
            }
        })
        .collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::SingularKernel("loss kernel row underflows".into()));
    }
    let mut weighted = raw.clone();
    for r in 0..rows {
        for c in 0..cols {
            weighted.set(r, c, raw.at(r, c) * weights[r]);
        }
    }
    Ok(KernelMatrix { n, raw, weights, weighted })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReconstructionFlags {
    /// The unconstrained least-squares inverse has negative entries.
    pub clipped_negatives: bool,
    pub rank_deficient: bool,
    /// Condition number above [`KAPPA_WARN`].
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct ReconstructionReport<T> {
    #[serde(rename = "p")]
    pub populations: Vec<T>,
    /// Weighted residual `‖W(D p − P)‖₂`.
    pub residual: T,
    /// Unweighted residual `‖D p − P‖₂`.
    pub raw_residual: T,
    pub kappa: T,
    pub lambda: T,
    pub flags: ReconstructionFlags,
    pub iterations: usize,
    pub kkt_residual: T,
    /// Objective after every accepted step.
    #[serde(skip)]
    pub objective_history: Vec<T>,
}

struct Problem<'a, T> {
    a: &'a Dense<T>,
    b: Vec<T>,
    lambda: T,
}

impl<T: Real> Problem<'_, T> {
    fn residual(&self, p: &[T]) -> Vec<T> {
        self.a.apply(p).iter().zip(&self.b).map(|(x, y)| *x - *y).collect()
    }

    fn objective(&self, p: &[T]) -> T {
        let r: T = self.residual(p).iter().map(|v| *v * *v).sum();
        r + self.lambda * p.iter().map(|v| *v * *v).sum::<T>()
    }

    /// Half the objective gradient.
    fn gradient(&self, p: &[T]) -> Vec<T> {
        let r = self.residual(p);
        (0..self.a.cols)
            .map(|j| (0..self.a.rows).map(|i| self.a.at(i, j) * r[i]).sum::<T>() + self.lambda * p[j])
            .collect()
    }

    /// Minimiser on the face spanned by `active` with only `Σx = 1` imposed.
    /// The last active index absorbs the constraint:
    /// `x = e_last + Σ_a y_a (e_a − e_last)`.
    fn face_minimiser(&self, active: &[usize]) -> Option<Vec<T>> {
        let k = active.len();
        if k == 1 {
            return Some(vec![T::one()]);
        }
        let last = active[k - 1];
        let rows = self.a.rows + if self.lambda > T::zero() { k } else { 0 };
        let mut m = Dense::zeros(rows, k - 1);
        let mut rhs = vec![T::zero(); rows];
        for i in 0..self.a.rows {
            let base = self.a.at(i, last);
            for (c, &j) in active[..k - 1].iter().enumerate() {
                m.set(i, c, self.a.at(i, j) - base);
            }
            rhs[i] = self.b[i] - base;
        }
        if self.lambda > T::zero() {
            let s = self.lambda.sqrt();
            for c in 0..k - 1 {
                m.set(self.a.rows + c, c, s);
                m.set(self.a.rows + k - 1, c, -s);
            }
            rhs[self.a.rows + k - 1] = -s;
        }
        let y = least_squares(&m, &rhs)?;
        let mut x = y.clone();
        x.push(T::one() - y.iter().copied().sum::<T>());
        Some(x)
    }
}

struct Solution<T> {
    p: Vec<T>,
    iterations: usize,
    kkt: T,
    history: Vec<T>,
}

fn simplex_least_squares<T: Real>(prob: &Problem<'_, T>) -> Result<Solution<T>> {
    let k = prob.a.cols;
    let scale = prob.a.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let scale = (scale * scale * T::from_usize_lossy(prob.a.rows) + prob.lambda).max(T::epsilon());

    // start at the best single vertex
    let vertex = |j: usize| {
        let mut e = vec![T::zero(); k];
        e[j] = T::one();
        prob.objective(&e)
    };
    let start = (0..k)
        .map(|j| (j, vertex(j)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
        .expect("non-empty")
        .0;
    let mut p = vec![T::zero(); k];
    p[start] = T::one();
    let mut active = vec![start];
    let mut history = vec![prob.objective(&p)];
    let cap = 50 * k + 100;
    // levels whose addition failed to lower the objective; cleared on progress
    let mut tabu = vec![false; k];
    let mut best = history[0];
    let mut last_added = None;

    for iteration in 0..cap {
        // reach the minimiser of the current face while staying feasible
        loop {
            let x = prob
                .face_minimiser(&active)
                .ok_or_else(|| Error::SingularKernel("face subproblem is rank deficient; add regularisation".into()))?;
            if x.iter().all(|v| *v > T::zero()) {
                for (a, &i) in active.iter().enumerate() {
                    p[i] = x[a];
                }
                break;
            }
            let mut alpha = T::one();
            for (a, &i) in active.iter().enumerate() {
                if x[a] <= T::zero() {
                    alpha = alpha.min(p[i] / (p[i] - x[a]));
                }
            }
            for (a, &i) in active.iter().enumerate() {
                p[i] = p[i] + alpha * (x[a] - p[i]);
            }
            let before = active.len();
            active.retain(|&i| p[i] > T::epsilon());
            for (i, v) in p.iter_mut().enumerate() {
                if !active.contains(&i) {
                    *v = T::zero();
                }
            }
            if active.is_empty() {
                return Err(Error::NonConvergence { iterations: iteration, residual: f64::NAN });
            }
            if active.len() == before {
                break;
            }
        }
        let total: T = p.iter().copied().sum();
        p.iter_mut().for_each(|v| *v /= total);
        let objective = prob.objective(&p);
        history.push(objective);
        if objective < best {
            best = objective;
            tabu.fill(false);
        } else if let Some(j) = last_added {
            tabu[j] = true;
        }

        let g = prob.gradient(&p);
        let mu = active.iter().map(|&i| g[i]).sum::<T>() / T::from_usize_lossy(active.len());
        let spread = active.iter().map(|&i| (g[i] - mu).abs()).fold(T::zero(), T::max);
        let mut candidates: Vec<usize> = (0..k).filter(|&i| !active.contains(&i) && !tabu[i] && mu - g[i] > T::zero()).collect();
        candidates.sort_by(|&a, &b| g[a].partial_cmp(&g[b]).expect("finite"));
        let violation = (0..k)
            .filter(|i| !active.contains(i))
            .map(|j| (mu - g[j]).max(T::zero()))
            .fold(T::zero(), T::max);
        let kkt = violation.max(spread) / scale;
        // Near-null directions of the kernel give multiplier gaps at rounding
        // level, so any positive gap makes a candidate; it joins only if it
        // is positive at the enlarged face's minimiser.
        let accepted = candidates.into_iter().find_map(|j| {
            let mut trial = active.clone();
            trial.push(j);
            match prob.face_minimiser(&trial) {
                Some(x) if *x.last().expect("non-empty") > T::zero() => Some((j, trial)),
                _ => None,
            }
        });
        match accepted {
            Some((j, trial)) => {
                active = trial;
                last_added = Some(j);
            }
            None => return Ok(Solution { p, iterations: iteration + 1, kkt, history }),
        }
    }
    Err(Error::NonConvergence { iterations: cap, residual: f64::NAN })
}

fn check_len<T: Real>(d: &KernelMatrix<T>, measured: &[T]) -> Result<()> {
    if measured.len() != d.rows() {
        return Err(Error::DimensionMismatch { expected: d.rows(), found: measured.len() });
    }
    if measured.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState("measured spectrum has non-finite entries".into()));
    }
    Ok(())
}

/// Unconstrained, unregularised weighted least-squares inverse.
pub fn unregularized_inverse<T: Real>(d: &KernelMatrix<T>, measured: &[T]) -> Result<Vec<T>> {
    check_len(d, measured)?;
    least_squares(&d.weighted, &d.weigh(measured)).ok_or_else(|| Error::SingularKernel("loss kernel is rank deficient".into()))
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// Populations from measured loss probabilities over `ℓ = −N..=N`
/// (need not be exactly normalised).
pub fn recover_populations<T: Real>(
    measured: &[T],
    kernel: &ScatteringKernel<T>,
    lambda: T,
) -> Result<ReconstructionReport<T>> {
    let d = build_kernel_matrix(kernel)?;
    recover_with_matrix(&d, measured, lambda)
}

/// As [`recover_populations`] with a prebuilt kernel matrix.
pub fn recover_with_matrix<T: Real>(d: &KernelMatrix<T>, measured: &[T], lambda: T) -> Result<ReconstructionReport<T>> {
    if !(lambda >= T::zero() && lambda.is_finite()) {
        return Err(Error::Domain(format!("regularisation weight must be nonnegative, got {lambda}")));
    }
    check_len(d, measured)?;
    let kappa = d.condition_number();
    let prob = Problem { a: &d.weighted, b: d.weigh(measured), lambda };
    let sol = simplex_least_squares(&prob)?;
    let clipped_negatives = unregularized_inverse(d, measured)
        .map(|x| x.iter().any(|v| *v < T::zero()))
        .unwrap_or(true);
    let flags = ReconstructionFlags {
        clipped_negatives,
        rank_deficient: !kappa.is_finite() || kappa > T::one() / T::epsilon(),
        ill_conditioned: kappa > T::lit(KAPPA_WARN),
    };
    let raw: Vec<T> = d.apply(&sol.p).iter().zip(measured).map(|(a, b)| *a - *b).collect();
    Ok(ReconstructionReport {
        residual: norm(&prob.residual(&sol.p)),
        raw_residual: norm(&raw),
        populations: sol.p,
        kappa,
        lambda,
        flags,
        iterations: sol.iterations,
        kkt_residual: sol.kkt,
        objective_history: sol.history,
    })
}

/// Same as [`recover_populations`] for a spectrum on any loss range.
pub fn recover_from_spectrum<T: Real>(
    spectrum: &EelsSpectrum<T>,
    kernel: &ScatteringKernel<T>,
    lambda: T,
) -> Result<ReconstructionReport<T>> {
    let n = kernel.n() as i64;
    let aligned = spectrum
        .on_range(-n, n)
        .map_err(|_| Error::DimensionMismatch { expected: (2 * n + 1) as usize, found: spectrum.probabilities().len() })?;
    recover_populations(aligned.probabilities(), kernel, lambda)
}

/// Picks `λ` by the discrepancy principle for relative noise level `noise`:
/// the largest `λ` whose weighted residual stays within `noise · ‖W P‖`.
pub fn recover_with_noise_level<T: Real>(
    measured: &[T],
    kernel: &ScatteringKernel<T>,
    noise: T,
) -> Result<ReconstructionReport<T>> {
    if !(noise >= T::zero() && noise.is_finite()) {
        return Err(Error::Domain(format!("noise level must be nonnegative, got {noise}")));
    }
    let d = build_kernel_matrix(kernel)?;
    let base = recover_with_matrix(&d, measured, T::zero())?;
    let target = noise * norm(&d.weigh(measured));
    if noise == T::zero() || base.residual >= target {
        return Ok(base);
    }
    // bisection on log10 λ
    let ten = T::lit(10.0);
    let (mut lo, mut hi) = (T::lit(-14.0), T::lit(2.0));
    let top = recover_with_matrix(&d, measured, ten.powf(hi))?;
    if top.residual <= target {
        return Ok(top);
    }
    let mut best = base;
    for _ in 0..40 {
        let mid = T::lit(0.5) * (lo + hi);
        let trial = recover_with_matrix(&d, measured, ten.powf(mid))?;
        if trial.residual <= target {
            lo = mid;
            best = trial;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eels::spectrum_from_ladder;
    use crate::ladder::LadderState;
    use crate::scattering::exact_elements;
    use num_complex::Complex;

    #[test]
    fn zero_coupling_is_singular() {
        let k = exact_elements(4, Complex::new(0.0f64, 0.0)).unwrap();
        assert!(matches!(build_kernel_matrix(&k), Err(Error::SingularKernel(_))));
    }

    #[test]
    fn single_emitter_columns() {
        let k = exact_elements(1, Complex::new(0.5f64, 0.0)).unwrap();
        let d = build_kernel_matrix(&k).unwrap();
        let col = d.column(0);
        assert_eq!(col[0], 0.0);
        assert!((col[1] - 0.5f64.cos().powi(2)).abs() < 1e-15);
        assert!((col[2] - 0.5f64.sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn recovers_ladder_eigenstate() {
        let k = exact_elements(8, Complex::new(0.3f64, 0.0)).unwrap();
        for m in [0usize, 3, 8] {
            let sp = spectrum_from_ladder(&k, &LadderState::fock(8, m).unwrap()).unwrap();
            let rep = recover_from_spectrum(&sp, &k, 0.0).unwrap();
            for (i, p) in rep.populations.iter().enumerate() {
                let want = if i == m { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-8, "m = {m}, i = {i}: {p}");
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let k = exact_elements(10, Complex::new(0.4f64, 0.0)).unwrap();
        // inconsistent data: a spiky vector that no population reproduces
        let measured: Vec<f64> = (0..21).map(|i| if i % 3 == 0 { 0.15 } else { 0.01 }).collect();
        let rep = recover_populations(&measured, &k, 0.0).unwrap();
        for w in rep.objective_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{w:?}");
        }
        assert!(rep.populations.iter().all(|p| *p >= 0.0));
        assert!((rep.populations.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(rep.residual >= 0.0 && rep.kkt_residual < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = exact_elements(2, Complex::new(0.4f64, 0.0)).unwrap();
        assert!(recover_populations(&[0.2, 0.2, 0.6], &k, 0.0).is_err());
        assert!(recover_populations(&[0.2, 0.2, 0.2, 0.2, 0.2], &k, -1.0).is_err());
    }
}
