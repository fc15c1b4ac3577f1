//! Invariant suite at reduced scale.

use num_complex::Complex;
use sreels_core::dynamics::{dicke_cascade, twa_long_sample, TwaConfig};
use sreels_core::eels::spectrum_from_ladder;
use sreels_core::joint::{full_evolution, EmitterInput};
use sreels_core::reconstruct::recover_populations;
use sreels_core::scattering::exact_elements;
use sreels_core::special::bessel_j;
use sreels_core::{CouplingSet, EelsSpectrum, ElectronComb, ElectronParams, EmitterEnsemble, LadderState};

type Check = fn() -> sreels_core::Result<(bool, String)>;

fn unitarity() -> sreels_core::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 10, 20] {
        for g in [0.1, 0.5, 1.0] {
            let k = exact_elements(n, Complex::new(g, 0.0))?;
            for m in 0..=n {
                let s: f64 = (0..=n).map(|r| k.element(r, m).norm_sqr()).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
    }
    Ok((worst < 1e-9, format!("worst column-norm error {worst:.2e}")))
}

fn oracle() -> sreels_core::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in [2, 3, 4] {
        let g = 0.5;
        let k = exact_elements(n, Complex::new(g, 0.0))?;
        let coupl = CouplingSet::from_values(vec![Complex::new(g, 0.0); n]);
        let phases = vec![0.0; n];
        for m in 0..=n {
            let st = LadderState::fock(n, m)?;
            let joint = full_evolution(&coupl, EmitterInput::Ladder(&st), &ElectronComb::delta())?;
            for fin in 0..=n {
                let a = joint.ladder_amplitude(fin, fin as i64 - m as i64, &phases)?;
                worst = worst.max((a - k.element(fin, m)).norm());
            }
        }
    }
    Ok((worst < 1e-8, format!("worst amplitude difference {worst:.2e}")))
}

fn spectrum_support() -> sreels_core::Result<(bool, String)> {
    let k = exact_elements(10, Complex::new(0.5, 0.0))?;
    let sp = spectrum_from_ladder(&k, &LadderState::ground(10)?)?;
    let total: f64 = sp.probabilities().iter().sum();
    let gain: f64 = sp.iter().filter(|(l, _)| *l < 0).map(|(_, p)| p).sum();
    Ok(((total - 1.0).abs() < 1e-10 && gain == 0.0, format!("ΣP - 1 = {:.1e}, gain mass {gain:.1e}", total - 1.0)))
}

fn pinem_identity() -> sreels_core::Result<(bool, String)> {
    let x = 0.5f64;
    let probs: Vec<f64> = (-30..=30).map(|l| bessel_j(l, 2.0 * x).powi(2)).collect();
    let total: f64 = probs.iter().sum();
    let sp = EelsSpectrum::new(-30, probs.into_iter().map(|p| p / total).collect())?;
    let err = (sp.effective_coupling() - x).abs();
    Ok((err < 1e-10, format!("g_eff error {err:.2e}")))
}

fn round_trip() -> sreels_core::Result<(bool, String)> {
    let n = 10;
    let k = exact_elements(n, Complex::new(0.2, 0.0))?;
    let raw: Vec<f64> = (0..=n).map(|m| 1.0 + ((m * 7) % 5) as f64).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let sp = spectrum_from_ladder(&k, &LadderState::diagonal(p.clone())?)?;
    let rep = recover_populations(sp.on_range(-(n as i64), n as i64)?.probabilities(), &k, 0.0)?;
    let l1: f64 = rep.populations.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
    Ok((l1 < 1e-6, format!("L1 error {l1:.2e}")))
}

fn dicke_two() -> sreels_core::Result<(bool, String)> {
    let (gamma, t) = (1.0, 0.7);
    let tr = dicke_cascade(gamma, &LadderState::fully_excited(2)?, &[t])?;
    let p = &tr.populations()[0];
    let p2 = (-2.0 * gamma * t).exp();
    let p1 = 2.0 * gamma * t * (-2.0 * gamma * t).exp();
    let err = (p[2] - p2).abs().max((p[1] - p1).abs()).max((p[0] - (1.0 - p1 - p2)).abs());
    Ok((err < 1e-8, format!("max population error {err:.2e}")))
}

fn twa_spin_length() -> sreels_core::Result<(bool, String)> {
    let e = ElectronParams::new(0.7)?;
    let ens = EmitterEnsemble::equally_spaced(4, 10.0, 500.0, 10.0, 0.1, 0.0, 1.5)?;
    let times: Vec<f64> = (0..=40).map(|i| 250.0 * i as f64).collect();
    let run = twa_long_sample(&ens, &e, &TwaConfig::new(1e-3, 4, 1), &times)?;
    let worst = run.spin_length_error().iter().copied().fold(0.0, f64::max);
    Ok((worst < 1e-6, format!("worst spin-length drift {worst:.2e}")))
}

/// Runs every check, printing one line each; returns the number of failures.
pub fn run() -> usize {
    let checks: [(&str, Check); 7] = [
        ("unitarity", unitarity),
        ("ladder vs full-space oracle", oracle),
        ("ground-state spectrum support", spectrum_support),
        ("PINEM g_eff identity", pinem_identity),
        ("reconstruction round trip", round_trip),
        ("two-emitter cascade", dicke_two),
        ("TWA spin length", twa_spin_length),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let (ok, detail) = check().unwrap_or_else(|e| (false, e.to_string()));
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    failed
}
