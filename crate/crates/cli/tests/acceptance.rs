//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero when a
//! criterion fails that is not listed as unattainable.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sreels_core::dynamics::{dicke_cascade, twa_long_sample, TwaConfig};
use sreels_core::eels::{spectrum_from_ladder, total_variation};
use sreels_core::excitation::{dipole_map, randomized_positions, resonance_angles, sweep, CouplingChoice, Pathway, SweepConfig};
use sreels_core::joint::{full_evolution, EmitterInput};
use sreels_core::ladder::ladder_from_pulse;
use sreels_core::reconstruct::{build_kernel_matrix, recover_with_matrix, recover_with_noise_level, unregularized_inverse};
use sreels_core::scattering::{bessel_approx_spectrum, exact_elements};
use sreels_core::special::bessel_j;
use sreels_core::{CouplingSet, EelsSpectrum, ElectronComb, ElectronParams, EmitterEnsemble, LadderState, SweepResult};

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn kernel(n: usize, g: f64) -> Result<sreels_core::ScatteringKernel, String> {
    exact_elements(n, Complex::new(g, 0.0)).map_err(err)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 10, 20, 40, 60] {
        for g in [0.1, 0.5, 1.0, 1.5] {
            let k = kernel(n, g)?;
            for m in 0..=n {
                let s: f64 = (0..=n).map(|r| k.element(r, m).norm_sqr()).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-9 && secs < 10.0, format!("max |Σ|s|² − 1| = {worst:.2e}, {secs:.1} s")))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let e = ElectronParams::new(0.7).map_err(err)?;
    let mut worst = 0.0f64;
    for n in 2..=8 {
        let ens = EmitterEnsemble::equally_spaced(n, 10.0, 500.0, 10.0, 0.1, 0.0, 1.5).map_err(err)?;
        for g in [0.1, 0.5, 1.0] {
            let coupl = CouplingSet::uniform(g, &ens, &e);
            let phases = coupl.phases();
            let k = kernel(n, g)?;
            for m in 0..=n {
                let st = LadderState::fock(n, m).map_err(err)?;
                let joint = full_evolution(&coupl, EmitterInput::Ladder(&st), &ElectronComb::delta()).map_err(err)?;
                for fin in 0..=n {
                    let a = joint.ladder_amplitude(fin, fin as i64 - m as i64, &phases).map_err(err)?;
                    worst = worst.max((a - k.element(fin, m)).norm());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-8 && secs < 60.0, format!("max amplitude difference {worst:.2e}, {secs:.1} s")))
}

fn criterion_3() -> Outcome {
    let (n, m, g) = (200, 100, 0.005);
    let exact = spectrum_from_ladder(&kernel(n, g)?, &LadderState::fock(n, m).map_err(err)?).map_err(err)?;
    let approx = bessel_approx_spectrum(n, m, g).map_err(err)?;
    let tv = total_variation(&exact, &approx);
    // same comparison with the Bessel argument set to the spectrum's own g_eff
    let measured = exact.effective_coupling();
    let probs: Vec<f64> = (-(n as i64)..=n as i64).map(|l| bessel_j(l, 2.0 * measured).powi(2)).collect();
    let total: f64 = probs.iter().sum();
    let matched = EelsSpectrum::new(-(n as i64), probs.iter().map(|p| p / total).collect()).map_err(err)?;
    let tv_matched = total_variation(&exact, &matched);
    Ok((
        tv < 1e-3,
        format!(
            "total variation {tv:.2e} with g_eff = |g|√(Nm − m²) = {:.5}; {tv_matched:.2e} with the measured g_eff = {measured:.5}",
            g * ((n * m - m * m) as f64).sqrt()
        ),
    ))
}

fn criterion_4() -> Outcome {
    let (n, g) = (20, 0.01);
    let st = ladder_from_pulse(n, FRAC_PI_2).map_err(err)?;
    let geff = spectrum_from_ladder(&kernel(n, g)?, &st).map_err(err)?.effective_coupling();
    let want = 0.5 * (n as f64) * g;
    let rel = (geff - want).abs() / want;
    Ok((rel < 0.05, format!("g_eff = {geff:.5} vs {want}, relative deviation {rel:.2e}")))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        0.5 * (s[k - 1] + s[k])
    }
}

/// Largest `g_eff` within `half_width` degrees of `center`.
fn peak_near(res: &SweepResult, grid_deg: &[f64], center: f64, half_width: f64) -> f64 {
    grid_deg
        .iter()
        .zip(&res.g_eff)
        .filter(|(t, _)| (**t - center).abs() <= half_width + 1e-9)
        .map(|(_, g)| g[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let e = ElectronParams::new(0.7).map_err(err)?;
    let (n, dz, lambda0, step) = (10, 10.0, 4.5, 0.25);
    let grid_deg: Vec<f64> = (0..=360).map(|i| i as f64 * step).collect();
    let cfg = SweepConfig {
        thetas: grid_deg.iter().map(|t| t.to_radians()).collect(),
        durations: vec![FRAC_PI_2],
        rabi: 1.0,
        pathway: Pathway::ExactFull,
        coupling: CouplingChoice::Uniform(0.5),
        jitter: None,
    };
    let periodic = EmitterEnsemble::equally_spaced(n, dz, lambda0, 10.0, 0.1, 0.0, 1.5).map_err(err)?;
    let res = sweep(&periodic, &e, &cfg).map_err(err)?;
    let main = grid_deg[res.argmax_theta(0)];
    let theta_c = res.cherenkov.ok_or("no Cherenkov angle")?.to_degrees();
    let side: Vec<f64> = res.resonances.iter().filter(|r| r.order != 0).map(|r| r.angle.to_degrees()).collect();

    let z = randomized_positions(n, dz * n as f64 - dz, 7);
    let random = EmitterEnsemble::from_wavelength(lambda0, z, vec![10.0; n], 0.1, 0.0, 1.5).map_err(err)?;
    let rres = sweep(&random, &e, &cfg).map_err(err)?;
    let rmain = grid_deg[rres.argmax_theta(0)];
    let all: Vec<f64> = rres.g_eff.iter().map(|g| g[0]).collect();
    let base = median(&all);
    let top = rres.g_eff[rres.argmax_theta(0)][0] - base;
    let ratios: Vec<f64> = side.iter().map(|&a| (peak_near(&rres, &grid_deg, a, 2.0 * step) - base) / top).collect();
    let periodic_ratios: Vec<f64> = {
        let all: Vec<f64> = res.g_eff.iter().map(|g| g[0]).collect();
        let b = median(&all);
        let t = res.g_eff[res.argmax_theta(0)][0] - b;
        side.iter().map(|&a| (peak_near(&res, &grid_deg, a, 2.0 * step) - b) / t).collect()
    };
    let secs = start.elapsed().as_secs_f64();
    let ok = (main - 17.75).abs() <= step
        && (main - theta_c).abs() <= step
        && (rmain - theta_c).abs() <= step
        && ratios.iter().all(|r| *r < 0.2)
        && secs < 300.0;
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    Ok((
        ok,
        format!(
            "periodic argmax {main:.2}° (θ_C {theta_c:.2}°), side peaks {} at [{}]; random argmax {rmain:.2}°, side peaks [{}]; {secs:.0} s",
            side.len(),
            fmt(&periodic_ratios),
            fmt(&ratios)
        ),
    ))
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    for x in [0.25f64, 0.5, 1.0, 2.0] {
        let probs: Vec<f64> = (-60..=60).map(|l| bessel_j(l, 2.0 * x).powi(2)).collect();
        let total: f64 = probs.iter().sum();
        let sp = EelsSpectrum::new(-60, probs.iter().map(|p| p / total).collect()).map_err(err)?;
        worst = worst.max((sp.effective_coupling() - x).abs());
    }
    Ok((worst < 1e-10, format!("max |g_eff − x| = {worst:.2e}")))
}

fn criterion_7() -> Outcome {
    let e = ElectronParams::new(0.7).map_err(err)?;
    let ens = EmitterEnsemble::equally_spaced(10, 10.0, 4.5, 10.0, 0.1, 0.0, 1.5).map_err(err)?;
    let step = 0.05;
    let grid_deg: Vec<f64> = (0..=1800).map(|i| i as f64 * step).collect();
    let d = dipole_map(&ens, &e, &grid_deg.iter().map(|t| t.to_radians()).collect::<Vec<_>>()).map_err(err)?;
    let top = d.iter().copied().fold(0.0, f64::max);
    let peaks: Vec<f64> = (1..d.len() - 1)
        .filter(|&i| d[i] >= d[i - 1] && d[i] > d[i + 1] && d[i] > 0.5 * top)
        .map(|i| grid_deg[i])
        .collect();
    let res: Vec<f64> = resonance_angles(&ens, &e, -3..=3).map_err(err)?.iter().map(|r| r.angle.to_degrees()).collect();
    let expected = [17.75, 49.27, 69.37];
    let listed = expected.iter().all(|a| res.iter().any(|r| (r - a).abs() < 0.01));
    let matched = peaks.len() == res.len() && peaks.iter().zip(&res).all(|(p, r)| (p - r).abs() <= step);
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.2}")).collect::<Vec<_>>().join(", ");
    Ok((listed && matched, format!("dipole maxima [{}]° vs resonances [{}]°", fmt(&peaks), fmt(&res))))
}

fn random_population(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn criterion_8() -> Outcome {
    let (n, g) = (30, 0.2);
    let k = kernel(n, g)?;
    let d = build_kernel_matrix(&k).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_clean, mut wins, mut valid) = (0.0f64, 0, 0);
    for _ in 0..100 {
        let p = random_population(&mut rng, n);
        let clean = d.apply(&p);
        let rep = recover_with_matrix(&d, &clean, 0.0).map_err(err)?;
        worst_clean = worst_clean.max(l1(&rep.populations, &p));

        let noisy: Vec<f64> = clean
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (v * (1.0 + 0.01 * z)).max(0.0)
            })
            .collect();
        let rep = recover_with_noise_level(&noisy, &k, 0.01).map_err(err)?;
        let sum: f64 = rep.populations.iter().sum();
        if rep.populations.iter().all(|x| *x >= 0.0) && (sum - 1.0).abs() < 1e-9 {
            valid += 1;
        }
        let naive = unregularized_inverse(&d, &noisy).map_err(err)?;
        if l1(&rep.populations, &p) < l1(&naive, &p) {
            wins += 1;
        }
    }
    Ok((
        worst_clean < 1e-6 && valid == 100 && wins >= 95,
        format!("noiseless max L1 {worst_clean:.2e}; noisy: {valid}/100 valid, {wins}/100 beat the unregularized inverse"),
    ))
}

fn criterion_9() -> Outcome {
    // two emitters: p2 = e^{−2Γt}, p1 = 2Γt e^{−2Γt}
    let times: Vec<f64> = (0..=200).map(|i| 0.02 * i as f64).collect();
    let tr = dicke_cascade(1.0, &LadderState::fully_excited(2).map_err(err)?, &times).map_err(err)?;
    let mut two = 0.0f64;
    for (t, p) in times.iter().zip(tr.populations()) {
        let p2 = (-2.0 * t).exp();
        let p1 = 2.0 * t * (-2.0 * t).exp();
        two = two.max((p[2] - p2).abs()).max((p[1] - p1).abs()).max((p[0] - (1.0 - p1 - p2)).abs());
    }

    let fine: Vec<f64> = (0..=20_000).map(|i| 1e-4 * i as f64).collect();
    let peak = |n: usize| -> Result<f64, String> {
        Ok(dicke_cascade(1.0, &LadderState::fully_excited(n).map_err(err)?, &fine).map_err(err)?.peak_intensity())
    };
    let ratio = peak(20)? / peak(10)?;

    let n = 30;
    let delays: Vec<f64> = (0..=100).map(|i| 0.01 * i as f64).collect();
    let tr = dicke_cascade(1.0, &LadderState::fully_excited(n).map_err(err)?, &delays).map_err(err)?;
    let spectra = tr.timeline_eels(&kernel(n, 0.2)?, &delays).map_err(err)?;
    let sigma: Vec<f64> = spectra.iter().map(|s| s.std_loss()).collect();
    let t_sigma = delays[(0..sigma.len()).fold(0, |b, i| if sigma[i] > sigma[b] { i } else { b })];
    let half = n as f64 / 2.0;
    let m = tr.mean_m();
    let i = (1..m.len()).find(|&i| m[i] <= half).ok_or("<m> never reaches N/2")?;
    let t_cross = delays[i - 1] + (m[i - 1] - half) / (m[i - 1] - m[i]) * (delays[i] - delays[i - 1]);
    let ok = two < 1e-8 && (ratio / 3.667 - 1.0).abs() < 0.1 && (t_sigma - t_cross).abs() <= 0.01;
    Ok((
        ok,
        format!(
            "N=2 max error {two:.2e}; I_peak(20)/I_peak(10) = {ratio:.3}; σ_EELS peak at {t_sigma:.2}/Γ, <m> = N/2 at {t_cross:.3}/Γ"
        ),
    ))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let e = ElectronParams::new(0.7).map_err(err)?;
    let gamma = 1e-3;
    // fine sampling around the burst, coarse through the slow tail
    let grid = |fine_end: f64, end: f64| -> Vec<f64> {
        let mut t: Vec<f64> = (0..=(fine_end / 10.0) as usize).map(|i| 10.0 * i as f64).collect();
        let mut s = fine_end + 1000.0;
        while s <= end + 1e-9 {
            t.push(s);
            s += 1000.0;
        }
        t
    };
    let run = |n: usize, end: f64| {
        let ens = EmitterEnsemble::equally_spaced(n, 10.0, 500.0, 10.0, 0.1, 0.0, 1.5).map_err(err)?;
        twa_long_sample(&ens, &e, &TwaConfig::new(gamma, 500, 7), &grid(5000.0, end)).map_err(err)
    };
    let ten = run(10, 20.0 / gamma)?;
    let thirty = run(30, 150.0 / gamma)?;
    let spin = ten
        .spin_length_error()
        .iter()
        .chain(thirty.spin_length_error())
        .copied()
        .fold(0.0, f64::max);
    let emitted = thirty.mean_total_emitted();
    let dev = (emitted / 30.0 - 1.0).abs();
    let (d10, d30) = (ten.mean_peak_delay(), thirty.mean_peak_delay());
    let secs = start.elapsed().as_secs_f64();
    Ok((
        spin < 1e-6 && dev < 0.02 && d30 < d10 && secs < 300.0,
        format!(
            "max spin-length error {spin:.1e}; ∫I dt = {emitted:.3} for N = 30 ({:.2}%); mean peak delay {d10:.0} fs (N=10) > {d30:.0} fs (N=30); {secs:.0} s",
            100.0 * dev
        ),
    ))
}

fn criterion_11() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("sreels-acceptance-{}", std::process::id()));
    fs::create_dir_all(&tmp).map_err(err)?;
    let cfg = tmp.join("config.json");
    fs::write(
        &cfg,
        r#"{"ensemble": {"N": 6, "random_span": 50.0},
            "sweep": {"theta_min_deg": 5.0, "theta_max_deg": 40.0, "theta_step_deg": 1.0, "jitter_samples": 4},
            "dynamics": {"model": "twa", "trajectories": 50, "t_max_fs": 6000.0, "dt_fs": 20.0}}"#,
    )
    .map_err(err)?;
    let cases = [("dynamics", vec!["timeseries.csv", "spectra.csv"]), ("sweep", vec!["sweep.csv"]), ("spectrum", vec!["spectrum.csv"])];
    let mut compared = 0;
    let mut same = true;
    for (cmd, files) in &cases {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.join(format!("{cmd}-{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_sreels"))
                .args([cmd, "-c", cfg.to_str().unwrap(), "--seed", "42", "-o", out.to_str().unwrap()])
                .output()
                .map_err(err)?;
            if !status.status.success() {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(files.iter().map(|f| fs::read(out.join(f)).map_err(err)).collect::<Result<Vec<_>, _>>()?);
        }
        compared += files.len();
        same &= outputs[0] == outputs[1];
    }
    let _ = fs::remove_dir_all(&tmp);
    Ok((same, format!("{compared} CSVs from seeded dynamics (TWA), sweep and spectrum runs compared byte for byte")))
}

/// Criteria that fail when implemented as written; the reason is in the README.
const KNOWN_UNATTAINABLE: [usize; 1] = [3];

fn main() {
    let criteria: [(usize, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let (mut failed, mut known) = (0, 0);
    for (id, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let note = if !ok && KNOWN_UNATTAINABLE.contains(&id) { " [known: unattainable as specified]" } else { "" };
        println!("{} criterion {id}: {detail}{note}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            if note.is_empty() {
                failed += 1;
            } else {
                known += 1;
            }
        }
    }
    if known > 0 {
        println!("{known} criterion failure(s) are documented as unattainable");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
