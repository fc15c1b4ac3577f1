use std::fs;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use sreels_core::coupling::{bessel_argument, coupling_set};
use sreels_core::dynamics::{dicke_cascade, twa_long_sample, TwaConfig};
use sreels_core::eels::{spectrum_from_joint, spectrum_from_ladder};
use sreels_core::excitation::{excite, sweep, BandwidthJitter, CouplingChoice, SweepConfig};
use sreels_core::joint::{full_evolution, EmitterInput};
use sreels_core::ladder::{product_to_ladder, LadderProjection};
use sreels_core::reconstruct::{recover_populations, recover_with_noise_level, ReconstructionFlags};
use sreels_core::scattering::exact_elements;
use sreels_core::{CouplingSet, EelsSpectrum, ElectronComb, ExcitationPulse, ScatteringKernel};

use crate::config::{Experiment, Model, Physics, RunConfig};
use crate::error::{CliError, CoreContext};
use crate::output::{eels_rows, Artifacts, DelayEelsRow};

/// What a finished run reports back to `main`.
pub struct Outcome {
    pub summary: String,
}

fn positive(path: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(path, format!("must be positive and finite, got {v}")))
    }
}

/// Uniform coupling magnitude for the ladder kernel: `ensemble.g` when set,
/// otherwise the geometric coupling if it is the same for every emitter.
fn ladder_coupling(cfg: &RunConfig, phys: &Physics) -> Result<f64, CliError> {
    if let Some(g) = cfg.ensemble.g {
        return Ok(g);
    }
    let set = coupling_set(&phys.electron, &phys.ensemble).during("coupling")?;
    if !set.uniform_magnitude() {
        return Err(CliError::Core {
            context: "scattering",
            source: sreels_core::Error::Domain(
                "geometric couplings differ between emitters; the ladder kernel needs a uniform |g| (set ensemble.g)"
                    .into(),
            ),
        });
    }
    Ok(set.mean_magnitude())
}

fn ladder_kernel(n: usize, g: f64) -> Result<ScatteringKernel, CliError> {
    exact_elements(n, Complex::new(g, 0.0)).during("scattering")
}

pub fn coupling(cfg: &RunConfig, out: &mut Artifacts) -> Result<(Outcome, serde_json::Value), CliError> {
    #[derive(Serialize)]
    struct Row {
        index: usize,
        z_nm: f64,
        r_perp_nm: f64,
        g_re: f64,
        g_im: f64,
        g_abs: f64,
        g_arg: f64,
    }
    let phys = cfg.physics()?;
    let ens = &phys.ensemble;
    let set = coupling_set(&phys.electron, ens).during("coupling")?;
    let rows: Vec<Row> = set
        .values()
        .iter()
        .enumerate()
        .map(|(i, g)| Row {
            index: i,
            z_nm: ens.positions()[i],
            r_perp_nm: ens.impact_params()[i],
            g_re: g.re,
            g_im: g.im,
            g_abs: g.norm(),
            g_arg: g.arg(),
        })
        .collect();
    out.csv("couplings.csv", &rows)?;
    let xi = bessel_argument(&phys.electron, ens, ens.impact_params()[0]);
    out.json(
        "couplings.json",
        &json!({
            "N": ens.count(),
            "lambda0_nm": ens.lambda0(),
            "hbar_omega0_eV": phys.hbar_omega0,
            "bessel_argument": xi,
            "uniform_magnitude": set.uniform_magnitude(),
            "mean_magnitude": set.mean_magnitude(),
        }),
    )?;
    let settings = json!({ "bessel_argument": xi });
    let summary = format!("{} couplings, mean |g| = {:.6e}", set.len(), set.mean_magnitude());
    Ok((Outcome { summary }, settings))
}

pub fn spectrum(cfg: &RunConfig, seed: Option<u64>, out: &mut Artifacts) -> Result<(Outcome, serde_json::Value), CliError> {
    let phys = cfg.physics()?;
    let n = phys.ensemble.count();
    let (sp, pathway, g_label, state_label) = if let Some(p) = &cfg.pulse {
        let theta = p.theta_deg.to_radians();
        let pulse = match (p.area, p.tau_fs, p.rabi) {
            (Some(a), None, None) => ExcitationPulse::new(theta, a),
            (None, Some(t), Some(r)) => ExcitationPulse::from_duration(theta, t, r),
            _ => return Err(CliError::invalid("pulse", "give either area or both tau_fs and rabi")),
        }
        .map_err(|e| CliError::invalid("pulse", e))?;
        let coupl = match cfg.ensemble.g {
            Some(g) => CouplingSet::uniform(g, &phys.ensemble, &phys.electron),
            None => coupling_set(&phys.electron, &phys.ensemble).during("coupling")?,
        };
        let state = excite(&phys.ensemble, &pulse);
        let projected = if coupl.uniform_magnitude() {
            product_to_ladder(&state, &coupl.phases()).during("ladder")?
        } else {
            LadderProjection::Mismatch
        };
        let g = coupl.mean_magnitude();
        let label = json!({ "kind": "pulse", "theta_deg": p.theta_deg, "area": pulse.area() });
        match projected {
            LadderProjection::Ladder(l) => {
                let sp = spectrum_from_ladder(&ladder_kernel(n, g)?, &l).during("eels")?;
                (sp, "ladder", g, label)
            }
            _ => {
                let joint = full_evolution(&coupl, EmitterInput::Product(&state), &ElectronComb::delta())
                    .during("full-space evolution")?;
                (spectrum_from_joint(&joint).during("eels")?, "full", g, label)
            }
        }
    } else {
        let g = ladder_coupling(cfg, &phys)?;
        let st = cfg.state.build(n, "state")?;
        let sp = spectrum_from_ladder(&ladder_kernel(n, g)?, &st).during("eels")?;
        (sp, "ladder", g, json!({ "kind": cfg.state.kind() }))
    };
    let sp = sp.with_quantum(phys.hbar_omega0);
    out.csv("spectrum.csv", &eels_rows(&sp, phys.hbar_omega0))?;
    out.json(
        "spectrum.json",
        &json!({
            "N": n,
            "g": g_label,
            "hbar_omega0_eV": phys.hbar_omega0,
            "pathway": pathway,
            "state": state_label,
            "seed": seed,
            "mean_loss": sp.mean_loss(),
            "std_loss": sp.std_loss(),
            "sigma_eV": sp.sigma_ev(),
            "g_eff": sp.effective_coupling(),
        }),
    )?;
    let summary = format!("N = {n}, g_eff = {:.6}", sp.effective_coupling());
    Ok((Outcome { summary }, json!({ "pathway": pathway })))
}

pub fn sweep_cmd(cfg: &RunConfig, seed: Option<u64>, out: &mut Artifacts) -> Result<(Outcome, serde_json::Value), CliError> {
    #[derive(Serialize)]
    struct Row {
        theta_deg: f64,
        tau_fs: f64,
        area_rad: f64,
        g_eff: f64,
        dipole_sq_norm: f64,
    }
    let phys = cfg.physics()?;
    let s = &cfg.sweep;
    let step = positive("sweep.theta_step_deg", s.theta_step_deg)?;
    if !(s.theta_min_deg >= 0.0 && s.theta_max_deg <= 180.0 && s.theta_min_deg <= s.theta_max_deg) {
        return Err(CliError::invalid("sweep.theta_max_deg", "need 0 <= theta_min_deg <= theta_max_deg <= 180"));
    }
    let count = ((s.theta_max_deg - s.theta_min_deg) / step + 1e-9).floor() as usize + 1;
    let thetas_deg: Vec<f64> = (0..count).map(|i| s.theta_min_deg + i as f64 * step).collect();
    if s.tau_fs.is_empty() || s.tau_fs.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(CliError::invalid("sweep.tau_fs", "need at least one nonnegative duration"));
    }
    positive("sweep.rabi", s.rabi)?;
    let jitter = match s.jitter_samples {
        Some(samples) if samples > 0 => Some(BandwidthJitter {
            samples,
            seed: seed.ok_or_else(|| CliError::invalid("seed", "carrier jitter needs --seed"))?,
        }),
        _ => None,
    };
    let sc = SweepConfig {
        thetas: thetas_deg.iter().map(|t| t.to_radians()).collect(),
        durations: s.tau_fs.clone(),
        rabi: s.rabi,
        pathway: s.pathway.into(),
        coupling: cfg.ensemble.g.map_or(CouplingChoice::Geometry, CouplingChoice::Uniform),
        jitter,
    };
    let res = sweep(&phys.ensemble, &phys.electron, &sc).during("sweep")?;
    let n2 = (phys.ensemble.count() * phys.ensemble.count()) as f64;
    let mut rows = Vec::with_capacity(count * s.tau_fs.len());
    for (i, th) in thetas_deg.iter().enumerate() {
        for (j, tau) in res.durations.iter().enumerate() {
            rows.push(Row {
                theta_deg: *th,
                tau_fs: *tau,
                area_rad: res.areas[j],
                g_eff: res.g_eff[i][j],
                dipole_sq_norm: res.dipole_sq[i] / n2,
            });
        }
    }
    out.csv("sweep.csv", &rows)?;
    let argmax: Vec<serde_json::Value> = (0..res.durations.len())
        .map(|j| {
            let i = res.argmax_theta(j);
            json!({ "tau_fs": res.durations[j], "area_rad": res.areas[j], "theta_deg": thetas_deg[i], "g_eff": res.g_eff[i][j] })
        })
        .collect();
    let dip = (0..count).fold(0, |b, i| if res.dipole_sq[i] > res.dipole_sq[b] { i } else { b });
    let cherenkov_deg = res.cherenkov.map(f64::to_degrees);
    out.json(
        "sweep.json",
        &json!({
            "cherenkov_deg": cherenkov_deg,
            "resonances": res.resonances.iter().map(|r| json!({ "order": r.order, "angle_deg": r.angle.to_degrees() })).collect::<Vec<_>>(),
            "argmax": argmax,
            "dipole_argmax_deg": thetas_deg[dip],
            "seed": seed,
        }),
    )?;
    let summary = format!(
        "{} angles x {} durations, argmax at {:.2} deg (Cherenkov {})",
        count,
        res.durations.len(),
        thetas_deg[res.argmax_theta(0)],
        cherenkov_deg.map_or("none".into(), |c| format!("{c:.2} deg"))
    );
    Ok((Outcome { summary }, json!({ "angles": count, "pathway": s.pathway })))
}

pub fn dynamics(cfg: &RunConfig, seed: Option<u64>, out: &mut Artifacts) -> Result<(Outcome, serde_json::Value), CliError> {
    #[derive(Serialize)]
    struct Row {
        t: f64,
        mean_m: f64,
        intensity: f64,
    }
    let phys = cfg.physics()?;
    let d = &cfg.dynamics;
    let n = phys.ensemble.count();
    let gamma = positive("dynamics.gamma", d.gamma)?;
    let dt = positive("dynamics.dt_fs", d.dt_fs)?;
    let t_max = positive("dynamics.t_max_fs", d.t_max_fs)?;
    if let Some(bad) = d.delays_fs.iter().find(|t| !(**t >= 0.0 && **t <= t_max)) {
        return Err(CliError::invalid("dynamics.delays_fs", format!("delay {bad} outside [0, t_max_fs]")));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let kernel = if d.delays_fs.is_empty() { None } else { Some(ladder_kernel(n, ladder_coupling(cfg, &phys)?)?) };

    let (rows, spectra, settings, summary): (Vec<Row>, Vec<EelsSpectrum>, _, _) = match d.model {
        Model::Dicke => {
            let init = d.initial.build(n, "dynamics.initial")?;
            let tr = dicke_cascade(gamma, &init, &times).during("dynamics")?;
            let rows = times
                .iter()
                .zip(tr.mean_m())
                .zip(tr.intensity())
                .map(|((t, m), i)| Row { t: *t, mean_m: *m, intensity: *i })
                .collect();
            let spectra = match &kernel {
                Some(k) => tr.timeline_eels(k, &d.delays_fs).during("dynamics")?,
                None => Vec::new(),
            };
            let settings = json!({
                "model": "dicke",
                "N": n,
                "gamma": gamma,
                "initial": d.initial.kind(),
                "integrator": { "method": "dopri5", "tolerance": sreels_core::dynamics::DICKE_TOL },
                "peak_time_fs": tr.peak_time(),
                "peak_intensity": tr.peak_intensity(),
            });
            (rows, spectra, settings, format!("Dicke N = {n}, peak at {:.1} fs", tr.peak_time()))
        }
        Model::Twa => {
            if d.trajectories == 0 {
                return Err(CliError::invalid("dynamics.trajectories", "need at least one trajectory"));
            }
            let seed = seed.ok_or_else(|| CliError::invalid("seed", "TWA sampling needs --seed"))?;
            let mut tc = TwaConfig::new(gamma, d.trajectories, seed);
            tc.trigger_angle = d.trigger_angle;
            tc.step_fraction = d.step_fraction;
            let ens = twa_long_sample(&phys.ensemble, &phys.electron, &tc, &times).during("dynamics")?;
            let rows = times
                .iter()
                .zip(ens.mean_inversion())
                .zip(ens.mean_intensity())
                .map(|((t, m), i)| Row { t: *t, mean_m: m, intensity: i })
                .collect();
            let spectra = match &kernel {
                Some(k) => ens.timeline_eels(k, &d.delays_fs, d.interpolate).during("dynamics")?,
                None => Vec::new(),
            };
            let spin = ens.spin_length_error().iter().copied().fold(0.0, f64::max);
            let settings = json!({
                "model": "twa",
                "N": n,
                "gamma": gamma,
                "trajectories": d.trajectories,
                "seed": seed,
                "integrator": {
                    "method": "rk4",
                    "step_fs": ens.step(),
                    "step_fraction": d.step_fraction,
                    "trigger_angle": d.trigger_angle,
                },
                "interpolate": d.interpolate,
                "mean_peak_delay_fs": ens.mean_peak_delay(),
                "mean_total_emitted": ens.mean_total_emitted(),
                "max_spin_length_error": spin,
            });
            (rows, spectra, settings, format!("TWA N = {n}, M = {}, mean peak delay {:.1} fs", d.trajectories, ens.mean_peak_delay()))
        }
    };
    out.csv("timeseries.csv", &rows)?;
    if !spectra.is_empty() {
        let mut delay_rows = Vec::new();
        for (delay, sp) in d.delays_fs.iter().zip(&spectra) {
            delay_rows.extend(sp.iter().map(|(l, p)| DelayEelsRow {
                delay_fs: *delay,
                loss_index: l,
                energy_ev: l as f64 * phys.hbar_omega0,
                probability: p,
            }));
        }
        out.csv("spectra.csv", &delay_rows)?;
    }
    Ok((Outcome { summary }, settings))
}

#[derive(Debug, Deserialize)]
struct EelsInputRow {
    #[serde(default)]
    delay_fs: Option<f64>,
    loss_index: i64,
    #[allow(dead_code)]
    #[serde(rename = "energy_eV")]
    energy_ev: f64,
    probability: f64,
}

/// Loss probabilities over `ℓ = −N..=N` from an eels CSV.
fn read_measured(path: &Path, n: usize, delay: Option<f64>) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
    let rows: Vec<EelsInputRow> = rdr
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|source| CliError::Csv { path: path.to_path_buf(), source })?;
    if rows.is_empty() {
        return Err(CliError::invalid("reconstruct.input", "spectrum file has no rows"));
    }
    let delays: Vec<f64> = {
        let mut v: Vec<f64> = rows.iter().filter_map(|r| r.delay_fs).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let chosen = match (delays.len(), delay) {
        (0, None) => None,
        (0, Some(_)) => return Err(CliError::invalid("reconstruct.delay_fs", "input has no delay_fs column")),
        (1, None) => Some(delays[0]),
        (_, None) => {
            return Err(CliError::invalid("reconstruct.delay_fs", "input holds several delays; choose one with --delay"))
        }
        (_, Some(want)) => Some(
            *delays
                .iter()
                .find(|d| (**d - want).abs() <= 1e-9 * want.abs().max(1.0))
                .ok_or_else(|| CliError::invalid("reconstruct.delay_fs", format!("no spectrum at delay {want} fs")))?,
        ),
    };
    let big_n = n as i64;
    let mut measured = vec![f64::NAN; 2 * n + 1];
    for r in rows.iter().filter(|r| r.delay_fs == chosen) {
        if !(r.probability >= 0.0 && r.probability.is_finite()) {
            return Err(CliError::invalid("reconstruct.input", format!("bad probability {} at loss {}", r.probability, r.loss_index)));
        }
        if r.loss_index.abs() > big_n {
            if r.probability > 0.0 {
                return Err(CliError::invalid(
                    "reconstruct.input",
                    format!("loss index {} lies beyond the N = {n} ladder", r.loss_index),
                ));
            }
            continue;
        }
        let slot = &mut measured[(r.loss_index + big_n) as usize];
        if !slot.is_nan() {
            return Err(CliError::invalid("reconstruct.input", format!("loss index {} appears twice", r.loss_index)));
        }
        *slot = r.probability;
    }
    measured.iter_mut().filter(|p| p.is_nan()).for_each(|p| *p = 0.0);
    Ok(measured)
}

pub fn reconstruct(cfg: &RunConfig, out: &mut Artifacts) -> Result<(Outcome, serde_json::Value), CliError> {
    #[derive(Serialize)]
    struct Report<'a> {
        p: &'a [f64],
        residual: f64,
        kappa: f64,
        lambda: f64,
        flags: ReconstructionFlags,
    }
    let phys = cfg.physics()?;
    let r = &cfg.reconstruct;
    let input = r.input.as_ref().ok_or_else(|| CliError::invalid("reconstruct.input", "no spectrum file given"))?;
    if !(r.lambda_reg >= 0.0 && r.lambda_reg.is_finite()) {
        return Err(CliError::invalid("reconstruct.lambda_reg", format!("must be >= 0, got {}", r.lambda_reg)));
    }
    if let Some(noise) = r.noise {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(CliError::invalid("reconstruct.noise", format!("must be >= 0, got {noise}")));
        }
    }
    let n = phys.ensemble.count();
    let measured = read_measured(input, n, r.delay_fs)?;
    let g = ladder_coupling(cfg, &phys)?;
    let kernel = ladder_kernel(n, g)?;
    let report = match r.noise {
        Some(noise) => recover_with_noise_level(&measured, &kernel, noise),
        None => recover_populations(&measured, &kernel, r.lambda_reg),
    }
    .during("reconstruct")?;
    out.json(
        "reconstruction.json",
        &Report {
            p: &report.populations,
            residual: report.residual,
            kappa: report.kappa,
            lambda: report.lambda,
            flags: report.flags,
        },
    )?;
    let bytes = fs::read(input).map_err(|source| CliError::Io { path: input.clone(), source })?;
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let settings = json!({
        "N": n,
        "g": g,
        "input": input,
        "input_sha256": digest,
        "iterations": report.iterations,
        "kkt_residual": report.kkt_residual,
    });
    let summary = format!("N = {n}, residual {:.3e}, kappa {:.3e}", report.residual, report.kappa);
    Ok((Outcome { summary }, settings))
}

pub fn dispatch(exp: Experiment, cfg: &RunConfig, seed: Option<u64>, out: &mut Artifacts) -> Result<(Outcome, serde_json::Value), CliError> {
    match exp {
        Experiment::Coupling => coupling(cfg, out),
        Experiment::Spectrum => spectrum(cfg, seed, out),
        Experiment::Sweep => sweep_cmd(cfg, seed, out),
        Experiment::Dynamics => dynamics(cfg, seed, out),
        Experiment::Reconstruct => reconstruct(cfg, out),
    }
}
