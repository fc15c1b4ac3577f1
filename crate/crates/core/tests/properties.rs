use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sreels_core::coupling::{coupling_constant, coupling_set};
use sreels_core::eels::{spectrum_from_joint, spectrum_from_ladder};
use sreels_core::excitation::{cherenkov_angle, sweep, CouplingChoice, Pathway, SweepConfig};
use sreels_core::joint::{full_evolution, EmitterInput};
use sreels_core::reconstruct::recover_populations;
use sreels_core::scattering::exact_elements;
use sreels_core::{CouplingSet, ElectronComb, ElectronParams, EmitterEnsemble, LadderState, ProductState};

fn random_population(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn columns_are_normalised(n in 1usize..=60, g in 0.01f64..1.5) {
        let k = exact_elements(n, Complex::new(g, 0.0)).unwrap();
        for m in 0..=n {
            let s: f64 = (0..=n).map(|r| k.element(r, m).norm_sqr()).sum();
            prop_assert!((s - 1.0).abs() < 1e-9, "N={n} g={g} m={m}: {s}");
        }
    }

    #[test]
    fn transition_magnitudes_are_symmetric(n in 1usize..=40, g in 0.01f64..1.5) {
        let k = exact_elements(n, Complex::new(g, 0.0)).unwrap();
        for a in 0..=n {
            for b in 0..a {
                prop_assert!((k.element(a, b).norm() - k.element(b, a).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coupling_phase_is_covariant(n in 1usize..=20, g in 0.01f64..1.5, phi in -3.1f64..3.1) {
        let real = exact_elements(n, Complex::new(g, 0.0)).unwrap();
        let rotated = exact_elements(n, Complex::from_polar(g, phi)).unwrap();
        for a in 0..=n {
            for b in 0..=n {
                let want = real.element(a, b) * Complex::from_polar(1.0, (a as f64 - b as f64) * phi);
                prop_assert!((rotated.element(a, b) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ladder_kernel_matches_full_space(n in 1usize..=8, g in 0.01f64..1.5, dz in 1.0f64..40.0) {
        let e = ElectronParams::new(0.7).unwrap();
        let ens = EmitterEnsemble::equally_spaced(n, dz, 500.0, 10.0, 0.1, 0.0, 1.5).unwrap();
        let coupl = CouplingSet::uniform(g, &ens, &e);
        let phases = coupl.phases();
        let k = exact_elements(n, Complex::new(g, 0.0)).unwrap();
        for m in 0..=n {
            let st = LadderState::fock(n, m).unwrap();
            let joint = full_evolution(&coupl, EmitterInput::Ladder(&st), &ElectronComb::delta()).unwrap();
            for fin in 0..=n {
                let a = joint.ladder_amplitude(fin, fin as i64 - m as i64, &phases).unwrap();
                prop_assert!((a - k.element(fin, m)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn spectra_are_linear_in_mixtures(n in 1usize..=30, g in 0.01f64..1.0, seed in any::<u64>(), w in 0.0f64..1.0) {
        let k = exact_elements(n, Complex::new(g, 0.0)).unwrap();
        let (p, q) = (random_population(seed, n), random_population(seed ^ 0x5eed, n));
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        let sp = spectrum_from_ladder(&k, &LadderState::diagonal(p).unwrap()).unwrap();
        let sq = spectrum_from_ladder(&k, &LadderState::diagonal(q).unwrap()).unwrap();
        let sm = spectrum_from_ladder(&k, &LadderState::diagonal(mix).unwrap()).unwrap();
        for l in -(n as i64)..=n as i64 {
            let want = w * sp.probability(l) + (1.0 - w) * sq.probability(l);
            prop_assert!((sm.probability(l) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_loss_equals_excitation_gain(
        angles in proptest::collection::vec((0.0f64..std::f64::consts::PI, -3.1f64..3.1), 1..=6),
        g in 0.01f64..1.2,
    ) {
        let n = angles.len();
        let e = ElectronParams::new(0.7).unwrap();
        let ens = EmitterEnsemble::equally_spaced(n, 7.0, 500.0, 10.0, 0.1, 0.0, 1.5).unwrap();
        let coupl = CouplingSet::uniform(g, &ens, &e);
        let st = ProductState::new(angles.iter().map(|a| a.0).collect(), angles.iter().map(|a| a.1).collect()).unwrap();
        let before: f64 = angles.iter().map(|a| (a.0 / 2.0).sin().powi(2)).sum();
        let joint = full_evolution(&coupl, EmitterInput::Product(&st), &ElectronComb::delta()).unwrap();
        let sp = spectrum_from_joint(&joint).unwrap();
        prop_assert!((sp.mean_loss() - (joint.mean_excitation() - before)).abs() < 1e-10);
    }

    #[test]
    fn coupling_is_linear_in_dipoles(dp in -1.0f64..1.0, dz in -1.0f64..1.0, s in -3.0f64..3.0, r in 0.5f64..50.0) {
        let e = ElectronParams::new(0.6).unwrap();
        let make = |a: f64, b: f64| EmitterEnsemble::from_wavelength(500.0, vec![3.0], vec![r], a, b, 1.0).unwrap();
        let g = coupling_constant(&e, &make(dp, dz), 0).unwrap();
        let gp = coupling_constant(&e, &make(dp, 0.0), 0).unwrap();
        let gz = coupling_constant(&e, &make(0.0, dz), 0).unwrap();
        let gs = coupling_constant(&e, &make(s * dp, s * dz), 0).unwrap();
        let scale = g.norm().max(1e-300);
        prop_assert!((g - gp - gz).norm() <= 1e-12 * (gp.norm() + gz.norm()).max(scale));
        prop_assert!((gs - g * s).norm() <= 1e-12 * (s.abs() * scale).max(1e-300));
    }

    #[test]
    fn coupling_decays_with_impact_parameter(r in 0.5f64..80.0, factor in 1.01f64..3.0, beta in 0.2f64..0.95) {
        let e = ElectronParams::new(beta).unwrap();
        let ens = EmitterEnsemble::from_wavelength(500.0, vec![0.0, 1.0], vec![r, r * factor], 0.1, 0.05, 1.0).unwrap();
        let set = coupling_set(&e, &ens).unwrap();
        prop_assert!(set.values()[1].norm() < set.values()[0].norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn effective_coupling_ignores_global_translation(shift in -500.0f64..500.0, theta in 5.0f64..80.0) {
        let e = ElectronParams::new(0.7).unwrap();
        let ens = EmitterEnsemble::equally_spaced(4, 10.0, 4.5, 10.0, 0.1, 0.0, 1.5).unwrap();
        let cfg = SweepConfig {
            thetas: vec![theta.to_radians()],
            durations: vec![std::f64::consts::FRAC_PI_2],
            rabi: 1.0,
            pathway: Pathway::ExactFull,
            coupling: CouplingChoice::Uniform(0.5),
            jitter: None,
        };
        let a = sweep(&ens, &e, &cfg).unwrap();
        let b = sweep(&ens.translated(shift), &e, &cfg).unwrap();
        prop_assert!((a.g_eff[0][0] - b.g_eff[0][0]).abs() < 1e-10);
    }

    #[test]
    fn pathways_agree_at_phase_matching(n in 1usize..=8, g in 0.05f64..1.0, area in 0.1f64..3.0) {
        let e = ElectronParams::new(0.7).unwrap();
        let ens = EmitterEnsemble::equally_spaced(n, 10.0, 4.5, 10.0, 0.1, 0.0, 1.5).unwrap();
        let theta_c = cherenkov_angle(&e, 1.5).unwrap().unwrap();
        let run = |pathway| {
            let cfg = SweepConfig {
                thetas: vec![theta_c],
                durations: vec![area],
                rabi: 1.0,
                pathway,
                coupling: CouplingChoice::Uniform(g),
                jitter: None,
            };
            sweep(&ens, &e, &cfg).unwrap().g_eff[0][0]
        };
        prop_assert!((run(Pathway::ExactFull) - run(Pathway::LadderFast)).abs() < 1e-8);
    }

    #[test]
    fn noiseless_round_trip(n in 1usize..=40, gi in 0usize..3, seed in any::<u64>()) {
        let g = [0.1, 0.2, 0.5][gi];
        let k = exact_elements(n, Complex::new(g, 0.0)).unwrap();
        let p = random_population(seed, n);
        let sp = spectrum_from_ladder(&k, &LadderState::diagonal(p.clone()).unwrap()).unwrap();
        let big_n = n as i64;
        let measured = sp.on_range(-big_n, big_n).unwrap().probabilities().to_vec();
        let rep = recover_populations(&measured, &k, 0.0).unwrap();
        let l1: f64 = rep.populations.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(l1 < 1e-6, "N={n} g={g}: L1 {l1:e}");
    }
}
