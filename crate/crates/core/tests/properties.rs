use isonfs::analysis::{fit_exponential, snr, yield_correction, BandRate, FitOptions};
use isonfs::catalog::{Catalog, IsomerSpec, Spin};
use isonfs::events::{calibrated_run, simulate_run, ReferenceCalibration};
use isonfs::flux::{density_to_ph_per_gamma0, flux_at, ph_per_gamma0_to_density};
use isonfs::hyperfine::quadrupole_levels;
use isonfs::nfs::{exact_rate, thin_target_rate, LineSet};
use proptest::prelude::*;

fn sc() -> IsomerSpec {
    Catalog::builtin().isomer("45Sc").unwrap().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn catalog_survives_toml_round_trip(e0 in 1.0f64..100.0, tau in 1e-3f64..10.0, bg in 0.0f64..5.0) {
        let mut cat = Catalog::builtin();
        let mut iso = IsomerSpec::new("X", e0, tau).unwrap();
        iso.omega_k = Some(0.2);
        cat.isomers.push(iso);
        cat.detectors[0].background_rate = bg;
        let back = Catalog::from_toml_str(&cat.to_toml_string()).unwrap();
        prop_assert_eq!(back, cat);
    }

    #[test]
    fn flux_is_linear_in_pulse_energy(scale in 0.1f64..10.0, t in 0.01f64..1.0) {
        let cat = Catalog::builtin();
        let iso = sc();
        let mut beam = cat.beamline.clone();
        let base = flux_at(&beam, &iso, &[t]).unwrap().value;
        beam.pulse_energy_mj = beam.background_energy_mj + scale * (beam.pulse_energy_mj - beam.background_energy_mj);
        let scaled = flux_at(&beam, &iso, &[t]).unwrap().value;
        prop_assert!((scaled / base - scale).abs() < 1e-12 * scale);
        let full = flux_at(&cat.beamline, &iso, &[]).unwrap().value;
        prop_assert!((base / full - t).abs() < 1e-12);
    }

    #[test]
    fn density_conversion_inverts(d in 1e-6f64..1e3) {
        let iso = sc();
        let back = ph_per_gamma0_to_density(density_to_ph_per_gamma0(d, &iso), &iso);
        prop_assert!((back / d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn early_rate_scales_with_xi_squared(xi in 0.05f64..5.0, dg in 0.0f64..500.0, le in 0.0f64..4.0) {
        let iso = sc();
        let a = LineSet::single(xi, dg, le).unwrap();
        let b = LineSet::single(2.0 * xi, dg, le).unwrap();
        let ra = exact_rate(0.0, &a, &iso, 1.0).unwrap();
        let rb = exact_rate(0.0, &b, &iso, 1.0).unwrap();
        prop_assert!((rb / ra - 4.0).abs() < 1e-12);
        let thin = thin_target_rate(0.0, &a, &iso, 1.0).unwrap();
        prop_assert!((ra / thin - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rate_is_linear_in_flux(xi in 0.1f64..3.0, t in 0.0f64..0.1, n in 1e-3f64..1e3) {
        let iso = sc();
        let ls = LineSet::single(xi, 10.0, 2.0).unwrap();
        let one = exact_rate(t, &ls, &iso, 1.0).unwrap();
        let many = exact_rate(t, &ls, &iso, n).unwrap();
        prop_assert!((many - n * one).abs() <= 1e-12 * many.abs().max(1e-300));
    }

    #[test]
    fn fit_is_shift_equivariant(gamma in 0.5f64..10.0, shift in -1.0f64..1.0) {
        let t: Vec<f64> = (0..40).map(|k| 0.03 + f64::from(k) * 1.5e-3).collect();
        let counts: Vec<f64> = t.iter().map(|&t| (500.0 * (-gamma * t).exp()).round()).collect();
        let shifted: Vec<f64> = t.iter().map(|x| x + shift).collect();
        let a = fit_exponential(&t, &counts, FitOptions::default()).unwrap();
        let b = fit_exponential(&shifted, &counts, FitOptions::default()).unwrap();
        prop_assert!((a.gamma - b.gamma).abs() <= 1e-9 * a.gamma.abs().max(1.0));
        prop_assert!((a.gamma_sigma - b.gamma_sigma).abs() <= 1e-6 * a.gamma_sigma);
    }

    #[test]
    fn snr_ignores_common_scale(s in 1e-3f64..1e4, b in 1e-3f64..1e3, k in 1e-3f64..1e3) {
        let w = (0.015, 0.1);
        let a = snr(&BandRate::exact(s, (3.75, 4.75), w), b).unwrap();
        let c = snr(&BandRate::exact(s * k, (3.75, 4.75), w), b * k).unwrap();
        prop_assert!((a / c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn yield_lies_in_unit_interval(le in 1.0f64..200.0, l12 in 1.0f64..200.0, l in 0.1f64..200.0) {
        let y = yield_correction(le, l12, l).unwrap();
        prop_assert!(y > 0.0 && y <= 1.0);
    }

    #[test]
    fn quadrupole_levels_are_traceless_kramers_pairs(twice in 1u32..5, c in -50.0f64..50.0, eta in 0.0f64..1.0) {
        let spin = Spin::from_twice(2 * twice + 1);
        let lv = quadrupole_levels(spin, c, eta).unwrap();
        let trace: f64 = lv.energies.iter().sum();
        prop_assert!(trace.abs() < 1e-9 * c.abs().max(1.0));
        for pair in lv.energies.chunks(2) {
            prop_assert!((pair[0] - pair[1]).abs() < 1e-9 * c.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn simulation_is_reproducible_across_pool_sizes(seed in any::<u64>(), threads in 1usize..5) {
        let cal = ReferenceCalibration { duration_s: 600.0, ..Default::default() };
        let cfg = calibrated_run(&Catalog::builtin(), &cal, seed).unwrap();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()
            .install(|| simulate_run(&cfg).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
            .install(|| simulate_run(&cfg).unwrap());
        prop_assert_eq!(serial, parallel);
    }
}
