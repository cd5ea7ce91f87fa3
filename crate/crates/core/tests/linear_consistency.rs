//! The linear solver against free transport, the dispersion relation and itself.

use landau_core::dispersion::{dispersion_root, RootOptions};
use landau_core::equilibria::EquilibriumSpec;
use landau_core::fit::{exponential_rate, FitWindow};
use landau_core::interaction::InteractionKernel;
use landau_core::linear::{free_transport_density, linear_vp_density, LinearOptions, PhaseSpaceGrid, SpectralField};
use landau_core::C64;
use proptest::prelude::*;

fn grid(t_final: f64) -> PhaseSpaceGrid {
    PhaseSpaceGrid {
        d: 1,
        n_x: 8,
        n_v: 512,
        v_max: 8.0,
        dt: 0.02,
        t_final,
    }
}

fn packet(g: &PhaseSpaceGrid, k: i64, eta0: f64, width: f64, amp: f64) -> SpectralField {
    SpectralField::for_grid(g, |m, eta| {
        let bump = |e: f64| (-0.5 * ((e - eta0) / width).powi(2)).exp();
        if m == k {
            C64::new(amp * bump(eta), 0.0)
        } else if m == -k {
            C64::new(amp * bump(-eta), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

#[test]
fn fitted_damping_tracks_the_root_across_temperatures() {
    let g = grid(25.0);
    for temp in [0.8, 1.0, 1.3] {
        let spec = EquilibriumSpec::maxwellian(1.0, temp);
        let w = InteractionKernel::coulomb();
        let input = packet(&g, 1, 0.0, 1.0 / temp.sqrt(), 1e-3);
        let opts = LinearOptions {
            dt: g.dt,
            t_final: g.t_final,
            modes: Some(vec![1]),
        };
        let hist = linear_vp_density(&input, &spec, &w, &opts).unwrap();
        let fit = exponential_rate(&hist.times, &hist.e_norm, &FitWindow::decay(2.0)).unwrap();
        let guess = C64::new(fit.slope, (1.0 + 3.0 * temp).sqrt());
        let root = dispersion_root(&spec, &w, &[1.0], guess, &RootOptions::default()).unwrap().root.unwrap();
        let rel = (fit.slope - root.re).abs() / root.re.abs();
        assert!(rel < 2e-2, "T = {temp}: fit {} root {}", fit.slope, root.re);
    }
}

#[test]
fn attractive_kernel_makes_the_background_jeans_unstable() {
    // gravitational sign with a dense cold background: Ŵ < 0 drives growth at k = 1
    let g = grid(15.0);
    let spec = EquilibriumSpec::maxwellian(4.0, 0.5);
    let w = InteractionKernel::gravitational();
    let input = packet(&g, 1, 0.0, 1.0, 1e-6);
    let opts = LinearOptions {
        dt: g.dt,
        t_final: g.t_final,
        modes: Some(vec![1]),
    };
    let hist = linear_vp_density(&input, &spec, &w, &opts).unwrap();
    let fit = exponential_rate(&hist.times, &hist.e_norm, &FitWindow::growth(7.5, 15.0)).unwrap();
    let root = dispersion_root(&spec, &w, &[1.0], C64::new(fit.slope, 0.0), &RootOptions::default())
        .unwrap()
        .root
        .unwrap();
    assert!(root.re > 0.0 && fit.slope > 0.0);
    assert!((fit.slope - root.re).abs() / root.re < 2e-2, "fit {} root {}", fit.slope, root.re);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn vacuum_is_free_transport(k in 1i64..4, eta0 in -10.0f64..10.0, width in 0.5f64..2.0) {
        let g = grid(6.0);
        let input = packet(&g, k, eta0, width, 1.0);
        let empty = EquilibriumSpec::maxwellian(0.0, 1.0);
        let opts = LinearOptions { dt: g.dt, t_final: g.t_final, modes: Some(vec![k]) };
        let hist = linear_vp_density(&input, &empty, &InteractionKernel::coulomb(), &opts).unwrap();
        let series = hist.mode_series(k).unwrap();
        for (t, r) in hist.times.iter().zip(series) {
            let exact = free_transport_density(&input, k, *t).value;
            prop_assert!((r - exact).norm() <= 1e-14);
        }
    }

    #[test]
    fn density_is_linear_in_the_data(a in -2.0f64..2.0, b in -2.0f64..2.0, eta0 in -4.0f64..4.0) {
        let g = grid(5.0);
        let spec = EquilibriumSpec::maxwellian(1.0, 1.0);
        let w = InteractionKernel::coulomb();
        let opts = LinearOptions { dt: g.dt, t_final: g.t_final, modes: Some(vec![1, 2]) };
        let p = packet(&g, 1, eta0, 1.0, 1.0);
        let q = packet(&g, 2, -eta0, 0.7, 1.0);
        let mut mix = p.clone();
        for (m, (x, y)) in mix.data.iter_mut().zip(p.data.iter().zip(&q.data)) {
            *m = a * x + b * y;
        }
        let hp = linear_vp_density(&p, &spec, &w, &opts).unwrap();
        let hq = linear_vp_density(&q, &spec, &w, &opts).unwrap();
        let hm = linear_vp_density(&mix, &spec, &w, &opts).unwrap();
        for i in 0..hm.rho.len() {
            for j in 0..hm.times.len() {
                let lin = a * hp.rho[i][j] + b * hq.rho[i][j];
                prop_assert!((hm.rho[i][j] - lin).norm() <= 1e-12 * (1.0 + lin.norm()));
            }
        }
    }
}
