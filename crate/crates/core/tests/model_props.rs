use dw_core::config::{parse_json, parse_toml, ModelConfig};
use dw_core::model::{
    agmon_distance, agmon_quadrature, agmon_tabulated, convolve_density, convolve_density_with, eval_potential,
    kernel_fourier_check, KernelShape,
};
use dw_core::{Exec, Grid1D, InteractionKernel, TrapKind, TrapSpec};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = InteractionKernel> {
    (prop::bool::ANY, 0.1f64..3.0, 0.2f64..1.5).prop_map(|(tri, w0, rw)| {
        if tri {
            InteractionKernel::triangle(w0, rw)
        } else {
            InteractionKernel::truncated_gaussian(w0, rw)
        }
    })
}

/// Density supported on the middle of the grid, away from both walls.
fn interior_density(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(move |mut v| {
        let margin = n / 4;
        v.iter_mut().take(margin).for_each(|x| *x = 0.0);
        v.iter_mut().skip(n - margin).for_each(|x| *x = 0.0);
        v
    })
}

proptest! {
    #[test]
    fn potentials_are_even_and_nonnegative(s in 2.0f64..8.0, l in 0.5f64..12.0, x in -20.0f64..20.0) {
        let double = TrapSpec::double(s, l);
        let single = TrapSpec::single(s);
        prop_assert_eq!(eval_potential(&double, x), eval_potential(&double, -x));
        prop_assert_eq!(eval_potential(&single, x), eval_potential(&single, -x));
        prop_assert!(eval_potential(&double, x) >= 0.0);
        prop_assert_eq!(eval_potential(&double, 0.5 * l), 0.0);
    }

    #[test]
    fn agmon_distance_grows_with_radius(s in 2.0f64..8.0, r in 0.0f64..10.0, dr in 0.0f64..5.0) {
        prop_assert!(agmon_distance(r + dr, s).unwrap() >= agmon_distance(r, s).unwrap());
    }

    #[test]
    fn agmon_distance_grows_with_exponent_beyond_e(s in 2.0f64..8.0, ds in 0.0f64..4.0, r in 2.72f64..10.0) {
        prop_assert!(agmon_distance(r, s + ds).unwrap() >= agmon_distance(r, s).unwrap());
    }

    #[test]
    fn agmon_routes_agree(s in 2.0f64..8.0, r in 0.1f64..6.0) {
        let closed = agmon_distance(r, s).unwrap();
        let quad = agmon_quadrature(|x: f64| x.abs().powf(s), r).unwrap();
        prop_assert!((quad - closed).abs() <= 1e-9 * (1.0 + closed));
        let samples: Vec<f64> = (0..=2000).map(|k| (r * k as f64 / 2000.0).powf(s)).collect();
        let tab = agmon_tabulated(&samples, r).unwrap();
        prop_assert!((tab - closed).abs() <= 1e-6 * (1.0 + closed));
    }

    #[test]
    fn grid_is_mirror_symmetric(n in 16usize..5000, hw in 0.5f64..50.0) {
        let g = Grid1D::new(n, hw).unwrap();
        for i in [0, 1, n / 3, n / 2, n - 1] {
            prop_assert_eq!(g.x(i), -g.x(n - 1 - i));
        }
        prop_assert!((g.x(n - 1) - hw).abs() <= 1e-12 * hw);
        let ones = vec![1.0; n];
        prop_assert!((g.integrate(&ones) - 2.0 * hw).abs() <= 1e-12 * hw);
    }

    #[test]
    fn convolution_is_linear(w in kernel(), a in interior_density(400), b in interior_density(400), alpha in -3.0f64..3.0) {
        let g = Grid1D::new(400, 8.0).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
        let ca = convolve_density(&w, &g, &a).unwrap();
        let cb = convolve_density(&w, &g, &b).unwrap();
        let cm = convolve_density(&w, &g, &mix).unwrap();
        for i in 0..400 {
            prop_assert!((cm[i] - (alpha * ca[i] + cb[i])).abs() <= 1e-12 * (1.0 + cm[i].abs()));
        }
    }

    #[test]
    fn convolution_commutes_with_reflection(w in kernel(), rho in prop::collection::vec(0.0f64..1.0, 301)) {
        let g = Grid1D::new(301, 6.0).unwrap();
        let mirrored: Vec<f64> = rho.iter().rev().copied().collect();
        let a = convolve_density(&w, &g, &rho).unwrap();
        let b = convolve_density(&w, &g, &mirrored).unwrap();
        for i in 0..301 {
            prop_assert!((a[i] - b[300 - i]).abs() <= 1e-13 * (1.0 + a[i].abs()));
        }
    }

    #[test]
    fn convolution_conserves_mass(w in kernel(), rho in interior_density(500)) {
        let g = Grid1D::new(500, 10.0).unwrap();
        let h = g.spacing();
        let taps = w.taps(h);
        let discrete_integral = h * (taps[0] + 2.0 * taps[1..].iter().sum::<f64>());
        let out = convolve_density(&w, &g, &rho).unwrap();
        let mass = g.integrate(&rho);
        prop_assert!((g.integrate(&out) - discrete_integral * mass).abs() <= 1e-12 * (1.0 + mass));
        // and the discrete integral approaches the continuum one
        prop_assert!((discrete_integral - w.integral()).abs() <= 2.0 * h * w.w0);
    }

    #[test]
    fn sequential_and_default_execution_agree(w in kernel(), rho in prop::collection::vec(0.0f64..1.0, 1000)) {
        let g = Grid1D::new(1000, 10.0).unwrap();
        let a = convolve_density_with(&w, &g, &rho, Exec::Sequential).unwrap();
        let b = convolve_density_with(&w, &g, &rho, Exec::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn toml_round_trip(s in 2.0f64..8.0, l in 0.5f64..12.0, double in prop::bool::ANY, gauss in prop::bool::ANY,
                       w0 in 0.1f64..3.0, rw in 0.2f64..2.0, n in prop::option::of(16usize..10000),
                       hw in prop::option::of(1.0f64..40.0)) {
        let mut trap = if double { TrapSpec::double(s, l) } else { TrapSpec::single(s) };
        trap.separation_l = l;
        let kernel = if gauss { InteractionKernel::truncated_gaussian(w0, rw) } else { InteractionKernel::triangle(w0, rw) };
        let cfg = ModelConfig { trap, kernel, grid_n: n, half_width: hw };
        let back = ModelConfig::from_flat(&parse_toml(&cfg.to_toml()).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
        let json = serde_json::to_string(&nested(&cfg)).unwrap();
        let via_json = ModelConfig::from_flat(&parse_json(&json).unwrap()).unwrap();
        prop_assert_eq!(via_json, cfg);
    }
}

/// Rebuild nested JSON tables from the flat dotted keys.
fn nested(cfg: &ModelConfig) -> serde_json::Value {
    let mut root = serde_json::Map::new();
    for (key, value) in cfg.to_flat() {
        let (section, leaf) = key.split_once('.').unwrap();
        let entry = root.entry(section).or_insert_with(|| serde_json::Value::Object(Default::default()));
        entry.as_object_mut().unwrap().insert(leaf.to_string(), value);
    }
    serde_json::Value::Object(root)
}

#[test]
fn default_kernels_are_positive_type() {
    let g = Grid1D::new(2048, 8.0).unwrap();
    for w in [InteractionKernel::triangle(1.0, 0.5), InteractionKernel::truncated_gaussian(1.0, 0.5)] {
        let r = kernel_fourier_check(&w, &g);
        assert!(r.pass, "{:?}: {}", w.shape, r.min_hat);
        assert!(r.hat_zero > 0.0);
    }
    assert_eq!(InteractionKernel::default().shape, KernelShape::Triangle);
    assert_eq!(TrapSpec::single(2.0).kind, TrapKind::SingleWell);
}
