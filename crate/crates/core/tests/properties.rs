use std::sync::Arc;

use proptest::prelude::*;

use fracnodal::config::{BoundaryData, MeshConfig, RunConfig};
use fracnodal::field::Combination;
use fracnodal::functionals::{FunctionalContext, H_val, N_t_val};
use fracnodal::homogeneous::{la_residual, sB_basis};
use fracnodal::nodal::{stratum_for, Stratum};
use fracnodal::solver::{assemble, solve_nonlinear, NonlinearOptions};
use fracnodal::{FieldSource, Parameters, QuadratureOptions};

fn ctx(a: f64) -> FunctionalContext {
    FunctionalContext::new(a, QuadratureOptions::default())
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_is_quadratic_in_amplitude(s in 0.05f64..0.95, k in 1u32..5, c in -4.0f64..4.0, r in 0.1f64..1.0) {
        prop_assume!(c.abs() > 1e-3);
        let a = 1.0 - 2.0 * s;
        let p = sB_basis(a, k);
        let scaled = Combination::new(vec![(c, &p as &dyn FieldSource)]);
        let (h, hc) = (H_val(&p, 0.0, r, &ctx(a)).unwrap(), H_val(&scaled, 0.0, r, &ctx(a)).unwrap());
        prop_assert!(rel(hc, c * c * h) < 1e-12);
    }

    #[test]
    fn homogeneous_mass_scales_with_degree(s in 0.05f64..0.95, k in 1u32..5, r in 0.1f64..0.5, t in 1.1f64..2.0) {
        let a = 1.0 - 2.0 * s;
        let p = sB_basis(a, k);
        let (h, ht) = (H_val(&p, 0.0, r, &ctx(a)).unwrap(), H_val(&p, 0.0, t * r, &ctx(a)).unwrap());
        prop_assert!(rel(ht, t.powi(2 * k as i32) * h) < 1e-10);
    }

    #[test]
    fn linear_frequency_of_homogeneous_solutions_is_the_degree(
        s in 0.05f64..0.95, k in 1u32..5, r in 0.1f64..1.0, c in 0.1f64..10.0
    ) {
        let a = 1.0 - 2.0 * s;
        let params = Parameters::new(s, 1.5, 0.0, 0.0).unwrap();
        let p = sB_basis(a, k);
        let scaled = Combination::new(vec![(c, &p as &dyn FieldSource)]);
        let n = N_t_val(&p, 0.0, r, 2.0, &params, &ctx(a)).unwrap();
        let nc = N_t_val(&scaled, 0.0, r, 2.0, &params, &ctx(a)).unwrap();
        prop_assert!((n - k as f64).abs() < 1e-6, "N = {n}");
        prop_assert!(rel(nc, n) < 1e-12);
    }

    #[test]
    fn symmetric_basis_solves_the_weighted_equation(s in 0.05f64..0.95, k in 0u32..9) {
        let a = 1.0 - 2.0 * s;
        let pts: Vec<(f64, f64)> = (0..5).flat_map(|i| (1..5).map(move |j| (-0.8 + 0.4 * i as f64, 0.25 * j as f64))).collect();
        prop_assert!(la_residual(&sB_basis(a, k), &pts) < 1e-10);
    }

    #[test]
    fn stratum_matches_order_bands(s in 0.05f64..0.95, q in 1.0f64..1.9, off in -0.5f64..0.5) {
        let p = Parameters::new(s, q, 1.0, 1.0).unwrap();
        let k_q = p.exponents().k_q;
        let order = k_q + off;
        let stratum = stratum_for(order, &p, 0.1, true);
        if off.abs() <= 0.1 && (order - order.round()).abs() > 0.2 {
            prop_assert!(matches!(stratum, Stratum::Sublinear), "{stratum:?}");
        }
        if off < -0.1 {
            prop_assert!(!matches!(stratum, Stratum::Sublinear));
        }
    }

    #[test]
    fn config_round_trips_through_toml(s in 0.01f64..0.99, q in 1.0f64..1.99, lp in 0.0f64..3.0, lm in 0.0f64..3.0) {
        let cfg = RunConfig::with_parameters(Parameters::new(s, q, lp, lm).unwrap());
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linear_solves_obey_the_maximum_principle_and_scale(seed in 0u64..1000, c in -3.0f64..3.0) {
        let params = Parameters::new(0.3, 1.5, 0.0, 0.0).unwrap();
        let mesh = MeshConfig { nx: 24, my: 24, ..Default::default() }.build(params.a()).unwrap();
        let system = assemble(Arc::new(mesh));
        let data = BoundaryData::Random { seed, modes: 4, offset: 0.0, slope: 1.0, amplitude: 1.0 }
            .evaluate(system.mesh(), &params)
            .unwrap();
        let opts = NonlinearOptions::default();
        let (u, _) = solve_nonlinear(&system, &params, &data, &opts).unwrap();
        let (lo, hi) = data.min_max(system.mesh());
        let slack = 1e-9 * (hi - lo);
        prop_assert!(u.values().iter().all(|&v| v >= lo - slack && v <= hi + slack));

        let (uc, _) = solve_nonlinear(&system, &params, &data.scaled(c), &opts).unwrap();
        let scale = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in u.values().iter().zip(uc.values()) {
            prop_assert!((c * x - y).abs() <= 1e-9 * scale.max(1.0));
        }
    }
}
