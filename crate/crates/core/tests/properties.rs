//! Property tests for the model and the phase helpers.

use proptest::prelude::*;

use delta_nls_core::model::{nehari_project, nehari_quotient, Decomposition};
use delta_nls_core::phase::{level_slack, predicted_regimes};
use delta_nls_core::specfun::{green_value, omega_alpha, theta};
use delta_nls_core::{
    energy_with, CoupledState, Field, Functional, Params, Regime, Regularity, Vectorness,
};

fn state(params: Params, amp: f64, width: f64, q: f64, decay: f64) -> CoupledState {
    let grid = params.default_grid().with_n(1024).build().unwrap();
    let phi = Field::from_fn(grid.clone(), |r| amp * (-width * r * r).exp());
    let v = Field::from_fn(grid, |r| (-decay * r).exp() * (1.0 + r));
    CoupledState::new(
        Decomposition {
            phi,
            q,
            lambda: params.omega,
        },
        v,
        params,
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

prop_compose! {
    fn trial()(
        alpha in -0.5f64..0.5,
        excess in 0.5f64..4.0,
        omega_tilde in 0.3f64..3.0,
        beta in 0.0f64..6.0,
        amp in 0.1f64..2.0,
        width in 0.2f64..2.0,
        q in 0.05f64..2.0,
        decay in 0.3f64..1.5,
    ) -> CoupledState {
        let omega = omega_alpha(alpha) + excess;
        let params = Params::new(alpha, omega, omega_tilde, beta).unwrap();
        state(params, amp, width, q, decay)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quotient_is_positive_and_scale_invariant(s in trial(), t in 0.05f64..20.0) {
        let beta = s.params.beta;
        let q = nehari_quotient(&s, beta).unwrap();
        prop_assert!(q > 0.0);
        prop_assert!(rel(nehari_quotient(&s.scaled(t), beta).unwrap(), q) < 1e-12);
    }

    #[test]
    fn nehari_projection_lands_on_the_manifold(s in trial()) {
        let f = Functional::Coupled { beta: s.params.beta };
        let p = nehari_project(&s, f).unwrap();
        let e = energy_with(&p, f);
        prop_assert!(e.g.abs() <= 1e-12 * e.a);
        prop_assert!(rel(e.i, e.j) < 1e-12);
        prop_assert!(rel(e.i, nehari_quotient(&s, s.params.beta).unwrap()) < 1e-12);
    }

    #[test]
    fn quotient_does_not_depend_on_lambda(s in trial(), frac in 0.05f64..1.0) {
        let floor = s.params.lambda_floor();
        let target = floor + frac * (s.params.omega - floor);
        let moved = s.convert_lambda(target).unwrap();
        let beta = s.params.beta;
        prop_assert!(rel(nehari_quotient(&moved, beta).unwrap(), nehari_quotient(&s, beta).unwrap()) < 1e-6);
    }

    #[test]
    fn more_coupling_never_raises_the_quotient(s in trial(), extra in 0.0f64..5.0) {
        let beta = s.params.beta;
        prop_assert!(nehari_quotient(&s, beta + extra).unwrap() <= nehari_quotient(&s, beta).unwrap());
    }

    #[test]
    fn theta_inverts_omega_alpha(alpha in -3.0f64..3.0) {
        prop_assert!((alpha + theta(omega_alpha(alpha)).unwrap()).abs() <= 1e-13);
    }

    #[test]
    fn green_function_is_positive_and_decreasing(lambda in 0.1f64..20.0, r in 1e-6f64..10.0, dr in 1e-3f64..1.0) {
        let g = green_value(lambda, r).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!(green_value(lambda, r + dr).unwrap() < g);
    }

    #[test]
    fn predictions_are_nonempty_and_never_vector_regular(
        d in 0.1f64..10.0,
        d0 in 0.1f64..10.0,
        beta in 0.0f64..20.0,
        beta_star in 0.0f64..20.0,
    ) {
        let p = predicted_regimes(d, d0, beta, beta_star);
        prop_assert!(!p.is_empty());
        prop_assert!(!p.iter().any(|r| r.vectorness == Vectorness::Vector && r.regularity == Regularity::Regular));
        if beta > beta_star {
            prop_assert_eq!(p, vec![Regime::VECTOR]);
        } else if d < d0 - level_slack(d) {
            prop_assert_eq!(p, vec![Regime::SCALAR_U]);
        }
    }
}
