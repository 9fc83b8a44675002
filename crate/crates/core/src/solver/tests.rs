use super::*;
use crate::model::{nehari_quotient, nehari_quotient_with};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

fn opts() -> SolveOptions {
    SolveOptions::default()
}

/// `α = 0, ω = 4, ω̃ = 0.2`: here `d(ω) > d⁰(ω̃)`.
fn reference() -> Params {
    Params::new(0.0, 4.0, 0.2, 0.0).unwrap()
}

fn shifted(f: &Field, d: &[f64], h: f64) -> Field {
    let s = f.samples().iter().zip(d).map(|(x, y)| x + h * y).collect();
    Field::new(f.grid().clone(), s).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn scalar_regular_matches_shooting_oracle() {
    let gs = minimize_scalar_regular(1.0, &opts()).unwrap();
    let o = shooting_oracle().unwrap();
    assert!(rel(gs.level, o.level) < 1e-3, "{} vs {}", gs.level, o.level);
    assert_eq!(gs.classification.regime(), crate::phase::Regime::SCALAR_V);
    assert_eq!(gs.state.u.q, 0.0);
}

#[test]
fn scalar_regular_pohozaev_and_scaling() {
    let one = minimize_scalar_regular(1.0, &opts()).unwrap();
    for wt in [0.5, 2.0] {
        let gs = minimize_scalar_regular(wt, &opts()).unwrap();
        assert!(rel(gs.level / one.level, wt) < 1e-3, "omega_tilde={wt}");
        let v = &gs.state.v;
        let grad = v.dirichlet_energy();
        let mass = v.l2_norm_sq();
        let quartic = v
            .grid()
            .integrate_samples(&v.samples().iter().map(|x| x.powi(4)).collect::<Vec<_>>());
        assert!(rel(grad, wt * mass) < 1e-3, "{grad} vs {}", wt * mass);
        assert!(rel(wt * mass, 0.5 * quartic) < 1e-3);
    }
}

#[test]
fn scalar_point_is_singular_and_below_regular() {
    for (omega, alpha) in [(2.0, 0.0), (4.0, 0.0), (1.0, 0.3)] {
        let gs = minimize_scalar_point(omega, alpha, &opts()).unwrap();
        let norm = gs.report.a.sqrt();
        assert!(gs.state.u.q >= 1e-3 * norm, "q = {}", gs.state.u.q);
        let phi_max = gs.state.u.phi.max_abs();
        assert!(
            gs.residuals.boundary_residual <= 1e-4 * phi_max,
            "{:?}",
            gs.residuals
        );
        assert_eq!(gs.state.v.max_abs(), 0.0);
        let regular = minimize_scalar_regular(omega, &opts()).unwrap();
        assert!(
            gs.level < regular.level,
            "d = {} d0 = {}",
            gs.level,
            regular.level
        );
    }
}

#[test]
fn uncoupled_level_is_min_of_scalar_levels() {
    let d = minimize_scalar_point(4.0, 0.0, &opts()).unwrap().level;
    for wt in [0.2, 0.5] {
        let p = reference().with_omega_tilde(wt);
        let d0 = minimize_scalar_regular(wt, &opts()).unwrap().level;
        let c = minimize_coupled(&p, &opts()).unwrap();
        assert!(
            rel(c.level, d.min(d0)) < 1e-3,
            "c = {} d = {d} d0 = {d0}",
            c.level
        );
    }
}

#[test]
fn levels_decrease_in_beta() {
    let mut prev = f64::INFINITY;
    for beta in [0.0, 1.0, 2.0, 3.0, 5.0] {
        let c = minimize_coupled(&reference().with_beta(beta), &opts())
            .unwrap()
            .level;
        assert!(c <= prev + 1e-6, "beta = {beta}: {c} > {prev}");
        prev = c;
    }
}

#[test]
fn strong_coupling_beats_both_scalar_levels() {
    // the threshold for this point lies near 2.6
    let c = minimize_coupled(&reference().with_beta(4.0), &opts()).unwrap();
    let d = minimize_scalar_point(4.0, 0.0, &opts()).unwrap().level;
    let d0 = minimize_scalar_regular(0.2, &opts()).unwrap().level;
    assert!(c.level < d.min(d0), "{} vs {d} {d0}", c.level);
}

#[test]
fn interaction_lowers_the_level_when_omega_is_smaller() {
    for beta in [0.0, 2.0] {
        let p = Params::new(0.0, 2.0, 2.0, beta).unwrap();
        let c = minimize_coupled(&p, &opts()).unwrap().level;
        let c0 = minimize_coupled(&p.without_interaction(), &opts())
            .unwrap()
            .level;
        assert!(c < c0 * (1.0 - 1e-5), "beta = {beta}: {c} vs {c0}");
    }
}

#[test]
fn returned_states_meet_the_contract() {
    let gs = minimize_coupled(&reference().with_beta(4.0), &opts()).unwrap();
    let r = &gs.report;
    assert!(gs.converged);
    assert!(r.g.abs() <= 1e-8 * r.a);
    assert!((r.i - r.j).abs() <= 1e-10 * r.a);
    assert_eq!(gs.level, r.i);
    assert!(gs.residuals.grad_norm <= opts().grad_tol * r.a);
    assert!(gs.residuals.tail_ratio < 1e-10);
    assert!(gs
        .state
        .u
        .phi
        .samples()
        .iter()
        .chain(gs.state.v.samples())
        .all(|x| *x >= 0.0));
}

#[test]
fn limit_level_is_positive_vector_and_singular() {
    let gs = minimize_limit(&reference(), &opts()).unwrap();
    assert!(gs.level > 0.0);
    assert!(gs.state.u.q > 0.0);
    let n = gs.state.grid().len();
    let interior = |f: &Field| f.samples()[..n / 2].iter().all(|x| *x > 0.0);
    assert!(interior(&gs.state.u.phi) && interior(&gs.state.v));
    for s in [0.5, 2.0] {
        let q = nehari_quotient_with(&gs.state.scaled(s), Functional::Limit).unwrap();
        assert!(rel(q, gs.level) < 1e-12);
    }
}

#[test]
fn restarts_from_perturbed_seeds_agree() {
    for beta in [0.0, 4.0] {
        let p = reference().with_beta(beta);
        let a = minimize_coupled(&p, &opts()).unwrap().level;
        for seed in [3, 17] {
            let o = SolveOptions {
                seed: SeedPolicy::Perturbed { seed },
                ..opts()
            };
            let b = minimize_coupled(&p, &o).unwrap().level;
            assert!(rel(a, b) < 1e-4, "beta = {beta} seed = {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn level_bounds_trial_states_from_below() {
    let p = reference().with_beta(3.0);
    let gs = minimize_coupled(&p, &opts()).unwrap();
    let grid = gs.state.grid().clone();
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..12 {
        let (a, b): (f64, f64) = (rng.random_range(0.2..3.0), rng.random_range(0.05..1.5));
        let (q, mix): (f64, f64) = (rng.random_range(0.0..5.0), rng.random_range(0.0..1.0));
        let phi = Field::from_fn(grid.clone(), |r| mix * (-a * r * r).exp());
        let v = Field::from_fn(grid.clone(), |r| (1.0 - mix) * (-b * r).exp() * (1.0 + r));
        let state = CoupledState::new(
            Decomposition {
                phi,
                q: q * mix,
                lambda: p.omega,
            },
            v,
            p,
        )
        .unwrap();
        let trial = nehari_quotient(&state, p.beta).unwrap();
        assert!(gs.level <= trial + 1e-6, "{} > {trial}", gs.level);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let p = reference().with_beta(1.5);
    let grid = p.default_grid().with_n(512).build().unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..5 {
        let a: f64 = rng.random_range(0.5..2.0);
        let phi = Field::from_fn(grid.clone(), |r| (-a * r * r).exp());
        let v = Field::from_fn(grid.clone(), |r| (-0.3 * r).exp() / (1.0 + r));
        let state = CoupledState::new(
            Decomposition {
                phi,
                q: rng.random_range(0.1..1.0),
                lambda: p.omega,
            },
            v,
            p,
        )
        .unwrap();
        let g = quotient_gradient(&state, p.beta).unwrap();
        let dphi: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| (-r).exp() * rng.random_range(-1.0..1.0))
            .collect();
        let dv: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| (-0.2 * r).exp() * rng.random_range(-1.0..1.0))
            .collect();
        let dq: f64 = rng.random_range(-1.0..1.0);
        let shift = |h: f64| {
            let phi = shifted(&state.u.phi, &dphi, h);
            let v = shifted(&state.v, &dv, h);
            let s = CoupledState::new(
                Decomposition {
                    phi,
                    q: state.u.q + h * dq,
                    lambda: p.omega,
                },
                v,
                p,
            )
            .unwrap();
            nehari_quotient(&s, p.beta).unwrap()
        };
        let h = 1e-5;
        let fd = (shift(h) - shift(-h)) / (2.0 * h);
        let an = g.directional(&dphi, dq, &dv);
        assert!(
            (fd - an).abs() <= 1e-6 * an.abs().max(1e-3),
            "fd {fd} vs {an}"
        );
    }
}

#[test]
fn gradient_scales_inversely_with_the_state() {
    let gs = minimize_coupled(
        &reference().with_beta(1.0),
        &opts().with_grid(reference().default_grid().with_n(512)),
    )
    .unwrap();
    let g1 = quotient_gradient(&gs.state, 1.0).unwrap();
    let g2 = quotient_gradient(&gs.state.scaled(2.0), 1.0).unwrap();
    for (a, b) in g1.dv.samples().iter().zip(g2.dv.samples()) {
        assert!((a - 2.0 * b).abs() <= 1e-12 * a.abs().max(1e-300) + 1e-300);
    }
    assert!((g1.dq - 2.0 * g2.dq).abs() <= 1e-12 * g1.dq.abs().max(1e-300));
}

#[test]
fn nonconvergence_carries_the_best_iterate() {
    let o = SolveOptions {
        max_iters: 2,
        restarts: 0,
        ..opts()
    };
    match minimize_scalar_regular(1.0, &o) {
        Err(Error::Convergence {
            best, iterations, ..
        }) => {
            assert!(!best.converged);
            assert!(best.level > 0.0);
            assert_eq!(iterations, 2);
        }
        other => panic!("expected a convergence error, got {other:?}"),
    }
}

#[test]
fn invalid_options_are_rejected() {
    for o in [
        SolveOptions {
            grad_tol: 0.0,
            ..opts()
        },
        SolveOptions {
            shrink: 1.0,
            ..opts()
        },
        SolveOptions {
            armijo: 0.7,
            ..opts()
        },
    ] {
        assert_eq!(
            minimize_scalar_regular(1.0, &o).unwrap_err().kind(),
            "config"
        );
    }
}

#[test]
fn solves_are_deterministic() {
    let p = reference().with_beta(3.0);
    let a = minimize_coupled(&p, &opts()).unwrap();
    let b = minimize_coupled(&p, &opts()).unwrap();
    assert_eq!(a.level.to_bits(), b.level.to_bits());
    assert_eq!(a.state.v.samples(), b.state.v.samples());
}
