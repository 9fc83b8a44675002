//! One function per subcommand. Each solves, then writes its artifacts
//! through [`Output`] and returns lines for the terminal summary.

use std::f64::consts::PI;

use serde::Serialize;

use delta_nls_core::model::{nehari_project, nehari_quotient, Decomposition};
use delta_nls_core::phase::{
    asymptotic_check, beta_star, beta_zero, find_bracket, regime_table, sweep_beta,
};
use delta_nls_core::solver::{
    minimize_coupled, minimize_limit, minimize_scalar_point, minimize_scalar_regular,
    quotient_gradient,
};
use delta_nls_core::specfun::{bessel_k0, green_value, omega_alpha, theta};
use delta_nls_core::{
    Classification, CoupledState, Field, GridSpec, GroundState, Params, Regime, RegimeGrid,
    Result as CoreResult,
};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output::{num, GroundStateDoc, Output};
use crate::svg::{Plot, Series, Style};

pub type Lines = Vec<String>;

/// Runs `cfg.command`, writing artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    match cfg.command {
        Command::Solve => solve(cfg, out),
        Command::Scalar => scalar(cfg, out),
        Command::Sweep => sweep(cfg, out),
        Command::Thresholds => thresholds(cfg, out),
        Command::Regimes => regimes(cfg, out),
        Command::Limit => limit(cfg, out),
        Command::Asymptotics => asymptotics(cfg, out),
        Command::Selftest => selftest(out),
    }
}

pub const BEST_ITERATE: &str = "best_iterate.json";

/// Unwraps a solver result. Non-convergence dumps the best iterate first.
fn solved<T>(out: &mut Output, r: CoreResult<T>) -> Result<T, CliError> {
    match r {
        Ok(v) => Ok(v),
        Err(delta_nls_core::Error::Convergence {
            iterations,
            residual,
            best,
        }) => {
            out.json_always(BEST_ITERATE, &GroundStateDoc::new(&best))?;
            Err(CliError::Convergence {
                message: format!("solver did not converge after {iterations} iterations (residual {residual:.3e})"),
                dump: out.written.last().map(|p| p.display().to_string()),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn class(c: &Classification) -> String {
    format!("{}-{}", c.vectorness, c.regularity)
}

fn regime(r: &Regime) -> String {
    format!("{}-{}", r.vectorness, r.regularity)
}

/// Index past which every column stays below `1e-3` of its peak.
fn visible_extent(cols: &[&[f64]]) -> usize {
    let n = cols.first().map_or(0, |c| c.len());
    let last = cols
        .iter()
        .map(|c| {
            let peak = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            c.iter().rposition(|x| x.abs() > 1e-3 * peak).unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    (last + 2).min(n)
}

fn summary(label: &str, gs: &GroundState) -> String {
    format!(
        "{label}: level {} q {} class {} ({} iterations, residual {:.2e})",
        num(gs.level),
        num(gs.state.u.q),
        class(&gs.classification),
        gs.residuals.iterations,
        gs.residuals.grad_norm
    )
}

fn profile_plot(title: &str, gs: &GroundState) -> String {
    let s = &gs.state;
    let r = s.grid().nodes();
    let k = visible_extent(&[s.u.phi.samples(), s.v.samples()]);
    let pts = |f: &[f64]| r[..k].iter().copied().zip(f[..k].iter().copied()).collect();
    Plot::new(title, "r", "profile")
        .with(Series::new("phi", pts(s.u.phi.samples()), Style::Line))
        .with(Series::new("v", pts(s.v.samples()), Style::Dashed))
        .render()
}

fn profile_rows(gs: &GroundState) -> Vec<Vec<String>> {
    let s = &gs.state;
    s.grid()
        .nodes()
        .iter()
        .zip(s.u.phi.samples())
        .zip(s.v.samples())
        .map(|((r, p), v)| vec![num(*r), num(*p), num(*v)])
        .collect()
}

fn solve(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let gs = solved(out, minimize_coupled(&cfg.params(), &cfg.solve_options()))?;
    out.json("ground_state.json", &GroundStateDoc::new(&gs))?;
    out.csv("profile.csv", &["r", "phi", "v"], &profile_rows(&gs))?;
    out.svg("profile.svg", || {
        profile_plot(&format!("ground state, beta = {}", cfg.beta), &gs)
    })?;
    Ok(vec![summary("c_beta", &gs)])
}

#[derive(Serialize)]
struct ScalarDoc {
    alpha: f64,
    omega: f64,
    omega_tilde: f64,
    d_omega: f64,
    d0_omega_tilde: f64,
    /// Which scalar level is lower, i.e. the β = 0 ground state.
    lower: &'static str,
}

fn scalar(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let opts = cfg.solve_options();
    let point = solved(out, minimize_scalar_point(cfg.omega, cfg.alpha, &opts))?;
    let regular = solved(out, minimize_scalar_regular(cfg.omega_tilde, &opts))?;
    out.json("scalar_point.json", &GroundStateDoc::new(&point))?;
    out.json("scalar_regular.json", &GroundStateDoc::new(&regular))?;
    let doc = ScalarDoc {
        alpha: cfg.alpha,
        omega: cfg.omega,
        omega_tilde: cfg.omega_tilde,
        d_omega: point.level,
        d0_omega_tilde: regular.level,
        lower: if point.level < regular.level {
            "point"
        } else {
            "regular"
        },
    };
    out.json("scalar.json", &doc)?;
    out.csv(
        "scalar.csv",
        &["problem", "level", "q", "class"],
        &[
            vec![
                "point".into(),
                num(point.level),
                num(point.state.u.q),
                class(&point.classification),
            ],
            vec![
                "regular".into(),
                num(regular.level),
                num(0.0),
                class(&regular.classification),
            ],
        ],
    )?;
    Ok(vec![
        summary("d(omega)", &point),
        summary("d0(omega_tilde)", &regular),
    ])
}

pub const SWEEP_HEADER: [&str; 8] = [
    "beta", "c_beta", "c0_beta", "q", "norm_u", "norm_v", "class", "beta_c",
];

fn sweep(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let report = sweep_beta(&cfg.params(), &cfg.sweep_betas, &cfg.solve_options())?;
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| match &e.row {
            Ok(r) => vec![
                num(r.beta),
                num(r.c_beta),
                num(r.c0_beta),
                num(r.q),
                num(r.norm_u),
                num(r.norm_v),
                class(&r.classification),
                num(r.beta_c),
            ],
            Err(_) => {
                let mut row = vec![String::new(); SWEEP_HEADER.len()];
                row[0] = num(e.beta);
                row[6] = "failed".into();
                row
            }
        })
        .collect();
    out.csv("sweep.csv", &SWEEP_HEADER, &rows)?;
    out.json("sweep.json", &report)?;
    out.svg("sweep.svg", || {
        let pts = |f: fn(&delta_nls_core::SweepRow) -> f64| {
            report.rows().map(|r| (r.beta, f(r))).collect()
        };
        Plot::new("levels along beta", "beta", "level")
            .with(Series::new("c_beta", pts(|r| r.c_beta), Style::Line))
            .with(Series::new("c0_beta", pts(|r| r.c0_beta), Style::Dashed))
            .render()
    })?;

    let mut lines: Lines = report
        .rows()
        .map(|r| {
            format!(
                "beta {}: c_beta {} c0_beta {} {}",
                r.beta,
                num(r.c_beta),
                num(r.c0_beta),
                class(&r.classification)
            )
        })
        .collect();
    lines.push(format!("c_inf {}", num(report.c_inf)));
    lines.extend(report.violations.iter().map(|v| format!("warning: {v}")));
    if report.failed() > 0 {
        let first = report
            .entries
            .iter()
            .find_map(|e| e.row.as_ref().err())
            .cloned()
            .unwrap_or_default();
        return Err(CliError::Convergence {
            message: format!(
                "{} of {} sweep rows failed; first: {first}",
                report.failed(),
                report.entries.len()
            ),
            dump: None,
        });
    }
    Ok(lines)
}

#[derive(Serialize)]
struct ThresholdsDoc {
    params: Params,
    bracket: (f64, f64),
    tol: f64,
    d_omega: f64,
    d0_omega_tilde: f64,
    beta_star: delta_nls_core::Threshold,
    beta_zero: delta_nls_core::Threshold,
    /// `β* ≤ β₀` up to the bisection tolerance.
    ordered: bool,
    /// The ordering is only guaranteed when `d(ω) > d⁰(ω̃)`.
    ordering_expected: bool,
}

fn thresholds(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let params = cfg.params();
    let opts = cfg.solve_options();
    let bracket = match cfg.thresholds_hi {
        Some(hi) => (cfg.thresholds_lo, hi),
        None => {
            let (_, hi) = solved(out, find_bracket(&params, &opts))?;
            let (_, hi0) = solved(out, find_bracket(&params.without_interaction(), &opts))?;
            (cfg.thresholds_lo, hi.max(hi0))
        }
    };
    let tol = cfg.thresholds_tol;
    let star = solved(out, beta_star(&params, bracket, tol, &opts))?;
    let zero = solved(out, beta_zero(&params, bracket, tol, &opts))?;
    let d = solved(
        out,
        minimize_scalar_point(params.omega, params.alpha, &opts),
    )?
    .level;
    let d0 = solved(out, minimize_scalar_regular(params.omega_tilde, &opts))?.level;
    let doc = ThresholdsDoc {
        params,
        bracket,
        tol,
        d_omega: d,
        d0_omega_tilde: d0,
        ordering_expected: d > d0,
        ordered: star.beta <= zero.beta + tol,
        beta_star: star,
        beta_zero: zero,
    };
    out.json("thresholds.json", &doc)?;
    let row = |name: &str, t: &delta_nls_core::Threshold| {
        vec![
            name.to_string(),
            num(t.beta),
            num(t.lo),
            num(t.hi),
            num(t.c_zero),
            num(t.margin),
            num(t.noise),
            t.evaluations.to_string(),
        ]
    };
    out.csv(
        "thresholds.csv",
        &[
            "threshold",
            "beta",
            "lo",
            "hi",
            "c_zero",
            "margin",
            "noise",
            "evaluations",
        ],
        &[
            row("beta_star", &doc.beta_star),
            row("beta_zero", &doc.beta_zero),
        ],
    )?;
    let mut lines = vec![
        format!(
            "beta_star {} in [{}, {}]",
            num(doc.beta_star.beta),
            doc.beta_star.lo,
            doc.beta_star.hi
        ),
        format!(
            "beta_zero {} in [{}, {}]",
            num(doc.beta_zero.beta),
            doc.beta_zero.lo,
            doc.beta_zero.hi
        ),
    ];
    if doc.ordering_expected && !doc.ordered {
        lines.push("warning: beta_star exceeds beta_zero beyond the tolerance".into());
    }
    Ok(lines)
}

fn regimes(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let grid = RegimeGrid {
        alpha: cfg.alpha,
        omega: cfg.omega,
        ratios: cfg.regimes_ratios.clone(),
        beta_offsets: cfg.regimes_offsets.clone(),
        tol: cfg.regimes_tol,
    };
    let table = solved(out, regime_table(&grid, &cfg.solve_options()))?;
    let long: Vec<Vec<String>> = table
        .cells
        .iter()
        .map(|c| {
            vec![
                num(c.ratio),
                num(c.omega_tilde),
                num(c.d_omega),
                num(c.d0_omega_tilde),
                num(c.beta_star),
                num(c.offset),
                num(c.beta),
                num(c.level),
                regime(&c.observed),
                c.predicted.iter().map(regime).collect::<Vec<_>>().join("|"),
                c.matches.to_string(),
            ]
        })
        .collect();
    out.csv(
        "regimes.csv",
        &[
            "ratio",
            "omega_tilde",
            "d_omega",
            "d0_omega_tilde",
            "beta_star",
            "offset",
            "beta",
            "level",
            "observed",
            "predicted",
            "matches",
        ],
        &long,
    )?;

    // One row per ratio d0(omega_tilde)/d(omega), one column per beta offset.
    let mut header = vec!["ratio".to_string()];
    header.extend(grid.beta_offsets.iter().map(|o| format!("beta_star{o:+}")));
    let matrix: Vec<Vec<String>> = grid
        .ratios
        .iter()
        .map(|&ratio| {
            let mut row = vec![num(ratio)];
            row.extend(grid.beta_offsets.iter().map(|&offset| {
                table
                    .cells
                    .iter()
                    .find(|c| c.ratio == ratio && c.offset == offset)
                    .map_or_else(String::new, |c| regime(&c.observed))
            }));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("regimes_matrix.csv", &header_refs, &matrix)?;
    out.json("regimes.json", &table)?;
    out.svg("regimes.svg", || {
        let mut plot = Plot::new("observed regimes", "d0(omega_tilde) / d(omega)", "beta");
        for r in [Regime::SCALAR_U, Regime::SCALAR_V, Regime::VECTOR] {
            let pts = table
                .cells
                .iter()
                .filter(|c| c.observed == r)
                .map(|c| (c.ratio, c.beta))
                .collect();
            plot = plot.with(Series::new(regime(&r), pts, Style::Markers));
        }
        let star = grid.ratios.iter().filter_map(|&ratio| {
            table
                .cells
                .iter()
                .find(|c| c.ratio == ratio)
                .map(|c| (ratio, c.beta_star))
        });
        plot.with(Series::new("beta_star", star.collect(), Style::Dashed))
            .render()
    })?;

    let mut lines: Lines = matrix.iter().map(|r| r.join("  ")).collect();
    lines.insert(0, header.join("  "));
    if table.mismatches() > 0 {
        lines.push(format!(
            "warning: {} cells disagree with the predicted regimes",
            table.mismatches()
        ));
    }
    Ok(lines)
}

#[derive(Serialize)]
struct LimitDoc<'a> {
    c_inf: f64,
    state: GroundStateDoc<'a>,
}

fn limit(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let gs = solved(out, minimize_limit(&cfg.params(), &cfg.solve_options()))?;
    out.json(
        "limit.json",
        &LimitDoc {
            c_inf: gs.level,
            state: GroundStateDoc::new(&gs),
        },
    )?;
    out.csv("limit_profile.csv", &["r", "phi", "v"], &profile_rows(&gs))?;
    out.svg("limit_profile.svg", || profile_plot("limit minimizer", &gs))?;
    Ok(vec![summary("c_inf", &gs)])
}

fn asymptotics(cfg: &RunConfig, out: &mut Output) -> Result<Lines, CliError> {
    let report = solved(
        out,
        asymptotic_check(&cfg.params(), &cfg.asymptotics_betas, &cfg.solve_options()),
    )?;
    out.json("asymptotics.json", &report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.beta),
                num(r.level),
                num(r.beta_c),
                num(r.rel_gap),
                num(r.sqrt_beta_q),
                num(r.distance),
            ]
        })
        .collect();
    out.csv(
        "asymptotics.csv",
        &[
            "beta",
            "c_beta",
            "beta_c",
            "rel_gap",
            "sqrt_beta_q",
            "distance",
        ],
        &rows,
    )?;
    out.svg("asymptotics.svg", || {
        let pts = |f: fn(&delta_nls_core::phase::AsymptoticRow) -> f64| {
            report.rows.iter().map(|r| (r.beta, f(r))).collect()
        };
        Plot::new("approach to the limit level", "beta", "relative quantity")
            .with(Series::new("relative gap", pts(|r| r.rel_gap), Style::Line))
            .with(Series::new(
                "distance to limit",
                pts(|r| r.distance),
                Style::Dashed,
            ))
            .render()
    })?;
    let mut lines = vec![format!("c_inf {}", num(report.c_inf))];
    lines.extend(report.rows.iter().map(|r| {
        format!(
            "beta {}: beta*c {} gap {:.3e} sqrt(beta)*q {}",
            r.beta,
            num(r.beta_c),
            r.rel_gap,
            num(r.sqrt_beta_q)
        )
    }));
    if !report.gap_decreasing {
        lines.push("warning: the gap does not decrease along beta".into());
    }
    if !report.charge_increments_decreasing {
        lines.push("warning: the increments of sqrt(beta)*q do not decrease".into());
    }
    Ok(lines)
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst observed error.
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            pass: value <= tol,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// A fixed singular trial state on a coarse grid.
fn trial_state(params: Params, n: usize, amp: f64, q: f64) -> CoreResult<CoupledState> {
    let grid = params.default_grid().with_n(n).build()?;
    let phi = Field::from_fn(grid.clone(), |r| amp * (-0.7 * r * r).exp());
    let v = Field::from_fn(grid, |r| 0.8 * (-0.4 * r).exp() * (1.0 + r));
    CoupledState::new(
        Decomposition {
            phi,
            q,
            lambda: params.omega,
        },
        v,
        params,
    )
}

/// Closed-form identities and model invariants that need no minimization.
pub fn selftest_checks() -> CoreResult<Vec<Check>> {
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let alpha = -3.0 + 6.0 * k as f64 / 99.0;
        worst = worst.max((alpha + theta(omega_alpha(alpha))?).abs());
    }
    checks.push(Check::new(
        "alpha + theta(omega_alpha(alpha)) = 0",
        worst,
        1e-14,
    ));

    let mut worst: f64 = 0.0;
    for (z, k0) in [
        (0.1, 2.427_069_024_702_017),
        (1.0, 0.421_024_438_240_708_34),
        (5.0, 3.691_098_334_042_594_3e-3),
    ] {
        worst = worst.max(rel(bessel_k0(z)?, k0));
    }
    checks.push(Check::new("K0 reference values", worst, 1e-13));

    let mut worst: f64 = 0.0;
    for lambda in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let grid = GridSpec::for_decay(lambda).build()?;
        let mut g = Vec::with_capacity(grid.len());
        for &r in grid.nodes() {
            g.push(green_value(lambda, r)?.powi(2));
        }
        worst = worst.max(rel(grid.integrate_samples(&g), 1.0 / (4.0 * PI * lambda)));
    }
    checks.push(Check::new("Green's function L2 norm", worst, 1e-6));

    let params = Params::new(0.0, 4.0, 1.0, 1.0)?;
    let state = trial_state(params, 1024, 1.0, 0.5)?;
    let q0 = nehari_quotient(&state, params.beta)?;
    let mut worst: f64 = 0.0;
    for s in [0.3, 2.0, 7.5] {
        worst = worst.max(rel(nehari_quotient(&state.scaled(s), params.beta)?, q0));
    }
    checks.push(Check::new("quotient scale invariance", worst, 1e-12));

    let projected = nehari_project(
        &state,
        delta_nls_core::Functional::Coupled { beta: params.beta },
    )?;
    let e = delta_nls_core::energy(&projected);
    checks.push(Check::new(
        "energy equals quotient on the Nehari manifold",
        rel(e.i, q0).max(e.g.abs() / e.a),
        1e-12,
    ));

    let moved = state.convert_lambda(0.5 * (omega_alpha(0.0) + params.omega))?;
    checks.push(Check::new(
        "quotient independent of lambda",
        rel(nehari_quotient(&moved, params.beta)?, q0),
        5e-3,
    ));

    let g = quotient_gradient(&state, params.beta)?;
    let grid = state.grid().clone();
    let dphi: Vec<f64> = grid.nodes().iter().map(|&r| 0.3 * (-r * r).exp()).collect();
    let dv: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| -0.2 * (-0.3 * r).exp())
        .collect();
    let dq = 0.4;
    let at = |h: f64| -> CoreResult<f64> {
        let shift = |f: &Field, d: &[f64]| {
            Field::new(
                grid.clone(),
                f.samples().iter().zip(d).map(|(x, y)| x + h * y).collect(),
            )
        };
        let s = CoupledState::new(
            Decomposition {
                phi: shift(&state.u.phi, &dphi)?,
                q: state.u.q + h * dq,
                lambda: state.u.lambda,
            },
            shift(&state.v, &dv)?,
            params,
        )?;
        nehari_quotient(&s, params.beta)
    };
    let h = 1e-5;
    let fd = (at(h)? - at(-h)?) / (2.0 * h);
    checks.push(Check::new(
        "quotient gradient vs finite differences",
        rel(fd, g.directional(&dphi, dq, &dv)),
        1e-6,
    ));

    Ok(checks)
}

fn selftest(out: &mut Output) -> Result<Lines, CliError> {
    let checks = selftest_checks()?;
    out.json_always("selftest.json", &checks)?;
    let lines: Lines = checks
        .iter()
        .map(|c| {
            format!(
                "{} {}: {:.2e} (tol {:.0e})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tol
            )
        })
        .collect();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(lines)
    } else {
        for l in &lines {
            println!("{l}");
        }
        Err(CliError::Selftest(failed.join("; ")))
    }
}
