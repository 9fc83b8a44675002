//! Ground-state solvers.
//!
//! Every level is computed the same way: minimize the scale-invariant
//! quotient `A²/(4N)` over nonnegative radial profiles, then rescale the
//! minimizer onto the Nehari manifold. The scalar problems freeze one block
//! of unknowns at zero; the limit problem swaps the nonlinear part.

mod descent;
pub mod shooting;

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridPolicy, GridSpec};
use crate::model::{
    CoupledState, Decomposition, EnergyReport, Evaluator, Functional, Interaction, Params,
};
use crate::phase::{classify_unchecked, Classification, ClassifyTolerances, Vectorness};

use descent::{Active, Problem, Unknowns};

pub use shooting::{shooting_oracle, OracleReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SeedPolicy {
    /// Fixed Gaussian seeds.
    Standard,
    /// Gaussian seeds with widths and amplitudes jittered by ±30%.
    Perturbed { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop when `‖∇Q‖_* √A / Q` drops below this.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    /// Extra attempts, restarted from the best iterate, when a seed stalls.
    pub restarts: usize,
    pub seed: SeedPolicy,
    pub grid: GridPolicy,
    pub classify: ClassifyTolerances,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: 1e-7,
            initial_step: 1.0,
            max_step: 1024.0,
            min_step: 1e-10,
            shrink: 0.5,
            armijo: 1e-4,
            restarts: 2,
            seed: SeedPolicy::Standard,
            grid: GridPolicy::default(),
            classify: ClassifyTolerances::default(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!(
                "shrink must lie in (0,1), got {}",
                self.shrink
            )));
        }
        if !(self.armijo > 0.0 && self.armijo <= 0.5) {
            return Err(Error::Config(format!(
                "armijo must lie in (0,0.5], got {}",
                self.armijo
            )));
        }
        if !(self.initial_step > 0.0 && self.max_step >= self.initial_step && self.min_step > 0.0) {
            return Err(Error::Config(
                "step bounds must satisfy 0 < min, 0 < initial <= max".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn with_grid(self, grid: GridSpec) -> Self {
        Self {
            grid: GridPolicy::Fixed(grid),
            ..self
        }
    }

    /// Grid for a problem whose slowest decay rate is `√decay`.
    pub fn grid_for_decay(&self, decay: f64) -> Result<Arc<Grid>> {
        self.grid.spec_for(decay).build()
    }

    pub(crate) fn grid_for(&self, params: &Params) -> Result<Arc<Grid>> {
        self.grid_for_decay(params.decay())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖∇Q‖_* √A / Q · A`, compared against `grad_tol · A`.
    pub grad_norm: f64,
    /// `|φ_ω(0) − (α+θ_ω)q|`.
    pub boundary_residual: f64,
    /// `|G|` after projection.
    pub nehari_residual: f64,
    /// Samples held at zero by the nonnegativity projection in the last step.
    pub clipped: usize,
    /// `|f(r_max)| / max|f|` over both components.
    pub tail_ratio: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: CoupledState,
    pub functional: Functional,
    /// Converged quotient value, equal to `report.i`.
    pub level: f64,
    pub report: EnergyReport,
    pub residuals: Residuals,
    pub classification: Classification,
    pub converged: bool,
    /// Which seed produced this state.
    pub seed: String,
}

impl GroundState {
    /// `√A_u`, the energy norm of the first component.
    pub fn norm_u(&self) -> f64 {
        self.component_norms().0
    }

    pub fn norm_v(&self) -> f64 {
        self.component_norms().1
    }

    pub fn component_norms(&self) -> (f64, f64) {
        let e = Evaluator::for_state(&self.state);
        let p = e.parts(
            self.state.u.phi.samples(),
            self.state.u.q,
            self.state.v.samples(),
        );
        (p.a_u.max(0.0).sqrt(), p.a_v.max(0.0).sqrt())
    }
}

/// Gradient of the Nehari quotient in the quadrature inner product: the
/// directional derivative along `(δφ, δq, δv)` is
/// `Σ wᵢ dphiᵢ δφᵢ + dq δq + Σ wᵢ dvᵢ δvᵢ`.
#[derive(Debug, Clone)]
pub struct QuotientGradient {
    pub dphi: Field,
    pub dq: f64,
    pub dv: Field,
}

impl QuotientGradient {
    pub fn directional(&self, dphi: &[f64], dq: f64, dv: &[f64]) -> f64 {
        let g = self.dphi.grid();
        g.inner(self.dphi.samples(), dphi) + self.dq * dq + g.inner(self.dv.samples(), dv)
    }

    /// Quadrature-weighted norm of the whole gradient.
    pub fn norm(&self) -> f64 {
        (self.dphi.l2_norm_sq() + self.dq * self.dq + self.dv.l2_norm_sq()).sqrt()
    }
}

pub fn quotient_gradient(state: &CoupledState, beta: f64) -> Result<QuotientGradient> {
    quotient_gradient_with(state, Functional::Coupled { beta })
}

pub fn quotient_gradient_with(
    state: &CoupledState,
    functional: Functional,
) -> Result<QuotientGradient> {
    let eval = Evaluator::for_state(state);
    let phi = state.u.phi.samples();
    let v = state.v.samples();
    let parts = eval.parts(phi, state.u.q, v);
    let a = parts.a();
    let n = functional.nonlinear(parts.b(), parts.c);
    if !(n > 0.0) {
        return Err(Error::DegenerateRay);
    }
    let raw = eval.combined_gradient(
        phi,
        state.u.q,
        v,
        functional,
        a / (2.0 * n),
        a * a / (4.0 * n * n),
    );
    let grid = state.grid().clone();
    let w = grid.weights();
    let per_weight = |g: Vec<f64>| -> Vec<f64> { g.iter().zip(w).map(|(x, wi)| x / wi).collect() };
    let dphi = per_weight(raw.phi);
    let dv = per_weight(raw.v);
    let dq = if state.params.has_point() { raw.q } else { 0.0 };
    Ok(QuotientGradient {
        dphi: Field::from_raw(grid.clone(), dphi),
        dq,
        dv: Field::from_raw(grid, dv),
    })
}

#[derive(Debug, Clone, Copy)]
struct Seed {
    label: &'static str,
    phi_amp: f64,
    q: f64,
    v_amp: f64,
}

const GAUSSIAN: Seed = Seed {
    label: "gaussian",
    phi_amp: 1.0,
    q: 0.3,
    v_amp: 1.0,
};
const SCALAR_U: Seed = Seed {
    label: "scalar-u",
    phi_amp: 1.0,
    q: 0.3,
    v_amp: 1e-4,
};
const SCALAR_V: Seed = Seed {
    label: "scalar-v",
    phi_amp: 1e-4,
    q: 3e-5,
    v_amp: 1.0,
};

fn seed_unknowns(
    grid: &Grid,
    params: &Params,
    seed: Seed,
    policy: SeedPolicy,
    salt: u64,
) -> Unknowns {
    let (mut wu, mut wv, mut au, mut av, mut aq) = (1.0, 1.0, 1.0, 1.0, 1.0);
    if let SeedPolicy::Perturbed { seed: s } = policy {
        let mut rng = StdRng::seed_from_u64(s.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt);
        let mut jitter = || 1.0 + rng.random_range(-0.3..0.3);
        wu = jitter();
        wv = jitter();
        au = jitter();
        av = jitter();
        aq = jitter();
    }
    let cu = 0.25 * params.omega * wu;
    let cv = 0.25 * params.omega_tilde * wv;
    let phi = grid
        .nodes()
        .iter()
        .map(|&r| seed.phi_amp * au * (-cu * r * r).exp())
        .collect();
    let v = grid
        .nodes()
        .iter()
        .map(|&r| seed.v_amp * av * (-cv * r * r).exp())
        .collect();
    let q = if params.has_point() { seed.q * aq } else { 0.0 };
    Unknowns { phi, q, v }
}

fn problem(grid: Arc<Grid>, params: &Params, functional: Functional, active: Active) -> Problem {
    let active = Active {
        q: active.q && params.has_point(),
        ..active
    };
    Problem::new(
        Evaluator::new(grid, params, params.omega),
        functional,
        active,
    )
}

fn run_seed(
    prob: &Problem,
    params: &Params,
    mut x: Unknowns,
    label: &str,
    opts: &SolveOptions,
) -> Result<GroundState> {
    let a = prob.active;
    if !a.phi {
        x.phi.iter_mut().for_each(|p| *p = 0.0);
        x.q = 0.0;
    }
    if !a.q {
        x.q = 0.0;
    }
    if !a.v {
        x.v.iter_mut().for_each(|p| *p = 0.0);
    }
    let mut outcome = prob.minimize(x, opts)?;
    let mut attempts = 0;
    while !outcome.converged && attempts < opts.restarts {
        attempts += 1;
        let total = outcome.iterations;
        let mut next = prob.minimize(outcome.x.clone(), opts)?;
        next.iterations += total;
        next.max_increase = next.max_increase.max(outcome.max_increase);
        outcome = next;
    }
    finish(prob, params, outcome, label, opts)
}

fn finish(
    prob: &Problem,
    params: &Params,
    outcome: descent::DescentOutcome,
    label: &str,
    opts: &SolveOptions,
) -> Result<GroundState> {
    let grid = prob.eval.grid.clone();
    let x = outcome.x;
    let phi = Field::from_raw(grid.clone(), x.phi);
    let v = Field::from_raw(grid, x.v);
    let state = CoupledState::new(
        Decomposition {
            phi,
            q: x.q,
            lambda: params.omega,
        },
        v,
        *params,
    )?;
    let parts = outcome.eval.parts;
    let report = EnergyReport::from_parts(parts.a(), parts.b(), parts.c, prob.functional);
    let boundary_residual = if params.has_point() {
        (state.u.phi.value_at_origin() - prob.eval.charge_coeff * state.u.q).abs()
    } else {
        0.0
    };
    let residuals = Residuals {
        grad_norm: outcome.residual * report.a,
        boundary_residual,
        nehari_residual: report.g.abs(),
        clipped: outcome.clipped,
        tail_ratio: state.u.phi.tail_ratio().max(state.v.tail_ratio()),
        iterations: outcome.iterations,
    };
    let classification = classify_unchecked(&state, report.a, &opts.classify);
    let gs = GroundState {
        level: report.i,
        report,
        residuals,
        classification,
        converged: outcome.converged,
        functional: prob.functional,
        state,
        seed: label.to_string(),
    };
    if gs.converged {
        Ok(gs)
    } else {
        Err(Error::Convergence {
            iterations: outcome.iterations,
            residual: outcome.residual,
            best: Box::new(gs),
        })
    }
}

/// Runs several seeds and keeps the lowest level. Levels within `1e-9`
/// relative of the best are ties, resolved toward a vector minimizer.
fn best_of(runs: Vec<Result<GroundState>>) -> Result<GroundState> {
    let mut converged: Vec<GroundState> = Vec::new();
    let mut failures = Vec::new();
    for r in runs {
        match r {
            Ok(gs) => converged.push(gs),
            Err(e) => failures.push(e),
        }
    }
    if converged.is_empty() {
        let best = failures.into_iter().min_by(|a, b| match (a, b) {
            (Error::Convergence { best: x, .. }, Error::Convergence { best: y, .. }) => {
                x.level.total_cmp(&y.level)
            }
            (Error::Convergence { .. }, _) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        });
        return Err(best.unwrap_or(Error::Unconverged));
    }
    let lowest = converged
        .iter()
        .map(|g| g.level)
        .fold(f64::INFINITY, f64::min);
    let tie = 1e-9 * lowest.abs();
    let mut candidates: Vec<GroundState> = converged
        .into_iter()
        .filter(|g| g.level <= lowest + tie)
        .collect();
    candidates.sort_by(|a, b| {
        let av = a.classification.vectorness == Vectorness::Vector;
        let bv = b.classification.vectorness == Vectorness::Vector;
        bv.cmp(&av).then(a.level.total_cmp(&b.level))
    });
    Ok(candidates.swap_remove(0))
}

/// Minimizer of the Nehari quotient for `I_β` (level `c_β`, or `c⁰_β` when
/// the interaction is off). Runs the Gaussian, scalar-u and scalar-v seeds.
pub fn minimize_coupled(params: &Params, opts: &SolveOptions) -> Result<GroundState> {
    params.validate()?;
    opts.validate()?;
    let grid = opts.grid_for(params)?;
    let all = Active {
        phi: true,
        q: true,
        v: true,
    };
    let prob = problem(
        grid.clone(),
        params,
        Functional::Coupled { beta: params.beta },
        all,
    );
    let runs = [GAUSSIAN, SCALAR_U, SCALAR_V]
        .iter()
        .enumerate()
        .map(|(k, &seed)| {
            let x = seed_unknowns(&grid, params, seed, opts.seed, k as u64);
            run_seed(&prob, params, x, seed.label, opts)
        })
        .collect();
    best_of(runs)
}

/// `d(ω)`: the point-interaction scalar problem, `v ≡ 0`.
pub fn minimize_scalar_point(omega: f64, alpha: f64, opts: &SolveOptions) -> Result<GroundState> {
    let params = Params::new(alpha, omega, omega, 0.0)?;
    opts.validate()?;
    let grid = opts.grid_for_decay(omega)?;
    let active = Active {
        phi: true,
        q: true,
        v: false,
    };
    let prob = problem(
        grid.clone(),
        &params,
        Functional::Coupled { beta: 0.0 },
        active,
    );
    let x = seed_unknowns(&grid, &params, SCALAR_U, opts.seed, 11);
    run_seed(&prob, &params, x, "scalar-point", opts)
}

/// `d⁰(ω̃)`: the classical scalar problem, `u ≡ 0`.
pub fn minimize_scalar_regular(omega_tilde: f64, opts: &SolveOptions) -> Result<GroundState> {
    let params = Params {
        alpha: 0.0,
        omega: omega_tilde,
        omega_tilde,
        beta: 0.0,
        interaction: Interaction::None,
    };
    params.validate()?;
    opts.validate()?;
    let grid = opts.grid_for_decay(omega_tilde)?;
    let active = Active {
        phi: false,
        q: false,
        v: true,
    };
    let prob = problem(
        grid.clone(),
        &params,
        Functional::Coupled { beta: 0.0 },
        active,
    );
    let x = seed_unknowns(&grid, &params, SCALAR_V, opts.seed, 13);
    run_seed(&prob, &params, x, "scalar-regular", opts)
}

/// `c̃∞`: minimizer of `A²/(8C)`; `params.beta` is ignored.
pub fn minimize_limit(params: &Params, opts: &SolveOptions) -> Result<GroundState> {
    params.validate()?;
    opts.validate()?;
    let grid = opts.grid_for(params)?;
    let all = Active {
        phi: true,
        q: true,
        v: true,
    };
    let prob = problem(grid.clone(), params, Functional::Limit, all);
    let x = seed_unknowns(&grid, params, GAUSSIAN, opts.seed, 17);
    run_seed(&prob, params, x, "gaussian", opts)
}

#[cfg(test)]
mod tests;
