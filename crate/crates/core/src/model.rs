//! Variational objects of the coupled system.
//!
//! A state is a pair `(u, v)` where the first component carries the point
//! interaction and is stored through its decomposition `u = φ_λ + q𝒢_λ`.
//! Everything the solver needs reduces to three numbers:
//!
//! * `A`, the quadratic form `⟨(−Δ_α+ω)u,u⟩ + ∥∇v∥² + ω̃∥v∥²`,
//! * `B = ∥u∥₄⁴ + ∥v∥₄⁴`,
//! * `C = ∫ u²v²`.
//!
//! The coupled functional is `I = A/2 − B/4 − βC/2`; the β→∞ limit functional
//! drops the self-interaction, `Ĩ∞ = A/2 − C/2`. Both are written as
//! `A/2 − N/4` with `N = s·B + 2κ·C` (see [`Functional`]), and the ray through
//! a state meets the Nehari manifold at `t₀² = A/N` with level `A²/(4N)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridSpec};
use crate::specfun::{green_l2_norm_sq, green_unchecked, omega_alpha, theta_unchecked};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    /// `−Δ_α` acts on the first component.
    Point,
    /// Plain Laplacian in both components.
    None,
}

impl std::fmt::Display for Interaction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Interaction::Point => "point",
            Interaction::None => "none",
        })
    }
}

impl std::str::FromStr for Interaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(Interaction::Point),
            "none" => Ok(Interaction::None),
            other => Err(Error::Config(format!(
                "interaction must be `point` or `none`, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub beta: f64,
    pub interaction: Interaction,
}

impl Params {
    pub fn new(alpha: f64, omega: f64, omega_tilde: f64, beta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            omega,
            omega_tilde,
            beta,
            interaction: Interaction::Point,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.omega, self.omega_tilde, self.beta];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("parameters must be finite"));
        }
        match self.interaction {
            Interaction::Point => {
                let threshold = omega_alpha(self.alpha);
                if !(self.omega > threshold) {
                    return Err(Error::domain(format!(
                        "omega must exceed omega_alpha({}) = {threshold}, got {}",
                        self.alpha, self.omega
                    )));
                }
            }
            Interaction::None => {
                if !(self.omega > 0.0) {
                    return Err(Error::domain(format!(
                        "omega must be positive, got {}",
                        self.omega
                    )));
                }
            }
        }
        if !(self.omega_tilde > 0.0) {
            return Err(Error::domain(format!(
                "omega_tilde must be positive, got {}",
                self.omega_tilde
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::domain(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    pub fn with_omega_tilde(self, omega_tilde: f64) -> Self {
        Self {
            omega_tilde,
            ..self
        }
    }

    pub fn without_interaction(self) -> Self {
        Self {
            interaction: Interaction::None,
            ..self
        }
    }

    pub fn has_point(&self) -> bool {
        self.interaction == Interaction::Point
    }

    /// `ω_α`, or 0 without the point interaction.
    pub fn lambda_floor(&self) -> f64 {
        match self.interaction {
            Interaction::Point => omega_alpha(self.alpha),
            Interaction::None => 0.0,
        }
    }

    /// Default grid: `r_max = 40/√min(ω̃, ω)`.
    pub fn default_grid(&self) -> GridSpec {
        GridSpec::for_decay(self.decay())
    }

    /// `min(ω, ω̃)`, the square of the slowest decay rate of a ground state.
    pub fn decay(&self) -> f64 {
        self.omega.min(self.omega_tilde)
    }

    pub(crate) fn check_lambda(&self, lambda: f64) -> Result<()> {
        if self.interaction == Interaction::None {
            return if lambda > 0.0 && lambda <= self.omega {
                Ok(())
            } else {
                Err(Error::domain(format!(
                    "lambda must lie in (0, omega], got {lambda}"
                )))
            };
        }
        let floor = omega_alpha(self.alpha);
        if lambda > floor && lambda <= self.omega {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "lambda must lie in (omega_alpha, omega] = ({floor}, {}], got {lambda}",
                self.omega
            )))
        }
    }
}

/// Which nonlinear part accompanies the quadratic form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Functional {
    /// `I_β = A/2 − B/4 − βC/2`.
    Coupled { beta: f64 },
    /// `Ĩ∞ = A/2 − C/2`.
    Limit,
}

impl Functional {
    fn weights(self) -> (f64, f64) {
        match self {
            Functional::Coupled { beta } => (1.0, beta),
            Functional::Limit => (0.0, 1.0),
        }
    }

    /// `N = s·B + 2κ·C`.
    pub fn nonlinear(self, b: f64, c: f64) -> f64 {
        let (s, k) = self.weights();
        s * b + 2.0 * k * c
    }
}

/// `u = φ_λ + q𝒢_λ`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub phi: Field,
    pub q: f64,
    pub lambda: f64,
}

impl Decomposition {
    pub fn regular(phi: Field, lambda: f64) -> Self {
        Self {
            phi,
            q: 0.0,
            lambda,
        }
    }

    /// Pointwise values of `u` on the grid.
    pub fn u_samples(&self) -> Vec<f64> {
        let g = self.phi.grid();
        if self.q == 0.0 {
            return self.phi.samples().to_vec();
        }
        g.nodes()
            .iter()
            .zip(self.phi.samples())
            .map(|(&r, &p)| p + self.q * green_unchecked(self.lambda, r))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoupledState {
    pub u: Decomposition,
    pub v: Field,
    pub params: Params,
}

impl CoupledState {
    pub fn new(u: Decomposition, v: Field, params: Params) -> Result<Self> {
        params.validate()?;
        params.check_lambda(u.lambda)?;
        if !u.phi.grid().same_as(v.grid()) {
            return Err(Error::Usage("u and v live on different grids".into()));
        }
        if !(u.q >= 0.0) || !u.q.is_finite() {
            return Err(Error::domain(format!(
                "charge must be finite and nonnegative, got {}",
                u.q
            )));
        }
        if params.interaction == Interaction::None && u.q != 0.0 {
            return Err(Error::domain(
                "charge must vanish without the point interaction",
            ));
        }
        Ok(Self { u, v, params })
    }

    pub fn zero(grid: Arc<Grid>, params: Params) -> Result<Self> {
        Self::new(
            Decomposition::regular(Field::zeros(grid.clone()), params.omega),
            Field::zeros(grid),
            params,
        )
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u: Decomposition {
                phi: self.u.phi.scaled(s),
                q: s * self.u.q,
                lambda: self.u.lambda,
            },
            v: self.v.scaled(s),
            params: self.params,
        }
    }

    pub fn with_params(&self, params: Params) -> Result<Self> {
        Self::new(self.u.clone(), self.v.clone(), params)
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            params: self.params,
            lambda: self.u.lambda,
            q: self.u.q,
            grid: self.grid().spec(),
            phi: self.u.phi.samples().to_vec(),
            v: self.v.samples().to_vec(),
        }
    }
}

/// JSON form of a [`CoupledState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub params: Params,
    pub lambda: f64,
    pub q: f64,
    pub grid: GridSpec,
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateDump {
    pub fn into_state(self) -> Result<CoupledState> {
        let grid = self.grid.build()?;
        let phi = Field::new(grid.clone(), self.phi)?;
        let v = Field::new(grid, self.v)?;
        CoupledState::new(
            Decomposition {
                phi,
                q: self.q,
                lambda: self.lambda,
            },
            v,
            self.params,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Quadratic form.
    pub a: f64,
    /// `∥u∥₄⁴ + ∥v∥₄⁴`.
    pub b: f64,
    /// `∫ u²v²`.
    pub c: f64,
    pub i: f64,
    pub g: f64,
    /// `A/4`, equal to `I` on the Nehari manifold.
    pub j: f64,
    /// Nehari scale; `+∞` when the nonlinear part vanishes.
    pub t0: f64,
}

impl EnergyReport {
    pub fn from_parts(a: f64, b: f64, c: f64, functional: Functional) -> Self {
        let n = functional.nonlinear(b, c);
        Self {
            a,
            b,
            c,
            i: 0.5 * a - 0.25 * n,
            g: a - n,
            j: 0.25 * a,
            t0: if n > 0.0 {
                (a / n).sqrt()
            } else {
                f64::INFINITY
            },
        }
    }
}

/// Raw pieces of `A`, `B`, `C`, split by component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Parts {
    pub a_u: f64,
    pub a_v: f64,
    pub b_u: f64,
    pub b_v: f64,
    pub c: f64,
}

impl Parts {
    pub fn a(&self) -> f64 {
        self.a_u + self.a_v
    }

    pub fn b(&self) -> f64 {
        self.b_u + self.b_v
    }
}

/// Euclidean partial derivatives with respect to the raw unknowns.
#[derive(Debug, Clone)]
pub(crate) struct RawGradient {
    pub phi: Vec<f64>,
    pub q: f64,
    pub v: Vec<f64>,
}

/// Grid-level evaluator for a fixed decomposition parameter `λ`. Holds the
/// sampled Green's function so repeated evaluations only cost `O(n)`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluator {
    pub grid: Arc<Grid>,
    pub stiffness: Vec<f64>,
    pub green: Vec<f64>,
    pub lambda: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    /// `α + θ_λ`; zero without the point interaction.
    pub charge_coeff: f64,
    pub point: bool,
}

impl Evaluator {
    pub fn new(grid: Arc<Grid>, params: &Params, lambda: f64) -> Self {
        let (green, charge_coeff) = match params.interaction {
            Interaction::Point => (
                grid.nodes()
                    .iter()
                    .map(|&r| green_unchecked(lambda, r))
                    .collect(),
                params.alpha + theta_unchecked(lambda),
            ),
            Interaction::None => (vec![0.0; grid.len()], 0.0),
        };
        Self {
            stiffness: grid.stiffness(),
            grid,
            green,
            lambda,
            omega: params.omega,
            omega_tilde: params.omega_tilde,
            charge_coeff,
            point: params.has_point(),
        }
    }

    pub fn for_state(state: &CoupledState) -> Self {
        Self::new(state.grid().clone(), &state.params, state.u.lambda)
    }

    fn green_sq(&self) -> f64 {
        if self.point {
            green_l2_norm_sq(self.lambda)
        } else {
            0.0
        }
    }

    pub fn parts(&self, phi: &[f64], q: f64, v: &[f64]) -> Parts {
        let grid = &self.grid;
        let w = grid.weights();
        let shift = self.omega - self.lambda;

        let dphi = grid.dirichlet_samples(phi);
        let m_phi = grid.inner(phi, phi);
        let mut a_u = dphi + self.omega * m_phi + self.charge_coeff * q * q;
        if q != 0.0 && shift != 0.0 {
            let cross = grid.inner(phi, &self.green);
            a_u += shift * (2.0 * q * cross + q * q * self.green_sq());
        }
        let a_v = grid.dirichlet_samples(v) + self.omega_tilde * grid.inner(v, v);

        let (mut b_u, mut b_v, mut c) = (0.0, 0.0, 0.0);
        for i in 0..w.len() {
            let u = phi[i] + q * self.green[i];
            let u2 = u * u;
            let v2 = v[i] * v[i];
            b_u += w[i] * u2 * u2;
            b_v += w[i] * v2 * v2;
            c += w[i] * u2 * v2;
        }
        Parts {
            a_u,
            a_v,
            b_u,
            b_v,
            c,
        }
    }

    /// `∂A/∂x`, `∂B/∂x`, `∂C/∂x` combined as `a_coef·∇A − n_coef·∇N`.
    pub fn combined_gradient(
        &self,
        phi: &[f64],
        q: f64,
        v: &[f64],
        functional: Functional,
        a_coef: f64,
        n_coef: f64,
    ) -> RawGradient {
        let (s, k) = functional.weights();
        let w = self.grid.weights();
        let n = w.len();
        let shift = self.omega - self.lambda;

        let mut g_phi = vec![0.0; n];
        let mut g_v = vec![0.0; n];
        self.stiffness_apply_add(phi, 2.0 * a_coef, &mut g_phi);
        self.stiffness_apply_add(v, 2.0 * a_coef, &mut g_v);

        let mut g_q = 2.0 * a_coef * self.charge_coeff * q;
        if shift != 0.0 && self.point {
            let cross = self.grid.inner(phi, &self.green);
            g_q += 2.0 * a_coef * shift * (cross + q * self.green_sq());
        }
        for i in 0..n {
            let u = phi[i] + q * self.green[i];
            let vi = v[i];
            // ∂N/∂u_i and ∂N/∂v_i per unit weight
            let dn_du = s * 4.0 * u * u * u + 2.0 * k * 2.0 * u * vi * vi;
            let dn_dv = s * 4.0 * vi * vi * vi + 2.0 * k * 2.0 * u * u * vi;
            let gp = 2.0 * a_coef * w[i] * (self.omega * phi[i] + shift * q * self.green[i])
                - n_coef * w[i] * dn_du;
            g_phi[i] += gp;
            g_q -= n_coef * w[i] * dn_du * self.green[i];
            g_v[i] += 2.0 * a_coef * self.omega_tilde * w[i] * vi - n_coef * w[i] * dn_dv;
        }
        RawGradient {
            phi: g_phi,
            q: g_q,
            v: g_v,
        }
    }

    /// `out += scale·K·f` where `fᵀKf` is the Dirichlet energy.
    fn stiffness_apply_add(&self, f: &[f64], scale: f64, out: &mut [f64]) {
        for (i, &k) in self.stiffness.iter().enumerate() {
            let d = scale * k * (f[i + 1] - f[i]);
            out[i + 1] += d;
            out[i] -= d;
        }
    }
}

/// The quadratic form `A`.
pub fn quadratic_form(state: &CoupledState) -> f64 {
    let e = Evaluator::for_state(state);
    e.parts(state.u.phi.samples(), state.u.q, state.v.samples())
        .a()
}

/// `(B, C)`.
pub fn quartic_terms(state: &CoupledState) -> (f64, f64) {
    let e = Evaluator::for_state(state);
    let p = e.parts(state.u.phi.samples(), state.u.q, state.v.samples());
    (p.b(), p.c)
}

/// Energy report of the coupled functional `I_β` at the state's own β.
pub fn energy(state: &CoupledState) -> EnergyReport {
    energy_with(
        state,
        Functional::Coupled {
            beta: state.params.beta,
        },
    )
}

pub fn energy_with(state: &CoupledState, functional: Functional) -> EnergyReport {
    let e = Evaluator::for_state(state);
    let p = e.parts(state.u.phi.samples(), state.u.q, state.v.samples());
    EnergyReport::from_parts(p.a(), p.b(), p.c, functional)
}

/// `A² / (4(B + 2βC))`, the maximum of `I_β` along the ray through the state.
pub fn nehari_quotient(state: &CoupledState, beta: f64) -> Result<f64> {
    nehari_quotient_with(state, Functional::Coupled { beta })
}

pub fn nehari_quotient_with(state: &CoupledState, functional: Functional) -> Result<f64> {
    let e = Evaluator::for_state(state);
    let p = e.parts(state.u.phi.samples(), state.u.q, state.v.samples());
    quotient_from_parts(&p, functional)
}

pub(crate) fn quotient_from_parts(p: &Parts, functional: Functional) -> Result<f64> {
    let n = functional.nonlinear(p.b(), p.c);
    if !(n > 0.0) {
        return Err(Error::DegenerateRay);
    }
    let a = p.a();
    Ok(a * a / (4.0 * n))
}

/// Rescale the state onto the Nehari manifold of `functional`.
pub fn nehari_project(state: &CoupledState, functional: Functional) -> Result<CoupledState> {
    let r = energy_with(state, functional);
    if !r.t0.is_finite() {
        return Err(Error::DegenerateRay);
    }
    Ok(state.scaled(r.t0))
}

/// Re-express `u` with a different decomposition parameter. The charge is
/// unchanged and `φ_new = φ + q(𝒢_λ − 𝒢_λ′)`.
pub fn convert_lambda(
    d: &Decomposition,
    lambda_new: f64,
    params: &Params,
) -> Result<Decomposition> {
    params.check_lambda(lambda_new)?;
    if lambda_new == d.lambda {
        return Ok(d.clone());
    }
    let grid = d.phi.grid().clone();
    let phi = grid
        .nodes()
        .iter()
        .zip(d.phi.samples())
        .map(|(&r, &p)| {
            if d.q == 0.0 {
                p
            } else {
                p + d.q * (green_unchecked(d.lambda, r) - green_unchecked(lambda_new, r))
            }
        })
        .collect();
    Ok(Decomposition {
        phi: Field::from_raw(grid, phi),
        q: d.q,
        lambda: lambda_new,
    })
}

impl CoupledState {
    pub fn convert_lambda(&self, lambda_new: f64) -> Result<CoupledState> {
        Ok(Self {
            u: convert_lambda(&self.u, lambda_new, &self.params)?,
            v: self.v.clone(),
            params: self.params,
        })
    }
}

/// `S_ω(u) = ½⟨(−Δ_α+ω)u,u⟩ − ¼∥u∥₄⁴`.
pub fn scalar_point_functional(u: &Decomposition, params: &Params) -> Result<f64> {
    params.check_lambda(u.lambda)?;
    let e = Evaluator::new(u.phi.grid().clone(), params, u.lambda);
    let zeros = vec![0.0; u.phi.grid().len()];
    let p = e.parts(u.phi.samples(), u.q, &zeros);
    Ok(0.5 * p.a_u - 0.25 * p.b_u)
}

/// `S⁰_ω̃(v) = ½(∥∇v∥² + ω̃∥v∥²) − ¼∥v∥₄⁴`.
pub fn scalar_regular_functional(v: &Field, omega_tilde: f64) -> f64 {
    let g = v.grid();
    let s = v.samples();
    let quartic: f64 = g.weights().iter().zip(s).map(|(w, x)| w * x.powi(4)).sum();
    0.5 * (v.dirichlet_energy() + omega_tilde * v.l2_norm_sq()) - 0.25 * quartic
}

/// `∥u∥₂²` with the singular part's mass taken analytically.
pub fn u_mass(d: &Decomposition) -> f64 {
    let phi = &d.phi;
    let mut m = phi.l2_norm_sq();
    if d.q != 0.0 {
        let g = phi.grid();
        let cross: f64 = g
            .nodes()
            .iter()
            .zip(g.weights().iter().zip(phi.samples()))
            .map(|(&r, (w, p))| w * p * green_unchecked(d.lambda, r))
            .sum();
        m += 2.0 * d.q * cross + d.q * d.q / (4.0 * PI * d.lambda);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::theta;

    fn params() -> Params {
        Params::new(0.0, 2.0, 1.0, 1.5).unwrap()
    }

    fn gaussian_state(p: Params, q: f64, lambda: f64) -> CoupledState {
        let grid = p.default_grid().with_n(1024).build().unwrap();
        let phi = Field::from_fn(grid.clone(), |r| (-0.7 * r * r).exp());
        let v = Field::from_fn(grid, |r| 0.8 * (-0.4 * r * r).exp() * (1.0 + 0.2 * r));
        CoupledState::new(Decomposition { phi, q, lambda }, v, p).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(Params::new(0.0, 1.3, 1.0, 0.0).is_ok());
        assert!(Params::new(0.0, 2.0, 0.0, 0.0).is_err());
        assert!(Params::new(0.0, 2.0, 1.0, -0.1).is_err());
        let none = Params::new(0.0, 2.0, 1.0, 0.0)
            .unwrap()
            .without_interaction();
        assert!(Params { omega: 0.5, ..none }.validate().is_ok());
        assert!(Params { omega: 0.0, ..none }.validate().is_err());
    }

    #[test]
    fn lambda_range_enforced() {
        let p = params();
        let s = gaussian_state(p, 0.3, 2.0);
        assert!(s.convert_lambda(2.5).is_err());
        assert!(s.convert_lambda(omega_alpha(0.0)).is_err());
        assert!(s.convert_lambda(1.5).is_ok());
    }

    #[test]
    fn zero_state() {
        let p = params();
        let grid = p.default_grid().with_n(64).build().unwrap();
        let z = CoupledState::zero(grid, p).unwrap();
        assert_eq!(quadratic_form(&z), 0.0);
        assert_eq!(quartic_terms(&z), (0.0, 0.0));
        assert!(matches!(
            nehari_quotient(&z, 1.0),
            Err(Error::DegenerateRay)
        ));
    }

    #[test]
    fn regular_u_only_reduces_to_h1() {
        let p = params();
        let s = gaussian_state(p, 0.0, p.omega);
        let s = CoupledState {
            v: Field::zeros(s.grid().clone()),
            ..s
        };
        let phi = &s.u.phi;
        let expected = phi.dirichlet_energy() + p.omega * phi.l2_norm_sq();
        assert!((quadratic_form(&s) - expected).abs() < 1e-14 * expected);
        let (_, c) = quartic_terms(&s);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn pure_charge_quadratic_form() {
        let p = params();
        let grid = p.default_grid().with_n(512).build().unwrap();
        let u = Decomposition {
            phi: Field::zeros(grid.clone()),
            q: 1.0,
            lambda: p.omega,
        };
        let s = CoupledState::new(u, Field::zeros(grid), p).unwrap();
        let expected = p.alpha + theta(p.omega).unwrap();
        assert!((quadratic_form(&s) - expected).abs() < 1e-15);
    }

    #[test]
    fn pure_charge_with_smaller_lambda_agrees() {
        // u = 𝒢_ω written with λ < ω; A must still equal α + θ_ω up to
        // discretization of ⟨φ,𝒢_λ⟩ and ∥∇φ∥².
        let p = params();
        let grid = p.default_grid().build().unwrap();
        let u = Decomposition {
            phi: Field::zeros(grid.clone()),
            q: 1.0,
            lambda: p.omega,
        };
        let s = CoupledState::new(u, Field::zeros(grid), p).unwrap();
        let converted = s.convert_lambda(1.6).unwrap();
        let a0 = quadratic_form(&s);
        let a1 = quadratic_form(&converted);
        assert!((a1 / a0 - 1.0).abs() < 1e-4, "{a0} {a1}");
    }

    #[test]
    fn pure_singular_quartic_self_converges() {
        let p = Params::new(0.0, 1.5, 1.0, 0.0).unwrap();
        let mut vals = vec![];
        for n in [2048, 4096] {
            let grid = GridSpec::for_decay(1.0).with_n(n).build().unwrap();
            let u = Decomposition {
                phi: Field::zeros(grid.clone()),
                q: 1.0,
                lambda: 1.5,
            };
            let s = CoupledState::new(u, Field::zeros(grid), p).unwrap();
            let s = s.convert_lambda(1.5).unwrap();
            vals.push(quartic_terms(&s).0);
        }
        assert!((vals[0] / vals[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn energy_algebra() {
        let r = EnergyReport::from_parts(2.0, 1.0, 0.0, Functional::Coupled { beta: 3.0 });
        assert!((r.t0 - 2f64.sqrt()).abs() < 1e-15);
        let at_t0 = EnergyReport::from_parts(
            2.0 * r.t0 * r.t0,
            r.t0.powi(4),
            0.0,
            Functional::Coupled { beta: 3.0 },
        );
        assert!((at_t0.i - 1.0).abs() < 1e-14);
        assert!(at_t0.g.abs() < 1e-14);
        let degenerate = EnergyReport::from_parts(1.0, 0.0, 0.0, Functional::Coupled { beta: 1.0 });
        assert!(degenerate.t0.is_infinite());
        let p = Parts {
            a_u: 2.0,
            b_u: 1.0,
            ..Parts::default()
        };
        assert!(
            (quotient_from_parts(&p, Functional::Coupled { beta: 0.0 }).unwrap() - 1.0).abs()
                < 1e-15
        );
        let p = Parts {
            a_u: 2.0,
            b_u: 5.0,
            c: 0.5,
            ..Parts::default()
        };
        assert!((quotient_from_parts(&p, Functional::Limit).unwrap() - 4.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn nehari_projection_zeroes_g() {
        let p = params();
        let s = gaussian_state(p, 0.4, p.omega);
        for f in [Functional::Coupled { beta: 1.5 }, Functional::Limit] {
            let proj = nehari_project(&s, f).unwrap();
            let r = energy_with(&proj, f);
            assert!(r.g.abs() <= 1e-10 * r.a);
            assert!((r.i - r.j).abs() <= 1e-10 * r.a);
            assert!((r.i - nehari_quotient_with(&s, f).unwrap()).abs() <= 1e-10 * r.a);
        }
    }

    #[test]
    fn negative_g_means_smaller_j_after_projection() {
        let p = params();
        let s = gaussian_state(p, 0.4, p.omega).scaled(10.0);
        let r = energy(&s);
        assert!(r.g < 0.0);
        let proj = energy(&nehari_project(&s, Functional::Coupled { beta: p.beta }).unwrap());
        assert!(proj.j < r.j);
    }

    #[test]
    fn homogeneity_and_scale_invariance() {
        let p = params();
        let s = gaussian_state(p, 0.4, p.omega);
        let r = energy(&s);
        for k in [0.5, 2.0, 3.7] {
            let rs = energy(&s.scaled(k));
            assert!((rs.a / (k * k * r.a) - 1.0).abs() < 1e-13);
            assert!((rs.b / (k.powi(4) * r.b) - 1.0).abs() < 1e-13);
            assert!((rs.c / (k.powi(4) * r.c) - 1.0).abs() < 1e-13);
            let q0 = nehari_quotient(&s, 1.5).unwrap();
            let q1 = nehari_quotient(&s.scaled(k), 1.5).unwrap();
            assert!((q0 / q1 - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn convert_lambda_round_trip() {
        let p = params();
        let s = gaussian_state(p, 0.5, p.omega);
        let same = convert_lambda(&s.u, p.omega, &p).unwrap();
        assert_eq!(same.phi.samples(), s.u.phi.samples());
        let there = convert_lambda(&s.u, 1.4, &p).unwrap();
        let back = convert_lambda(&there, p.omega, &p).unwrap();
        let err = back
            .phi
            .samples()
            .iter()
            .zip(s.u.phi.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);
        let u0 = s.u.u_samples();
        let u1 = there.u_samples();
        for (a, b) in u0.iter().zip(&u1) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert_eq!(there.q, s.u.q);
    }

    #[test]
    fn energy_invariant_under_lambda_conversion() {
        let p = params();
        let s = gaussian_state(p, 0.5, p.omega);
        let grid = p.default_grid().build().unwrap();
        let phi = Field::from_fn(grid.clone(), |r| (-0.7 * r * r).exp());
        let v = Field::from_fn(grid, |r| 0.8 * (-0.4 * r * r).exp());
        let s = CoupledState::new(
            Decomposition {
                phi,
                q: 0.5,
                lambda: p.omega,
            },
            v,
            s.params,
        )
        .unwrap();
        let e0 = energy(&s);
        let e1 = energy(&s.convert_lambda(1.4).unwrap());
        assert!((e1.i / e0.i - 1.0).abs() < 5e-3);
        assert!((e1.a / e0.a - 1.0).abs() < 5e-3);
    }

    #[test]
    fn scalar_functionals_are_restrictions() {
        let p = params();
        let s = gaussian_state(p, 0.5, p.omega);
        let grid = s.grid().clone();
        for beta in [0.0, 2.0] {
            let u_only = CoupledState {
                v: Field::zeros(grid.clone()),
                params: p.with_beta(beta),
                ..s.clone()
            };
            let su = scalar_point_functional(&s.u, &p).unwrap();
            assert!((su - energy(&u_only).i).abs() < 1e-13 * su.abs().max(1.0));
            let v_only = CoupledState {
                u: Decomposition::regular(Field::zeros(grid.clone()), p.omega),
                params: p.with_beta(beta),
                ..s.clone()
            };
            let sv = scalar_regular_functional(&s.v, p.omega_tilde);
            assert!((sv - energy(&v_only).i).abs() < 1e-13 * sv.abs().max(1.0));
        }
    }

    #[test]
    fn interaction_off_matches_classical_functional() {
        let p = params().without_interaction();
        let s = gaussian_state(p, 0.0, p.omega);
        let u = s.u.phi.samples();
        let v = s.v.samples();
        let g = s.grid();
        let a = s.u.phi.dirichlet_energy()
            + p.omega * g.inner(u, u)
            + s.v.dirichlet_energy()
            + p.omega_tilde * g.inner(v, v);
        let b: f64 = g
            .weights()
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (x, y))| w * (x.powi(4) + y.powi(4)))
            .sum();
        let c: f64 = g
            .weights()
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (x, y))| w * x * x * y * y)
            .sum();
        let r = energy(&s);
        assert!((r.a - a).abs() < 1e-13 * a);
        assert!((r.b - b).abs() < 1e-13 * b);
        assert!((r.c - c).abs() < 1e-13 * c);
        assert!((r.i - (0.5 * a - 0.25 * b - 0.5 * p.beta * c)).abs() < 1e-13 * a);
    }

    #[test]
    fn state_rejects_charge_without_interaction() {
        let p = params().without_interaction();
        let grid = p.default_grid().with_n(64).build().unwrap();
        let u = Decomposition {
            phi: Field::zeros(grid.clone()),
            q: 0.1,
            lambda: p.omega,
        };
        assert!(CoupledState::new(u, Field::zeros(grid), p).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let p = params();
        let s = gaussian_state(p, 0.5, 1.7);
        let json = serde_json::to_string(&s.to_dump()).unwrap();
        let back: StateDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.to_dump());
        let s2 = back.into_state().unwrap();
        assert_eq!(energy(&s2), energy(&s));
    }
}
