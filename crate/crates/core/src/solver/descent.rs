//! Projected, preconditioned steepest descent on the Nehari quotient.
//!
//! The unknowns are the raw samples of `φ` and `v` plus the charge `q`. The
//! quotient `Q = A²/(4N)` is invariant under scaling, so every accepted
//! iterate is rescaled onto the Nehari manifold; there `∇Q = ∇I`. Directions
//! are Riesz representatives of the gradient in the energy inner product
//! (the Hessian of `A/2` at `λ = ω`), which makes the step size
//! mesh-independent. The outermost node is pinned to zero.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{quotient_from_parts, Evaluator, Functional, Parts, RawGradient};

use super::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Active {
    pub phi: bool,
    pub q: bool,
    pub v: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Unknowns {
    pub phi: Vec<f64>,
    pub q: f64,
    pub v: Vec<f64>,
}

impl Unknowns {
    fn scale(&mut self, s: f64) {
        self.phi.iter_mut().for_each(|x| *x *= s);
        self.v.iter_mut().for_each(|x| *x *= s);
        self.q *= s;
    }
}

/// `(K + c·W)` restricted to the free nodes, factored once.
#[derive(Debug, Clone)]
struct Tridiagonal {
    lower: Vec<f64>,
    inv_pivot: Vec<f64>,
    upper_scaled: Vec<f64>,
}

impl Tridiagonal {
    fn energy_matrix(grid: &Grid, stiffness: &[f64], mass_coeff: f64) -> Self {
        let m = grid.len() - 1;
        let w = grid.weights();
        let diag: Vec<f64> = (0..m)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { stiffness[i - 1] };
                left + stiffness[i] + mass_coeff * w[i]
            })
            .collect();
        let off: Vec<f64> = (0..m - 1).map(|i| -stiffness[i]).collect();

        let mut inv_pivot = vec![0.0; m];
        let mut upper_scaled = vec![0.0; m.saturating_sub(1)];
        let mut pivot = diag[0];
        inv_pivot[0] = 1.0 / pivot;
        for i in 1..m {
            upper_scaled[i - 1] = off[i - 1] * inv_pivot[i - 1];
            pivot = diag[i] - off[i - 1] * upper_scaled[i - 1];
            inv_pivot[i] = 1.0 / pivot;
        }
        Self {
            lower: off,
            inv_pivot,
            upper_scaled,
        }
    }

    /// Solves for the free nodes; the pinned node gets 0.
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.inv_pivot.len();
        out[0] = rhs[0];
        for i in 1..m {
            out[i] = rhs[i] - self.lower[i - 1] * out[i - 1] * self.inv_pivot[i - 1];
        }
        out[m - 1] *= self.inv_pivot[m - 1];
        for i in (0..m - 1).rev() {
            out[i] = out[i] * self.inv_pivot[i] - self.upper_scaled[i] * out[i + 1];
        }
        out[m] = 0.0;
    }
}

pub(crate) struct Problem {
    pub eval: Evaluator,
    pub functional: Functional,
    pub active: Active,
    phi_energy: Tridiagonal,
    v_energy: Tridiagonal,
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub parts: Parts,
    pub quotient: f64,
    pub grad: RawGradient,
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub x: Unknowns,
    pub eval: Evaluation,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub clipped: usize,
    /// Largest relative increase of the quotient across accepted steps.
    pub max_increase: f64,
}

impl Problem {
    pub fn new(eval: Evaluator, functional: Functional, active: Active) -> Self {
        let grid: Arc<Grid> = eval.grid.clone();
        let phi_energy = Tridiagonal::energy_matrix(&grid, &eval.stiffness, eval.omega);
        let v_energy = Tridiagonal::energy_matrix(&grid, &eval.stiffness, eval.omega_tilde);
        Self {
            eval,
            functional,
            active,
            phi_energy,
            v_energy,
        }
    }

    fn parts(&self, x: &Unknowns) -> Parts {
        self.eval.parts(&x.phi, x.q, &x.v)
    }

    pub fn evaluate(&self, x: &Unknowns) -> Result<Evaluation> {
        let parts = self.parts(x);
        let quotient = quotient_from_parts(&parts, self.functional)?;
        let a = parts.a();
        let n = self.functional.nonlinear(parts.b(), parts.c);
        let mut grad = self.eval.combined_gradient(
            &x.phi,
            x.q,
            &x.v,
            self.functional,
            a / (2.0 * n),
            a * a / (4.0 * n * n),
        );
        let last = grad.phi.len() - 1;
        grad.phi[last] = 0.0;
        grad.v[last] = 0.0;
        if !self.active.phi {
            grad.phi.iter_mut().for_each(|g| *g = 0.0);
        }
        if !self.active.q {
            grad.q = 0.0;
        }
        if !self.active.v {
            grad.v.iter_mut().for_each(|g| *g = 0.0);
        }
        Ok(Evaluation {
            parts,
            quotient,
            grad,
        })
    }

    /// Energy-inner-product representative of the gradient.
    fn direction(&self, g: &RawGradient) -> Unknowns {
        let n = g.phi.len();
        let mut phi = vec![0.0; n];
        let mut v = vec![0.0; n];
        if self.active.phi {
            self.phi_energy.solve(&g.phi, &mut phi);
        }
        if self.active.v {
            self.v_energy.solve(&g.v, &mut v);
        }
        let q = if self.active.q && self.eval.charge_coeff > 0.0 {
            g.q / self.eval.charge_coeff
        } else {
            0.0
        };
        Unknowns { phi, q, v }
    }

    fn dot(g: &RawGradient, d: &Unknowns) -> f64 {
        let s: f64 = g.phi.iter().zip(&d.phi).map(|(a, b)| a * b).sum::<f64>()
            + g.v.iter().zip(&d.v).map(|(a, b)| a * b).sum::<f64>();
        s + g.q * d.q
    }

    /// Dimensionless stationarity measure `‖∇Q‖_* √A / Q`.
    pub fn residual(&self, e: &Evaluation) -> f64 {
        let d = self.direction(&e.grad);
        let gd = Self::dot(&e.grad, &d).max(0.0);
        gd.sqrt() * e.parts.a().sqrt() / e.quotient
    }

    /// Rescale onto the Nehari manifold of the functional; returns the factor.
    pub fn project(&self, x: &mut Unknowns) -> Result<f64> {
        let p = self.parts(x);
        let n = self.functional.nonlinear(p.b(), p.c);
        if !(n > 0.0) {
            return Err(Error::DegenerateRay);
        }
        let s = (p.a() / n).sqrt();
        x.scale(s);
        Ok(s)
    }

    fn clip(&self, x: &mut Unknowns) -> usize {
        let mut count = 0;
        let last = x.phi.len() - 1;
        for val in x.phi.iter_mut().chain(x.v.iter_mut()) {
            if *val < 0.0 {
                *val = 0.0;
                count += 1;
            }
        }
        x.phi[last] = 0.0;
        x.v[last] = 0.0;
        if x.q < 0.0 {
            x.q = 0.0;
            count += 1;
        }
        count
    }

    fn trial(&self, x: &Unknowns, d: &Unknowns, t: f64) -> (Unknowns, usize, Option<f64>) {
        let mut trial = x.clone();
        axpy(&mut trial, -t, d);
        let nclip = self.clip(&mut trial);
        let qt = quotient_from_parts(&self.parts(&trial), self.functional).ok();
        (trial, nclip, qt)
    }

    pub fn minimize(&self, mut x: Unknowns, opts: &SolveOptions) -> Result<DescentOutcome> {
        self.clip(&mut x);
        self.project(&mut x)?;
        let mut e = self.evaluate(&x)?;
        let mut clipped = 0;
        let mut max_increase: f64 = 0.0;
        let mut stalls = 0;
        // previous preconditioned gradient, its energy norm, and search direction
        let mut prev: Option<(Unknowns, f64, Unknowns)> = None;

        for iter in 0..opts.max_iters {
            let mut z = self.direction(&e.grad);
            let gz = Self::dot(&e.grad, &z);
            let residual = gz.max(0.0).sqrt() * e.parts.a().sqrt() / e.quotient;
            if residual <= opts.grad_tol {
                return Ok(DescentOutcome {
                    x,
                    eval: e,
                    residual,
                    iterations: iter,
                    converged: true,
                    clipped,
                    max_increase,
                });
            }

            // Polak-Ribiere+ with the energy preconditioner; restart to the
            // plain gradient whenever the combination is not a descent direction.
            let mut d = z.clone();
            if let Some((z_prev, gz_prev, d_prev)) = &prev {
                let num = gz - Self::dot(&e.grad, z_prev);
                let coef = (num / gz_prev).max(0.0);
                if coef > 0.0 {
                    axpy(&mut d, coef, d_prev);
                    if !(Self::dot(&e.grad, &d) > 0.0) {
                        d = z.clone();
                    }
                }
            }
            let gd = Self::dot(&e.grad, &d);

            // Near the roundoff floor of Q the Armijo test cannot resolve the
            // predicted decrease; accept steps that do not raise Q beyond it.
            let floor = 8.0 * f64::EPSILON * e.quotient;
            let mut t = opts.initial_step;
            let mut accepted = None;
            while t >= opts.min_step {
                let (trial, nclip, qt) = self.trial(&x, &d, t);
                if let Some(qt) = qt {
                    let armijo = qt <= e.quotient - opts.armijo * t * gd;
                    if armijo || (qt <= e.quotient + floor && t * gd < floor) {
                        accepted = Some((trial, nclip, qt));
                        break;
                    }
                }
                t *= opts.shrink;
            }
            // A full step that succeeds may still be short along slow modes:
            // keep doubling while the quotient keeps falling.
            if t == opts.initial_step {
                while let Some((_, _, q_best)) = &accepted {
                    let t2 = 2.0 * t;
                    if t2 > opts.max_step {
                        break;
                    }
                    let (trial, nclip, qt) = self.trial(&x, &d, t2);
                    match qt {
                        Some(qt) if qt < *q_best => {
                            accepted = Some((trial, nclip, qt));
                            t = t2;
                        }
                        _ => break,
                    }
                }
            }
            let Some((mut trial, nclip, qt)) = accepted else {
                stalls += 1;
                if stalls > 3 {
                    return Ok(DescentOutcome {
                        x,
                        eval: e,
                        residual,
                        iterations: iter,
                        converged: false,
                        clipped,
                        max_increase,
                    });
                }
                prev = None;
                continue;
            };
            stalls = 0;
            clipped = nclip;
            max_increase = max_increase.max((qt - e.quotient) / e.quotient);
            let s = self.project(&mut trial)?;
            x = trial;
            e = self.evaluate(&x)?;
            // the quotient is scale invariant: gradients scale by 1/s, steps by s
            d.scale(s);
            z.scale(1.0 / s);
            prev = Some((z, gz / (s * s), d));
        }
        let residual = self.residual(&e);
        Ok(DescentOutcome {
            converged: residual <= opts.grad_tol,
            x,
            eval: e,
            residual,
            iterations: opts.max_iters,
            clipped,
            max_increase,
        })
    }
}

fn axpy(y: &mut Unknowns, a: f64, x: &Unknowns) {
    for (yi, xi) in y.phi.iter_mut().zip(&x.phi) {
        *yi += a * xi;
    }
    for (yi, xi) in y.v.iter_mut().zip(&x.v) {
        *yi += a * xi;
    }
    y.q += a * x.q;
}
