//! Graded radial discretization of the plane.
//!
//! Nodes are `r_i = r_max·(i/n)^p` for `i = 1..=n`. Quadrature weights are the
//! composite trapezoid rule for `2π∫ f(r) r dr` with an implicit node at the
//! origin, where the integrand `f·r` vanishes. For `p = 2` the node spacing
//! is linear in the index, so the rule coincides with the trapezoid rule in
//! the index variable and log-power singularities at the origin are resolved
//! without a special first-panel rule.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node placement descriptor; enough to rebuild a [`Grid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    pub grading: f64,
}

impl GridSpec {
    pub const DEFAULT_N: usize = 4096;
    pub const DEFAULT_GRADING: f64 = 2.0;

    /// Default grid for a state whose slowest exponential decay rate is
    /// `√decay`: `r_max = 40/√decay`.
    pub fn for_decay(decay: f64) -> Self {
        Self {
            n: Self::DEFAULT_N,
            r_max: 40.0 / decay.sqrt(),
            grading: Self::DEFAULT_GRADING,
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn build(&self) -> Result<Arc<Grid>> {
        Grid::new(self.r_max, self.n, self.grading).map(Arc::new)
    }
}

/// How a solver chooses its grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridPolicy {
    /// Fixed size and grading; `r_max` follows the problem's decay rate as in
    /// [`GridSpec::for_decay`].
    Auto {
        n: usize,
        grading: f64,
    },
    Fixed(GridSpec),
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto {
            n: GridSpec::DEFAULT_N,
            grading: GridSpec::DEFAULT_GRADING,
        }
    }
}

impl GridPolicy {
    pub fn spec_for(&self, decay: f64) -> GridSpec {
        match *self {
            GridPolicy::Auto { n, grading } => GridSpec {
                n,
                grading,
                ..GridSpec::for_decay(decay)
            },
            GridPolicy::Fixed(spec) => spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(r_max: f64, n: usize, grading_exponent: f64) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Config(format!(
                "grid r_max must be positive, got {r_max}"
            )));
        }
        if n < 16 {
            return Err(Error::Config(format!(
                "grid needs at least 16 nodes, got {n}"
            )));
        }
        if !(grading_exponent >= 1.0) || !grading_exponent.is_finite() {
            return Err(Error::Config(format!(
                "grading exponent must be >= 1, got {grading_exponent}"
            )));
        }
        let nf = n as f64;
        let mut nodes: Vec<f64> = (1..=n)
            .map(|i| r_max * (i as f64 / nf).powf(grading_exponent))
            .collect();
        nodes[n - 1] = r_max;

        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { nodes[i - 1] };
            let right = if i + 1 == n { nodes[i] } else { nodes[i + 1] };
            weights.push(PI * nodes[i] * (right - left));
        }
        Ok(Self {
            spec: GridSpec {
                n,
                r_max,
                grading: grading_exponent,
            },
            nodes,
            weights,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    /// `Σ w_i f_i`.
    pub fn integrate_samples(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.weights.iter().zip(f).map(|(w, x)| w * x).sum()
    }

    /// `Σ w_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// `2π∫ (f′)² r dr` for the piecewise-linear interpolant of the samples.
    /// The innermost panel `[0, r₁]` carries no gradient.
    pub fn dirichlet_samples(&self, f: &[f64]) -> f64 {
        let r = &self.nodes;
        let mut sum = 0.0;
        for i in 0..r.len() - 1 {
            let df = f[i + 1] - f[i];
            sum += (r[i + 1] + r[i]) * df * df / (r[i + 1] - r[i]);
        }
        PI * sum
    }

    /// Stiffness coefficients `k_i = π(r_{i+1} + r_i)/(r_{i+1} − r_i)` so that
    /// the Dirichlet energy is `Σ k_i (f_{i+1} − f_i)²`.
    pub(crate) fn stiffness(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .map(|p| PI * (p[1] + p[0]) / (p[1] - p[0]))
            .collect()
    }

    /// Quadratic extrapolation to `r = 0` through the three innermost nodes.
    pub fn value_at_origin_samples(&self, f: &[f64]) -> f64 {
        let (r1, r2, r3) = (self.nodes[0], self.nodes[1], self.nodes[2]);
        let l1 = r2 * r3 / ((r1 - r2) * (r1 - r3));
        let l2 = r1 * r3 / ((r2 - r1) * (r2 - r3));
        let l3 = r1 * r2 / ((r3 - r1) * (r3 - r2));
        l1 * f[0] + l2 * f[1] + l3 * f[2]
    }

    pub fn integrate(&self, f: &Field) -> Result<f64> {
        f.check_grid(self)?;
        Ok(self.integrate_samples(&f.samples))
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }
}

/// Samples of a radial real function on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    samples: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} samples, grid has {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::Usage(format!("non-finite field sample {bad}")));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let samples = vec![0.0; grid.len()];
        Self { grid, samples }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, samples }
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::Usage("field sampled on a different grid".into()))
        }
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate_samples(&self.samples)
    }

    pub fn dirichlet_energy(&self) -> f64 {
        self.grid.dirichlet_samples(&self.samples)
    }

    pub fn value_at_origin(&self) -> f64 {
        self.grid.value_at_origin_samples(&self.samples)
    }

    /// `∥f∥₂²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.inner(&self.samples, &self.samples)
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        other.check_grid(&self.grid)?;
        Ok(self.grid.inner(&self.samples, &other.samples))
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `|f(r_max)| / max|f|`; the truncation diagnostic warns above 1e-10.
    pub fn tail_ratio(&self) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.samples[self.samples.len() - 1].abs() / m
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|x| s * x).collect(),
        }
    }

    /// Two-column CSV, `r,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value\n");
        for (r, f) in self.grid.nodes().iter().zip(&self.samples) {
            out.push_str(&format!("{r:.16e},{f:.16e}\n"));
        }
        out
    }
}

pub const TAIL_WARNING_RATIO: f64 = 1e-10;
