//! Numerical ground states of the planar coupled cubic Schrödinger system
//!
//! ```text
//! −Δ_α u + ω u = u³ + β u v²
//! −Δ v  + ω̃ v = v³ + β u² v
//! ```
//!
//! where `−Δ_α` is the Laplacian with a point interaction of strength `α` at
//! the origin. Ground states are found by minimizing the Nehari quotient over
//! nonnegative radial profiles, with the first component represented as a
//! regular part plus a multiple of the Green's function.
//!
//! Module map:
//!
//! * [`specfun`]: `K₀`, the Green's function, `θ_λ`, `ω_α`;
//! * [`grid`]: graded radial grid, quadrature and the Dirichlet energy;
//! * [`model`]: parameters, states, the functionals and the Nehari quotient;
//! * [`solver`]: quotient minimization and the ODE shooting oracle;
//! * [`phase`]: classification, β-sweeps, thresholds, regime table and
//!   large-β asymptotics.

pub mod error;
pub mod grid;
pub mod model;
pub mod phase;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use grid::{Field, Grid, GridPolicy, GridSpec};
pub use model::{
    energy, energy_with, nehari_quotient, nehari_quotient_with, CoupledState, Decomposition,
    EnergyReport, Functional, Interaction, Params, StateDump,
};
pub use phase::{
    AsymptoticReport, Classification, ClassifyTolerances, Regime, RegimeGrid, RegimeTable,
    Regularity, SweepReport, SweepRow, Threshold, Vectorness,
};
pub use solver::{GroundState, Residuals, SeedPolicy, SolveOptions};
