//! Parameter-space analysis built on the solver: classification, β-sweeps,
//! threshold bisection, the regime table and the large-β asymptotics.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoupledState, Evaluator, Params};
use crate::solver::{
    minimize_coupled, minimize_limit, minimize_scalar_point, minimize_scalar_regular, GroundState,
    SeedPolicy, SolveOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vectorness {
    ScalarU,
    ScalarV,
    Vector,
}

impl fmt::Display for Vectorness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vectorness::ScalarU => "scalar-u",
            Vectorness::ScalarV => "scalar-v",
            Vectorness::Vector => "vector",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Regular,
    Singular,
}

impl fmt::Display for Regularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularity::Regular => "regular",
            Regularity::Singular => "singular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    pub component_tol: f64,
    pub charge_tol: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self {
            component_tol: 1e-3,
            charge_tol: 1e-3,
        }
    }
}

/// A cell of the phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regime {
    pub vectorness: Vectorness,
    pub regularity: Regularity,
}

impl Regime {
    pub const SCALAR_U: Regime = Regime {
        vectorness: Vectorness::ScalarU,
        regularity: Regularity::Singular,
    };
    pub const SCALAR_V: Regime = Regime {
        vectorness: Vectorness::ScalarV,
        regularity: Regularity::Regular,
    };
    pub const VECTOR: Regime = Regime {
        vectorness: Vectorness::Vector,
        regularity: Regularity::Singular,
    };
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.vectorness, self.regularity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub vectorness: Vectorness,
    pub regularity: Regularity,
    pub tolerances: ClassifyTolerances,
}

impl Classification {
    pub fn regime(&self) -> Regime {
        Regime {
            vectorness: self.vectorness,
            regularity: self.regularity,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.regime().fmt(f)
    }
}

pub fn classify(gs: &GroundState, tols: &ClassifyTolerances) -> Result<Classification> {
    if !gs.converged {
        return Err(Error::Unconverged);
    }
    Ok(classify_unchecked(&gs.state, gs.report.a, tols))
}

/// Thresholds energy norms against `√A`: a component is absent when its
/// share is below `component_tol`, the state is regular when `q` is.
pub(crate) fn classify_unchecked(
    state: &CoupledState,
    a: f64,
    tols: &ClassifyTolerances,
) -> Classification {
    let e = Evaluator::for_state(state);
    let p = e.parts(state.u.phi.samples(), state.u.q, state.v.samples());
    let total = a.max(0.0).sqrt();
    let nu = p.a_u.max(0.0).sqrt();
    let nv = p.a_v.max(0.0).sqrt();
    let vectorness = if nv <= tols.component_tol * total {
        Vectorness::ScalarU
    } else if nu <= tols.component_tol * total {
        Vectorness::ScalarV
    } else {
        Vectorness::Vector
    };
    let regularity = if state.u.q <= tols.charge_tol * total {
        Regularity::Regular
    } else {
        Regularity::Singular
    };
    Classification {
        vectorness,
        regularity,
        tolerances: *tols,
    }
}

/// Slack for level comparisons, `1e-6` relative to `max(1, |c|)`.
pub fn level_slack(c: f64) -> f64 {
    1e-6 * c.abs().max(1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub c_beta: f64,
    pub c0_beta: f64,
    pub classification: Classification,
    pub c0_classification: Classification,
    pub q: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub beta_c: f64,
}

impl SweepRow {
    fn from_solves(beta: f64, gs: &GroundState, gs0: &GroundState) -> Self {
        let (norm_u, norm_v) = gs.component_norms();
        Self {
            beta,
            c_beta: gs.level,
            c0_beta: gs0.level,
            classification: gs.classification,
            c0_classification: gs0.classification,
            q: gs.state.u.q,
            norm_u,
            norm_v,
            beta_c: beta * gs.level,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub beta: f64,
    /// The row, or the message of the solver error that prevented it.
    pub row: std::result::Result<SweepRow, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub params: Params,
    pub c_inf: f64,
    pub entries: Vec<SweepEntry>,
    /// Human-readable descriptions of every failed structural check.
    pub violations: Vec<String>,
}

impl SweepReport {
    pub fn rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.entries.iter().filter_map(|e| e.row.as_ref().ok())
    }

    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| e.row.is_err()).count()
    }
}

fn sweep_row(params: &Params, beta: f64, opts: &SolveOptions) -> Result<SweepRow> {
    let p = params.with_beta(beta);
    let gs = minimize_coupled(&p, opts)?;
    let gs0 = minimize_coupled(&p.without_interaction(), opts)?;
    Ok(SweepRow::from_solves(beta, &gs, &gs0))
}

/// Levels `c_β` and `c⁰_β` along `betas`, plus `c̃∞` for the upper bound.
/// Rows run in parallel; a failed row is recorded and the sweep continues.
pub fn sweep_beta(params: &Params, betas: &[f64], opts: &SolveOptions) -> Result<SweepReport> {
    params.validate()?;
    opts.validate()?;
    if betas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("betas must be strictly increasing".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::Config(format!(
            "betas must be finite and nonnegative, got {b}"
        )));
    }
    let c_inf = minimize_limit(params, opts)?.level;
    let entries: Vec<SweepEntry> = betas
        .par_iter()
        .map(|&beta| SweepEntry {
            beta,
            row: sweep_row(params, beta, opts).map_err(|e| e.to_string()),
        })
        .collect();
    let violations = sweep_violations(&entries, c_inf);
    Ok(SweepReport {
        params: *params,
        c_inf,
        entries,
        violations,
    })
}

fn sweep_violations(entries: &[SweepEntry], c_inf: f64) -> Vec<String> {
    let mut out = Vec::new();
    let rows: Vec<&SweepRow> = entries.iter().filter_map(|e| e.row.as_ref().ok()).collect();
    for r in &rows {
        if r.c_beta > r.c0_beta + level_slack(r.c0_beta) {
            out.push(format!(
                "beta={}: c_beta {} exceeds c0_beta {}",
                r.beta, r.c_beta, r.c0_beta
            ));
        }
        if r.beta > 0.0 && !(r.beta_c < c_inf) {
            out.push(format!(
                "beta={}: beta*c_beta {} is not below c_inf {}",
                r.beta, r.beta_c, c_inf
            ));
        }
        // without the interaction every state is regular, so only c_beta counts
        let c = r.classification;
        if c.vectorness == Vectorness::Vector && c.regularity == Regularity::Regular {
            out.push(format!("beta={}: vector regular minimizer", r.beta));
        }
    }
    for w in rows.windows(2) {
        for (name, a, b) in [
            ("c_beta", w[0].c_beta, w[1].c_beta),
            ("c0_beta", w[0].c0_beta, w[1].c0_beta),
        ] {
            if b > a + level_slack(a) {
                out.push(format!(
                    "{name} increases from beta={} ({a}) to beta={} ({b})",
                    w[0].beta, w[1].beta
                ));
            }
        }
    }
    out
}

/// Outcome of a threshold bisection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Threshold {
    /// Midpoint of the final bracket.
    pub beta: f64,
    pub lo: f64,
    pub hi: f64,
    /// The level at `β = 0`.
    pub c_zero: f64,
    /// Relative detection margin used by the predicate.
    pub margin: f64,
    /// Relative spread of the `β = 0` level across seed policies.
    pub noise: f64,
    pub evaluations: usize,
}

/// Bisection on "the level has dropped below `c₀(1 − margin)`".
struct Bisection<F> {
    level: F,
    c_zero: f64,
    margin: f64,
    noise: f64,
    evaluations: usize,
}

impl<F: Fn(f64, SeedPolicy) -> Result<f64>> Bisection<F> {
    fn new(level: F, opts: &SolveOptions) -> Result<Self> {
        let c_zero = level(0.0, opts.seed)?;
        let other = match opts.seed {
            SeedPolicy::Standard => SeedPolicy::Perturbed { seed: 1 },
            SeedPolicy::Perturbed { seed } => SeedPolicy::Perturbed {
                seed: seed.wrapping_add(1),
            },
        };
        let noise = ((level(0.0, other)? - c_zero) / c_zero).abs();
        Ok(Self {
            level,
            c_zero,
            margin: (3.0 * noise).max(1e-5),
            noise,
            evaluations: 2,
        })
    }

    fn dropped(&mut self, beta: f64, seed: SeedPolicy) -> Result<bool> {
        self.evaluations += 1;
        Ok((self.level)(beta, seed)? < self.c_zero * (1.0 - self.margin))
    }

    fn run(
        mut self,
        (mut lo, mut hi): (f64, f64),
        tol: f64,
        seed: SeedPolicy,
    ) -> Result<Threshold> {
        if !(tol > 0.0) || !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "bisection needs 0 <= lo < hi and tol > 0, got [{lo}, {hi}], tol {tol}"
            )));
        }
        if lo > 0.0 && self.dropped(lo, seed)? {
            return Err(Error::Bracket(format!(
                "level already below c0 at the lower end {lo}"
            )));
        }
        if !self.dropped(hi, seed)? {
            return Err(Error::Bracket(format!(
                "level at the upper end {hi} is not below c0 = {} by the margin {:.1e}",
                self.c_zero, self.margin
            )));
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.dropped(mid, seed)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Threshold {
            beta: 0.5 * (lo + hi),
            lo,
            hi,
            c_zero: self.c_zero,
            margin: self.margin,
            noise: self.noise,
            evaluations: self.evaluations,
        })
    }

    /// Doubles from `start` until the predicate holds.
    fn upper(&mut self, start: f64, cap: f64, seed: SeedPolicy) -> Result<f64> {
        let mut b = start;
        while b <= cap {
            if self.dropped(b, seed)? {
                return Ok(b);
            }
            b *= 2.0;
        }
        Err(Error::Bracket(format!(
            "level stays at c0 up to beta = {cap}"
        )))
    }
}

fn coupled_level(
    params: Params,
    opts: &SolveOptions,
) -> impl Fn(f64, SeedPolicy) -> Result<f64> + '_ {
    move |beta, seed| {
        let o = SolveOptions {
            seed,
            ..opts.clone()
        };
        Ok(minimize_coupled(&params.with_beta(beta), &o)?.level)
    }
}

/// `β*`, the end of the range where `c_β = c₀`, to within `tol`.
pub fn beta_star(
    params: &Params,
    bracket: (f64, f64),
    tol: f64,
    opts: &SolveOptions,
) -> Result<Threshold> {
    params.validate()?;
    Bisection::new(coupled_level(*params, opts), opts)?.run(bracket, tol, opts.seed)
}

/// `β₀`, the same threshold for the interaction-free level `c⁰_β`.
pub fn beta_zero(
    params: &Params,
    bracket: (f64, f64),
    tol: f64,
    opts: &SolveOptions,
) -> Result<Threshold> {
    beta_star(&params.without_interaction(), bracket, tol, opts)
}

/// Largest bracket end needed by [`find_bracket`].
pub const BRACKET_CAP: f64 = 1024.0;

/// A bracket `[0, hi]` for the threshold, with `hi` found by doubling from 1.
pub fn find_bracket(params: &Params, opts: &SolveOptions) -> Result<(f64, f64)> {
    params.validate()?;
    let mut b = Bisection::new(coupled_level(*params, opts), opts)?;
    let hi = b.upper(1.0, BRACKET_CAP, opts.seed)?;
    Ok((0.0, hi))
}

/// Regime-table layout: `ω̃ = ratio · d(ω)/d⁰(1)` puts `d⁰(ω̃)` at `ratio`
/// times `d(ω)`, and `β = max(0, β* + offset)` places the cell relative to
/// the threshold. Offsets should exceed `tol` in magnitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeGrid {
    pub alpha: f64,
    pub omega: f64,
    pub ratios: Vec<f64>,
    pub beta_offsets: Vec<f64>,
    pub tol: f64,
}

impl Default for RegimeGrid {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            omega: 4.0,
            ratios: vec![0.8, 1.25],
            beta_offsets: vec![-0.5, 0.5, 2.0],
            tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeCell {
    pub ratio: f64,
    pub omega_tilde: f64,
    pub d_omega: f64,
    pub d0_omega_tilde: f64,
    pub beta_star: f64,
    pub offset: f64,
    pub beta: f64,
    pub level: f64,
    pub observed: Regime,
    /// Every regime the classification allows for this cell.
    pub predicted: Vec<Regime>,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeTable {
    pub grid: RegimeGrid,
    pub d0_one: f64,
    pub cells: Vec<RegimeCell>,
}

impl RegimeTable {
    pub fn mismatches(&self) -> usize {
        self.cells.iter().filter(|c| !c.matches).count()
    }
}

/// Below the threshold the minimizer sits on the cheaper scalar branch;
/// above it, it is vector and singular.
pub fn predicted_regimes(d: f64, d0: f64, beta: f64, beta_star: f64) -> Vec<Regime> {
    if beta > beta_star {
        return vec![Regime::VECTOR];
    }
    let tie = level_slack(d.min(d0));
    if (d - d0).abs() <= tie {
        vec![Regime::SCALAR_U, Regime::SCALAR_V]
    } else if d < d0 {
        vec![Regime::SCALAR_U]
    } else {
        vec![Regime::SCALAR_V]
    }
}

pub fn regime_table(grid: &RegimeGrid, opts: &SolveOptions) -> Result<RegimeTable> {
    if grid.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Config("regime ratios must be positive".into()));
    }
    let d_omega = minimize_scalar_point(grid.omega, grid.alpha, opts)?.level;
    let d0_one = minimize_scalar_regular(1.0, opts)?.level;
    let per_ratio: Vec<Result<Vec<RegimeCell>>> = grid
        .ratios
        .par_iter()
        .map(|&ratio| {
            let omega_tilde = ratio * d_omega / d0_one;
            let params = Params::new(grid.alpha, grid.omega, omega_tilde, 0.0)?;
            let d0 = minimize_scalar_regular(omega_tilde, opts)?.level;
            let bracket = find_bracket(&params, opts)?;
            let star = beta_star(&params, bracket, grid.tol, opts)?.beta;
            grid.beta_offsets
                .iter()
                .map(|&offset| {
                    let beta = (star + offset).max(0.0);
                    let gs = minimize_coupled(&params.with_beta(beta), opts)?;
                    let observed = gs.classification.regime();
                    let predicted = predicted_regimes(d_omega, d0, beta, star);
                    Ok(RegimeCell {
                        ratio,
                        omega_tilde,
                        d_omega,
                        d0_omega_tilde: d0,
                        beta_star: star,
                        offset,
                        beta,
                        level: gs.level,
                        matches: predicted.contains(&observed),
                        observed,
                        predicted,
                    })
                })
                .collect()
        })
        .collect();
    let mut cells = Vec::new();
    for r in per_ratio {
        cells.extend(r?);
    }
    Ok(RegimeTable {
        grid: grid.clone(),
        d0_one,
        cells,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub beta: f64,
    pub level: f64,
    pub beta_c: f64,
    /// `|β c_β − c̃∞| / c̃∞`.
    pub rel_gap: f64,
    pub sqrt_beta_q: f64,
    /// Energy-norm distance between `√β·(φ, q, v)` and the limit minimizer,
    /// after the best scalar rescaling, relative to the limit minimizer.
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub params: Params,
    pub c_inf: f64,
    pub rows: Vec<AsymptoticRow>,
    pub gap_decreasing: bool,
    pub charge_increments_decreasing: bool,
}

/// `⟨x, y⟩_A` by polarization of the quadratic form.
fn energy_inner(e: &Evaluator, x: &CoupledState, y: &CoupledState, sx: f64, sy: f64) -> f64 {
    let comb = |sign: f64| {
        let phi: Vec<f64> = (x.u.phi.samples().iter().zip(y.u.phi.samples()))
            .map(|(a, b)| sx * a + sign * sy * b)
            .collect();
        let v: Vec<f64> = (x.v.samples().iter().zip(y.v.samples()))
            .map(|(a, b)| sx * a + sign * sy * b)
            .collect();
        e.parts(&phi, sx * x.u.q + sign * sy * y.u.q, &v).a()
    };
    0.25 * (comb(1.0) - comb(-1.0))
}

fn rescaled_distance(gs: &GroundState, limit: &GroundState, beta: f64) -> Result<f64> {
    if !gs.state.grid().same_as(limit.state.grid()) {
        return Err(Error::Usage(
            "coupled and limit minimizers live on different grids".into(),
        ));
    }
    let e = Evaluator::for_state(&limit.state);
    let sb = beta.sqrt();
    let ww = energy_inner(&e, &gs.state, &gs.state, sb, sb);
    let wz = energy_inner(&e, &gs.state, &limit.state, sb, 1.0);
    let zz = energy_inner(&e, &limit.state, &limit.state, 1.0, 1.0);
    let s = wz / ww;
    let d2 = s * s * ww - 2.0 * s * wz + zz;
    Ok((d2.max(0.0) / zz).sqrt())
}

/// Compares `β c_β` with `c̃∞` along increasing `betas` (largest ≥ 100).
pub fn asymptotic_check(
    params: &Params,
    betas: &[f64],
    opts: &SolveOptions,
) -> Result<AsymptoticReport> {
    params.validate()?;
    if betas.is_empty() || betas.windows(2).any(|w| !(w[0] < w[1])) || betas[0] <= 0.0 {
        return Err(Error::Config(
            "betas must be positive and strictly increasing".into(),
        ));
    }
    if betas[betas.len() - 1] < 100.0 {
        return Err(Error::Config(
            "the largest beta must be at least 100".into(),
        ));
    }
    let limit = minimize_limit(params, opts)?;
    let c_inf = limit.level;
    let rows = betas
        .par_iter()
        .map(|&beta| {
            let gs = minimize_coupled(&params.with_beta(beta), opts)?;
            Ok(AsymptoticRow {
                beta,
                level: gs.level,
                beta_c: beta * gs.level,
                rel_gap: (beta * gs.level - c_inf).abs() / c_inf,
                sqrt_beta_q: beta.sqrt() * gs.state.u.q,
                distance: rescaled_distance(&gs, &limit, beta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gap_decreasing = rows.windows(2).all(|w| w[1].rel_gap < w[0].rel_gap);
    let increments: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].sqrt_beta_q - w[0].sqrt_beta_q).abs())
        .collect();
    let charge_increments_decreasing = increments.windows(2).all(|w| w[1] < w[0]);
    Ok(AsymptoticReport {
        params: *params,
        c_inf,
        rows,
        gap_decreasing,
        charge_increments_decreasing,
    })
}
