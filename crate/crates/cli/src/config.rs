//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys use dotted namespaces
//! (`params.alpha`, `grid.n`). Lists are comma separated. Every key has a
//! default, unknown keys are rejected, and [`RunConfig::emit`] writes a file
//! that parses back to the same configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use serde::Serialize;

use delta_nls_core::specfun::omega_alpha;
use delta_nls_core::{
    ClassifyTolerances, GridPolicy, GridSpec, Interaction, Params, SeedPolicy, SolveOptions,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Scalar,
    Sweep,
    Thresholds,
    Regimes,
    Limit,
    Asymptotics,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Solve,
        Command::Scalar,
        Command::Sweep,
        Command::Thresholds,
        Command::Regimes,
        Command::Limit,
        Command::Asymptotics,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Scalar => "scalar",
            Command::Sweep => "sweep",
            Command::Thresholds => "thresholds",
            Command::Regimes => "regimes",
            Command::Limit => "limit",
            Command::Asymptotics => "asymptotics",
            Command::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            _ => Err(format!("unknown format {s:?}, expected csv, json or svg")),
        }
    }
}

/// Everything a run needs. Field defaults are the documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub alpha: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub beta: f64,
    pub interaction: Interaction,
    pub grid_n: usize,
    /// `None` derives `r_max` from the decay rate of each problem.
    pub grid_r_max: Option<f64>,
    pub grid_grading: f64,
    pub solve: SolveOptions,
    pub sweep_betas: Vec<f64>,
    pub thresholds_lo: f64,
    /// `None` searches for an upper end by doubling.
    pub thresholds_hi: Option<f64>,
    pub thresholds_tol: f64,
    pub regimes_ratios: Vec<f64>,
    pub regimes_offsets: Vec<f64>,
    pub regimes_tol: f64,
    pub asymptotics_betas: Vec<f64>,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let regimes = delta_nls_core::RegimeGrid::default();
        Self {
            command: Command::Solve,
            alpha: 0.0,
            omega: 4.0,
            omega_tilde: 0.2,
            beta: 0.0,
            interaction: Interaction::Point,
            grid_n: GridSpec::DEFAULT_N,
            grid_r_max: None,
            grid_grading: GridSpec::DEFAULT_GRADING,
            solve: SolveOptions::default(),
            sweep_betas: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            thresholds_lo: 0.0,
            thresholds_hi: None,
            thresholds_tol: 1e-2,
            regimes_ratios: regimes.ratios,
            regimes_offsets: regimes.beta_offsets,
            regimes_tol: regimes.tol,
            asymptotics_betas: vec![25.0, 50.0, 100.0],
            output_dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

/// Every accepted key, in emission order.
pub const KEYS: &[&str] = &[
    "command",
    "params.alpha",
    "params.omega",
    "params.omega_tilde",
    "params.beta",
    "params.interaction",
    "grid.n",
    "grid.r_max",
    "grid.grading",
    "solve.max_iters",
    "solve.grad_tol",
    "solve.initial_step",
    "solve.max_step",
    "solve.min_step",
    "solve.shrink",
    "solve.armijo",
    "solve.restarts",
    "solve.seed",
    "classify.component_tol",
    "classify.charge_tol",
    "sweep.betas",
    "thresholds.lo",
    "thresholds.hi",
    "thresholds.tol",
    "regimes.ratios",
    "regimes.offsets",
    "regimes.tol",
    "asymptotics.betas",
    "output.dir",
    "output.formats",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| {
        ConfigError::at(
            key,
            format!("cannot parse {value:?} as a {}", std::any::type_name::<T>()),
        )
    })
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn auto_or_num(key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value == "auto" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn auto(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Parses `text` on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let with_line = |mut e: ConfigError| {
                e.line = Some(k + 1);
                e
            };
            let (key, value) = line.split_once('=').ok_or_else(|| {
                with_line(ConfigError {
                    key: None,
                    line: None,
                    message: format!("expected `key = value`, got {line:?}"),
                })
            })?;
            cfg.set(key.trim(), value.trim()).map_err(with_line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one assignment without validating the whole configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let s = &mut self.solve;
        match key {
            "command" => self.command = value.parse().map_err(|e| ConfigError::at(key, e))?,
            "params.alpha" => self.alpha = num(key, value)?,
            "params.omega" => self.omega = num(key, value)?,
            "params.omega_tilde" => self.omega_tilde = num(key, value)?,
            "params.beta" => self.beta = num(key, value)?,
            "params.interaction" => {
                self.interaction = value
                    .parse()
                    .map_err(|e: delta_nls_core::Error| ConfigError::at(key, e.to_string()))?
            }
            "grid.n" => self.grid_n = num(key, value)?,
            "grid.r_max" => self.grid_r_max = auto_or_num(key, value)?,
            "grid.grading" => self.grid_grading = num(key, value)?,
            "solve.max_iters" => s.max_iters = num(key, value)?,
            "solve.grad_tol" => s.grad_tol = num(key, value)?,
            "solve.initial_step" => s.initial_step = num(key, value)?,
            "solve.max_step" => s.max_step = num(key, value)?,
            "solve.min_step" => s.min_step = num(key, value)?,
            "solve.shrink" => s.shrink = num(key, value)?,
            "solve.armijo" => s.armijo = num(key, value)?,
            "solve.restarts" => s.restarts = num(key, value)?,
            "solve.seed" => {
                s.seed = if value == "standard" {
                    SeedPolicy::Standard
                } else {
                    SeedPolicy::Perturbed {
                        seed: num(key, value)?,
                    }
                }
            }
            "classify.component_tol" => s.classify.component_tol = num(key, value)?,
            "classify.charge_tol" => s.classify.charge_tol = num(key, value)?,
            "sweep.betas" => self.sweep_betas = list(key, value)?,
            "thresholds.lo" => self.thresholds_lo = num(key, value)?,
            "thresholds.hi" => self.thresholds_hi = auto_or_num(key, value)?,
            "thresholds.tol" => self.thresholds_tol = num(key, value)?,
            "regimes.ratios" => self.regimes_ratios = list(key, value)?,
            "regimes.offsets" => self.regimes_offsets = list(key, value)?,
            "regimes.tol" => self.regimes_tol = num(key, value)?,
            "asymptotics.betas" => self.asymptotics_betas = list(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "output.formats" => {
                self.formats = value
                    .split(',')
                    .map(str::trim)
                    .filter(|f| !f.is_empty())
                    .map(|f| f.parse().map_err(|e| ConfigError::at(key, e)))
                    .collect::<Result<_, _>>()?
            }
            _ => {
                return Err(ConfigError {
                    key: Some(key.to_string()),
                    line: None,
                    message: "unknown key".to_string(),
                })
            }
        }
        Ok(())
    }

    /// Value of `key` as it would be written by [`emit`](Self::emit).
    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.solve;
        Some(match key {
            "command" => self.command.to_string(),
            "params.alpha" => self.alpha.to_string(),
            "params.omega" => self.omega.to_string(),
            "params.omega_tilde" => self.omega_tilde.to_string(),
            "params.beta" => self.beta.to_string(),
            "params.interaction" => self.interaction.to_string(),
            "grid.n" => self.grid_n.to_string(),
            "grid.r_max" => auto(self.grid_r_max),
            "grid.grading" => self.grid_grading.to_string(),
            "solve.max_iters" => s.max_iters.to_string(),
            "solve.grad_tol" => s.grad_tol.to_string(),
            "solve.initial_step" => s.initial_step.to_string(),
            "solve.max_step" => s.max_step.to_string(),
            "solve.min_step" => s.min_step.to_string(),
            "solve.shrink" => s.shrink.to_string(),
            "solve.armijo" => s.armijo.to_string(),
            "solve.restarts" => s.restarts.to_string(),
            "solve.seed" => match s.seed {
                SeedPolicy::Standard => "standard".to_string(),
                SeedPolicy::Perturbed { seed } => seed.to_string(),
            },
            "classify.component_tol" => s.classify.component_tol.to_string(),
            "classify.charge_tol" => s.classify.charge_tol.to_string(),
            "sweep.betas" => join(&self.sweep_betas),
            "thresholds.lo" => self.thresholds_lo.to_string(),
            "thresholds.hi" => auto(self.thresholds_hi),
            "thresholds.tol" => self.thresholds_tol.to_string(),
            "regimes.ratios" => join(&self.regimes_ratios),
            "regimes.offsets" => join(&self.regimes_offsets),
            "regimes.tol" => self.regimes_tol.to_string(),
            "asymptotics.betas" => join(&self.asymptotics_betas),
            "output.dir" => self.output_dir.display().to_string(),
            "output.formats" => self
                .formats
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join(", "),
            _ => return None,
        })
    }

    /// The full configuration, one `key = value` per line.
    pub fn emit(&self) -> String {
        KEYS.iter()
            .map(|k| {
                format!(
                    "{k} = {}\n",
                    self.get(k).expect("every listed key has a value")
                )
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::at(
                    key,
                    format!("must be positive and finite, got {x}"),
                ))
            }
        };
        if !self.alpha.is_finite() {
            return Err(ConfigError::at("params.alpha", "must be finite"));
        }
        match self.interaction {
            Interaction::Point => {
                let floor = omega_alpha(self.alpha);
                if !(self.omega > floor) {
                    return Err(ConfigError::at(
                        "params.omega",
                        format!(
                            "must exceed omega_alpha(alpha) = {floor} for alpha = {}, got {}",
                            self.alpha, self.omega
                        ),
                    ));
                }
            }
            Interaction::None => positive("params.omega", self.omega)?,
        }
        positive("params.omega_tilde", self.omega_tilde)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ConfigError::at(
                "params.beta",
                format!("must be nonnegative, got {}", self.beta),
            ));
        }
        if self.grid_n < 16 {
            return Err(ConfigError::at(
                "grid.n",
                format!("must be at least 16, got {}", self.grid_n),
            ));
        }
        if let Some(r) = self.grid_r_max {
            positive("grid.r_max", r)?;
        }
        if !(self.grid_grading >= 1.0 && self.grid_grading.is_finite()) {
            return Err(ConfigError::at(
                "grid.grading",
                format!("must be at least 1, got {}", self.grid_grading),
            ));
        }
        self.solve
            .validate()
            .map_err(|e| ConfigError::at("solve", e.to_string()))?;
        positive("classify.component_tol", self.solve.classify.component_tol)?;
        positive("classify.charge_tol", self.solve.classify.charge_tol)?;
        increasing("sweep.betas", &self.sweep_betas, 0.0)?;
        if !(self.thresholds_lo >= 0.0) {
            return Err(ConfigError::at("thresholds.lo", "must be nonnegative"));
        }
        if let Some(hi) = self.thresholds_hi {
            if !(hi > self.thresholds_lo && hi.is_finite()) {
                return Err(ConfigError::at(
                    "thresholds.hi",
                    format!("must exceed thresholds.lo, got {hi}"),
                ));
            }
        }
        positive("thresholds.tol", self.thresholds_tol)?;
        if self.regimes_ratios.is_empty() {
            return Err(ConfigError::at("regimes.ratios", "must not be empty"));
        }
        for r in &self.regimes_ratios {
            positive("regimes.ratios", *r)?;
        }
        if self.regimes_offsets.is_empty() || self.regimes_offsets.iter().any(|o| !o.is_finite()) {
            return Err(ConfigError::at(
                "regimes.offsets",
                "must be a nonempty list of finite numbers",
            ));
        }
        positive("regimes.tol", self.regimes_tol)?;
        increasing(
            "asymptotics.betas",
            &self.asymptotics_betas,
            f64::MIN_POSITIVE,
        )?;
        if self.asymptotics_betas.last().is_some_and(|b| *b < 100.0) {
            return Err(ConfigError::at(
                "asymptotics.betas",
                "the largest beta must be at least 100",
            ));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(ConfigError::at("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn params(&self) -> Params {
        Params {
            alpha: self.alpha,
            omega: self.omega,
            omega_tilde: self.omega_tilde,
            beta: self.beta,
            interaction: self.interaction,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let grid = match self.grid_r_max {
            Some(r_max) => GridPolicy::Fixed(GridSpec {
                n: self.grid_n,
                r_max,
                grading: self.grid_grading,
            }),
            None => GridPolicy::Auto {
                n: self.grid_n,
                grading: self.grid_grading,
            },
        };
        SolveOptions {
            grid,
            ..self.solve.clone()
        }
    }

    pub fn classify(&self) -> ClassifyTolerances {
        self.solve.classify
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn increasing(key: &str, xs: &[f64], min: f64) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::at(key, "must not be empty"));
    }
    if xs.iter().any(|x| !(x.is_finite() && *x >= min)) {
        return Err(ConfigError::at(
            key,
            format!("values must be finite and at least {min}"),
        ));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ConfigError::at(key, "values must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse(
            "command = solve\nparams.alpha = 0\nparams.omega = 2\nparams.omega_tilde = 1\nparams.beta = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.omega, 2.0);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.grid_n, 4096);
        assert_eq!(cfg.solve, SolveOptions::default());
    }

    #[test]
    fn omega_below_threshold_names_the_key() {
        let e = RunConfig::parse("params.alpha = 0\nparams.omega = 1.0\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("params.omega"));
        assert!(e.message.contains("omega_alpha"), "{e}");
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let e = RunConfig::parse("params.gamma = 1\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("params.gamma"), Some(1)));
        let e = RunConfig::parse("# header\ngrid.n = many\n").unwrap_err();
        assert_eq!((e.key.as_deref(), e.line), (Some("grid.n"), Some(2)));
        assert!(RunConfig::parse("just words\n").is_err());
        assert!(RunConfig::parse("sweep.betas = 1, 0.5\n").is_err());
        assert!(RunConfig::parse("output.formats = csv, pdf\n").is_err());
    }

    #[test]
    fn emit_then_parse_is_identity() {
        let mut cfg = RunConfig::default();
        cfg.set("command", "regimes").unwrap();
        cfg.set("params.alpha", "0.1").unwrap();
        cfg.set("params.omega", "3.3000000000000003").unwrap();
        cfg.set("grid.r_max", "55.5").unwrap();
        cfg.set("solve.seed", "42").unwrap();
        cfg.set("sweep.betas", "0, 0.1, 0.30000000000000004")
            .unwrap();
        cfg.set("output.formats", "json").unwrap();
        let text = cfg.emit();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        let defaults = RunConfig::default();
        assert_eq!(RunConfig::parse(&defaults.emit()).unwrap(), defaults);
    }

    #[test]
    fn every_key_round_trips_through_get_and_set() {
        let cfg = RunConfig::default();
        for key in KEYS {
            let mut other = RunConfig::default();
            other.set(key, &cfg.get(key).unwrap()).unwrap();
            assert_eq!(other, cfg, "{key}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = RunConfig::parse("\n# comment\nparams.beta = 2 # trailing\n\n").unwrap();
        assert_eq!(cfg.beta, 2.0);
    }

    proptest::proptest! {
        #[test]
        fn emitted_numbers_parse_back_exactly(
            alpha in -1.0f64..1.0,
            excess in 1e-6f64..50.0,
            omega_tilde in 1e-6f64..50.0,
            beta in 0.0f64..1e3,
            betas in proptest::collection::btree_set(0u32..1000, 1..8),
        ) {
            let mut cfg = RunConfig {
                alpha,
                omega: omega_alpha(alpha) + excess,
                omega_tilde,
                beta,
                ..RunConfig::default()
            };
            cfg.sweep_betas = betas.into_iter().map(|b| f64::from(b) / 7.0).collect();
            proptest::prop_assert_eq!(RunConfig::parse(&cfg.emit()).unwrap(), cfg);
        }
    }
}
