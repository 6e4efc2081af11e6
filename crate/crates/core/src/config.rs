//! Experiment configuration: a flat `key = value` format with `#` comments
//! and `[params]`, `[grid]`, `[pulse]` sections.
//!
//! ```text
//! experiment = fig2
//! seed = 7
//!
//! [params]
//! g = 2.5
//! e = 10          # sets e_plus = 10, e_minus = -10
//! t2_star = none
//!
//! [grid]
//! omega = 0.5, 1, 2
//! ```
//!
//! Unknown or repeated keys are rejected with the offending line and key,
//! as are malformed values. [`ExperimentConfig::to_config_text`] writes the
//! fully resolved configuration in the same format, and parsing it back
//! gives an identical value.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::engine::Integrator;
use crate::error::{Error, Result};
use crate::model::{SystemParams, Variant};
use crate::pulse::{Axis, ELECTRON_PULSE_DURATION, NUCLEAR_PULSE_DURATION, PUMP_DURATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig2,
    Fig2Inset,
    Fig3,
    T2Inset,
    TwoNuclei,
    Steady,
    Evolve,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Fig2,
        Experiment::Fig2Inset,
        Experiment::Fig3,
        Experiment::T2Inset,
        Experiment::TwoNuclei,
        Experiment::Steady,
        Experiment::Evolve,
        Experiment::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig2Inset => "fig2-inset",
            Experiment::Fig3 => "fig3",
            Experiment::T2Inset => "t2-inset",
            Experiment::TwoNuclei => "two-nuclei",
            Experiment::Steady => "steady",
            Experiment::Evolve => "evolve",
            Experiment::Sweep => "sweep",
        }
    }

    fn uses_grid(self) -> bool {
        matches!(self, Experiment::Fig2Inset | Experiment::Sweep)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}`")))
    }
}

/// Starting state for continuous-drive runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Uniform mixture over the ground manifold.
    Mixed,
    /// `|0_e 0_n>` (or `|0_e 00>`).
    Ground,
    /// Haar-random pure state drawn from the run seed.
    RandomPure,
}

impl InitialState {
    fn name(self) -> &'static str {
        match self {
            InitialState::Mixed => "mixed",
            InitialState::Ground => "ground",
            InitialState::RandomPure => "random-pure",
        }
    }
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(InitialState::Mixed),
            "ground" => Ok(InitialState::Ground),
            "random-pure" => Ok(InitialState::RandomPure),
            other => Err(Error::config(format!("unknown initial state `{other}` (mixed|ground|random-pure)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Markovian,
    QuasiStatic,
}

/// Pulsed-protocol controls.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSettings {
    /// DD pulse interval in microseconds.
    pub tau: f64,
    pub axis: Axis,
    pub pump_duration: f64,
    pub electron_duration: f64,
    pub nuclear_duration: f64,
    pub dd_filters_t2: bool,
    pub noise: NoiseMode,
    pub realizations: usize,
    pub t2_values: Vec<f64>,
}

impl Default for PulseSettings {
    fn default() -> Self {
        Self {
            tau: 0.01,
            axis: Axis::Y,
            pump_duration: PUMP_DURATION,
            electron_duration: ELECTRON_PULSE_DURATION,
            nuclear_duration: NUCLEAR_PULSE_DURATION,
            dd_filters_t2: true,
            noise: NoiseMode::Markovian,
            realizations: 64,
            t2_values: vec![1.0, 5.0, 10.0, 50.0, 100.0],
        }
    }
}

/// One sweep axis; `name` is a `[params]` key.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

pub const MAX_GRID_POINTS: usize = 10_000;

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: SystemParams,
    pub seed: u64,
    pub integrator: Integrator,
    /// RK4 step in microseconds; `None` picks the largest admissible step.
    pub dt: Option<f64>,
    /// Horizon (us) for fixed-time runs, or the give-up time for runs that
    /// integrate to convergence.
    pub t_end: f64,
    pub sample_dt: f64,
    /// Convergence threshold on `||L vec(rho)||`.
    pub tolerance: f64,
    pub cycles: usize,
    pub initial: InitialState,
    pub grid: Vec<GridAxis>,
    pub pulse: PulseSettings,
}

impl ExperimentConfig {
    /// Defaults for `experiment` before any overrides.
    pub fn defaults(experiment: Experiment) -> Self {
        let params = match experiment {
            Experiment::Fig3 | Experiment::T2Inset => SystemParams::pulsed(),
            Experiment::TwoNuclei => SystemParams::two_nuclei(),
            _ => SystemParams::fig2(),
        };
        let (t_end, sample_dt) = match experiment {
            Experiment::TwoNuclei => (400.0, 0.5),
            Experiment::Evolve => (10.0, 0.1),
            _ => (2000.0, 0.1),
        };
        let grid = match experiment {
            Experiment::Fig2Inset => vec![
                GridAxis {
                    name: "e".into(),
                    values: vec![5.0, 10.0, 20.0],
                },
                GridAxis {
                    name: "omega".into(),
                    values: vec![0.5, 1.0, 2.0],
                },
            ],
            _ => Vec::new(),
        };
        let pulse = PulseSettings {
            tau: if experiment == Experiment::T2Inset { 0.0 } else { 0.01 },
            ..PulseSettings::default()
        };
        Self {
            experiment,
            params,
            seed: 0,
            integrator: match experiment {
                Experiment::TwoNuclei | Experiment::Fig2Inset => Integrator::Propagator,
                _ => Integrator::Rk4,
            },
            dt: None,
            t_end,
            sample_dt,
            tolerance: 1e-8,
            cycles: 200,
            initial: InitialState::Mixed,
            grid,
            pulse,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let positive = [
            ("t_end", self.t_end),
            ("sample_dt", self.sample_dt),
            ("tolerance", self.tolerance),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config {
                    line: None,
                    key: Some(key.into()),
                    message: format!("must be > 0, got {v}"),
                });
            }
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config {
                    line: None,
                    key: Some("dt".into()),
                    message: format!("must be > 0, got {dt}"),
                });
            }
        }
        let p = &self.pulse;
        for (key, v) in [
            ("tau", p.tau),
            ("pump_duration", p.pump_duration),
            ("electron_duration", p.electron_duration),
            ("nuclear_duration", p.nuclear_duration),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config {
                    line: None,
                    key: Some(key.into()),
                    message: format!("must be >= 0, got {v}"),
                });
            }
        }
        if p.realizations == 0 {
            return Err(Error::Config {
                line: None,
                key: Some("realizations".into()),
                message: "must be >= 1".into(),
            });
        }
        if p.t2_values.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config {
                line: None,
                key: Some("t2_values".into()),
                message: "T2* values must be > 0".into(),
            });
        }
        if self.experiment == Experiment::T2Inset && p.t2_values.is_empty() {
            return Err(Error::Config {
                line: None,
                key: Some("t2_values".into()),
                message: "t2-inset needs at least one T2* value".into(),
            });
        }
        self.validate_grid()
    }

    fn validate_grid(&self) -> Result<()> {
        if !self.experiment.uses_grid() {
            if !self.grid.is_empty() {
                return Err(Error::config(format!(
                    "[grid] is only used by sweep and fig2-inset, not {}",
                    self.experiment
                )));
            }
            return Ok(());
        }
        if self.grid.is_empty() || self.grid.iter().any(|a| a.values.is_empty()) {
            return Err(Error::config(format!("{} needs a non-empty [grid]", self.experiment)));
        }
        let points = self
            .grid
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()))
            .filter(|n| *n <= MAX_GRID_POINTS);
        if points.is_none() {
            return Err(Error::config(format!("grid exceeds {MAX_GRID_POINTS} points")));
        }
        // every point must be a valid parameter set
        for axis in &self.grid {
            for v in &axis.values {
                let mut p = self.params.clone();
                set_param(&mut p, &axis.name, *v).map_err(|e| at_key(e, &axis.name))?;
                p.validate()?;
            }
        }
        Ok(())
    }

    /// Number of grid points (1 for experiments without a grid).
    pub fn grid_len(&self) -> usize {
        self.grid.iter().map(|a| a.values.len()).product()
    }

    /// Parameter sets of the grid in lexicographic order, first axis
    /// slowest.
    pub fn grid_points(&self) -> Result<Vec<(Vec<f64>, SystemParams)>> {
        let mut out = Vec::with_capacity(self.grid_len());
        let mut idx = vec![0usize; self.grid.len()];
        loop {
            let mut p = self.params.clone();
            let mut coords = Vec::with_capacity(idx.len());
            for (axis, &i) in self.grid.iter().zip(&idx) {
                let v = axis.values[i];
                set_param(&mut p, &axis.name, v)?;
                coords.push(v);
            }
            out.push((coords, p));
            // odometer increment, last axis fastest
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.grid[k].values.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Serializes every resolved field.
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "integrator = {}", self.integrator);
        let _ = writeln!(s, "dt = {}", self.dt.map_or("auto".to_string(), |v| v.to_string()));
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "sample_dt = {}", self.sample_dt);
        let _ = writeln!(s, "tolerance = {:e}", self.tolerance);
        let _ = writeln!(s, "cycles = {}", self.cycles);
        let _ = writeln!(s, "initial = {}", self.initial.name());
        s.push_str("\n[params]\n");
        let _ = writeln!(s, "variant = {}", p.variant.name());
        for (k, v) in [
            ("omega_e", p.omega_e),
            ("omega_n", p.omega_n),
            ("g", p.g),
            ("e_plus", p.e_plus),
            ("e_minus", p.e_minus),
            ("gamma_plus", p.gamma_plus),
            ("gamma_minus", p.gamma_minus),
            ("gamma_zero", p.gamma_zero),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "t2_star = {}", p.t2_star.map_or("none".to_string(), |v| v.to_string()));
        let _ = writeln!(s, "asymmetry = {}", list_or_none(&p.asymmetry));
        let _ = writeln!(s, "asymmetric_hyperfine = {}", p.asymmetric_hyperfine);
        let _ = writeln!(s, "mw_phase = {}", p.mw_phase);
        s.push_str("\n[grid]\n");
        for axis in &self.grid {
            let _ = writeln!(s, "{} = {}", axis.name, list_or_none(&axis.values));
        }
        let q = &self.pulse;
        s.push_str("\n[pulse]\n");
        let _ = writeln!(s, "tau = {}", q.tau);
        let _ = writeln!(s, "axis = {}", q.axis);
        let _ = writeln!(s, "pump_duration = {}", q.pump_duration);
        let _ = writeln!(s, "electron_duration = {}", q.electron_duration);
        let _ = writeln!(s, "nuclear_duration = {}", q.nuclear_duration);
        let _ = writeln!(s, "dd_filters_t2 = {}", q.dd_filters_t2);
        let _ = writeln!(
            s,
            "noise = {}",
            match q.noise {
                NoiseMode::Markovian => "markovian",
                NoiseMode::QuasiStatic => "quasi-static",
            }
        );
        let _ = writeln!(s, "realizations = {}", q.realizations);
        let _ = writeln!(s, "t2_values = {}", list_or_none(&q.t2_values));
        s
    }
}

fn list_or_none(v: &[f64]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
    }
}

fn at_key(e: Error, key: &str) -> Error {
    match e {
        Error::Config { line, message, .. } => Error::Config {
            line,
            key: Some(key.to_string()),
            message,
        },
        other => other,
    }
}

/// Sets a numeric `[params]` key. `e` and `omega` are shorthands for the
/// symmetric optical and drive settings.
pub fn set_param(p: &mut SystemParams, key: &str, v: f64) -> Result<()> {
    match key {
        "omega_e" => p.omega_e = v,
        "omega_n" => p.omega_n = v,
        "omega" => {
            p.omega_e = v;
            p.omega_n = v;
        }
        "g" => p.g = v,
        "e" => {
            p.e_plus = v;
            p.e_minus = -v;
        }
        "e_plus" => p.e_plus = v,
        "e_minus" => p.e_minus = v,
        "gamma_plus" => p.gamma_plus = v,
        "gamma_minus" => p.gamma_minus = v,
        "gamma_zero" => p.gamma_zero = v,
        "t2_star" => p.t2_star = Some(v),
        "mw_phase" => p.mw_phase = v,
        other => return Err(Error::config(format!("`{other}` is not a numeric parameter"))),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Top,
    Params,
    Grid,
    Pulse,
}

struct Entry<'a> {
    line: usize,
    section: Section,
    key: &'a str,
    value: &'a str,
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut section = Section::Top;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config {
                    line: Some(line),
                    key: None,
                    message: format!("malformed section header `{content}`"),
                })?
                .trim();
            section = match name {
                "params" => Section::Params,
                "grid" => Section::Grid,
                "pulse" => Section::Pulse,
                other => {
                    return Err(Error::Config {
                        line: Some(line),
                        key: None,
                        message: format!("unknown section `[{other}]`"),
                    })
                }
            };
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line: Some(line),
            key: None,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config {
                line: Some(line),
                key: None,
                message: "empty key".into(),
            });
        }
        if !seen.insert((section, key)) {
            return Err(Error::config_at(line, key, "repeated key"));
        }
        out.push(Entry {
            line,
            section,
            key,
            value,
        });
    }
    Ok(out)
}

fn number(e: &Entry) -> Result<f64> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| Error::config_at(e.line, e.key, format!("expected a number, got `{}`", e.value)))?;
    if !v.is_finite() {
        return Err(Error::config_at(e.line, e.key, "value must be finite"));
    }
    Ok(v)
}

fn optional_number(e: &Entry) -> Result<Option<f64>> {
    match e.value {
        "none" | "auto" => Ok(None),
        _ => number(e).map(Some),
    }
}

fn integer<T: FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| Error::config_at(e.line, e.key, format!("expected a non-negative integer, got `{}`", e.value)))
}

fn boolean(e: &Entry) -> Result<bool> {
    match e.value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::config_at(e.line, e.key, format!("expected true or false, got `{other}`"))),
    }
}

fn list(e: &Entry) -> Result<Vec<f64>> {
    if e.value == "none" {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::config_at(e.line, e.key, format!("expected a number in list, got `{s}`")))
        })
        .collect()
}

fn parsed<T: FromStr<Err = Error>>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|err| relocate(err, e))
}

fn relocate(err: Error, e: &Entry) -> Error {
    match err {
        Error::Config { message, .. } => Error::config_at(e.line, e.key, message),
        other => other,
    }
}

/// Parses a configuration; the experiment comes from the `experiment` key
/// (default `fig2`).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_for(text, None)
}

/// Parses a configuration for a given experiment. A conflicting
/// `experiment` key is an error.
pub fn parse_config_for(text: &str, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
    let entries = tokenize(text)?;
    let declared = entries
        .iter()
        .find(|e| e.section == Section::Top && e.key == "experiment")
        .map(|e| parsed::<Experiment>(e).map(|x| (x, e)))
        .transpose()?;
    let experiment = match (experiment, declared) {
        (Some(want), Some((got, e))) if want != got => {
            return Err(Error::config_at(
                e.line,
                e.key,
                format!("config is for `{got}` but `{want}` was requested"),
            ))
        }
        (Some(want), _) => want,
        (None, Some((got, _))) => got,
        (None, None) => Experiment::Fig2,
    };
    let mut cfg = ExperimentConfig::defaults(experiment);
    let mut grid_cleared = false;

    for e in &entries {
        match e.section {
            Section::Top => match e.key {
                "experiment" => {}
                "seed" => cfg.seed = integer(e)?,
                "integrator" => cfg.integrator = parsed(e)?,
                "dt" => cfg.dt = optional_number(e)?,
                "t_end" => cfg.t_end = number(e)?,
                "sample_dt" => cfg.sample_dt = number(e)?,
                "tolerance" => cfg.tolerance = number(e)?,
                "cycles" => cfg.cycles = integer(e)?,
                "initial" => cfg.initial = parsed(e)?,
                _ => return Err(Error::config_at(e.line, e.key, "unknown key")),
            },
            Section::Params => {
                let p = &mut cfg.params;
                match e.key {
                    "variant" => {
                        let v = Variant::from_name(e.value).ok_or_else(|| {
                            Error::config_at(e.line, e.key, format!("unknown variant `{}`", e.value))
                        })?;
                        if v != p.variant {
                            p.variant = v;
                            p.mw_phase = v.default_mw_phase();
                        }
                    }
                    "t2_star" => p.t2_star = optional_number(e)?,
                    "asymmetry" => p.asymmetry = list(e)?,
                    "asymmetric_hyperfine" => p.asymmetric_hyperfine = boolean(e)?,
                    key => {
                        let v = number(e)?;
                        set_param(p, key, v).map_err(|_| Error::config_at(e.line, e.key, "unknown key"))?;
                    }
                }
            }
            Section::Grid => {
                let mut probe = SystemParams::default();
                if set_param(&mut probe, e.key, 0.0).is_err() {
                    return Err(Error::config_at(e.line, e.key, "not a sweepable parameter"));
                }
                if !grid_cleared {
                    cfg.grid.clear();
                    grid_cleared = true;
                }
                cfg.grid.push(GridAxis {
                    name: e.key.to_string(),
                    values: list(e)?,
                });
            }
            Section::Pulse => {
                let q = &mut cfg.pulse;
                match e.key {
                    "tau" => q.tau = number(e)?,
                    "axis" => q.axis = parsed(e)?,
                    "pump_duration" => q.pump_duration = number(e)?,
                    "electron_duration" => q.electron_duration = number(e)?,
                    "nuclear_duration" => q.nuclear_duration = number(e)?,
                    "dd_filters_t2" => q.dd_filters_t2 = boolean(e)?,
                    "noise" => {
                        q.noise = match e.value {
                            "markovian" => NoiseMode::Markovian,
                            "quasi-static" => NoiseMode::QuasiStatic,
                            other => {
                                return Err(Error::config_at(
                                    e.line,
                                    e.key,
                                    format!("unknown noise model `{other}` (markovian|quasi-static)"),
                                ))
                            }
                        }
                    }
                    "realizations" => q.realizations = integer(e)?,
                    "t2_values" => q.t2_values = list(e)?,
                    _ => return Err(Error::config_at(e.line, e.key, "unknown key")),
                }
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Extracts the configuration embedded in a `#`-prefixed output header.
pub fn config_from_header(text: &str) -> String {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}
