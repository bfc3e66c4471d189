//! Flat key-value run configurations for the experiment driver.
//!
//! The format is deliberately dumb: one `key = value` per line, keys are the
//! field paths with dots, `#` starts a comment. A config serialized with
//! `Display` parses back to an identical value.

use std::fmt;

use crate::error::{CritError, Result};
use crate::evolve::{Dynamics, InitialDataSpec};
use crate::nonlin::NonlinearityVariant;

/// Everything a run needs, in the order it is serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `linear`, `massless`, `full-exponential` or `massive-no-cubic`.
    pub variant: String,
    /// Only `bump` for now; the custom-sample family has no text form.
    pub data_family: String,
    pub amplitude: f64,
    pub r0: f64,
    pub r_max: f64,
    pub dr: f64,
    pub cfl: f64,
    pub record_cadence: f64,
    pub t_final: f64,
    /// Apex cap of the conformal chart used by `conformal-check`.
    pub conformal_t_cap: f64,
    /// Annulus thickness for the trailing-edge bound.
    pub conformal_d: f64,
    /// Extraction horizons for `scatter`; may be empty.
    pub t_star: Vec<f64>,
    pub out_dir: String,
    /// Suites for `verify`; empty means all of them.
    pub verify: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: "massless".into(),
            data_family: "bump".into(),
            amplitude: 1.75,
            r0: 0.4,
            r_max: 33.0,
            dr: 1.0 / 256.0,
            cfl: 0.5,
            record_cadence: 0.25,
            t_final: 20.0,
            conformal_t_cap: 0.9,
            conformal_d: 2.1,
            t_star: Vec::new(),
            out_dir: String::new(),
            verify: Vec::new(),
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| CritError::InvalidInput(format!("{key}: not a number: {raw:?}")))
}

fn parse_list(raw: &str) -> Result<Vec<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| parse_f64("t_star entry", s))
        .collect()
}

fn parse_names(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl RunConfig {
    /// Parse overrides on top of the defaults. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CritError::InvalidInput(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply a single `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "variant" => self.variant = value.to_string(),
            "data.family" => self.data_family = value.to_string(),
            "data.amplitude" => self.amplitude = parse_f64(key, value)?,
            "data.r0" => self.r0 = parse_f64(key, value)?,
            "grid.r_max" => self.r_max = parse_f64(key, value)?,
            "grid.dr" => self.dr = parse_f64(key, value)?,
            "integrator.cfl" => self.cfl = parse_f64(key, value)?,
            "integrator.record_cadence" => self.record_cadence = parse_f64(key, value)?,
            "t_final" => self.t_final = parse_f64(key, value)?,
            "conformal.t_cap" => self.conformal_t_cap = parse_f64(key, value)?,
            "conformal.d" => self.conformal_d = parse_f64(key, value)?,
            "scatter.t_star" => self.t_star = parse_list(value)?,
            "output.dir" => self.out_dir = value.to_string(),
            "verify.suites" => self.verify = parse_names(value),
            other => {
                return Err(CritError::InvalidInput(format!("unknown key {other:?}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics()?;
        if self.data_family != "bump" {
            return Err(CritError::InvalidInput(format!(
                "unsupported data family {:?}",
                self.data_family
            )));
        }
        let numeric = [
            ("data.r0", self.r0),
            ("grid.r_max", self.r_max),
            ("grid.dr", self.dr),
            ("integrator.cfl", self.cfl),
            ("integrator.record_cadence", self.record_cadence),
            ("t_final", self.t_final),
            ("conformal.t_cap", self.conformal_t_cap),
            ("conformal.d", self.conformal_d),
        ];
        for (name, v) in numeric {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CritError::InvalidInput(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.amplitude.is_finite() {
            return Err(CritError::InvalidInput(format!(
                "data.amplitude must be finite, got {}",
                self.amplitude
            )));
        }
        for &t in &self.t_star {
            if !(t > 0.0) || !t.is_finite() || t > self.t_final {
                return Err(CritError::InvalidInput(format!(
                    "scatter.t_star entries must lie in (0, t_final], got {t}"
                )));
            }
        }
        // room for the full light cone of the data plus one ghost cell
        let need = self.r0 + self.t_final + 2.0 * self.dr;
        if self.r_max < need {
            return Err(CritError::InvalidInput(format!(
                "grid.r_max = {} cannot hold the light cone, need at least {need}",
                self.r_max
            )));
        }
        Ok(())
    }

    pub fn dynamics(&self) -> Result<Dynamics> {
        Ok(match self.variant.as_str() {
            "linear" => Dynamics::Linear,
            "massless" => Dynamics::Nonlinear(NonlinearityVariant::Massless),
            "full-exponential" => Dynamics::Nonlinear(NonlinearityVariant::FullExponential),
            "massive-no-cubic" => Dynamics::Nonlinear(NonlinearityVariant::MassiveNoCubic),
            other => {
                return Err(CritError::InvalidInput(format!(
                    "unknown variant {other:?}"
                )));
            }
        })
    }

    pub fn data(&self) -> InitialDataSpec {
        InitialDataSpec::bump(self.amplitude, self.r0)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant = {}", self.variant)?;
        writeln!(f, "data.family = {}", self.data_family)?;
        writeln!(f, "data.amplitude = {}", self.amplitude)?;
        writeln!(f, "data.r0 = {}", self.r0)?;
        writeln!(f, "grid.r_max = {}", self.r_max)?;
        writeln!(f, "grid.dr = {}", self.dr)?;
        writeln!(f, "integrator.cfl = {}", self.cfl)?;
        writeln!(f, "integrator.record_cadence = {}", self.record_cadence)?;
        writeln!(f, "t_final = {}", self.t_final)?;
        writeln!(f, "conformal.t_cap = {}", self.conformal_t_cap)?;
        writeln!(f, "conformal.d = {}", self.conformal_d)?;
        let stars: Vec<String> = self.t_star.iter().map(|t| t.to_string()).collect();
        writeln!(f, "scatter.t_star = {}", stars.join(", "))?;
        writeln!(f, "output.dir = {}", self.out_dir)?;
        writeln!(f, "verify.suites = {}", self.verify.join(", "))
    }
}
