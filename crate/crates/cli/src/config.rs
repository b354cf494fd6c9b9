//! Flat `key=value` run configuration with dotted section prefixes.
//!
//! An empty file (or no file) yields the baseline parameter set. Unknown
//! keys are rejected so that typos fail closed instead of silently running
//! the baseline.

use dia_core::{DiaContract, MarketModel, MortalityModel, Preferences};
use std::fmt;

/// How the risky allocation is chosen in each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    /// Everything in the risky asset throughout.
    Fixed,
    /// Optimal clamped alpha before retirement, fully risky after.
    DynamicPre,
    /// Optimal clamped alpha in both phases.
    Dynamic,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub rho: f64,
    pub nu: f64,
    pub pi: f64,
    pub lambda0: f64,
    pub m: f64,
    pub b: f64,
    pub gamma: f64,
    pub q: f64,
    pub start_age: f64,
    pub retirement_age: f64,
    pub w_max: f64,
    pub w_nodes: usize,
    pub i_max: f64,
    pub i_nodes: usize,
    pub dt: f64,
    pub terminal_age: f64,
    pub allocation: Allocation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mu: 0.08,
            sigma: 0.16,
            r: 0.0325,
            rho: 0.0325,
            nu: 1.0,
            pi: 1.0,
            lambda0: 0.0,
            m: 89.335,
            b: 9.5,
            gamma: 3.0,
            q: 1.0,
            start_age: 55.0,
            retirement_age: 65.0,
            w_max: 30.0,
            w_nodes: 301,
            i_max: 6.0,
            i_nodes: 61,
            dt: 1.0 / 24.0,
            terminal_age: 120.0,
            allocation: Allocation::Fixed,
        }
    }
}

/// A configuration problem; always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    /// Applies `key=value` lines from a file body, then validates.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one dotted key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| ConfigError(format!("{key}: expected a number, got {v:?}")))
        };
        let count = |v: &str| -> Result<usize, ConfigError> {
            v.parse::<usize>()
                .map_err(|_| ConfigError(format!("{key}: expected a positive integer, got {v:?}")))
        };
        match key {
            "market.mu" => self.mu = num(value)?,
            "market.sigma" => self.sigma = num(value)?,
            "market.r" => self.r = num(value)?,
            "market.rho" => self.rho = num(value)?,
            "market.nu" => self.nu = num(value)?,
            "market.pi" => self.pi = num(value)?,
            "mortality.lambda0" => self.lambda0 = num(value)?,
            "mortality.m" => self.m = num(value)?,
            "mortality.b" => self.b = num(value)?,
            "preferences.gamma" => self.gamma = num(value)?,
            "contract.q" => self.q = num(value)?,
            "contract.start_age" => self.start_age = num(value)?,
            "contract.retirement_age" => self.retirement_age = num(value)?,
            "grid.w_max" => self.w_max = num(value)?,
            "grid.w_nodes" => self.w_nodes = count(value)?,
            "grid.i_max" => self.i_max = num(value)?,
            "grid.i_nodes" => self.i_nodes = count(value)?,
            "grid.dt" => self.dt = num(value)?,
            "grid.terminal_age" => self.terminal_age = num(value)?,
            "mode.allocation" => {
                self.allocation = match value {
                    "fixed" => Allocation::Fixed,
                    "dynamic-pre" => Allocation::DynamicPre,
                    "dynamic" => Allocation::Dynamic,
                    other => {
                        return Err(ConfigError(format!(
                            "mode.allocation: expected fixed, dynamic-pre, or dynamic, got {other:?}"
                        )))
                    }
                }
            }
            other => return Err(ConfigError(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Re-validates every constraint through the core constructors.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.market().map_err(|e| ConfigError(e.to_string()))?;
        self.mortality().map_err(|e| ConfigError(e.to_string()))?;
        self.preferences().map_err(|e| ConfigError(e.to_string()))?;
        if !(self.retirement_age > self.start_age) {
            return Err(ConfigError(format!(
                "retirement age {} must exceed start age {}",
                self.retirement_age, self.start_age
            )));
        }
        if !(self.terminal_age > self.retirement_age) {
            return Err(ConfigError(format!(
                "terminal age {} must exceed retirement age {}",
                self.terminal_age, self.retirement_age
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError(format!("grid.dt must be positive, got {}", self.dt)));
        }
        self.contract().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    pub fn market(&self) -> dia_core::error::Result<MarketModel> {
        MarketModel::new(self.mu, self.sigma, self.r, self.rho, self.nu, self.pi)
    }

    pub fn mortality(&self) -> dia_core::error::Result<MortalityModel> {
        MortalityModel::new(self.lambda0, self.m, self.b)
    }

    pub fn preferences(&self) -> dia_core::error::Result<Preferences> {
        Preferences::new(self.gamma)
    }

    pub fn contract(&self) -> dia_core::error::Result<DiaContract> {
        DiaContract::new(self.q, self.retirement_age - self.start_age, self.start_age)
    }
}
