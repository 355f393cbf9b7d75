//! JSON configuration files: unit-suffixed keys, unknown keys rejected,
//! errors reported as `path:line:column: message`.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sympcool::constants::{AMU, GAUSS, STANDARD_GRAVITY};
use sympcool::physics::{PhysicsError, SpeciesState, TrapConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Error)]
#[error("{path}:{line}:{column}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A parsed config together with its source, for anchoring later errors.
pub struct Loaded<T> {
    pub value: T,
    path: String,
    text: String,
}

impl<T: DeserializeOwned> Loaded<T> {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: name.clone(),
            line: 1,
            column: 1,
            message: format!("cannot read config: {e}"),
        })?;
        let value = serde_json::from_str(&text).map_err(|e| ConfigError {
            path: name.clone(),
            line: e.line().max(1),
            column: e.column().max(1),
            message: e.to_string(),
        })?;
        Ok(Self {
            value,
            path: name,
            text,
        })
    }
}

impl<T> Loaded<T> {
    /// Error anchored at the first occurrence of `"key"`, or at 1:1.
    pub fn invalid(&self, key: &str, message: impl fmt::Display) -> ConfigError {
        let needle = format!("\"{key}\"");
        let (line, column) = self
            .text
            .lines()
            .enumerate()
            .find_map(|(i, l)| l.find(&needle).map(|c| (i + 1, c + 1)))
            .unwrap_or((1, 1));
        ConfigError {
            path: self.path.clone(),
            line,
            column,
            message: format!("{key}: {message}"),
        }
    }
}

/// Error for settings given on the command line rather than in a file.
pub fn flag_error(flag: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        path: "<command line>".into(),
        line: 1,
        column: 1,
        message: format!("--{flag}: {message}"),
    }
}

pub fn positive(key: &'static str, x: f64) -> Result<(), (&'static str, String)> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err((key, format!("must be positive and finite, got {x}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesCfg {
    pub label: String,
    #[serde(rename = "F")]
    pub f: i32,
    #[serde(rename = "mF")]
    pub mf: i32,
    pub mass_amu: f64,
    pub sigma_self_m2: f64,
    pub sigma_cross_m2: f64,
}

impl SpeciesCfg {
    pub fn to_state(&self) -> Result<SpeciesState, PhysicsError> {
        SpeciesState::new(
            self.label.clone(),
            self.f,
            self.mf,
            self.mass_amu * AMU,
            self.sigma_self_m2,
            self.sigma_cross_m2,
        )
    }
}

fn default_gradient() -> f64 {
    1000.0
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

/// Ioffe-Pritchard fields in lab units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapCfg {
    #[serde(rename = "B0_gauss")]
    pub b0_gauss: f64,
    #[serde(rename = "gradient_G_per_cm", default = "default_gradient")]
    pub gradient_g_per_cm: f64,
    /// Defaults to `B0` over 1 cm^2.
    #[serde(rename = "curvature_G_per_cm2", default)]
    pub curvature_g_per_cm2: Option<f64>,
    #[serde(default = "default_gravity")]
    pub gravity_m_per_s2: f64,
}

impl TrapCfg {
    pub fn canonical(mut self) -> Self {
        self.curvature_g_per_cm2.get_or_insert(self.b0_gauss);
        self
    }

    pub fn to_trap(&self) -> TrapConfig {
        TrapConfig {
            b0: self.b0_gauss * GAUSS,
            // 1 G/cm = 1e-2 T/m; 1 G/cm^2 = 1 T/m^2.
            gradient: self.gradient_g_per_cm * 1e-2,
            curvature: self.curvature_g_per_cm2.unwrap_or(self.b0_gauss),
            gravity: self.gravity_m_per_s2,
        }
    }
}
