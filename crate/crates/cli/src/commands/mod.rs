pub mod budget;
pub mod contact;
pub mod dsmc;
pub mod phase;
pub mod trap;
pub mod traj;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::config::{flag_error, CliError, Loaded};
use crate::Common;

/// Config named by `--config`, which the command requires.
fn load<T: DeserializeOwned>(path: Option<&Path>) -> Result<Loaded<T>, CliError> {
    let path = path.ok_or_else(|| flag_error("config", "this command needs a configuration file"))?;
    Ok(Loaded::read(path)?)
}

fn to_value(x: &impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(CliError::runtime)
}

/// Prints `value` to stdout as pretty JSON.
fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value).map_err(CliError::runtime)?);
    Ok(())
}

fn hz(omega: f64) -> f64 {
    omega / std::f64::consts::TAU
}

fn common_config(c: &Common) -> Option<&Path> {
    c.config.as_deref()
}
