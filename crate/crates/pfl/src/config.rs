//! Config loading: JSON file, then `--override key=value` patches, then
//! `--seed`, then typed parsing.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use pfl_core::domain::DomainSpec;
use pfl_core::potential::WosConfig;
use pfl_core::verify::RunBudget;

use crate::error::{CliError, CliResult};

pub const CONFIG_SCHEMA: u32 = 1;

/// Sets a dotted key, creating intermediate objects. The value is parsed as
/// JSON when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override `{spec}` is not of the form key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::usage(format!("override key `{key}` is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::usage(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

/// Raw config after overrides and seed.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub value: Value,
}

impl LoadedConfig {
    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
        let mut value: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::input(path, e))?;
        if !value.is_object() {
            return Err(CliError::input(path, "config must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        if let Some(s) = seed {
            value["seed"] = Value::from(s);
        }
        Ok(LoadedConfig {
            path: path.to_path_buf(),
            bytes,
            value,
        })
    }

    pub fn parse<T: DeserializeOwned>(&self) -> CliResult<T> {
        serde_json::from_value(self.value.clone()).map_err(|e| CliError::input(&self.path, e))
    }

    /// Resolves a path from the config relative to the config's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            return p.to_path_buf();
        }
        self.path.parent().map_or_else(|| p.to_path_buf(), |d| d.join(p))
    }
}

pub(crate) fn check_schema(schema: u32, path: &Path) -> CliResult<()> {
    if schema != CONFIG_SCHEMA {
        return Err(CliError::input(
            path,
            format!("schema {schema} is not supported (expected {CONFIG_SCHEMA})"),
        ));
    }
    Ok(())
}

fn default_samples() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_kernel() -> RunBudget {
    WosConfig::kernel_default(0).into()
}

fn default_sites() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    /// `domain.json` written by `generate`.
    pub domain_file: PathBuf,
    /// `cloud.csv` written by `generate`.
    pub cloud_file: PathBuf,
    #[serde(default = "default_kernel")]
    pub kernel: RunBudget,
    #[serde(default = "default_sites")]
    pub kernel_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_radius: Option<f64>,
}

fn default_centers() -> usize {
    50
}

fn default_radii() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05]
}

fn default_bmo_scale() -> f64 {
    0.1
}

fn default_sphere_samples() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub domain_file: PathBuf,
    pub cloud_file: PathBuf,
    #[serde(default = "default_centers")]
    pub centers: usize,
    /// Flatness and density radii as fractions of `R1`.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// BMO scale cap as a fraction of `R1`.
    #[serde(default = "default_bmo_scale")]
    pub bmo_scale: f64,
    #[serde(default = "default_sphere_samples")]
    pub sphere_samples: usize,
}
