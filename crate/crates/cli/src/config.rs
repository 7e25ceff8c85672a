//! JSON experiment configs with command-line overrides.
//!
//! A config file is a JSON object. The keys `seed`, `out` and `svg` are
//! shared by every subcommand; all other keys belong to the subcommand and
//! unknown ones are rejected with their key path.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use uamark::gauss1d::GaussianLabParams;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";

/// Settings shared by all subcommands after overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct Common {
    pub seed: u64,
    pub out: PathBuf,
    pub svg: bool,
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: bool,
}

/// A parsed config and its shared settings.
pub struct Loaded<T> {
    pub params: T,
    pub common: Common,
}

pub fn load<T: DeserializeOwned>(path: &Path, overrides: &Overrides) -> Result<Loaded<T>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides)
}

pub fn parse<T: DeserializeOwned>(text: &str, overrides: &Overrides) -> Result<Loaded<T>, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::Config("config must be a JSON object".into()));
    };
    let seed = match map.remove("seed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| CliError::Config("seed: expected a non-negative integer".into()))?,
        ),
    };
    let out = match map.remove("out") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(CliError::Config("out: expected a string".into())),
    };
    let svg = match map.remove("svg") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => b,
        Some(_) => return Err(CliError::Config("svg: expected a boolean".into())),
    };
    let params = from_value(Value::Object(map))?;
    Ok(Loaded {
        params,
        common: Common {
            seed: overrides.seed.or(seed).unwrap_or(DEFAULT_SEED),
            out: overrides.out.clone().or(out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            svg: overrides.svg || svg,
        },
    })
}

fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        // Depending on where the error surfaces, the path may stop at the
        // parent of an unknown key; name the key itself.
        let key_path = match inner.strip_prefix("unknown field `").and_then(|r| r.split_once('`')) {
            Some((key, _)) if path == "." => key.to_string(),
            Some((key, _)) if path != key && !path.ends_with(&format!(".{key}")) => format!("{path}.{key}"),
            _ => path,
        };
        CliError::Config(format!("{key_path}: {inner}"))
    })
}

/// The config with every default filled in, plus the shared settings.
pub fn resolved<T: Serialize>(params: &T, common: &Common) -> Result<Value, CliError> {
    let mut value = serde_json::to_value(params).map_err(|e| CliError::Config(e.to_string()))?;
    let map: &mut Map<String, Value> = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must serialize to an object".into()))?;
    map.insert("seed".into(), Value::from(common.seed));
    map.insert("out".into(), Value::from(common.out.display().to_string()));
    map.insert("svg".into(), Value::from(common.svg));
    Ok(value)
}

/// One-period Gaussian lab in per-step units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub mu: f64,
    pub sigma2: f64,
    pub n_obs: usize,
    pub lambda: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        let p = GaussianLabParams::reference();
        Self {
            mu: p.mu,
            sigma2: p.sigma2,
            n_obs: p.n_obs,
            lambda: p.lambda,
        }
    }
}

impl LabConfig {
    pub fn params(&self) -> Result<GaussianLabParams, CliError> {
        Ok(GaussianLabParams::new(self.mu, self.sigma2, self.n_obs, self.lambda)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// `points` values from `min` to `max`, both included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize, scale: Scale) -> Self {
        Self { min, max, points, scale }
    }

    pub fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let bad = |why: &str| CliError::Config(format!("{name}: {why}"));
        if self.points == 0 {
            return Err(bad("points must be positive"));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(bad("need finite min <= max"));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = |i: usize| i as f64 / (self.points - 1) as f64;
        match self.scale {
            Scale::Linear => Ok((0..self.points).map(|i| self.min + (self.max - self.min) * step(i)).collect()),
            Scale::Log => {
                if self.min <= 0.0 {
                    return Err(bad("log grids need min > 0"));
                }
                Ok(uamark::gauss1d::log_grid(self.min, self.max, self.points))
            }
        }
    }
}
