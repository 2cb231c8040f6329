//! JSON defaults for command-line flags. Flags always win.

use std::path::Path;

use segwave::{Error, Result};
use serde_json::{Map, Value};

#[derive(Default)]
pub struct Config(Map<String, Value>);

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(map)) => Ok(Self(map)),
            Ok(_) => Err(Error::InvalidInput(format!("{}: expected a JSON object", path.display()))),
            Err(e) => Err(Error::InvalidInput(format!("{}: {e}", path.display()))),
        }
    }

    /// Flag value, else the config entry, else `None`.
    pub fn pick(&self, key: &str, flag: Option<f64>) -> Result<Option<f64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Error::InvalidInput(format!("config field {key} must be a number"))),
        }
    }

    pub fn require(&self, key: &str, flag: Option<f64>) -> Result<f64> {
        self.pick(key, flag)?.ok_or_else(|| Error::InvalidInput(format!("missing --{}", key.replace('_', "-"))))
    }

    pub fn list(&self, key: &str, flag: Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::InvalidInput(format!("config field {key} must hold numbers"))))
                .collect::<Result<Vec<f64>>>()
                .map(Some),
            Some(_) => Err(Error::InvalidInput(format!("config field {key} must be an array"))),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(self.0.get(key), Some(Value::Bool(true)))
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(Value::as_str).map(str::to_owned)
    }
}
