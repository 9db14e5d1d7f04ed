//! Run configuration: parameter maps merged as defaults < config file < flags.
//!
//! A config file holds optional `command`, `input`, `seed` and `plot` keys and
//! a `params` table. A previous report is accepted too; its
//! `resolved_config` object has the same shape, so re-running it repeats the
//! run exactly.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::args::Common;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub input: Vec<PathBuf>,
    /// Where results go; not part of the resolved config.
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub plot: bool,
    /// Every parameter of the subcommand after merging.
    pub params: Map<String, Value>,
}

impl RunConfig {
    /// The resolved configuration as embedded in reports.
    pub fn resolved_json(&self) -> Value {
        serde_json::json!({
            "command": self.command,
            "input": self.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "seed": self.seed,
            "plot": self.plot,
            "params": self.params,
        })
    }

    /// Deserializes the merged parameters into the subcommand's settings type.
    pub fn params<P: DeserializeOwned>(&self) -> Result<P, CliError> {
        serde_json::from_value(Value::Object(self.params.clone()))
            .map_err(|e| CliError::Input(format!("invalid parameters for {}: {e}", self.command)))
    }

    pub fn single_input(&self) -> Result<&Path, CliError> {
        match self.input.as_slice() {
            [one] => Ok(one),
            [] => Err(CliError::Usage(format!("{} needs --input", self.command))),
            _ => Err(CliError::Usage(format!("{} takes a single --input", self.command))),
        }
    }

    pub fn require_output(&self) -> Result<&Path, CliError> {
        self.output.as_deref().ok_or_else(|| CliError::Usage(format!("{} needs --output", self.command)))
    }
}

/// Loads a TOML or JSON file into a JSON object.
pub fn load_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        let t: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
    };
    let Value::Object(mut map) = value else {
        return Err(CliError::Input(format!("{}: top level must be a table", path.display())));
    };
    if let Some(Value::Object(inner)) = map.remove("resolved_config") {
        return Ok(inner);
    }
    Ok(map)
}

/// Writes `over` into `base`; every key must already exist in `base`.
/// Nested objects are merged key by key.
pub fn overlay(base: &mut Map<String, Value>, over: &Map<String, Value>, source: &str) -> Result<(), CliError> {
    for (k, v) in over {
        match base.get_mut(k) {
            None => return Err(CliError::Input(format!("unknown parameter '{k}' in {source}"))),
            Some(Value::Object(inner)) if v.is_object() => {
                overlay(inner, v.as_object().expect("checked"), source)?;
            }
            Some(slot) => *slot = v.clone(),
        }
    }
    Ok(())
}

/// Parses `key=value`; the value is read as JSON when possible, else kept as a string.
fn parse_set(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{s}'")))?;
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Nested map for a dotted key such as `cube.seed`.
fn dotted(key: &str, value: Value) -> Map<String, Value> {
    let mut parts = key.rsplit('.');
    let last = parts.next().expect("non-empty split");
    let mut map = Map::new();
    map.insert(last.to_string(), value);
    for p in parts {
        let mut outer = Map::new();
        outer.insert(p.to_string(), Value::Object(map));
        map = outer;
    }
    map
}

/// Resolves the run configuration of `command` with default parameters `P`.
pub fn resolve<P: Serialize + Default>(command: &str, common: &Common, flags: Map<String, Value>) -> Result<RunConfig, CliError> {
    let Value::Object(mut params) = serde_json::to_value(P::default()).expect("parameters serialize") else {
        unreachable!("parameter types are structs");
    };
    let mut input: Vec<PathBuf> = Vec::new();
    let mut seed = 0u64;
    let mut plot = false;

    if let Some(path) = &common.config {
        let mut file = load_file(path)?;
        let source = path.display().to_string();
        if let Some(c) = file.remove("command") {
            if c.as_str() != Some(command) {
                return Err(CliError::Input(format!("{source} is a config for {c}, not {command}")));
            }
        }
        if let Some(v) = file.remove("input") {
            input = match v {
                Value::String(s) => vec![PathBuf::from(s)],
                Value::Array(a) => a
                    .into_iter()
                    .map(|x| x.as_str().map(PathBuf::from).ok_or_else(|| CliError::Input(format!("{source}: input entries must be strings"))))
                    .collect::<Result<_, _>>()?,
                _ => return Err(CliError::Input(format!("{source}: input must be a string or a list"))),
            };
        }
        if let Some(v) = file.remove("seed") {
            seed = v.as_u64().ok_or_else(|| CliError::Input(format!("{source}: seed must be a non-negative integer")))?;
        }
        if let Some(v) = file.remove("plot") {
            plot = v.as_bool().ok_or_else(|| CliError::Input(format!("{source}: plot must be a boolean")))?;
        }
        if let Some(v) = file.remove("params") {
            let Value::Object(p) = v else {
                return Err(CliError::Input(format!("{source}: params must be a table")));
            };
            overlay(&mut params, &p, &source)?;
        }
        if let Some(k) = file.keys().next() {
            return Err(CliError::Input(format!("unknown key '{k}' in {source}")));
        }
    }

    overlay(&mut params, &flags, "command-line flags")?;
    for s in &common.set {
        let (k, v) = parse_set(s)?;
        overlay(&mut params, &dotted(&k, v), "--set")?;
    }
    if !common.input.is_empty() {
        input = common.input.clone();
    }
    if let Some(s) = common.seed {
        seed = s;
    }
    plot |= common.plot;
    Ok(RunConfig { command: command.to_string(), input, output: common.output.clone(), seed, plot, params })
}

/// Builds a flag map from `(key, value)` pairs, skipping absent values.
pub fn flag_map<I: IntoIterator<Item = (&'static str, Option<Value>)>>(pairs: I) -> Map<String, Value> {
    pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Default)]
    struct P {
        a: f64,
        b: Option<String>,
        inner: Inner,
    }

    #[derive(Serialize, Default)]
    struct Inner {
        x: u64,
        y: u64,
    }

    fn common() -> Common {
        Common { input: vec![], output: None, config: None, seed: None, plot: false, set: vec![] }
    }

    #[test]
    fn flags_override_defaults_and_unknown_keys_fail() {
        let cfg = resolve::<P>("x", &common(), flag_map([("a", Some(2.0.into())), ("b", None)])).unwrap();
        assert_eq!(cfg.params["a"], 2.0);
        assert!(cfg.params["b"].is_null());
        let err = resolve::<P>("x", &common(), flag_map([("c", Some(1.into()))])).unwrap_err();
        assert!(matches!(err, CliError::Input(_)));
    }

    #[test]
    fn file_then_flags_with_nested_merge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\ninput = \"a.csv\"\n[params]\na = 1.5\n[params.inner]\nx = 3\n").unwrap();
        let mut c = common();
        c.config = Some(path);
        c.set = vec!["inner.y=4".into()];
        let cfg = resolve::<P>("x", &c, Map::new()).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.input, vec![PathBuf::from("a.csv")]);
        assert_eq!(cfg.params["a"], 1.5);
        assert_eq!(cfg.params["inner"]["x"], 3);
        assert_eq!(cfg.params["inner"]["y"], 4);
        c.set = vec!["inner.z=1".into()];
        assert!(resolve::<P>("x", &c, Map::new()).is_err());
    }

    #[test]
    fn report_config_is_accepted_and_command_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        std::fs::write(&path, r#"{"chi2_reduced": 1.0, "resolved_config": {"command": "x", "input": ["d.csv"], "seed": 2, "plot": true, "params": {"a": 7}}}"#).unwrap();
        let mut c = common();
        c.config = Some(path);
        let cfg = resolve::<P>("x", &c, Map::new()).unwrap();
        assert_eq!((cfg.seed, cfg.plot, cfg.params["a"].as_f64()), (2, true, Some(7.0)));
        assert!(resolve::<P>("y", &c, Map::new()).is_err());
    }

    #[test]
    fn set_values_parse_as_json_or_string() {
        assert_eq!(parse_set("k=1e-3").unwrap().1, Value::from(1e-3));
        assert_eq!(parse_set("k=auto").unwrap().1, Value::from("auto"));
        assert_eq!(parse_set("k=[1,2]").unwrap().1, serde_json::json!([1, 2]));
        assert!(parse_set("k").is_err());
    }
}
