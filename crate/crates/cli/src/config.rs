//! Strict JSON configuration: a [`FlowConfig`] plus an optional `check` section.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use swflow_core::functional::{MAX_FD_STEP, MIN_FD_STEP};
use swflow_core::FlowConfig;

fn default_h() -> f64 {
    1e-4
}

fn default_directions() -> usize {
    20
}

/// Settings of the finite-difference gradient check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self { h: default_h(), directions: default_directions(), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub flow: FlowConfig,
    pub check: CheckSpec,
}

const CHECK_KEY: &str = "check";

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let Value::Object(mut map) = value else {
        bail!("config must be a JSON object");
    };
    let check = match map.remove(CHECK_KEY) {
        Some(v) => typed::<CheckSpec>(v, CHECK_KEY)?,
        None => CheckSpec::default(),
    };
    let flow: FlowConfig = typed(Value::Object(map), "")?;
    flow.validate().map_err(|e| anyhow!("{e}"))?;
    if !(MIN_FD_STEP..=MAX_FD_STEP).contains(&check.h) {
        bail!("check.h = {} outside the allowed range [{MIN_FD_STEP}, {MAX_FD_STEP}]", check.h);
    }
    if check.directions == 0 {
        bail!("check.directions must be at least 1");
    }
    Ok(RunConfig { flow, check })
}

fn typed<T: serde::de::DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.inner().to_string();
        let mut path = e.path().to_string();
        if path == "." {
            path.clear();
        }
        let path = match (prefix.is_empty(), path.is_empty()) {
            (true, _) => path,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{path}"),
        };
        let top_level = prefix.is_empty() && !path.contains('.');
        match unknown_field(&inner, top_level) {
            Some((name, Some(best))) => anyhow!("unknown key `{name}` at `{path}`; did you mean `{best}`?"),
            Some((name, None)) => anyhow!("unknown key `{name}` at `{path}`"),
            None if path.is_empty() => anyhow!("{inner}"),
            None => anyhow!("key `{path}`: {inner}"),
        }
    })
}

/// Name of an unknown field and the closest accepted key, if reasonably close.
fn unknown_field(msg: &str, top_level: bool) -> Option<(String, Option<String>)> {
    let rest = msg.strip_prefix("unknown field `")?;
    let (name, tail) = rest.split_once('`')?;
    let mut expected: Vec<&str> = tail.split('`').skip(1).step_by(2).collect();
    if top_level {
        expected.push(CHECK_KEY);
    }
    let best = expected
        .into_iter()
        .map(|c| (strsim::normalized_damerau_levenshtein(name, c), c))
        .filter(|(s, _)| *s >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string());
    Some((name.to_string(), best))
}

/// Build a config document in memory; used by tests and examples.
pub fn config_value(flow: &FlowConfig, check: Option<&CheckSpec>) -> Value {
    let mut map: Map<String, Value> = match serde_json::to_value(flow).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!("FlowConfig serializes to an object"),
    };
    if let Some(c) = check {
        map.insert(CHECK_KEY.into(), serde_json::to_value(c).expect("check serializes"));
    }
    Value::Object(map)
}
