//! Config files, flag precedence and the provenance header.
//!
//! A config is the model JSON document with optional `command` and `options`
//! entries. The first line of any CSV this tool writes (`# tlfim <version>
//! <json>`) and the `provenance` entry of its JSON outputs are configs too,
//! so every output can be fed back with `--config`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use tlfim::model::{DisorderSpec, InteractionKind, ModelSpec};

use crate::{CliError, ModelArgs};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Default)]
pub struct ConfigDoc {
    pub spec: Map<String, Value>,
    pub command: Option<String>,
    pub options: Value,
}

pub fn load(path: &Path) -> Result<ConfigDoc, CliError> {
    let text = fs::read_to_string(path)?;
    parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<ConfigDoc, String> {
    let trimmed = text.trim_start();
    let json = if let Some(rest) = trimmed.strip_prefix("# tlfim ") {
        let line = rest.lines().next().unwrap_or("");
        // skip the version token
        line.split_once(' ').map(|(_, j)| j).ok_or("empty provenance header")?
    } else {
        trimmed
    };
    let value: Value = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let Value::Object(mut map) = value else {
        return Err("expected a JSON object".into());
    };
    if let Some(Value::Object(inner)) = map.remove("provenance") {
        map = inner;
    }
    let command = match map.remove("command") {
        Some(Value::String(c)) => Some(c),
        _ => None,
    };
    let options = map.remove("options").unwrap_or(Value::Null);
    Ok(ConfigDoc {
        spec: map,
        command,
        options,
    })
}

fn overlay(base: &mut Map<String, Value>, top: Value) {
    if let Value::Object(top) = top {
        for (k, v) in top {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
}

/// Defaults, then config entries, then flags.
pub fn resolve_spec(config: &ConfigDoc, flags: &ModelArgs) -> Result<ModelSpec, CliError> {
    let Value::Object(mut doc) = serde_json::to_value(ModelSpec::nearest_neighbor(8, 0.11, 0.67))? else {
        unreachable!("a struct serializes to an object")
    };
    overlay(&mut doc, Value::Object(config.spec.clone()));
    let mut spec: ModelSpec = serde_json::from_value(Value::Object(doc))
        .map_err(|e| CliError::Usage(format!("invalid model in config: {e}")))?;
    let base = &flags.base;
    if let Some(l) = base.sites {
        spec.sites = l;
    }
    if let Some(j) = base.coupling {
        spec.coupling = j;
    }
    if let Some(g) = flags.g {
        spec.transverse_field = g;
    }
    if let Some(h) = flags.h {
        spec.longitudinal_field = h;
    }
    if let Some(kind) = &base.interaction {
        spec.interaction = match kind.as_str() {
            "nn" | "nearest_neighbor" => InteractionKind::NearestNeighbor,
            "power-law" | "power_law" => InteractionKind::PowerLaw {
                exponent: base.exponent.unwrap_or(3.0),
            },
            "squeeze" => InteractionKind::NearestNeighborWithSqueeze {
                beta: base.beta.unwrap_or(0.0),
            },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown interaction {other:?}; expected nn, power-law or squeeze"
                )))
            }
        };
    }
    match &mut spec.interaction {
        InteractionKind::PowerLaw { exponent } => *exponent = base.exponent.unwrap_or(*exponent),
        InteractionKind::NearestNeighborWithSqueeze { beta } => *beta = base.beta.unwrap_or(*beta),
        InteractionKind::NearestNeighbor => {}
    }
    if base.disorder_sigma.is_some() || base.disorder_seed.is_some() || base.realization.is_some() {
        let current = spec.disorder.unwrap_or(DisorderSpec {
            sigma: 0.0,
            seed: 0,
            realization_index: 0,
        });
        spec.disorder = Some(DisorderSpec {
            sigma: base.disorder_sigma.unwrap_or(current.sigma),
            seed: base.disorder_seed.unwrap_or(current.seed),
            realization_index: base.realization.unwrap_or(current.realization_index),
        });
    }
    spec.validate()?;
    Ok(spec)
}

/// Config `options`, then the flags that were given.
pub fn resolve_options<T: Serialize + DeserializeOwned>(config: &ConfigDoc, flags: &T) -> Result<T, CliError> {
    let mut doc = Map::new();
    overlay(&mut doc, config.options.clone());
    overlay(&mut doc, serde_json::to_value(flags)?);
    serde_json::from_value(Value::Object(doc)).map_err(|e| CliError::Usage(format!("invalid options: {e}")))
}

/// Config document describing a run.
pub fn provenance<O: Serialize>(command: &str, spec: &ModelSpec, options: &O) -> Result<Value, CliError> {
    let mut doc = match serde_json::to_value(spec)? {
        Value::Object(m) => m,
        _ => unreachable!("a struct serializes to an object"),
    };
    doc.insert("command".into(), Value::String(command.into()));
    doc.insert("options".into(), serde_json::to_value(options)?);
    Ok(Value::Object(doc))
}

/// First header line of every CSV output (without the `# ` prefix).
pub fn header_line<O: Serialize>(command: &str, spec: &ModelSpec, options: &O) -> Result<String, CliError> {
    Ok(format!("tlfim {VERSION} {}", provenance(command, spec, options)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_parses_back() {
        let spec = ModelSpec::power_law(12, 3.0, 0.2, 0.966);
        let line = header_line("evolve", &spec, &serde_json::json!({"tmax": 5.0})).unwrap();
        let doc = parse(&format!("# {line}\nt,Re(G)\n0,1\n")).unwrap();
        assert_eq!(doc.command.as_deref(), Some("evolve"));
        assert_eq!(doc.options["tmax"], 5.0);
        let back = resolve_spec(&doc, &ModelArgs::default()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn flags_override_config() {
        let doc = parse(r#"{"L": 10, "g": 0.3, "h": 0.5, "options": {"tmax": 7.0, "dt": 0.5}}"#).unwrap();
        let flags = ModelArgs {
            h: Some(0.9),
            ..Default::default()
        };
        let spec = resolve_spec(&doc, &flags).unwrap();
        assert_eq!((spec.sites, spec.transverse_field, spec.longitudinal_field), (10, 0.3, 0.9));
        let opts: Value = resolve_options(&doc, &serde_json::json!({"dt": 0.1, "tol": null})).unwrap();
        assert_eq!(opts["tmax"], 7.0);
        assert_eq!(opts["dt"], 0.1);
    }

    #[test]
    fn defaults_apply_without_config() {
        let spec = resolve_spec(&ConfigDoc::default(), &ModelArgs::default()).unwrap();
        assert_eq!(spec, ModelSpec::nearest_neighbor(8, 0.11, 0.67));
        assert!(parse("[1, 2]").is_err());
        assert!(parse("# tlfim").is_err());
    }
}
