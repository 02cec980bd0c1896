//! Config loading with `--set key=value` overrides.
//!
//! Overrides are applied to the fully populated config as JSON and the result
//! is deserialized again, so unknown keys and ill-typed values are rejected
//! by the same schema as the config file.

use std::path::Path;

use motion_prep::pipeline::PipelineConfig;
use motion_prep::{Error, Result};
use serde_json::Value;

pub fn load_config(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<PipelineConfig> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str::<PipelineConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    let mut value = serde_json::to_value(&base)?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not KEY=VALUE")))?;
        set_path(&mut value, key, parse_value(raw))?;
    }
    let mut cfg: PipelineConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(format!("after overrides: {e}")))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// JSON literal when it parses as one, otherwise a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = root;
    for part in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*part).ok_or_else(|| unknown(key))?,
            _ => return Err(unknown(key)),
        };
    }
    match node {
        Value::Object(map) => {
            // optional fields serialize as null but are still present
            if !map.contains_key(*last) && !is_tag_payload(map) {
                return Err(unknown(key));
            }
            map.insert((*last).to_string(), value);
            Ok(())
        }
        _ => Err(unknown(key)),
    }
}

/// Tagged unions (`teacher`, `source`) change their fields with the tag, so
/// new keys are allowed there and left to the schema check.
fn is_tag_payload(map: &serde_json::Map<String, Value>) -> bool {
    map.contains_key("kind") && map.get("kind").is_some_and(Value::is_string)
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown config key `{key}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(sets: &[&str]) -> Result<PipelineConfig> {
        let v: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        load_config(None, &v, None)
    }

    #[test]
    fn nested_overrides_apply() {
        let cfg = load(&["mask.ratio=0.9", "objects.count=0", "background=black", "schedule.stage_split=[1,3]", "schedule.epochs=4"]).unwrap();
        assert_eq!(cfg.mask.ratio, 0.9);
        assert_eq!(cfg.objects.count, 0);
        assert_eq!(cfg.background.name(), "black");
        assert_eq!(cfg.schedule.stage_split, Some([1, 3]));
    }

    #[test]
    fn unknown_and_mistyped_keys_fail() {
        assert!(load(&["mask.ratioo=0.9"]).is_err());
        assert!(load(&["nope=1"]).is_err());
        assert!(load(&["mask.ratio.x=1"]).is_err());
        assert!(load(&["mask.ratio=high"]).is_err());
        assert!(load(&["mask.ratio=1.5"]).is_err());
        assert!(load(&["samples_per_video"]).is_err());
    }

    #[test]
    fn tagged_union_switch() {
        let cfg = load(&[r#"teacher={"kind":"mock","dim":4,"seed":2}"#, "source.count=5"]).unwrap();
        assert_eq!(serde_json::to_value(&cfg.teacher).unwrap()["dim"], 4);
        assert!(load(&["source.kind=manifest"]).is_err());
    }

    #[test]
    fn seed_flag_wins() {
        let v = vec!["seed=3".to_string()];
        assert_eq!(load_config(None, &v, Some(9)).unwrap().seed, 9);
    }
}
