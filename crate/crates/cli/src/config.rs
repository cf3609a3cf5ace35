//! Config files: the `scenario.json` schema, every key optional and
//! overlaid on the chosen preset, plus an optional `pipeline` section
//! holding [`PipelineParams`] overrides. Unknown keys are schema errors.

use std::path::Path;

use mvtrack_core::error::DataError;
use mvtrack_core::pipeline::PipelineParams;
use mvtrack_core::ScenarioConfig;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub scenario: Map<String, Value>,
    pub pipeline: PipelineParams,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, DataError> {
        let value: Value = serde_json::from_str(text).map_err(|e| DataError::schema(path, e.line(), e.to_string()))?;
        let Value::Object(mut scenario) = value else {
            return Err(DataError::schema(path, 1, "config must be a JSON object"));
        };
        let pipeline = match scenario.remove("pipeline") {
            Some(v) => serde_json::from_value(v).map_err(|e| located(text, path, "pipeline", e))?,
            None => PipelineParams::default(),
        };
        pipeline.validate().map_err(|e| DataError::schema(path, key_line(text, "pipeline"), e.to_string()))?;
        let cfg = Self { scenario, pipeline };
        cfg.overlay(ScenarioConfig::default(), text, path)?;
        Ok(cfg)
    }

    /// `base` with this file's scenario keys applied on top.
    pub fn apply(&self, base: ScenarioConfig, path: &Path) -> Result<ScenarioConfig, DataError> {
        self.overlay(base, "", path)
    }

    fn overlay(&self, base: ScenarioConfig, text: &str, path: &Path) -> Result<ScenarioConfig, DataError> {
        let mut merged = serde_json::to_value(&base).expect("scenario serializes");
        merge(&mut merged, &Value::Object(self.scenario.clone()));
        let cfg: ScenarioConfig = serde_json::from_value(merged).map_err(|e| located(text, path, "", e))?;
        cfg.validate().map_err(|e| DataError::schema(path, 0, e.to_string()))?;
        Ok(cfg)
    }
}

/// Recursively overwrites `base` with `over`; objects merge key by key,
/// everything else is replaced.
pub fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// 1-based line of the first occurrence of `"key"`, or 0 when absent.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(0, |i| i + 1)
}

fn located(text: &str, path: &Path, fallback: &str, e: serde_json::Error) -> DataError {
    let msg = e.to_string();
    let key = msg.split('`').nth(1).unwrap_or(fallback);
    DataError::schema(path, key_line(text, key), msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile, DataError> {
        ConfigFile::parse(text, Path::new("cfg.json"))
    }

    #[test]
    fn empty_object_is_all_defaults() {
        let c = parse("{}").unwrap();
        assert_eq!(c.pipeline, PipelineParams::default());
        assert_eq!(c.apply(ScenarioConfig::complex(), Path::new("x")).unwrap(), ScenarioConfig::complex());
    }

    #[test]
    fn nested_overrides_merge() {
        let c = parse(r#"{"frame_count": 12, "airspace": {"z_max": 9.0}, "pipeline": {"fuse": {"alpha": 0.5}}}"#).unwrap();
        let s = c.apply(ScenarioConfig::simple(), Path::new("x")).unwrap();
        assert_eq!(s.frame_count, 12);
        assert_eq!(s.airspace.z_max, 9.0);
        assert_eq!(s.airspace.z_min, ScenarioConfig::simple().airspace.z_min);
        assert_eq!(c.pipeline.fuse.alpha, 0.5);
        assert_eq!(c.pipeline.fuse.sigma, 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let e = parse("{\n  \"frame_count\": 3,\n  \"bogus\": 1\n}").unwrap_err();
        assert!(matches!(e, DataError::Schema { line: 3, .. }), "{e:?}");
        let e = parse("{\n\"pipeline\": {\n \"fuse\": {\"sigmaa\": 1}}}").unwrap_err();
        assert!(matches!(e, DataError::Schema { line: 3, .. }), "{e:?}");
        assert!(parse(r#"{"airspace": {"nope": 1}}"#).is_err());
        assert!(parse("[1, 2]").is_err());
        assert!(matches!(parse("{\n\"a\": }").unwrap_err(), DataError::Schema { line: 2, .. }));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse(r#"{"pipeline": {"fuse": {"alpha": 3.0}}}"#).is_err());
        assert!(parse(r#"{"frame_count": 1}"#).is_err());
    }
}
