//! JSON schemas of every file the tool reads or writes.

use serde_json::Value;

pub const CALIBRATION: &str = include_str!("../schemas/calibration.schema.json");
pub const PALETTE: &str = include_str!("../schemas/palette.schema.json");
pub const RANDOMIZATION_CONFIG: &str = include_str!("../schemas/randomization_config.schema.json");
pub const RUN_CONFIG: &str = include_str!("../schemas/run_config.schema.json");
pub const MANIFEST_ENTRY: &str = include_str!("../schemas/manifest_entry.schema.json");
pub const SCENE_RECORD: &str = include_str!("../schemas/scene_record.schema.json");
pub const STATS: &str = include_str!("../schemas/stats.schema.json");
pub const WEIGHTS: &str = include_str!("../schemas/weights.schema.json");
pub const METRICS_REPORT: &str = include_str!("../schemas/metrics_report.schema.json");
pub const RUN_META: &str = include_str!("../schemas/run_meta.schema.json");
pub const ERROR_RECORD: &str = include_str!("../schemas/error_record.schema.json");

/// Every shipped schema by file stem.
pub const ALL: &[(&str, &str)] = &[
    ("calibration", CALIBRATION),
    ("palette", PALETTE),
    ("randomization_config", RANDOMIZATION_CONFIG),
    ("run_config", RUN_CONFIG),
    ("manifest_entry", MANIFEST_ENTRY),
    ("scene_record", SCENE_RECORD),
    ("stats", STATS),
    ("weights", WEIGHTS),
    ("metrics_report", METRICS_REPORT),
    ("run_meta", RUN_META),
    ("error_record", ERROR_RECORD),
];

pub fn by_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Check `instance` against `schema`, collecting every violation.
pub fn check(schema: &str, instance: &Value) -> Result<(), Vec<String>> {
    let schema: Value = serde_json::from_str(schema).expect("embedded schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("embedded schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{}: {e}", e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
