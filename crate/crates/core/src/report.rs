//! Structured analysis report with a shipped, versioned JSON schema.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_V1: &str = include_str!("../data/report_schema_v1.json");
pub const SCHEMA_VERSION: u64 = 1;

/// A value with statistical and (optionally) systematic 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub statistical: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub systematic: Option<f64>,
}

impl Measured {
    pub fn new(value: f64, statistical: f64) -> Self {
        Measured {
            value,
            statistical,
            systematic: None,
        }
    }

    pub fn with_systematic(mut self, systematic: f64) -> Self {
        self.systematic = Some(systematic);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_mhz_per_bar: Option<Measured>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu0_thz: Option<Measured>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub broadening_mhz_per_bar: Option<Measured>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dicke_a_mhz_bar: Option<Measured>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_pressure_bar: Option<f64>,
    #[serde(default)]
    pub n_spectra: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastEntry {
    pub basis: String,
    pub detector: u8,
    pub scan_label: String,
    pub contrast: Measured,
    pub peak_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    pub contrasts: Vec<ContrastEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<Measured>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundReport {
    pub rate_cps: f64,
    pub sigma_cps: f64,
    pub compatible_with_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u64,
    pub generated_by: String,
    pub pressure_gauge_relative_uncertainty: f64,
    pub processes: BTreeMap<String, ProcessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarization: Option<PolarizationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundReport>,
}

impl AnalysisReport {
    pub fn new(generated_by: impl Into<String>, gauge_relative: f64) -> Self {
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            generated_by: generated_by.into(),
            pressure_gauge_relative_uncertainty: gauge_relative,
            processes: BTreeMap::new(),
            polarization: None,
            background: None,
        }
    }

    /// Serialize and check against the shipped schema.
    pub fn to_validated_json(&self) -> Result<Value> {
        let value = serde_json::to_value(self)?;
        validate_report(&value)?;
        Ok(value)
    }
}

/// Validate a report document against the shipped schema.
pub fn validate_report(report: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA_V1)?;
    let mut errors = Vec::new();
    validate_node(report, &schema, &schema, "$", &mut errors);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "report does not match schema: {}",
            errors.join("; ")
        )))
    }
}

fn resolve<'a>(schema: &'a Value, root: &'a Value) -> &'a Value {
    if let Some(reference) = schema.get("$ref").and_then(Value::as_str) {
        if let Some(path) = reference.strip_prefix("#/") {
            let mut node = root;
            for part in path.split('/') {
                match node.get(part) {
                    Some(next) => node = next,
                    None => return schema,
                }
            }
            return node;
        }
    }
    schema
}

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "number" => value.is_number(),
        "integer" => value.as_f64().is_some_and(|f| f.fract() == 0.0) && value.is_number(),
        _ => false,
    }
}

fn validate_node(value: &Value, schema: &Value, root: &Value, path: &str, errors: &mut Vec<String>) {
    let schema = resolve(schema, root);
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        if !allowed.is_empty() && !allowed.iter().any(|t| type_matches(value, t)) {
            errors.push(format!("{path}: expected type {allowed:?}"));
            return;
        }
    }
    if value.is_null() {
        return;
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errors.push(format!("{path}: value not in enum"));
        }
    }
    if let Some(object) = value.as_object() {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !object.contains_key(key) {
                    errors.push(format!("{path}: missing required field '{key}'"));
                }
            }
        }
        let properties = schema.get("properties").and_then(Value::as_object);
        for (key, entry) in object {
            let child_path = format!("{path}.{key}");
            if let Some(child_schema) = properties.and_then(|p| p.get(key)) {
                validate_node(entry, child_schema, root, &child_path, errors);
            } else if let Some(additional) = schema.get("additionalProperties") {
                match additional {
                    Value::Bool(false) => {
                        errors.push(format!("{path}: unexpected field '{key}'"))
                    }
                    Value::Bool(true) => {}
                    other => validate_node(entry, other, root, &child_path, errors),
                }
            }
        }
    }
    if let Some(items) = value.as_array() {
        if let Some(item_schema) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate_node(item, item_schema, root, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> AnalysisReport {
        let mut report = AnalysisReport::new("csrslab test", 0.01);
        report.processes.insert(
            "cars".into(),
            ProcessReport {
                shift_mhz_per_bar: Some(Measured::new(-94.0, 0.3).with_systematic(0.94)),
                nu0_thz: Some(Measured::new(124.571257, 1e-6)),
                broadening_mhz_per_bar: Some(Measured::new(42.7, 0.2).with_systematic(0.43)),
                dicke_a_mhz_bar: Some(Measured::new(339.0, 12.0)),
                peak_pressure_bar: Some(3.8),
                n_spectra: 8,
            },
        );
        report.polarization = Some(PolarizationReport {
            contrasts: vec![ContrastEntry {
                basis: "linear".into(),
                detector: 1,
                scan_label: "signal_hwp".into(),
                contrast: Measured::new(0.993, 0.002),
                peak_angle_deg: 0.1,
            }],
            fidelity: Some(Measured::new(0.904, 0.004)),
        });
        report.background = Some(BackgroundReport {
            rate_cps: 0.0,
            sigma_cps: 1.0 / 120.0,
            compatible_with_zero: true,
        });
        report
    }

    #[test]
    fn report_validates_against_shipped_schema() {
        sample_report().to_validated_json().unwrap();
    }

    #[test]
    fn report_without_polarization_section_validates() {
        let mut report = sample_report();
        report.polarization = None;
        report.background = None;
        let value = report.to_validated_json().unwrap();
        assert!(value.get("polarization").is_none());
    }

    #[test]
    fn schema_rejects_missing_required_field() {
        let mut value = serde_json::to_value(sample_report()).unwrap();
        value.as_object_mut().unwrap().remove("generated_by");
        assert!(validate_report(&value).is_err());
    }

    #[test]
    fn schema_rejects_wrong_type() {
        let mut value = serde_json::to_value(sample_report()).unwrap();
        value["schema_version"] = Value::String("one".into());
        assert!(validate_report(&value).is_err());
    }

    #[test]
    fn schema_rejects_bad_enum() {
        let mut value = serde_json::to_value(sample_report()).unwrap();
        value["polarization"]["contrasts"][0]["basis"] = Value::String("elliptic".into());
        assert!(validate_report(&value).is_err());
    }

    #[test]
    fn report_json_roundtrip() {
        let report = sample_report();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }
}
