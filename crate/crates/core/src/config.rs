//! Run configuration: built-in defaults, JSON overlays, and the derived
//! calibrated process descriptions.
//!
//! Precedence is CLI flags > config file > built-in defaults; the file layer
//! is applied as a deep merge onto the embedded default document so partial
//! configs stay valid.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

use crate::detection::DetectorSpec;
use crate::error::{Error, Result};
use crate::fwm::{calibrate_scale, find_peak_pressure, CalibrationTarget, ChainFactor, ProcessConfig};
use crate::gas::DispersionModel;
use crate::lineshape::{ProcessKind, RamanLine};

pub const DEFAULT_CONFIG_JSON: &str = include_str!("../data/default_config.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePair {
    pub cars: RamanLine,
    pub csrs: RamanLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessPair {
    pub cars: ProcessConfig,
    pub csrs: ProcessConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchor {
    /// Anchor pressure; `null` anchors at the model's own peak pressure.
    pub anchor_pressure_bar: Option<f64>,
    pub internal_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub cars: CalibrationAnchor,
    pub csrs: CalibrationAnchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub counting_module_dead_ns: f64,
    pub detectors: BTreeMap<String, DetectorSpec>,
    pub chains: ChainPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPair {
    pub cars: Vec<ChainFactor>,
    pub csrs: Vec<ChainFactor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Acquisition time per point, s.
    pub duration_s: f64,
    /// Expected on-resonance counts per point of a spectrum.
    pub peak_counts: f64,
    /// Flat background counts per point.
    pub background_counts: f64,
    /// Points per detuning scan.
    pub points: usize,
    /// Half-span of the detuning grid in units of the linewidth.
    pub span_half_widths: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionPreset {
    pub scanned_retardance_error_deg: f64,
    pub scanned_axis_error_deg: f64,
    pub pbs_extinction: f64,
    /// Background, per detector, as a fraction of the scan amplitude.
    pub background_fraction_linear: [f64; 2],
    pub background_fraction_circular: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationConfig {
    pub amplitude_counts: f64,
    pub linear_span_deg: f64,
    pub linear_step_deg: f64,
    pub circular_span_deg: f64,
    pub circular_step_deg: f64,
    pub presets: BTreeMap<String, ImperfectionPreset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Systematics {
    /// Relative uncertainty of the pressure gauge, applied as a scale
    /// uncertainty to fitted slopes.
    pub pressure_gauge_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub temperature_k: f64,
    #[serde(default)]
    pub dispersion: DispersionModel,
    /// Optional path to an alternative dispersion coefficient file; when set
    /// it replaces `dispersion` at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion_file: Option<String>,
    pub lines: LinePair,
    pub process: ProcessPair,
    pub calibration: CalibrationPair,
    pub detection: DetectionConfig,
    pub simulation: SimulationConfig,
    pub polarization: PolarizationConfig,
    pub systematics: Systematics,
}

impl Default for Config {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG_JSON).expect("embedded default config parses")
    }
}

/// Recursive JSON merge: objects merge key-wise, everything else replaces.
pub fn merge_json(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(base_map), Value::Object(overlay_map)) => {
            for (key, value) in overlay_map {
                match base_map.get_mut(key) {
                    Some(slot) => merge_json(slot, value),
                    None => {
                        base_map.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (slot, other) => *slot = other.clone(),
    }
}

impl Config {
    /// Built-in defaults merged with an optional user config file. Returns
    /// the typed config together with the merged JSON document (the form
    /// recorded in run manifests).
    pub fn load(path: Option<&Path>) -> Result<(Config, Value)> {
        let mut doc: Value = serde_json::from_str(DEFAULT_CONFIG_JSON)?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            let overlay: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge_json(&mut doc, &overlay);
        }
        let mut config: Config = serde_json::from_value(doc.clone())
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if let Some(file) = config.dispersion_file.clone() {
            config.dispersion = DispersionModel::from_json_file(&file)?;
        }
        config.validate()?;
        Ok((config, doc))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_k > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        self.dispersion.validate()?;
        self.lines.cars.validate()?;
        self.lines.csrs.validate()?;
        self.process.cars.validate()?;
        self.process.csrs.validate()?;
        for det in self.detection.detectors.values() {
            det.validate()?;
        }
        if self.simulation.points < 5 {
            return Err(Error::Config("simulation.points must be >= 5".into()));
        }
        Ok(())
    }

    pub fn line(&self, kind: ProcessKind) -> &RamanLine {
        match kind {
            ProcessKind::Cars => &self.lines.cars,
            ProcessKind::Csrs => &self.lines.csrs,
        }
    }

    pub fn process(&self, kind: ProcessKind) -> &ProcessConfig {
        match kind {
            ProcessKind::Cars => &self.process.cars,
            ProcessKind::Csrs => &self.process.csrs,
        }
    }

    pub fn chain(&self, kind: ProcessKind) -> &[ChainFactor] {
        match kind {
            ProcessKind::Cars => &self.detection.chains.cars,
            ProcessKind::Csrs => &self.detection.chains.csrs,
        }
    }

    pub fn anchor(&self, kind: ProcessKind) -> &CalibrationAnchor {
        match kind {
            ProcessKind::Cars => &self.calibration.cars,
            ProcessKind::Csrs => &self.calibration.csrs,
        }
    }

    pub fn preset(&self, name: &str) -> Result<&ImperfectionPreset> {
        self.polarization
            .presets
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown polarization preset '{name}'")))
    }

    /// Process description with the calibration constant solved from the
    /// configured anchor. A `null` anchor pressure anchors at the model's
    /// own efficiency maximum.
    pub fn calibrated_process(&self, kind: ProcessKind) -> Result<ProcessConfig> {
        let mut process = *self.process(kind);
        let anchor = self.anchor(kind);
        let line = self.line(kind);
        let pressure = match anchor.anchor_pressure_bar {
            Some(p) => p,
            None => find_peak_pressure(&process, line, &self.dispersion, self.temperature_k, 30.0)?,
        };
        process.scale_k = calibrate_scale(
            &process,
            line,
            &self.dispersion,
            self.temperature_k,
            &CalibrationTarget {
                pressure_bar: pressure,
                internal_efficiency: anchor.internal_efficiency,
            },
        )?;
        Ok(process)
    }
}
