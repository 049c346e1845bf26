//! Simulation and analysis of resonantly enhanced four-wave-mixing frequency
//! conversion (anti-Stokes and Stokes channels) in pressurized molecular
//! hydrogen: gas optics, the pressure-dependent Q1(1) resonance, conversion
//! efficiency versus pressure, Jones-calculus polarimetry, photon counting,
//! and the weighted least-squares reduction of simulated measurements.

pub mod config;
pub mod constants;
pub mod detection;
pub mod error;
pub mod fit;
pub mod fwm;
pub mod gas;
pub mod io;
pub mod lineshape;
pub mod pipeline;
pub mod polarization;
pub mod quad;
pub mod report;

pub use config::Config;
pub use detection::{BackgroundEstimate, CountRecord, DetectorSpec};
pub use error::{Error, Result};
pub use fit::{FitResult, FitStatus, WeightedPoint};
pub use fwm::{CalibrationTarget, ChainFactor, EfficiencyPoint, ProcessConfig};
pub use gas::{DispersionModel, GasState};
pub use lineshape::{ProcessKind, RamanLine};
pub use polarization::{JonesVector, OpticalElement, PolarizationScan};
pub use report::AnalysisReport;
