//! Photon-counting chain: expected rates from efficiencies, non-paralyzable
//! dead-time distortion and its exact inverse, seeded Poisson sampling, and
//! background estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dead time of the single-photon counting module, ns.
pub const COUNTING_MODULE_DEAD_NS: f64 = 6.0;

/// Detector properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub name: String,
    pub quantum_efficiency: f64,
    pub dead_time_ns: f64,
    #[serde(default)]
    pub dark_rate_cps: f64,
}

impl DetectorSpec {
    /// Infrared avalanche photodiode used on the telecom output.
    pub fn apd() -> Self {
        DetectorSpec {
            name: "apd".into(),
            quantum_efficiency: 0.125,
            dead_time_ns: 100.0,
            dark_rate_cps: 0.0,
        }
    }

    /// Photomultiplier used on the visible output.
    pub fn pmt() -> Self {
        DetectorSpec {
            name: "pmt".into(),
            quantum_efficiency: 0.045,
            dead_time_ns: 0.0,
            dark_rate_cps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(Error::Config(format!(
                "quantum efficiency {} outside [0, 1]",
                self.quantum_efficiency
            )));
        }
        if self.dead_time_ns < 0.0 || self.dark_rate_cps < 0.0 {
            return Err(Error::Config(
                "dead time and dark rate must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A counting interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub duration_s: f64,
    pub counts: u64,
}

impl CountRecord {
    pub fn rate_cps(&self) -> f64 {
        self.counts as f64 / self.duration_s
    }

    /// Poisson rate uncertainty sqrt(N)/T, with the one-count rule applied to
    /// empty intervals so the uncertainty never collapses to zero.
    pub fn rate_uncertainty_cps(&self) -> f64 {
        ((self.counts.max(1)) as f64).sqrt() / self.duration_s
    }
}

/// Observed count rate for a true photon rate: quantum efficiency and dark
/// counts first, then non-paralyzable dead-time compression r/(1 + r*tau)
/// with tau the larger of the detector and counting-module dead times.
pub fn observed_rate(true_rate_cps: f64, spec: &DetectorSpec, module_dead_ns: f64) -> Result<f64> {
    if true_rate_cps < 0.0 {
        return Err(Error::domain("true rate must be >= 0"));
    }
    spec.validate()?;
    let detected = spec.quantum_efficiency * true_rate_cps + spec.dark_rate_cps;
    let tau_s = spec.dead_time_ns.max(module_dead_ns) * 1e-9;
    Ok(detected / (1.0 + detected * tau_s))
}

/// Exact inverse of the non-paralyzable dead-time compression.
pub fn dead_time_correct(observed_cps: f64, tau_ns: f64) -> Result<f64> {
    if observed_cps < 0.0 || tau_ns < 0.0 {
        return Err(Error::domain(
            "observed rate and dead time must be >= 0".into(),
        ));
    }
    let tau_s = tau_ns * 1e-9;
    if tau_s == 0.0 {
        return Ok(observed_cps);
    }
    if observed_cps * tau_s >= 1.0 {
        return Err(Error::Saturated {
            observed_cps,
        });
    }
    Ok(observed_cps / (1.0 - observed_cps * tau_s))
}

/// Deterministic per-point generator: splits one run seed by point index so
/// parallel evaluation order cannot change the draw.
pub fn stream_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mixed = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Poisson-distributed counts with mean rate*duration.
pub fn sample_counts(
    rate_cps: f64,
    duration_s: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CountRecord> {
    if rate_cps < 0.0 || duration_s < 0.0 {
        return Err(Error::domain("rate and duration must be >= 0"));
    }
    let mean = rate_cps * duration_s;
    let counts = sample_poisson(mean, rng)?;
    Ok(CountRecord {
        duration_s,
        counts,
    })
}

/// Poisson draw with an explicit mean (helper for count expectations that are
/// already integrated over the interval).
pub fn sample_poisson(mean: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    if mean < 0.0 {
        return Err(Error::domain("Poisson mean must be >= 0"));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::Numerics(format!("Poisson({mean}) setup failed: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Weighted-mean background rate with its uncertainty and a two-sigma
/// zero-compatibility flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundEstimate {
    pub rate_cps: f64,
    pub sigma_cps: f64,
    pub compatible_with_zero: bool,
}

pub fn background_estimate(records: &[CountRecord]) -> Result<BackgroundEstimate> {
    if records.is_empty() {
        return Err(Error::domain("no background records supplied"));
    }
    if records.iter().any(|r| r.duration_s <= 0.0) {
        return Err(Error::domain("record with non-positive duration"));
    }
    let mut wsum = 0.0;
    let mut wmean = 0.0;
    for r in records {
        let sigma = r.rate_uncertainty_cps();
        let w = 1.0 / (sigma * sigma);
        wsum += w;
        wmean += w * r.rate_cps();
    }
    let rate = wmean / wsum;
    let sigma = wsum.sqrt().recip();
    Ok(BackgroundEstimate {
        rate_cps: rate,
        sigma_cps: sigma,
        compatible_with_zero: rate.abs() < 2.0 * sigma,
    })
}
