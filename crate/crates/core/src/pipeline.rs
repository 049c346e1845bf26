//! End-to-end building blocks shared by the command-line tool and the
//! integration tests: synthetic-spectrum generation, polarization scans,
//! their analysis, and report assembly.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::detection::{sample_poisson, stream_for};
use crate::error::{Error, Result};
use crate::fit::{
    angle_difference, fit_center_vs_pressure, fit_dicke_width, fit_lorentzian, fit_sine,
    sine_peak_angle, FitResult, WeightedPoint,
};
use crate::io::{PolarizationRow, SpectrumAxis, SpectrumRow};
use crate::lineshape::{linewidth, resonance_center, ProcessKind};
use crate::polarization::{simulate_scan, JonesVector, OpticalElement, PlateKind, ScanChain};
use crate::report::{Measured, ProcessReport};

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

/// A synthetic detuning scan at one pressure.
#[derive(Debug, Clone)]
pub struct SimulatedSpectrum {
    pub kind: ProcessKind,
    pub pressure_bar: f64,
    pub rows: Vec<SpectrumRow>,
}

/// Detuning grid request: either a fixed half-span in MHz or automatic
/// sizing from the linewidth at each pressure.
#[derive(Debug, Clone, Copy)]
pub enum GridSpan {
    Auto,
    FixedMhz(f64),
}

/// Generate per-pressure spectra for one channel. The frequency axis is the
/// absolute pump difference in THz; the line amplitude is normalized to the
/// configured on-resonance count level (acquisition-style normalization, so
/// every pressure carries comparable statistics).
pub fn simulate_spectra(
    config: &Config,
    kind: ProcessKind,
    pressures_bar: &[f64],
    span: GridSpan,
    seed: u64,
    noise: bool,
) -> Result<Vec<SimulatedSpectrum>> {
    if pressures_bar.is_empty() {
        return Err(Error::domain("pressure list is empty"));
    }
    let sim = &config.simulation;
    let line = config.line(kind);
    let n = sim.points;
    let mut spectra = Vec::with_capacity(pressures_bar.len());
    for (pi, &pressure) in pressures_bar.iter().enumerate() {
        if !(pressure > 0.0) {
            return Err(Error::domain(format!(
                "spectrum pressure {pressure} bar must be positive"
            )));
        }
        let center_thz = resonance_center(line, pressure)?;
        let gamma_mhz = linewidth(line, pressure)?;
        let half_span_mhz = match span {
            GridSpan::Auto => sim.span_half_widths * gamma_mhz,
            GridSpan::FixedMhz(s) => s,
        };
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let delta_mhz = -half_span_mhz + 2.0 * half_span_mhz * i as f64 / (n - 1) as f64;
            let hw = 0.5 * gamma_mhz;
            let profile = hw * hw / (delta_mhz * delta_mhz + hw * hw);
            let expected = sim.background_counts + sim.peak_counts * profile;
            let counts = if noise {
                let stream_index = (kind as u64) << 56 | (pi as u64) << 32 | i as u64;
                sample_poisson(expected, &mut stream_for(seed, stream_index))? as f64
            } else {
                expected
            };
            rows.push(SpectrumRow {
                pressure_bar: pressure,
                axis_value: center_thz + delta_mhz * 1e-6,
                counts,
                duration_s: sim.duration_s,
            });
        }
        spectra.push(SimulatedSpectrum {
            kind,
            pressure_bar: pressure,
            rows,
        });
    }
    Ok(spectra)
}

/// Lorentzian fit of one spectrum, reported in both native axis units and,
/// for absolute-axis data, THz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumFit {
    pub pressure_bar: f64,
    /// Fitted line center in THz (absolute-axis input only).
    pub center_thz: Option<f64>,
    pub center_sigma_mhz: f64,
    pub fwhm_mhz: f64,
    pub fwhm_sigma_mhz: f64,
    pub converged: bool,
    pub fit: FitResult,
}

/// Fit a single-pressure group of spectrum rows.
pub fn analyze_spectrum(axis: SpectrumAxis, rows: &[SpectrumRow]) -> Result<SpectrumFit> {
    if rows.is_empty() {
        return Err(Error::domain("no spectrum rows"));
    }
    let pressure = rows[0].pressure_bar;
    // work in MHz relative to the first axis value for conditioning
    let (x0, to_mhz) = match axis {
        SpectrumAxis::PumpDifferenceThz => (rows[0].axis_value, 1e6),
        SpectrumAxis::DetuningMhz => (0.0, 1.0),
    };
    let points: Vec<WeightedPoint> = rows
        .iter()
        .map(|r| WeightedPoint::from_counts((r.axis_value - x0) * to_mhz, r.counts))
        .collect::<Result<_>>()?;
    let fit = fit_lorentzian(&points)?;
    let center_mhz = fit.value("center").expect("center present");
    let center_thz = match axis {
        SpectrumAxis::PumpDifferenceThz => Some(x0 + center_mhz * 1e-6),
        SpectrumAxis::DetuningMhz => None,
    };
    Ok(SpectrumFit {
        pressure_bar: pressure,
        center_thz,
        center_sigma_mhz: fit.uncertainty("center").expect("center sigma"),
        fwhm_mhz: fit.value("fwhm").expect("fwhm present"),
        fwhm_sigma_mhz: fit.uncertainty("fwhm").expect("fwhm sigma"),
        converged: fit.converged(),
        fit,
    })
}

/// Group rows by pressure (file order preserved within groups).
pub fn group_by_pressure(rows: &[SpectrumRow]) -> Vec<Vec<SpectrumRow>> {
    let mut groups: Vec<(f64, Vec<SpectrumRow>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(p, _)| *p == row.pressure_bar) {
            Some((_, group)) => group.push(*row),
            None => groups.push((row.pressure_bar, vec![*row])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Line fits across pressures: collisional shift/zero-pressure intercept and
/// the two-term width law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureSeriesFit {
    pub center_line: FitResult,
    pub width_curve: FitResult,
}

pub fn analyze_pressure_series(fits: &[SpectrumFit]) -> Result<PressureSeriesFit> {
    let centers: Vec<WeightedPoint> = fits
        .iter()
        .filter_map(|f| {
            f.center_thz
                .map(|c| WeightedPoint::new(f.pressure_bar, c, (f.center_sigma_mhz * 1e-6).max(1e-12)))
        })
        .collect::<Result<_>>()?;
    if centers.len() < 2 {
        return Err(Error::Fit(
            "pressure series needs absolute centers at >= 2 pressures".into(),
        ));
    }
    let widths: Vec<WeightedPoint> = fits
        .iter()
        .map(|f| WeightedPoint::new(f.pressure_bar, f.fwhm_mhz, f.fwhm_sigma_mhz.max(1e-9)))
        .collect::<Result<_>>()?;
    Ok(PressureSeriesFit {
        center_line: fit_center_vs_pressure(&centers)?,
        width_curve: fit_dicke_width(&widths)?,
    })
}

/// Assemble the per-process report section, applying the pressure-gauge
/// scale systematic to the two slope quantities.
pub fn process_report_from_series(
    series: &PressureSeriesFit,
    gauge_relative: f64,
    n_spectra: usize,
) -> ProcessReport {
    let line = &series.center_line;
    let width = &series.width_curve;
    let slope = line.value("slope_mhz_per_bar").unwrap_or(f64::NAN);
    let b = width.value("broadening_b_mhz_per_bar").unwrap_or(f64::NAN);
    ProcessReport {
        shift_mhz_per_bar: Some(
            Measured::new(slope, line.uncertainty("slope_mhz_per_bar").unwrap_or(f64::NAN))
                .with_systematic(slope.abs() * gauge_relative),
        ),
        nu0_thz: Some(Measured::new(
            line.value("intercept_thz").unwrap_or(f64::NAN),
            line.uncertainty("intercept_thz").unwrap_or(f64::NAN),
        )),
        broadening_mhz_per_bar: Some(
            Measured::new(
                b,
                width
                    .uncertainty("broadening_b_mhz_per_bar")
                    .unwrap_or(f64::NAN),
            )
            .with_systematic(b.abs() * gauge_relative),
        ),
        dicke_a_mhz_bar: Some(Measured::new(
            width.value("dicke_a_mhz_bar").unwrap_or(f64::NAN),
            width.uncertainty("dicke_a_mhz_bar").unwrap_or(f64::NAN),
        )),
        peak_pressure_bar: None,
        n_spectra,
    }
}

// ---------------------------------------------------------------------------
// Polarization scans
// ---------------------------------------------------------------------------

/// Which basis pair a scan probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanBasis {
    Linear,
    Circular,
}

impl ScanBasis {
    pub fn label(self) -> &'static str {
        match self {
            ScanBasis::Linear => "linear",
            ScanBasis::Circular => "circular",
        }
    }

    /// Scan period in plate-angle degrees (half-wave plate for the linear
    /// basis, quarter-wave plate for the circular one).
    pub fn period_deg(self) -> f64 {
        match self {
            ScanBasis::Linear => PlateKind::HalfWave.scan_period_deg(),
            ScanBasis::Circular => PlateKind::QuarterWave.scan_period_deg(),
        }
    }

    /// Side of the conversion cell the rotating plate sits on, used to label
    /// scan outputs.
    pub fn scan_label(self) -> &'static str {
        match self {
            ScanBasis::Linear => "signal_hwp",
            ScanBasis::Circular => "analyzer_qwp",
        }
    }
}

impl std::str::FromStr for ScanBasis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ScanBasis::Linear),
            "circular" => Ok(ScanBasis::Circular),
            other => Err(Error::Config(format!("unknown scan basis '{other}'"))),
        }
    }
}

/// Ideal-optics peak angle of each detector trace, degrees (mod period).
pub fn expected_peak_angle(basis: ScanBasis, detector: u8) -> f64 {
    match (basis, detector) {
        (ScanBasis::Linear, 1) => 0.0,
        (ScanBasis::Linear, _) => 45.0,
        (ScanBasis::Circular, 1) => 135.0,
        (ScanBasis::Circular, _) => 45.0,
    }
}

/// Simulate one polarization scan for the configured horizontal input.
///
/// Linear basis: the signal-side half-wave plate rotates the input linear
/// polarization, the analyzer is the bare beamsplitter. Circular basis: a
/// fixed signal-side quarter-wave plate at 45 deg prepares circular light and
/// the analyzer-side quarter-wave plate is rotated.
pub fn simulate_polarization(
    config: &Config,
    basis: ScanBasis,
    preset_name: &str,
    seed: u64,
    noise: bool,
) -> Result<Vec<PolarizationRow>> {
    let preset = config.preset(preset_name)?;
    let pol = &config.polarization;
    let (span, step) = match basis {
        ScanBasis::Linear => (pol.linear_span_deg, pol.linear_step_deg),
        ScanBasis::Circular => (pol.circular_span_deg, pol.circular_step_deg),
    };
    if !(step > 0.0) || !(span >= step) {
        return Err(Error::Config("invalid polarization angle grid".into()));
    }
    let n = (span / step).round() as usize + 1;
    let angles: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();

    let (input, plate, backgrounds) = match basis {
        ScanBasis::Linear => (
            JonesVector::horizontal(),
            PlateKind::HalfWave,
            preset.background_fraction_linear,
        ),
        ScanBasis::Circular => (
            crate::polarization::apply_chain(
                &JonesVector::horizontal(),
                &[OpticalElement::QuarterWave { angle_deg: 45.0 }],
            ),
            PlateKind::QuarterWave,
            preset.background_fraction_circular,
        ),
    };
    let chain = ScanChain {
        before: vec![],
        scanned: plate,
        scanned_retardance_error_deg: preset.scanned_retardance_error_deg,
        scanned_axis_error_deg: preset.scanned_axis_error_deg,
        after: vec![],
        pbs_extinction: preset.pbs_extinction,
    };
    let amplitude = pol.amplitude_counts;
    let background = [amplitude * backgrounds[0], amplitude * backgrounds[1]];
    let scan = simulate_scan(&input, &chain, amplitude, background, &angles)?;

    let mut rows = Vec::with_capacity(scan.rows.len());
    for (i, r) in scan.rows.iter().enumerate() {
        let (d1, d2) = if noise {
            let base = (basis as u64) << 48 | (i as u64) << 8;
            (
                sample_poisson(r.counts_d1, &mut stream_for(seed, base | 1))? as f64,
                sample_poisson(r.counts_d2, &mut stream_for(seed, base | 2))? as f64,
            )
        } else {
            (r.counts_d1, r.counts_d2)
        };
        rows.push(PolarizationRow {
            angle_deg: r.angle_deg,
            counts_d1: d1,
            counts_d2: d2,
        });
    }
    Ok(rows)
}

/// Contrast of one fitted detector trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastFit {
    pub detector: u8,
    pub contrast: f64,
    pub contrast_sigma: f64,
    pub peak_angle_deg: f64,
    pub fit: FitResult,
}

/// Contrast from a sine fit, with truncation at the physical boundary: a
/// fitted amplitude marginally above the offset (possible for noise-limited
/// full-contrast scans) is clamped to contrast 1 when within 5 sigma.
pub fn contrast_from_fit(fit: &FitResult) -> Result<(f64, f64)> {
    let a = fit.value("amplitude").ok_or_else(|| Error::Fit("no amplitude".into()))?;
    let c = fit.value("offset").ok_or_else(|| Error::Fit("no offset".into()))?;
    let sa = fit.uncertainty("amplitude").unwrap_or(0.0);
    let sc = fit.uncertainty("offset").unwrap_or(0.0);
    let names = &fit.names;
    let (ia, ic) = (
        names.iter().position(|n| n == "amplitude").unwrap(),
        names.iter().position(|n| n == "offset").unwrap(),
    );
    let cov_ac = fit.covariance[ia][ic];
    if !(c > 0.0) {
        return Err(Error::domain("fitted offset must be positive"));
    }
    let sigma = ((sa / c).powi(2) + (a * sc / (c * c)).powi(2)
        - 2.0 * a * cov_ac / (c * c * c))
        .max(0.0)
        .sqrt();
    if a <= c {
        return Ok((a / c, sigma));
    }
    let excess = a - c;
    let sigma_diff = (sa * sa + sc * sc - 2.0 * cov_ac).max(1e-300).sqrt();
    if excess < 5.0 * sigma_diff {
        Ok((1.0, sigma))
    } else {
        Err(Error::domain(format!(
            "fitted amplitude {a:.3} exceeds offset {c:.3} by {:.1} sigma",
            excess / sigma_diff
        )))
    }
}

/// Fit both detector traces of one scan and extract contrasts.
pub fn analyze_polarization(basis: ScanBasis, rows: &[PolarizationRow]) -> Result<Vec<ContrastFit>> {
    let period = basis.period_deg();
    let mut out = Vec::with_capacity(2);
    for detector in 1u8..=2 {
        let points: Vec<WeightedPoint> = rows
            .iter()
            .map(|r| {
                let counts = if detector == 1 { r.counts_d1 } else { r.counts_d2 };
                WeightedPoint::from_counts(r.angle_deg, counts)
            })
            .collect::<Result<_>>()?;
        let fit = fit_sine(&points, period)?;
        let (contrast, contrast_sigma) = contrast_from_fit(&fit)?;
        out.push(ContrastFit {
            detector,
            contrast,
            contrast_sigma,
            peak_angle_deg: sine_peak_angle(fit.value("phase_deg").unwrap(), period),
            fit,
        });
    }
    Ok(out)
}

/// Deviation of a fitted peak angle from the ideal-optics expectation,
/// degrees, folded to the scan period.
pub fn peak_angle_error(basis: ScanBasis, detector: u8, peak_angle_deg: f64) -> f64 {
    angle_difference(
        peak_angle_deg,
        expected_peak_angle(basis, detector),
        basis.period_deg(),
    )
}

// ---------------------------------------------------------------------------
// Efficiency-curve shape helpers
// ---------------------------------------------------------------------------

/// Count sign changes of the numerical derivative, ignoring steps smaller
/// than `deadband_fraction` of the curve maximum (quadrature-level ringing in
/// the far tail is not structure).
pub fn derivative_sign_changes(values: &[f64], deadband_fraction: f64) -> usize {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let deadband = deadband_fraction * max.abs();
    let mut changes = 0;
    let mut last_sign = 0i8;
    for pair in values.windows(2) {
        let step = pair[1] - pair[0];
        if step.abs() <= deadband {
            continue;
        }
        let sign = if step > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
        }
        last_sign = sign;
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::SpectrumAxis;
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_spectra_are_exact_lorentzians() {
        let config = Config::default();
        let spectra = simulate_spectra(
            &config,
            ProcessKind::Cars,
            &[2.0, 8.0],
            GridSpan::Auto,
            1,
            false,
        )
        .unwrap();
        assert_eq!(spectra.len(), 2);
        for s in &spectra {
            assert_eq!(s.rows.len(), config.simulation.points);
            let gamma = linewidth(config.line(ProcessKind::Cars), s.pressure_bar).unwrap();
            let center = resonance_center(config.line(ProcessKind::Cars), s.pressure_bar).unwrap();
            for row in &s.rows {
                let delta = (row.axis_value - center) * 1e6;
                let hw = 0.5 * gamma;
                let expected = config.simulation.background_counts
                    + config.simulation.peak_counts * hw * hw / (delta * delta + hw * hw);
                assert_relative_eq!(row.counts, expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn seeded_spectra_are_reproducible() {
        let config = Config::default();
        let a = simulate_spectra(&config, ProcessKind::Csrs, &[4.0], GridSpan::Auto, 9, true)
            .unwrap();
        let b = simulate_spectra(&config, ProcessKind::Csrs, &[4.0], GridSpan::Auto, 9, true)
            .unwrap();
        let c = simulate_spectra(&config, ProcessKind::Csrs, &[4.0], GridSpan::Auto, 10, true)
            .unwrap();
        assert_eq!(a[0].rows, b[0].rows);
        assert_ne!(a[0].rows, c[0].rows);
    }

    #[test]
    fn spectrum_fit_recovers_configured_center() {
        let config = Config::default();
        let spectra = simulate_spectra(
            &config,
            ProcessKind::Csrs,
            &[6.0],
            GridSpan::Auto,
            3,
            false,
        )
        .unwrap();
        let fit = analyze_spectrum(SpectrumAxis::PumpDifferenceThz, &spectra[0].rows).unwrap();
        let truth = resonance_center(config.line(ProcessKind::Csrs), 6.0).unwrap();
        assert!(fit.converged);
        assert!((fit.center_thz.unwrap() - truth).abs() * 1e6 < 0.01); // < 0.01 MHz
        let gamma = linewidth(config.line(ProcessKind::Csrs), 6.0).unwrap();
        assert_relative_eq!(fit.fwhm_mhz, gamma, max_relative = 1e-6);
    }

    #[test]
    fn pressure_series_recovers_configured_line() {
        let config = Config::default();
        let pressures = [1.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0];
        let spectra = simulate_spectra(
            &config,
            ProcessKind::Cars,
            &pressures,
            GridSpan::Auto,
            5,
            false,
        )
        .unwrap();
        let fits: Vec<SpectrumFit> = spectra
            .iter()
            .map(|s| analyze_spectrum(SpectrumAxis::PumpDifferenceThz, &s.rows).unwrap())
            .collect();
        let series = analyze_pressure_series(&fits).unwrap();
        let line = config.line(ProcessKind::Cars);
        assert_relative_eq!(
            series.center_line.value("slope_mhz_per_bar").unwrap(),
            line.shift_mhz_per_bar,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            series.center_line.value("intercept_thz").unwrap(),
            line.nu0_thz,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            series.width_curve.value("broadening_b_mhz_per_bar").unwrap(),
            line.broadening_b_mhz_per_bar,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            series.width_curve.value("dicke_a_mhz_bar").unwrap(),
            line.diffusion_a_mhz_bar,
            max_relative = 1e-6
        );
    }

    #[test]
    fn ideal_polarization_scans_have_unit_contrast_and_right_phase() {
        let config = Config::default();
        for basis in [ScanBasis::Linear, ScanBasis::Circular] {
            let rows = simulate_polarization(&config, basis, "ideal", 7, false).unwrap();
            let contrasts = analyze_polarization(basis, &rows).unwrap();
            for c in &contrasts {
                assert_relative_eq!(c.contrast, 1.0, epsilon = 1e-9);
                let err = peak_angle_error(basis, c.detector, c.peak_angle_deg);
                assert!(err.abs() < 1e-6, "{basis:?} d{} peak error {err}", c.detector);
            }
        }
    }

    #[test]
    fn paper_like_preset_hits_tuned_contrasts() {
        let config = Config::default();
        let mut all = Vec::new();
        for basis in [ScanBasis::Linear, ScanBasis::Circular] {
            let rows = simulate_polarization(&config, basis, "paper_like", 11, false).unwrap();
            for c in analyze_polarization(basis, &rows).unwrap() {
                all.push(c.contrast);
            }
        }
        assert_eq!(all.len(), 4);
        for c in &all {
            assert!((0.78..=1.0).contains(c), "contrast {c}");
        }
        let mean = all.iter().sum::<f64>() / 4.0;
        assert!((mean - 0.904).abs() < 0.01, "mean contrast {mean}");
    }

    #[test]
    fn sign_change_counter() {
        assert_eq!(derivative_sign_changes(&[1.0, 2.0, 3.0, 2.0, 1.0], 0.0), 1);
        assert_eq!(derivative_sign_changes(&[1.0, 2.0, 1.0, 2.0, 1.0], 0.0), 3);
        // small wiggles below the deadband are ignored
        assert_eq!(
            derivative_sign_changes(&[1.0, 2.0, 3.0, 2.0, 1.0, 1.001, 0.999], 0.01),
            1
        );
    }
}
