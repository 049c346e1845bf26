//! CSV readers and writers for the file formats exchanged with the CLI:
//! spectra, efficiency scans, polarization scans, and count records.
//! All files are UTF-8, comma-separated, with a header row.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fwm::EfficiencyPoint;

/// Frequency axis of a spectrum file: either the absolute pump difference or
/// a detuning relative to the (pressure-shifted) line center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumAxis {
    PumpDifferenceThz,
    DetuningMhz,
}

impl SpectrumAxis {
    pub fn column_name(self) -> &'static str {
        match self {
            SpectrumAxis::PumpDifferenceThz => "pump_difference_THz",
            SpectrumAxis::DetuningMhz => "detuning_MHz",
        }
    }
}

/// One spectrum row: pressure, frequency-axis value, counts, duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub pressure_bar: f64,
    pub axis_value: f64,
    pub counts: f64,
    pub duration_s: f64,
}

pub fn write_spectrum_csv(
    path: impl AsRef<Path>,
    axis: SpectrumAxis,
    rows: &[SpectrumRow],
) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "pressure_bar,{},counts,duration_s", axis.column_name())?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.pressure_bar, row.axis_value, row.counts, row.duration_s
        )?;
    }
    Ok(())
}

fn parse_field(record: &csv::StringRecord, idx: usize, row: usize, name: &str) -> Result<f64> {
    let raw = record.get(idx).ok_or_else(|| Error::MalformedInput {
        row,
        message: format!("missing column '{name}'"),
    })?;
    raw.trim().parse::<f64>().map_err(|_| Error::MalformedInput {
        row,
        message: format!("column '{name}' value '{raw}' is not a number"),
    })
}

/// Read a spectrum CSV, accepting either frequency-axis column.
pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<(SpectrumAxis, Vec<SpectrumRow>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let pressure_idx = find("pressure_bar").ok_or_else(|| Error::MalformedInput {
        row: 1,
        message: "missing header column 'pressure_bar'".into(),
    })?;
    let (axis, axis_idx) = if let Some(i) = find("pump_difference_THz") {
        (SpectrumAxis::PumpDifferenceThz, i)
    } else if let Some(i) = find("detuning_MHz") {
        (SpectrumAxis::DetuningMhz, i)
    } else {
        return Err(Error::MalformedInput {
            row: 1,
            message: "missing frequency column ('pump_difference_THz' or 'detuning_MHz')".into(),
        });
    };
    let counts_idx = find("counts").ok_or_else(|| Error::MalformedInput {
        row: 1,
        message: "missing header column 'counts'".into(),
    })?;
    let duration_idx = find("duration_s");

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_number = i + 2; // 1-based, after the header
        let record = record?;
        let counts = parse_field(&record, counts_idx, row_number, "counts")?;
        if counts < 0.0 {
            return Err(Error::MalformedInput {
                row: row_number,
                message: format!("negative counts {counts}"),
            });
        }
        rows.push(SpectrumRow {
            pressure_bar: parse_field(&record, pressure_idx, row_number, "pressure_bar")?,
            axis_value: parse_field(&record, axis_idx, row_number, axis.column_name())?,
            counts,
            duration_s: match duration_idx {
                Some(idx) => parse_field(&record, idx, row_number, "duration_s")?,
                None => 1.0,
            },
        });
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            row: 1,
            message: "file contains no data rows".into(),
        });
    }
    Ok((axis, rows))
}

pub fn write_efficiency_csv(path: impl AsRef<Path>, points: &[EfficiencyPoint]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(
        out,
        "pressure_bar,eta_internal,eta_external,delta_k_rad_per_m,normalized"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.pressure_bar, p.eta_internal, p.eta_external, p.delta_k_rad_per_m, p.normalized
        )?;
    }
    Ok(())
}

/// One polarization-scan row: analyzer angle and both detector counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationRow {
    pub angle_deg: f64,
    pub counts_d1: f64,
    pub counts_d2: f64,
}

pub fn write_polarization_csv(path: impl AsRef<Path>, rows: &[PolarizationRow]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "angle_deg,counts_d1,counts_d2")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.angle_deg, row.counts_d1, row.counts_d2)?;
    }
    Ok(())
}

pub fn read_polarization_csv(path: impl AsRef<Path>) -> Result<Vec<PolarizationRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let idx = |name: &str| {
        find(name).ok_or_else(|| Error::MalformedInput {
            row: 1,
            message: format!("missing header column '{name}'"),
        })
    };
    let (ai, d1, d2) = (idx("angle_deg")?, idx("counts_d1")?, idx("counts_d2")?);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_number = i + 2;
        let record = record?;
        rows.push(PolarizationRow {
            angle_deg: parse_field(&record, ai, row_number, "angle_deg")?,
            counts_d1: parse_field(&record, d1, row_number, "counts_d1")?,
            counts_d2: parse_field(&record, d2, row_number, "counts_d2")?,
        });
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            row: 1,
            message: "file contains no data rows".into(),
        });
    }
    Ok(rows)
}

/// One background/count record row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub duration_s: f64,
    pub counts: u64,
    pub detector_name: String,
}

pub fn write_counts_csv(path: impl AsRef<Path>, rows: &[CountRow]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "duration_s,counts,detector_name")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.duration_s, row.counts, row.detector_name)?;
    }
    Ok(())
}

pub fn read_counts_csv(path: impl AsRef<Path>) -> Result<Vec<CountRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<CountRow>().enumerate() {
        rows.push(record.map_err(|e| Error::MalformedInput {
            row: i + 2,
            message: e.to_string(),
        })?);
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput {
            row: 1,
            message: "file contains no data rows".into(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_roundtrip_absolute_axis() {
        let dir = std::env::temp_dir().join("csrslab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("spectrum.csv");
        let rows = vec![
            SpectrumRow {
                pressure_bar: 8.0,
                axis_value: 124.5706,
                counts: 8123.0,
                duration_s: 120.0,
            },
            SpectrumRow {
                pressure_bar: 8.0,
                axis_value: 124.5707,
                counts: 4310.0,
                duration_s: 120.0,
            },
        ];
        write_spectrum_csv(&path, SpectrumAxis::PumpDifferenceThz, &rows).unwrap();
        let (axis, back) = read_spectrum_csv(&path).unwrap();
        assert_eq!(axis, SpectrumAxis::PumpDifferenceThz);
        assert_eq!(back, rows);
    }

    #[test]
    fn spectrum_accepts_detuning_axis() {
        let dir = std::env::temp_dir().join("csrslab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("detuning.csv");
        std::fs::write(
            &path,
            "pressure_bar,detuning_MHz,counts,duration_s\n2.0,-400,120,120\n2.0,0,8000,120\n",
        )
        .unwrap();
        let (axis, rows) = read_spectrum_csv(&path).unwrap();
        assert_eq!(axis, SpectrumAxis::DetuningMhz);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].counts, 8000.0);
    }

    #[test]
    fn malformed_row_reports_its_number() {
        let dir = std::env::temp_dir().join("csrslab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(
            &path,
            "pressure_bar,detuning_MHz,counts,duration_s\n2.0,0,8000,120\n2.0,zero,10,120\n",
        )
        .unwrap();
        match read_spectrum_csv(&path) {
            Err(Error::MalformedInput { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected malformed-input error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = std::env::temp_dir().join("csrslab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(read_spectrum_csv(&path).is_err());
    }

    #[test]
    fn polarization_roundtrip() {
        let dir = std::env::temp_dir().join("csrslab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pol.csv");
        let rows = vec![
            PolarizationRow {
                angle_deg: 0.0,
                counts_d1: 100000.0,
                counts_d2: 350.0,
            },
            PolarizationRow {
                angle_deg: 45.0,
                counts_d1: 380.0,
                counts_d2: 99000.0,
            },
        ];
        write_polarization_csv(&path, &rows).unwrap();
        assert_eq!(read_polarization_csv(&path).unwrap(), rows);
    }

    #[test]
    fn counts_roundtrip() {
        let dir = std::env::temp_dir().join("csrslab-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("counts.csv");
        let rows = vec![CountRow {
            duration_s: 120.0,
            counts: 0,
            detector_name: "pmt".into(),
        }];
        write_counts_csv(&path, &rows).unwrap();
        assert_eq!(read_counts_csv(&path).unwrap(), rows);
    }
}
