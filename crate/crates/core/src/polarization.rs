//! Jones-calculus model of the polarization chain: state preparation,
//! polarization-preserving conversion, analysis waveplates, and a polarizing
//! beamsplitter, plus Stokes/contrast/fidelity arithmetic.
//!
//! Angle convention: degrees, waveplate fast axis measured from horizontal,
//! counter-clockwise viewed against the propagation direction.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polarization state in the (H, V) basis. Global phase carries no meaning
/// for any observable computed here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub h: C64,
    pub v: C64,
}

impl JonesVector {
    pub fn new(h: C64, v: C64) -> Result<Self> {
        if h.norm_sqr() + v.norm_sqr() == 0.0 {
            return Err(Error::domain("Jones vector must be normalizable"));
        }
        Ok(JonesVector { h, v })
    }

    pub fn horizontal() -> Self {
        JonesVector {
            h: C64::new(1.0, 0.0),
            v: C64::new(0.0, 0.0),
        }
    }

    pub fn vertical() -> Self {
        JonesVector {
            h: C64::new(0.0, 0.0),
            v: C64::new(1.0, 0.0),
        }
    }

    pub fn diagonal() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        JonesVector {
            h: C64::new(r, 0.0),
            v: C64::new(r, 0.0),
        }
    }

    pub fn antidiagonal() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        JonesVector {
            h: C64::new(r, 0.0),
            v: C64::new(-r, 0.0),
        }
    }

    /// Circular state with S3 = +1.
    pub fn right_circular() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        JonesVector {
            h: C64::new(r, 0.0),
            v: C64::new(0.0, r),
        }
    }

    /// Circular state with S3 = -1.
    pub fn left_circular() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        JonesVector {
            h: C64::new(r, 0.0),
            v: C64::new(0.0, -r),
        }
    }

    /// Linear polarization at `angle_deg` from horizontal.
    pub fn linear(angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        JonesVector {
            h: C64::new(a.cos(), 0.0),
            v: C64::new(a.sin(), 0.0),
        }
    }

    pub fn intensity(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.intensity().sqrt();
        JonesVector {
            h: self.h / n,
            v: self.v / n,
        }
    }

    /// Standard Stokes parameters (S0, S1, S2, S3).
    pub fn stokes(&self) -> [f64; 4] {
        let s0 = self.intensity();
        let s1 = self.h.norm_sqr() - self.v.norm_sqr();
        let cross = self.h.conj() * self.v;
        [s0, s1, 2.0 * cross.re, 2.0 * cross.im]
    }
}

/// Which output of the polarizing beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PbsAxis {
    H,
    V,
}

/// One element of the optics chain. Serialized as
/// `{"kind": ..., "angle_deg": ..., "retardance_deg"?, "extinction"?}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpticalElement {
    HalfWave { angle_deg: f64 },
    QuarterWave { angle_deg: f64 },
    Polarizer { angle_deg: f64 },
    Rotator { angle_deg: f64 },
    Retarder { retardance_deg: f64, angle_deg: f64 },
    PbsPort {
        port: PbsAxis,
        #[serde(default)]
        extinction: f64,
    },
}

type Mat2 = [[C64; 2]; 2];

fn mat_vec(m: &Mat2, x: &JonesVector) -> JonesVector {
    JonesVector {
        h: m[0][0] * x.h + m[0][1] * x.v,
        v: m[1][0] * x.h + m[1][1] * x.v,
    }
}

fn rotation(theta_rad: f64) -> Mat2 {
    let c = C64::new(theta_rad.cos(), 0.0);
    let s = C64::new(theta_rad.sin(), 0.0);
    [[c, -s], [s, c]]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// General linear retarder: fast axis at `angle_deg`, retardance `delta_deg`.
fn retarder_matrix(retardance_deg: f64, angle_deg: f64) -> Mat2 {
    let half = 0.5 * retardance_deg.to_radians();
    let fast = C64::new(0.0, -half).exp();
    let slow = C64::new(0.0, half).exp();
    let d = [[fast, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), slow]];
    let th = angle_deg.to_radians();
    mat_mul(&rotation(th), &mat_mul(&d, &rotation(-th)))
}

impl OpticalElement {
    pub fn jones_matrix(&self) -> Mat2 {
        match *self {
            OpticalElement::HalfWave { angle_deg } => retarder_matrix(180.0, angle_deg),
            OpticalElement::QuarterWave { angle_deg } => retarder_matrix(90.0, angle_deg),
            OpticalElement::Retarder {
                retardance_deg,
                angle_deg,
            } => retarder_matrix(retardance_deg, angle_deg),
            OpticalElement::Rotator { angle_deg } => rotation(angle_deg.to_radians()),
            OpticalElement::Polarizer { angle_deg } => {
                let th = angle_deg.to_radians();
                let proj = [
                    [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                    [C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                ];
                mat_mul(&rotation(th), &mat_mul(&proj, &rotation(-th)))
            }
            OpticalElement::PbsPort { port, extinction } => {
                let leak = C64::new(extinction.max(0.0).sqrt(), 0.0);
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                match port {
                    PbsAxis::H => [[one, zero], [zero, leak]],
                    PbsAxis::V => [[leak, zero], [zero, one]],
                }
            }
        }
    }
}

/// Apply a chain of elements in propagation order (first element first).
pub fn apply_chain(input: &JonesVector, chain: &[OpticalElement]) -> JonesVector {
    chain
        .iter()
        .fold(*input, |state, el| mat_vec(&el.jones_matrix(), &state))
}

/// Frequency conversion in the isotropic gas: the output polarization equals
/// the input polarization (scalar vibrational response). The pump state sets
/// only the overall amplitude, which is normalized out here.
pub fn convert_polarization(input: &JonesVector, _pump: &JonesVector) -> JonesVector {
    *input
}

/// One row of a polarization scan: analyzer angle and the two detector
/// count expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub angle_deg: f64,
    pub counts_d1: f64,
    pub counts_d2: f64,
}

/// A simulated polarization scan (deterministic expectations; counting noise
/// is added by the detection layer).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationScan {
    pub rows: Vec<ScanRow>,
}

/// Which kind of plate is rotated during a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateKind {
    HalfWave,
    QuarterWave,
}

impl PlateKind {
    /// Modulation period of the transmitted intensity, degrees of plate angle.
    pub fn scan_period_deg(self) -> f64 {
        match self {
            PlateKind::HalfWave => 90.0,
            PlateKind::QuarterWave => 180.0,
        }
    }

    fn nominal_retardance_deg(self) -> f64 {
        match self {
            PlateKind::HalfWave => 180.0,
            PlateKind::QuarterWave => 90.0,
        }
    }
}

/// Analysis chain with one rotating plate: fixed elements before it, the
/// scanned plate (optionally imperfect), fixed elements after it, and the
/// polarizing beamsplitter feeding the two detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanChain {
    #[serde(default)]
    pub before: Vec<OpticalElement>,
    pub scanned: PlateKind,
    #[serde(default)]
    pub scanned_retardance_error_deg: f64,
    #[serde(default)]
    pub scanned_axis_error_deg: f64,
    #[serde(default)]
    pub after: Vec<OpticalElement>,
    #[serde(default)]
    pub pbs_extinction: f64,
}

impl ScanChain {
    pub fn state_at_pbs(&self, input: &JonesVector, angle_deg: f64) -> JonesVector {
        let mut state = apply_chain(input, &self.before);
        let plate = OpticalElement::Retarder {
            retardance_deg: self.scanned.nominal_retardance_deg()
                + self.scanned_retardance_error_deg,
            angle_deg: angle_deg + self.scanned_axis_error_deg,
        };
        state = mat_vec(&plate.jones_matrix(), &state);
        apply_chain(&state, &self.after)
    }

    fn port_intensity(&self, state: &JonesVector, port: PbsAxis) -> f64 {
        let el = OpticalElement::PbsPort {
            port,
            extinction: self.pbs_extinction,
        };
        mat_vec(&el.jones_matrix(), state).intensity()
    }
}

/// Deterministic two-detector scan:
/// counts_i(theta) = amplitude * P_i(theta) + background_i.
pub fn simulate_scan(
    input: &JonesVector,
    chain: &ScanChain,
    amplitude: f64,
    background: [f64; 2],
    angles_deg: &[f64],
) -> Result<PolarizationScan> {
    if amplitude < 0.0 || background[0] < 0.0 || background[1] < 0.0 {
        return Err(Error::domain(
            "scan amplitude and backgrounds must be >= 0".into(),
        ));
    }
    let input = input.normalized();
    let rows = angles_deg
        .iter()
        .map(|&angle| {
            let state = chain.state_at_pbs(&input, angle);
            ScanRow {
                angle_deg: angle,
                counts_d1: amplitude * chain.port_intensity(&state, PbsAxis::H) + background[0],
                counts_d2: amplitude * chain.port_intensity(&state, PbsAxis::V) + background[1],
            }
        })
        .collect();
    Ok(PolarizationScan { rows })
}

/// Modulation contrast (max - min)/(max + min) = A/C of a fitted sinusoid
/// with amplitude A and offset C.
pub fn contrast(amplitude: f64, offset: f64) -> Result<f64> {
    if amplitude < 0.0 {
        return Err(Error::domain("sine amplitude must be >= 0"));
    }
    if offset < amplitude {
        return Err(Error::domain(format!(
            "offset {offset} below amplitude {amplitude}: counts would go negative"
        )));
    }
    if offset == 0.0 {
        return Err(Error::domain("offset must be positive"));
    }
    Ok(amplitude / offset)
}

/// Mean of the four basis-scan contrasts.
pub fn fidelity(contrasts: &[f64]) -> Result<f64> {
    if contrasts.len() != 4 {
        return Err(Error::domain(format!(
            "fidelity needs exactly 4 contrasts, got {}",
            contrasts.len()
        )));
    }
    for &c in contrasts {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("contrast {c} outside [0, 1]")));
        }
    }
    Ok(contrasts.iter().sum::<f64>() / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn close(a: &JonesVector, b: &JonesVector) -> bool {
        // equality up to global phase: |<a|b>| = |a||b|
        let inner = a.h.conj() * b.h + a.v.conj() * b.v;
        (inner.norm() - (a.intensity() * b.intensity()).sqrt()).abs() < 1e-9
    }

    #[test]
    fn half_wave_plate_fixed_points_and_rotation() {
        let h = JonesVector::horizontal();
        let out0 = apply_chain(&h, &[OpticalElement::HalfWave { angle_deg: 0.0 }]);
        assert!(close(&out0, &h));
        let out = apply_chain(&h, &[OpticalElement::HalfWave { angle_deg: 22.5 }]);
        assert!(close(&out, &JonesVector::diagonal()));
    }

    #[test]
    fn quarter_wave_plate_makes_circular_light() {
        let h = JonesVector::horizontal();
        let out = apply_chain(&h, &[OpticalElement::QuarterWave { angle_deg: 45.0 }]);
        let s = out.normalized().stokes();
        assert!(s[3].abs() > 1.0 - 1e-12, "S3 = {}", s[3]);
    }

    #[test]
    fn conversion_preserves_any_state() {
        let pump = JonesVector::horizontal();
        for state in [
            JonesVector::diagonal(),
            JonesVector::right_circular(),
            JonesVector::new(C64::new(0.3, 0.1), C64::new(-0.7, 0.64)).unwrap(),
        ] {
            let out = convert_polarization(&state, &pump);
            assert!(close(&out, &state));
            let (si, so) = (state.normalized().stokes(), out.normalized().stokes());
            for i in 0..4 {
                assert_relative_eq!(si[i], so[i], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn stokes_of_cardinal_states() {
        let cases = [
            (JonesVector::horizontal(), [1.0, 1.0, 0.0, 0.0]),
            (JonesVector::diagonal(), [1.0, 0.0, 1.0, 0.0]),
            (JonesVector::right_circular(), [1.0, 0.0, 0.0, 1.0]),
        ];
        for (state, expected) in cases {
            let s = state.stokes();
            for i in 0..4 {
                assert_relative_eq!(s[i], expected[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ideal_half_wave_scan_is_malus_law() {
        let chain = ScanChain {
            before: vec![],
            scanned: PlateKind::HalfWave,
            scanned_retardance_error_deg: 0.0,
            scanned_axis_error_deg: 0.0,
            after: vec![],
            pbs_extinction: 0.0,
        };
        let angles: Vec<f64> = (0..36).map(|i| i as f64 * 5.0).collect();
        let scan = simulate_scan(&JonesVector::horizontal(), &chain, 1.0, [0.0, 0.0], &angles)
            .unwrap();
        for row in &scan.rows {
            let expected = (2.0 * row.angle_deg.to_radians()).cos().powi(2);
            assert_relative_eq!(row.counts_d1, expected, epsilon = 1e-12);
            assert_relative_eq!(row.counts_d2, 1.0 - expected, epsilon = 1e-12);
        }
        // 90 degree periodicity
        let s0 = simulate_scan(&JonesVector::horizontal(), &chain, 1.0, [0.0, 0.0], &[17.0])
            .unwrap();
        let s90 = simulate_scan(&JonesVector::horizontal(), &chain, 1.0, [0.0, 0.0], &[107.0])
            .unwrap();
        assert_relative_eq!(s0.rows[0].counts_d1, s90.rows[0].counts_d1, epsilon = 1e-12);
    }

    #[test]
    fn single_angle_scan_sums_to_amplitude_plus_backgrounds() {
        let chain = ScanChain {
            before: vec![],
            scanned: PlateKind::HalfWave,
            scanned_retardance_error_deg: 0.0,
            scanned_axis_error_deg: 0.0,
            after: vec![],
            pbs_extinction: 0.0,
        };
        let scan = simulate_scan(
            &JonesVector::linear(33.0),
            &chain,
            7.5,
            [0.2, 0.2],
            &[12.0],
        )
        .unwrap();
        assert_eq!(scan.rows.len(), 1);
        let total = scan.rows[0].counts_d1 + scan.rows[0].counts_d2;
        assert_relative_eq!(total, 7.5 + 2.0 * 0.2, epsilon = 1e-12);
    }

    #[test]
    fn contrast_arithmetic() {
        assert_relative_eq!(contrast(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(contrast(0.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(
            contrast(0.5, 0.5 + 2.0 * 0.05 * 0.5).unwrap(),
            0.909090909090909,
            max_relative = 1e-9
        );
        assert!(contrast(1.2, 1.0).is_err());
        // values spanning the observed range are accepted
        assert!(contrast(0.791, 1.0).is_ok());
        assert!(contrast(0.993, 1.0).is_ok());
    }

    #[test]
    fn fidelity_is_plain_mean() {
        assert_relative_eq!(
            fidelity(&[0.904, 0.904, 0.904, 0.904]).unwrap(),
            0.904,
            epsilon = 1e-15
        );
        assert_relative_eq!(fidelity(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(fidelity(&[0.9, 0.9, 0.9]).is_err());
        assert!(fidelity(&[0.9, 0.9, 0.9, 1.4]).is_err());
        let four = [0.791, 0.993, 0.95, 0.882];
        let f = fidelity(&four).unwrap();
        assert!(f >= 0.791 && f <= 0.993);
    }

    proptest! {
        #[test]
        fn unitary_chain_preserves_norm(
            a1 in 0.0f64..360.0,
            a2 in 0.0f64..360.0,
            d in 0.0f64..360.0,
            hr in -1.0f64..1.0,
            hi in -1.0f64..1.0,
            vr in -1.0f64..1.0,
            vi in -1.0f64..1.0,
        ) {
            prop_assume!(hr*hr + hi*hi + vr*vr + vi*vi > 1e-6);
            let state = JonesVector::new(C64::new(hr, hi), C64::new(vr, vi)).unwrap();
            let chain = [
                OpticalElement::HalfWave { angle_deg: a1 },
                OpticalElement::Retarder { retardance_deg: d, angle_deg: a2 },
                OpticalElement::Rotator { angle_deg: a1 - a2 },
                OpticalElement::QuarterWave { angle_deg: a2 },
            ];
            let out = apply_chain(&state, &chain);
            prop_assert!((out.intensity() - state.intensity()).abs() <= 1e-12 * state.intensity());
        }

        #[test]
        fn pbs_ports_are_complete(
            theta in 0.0f64..360.0,
            hr in -1.0f64..1.0,
            vi in -1.0f64..1.0,
        ) {
            prop_assume!(hr*hr + vi*vi > 1e-6);
            let state = JonesVector::new(C64::new(hr, 0.2), C64::new(0.1, vi)).unwrap().normalized();
            let chain = ScanChain {
                before: vec![],
                scanned: PlateKind::QuarterWave,
                scanned_retardance_error_deg: 0.0,
                scanned_axis_error_deg: 0.0,
                after: vec![],
                pbs_extinction: 0.0,
            };
            let scan = simulate_scan(&state, &chain, 1.0, [0.0, 0.0], &[theta]).unwrap();
            let total = scan.rows[0].counts_d1 + scan.rows[0].counts_d2;
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn stokes_pure_state_identity(
            hr in -1.0f64..1.0, hi in -1.0f64..1.0,
            vr in -1.0f64..1.0, vi in -1.0f64..1.0,
        ) {
            prop_assume!(hr*hr + hi*hi + vr*vr + vi*vi > 1e-6);
            let s = JonesVector::new(C64::new(hr, hi), C64::new(vr, vi)).unwrap().stokes();
            prop_assert!((s[0]*s[0] - (s[1]*s[1] + s[2]*s[2] + s[3]*s[3])).abs() < 1e-12 * s[0] * s[0]);
        }
    }
}
