//! Weighted least squares: a damped Gauss-Newton engine with analytic
//! Jacobians for the nonlinear models (Lorentzian resonance, fixed-period
//! sinusoid) and exact normal-equation solutions for the linear ones
//! (center-vs-pressure line, width-vs-pressure curve).

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured point with its 1-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

impl WeightedPoint {
    pub fn new(x: f64, y: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Fit(format!("sigma must be positive, got {sigma}")));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Fit("non-finite data point".into()));
        }
        Ok(WeightedPoint { x, y, sigma })
    }

    /// Counting-statistics sigma: sqrt(counts), with the one-count rule for
    /// empty bins.
    pub fn from_counts(x: f64, counts: f64) -> Result<Self> {
        Self::new(x, counts, counts.max(1.0).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    Singular,
}

/// Parameter estimates with uncertainties from one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// 1-sigma uncertainties, sqrt of the covariance diagonal.
    pub uncertainties: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub reduced_chi_square: f64,
    pub status: FitStatus,
    pub iterations: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.uncertainties[i])
    }

    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    /// True when the relative uncertainty of `name` exceeds `threshold`.
    pub fn is_poorly_constrained(&self, name: &str, threshold: f64) -> bool {
        match (self.value(name), self.uncertainty(name)) {
            (Some(v), Some(s)) => s > threshold * v.abs(),
            _ => true,
        }
    }
}

/// A parametric curve with an analytic parameter gradient.
pub trait CurveModel {
    fn parameter_names(&self) -> &'static [&'static str];
    fn eval(&self, x: f64, params: &[f64]) -> f64;
    /// Writes d f(x)/d p_j into `out`.
    fn gradient(&self, x: f64, params: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Scaled-gradient convergence threshold.
    pub gradient_tol: f64,
    /// Optional per-parameter box constraints.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            gradient_tol: 1e-8,
            bounds: None,
        }
    }
}

fn chi_square(model: &dyn CurveModel, points: &[WeightedPoint], params: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = (p.y - model.eval(p.x, params)) / p.sigma;
            r * r
        })
        .sum()
}

/// Scale-invariant gradient magnitude used for the convergence test:
/// max_j |g_j| * max(|p_j|, 1) / max(chi2, 1), with g the gradient of the
/// half-chi-square objective.
pub fn scaled_gradient(model: &dyn CurveModel, points: &[WeightedPoint], params: &[f64]) -> f64 {
    let m = params.len();
    let mut grad = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut chi2 = 0.0;
    for p in points {
        let f = model.eval(p.x, params);
        let r = (p.y - f) / p.sigma;
        chi2 += r * r;
        model.gradient(p.x, params, &mut tmp);
        for j in 0..m {
            grad[j] += r * tmp[j] / p.sigma;
        }
    }
    grad.iter()
        .zip(params)
        .map(|(g, p)| g.abs() * p.abs().max(1.0))
        .fold(0.0, f64::max)
        / chi2.max(1.0)
}

fn apply_bounds(params: &mut [f64], bounds: &Option<Vec<(f64, f64)>>) {
    if let Some(bounds) = bounds {
        for (p, (lo, hi)) in params.iter_mut().zip(bounds) {
            *p = p.clamp(*lo, *hi);
        }
    }
}

fn covariance_from_normal(normal: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    normal.clone().try_inverse()
}

fn finish(
    names: &[&str],
    values: Vec<f64>,
    normal: &DMatrix<f64>,
    chi2: f64,
    n: usize,
    status: FitStatus,
    iterations: usize,
    warnings: Vec<String>,
) -> FitResult {
    let m = values.len();
    let dof = n.saturating_sub(m).max(1);
    let (cov, unc, status) = match covariance_from_normal(normal) {
        Some(cov) => {
            let unc = (0..m).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
            let rows = (0..m)
                .map(|i| (0..m).map(|j| cov[(i, j)]).collect())
                .collect();
            (rows, unc, status)
        }
        None => (
            vec![vec![f64::NAN; m]; m],
            vec![f64::NAN; m],
            FitStatus::Singular,
        ),
    };
    FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        values,
        uncertainties: unc,
        covariance: cov,
        reduced_chi_square: chi2 / dof as f64,
        status,
        iterations,
        warnings,
    }
}

/// Damped least squares (Levenberg-Marquardt) on a weighted curve model.
pub fn least_squares(
    model: &dyn CurveModel,
    points: &[WeightedPoint],
    initial: &[f64],
    options: &FitOptions,
) -> Result<FitResult> {
    let n = points.len();
    let m = initial.len();
    if m != model.parameter_names().len() {
        return Err(Error::Fit(format!(
            "initial guess has {m} entries, model has {} parameters",
            model.parameter_names().len()
        )));
    }
    if n < m {
        return Err(Error::Fit(format!(
            "{n} points cannot constrain {m} parameters"
        )));
    }
    for p in points {
        if !(p.sigma > 0.0) || !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::Fit("invalid data point".into()));
        }
    }
    let mut params = initial.to_vec();
    apply_bounds(&mut params, &options.bounds);
    if points
        .iter()
        .any(|p| !model.eval(p.x, &params).is_finite())
    {
        return Err(Error::Fit(
            "model produced non-finite output at the initial guess".into(),
        ));
    }

    let mut lambda = 1e-3;
    let mut chi2 = chi_square(model, points, &params);
    let mut iterations = 0;
    let mut status = FitStatus::MaxIterations;
    let mut grad_buf = vec![0.0; m];
    let mut normal = DMatrix::zeros(m, m);

    for iter in 0..options.max_iterations {
        iterations = iter + 1;
        // assemble J^T J and J^T r at the current point
        normal.fill(0.0);
        let mut rhs = DVector::zeros(m);
        for p in points {
            let f = model.eval(p.x, &params);
            let r = (p.y - f) / p.sigma;
            model.gradient(p.x, &params, &mut grad_buf);
            for j in 0..m {
                let gj = grad_buf[j] / p.sigma;
                rhs[j] += gj * r;
                for k in 0..=j {
                    normal[(j, k)] += gj * grad_buf[k] / p.sigma;
                }
            }
        }
        for j in 0..m {
            for k in (j + 1)..m {
                normal[(j, k)] = normal[(k, j)];
            }
        }

        let sg = rhs
            .iter()
            .zip(&params)
            .map(|(g, p)| g.abs() * p.abs().max(1.0))
            .fold(0.0, f64::max)
            / chi2.max(1.0);
        if sg < options.gradient_tol {
            status = FitStatus::Converged;
            break;
        }

        if (0..m).all(|j| normal[(j, j)] == 0.0) {
            status = FitStatus::Singular;
            break;
        }

        let mut stepped = false;
        for _ in 0..60 {
            let mut damped = normal.clone();
            for j in 0..m {
                let d = normal[(j, j)];
                damped[(j, j)] = d + lambda * d.max(1e-30);
            }
            let Some(chol) = Cholesky::new(damped) else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&rhs);
            let mut trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(p, s)| p + s)
                .collect();
            apply_bounds(&mut trial, &options.bounds);
            let trial_chi2 = chi_square(model, points, &trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 * (1.0 + 1e-15) + 1e-300 {
                params = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 3.0).max(1e-14);
                stepped = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e15 {
                break;
            }
        }
        if !stepped {
            // no productive step available: either converged in practice or singular
            status = if sg < options.gradient_tol * 1e3 {
                FitStatus::Converged
            } else {
                FitStatus::Singular
            };
            break;
        }
    }

    // final normal matrix at the optimum for the covariance
    normal.fill(0.0);
    for p in points {
        model.gradient(p.x, &params, &mut grad_buf);
        for j in 0..m {
            let gj = grad_buf[j] / p.sigma;
            for k in 0..=j {
                normal[(j, k)] += gj * grad_buf[k] / p.sigma;
            }
        }
    }
    for j in 0..m {
        for k in (j + 1)..m {
            normal[(j, k)] = normal[(k, j)];
        }
    }
    chi2 = chi_square(model, points, &params);
    Ok(finish(
        model.parameter_names(),
        params,
        &normal,
        chi2,
        n,
        status,
        iterations,
        Vec::new(),
    ))
}

// ---------------------------------------------------------------------------
// Lorentzian resonance
// ---------------------------------------------------------------------------

/// y = offset + amplitude * (G/2)^2 / ((x - center)^2 + (G/2)^2)
pub struct LorentzianModel;

impl CurveModel for LorentzianModel {
    fn parameter_names(&self) -> &'static [&'static str] {
        &["center", "fwhm", "amplitude", "offset"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let (c, fwhm, a, o) = (p[0], p[1], p[2], p[3]);
        let hw = 0.5 * fwhm;
        let d = x - c;
        o + a * hw * hw / (d * d + hw * hw)
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let (c, fwhm, a, _o) = (p[0], p[1], p[2], p[3]);
        let hw = 0.5 * fwhm;
        let d = x - c;
        let denom = d * d + hw * hw;
        let denom2 = denom * denom;
        out[0] = a * hw * hw * 2.0 * d / denom2;
        out[1] = a * hw * d * d / denom2; // d/d(fwhm) = (1/2) d/d(hw)
        out[2] = hw * hw / denom;
        out[3] = 1.0;
    }
}

fn strictly_monotone(points: &[WeightedPoint]) -> bool {
    let inc = points.windows(2).all(|w| w[1].y >= w[0].y);
    let dec = points.windows(2).all(|w| w[1].y <= w[0].y);
    inc || dec
}

/// Fit a Lorentzian peak. Initialization: center at the count maximum
/// (lowest index on plateaus), offset at the minimum, amplitude at the
/// max-min difference, width from the half-maximum crossings.
pub fn fit_lorentzian(points: &[WeightedPoint]) -> Result<FitResult> {
    if points.len() < 5 {
        return Err(Error::Fit(format!(
            "Lorentzian fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    let mut sorted: Vec<WeightedPoint> = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    let ymax = sorted.iter().map(|p| p.y).fold(f64::MIN, f64::max);
    let ymin = sorted.iter().map(|p| p.y).fold(f64::MAX, f64::min);
    if ymax <= ymin {
        return Err(Error::Fit("flat data: no peak to initialize from".into()));
    }
    if strictly_monotone(&sorted) {
        return Err(Error::Fit(
            "monotone data: no interior peak to initialize from".into(),
        ));
    }
    let peak_idx = sorted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.y.total_cmp(&b.1.y))
        .map(|(i, _)| {
            // lowest index on exact plateaus
            let mut i0 = i;
            while i0 > 0 && sorted[i0 - 1].y == sorted[i].y {
                i0 -= 1;
            }
            i0
        })
        .unwrap();
    let center0 = sorted[peak_idx].x;
    let amp0 = ymax - ymin;
    let level = ymin + 0.5 * amp0;
    let crossing = |from: usize, step: i64| -> Option<f64> {
        let mut i = from as i64;
        loop {
            let next = i + step;
            if next < 0 || next as usize >= sorted.len() {
                return None;
            }
            let (a, b) = (&sorted[i as usize], &sorted[next as usize]);
            if (a.y >= level) != (b.y >= level) {
                let t = (level - a.y) / (b.y - a.y);
                return Some(a.x + t * (b.x - a.x));
            }
            i = next;
        }
    };
    let right = crossing(peak_idx, 1);
    let left = crossing(peak_idx, -1);
    let span = sorted.last().unwrap().x - sorted[0].x;
    let fwhm0 = match (left, right) {
        (Some(l), Some(r)) => (r - l).abs(),
        (Some(l), None) => 2.0 * (center0 - l).abs(),
        (None, Some(r)) => 2.0 * (r - center0).abs(),
        (None, None) => {
            return Err(Error::Fit(
                "no half-maximum crossings: data does not span a peak".into(),
            ))
        }
    }
    .max(span * 1e-6);

    let options = FitOptions {
        bounds: Some(vec![
            (f64::NEG_INFINITY, f64::INFINITY),
            (span * 1e-9, f64::INFINITY),
            (0.0, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
        ]),
        ..FitOptions::default()
    };
    least_squares(
        &LorentzianModel,
        &sorted,
        &[center0, fwhm0, amp0, ymin],
        &options,
    )
}

// ---------------------------------------------------------------------------
// Weighted straight line (resonance center versus pressure)
// ---------------------------------------------------------------------------

/// Weighted linear fit of center frequency (THz) against pressure (bar).
/// Returns `intercept_thz` (the zero-pressure frequency) and
/// `slope_mhz_per_bar`; covariance entries follow those units.
pub fn fit_center_vs_pressure(points: &[WeightedPoint]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::Fit("line fit needs at least 2 points".into()));
    }
    let mut wsum = 0.0;
    let mut xmean = 0.0;
    let mut ymean = 0.0;
    for p in points {
        if !(p.sigma > 0.0) {
            return Err(Error::Fit("non-positive sigma".into()));
        }
        let w = 1.0 / (p.sigma * p.sigma);
        wsum += w;
        xmean += w * p.x;
        ymean += w * p.y;
    }
    xmean /= wsum;
    ymean /= wsum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        let dx = p.x - xmean;
        sxx += w * dx * dx;
        sxy += w * dx * (p.y - ymean);
    }
    if sxx == 0.0 {
        return Err(Error::Fit(
            "singular line fit: all pressures identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ymean - slope * xmean;
    let var_slope = 1.0 / sxx;
    let var_intercept = 1.0 / wsum + xmean * xmean / sxx;
    let cov_is = -xmean / sxx;
    let chi2: f64 = points
        .iter()
        .map(|p| ((p.y - intercept - slope * p.x) / p.sigma).powi(2))
        .sum();
    let dof = points.len().saturating_sub(2).max(1);
    // slope reported in MHz/bar (input centers are THz)
    Ok(FitResult {
        names: vec!["intercept_thz".into(), "slope_mhz_per_bar".into()],
        values: vec![intercept, slope * 1e6],
        uncertainties: vec![var_intercept.sqrt(), var_slope.sqrt() * 1e6],
        covariance: vec![
            vec![var_intercept, cov_is * 1e6],
            vec![cov_is * 1e6, var_slope * 1e12],
        ],
        reduced_chi_square: chi2 / dof as f64,
        status: FitStatus::Converged,
        iterations: 1,
        warnings: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Width versus pressure: Gamma(p) = A/p + B*p
// ---------------------------------------------------------------------------

/// Exact weighted fit of the two-term width law. `A` carries MHz*bar,
/// `B` MHz/bar. Flags `A` in the warnings when its relative uncertainty
/// exceeds 50%.
pub fn fit_dicke_width(points: &[WeightedPoint]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Fit("width fit needs at least 3 pressures".into()));
    }
    for p in points {
        if !(p.y > 0.0) {
            return Err(Error::Fit(format!(
                "non-positive width {} at {} bar",
                p.y, p.x
            )));
        }
        if !(p.x > 0.0) {
            return Err(Error::Fit("non-positive pressure".into()));
        }
    }
    // normal equations for basis [1/p, p]
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        let u = 1.0 / p.x;
        let v = p.x;
        s11 += w * u * u;
        s12 += w * u * v;
        s22 += w * v * v;
        b1 += w * u * p.y;
        b2 += w * v * p.y;
    }
    let det = s11 * s22 - s12 * s12;
    if det <= 0.0 {
        return Err(Error::Fit("singular width fit".into()));
    }
    let a = (s22 * b1 - s12 * b2) / det;
    let b = (s11 * b2 - s12 * b1) / det;
    let cov = [
        [s22 / det, -s12 / det],
        [-s12 / det, s11 / det],
    ];
    let chi2: f64 = points
        .iter()
        .map(|p| ((p.y - a / p.x - b * p.x) / p.sigma).powi(2))
        .sum();
    let dof = points.len().saturating_sub(2).max(1);
    let sigma_a = cov[0][0].max(0.0).sqrt();
    let mut warnings = Vec::new();
    if sigma_a > 0.5 * a.abs() {
        warnings.push(format!(
            "diffusion coefficient A poorly constrained: {:.1}% relative uncertainty",
            100.0 * sigma_a / a.abs()
        ));
    }
    Ok(FitResult {
        names: vec!["dicke_a_mhz_bar".into(), "broadening_b_mhz_per_bar".into()],
        values: vec![a, b],
        uncertainties: vec![sigma_a, cov[1][1].max(0.0).sqrt()],
        covariance: vec![cov[0].to_vec(), cov[1].to_vec()],
        reduced_chi_square: chi2 / dof as f64,
        status: FitStatus::Converged,
        iterations: 1,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Fixed-period sinusoid (polarization scans)
// ---------------------------------------------------------------------------

/// y = offset + amplitude * sin(2*pi*(x - phase)/period), period fixed.
pub struct SineModel {
    pub period_deg: f64,
}

impl CurveModel for SineModel {
    fn parameter_names(&self) -> &'static [&'static str] {
        &["amplitude", "phase_deg", "offset"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let k = std::f64::consts::TAU / self.period_deg;
        p[2] + p[0] * (k * (x - p[1])).sin()
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let k = std::f64::consts::TAU / self.period_deg;
        let arg = k * (x - p[1]);
        out[0] = arg.sin();
        out[1] = -p[0] * k * arg.cos();
        out[2] = 1.0;
    }
}

/// Fit a fixed-period sinusoid. The period is set by the scanned optic
/// (half-wave plate: 90 deg, quarter-wave plate: 180 deg), not fitted.
/// Amplitude is reported non-negative; the phase is folded into [0, period).
pub fn fit_sine(points: &[WeightedPoint], period_deg: f64) -> Result<FitResult> {
    if points.len() < 5 {
        return Err(Error::Fit(format!(
            "sine fit needs at least 5 angles, got {}",
            points.len()
        )));
    }
    if !(period_deg > 0.0) {
        return Err(Error::Fit("period must be positive".into()));
    }
    let span = points.iter().map(|p| p.x).fold(f64::MIN, f64::max)
        - points.iter().map(|p| p.x).fold(f64::MAX, f64::min);
    let mut warnings = Vec::new();
    if span < period_deg {
        warnings.push(format!(
            "angle span {span:.1} deg below one period ({period_deg} deg); fit may be degenerate"
        ));
    }

    // linear initialization on basis [1, sin(kx), cos(kx)]
    let k = std::f64::consts::TAU / period_deg;
    let mut normal = DMatrix::zeros(3, 3);
    let mut rhs = DVector::zeros(3);
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        let basis = [1.0, (k * p.x).sin(), (k * p.x).cos()];
        for i in 0..3 {
            rhs[i] += w * basis[i] * p.y;
            for j in 0..3 {
                normal[(i, j)] += w * basis[i] * basis[j];
            }
        }
    }
    let init = match Cholesky::new(normal.clone()) {
        Some(chol) => chol.solve(&rhs),
        None => DVector::from_vec(vec![
            points.iter().map(|p| p.y).sum::<f64>() / points.len() as f64,
            1.0,
            0.0,
        ]),
    };
    let (c0, a_sin, a_cos) = (init[0], init[1], init[2]);
    let amp0 = (a_sin * a_sin + a_cos * a_cos).sqrt();
    // a*sin(kx) + b*cos(kx) = amp * sin(k(x - phase)) with
    // phase = -atan2(b, a)/k
    let phase0 = (-f64::atan2(a_cos, a_sin) / k).rem_euclid(period_deg);

    let mut result = least_squares(
        &SineModel { period_deg },
        points,
        &[amp0.max(1e-12), phase0, c0],
        &FitOptions::default(),
    )?;
    // amplitude >= 0 by phase convention
    if result.values[0] < 0.0 {
        result.values[0] = -result.values[0];
        result.values[1] += 0.5 * period_deg;
    }
    result.values[1] = result.values[1].rem_euclid(period_deg);
    result.warnings.extend(warnings);
    Ok(result)
}

/// Angle of maximum transmission for a fitted sinusoid: phase + period/4,
/// folded into [0, period).
pub fn sine_peak_angle(phase_deg: f64, period_deg: f64) -> f64 {
    (phase_deg + 0.25 * period_deg).rem_euclid(period_deg)
}

/// Difference of two angles on a circle of the given period, in
/// [-period/2, period/2).
pub fn angle_difference(a_deg: f64, b_deg: f64, period_deg: f64) -> f64 {
    let mut d = (a_deg - b_deg).rem_euclid(period_deg);
    if d >= 0.5 * period_deg {
        d -= period_deg;
    }
    d
}
