use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, ZERO};

/// Pulses whose quadrature norm is further than this from one are rejected
/// rather than silently rescaled.
pub const NORM_TOLERANCE: f64 = 1e-3;

/// Gaussians are followed out to `center + SUPPORT_WIDTHS / omega`.
const SUPPORT_WIDTHS: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub enum PulseShape {
    /// `(Ω²/2π)^¼ · exp(−Ω²(t − center)²/4)`
    Gaussian { omega: f64, center: f64 },
    /// Linearly interpolated samples, zero outside the tabulated range.
    Tabulated { times: Vec<f64>, values: Vec<Complex64> },
}

impl PulseShape {
    pub fn gaussian(omega: f64, center: f64) -> Self {
        PulseShape::Gaussian { omega, center }
    }

    /// Parse `t,re[,im]` rows. Blank lines, `#` comments and a non-numeric
    /// header line are skipped.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let nums: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            let nums = match nums {
                Some(v) => v,
                None if times.is_empty() && values.is_empty() && lineno == first_content_line(text) => continue,
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "pulse table line {}: expected numbers, got {line:?}",
                        lineno + 1
                    )))
                }
            };
            let value = match nums.as_slice() {
                [t, re] => (*t, Complex64::new(*re, 0.0)),
                [t, re, im] => (*t, Complex64::new(*re, *im)),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "pulse table line {}: expected 2 or 3 columns, got {}",
                        lineno + 1,
                        nums.len()
                    )))
                }
            };
            times.push(value.0);
            values.push(value.1);
        }
        Ok(PulseShape::Tabulated { times, values })
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidPulse { index, reason });
        match self {
            PulseShape::Gaussian { omega, center } => {
                if !(omega.is_finite() && *omega > 0.0) {
                    return bad(format!("bandwidth must be positive, got {omega}"));
                }
                if !center.is_finite() {
                    return bad(format!("center must be finite, got {center}"));
                }
            }
            PulseShape::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return bad(format!("need at least two samples, got {}", times.len()));
                }
                if times[0] < 0.0 {
                    return bad(format!("table starts before t = 0 (at {})", times[0]));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("table times are not strictly increasing".into());
                }
                if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
                    return bad("table contains non-finite entries".into());
                }
            }
        }
        Ok(())
    }

    fn support_end(&self) -> f64 {
        match self {
            PulseShape::Gaussian { omega, center } => center + SUPPORT_WIDTHS / omega,
            PulseShape::Tabulated { times, .. } => *times.last().unwrap(),
        }
    }

    fn eval(&self, t: f64) -> Complex64 {
        match self {
            PulseShape::Gaussian { omega, center } => {
                let amp = (omega * omega / (2.0 * PI)).powf(0.25);
                let x = t - center;
                Complex64::new(amp * (-omega * omega * x * x / 4.0).exp(), 0.0)
            }
            PulseShape::Tabulated { times, values } => {
                if t < times[0] || t > times[times.len() - 1] {
                    return ZERO;
                }
                let hi = times.partition_point(|&s| s < t).max(1);
                let (t0, t1) = (times[hi - 1], times[hi]);
                let w = (t - t0) / (t1 - t0);
                values[hi - 1] * (1.0 - w) + values[hi] * w
            }
        }
    }
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

/// `n` pulse envelopes sampled on a uniform grid `t_m = m·dt`, `m = 0..=steps`.
///
/// Each envelope is rescaled so its trapezoidal norm on the grid is exactly
/// one; construction fails if the unscaled norm is off by more than
/// [`NORM_TOLERANCE`].
#[derive(Clone, Debug)]
pub struct PulseSet {
    shapes: Vec<PulseShape>,
    scales: Vec<f64>,
    dt: f64,
    steps: usize,
    samples: Vec<Vec<Complex64>>,
}

impl PulseSet {
    /// The grid runs to at least `horizon` and far enough to hold every pulse.
    pub fn new(shapes: Vec<PulseShape>, dt: f64, horizon: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be non-negative, got {horizon}")));
        }
        for (i, s) in shapes.iter().enumerate() {
            s.validate(i + 1)?;
        }
        if shapes.len() > super::MAX_PHOTONS {
            return Err(Error::InvalidArgument(format!(
                "{} pulses exceed the supported maximum {}",
                shapes.len(),
                super::MAX_PHOTONS
            )));
        }
        let end = shapes.iter().map(PulseShape::support_end).fold(horizon, f64::max);
        let steps = ((end / dt) - 1e-9).ceil().max(1.0) as usize;

        let mut samples = Vec::with_capacity(shapes.len());
        let mut scales = Vec::with_capacity(shapes.len());
        for (i, shape) in shapes.iter().enumerate() {
            let raw: Vec<Complex64> = (0..=steps).map(|m| shape.eval(m as f64 * dt)).collect();
            let norm = trapezoid(dt, raw.iter().map(|z| z.norm_sqr())).sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidPulse {
                    index: i + 1,
                    reason: format!("norm on [0, {}] is {norm:.6}, expected 1", steps as f64 * dt),
                });
            }
            let scale = 1.0 / norm;
            samples.push(raw.into_iter().map(|z| z * scale).collect());
            scales.push(scale);
        }
        Ok(Self { shapes, scales, dt, steps, samples })
    }

    pub fn gaussians(params: &[(f64, f64)], dt: f64, horizon: f64) -> Result<Self> {
        Self::new(params.iter().map(|&(o, c)| PulseShape::gaussian(o, c)).collect(), dt, horizon)
    }

    pub fn n(&self) -> usize {
        self.shapes.len()
    }

    pub fn shapes(&self) -> &[PulseShape] {
        &self.shapes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_end(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |m| m as f64 * self.dt)
    }

    /// Grid samples of pulse `i` (0-based).
    pub fn samples(&self, i: usize) -> &[Complex64] {
        &self.samples[i]
    }

    /// Rescaling applied to reach unit norm; `1/‖ξ‖` before rescaling.
    pub fn scale(&self, i: usize) -> f64 {
        self.scales[i]
    }

    /// ξ_i(t) for 0-based `i`. Gaussians are evaluated in closed form, tables
    /// by linear interpolation; both agree with the grid samples at grid
    /// points.
    pub fn value(&self, i: usize, t: f64) -> Complex64 {
        self.shapes[i].eval(t) * self.scales[i]
    }

    pub fn values_at(&self, t: f64, out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n()) {
            *o = self.value(i, t);
        }
    }

    /// `G_ij = ⟨ξ_i|ξ_j⟩ = ∫ ξ_i*(t) ξ_j(t) dt` by the trapezoid rule.
    pub fn gram_matrix(&self) -> ComplexMatrix {
        let n = self.n();
        let mut g = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = trapezoid_c(
                    self.dt,
                    self.samples[i].iter().zip(&self.samples[j]).map(|(a, b)| a.conj() * b),
                );
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
            g[(i, i)].im = 0.0;
        }
        g
    }
}

fn trapezoid(dt: f64, f: impl ExactSizeIterator<Item = f64>) -> f64 {
    let last = f.len().saturating_sub(1);
    f.enumerate()
        .map(|(m, v)| if m == 0 || m == last { 0.5 * v } else { v })
        .sum::<f64>()
        * dt
}

fn trapezoid_c(dt: f64, f: impl ExactSizeIterator<Item = Complex64>) -> Complex64 {
    let last = f.len().saturating_sub(1);
    f.enumerate()
        .map(|(m, v)| if m == 0 || m == last { v * 0.5 } else { v })
        .sum::<Complex64>()
        * dt
}
