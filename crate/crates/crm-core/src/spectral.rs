//! Fourier machinery: trapezoid-rule Fourier coefficients over one period,
//! truncated reconstruction, and the derivative-energy identity
//! `int ||f'||^2 = sum |F(n)|^2 |omega(n) 2 pi n|` that links L2 norms of
//! derivatives to oscillation amplitudes.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write;

/// Fourier coefficients and per-harmonic energy terms of the derivative
/// identity over one analysis window.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Window length (treated as the period).
    pub tau: f64,
    /// Truncation order: coefficients cover n in [-n_max, n_max].
    pub n_max: usize,
    /// F(n) for n = -n_max ..= n_max.
    pub coefficients: Vec<Complex64>,
    /// |F(n)|^2 * |omega(n) * 2 pi n| per n, same ordering.
    pub harmonic_energies: Vec<f64>,
    /// Measured int ||f'(t)||^2 dt over the window.
    pub identity_lhs: f64,
    /// Sum of the harmonic energies.
    pub identity_rhs: f64,
    /// |f(end) - f(start)| measured before any detrending.
    pub endpoint_mismatch: f64,
    /// Set when the endpoint mismatch exceeds 1e-6 times the sample range;
    /// the periodicity assumption behind the identity is then approximate.
    pub periodicity_warning: bool,
}

impl SpectralReport {
    pub fn coefficient(&self, n: i64) -> Complex64 {
        self.coefficients[(n + self.n_max as i64) as usize]
    }

    /// Relative gap between the two sides of the identity.
    pub fn identity_gap(&self) -> f64 {
        let scale = self.identity_lhs.abs().max(self.identity_rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.identity_lhs - self.identity_rhs).abs() / scale
        }
    }

    /// Dominant nonzero-frequency component as (frequency in Hz, amplitude).
    pub fn dominant_harmonic(&self) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for n in 1..=self.n_max {
            let amp = 2.0 * self.coefficient(n as i64).norm();
            if amp > best.1 {
                best = (n as f64 / self.tau, amp);
            }
        }
        best
    }

    /// Amplitude-vs-frequency table for plotting: `freq_hz,amplitude` rows.
    pub fn write_amplitude_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq_hz,amplitude")?;
        writeln!(w, "0,{}", crate::sim::fmt_f64(self.coefficient(0).norm()))?;
        for n in 1..=self.n_max {
            writeln!(
                w,
                "{},{}",
                crate::sim::fmt_f64(n as f64 / self.tau),
                crate::sim::fmt_f64(2.0 * self.coefficient(n as i64).norm())
            )?;
        }
        Ok(())
    }
}

fn check_sampling(samples: &[f64], n_max: usize) -> Result<()> {
    if samples.len() < 4 * n_max + 4 {
        return Err(Error::Undersampled(format!(
            "{} samples for N = {n_max}; need at least {}",
            samples.len(),
            4 * n_max + 4
        )));
    }
    Ok(())
}

/// Trapezoid-rule approximation of
/// `F(n) = (1/tau) int f(t) exp(-i omega(n) t) dt` for n in [-n_max, n_max].
/// `samples` must cover one period uniformly, both endpoints included.
pub fn fourier_coefficients(
    samples: &[f64],
    tau: f64,
    n_max: usize,
) -> Result<Vec<Complex64>> {
    check_sampling(samples, n_max)?;
    let m = samples.len() - 1;
    let dt = tau / m as f64;
    let mut out = Vec::with_capacity(2 * n_max + 1);
    for n in -(n_max as i64)..=(n_max as i64) {
        let omega = 2.0 * PI * n as f64 / tau;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &f) in samples.iter().enumerate() {
            let t = i as f64 * dt;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * f * Complex64::new(0.0, -omega * t).exp();
        }
        out.push(acc * dt / tau);
    }
    Ok(out)
}

/// Evaluates both sides of the derivative-energy identity on one window.
/// The left side differentiates the samples (forward differences) and
/// integrates the square; the right side sums the per-harmonic energies.
pub fn parseval_identity(samples: &[f64], tau: f64, n_max: usize) -> Result<SpectralReport> {
    check_sampling(samples, n_max)?;
    let m = samples.len() - 1;
    let dt = tau / m as f64;
    let range = samples.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - samples.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let endpoint_mismatch = (samples[m] - samples[0]).abs();
    let periodicity_warning = endpoint_mismatch > 1e-6 * range.max(f64::MIN_POSITIVE);

    let coefficients = fourier_coefficients(samples, tau, n_max)?;
    let mut harmonic_energies = Vec::with_capacity(coefficients.len());
    let mut rhs = 0.0;
    for (idx, c) in coefficients.iter().enumerate() {
        let n = idx as i64 - n_max as i64;
        let omega = 2.0 * PI * n as f64 / tau;
        let energy = c.norm_sqr() * (omega * 2.0 * PI * n as f64).abs();
        harmonic_energies.push(energy);
        rhs += energy;
    }

    // midpoint-rule integral of the squared forward difference
    let mut lhs = 0.0;
    for w in samples.windows(2) {
        let d = (w[1] - w[0]) / dt;
        lhs += d * d * dt;
    }

    Ok(SpectralReport {
        tau,
        n_max,
        coefficients,
        harmonic_energies,
        identity_lhs: lhs,
        identity_rhs: rhs,
        endpoint_mismatch,
        periodicity_warning,
    })
}

/// Sup-norm of the residual between the samples and their order-`n_max`
/// Fourier reconstruction.
pub fn truncation_error(samples: &[f64], tau: f64, n_max: usize) -> Result<f64> {
    let coeffs = fourier_coefficients(samples, tau, n_max)?;
    let m = samples.len() - 1;
    let dt = tau / m as f64;
    let mut worst = 0.0_f64;
    for (i, &f) in samples.iter().enumerate() {
        let t = i as f64 * dt;
        let mut rec = Complex64::new(0.0, 0.0);
        for (idx, c) in coeffs.iter().enumerate() {
            let n = idx as i64 - n_max as i64;
            let omega = 2.0 * PI * n as f64 / tau;
            rec += c * Complex64::new(0.0, omega * t).exp();
        }
        worst = worst.max((f - rec.re).abs());
    }
    Ok(worst)
}

/// Extracts `channel` over `[t_start, t_end]`, removes the straight line
/// through the window endpoints (so the periodized signal is continuous),
/// and runs the identity on the detrended samples. The pre-detrend endpoint
/// mismatch is preserved in the report.
pub fn windowed_identity(
    traj: &crate::sim::Trajectory,
    channel: &str,
    t_start: f64,
    t_end: f64,
    n_max: usize,
) -> Result<SpectralReport> {
    let f = traj.channel(channel)?;
    let times = traj.times();
    let i0 = times.partition_point(|&t| t < t_start - 1e-12);
    let i1 = times.partition_point(|&t| t <= t_end + 1e-12);
    if i1 <= i0 + 1 {
        return Err(Error::Undersampled("empty analysis window".into()));
    }
    let window = &f[i0..i1];
    let tau = times[i1 - 1] - times[i0];
    let m = window.len() - 1;
    let slope = (window[m] - window[0]) / m as f64;
    let detrended: Vec<f64> = window
        .iter()
        .enumerate()
        .map(|(i, &v)| v - window[0] - slope * i as f64)
        .collect();
    let mut report = parseval_identity(&detrended, tau, n_max)?;
    let range = window.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - window.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    report.endpoint_mismatch = (window[m] - window[0]).abs();
    report.periodicity_warning = report.endpoint_mismatch > 1e-6 * range.max(f64::MIN_POSITIVE);
    Ok(report)
}
