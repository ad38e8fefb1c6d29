//! Deterministic ODE integration and trajectory recording shared by all
//! system families.
//!
//! Two integrators are provided: a fixed-step classic RK4 for bit-exact
//! regression artifacts, and an embedded Dormand-Prince 5(4) pair with
//! 4th-order dense output for the stiff-ish high-gain runs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Integration method selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Classic fixed-step RK4. `dt` must divide `record_dt`.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with adaptive steps and dense output onto the
    /// record grid.
    Rk45 {
        abs_tol: f64,
        rel_tol: f64,
        dt_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    /// Simulation horizon in seconds.
    pub horizon: f64,
    /// Output sampling interval in seconds.
    pub record_dt: f64,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, horizon: f64, record_dt: f64) -> Self {
        Self {
            method: Method::Rk4 { dt },
            horizon,
            record_dt,
        }
    }

    pub fn rk45(abs_tol: f64, rel_tol: f64, dt_max: f64, horizon: f64, record_dt: f64) -> Self {
        Self {
            method: Method::Rk45 {
                abs_tol,
                rel_tol,
                dt_max,
            },
            horizon,
            record_dt,
        }
    }

    /// Default integrator: RK45 with abs_tol 1e-9, rel_tol 1e-7.
    pub fn default_rk45(horizon: f64) -> Self {
        Self::rk45(1e-9, 1e-7, 0.01, horizon, 0.01)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidConfig("horizon must be > 0".into()));
        }
        if !(self.record_dt > 0.0) {
            return Err(Error::InvalidConfig("record_dt must be > 0".into()));
        }
        match self.method {
            Method::Rk4 { dt } => {
                if !(dt > 0.0) {
                    return Err(Error::InvalidConfig("dt must be > 0".into()));
                }
                if self.record_dt < dt - 1e-12 {
                    return Err(Error::InvalidConfig(
                        "record_dt must be >= dt for fixed-step integration".into(),
                    ));
                }
                let ratio = self.record_dt / dt;
                if (ratio - ratio.round()).abs() > 1e-6 {
                    return Err(Error::InvalidConfig(
                        "record_dt must be an integer multiple of dt".into(),
                    ));
                }
            }
            Method::Rk45 {
                abs_tol,
                rel_tol,
                dt_max,
            } => {
                if !(abs_tol > 0.0) || !(rel_tol > 0.0) || !(dt_max > 0.0) {
                    return Err(Error::InvalidConfig(
                        "tolerances and dt_max must be > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fixed-step safety rule: reject an RK4 config whose step is too large
    /// for the fastest closed-loop mode, `rate` = max(1, gamma, |ell|).
    pub fn check_fixed_step_rate(&self, rate: f64) -> Result<()> {
        if let Method::Rk4 { dt } = self.method {
            let limit = 0.1 / rate.max(1.0);
            if dt > limit + 1e-15 {
                return Err(Error::InvalidConfig(format!(
                    "fixed-step dt = {dt} violates dt <= 0.1/max(1, gamma, |ell|) = {limit}"
                )));
            }
        }
        Ok(())
    }

    fn record_count(&self) -> usize {
        (self.horizon / self.record_dt + 1e-9).floor() as usize
    }

    /// The output time grid `0, record_dt, 2 record_dt, ...`.
    pub fn record_times(&self) -> Vec<f64> {
        (0..=self.record_count())
            .map(|k| k as f64 * self.record_dt)
            .collect()
    }
}

/// Integrator settings echoed into trajectory metadata and CSV headers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scenario: String,
    pub integrator: String,
}

/// A uniformly sampled time series of named state channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    channels: Vec<(String, Vec<f64>)>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Builds a trajectory, enforcing the shape and finiteness invariants.
    pub fn new(
        times: Vec<f64>,
        channels: Vec<(String, Vec<f64>)>,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidConfig(
                    "trajectory times must be strictly increasing".into(),
                ));
            }
        }
        for (name, samples) in &channels {
            if samples.len() != times.len() {
                return Err(Error::InvalidConfig(format!(
                    "channel `{name}` length {} != times length {}",
                    samples.len(),
                    times.len()
                )));
            }
            if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence { t: times[i] });
            }
        }
        Ok(Self {
            times,
            channels,
            meta,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.iter().any(|(n, _)| n == name)
    }

    /// Appends a derived channel (same length as `times`).
    pub fn push_channel(&mut self, name: impl Into<String>, samples: Vec<f64>) -> Result<()> {
        let name = name.into();
        if samples.len() != self.times.len() {
            return Err(Error::InvalidConfig(format!(
                "channel `{name}` length mismatch"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: self.times[i] });
        }
        self.channels.push((name, samples));
        Ok(())
    }

    /// Serializes to CSV: first column `t`, remaining columns in declared
    /// order, 17-significant-digit floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for (name, _) in &self.channels {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for i in 0..self.times.len() {
            write!(w, "{}", fmt_f64(self.times[i]))?;
            for (_, samples) in &self.channels {
                write!(w, ",{}", fmt_f64(samples[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// 17-significant-digit decimal float, the canonical on-disk format.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

const DOPRI_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DOPRI_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// b - bhat, the embedded error weights.
const DOPRI_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights for the order-4 continuous extension.
const DOPRI_D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates `rhs` from `x0` over the configured horizon and samples the
/// result on the `record_dt` grid. Identical inputs produce bit-identical
/// trajectories.
pub fn integrate<F>(rhs: F, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let names: Vec<String> = (0..x0.len()).map(|i| format!("x{i}")).collect();
    integrate_labeled(rhs, x0, cfg, &names)
}

/// Like [`integrate`] but with caller-provided channel names.
pub fn integrate_labeled<F>(
    mut rhs: F,
    x0: &[f64],
    cfg: &IntegratorConfig,
    names: &[String],
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    assert_eq!(names.len(), x0.len(), "one channel name per state");
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: 0.0 });
    }
    let states = match cfg.method {
        Method::Rk4 { dt } => integrate_rk4(&mut rhs, x0, cfg, dt)?,
        Method::Rk45 {
            abs_tol,
            rel_tol,
            dt_max,
        } => integrate_rk45(&mut rhs, x0, cfg, abs_tol, rel_tol, dt_max)?,
    };
    let times = cfg.record_times();
    let meta = TrajectoryMeta {
        scenario: String::new(),
        integrator: match cfg.method {
            Method::Rk4 { dt } => format!("rk4 dt={dt}"),
            Method::Rk45 {
                abs_tol,
                rel_tol,
                dt_max,
            } => format!("rk45 abs_tol={abs_tol} rel_tol={rel_tol} dt_max={dt_max}"),
        },
    };
    let n = x0.len();
    let channels = names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), states.iter().map(|s| s[j]).collect()))
        .collect::<Vec<(String, Vec<f64>)>>();
    debug_assert_eq!(states.len(), times.len());
    let _ = n;
    Trajectory::new(times, channels, meta)
}

fn rk4_step<F>(rhs: &mut F, t: f64, y: &[f64], h: f64, out: &mut Vec<f64>)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    out.clear();
    for i in 0..n {
        out.push(y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
}

fn integrate_rk4<F>(
    rhs: &mut F,
    x0: &[f64],
    cfg: &IntegratorConfig,
    dt: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let per_record = (cfg.record_dt / dt).round() as usize;
    let records = cfg.record_count();
    let mut states = Vec::with_capacity(records + 1);
    let mut y = x0.to_vec();
    states.push(y.clone());
    let mut next = Vec::new();
    for k in 0..records {
        for j in 0..per_record {
            let step_index = k * per_record + j;
            let t = step_index as f64 * dt;
            rk4_step(rhs, t, &y, dt, &mut next);
            std::mem::swap(&mut y, &mut next);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                t: (k + 1) as f64 * cfg.record_dt,
            });
        }
        states.push(y.clone());
    }
    Ok(states)
}

fn integrate_rk45<F>(
    rhs: &mut F,
    x0: &[f64],
    cfg: &IntegratorConfig,
    abs_tol: f64,
    rel_tol: f64,
    dt_max: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let horizon = cfg.record_count() as f64 * cfg.record_dt;
    let record_times = cfg.record_times();
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(record_times.len());
    states.push(x0.to_vec());
    let mut next_record = 1usize;

    let mut t = 0.0_f64;
    let mut y = x0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    rhs(t, &y, &mut k[0]);
    let mut h = (cfg.record_dt / 4.0).min(dt_max).min(horizon);
    let mut facmax = 5.0_f64;
    let mut tmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];

    while t < horizon && next_record < record_times.len() {
        h = h.min(dt_max).min(horizon - t);
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
        // stages 2..7 (k[0] is FSAL from the previous step)
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += DOPRI_A[s - 1][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            rhs(t + DOPRI_C[s] * h, &tmp, &mut k[s]);
        }
        // 5th-order solution is stage 7's state (FSAL)
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += DOPRI_A[5][j] * kj[i];
            }
            y1[i] = y[i] + h * acc;
        }
        // embedded error estimate
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += DOPRI_E[j] * kj[i];
            }
            e *= h;
            let scale = abs_tol + rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / scale) * (e / scale);
        }
        err = (err / n as f64).sqrt();

        if err <= 1.0 {
            if y1.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { t: t + h });
            }
            // dense output over (t, t+h]
            let mut rcont: Option<[Vec<f64>; 5]> = None;
            while next_record < record_times.len() && record_times[next_record] <= t + h + 1e-12 {
                let tr = record_times[next_record];
                let theta = ((tr - t) / h).clamp(0.0, 1.0);
                let rc = rcont.get_or_insert_with(|| dense_coefficients(&y, &y1, &k, h));
                let mut yr = vec![0.0; n];
                for i in 0..n {
                    yr[i] = rc[0][i]
                        + theta
                            * (rc[1][i]
                                + (1.0 - theta)
                                    * (rc[2][i] + theta * (rc[3][i] + (1.0 - theta) * rc[4][i])));
                }
                if yr.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { t: tr });
                }
                states.push(yr);
                next_record += 1;
            }
            t += h;
            y.copy_from_slice(&y1);
            k.swap(0, 6); // FSAL
            let fac = if err == 0.0 {
                facmax
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, facmax)
            };
            h *= fac;
            facmax = 5.0;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            facmax = 1.0;
        }
    }
    if next_record != record_times.len() {
        return Err(Error::StepUnderflow { t, h });
    }
    Ok(states)
}

/// Hairer's DOPRI5 continuous extension coefficients for one step.
fn dense_coefficients(y0: &[f64], y1: &[f64], k: &[Vec<f64>], h: f64) -> [Vec<f64>; 5] {
    let n = y0.len();
    let mut rc = [
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    for i in 0..n {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k[0][i] - ydiff;
        rc[0][i] = y0[i];
        rc[1][i] = ydiff;
        rc[2][i] = bspl;
        rc[3][i] = ydiff - h * k[6][i] - bspl;
        let mut d = 0.0;
        for (j, kj) in k.iter().enumerate() {
            d += DOPRI_D[j] * kj[i];
        }
        rc[4][i] = h * d;
    }
    rc
}

/// Squared truncated L2 norm of a channel: composite trapezoid of f^2 from
/// `t_start` to the end of the record, with linear interpolation of f at
/// `t_start` so the quadrature is additive over adjacent intervals.
pub fn truncated_l2(traj: &Trajectory, channel: &str, t_start: f64) -> Result<f64> {
    let f = traj.channel(channel)?;
    Ok(truncated_l2_samples(traj.times(), f, t_start))
}

/// Slice-based core of [`truncated_l2`] for channels that are computed on
/// the fly rather than stored on a trajectory.
pub fn truncated_l2_samples(times: &[f64], f: &[f64], t_start: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    let t_end = *times.last().unwrap();
    if t_start >= t_end {
        return 0.0;
    }
    let t_start = t_start.max(times[0]);
    // first sample index strictly after t_start
    let i1 = times.partition_point(|&t| t <= t_start + 1e-15);
    let mut acc = 0.0;
    if i1 > 0 && i1 < times.len() && times[i1 - 1] < t_start - 1e-15 {
        // partial leading interval
        let (ta, tb) = (times[i1 - 1], times[i1]);
        let w = (t_start - ta) / (tb - ta);
        let fa = f[i1 - 1] + w * (f[i1] - f[i1 - 1]);
        acc += 0.5 * (fa * fa + f[i1] * f[i1]) * (tb - t_start);
    } else if i1 > 0 {
        // t_start lies on the grid; start from that node
        let i0 = i1 - 1;
        if i1 < times.len() {
            acc += 0.5 * (f[i0] * f[i0] + f[i1] * f[i1]) * (times[i1] - times[i0]);
        }
    }
    for i in i1.max(1)..times.len() - 1 {
        acc += 0.5 * (f[i] * f[i] + f[i + 1] * f[i + 1]) * (times[i + 1] - times[i]);
    }
    acc
}

/// Forward-difference derivative of a channel, last value repeated to
/// preserve length. Matches the paper's `(u(t_{i+1}) - u(t_i)) / (t_{i+1} - t_i)`
/// spacing convention.
pub fn numeric_derivative(traj: &Trajectory, channel: &str) -> Result<Vec<f64>> {
    let f = traj.channel(channel)?;
    let times = traj.times();
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let mut d = Vec::with_capacity(times.len());
    for i in 0..times.len() - 1 {
        d.push((f[i + 1] - f[i]) / (times[i + 1] - times[i]));
    }
    d.push(*d.last().unwrap());
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_decay_cfg(method: Method) -> IntegratorConfig {
        IntegratorConfig {
            method,
            horizon: 1.0,
            record_dt: 0.01,
        }
    }

    #[test]
    fn exponential_decay_rk45() {
        let cfg = exp_decay_cfg(Method::Rk45 {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            dt_max: 0.01,
        });
        let traj = integrate(|_, x, dx| dx[0] = -x[0], &[1.0], &cfg).unwrap();
        let x = traj.channel("x0").unwrap();
        assert_relative_eq!(*x.last().unwrap(), (-1.0_f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn exponential_decay_rk4() {
        let cfg = exp_decay_cfg(Method::Rk4 { dt: 0.001 });
        let traj = integrate(|_, x, dx| dx[0] = -x[0], &[1.0], &cfg).unwrap();
        let x = traj.channel("x0").unwrap();
        assert_relative_eq!(*x.last().unwrap(), (-1.0_f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn constant_rhs_identity() {
        let cfg = exp_decay_cfg(Method::Rk45 {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            dt_max: 0.01,
        });
        let traj = integrate(|_, _, dx| dx[0] = 0.0, &[3.0], &cfg).unwrap();
        for v in traj.channel("x0").unwrap() {
            assert_eq!(*v, 3.0);
        }
    }

    #[test]
    fn harmonic_oscillator_round_trip() {
        let cfg = IntegratorConfig::rk45(1e-9, 1e-7, 0.01, 2.0 * std::f64::consts::PI, 0.01);
        let traj = integrate(
            |_, x, dx| {
                dx[0] = x[1];
                dx[1] = -x[0];
            },
            &[1.0, 0.0],
            &cfg,
        )
        .unwrap();
        let x1 = traj.channel("x0").unwrap();
        let x2 = traj.channel("x1").unwrap();
        let end = traj.len() - 1;
        // one full period is ~2pi; the grid ends at the last multiple of
        // record_dt before the horizon, so compare against the analytic
        // solution at that time.
        let t_end = traj.times()[end];
        assert_relative_eq!(x1[end], t_end.cos(), epsilon = 1e-6);
        assert_relative_eq!(x2[end], -t_end.sin(), epsilon = 1e-6);
        for i in 0..traj.len() {
            let energy = x1[i] * x1[i] + x2[i] * x2[i];
            assert!((energy - 1.0).abs() < 1e-7, "energy drift at sample {i}");
        }
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let mut errors = Vec::new();
        for &dt in &[1e-2, 5e-3, 2.5e-3] {
            let cfg = IntegratorConfig::rk4(dt, 1.0, 0.01);
            let traj = integrate(|_, x, dx| dx[0] = -x[0], &[1.0], &cfg).unwrap();
            let x_end = *traj.channel("x0").unwrap().last().unwrap();
            errors.push((x_end - (-1.0_f64).exp()).abs());
        }
        assert!(errors[0] / errors[1] >= 8.0);
        assert!(errors[1] / errors[2] >= 8.0);
    }

    #[test]
    fn integrate_is_deterministic() {
        let cfg = IntegratorConfig::rk45(1e-9, 1e-7, 0.01, 5.0, 0.01);
        let run = || {
            integrate(
                |t, x, dx| {
                    dx[0] = (t.sin() - x[0]) * 3.0;
                },
                &[0.5],
                &cfg,
            )
            .unwrap()
            .to_csv_string()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = IntegratorConfig::rk4(0.01, 5.0, 0.01);
        let err = integrate(|_, x, dx| dx[0] = x[0] * x[0], &[10.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn truncated_l2_exponential() {
        let cfg = IntegratorConfig::rk4(0.001, 20.0, 0.001);
        let traj = integrate(|_, x, dx| dx[0] = -x[0], &[1.0], &cfg).unwrap();
        let l2 = truncated_l2(&traj, "x0", 0.0).unwrap();
        assert_relative_eq!(l2, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn truncated_l2_zero_and_unknown_channel() {
        let cfg = IntegratorConfig::rk4(0.01, 1.0, 0.01);
        let traj = integrate(|_, _, dx| dx[0] = 0.0, &[0.0], &cfg).unwrap();
        assert_eq!(truncated_l2(&traj, "x0", 0.0).unwrap(), 0.0);
        assert!(matches!(
            truncated_l2(&traj, "nope", 0.0),
            Err(Error::UnknownChannel(_))
        ));
    }

    #[test]
    fn truncated_l2_single_harmonic() {
        // f(t) = sin(2 pi t) over one period: integral of f^2 = 0.5
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.001).collect();
        let f: Vec<f64> = times
            .iter()
            .map(|t| (2.0 * std::f64::consts::PI * t).sin())
            .collect();
        let traj =
            Trajectory::new(times, vec![("f".into(), f)], TrajectoryMeta::default()).unwrap();
        assert_relative_eq!(truncated_l2(&traj, "f", 0.0).unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn truncated_l2_additive_over_adjacent_intervals() {
        let times: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let f: Vec<f64> = times.iter().map(|t| (1.3 * t).sin() + 0.2 * t).collect();
        let traj =
            Trajectory::new(times, vec![("f".into(), f)], TrajectoryMeta::default()).unwrap();
        let whole = truncated_l2(&traj, "f", 0.0).unwrap();
        let first = whole - truncated_l2(&traj, "f", 2.0).unwrap();
        let second = truncated_l2(&traj, "f", 2.0).unwrap();
        assert_relative_eq!(first + second, whole, epsilon = 1e-12);
        // splitting off-grid still agrees to quadrature tolerance
        let a = whole - truncated_l2(&traj, "f", 2.005).unwrap();
        let b = truncated_l2(&traj, "f", 2.005).unwrap();
        assert_relative_eq!(a + b, whole, epsilon = 1e-6);
    }

    #[test]
    fn numeric_derivative_linear_and_constant() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let lin: Vec<f64> = times.clone();
        let con: Vec<f64> = vec![2.0; times.len()];
        let traj = Trajectory::new(
            times,
            vec![("lin".into(), lin), ("con".into(), con)],
            TrajectoryMeta::default(),
        )
        .unwrap();
        for v in numeric_derivative(&traj, "lin").unwrap() {
            assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        }
        for v in numeric_derivative(&traj, "con").unwrap() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn numeric_derivative_quadratic_forward_value() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let sq: Vec<f64> = times.iter().map(|t| t * t).collect();
        let traj =
            Trajectory::new(times, vec![("sq".into(), sq)], TrajectoryMeta::default()).unwrap();
        let d = numeric_derivative(&traj, "sq").unwrap();
        // forward difference of t^2 at t = 1 with dt = 0.01 is 2.01
        assert_relative_eq!(d[100], 2.01, epsilon = 1e-9);
    }

    #[test]
    fn numeric_derivative_too_few_samples() {
        let traj = Trajectory::new(
            vec![0.0],
            vec![("f".into(), vec![1.0])],
            TrajectoryMeta::default(),
        )
        .unwrap();
        assert!(matches!(
            numeric_derivative(&traj, "f"),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn fixed_step_safety_rule() {
        let cfg = IntegratorConfig::rk4(0.001, 1.0, 0.01);
        assert!(cfg.check_fixed_step_rate(100.0).is_ok());
        assert!(cfg.check_fixed_step_rate(1000.0).is_err());
    }

    #[test]
    fn csv_has_17_significant_digits() {
        let cfg = IntegratorConfig::rk4(0.01, 0.02, 0.01);
        let traj = integrate(|_, x, dx| dx[0] = -x[0], &[1.0], &cfg).unwrap();
        let csv = traj.to_csv_string();
        let first_line = csv.lines().nth(1).unwrap();
        assert!(first_line.starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    }
}
