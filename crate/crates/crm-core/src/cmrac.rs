//! Composite MRAC with a closed-loop observer (CMRAC-CO) and the
//! classical composite MRAC it is compared against.
//!
//! Both variants share a first-order plant, a parameter observer driven
//! by the observation error, and a coupling term `eta (theta - theta_hat)`
//! between the control and observer estimates. The classical variant
//! regresses on the measured plant state against an open-loop reference
//! model; the observer-fed variant regresses on the observer state against
//! a closed-loop reference model, which filters measurement noise out of
//! the control signal. The comparison study quantifies that difference
//! through the discrete rate of change of the control input.

use crate::bounds::BoundCertificate;
use crate::error::{Error, Result};
use crate::scalar::{matched_gains, project, ProjectionSet, ReferenceModel, ScalarPlant};
use crate::signal::ReferenceInput;
use crate::sim::{
    integrate_labeled, numeric_derivative, truncated_l2_samples, IntegratorConfig, Trajectory,
    TrajectoryMeta,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Clamped, zero-order-held Gaussian measurement noise, sampled
/// deterministically from a fixed seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub seed: u64,
    /// Standard deviation of the Gaussian samples before saturation.
    pub std: f64,
    /// Samples are saturated to [-clamp, clamp].
    pub clamp: f64,
    /// Zero-order-hold sample rate in Hz.
    pub rate_hz: f64,
}

impl NoiseModel {
    /// Unit-variance samples held at 100 Hz and saturated to +/- 0.1.
    pub fn table_study(seed: u64) -> Self {
        Self {
            seed,
            std: 1.0,
            clamp: 0.1,
            rate_hz: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std >= 0.0) || !(self.clamp > 0.0) || !(self.rate_hz > 0.0) {
            return Err(Error::InvalidConfig(
                "noise std must be >= 0, clamp and rate_hz > 0".into(),
            ));
        }
        Ok(())
    }

    /// Value of the held noise sequence at time `t`. Pure function of
    /// (seed, t): each hold interval draws its sample from a stream keyed
    /// by (seed, interval index), so evaluation is O(1) in `t` and
    /// identical across runs with equal seeds.
    pub fn eval(&self, t: f64) -> f64 {
        let index = (t.max(0.0) * self.rate_hz + 1e-9).floor() as u64;
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&index.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        let v: f64 = StandardNormal.sample(&mut rng);
        (self.std * v).clamp(-self.clamp, self.clamp)
    }
}

/// Free-function form of [`NoiseModel::eval`].
pub fn noise_signal(model: &NoiseModel, t: f64) -> f64 {
    model.eval(t)
}

/// Which composite architecture closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmracVariant {
    /// Classical composite MRAC: open-loop reference model, control and
    /// regression on the measured plant state.
    Cmrac,
    /// Composite MRAC with closed-loop observer: closed-loop reference
    /// model, control and regression on the observer state.
    CmracCo,
}

/// One closed-loop experiment for the composite family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmracScenario {
    pub variant: CmracVariant,
    pub plant: ScalarPlant,
    /// `a_m`, `k_m`, and the shared observer/CRM gain `ell`.
    pub reference: ReferenceModel,
    pub gamma: f64,
    /// Coupling gain between the control and observer estimates.
    pub eta: f64,
    pub projection: ProjectionSet,
    #[serde(default)]
    pub input: ReferenceInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    pub x_a0: f64,
    pub x_m0: f64,
    pub x_o0: f64,
    pub theta0: f64,
    pub theta_hat0: f64,
}

/// State layout used by the composite loop.
const X_A: usize = 0;
const X_M: usize = 1;
const X_O: usize = 2;
const TH: usize = 3;
const THH: usize = 4;

impl CmracScenario {
    /// The comparison-study configuration: a_p = 1, k_p = 1, a_m = -1,
    /// k_m = 1, ell = -10, gamma = 100, eta = 1; the reference is zero
    /// for the first four seconds (nonzero plant initial condition) and a
    /// filtered unit step afterwards.
    pub fn table_study(variant: CmracVariant) -> Self {
        Self {
            variant,
            plant: ScalarPlant { a_p: 1.0, k_p: 1.0 },
            reference: ReferenceModel {
                a_m: -1.0,
                k_m: 1.0,
                ell: -10.0,
            },
            gamma: 100.0,
            eta: 1.0,
            projection: ProjectionSet {
                theta_bound: 3.0,
                smoothing: 0.1,
            },
            input: ReferenceInput::FilteredStep {
                amplitude: 1.0,
                start: 4.0,
                tau: 0.5,
            },
            noise: None,
            x_a0: 1.0,
            x_m0: 0.0,
            x_o0: 0.0,
            theta0: 0.0,
            theta_hat0: 0.0,
        }
    }

    pub fn with_noise(mut self, seed: u64) -> Self {
        self.noise = Some(NoiseModel::table_study(seed));
        self
    }

    pub fn theta_star(&self) -> Result<f64> {
        Ok(matched_gains(&self.plant, &self.reference)?.theta_star)
    }

    pub fn k_star(&self) -> Result<f64> {
        Ok(matched_gains(&self.plant, &self.reference)?.k_star)
    }

    /// Effective closed-loop rate `g_theta = a_m + ell + |k_p theta_star|`,
    /// negative whenever the configuration is admissible.
    pub fn g_theta(&self) -> Result<f64> {
        let th = self.theta_star()?;
        Ok(self.reference.a_m + self.reference.ell + (self.plant.k_p * th).abs())
    }

    /// Noise-robust rate `g_n = a_m + ell + 2 |k_p| |theta_star|`.
    pub fn g_noise(&self) -> Result<f64> {
        let th = self.theta_star()?;
        Ok(self.reference.a_m
            + self.reference.ell
            + 2.0 * self.plant.k_p.abs() * th.abs())
    }

    /// `ell^2 / g_theta^2`, the factor by which the observer gain inflates
    /// the guaranteed rate; tends to 1 as ell -> -infinity.
    pub fn ell_ratio(&self) -> Result<f64> {
        let g = self.g_theta()?;
        Ok(self.reference.ell * self.reference.ell / (g * g))
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.reference.validate()?;
        self.projection.validate()?;
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig("gamma must be > 0".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidConfig("eta must be >= 0".into()));
        }
        let th_star = self.theta_star()?;
        if th_star.abs() > self.projection.theta_bound + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "projection radius {} does not contain theta_star = {th_star}",
                self.projection.theta_bound
            )));
        }
        for th0 in [self.theta0, self.theta_hat0] {
            if th0.abs() > self.projection.theta_bound + 1e-9 {
                return Err(Error::OutsideSet {
                    norm: th0.abs(),
                    bound: self.projection.theta_bound,
                });
            }
        }
        // worst-case rate over the projection set; negative is required
        // for the transient guarantees
        let kb = self.plant.k_p.abs() * self.projection.theta_bound;
        let g_worst = self.reference.a_m + self.reference.ell + kb;
        if g_worst >= 0.0 {
            return Err(Error::UnstableGain(g_worst));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
            let g_n_worst = self.reference.a_m + self.reference.ell + 2.0 * kb;
            if g_n_worst >= 0.0 {
                return Err(Error::UnstableGain(g_n_worst));
            }
        }
        Ok(())
    }

    /// Name of the reference-model channel: `x_m` for the closed-loop
    /// model, `x_m_o` for the open-loop one.
    pub fn reference_channel(&self) -> &'static str {
        match self.variant {
            CmracVariant::Cmrac => "x_m_o",
            CmracVariant::CmracCo => "x_m",
        }
    }

    pub fn initial_state(&self) -> [f64; 5] {
        [self.x_a0, self.x_m0, self.x_o0, self.theta0, self.theta_hat0]
    }

    pub fn noise_at(&self, t: f64) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n.eval(t))
    }

    /// Scalar smooth projection with the same boundary-overshoot handling
    /// as the other loops: a discrete stage a hair outside the ball keeps
    /// only the inward part of the update.
    fn projected(&self, raw: f64, value: f64) -> f64 {
        match project(&[raw], &[value], &self.projection) {
            Ok(v) => v[0],
            Err(_) => {
                if raw * value > 0.0 {
                    0.0
                } else {
                    raw
                }
            }
        }
    }

    /// Estimate velocities of the coupled update laws at the given loop
    /// signals. Index 0 is theta-dot, index 1 is theta_hat-dot.
    pub fn update_velocity(
        &self,
        e_m: f64,
        e_o: f64,
        eps_theta: f64,
        regressor: f64,
        theta: f64,
        theta_hat: f64,
    ) -> [f64; 2] {
        let sgn = self.plant.k_p.signum();
        let d_th =
            self.projected(-self.gamma * sgn * e_m * regressor, theta) - self.eta * eps_theta;
        let d_thh =
            self.projected(self.gamma * sgn * e_o * regressor, theta_hat) + self.eta * eps_theta;
        [d_th, d_thh]
    }

    /// The closed-loop vector field over (x_a, x_m, x_o, theta, theta_hat),
    /// where x_a is the physical plant state and the measured state is
    /// x_p = x_a + n(t).
    pub fn rhs(&self) -> Result<impl Fn(f64, &[f64], &mut [f64]) + '_> {
        let p = self.plant;
        let m = self.reference;
        let k_star = self.k_star()?;
        Ok(move |t: f64, x: &[f64], dx: &mut [f64]| {
            let n = self.noise_at(t);
            let x_p = x[X_A] + n;
            let r = self.input.eval(t);
            let (u, regressor) = match self.variant {
                CmracVariant::Cmrac => (x[TH] * x_p + k_star * r, x_p),
                CmracVariant::CmracCo => (x[TH] * x[X_O] + k_star * r, x[X_O]),
            };
            let e_m = x_p - x[X_M];
            let e_o = x[X_O] - x_p;
            let eps = x[TH] - x[THH];
            dx[X_A] = p.a_p * x[X_A] + p.k_p * u;
            dx[X_M] = m.a_m * x[X_M] + m.k_m * r
                - match self.variant {
                    CmracVariant::Cmrac => 0.0,
                    CmracVariant::CmracCo => m.ell * e_m,
                };
            dx[X_O] = m.ell * e_o + (m.a_m - p.k_p * x[THH]) * x[X_O] + p.k_p * u;
            let upd = self.update_velocity(e_m, e_o, eps, regressor, x[TH], x[THH]);
            dx[TH] = upd[0];
            dx[THH] = upd[1];
        })
    }

    /// Lyapunov candidate
    /// `V = (e_m^2 + e_o^2 + (|k_p|/gamma)(theta - theta*)^2 + (|k_p|/gamma)(theta_hat - theta*)^2) / 2`.
    pub fn lyapunov_v(&self, e_m: f64, e_o: f64, theta: f64, theta_hat: f64) -> Result<f64> {
        let th_star = self.theta_star()?;
        let kg = self.plant.k_p.abs() / self.gamma;
        let dt = theta - th_star;
        let dth = theta_hat - th_star;
        Ok(0.5 * (e_m * e_m + e_o * e_o + kg * dt * dt + kg * dth * dth))
    }

    /// Integrates the loop and records the external channel set
    /// (x_a, x_p_measured, x_m or x_m_o, x_o, e_m, e_o, eps_theta,
    /// theta, theta_hat, u, du_dt, V, r, n).
    pub fn simulate(&self, cfg: &IntegratorConfig) -> Result<Trajectory> {
        self.validate()?;
        cfg.check_fixed_step_rate(
            self.gamma
                .max(self.reference.ell.abs())
                .max(self.eta)
                .max(1.0),
        )?;
        let ref_name = self.reference_channel();
        let names: Vec<String> = ["x_a", ref_name, "x_o", "theta", "theta_hat"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let traj = integrate_labeled(self.rhs()?, &self.initial_state(), cfg, &names)?;
        let times = traj.times().to_vec();
        let x_a = traj.channel("x_a")?.to_vec();
        let x_ref = traj.channel(ref_name)?.to_vec();
        let x_o = traj.channel("x_o")?.to_vec();
        let theta = traj.channel("theta")?.to_vec();
        let theta_hat = traj.channel("theta_hat")?.to_vec();
        let k_star = self.k_star()?;

        let n_ch: Vec<f64> = times.iter().map(|&t| self.noise_at(t)).collect();
        let r_ch: Vec<f64> = times.iter().map(|&t| self.input.eval(t)).collect();
        let x_p: Vec<f64> = x_a.iter().zip(&n_ch).map(|(a, n)| a + n).collect();
        let e_m: Vec<f64> = x_p.iter().zip(&x_ref).map(|(p, m)| p - m).collect();
        let e_o: Vec<f64> = x_o.iter().zip(&x_p).map(|(o, p)| o - p).collect();
        let eps: Vec<f64> = theta.iter().zip(&theta_hat).map(|(a, b)| a - b).collect();
        let u: Vec<f64> = (0..times.len())
            .map(|i| match self.variant {
                CmracVariant::Cmrac => theta[i] * x_p[i] + k_star * r_ch[i],
                CmracVariant::CmracCo => theta[i] * x_o[i] + k_star * r_ch[i],
            })
            .collect();
        let v: Vec<f64> = (0..times.len())
            .map(|i| self.lyapunov_v(e_m[i], e_o[i], theta[i], theta_hat[i]))
            .collect::<Result<_>>()?;

        let channels: Vec<(String, Vec<f64>)> = vec![
            ("x_a".into(), x_a),
            ("x_p_measured".into(), x_p),
            (ref_name.into(), x_ref),
            ("x_o".into(), x_o),
            ("e_m".into(), e_m),
            ("e_o".into(), e_o),
            ("eps_theta".into(), eps),
            ("theta".into(), theta),
            ("theta_hat".into(), theta_hat),
            ("u".into(), u),
        ];
        let meta = TrajectoryMeta {
            scenario: format!(
                "{} gamma={} ell={} eta={} noise={}",
                match self.variant {
                    CmracVariant::Cmrac => "cmrac",
                    CmracVariant::CmracCo => "cmrac-co",
                },
                self.gamma,
                self.reference.ell,
                self.eta,
                self.noise
                    .as_ref()
                    .map_or("off".to_string(), |n| format!("seed{}", n.seed)),
            ),
            integrator: traj.meta.integrator.clone(),
        };
        let mut out = Trajectory::new(times.clone(), channels, meta)?;
        let du = numeric_derivative(&out, "u")?;
        out.push_channel("du_dt", du)?;
        out.push_channel("V", v)?;
        out.push_channel("r", r_ch)?;
        out.push_channel("n", n_ch)?;
        Ok(out)
    }
}

/// Largest one-step increase of the recorded Lyapunov channel; at most a
/// small positive discretization residual on admissible noiseless runs.
pub fn max_v_increase(traj: &Trajectory) -> Result<f64> {
    let v = traj.channel("V")?;
    Ok(v.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Control-smoothness and tracking metrics of one variant over the
/// comparison regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    /// max |du/dt| over the excited region [split, T].
    pub max_du_dt_region2: f64,
    /// sqrt of the integral of (du/dt)^2 over the excited region.
    pub l2_du_dt_region2: f64,
    /// max |e_m| before the reference turns on.
    pub max_e_m_region1: f64,
    /// max |e_m| over the excited region.
    pub max_e_m_region2: f64,
    pub final_e_m: f64,
}

fn variant_metrics(traj: &Trajectory, split: f64) -> Result<VariantMetrics> {
    let times = traj.times();
    let du = traj.channel("du_dt")?;
    let e_m = traj.channel("e_m")?;
    let mut max_du = 0.0_f64;
    let mut max_e1 = 0.0_f64;
    let mut max_e2 = 0.0_f64;
    // the last derivative sample is a repeat of its predecessor
    for i in 0..times.len() {
        if times[i] >= split {
            if i + 1 < times.len() {
                max_du = max_du.max(du[i].abs());
            }
            max_e2 = max_e2.max(e_m[i].abs());
        } else {
            max_e1 = max_e1.max(e_m[i].abs());
        }
    }
    Ok(VariantMetrics {
        max_du_dt_region2: max_du,
        l2_du_dt_region2: truncated_l2_samples(times, du, split).sqrt(),
        max_e_m_region1: max_e1,
        max_e_m_region2: max_e2,
        final_e_m: *e_m.last().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?,
    })
}

/// Seed-paired comparison of the two composite architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cmrac: VariantMetrics,
    pub cmrac_co: VariantMetrics,
    /// Boundary between the unexcited and excited regions.
    pub region_split: f64,
    /// The observer-fed variant produced a strictly smaller region-2
    /// max |du/dt|.
    pub co_wins: bool,
    pub tie: bool,
}

/// Runs both variants on identical plant, noise, input, and initial
/// conditions and compares the discrete rate of change of the control.
pub fn compare_variants(
    cmrac: &CmracScenario,
    cmrac_co: &CmracScenario,
    cfg: &IntegratorConfig,
) -> Result<ComparisonReport> {
    if cmrac.variant != CmracVariant::Cmrac || cmrac_co.variant != CmracVariant::CmracCo {
        return Err(Error::MismatchedScenarios(
            "expected (Cmrac, CmracCo) variants in that order".into(),
        ));
    }
    let same = cmrac.plant == cmrac_co.plant
        && cmrac.reference == cmrac_co.reference
        && cmrac.gamma == cmrac_co.gamma
        && cmrac.eta == cmrac_co.eta
        && cmrac.projection == cmrac_co.projection
        && cmrac.input == cmrac_co.input
        && cmrac.noise == cmrac_co.noise
        && cmrac.initial_state() == cmrac_co.initial_state();
    if !same {
        return Err(Error::MismatchedScenarios(
            "variants must share plant, reference, gains, input, noise, and initial conditions"
                .into(),
        ));
    }
    let split = match cmrac.input {
        ReferenceInput::Step { start, .. } | ReferenceInput::FilteredStep { start, .. } => start,
        _ => 0.0,
    };
    let m1 = variant_metrics(&cmrac.simulate(cfg)?, split)?;
    let m2 = variant_metrics(&cmrac_co.simulate(cfg)?, split)?;
    let diff = m2.max_du_dt_region2 - m1.max_du_dt_region2;
    Ok(ComparisonReport {
        co_wins: diff < 0.0,
        tie: diff.abs() <= 1e-12,
        cmrac: m1,
        cmrac_co: m2,
        region_split: split,
    })
}

/// Transient certificates for an observer-fed composite run.
///
/// Noiseless runs get the exponential Lyapunov envelope at rate
/// `2 |g_theta|` plus tail-L2 certificates for e_m, e_o, and eps_theta
/// from time `t3` onward (the estimate-velocity tails carry an unspecified
/// constant and are reported measurement-only). Noisy runs get the
/// `g_n`-rate envelope with the disturbance term `||xi||_inf^2 / (4 g_n^2)`,
/// where xi is reconstructed from a 3-sample smoothing of the recorded
/// noise channel; that certificate is approximate by construction.
pub fn certify_cmracco_run(
    traj: &Trajectory,
    scen: &CmracScenario,
    t3: f64,
) -> Result<Vec<BoundCertificate>> {
    if scen.variant != CmracVariant::CmracCo {
        return Err(Error::PreconditionViolated(
            "certificates apply to the observer-fed variant only".into(),
        ));
    }
    scen.validate()?;
    let times = traj.times();
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let record_dt = times[1] - times[0];
    let horizon = *times.last().unwrap();
    let e_m = traj.channel("e_m")?;
    let e_o = traj.channel("e_o")?;
    let eps = traj.channel("eps_theta")?;
    let v = traj.channel("V")?;
    let kp = scen.plant.k_p.abs();
    let theta_max = scen.projection.theta_max();
    let e0sq = e_m[0] * e_m[0] + e_o[0] * e_o[0];
    let mut certs = Vec::new();

    if scen.noise.is_some() {
        let g_n = scen.g_noise()?;
        if g_n >= 0.0 {
            return Err(Error::UnstableGain(g_n));
        }
        let g = g_n.abs();
        // xi = d/dt n_s - a_p n_s on the 3-sample-smoothed noise channel
        let n_ch = traj.channel("n")?;
        let m = n_ch.len();
        let smooth: Vec<f64> = (0..m)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(m - 1);
                n_ch[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        let mut xi_inf = 0.0_f64;
        for i in 0..m - 1 {
            let ndot = (smooth[i + 1] - smooth[i]) / (times[i + 1] - times[i]);
            xi_inf = xi_inf.max((ndot - scen.plant.a_p * smooth[i]).abs());
        }
        let offset = kp / scen.gamma * theta_max * theta_max + xi_inf * xi_inf / (4.0 * g * g);
        let excess = (0..m)
            .map(|i| v[i] - (0.5 * e0sq * (-2.0 * g * times[i]).exp() + offset))
            .fold(f64::NEG_INFINITY, f64::max);
        certs.push(BoundCertificate::evaluate(
            "v-exp-envelope-approx",
            excess,
            0.0,
            record_dt,
        ));
        return Ok(certs);
    }

    let g = scen.g_theta()?.abs();
    let envelope_excess = (0..times.len())
        .map(|i| {
            v[i] - (0.5 * e0sq * (-2.0 * g * times[i]).exp()
                + kp / scen.gamma * theta_max * theta_max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    certs.push(BoundCertificate::evaluate(
        "v-exp-envelope",
        envelope_excess,
        0.0,
        record_dt,
    ));

    if !(t3 >= 0.0 && t3 < horizon) {
        return Err(Error::PreconditionViolated(format!(
            "t3 = {t3} outside the recorded horizon"
        )));
    }
    if (-g * t3).exp() > g.powf(-0.5) + 1e-12 {
        return Err(Error::PreconditionViolated(format!(
            "tail gate exp(-|g_theta| t3) <= |g_theta|^-1/2 fails at t3 = {t3}"
        )));
    }
    if !(scen.eta > 0.0) {
        return Err(Error::PreconditionViolated(
            "eps_theta tail requires eta > 0".into(),
        ));
    }
    let e_m_end = *e_m.last().unwrap();
    let e_o_end = *e_o.last().unwrap();
    let sqrt_e0 = e0sq.sqrt();
    let tail_bound = sqrt_e0 / (2.0_f64.sqrt() * g) + (kp / (scen.gamma * g)).sqrt() * theta_max;
    let m_em =
        (truncated_l2_samples(times, e_m, t3) + e_m_end * e_m_end / (2.0 * g)).sqrt();
    certs.push(BoundCertificate::evaluate(
        "e-m-tail-l2",
        m_em,
        tail_bound,
        record_dt,
    ));
    let m_eo =
        (truncated_l2_samples(times, e_o, t3) + e_o_end * e_o_end / (2.0 * g)).sqrt();
    certs.push(BoundCertificate::evaluate(
        "e-o-tail-l2",
        m_eo,
        tail_bound,
        record_dt,
    ));
    let eps_remainder =
        scen.gamma * (e_m_end * e_m_end + e_o_end * e_o_end) / (2.0 * scen.eta * kp);
    let m_eps = (truncated_l2_samples(times, eps, t3) + eps_remainder).sqrt();
    let eps_bound = (scen.gamma * e0sq / (2.0 * scen.eta * kp * g)).sqrt()
        + theta_max / scen.eta.sqrt();
    certs.push(BoundCertificate::evaluate(
        "eps-theta-tail-l2",
        m_eps,
        eps_bound,
        record_dt,
    ));

    // estimate-velocity tails: the analytic bound carries an unspecified
    // constant, so only the measurement is reported
    let x_o = traj.channel("x_o")?;
    let theta = traj.channel("theta")?;
    let theta_hat = traj.channel("theta_hat")?;
    let mut d_th = Vec::with_capacity(times.len());
    let mut d_thh = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let upd = scen.update_velocity(e_m[i], e_o[i], eps[i], x_o[i], theta[i], theta_hat[i]);
        d_th.push(upd[0]);
        d_thh.push(upd[1]);
    }
    certs.push(BoundCertificate::measurement_only(
        "thetadot-tail-l2",
        truncated_l2_samples(times, &d_th, t3).sqrt(),
    ));
    certs.push(BoundCertificate::measurement_only(
        "thetahatdot-tail-l2",
        truncated_l2_samples(times, &d_thh, t3).sqrt(),
    ));
    Ok(certs)
}
