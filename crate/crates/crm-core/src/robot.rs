//! Adaptive control of a two-link planar manipulator with the composite
//! variable `s = q_tilde' + lambda q_tilde`.
//!
//! The reference velocity `q_r' = q_d' - lambda q_tilde` closes the loop
//! between the desired trajectory and the joint state, playing the same
//! role as the feedback gain in a closed-loop reference model: the
//! adaptation is driven by `s` rather than by the raw tracking error.
//! Along the closed loop `V = (s^T H s + a_tilde^T Gamma^-1 a_tilde) / 2`
//! dissipates exactly as `V' = -s^T k_d s`.
//!
//! The plant instance is a declared benchmark: two point-mass links of
//! 1 kg and 1 m each, with the three-parameter dynamic parameterization
//! p_1 = (m_1 + m_2) l_1^2, p_2 = m_2 l_1 l_2, p_3 = m_2 l_2^2.

use crate::error::{Error, Result};
use crate::sim::{integrate_labeled, IntegratorConfig, Trajectory};
use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

const GRAVITY: f64 = 9.81;

/// Two-link planar arm with point-mass links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.m1 > 0.0 && self.m2 > 0.0 && self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::InvalidConfig(
                "masses and lengths must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// True dynamic parameters (p_1, p_2, p_3).
    pub fn params(&self) -> Vector3<f64> {
        Vector3::new(
            (self.m1 + self.m2) * self.l1 * self.l1,
            self.m2 * self.l1 * self.l2,
            self.m2 * self.l2 * self.l2,
        )
    }

    /// Inertia matrix H(q); symmetric positive definite on the workspace.
    pub fn inertia(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let p = self.params();
        let c2 = q[1].cos();
        Matrix2::new(
            p[0] + p[2] + 2.0 * p[1] * c2,
            p[2] + p[1] * c2,
            p[2] + p[1] * c2,
            p[2],
        )
    }

    /// Coriolis/centripetal matrix C(q, q') from the Christoffel symbols,
    /// the factorization for which H' - 2C is skew-symmetric.
    pub fn coriolis(&self, q: &Vector2<f64>, qd: &Vector2<f64>) -> Matrix2<f64> {
        let h = self.params()[1] * q[1].sin();
        Matrix2::new(-h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0)
    }

    /// Gravity torque vector g(q).
    pub fn gravity(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let g1 = (self.m1 + self.m2) * GRAVITY * self.l1 * q[0].cos()
            + self.m2 * GRAVITY * self.l2 * (q[0] + q[1]).cos();
        let g2 = self.m2 * GRAVITY * self.l2 * (q[0] + q[1]).cos();
        Vector2::new(g1, g2)
    }

    /// Regressor satisfying
    /// `Y(q, q', q_r', q_r'') a = H(q) q_r'' + C(q, q') q_r' + g(q)`
    /// for the point-mass parameterization with unit link lengths.
    pub fn regressor(
        &self,
        q: &Vector2<f64>,
        qd: &Vector2<f64>,
        qr_d: &Vector2<f64>,
        qr_dd: &Vector2<f64>,
    ) -> Matrix2x3<f64> {
        let c2 = q[1].cos();
        let s2 = q[1].sin();
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        Matrix2x3::new(
            qr_dd[0] + GRAVITY / self.l1 * c1,
            (2.0 * qr_dd[0] + qr_dd[1]) * c2 - s2 * (qd[1] * qr_d[0] + (qd[0] + qd[1]) * qr_d[1]),
            qr_dd[0] + qr_dd[1] + GRAVITY / self.l2 * c12,
            0.0,
            qr_dd[0] * c2 + s2 * qd[0] * qr_d[0],
            qr_dd[0] + qr_dd[1] + GRAVITY / self.l2 * c12,
        )
    }

    /// Forward dynamics: q'' = H^-1 (tau - C q' - g).
    pub fn accel(
        &self,
        q: &Vector2<f64>,
        qd: &Vector2<f64>,
        tau: &Vector2<f64>,
    ) -> Result<Vector2<f64>> {
        let h = self.inertia(q);
        let rhs = tau - self.coriolis(q, qd) * qd - self.gravity(q);
        h.cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or(Error::SingularInertia)
    }
}

/// Composite-variable adaptive controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotController {
    /// Damping gain k_d (scaled identity).
    pub k_d: f64,
    /// Composite-variable gain lambda.
    pub lambda: f64,
    /// Adaptation gain Gamma (scaled identity).
    pub gamma: f64,
}

impl Default for RobotController {
    fn default() -> Self {
        Self {
            k_d: 10.0,
            lambda: 5.0,
            gamma: 5.0,
        }
    }
}

impl RobotController {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_d > 0.0 && self.lambda > 0.0 && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(
                "k_d, lambda, gamma must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Desired joint trajectory with two analytic derivatives; the default is
/// (sin t, cos 2t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesiredTrajectory {
    pub amp1: f64,
    pub omega1: f64,
    pub amp2: f64,
    pub omega2: f64,
}

impl Default for DesiredTrajectory {
    fn default() -> Self {
        Self {
            amp1: 1.0,
            omega1: 1.0,
            amp2: 1.0,
            omega2: 2.0,
        }
    }
}

impl DesiredTrajectory {
    /// (q_d, q_d', q_d'') at time t.
    pub fn eval(&self, t: f64) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
        let (s1, c1) = (self.omega1 * t).sin_cos();
        let (s2, c2) = (self.omega2 * t).sin_cos();
        let q_d = Vector2::new(self.amp1 * s1, self.amp2 * c2);
        let qd_d = Vector2::new(
            self.amp1 * self.omega1 * c1,
            -self.amp2 * self.omega2 * s2,
        );
        let qdd_d = Vector2::new(
            -self.amp1 * self.omega1 * self.omega1 * s1,
            -self.amp2 * self.omega2 * self.omega2 * c2,
        );
        (q_d, qd_d, qdd_d)
    }
}

/// One adaptive-manipulator experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotScenario {
    pub model: RobotModel,
    pub controller: RobotController,
    pub desired: DesiredTrajectory,
    pub q0: [f64; 2],
    pub qd0: [f64; 2],
    pub a_hat0: [f64; 3],
}

/// State layout: q (2), q' (2), a_hat (3).
const NQ: usize = 2;

impl Default for RobotScenario {
    fn default() -> Self {
        Self {
            model: RobotModel::default(),
            controller: RobotController::default(),
            desired: DesiredTrajectory::default(),
            q0: [0.0, 0.0],
            qd0: [0.0, 0.0],
            a_hat0: [0.0, 0.0, 0.0],
        }
    }
}

impl RobotScenario {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.controller.validate()
    }

    pub fn initial_state(&self) -> [f64; 7] {
        [
            self.q0[0],
            self.q0[1],
            self.qd0[0],
            self.qd0[1],
            self.a_hat0[0],
            self.a_hat0[1],
            self.a_hat0[2],
        ]
    }

    /// Control torque and composite signals at one loop point.
    pub fn control(
        &self,
        t: f64,
        q: &Vector2<f64>,
        qd: &Vector2<f64>,
        a_hat: &Vector3<f64>,
    ) -> (Vector2<f64>, Vector2<f64>, Matrix2x3<f64>) {
        let (q_d, qd_d, qdd_d) = self.desired.eval(t);
        let lam = self.controller.lambda;
        let q_tilde = q - q_d;
        let qd_tilde = qd - qd_d;
        let qr_d = qd_d - lam * q_tilde;
        let qr_dd = qdd_d - lam * qd_tilde;
        let s = qd_tilde + lam * q_tilde;
        let y = self.model.regressor(q, qd, &qr_d, &qr_dd);
        let tau = y * a_hat - self.controller.k_d * s;
        (tau, s, y)
    }

    /// The closed-loop vector field over (q, q', a_hat).
    pub fn rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        move |t: f64, x: &[f64], dx: &mut [f64]| {
            let q = Vector2::new(x[0], x[1]);
            let qd = Vector2::new(x[NQ], x[NQ + 1]);
            let a_hat = Vector3::new(x[4], x[5], x[6]);
            let (tau, s, y) = self.control(t, &q, &qd, &a_hat);
            let qdd = self
                .model
                .accel(&q, &qd, &tau)
                .expect("inertia is positive definite for valid link parameters");
            let da = -self.controller.gamma * y.transpose() * s;
            dx[0] = qd[0];
            dx[1] = qd[1];
            dx[NQ] = qdd[0];
            dx[NQ + 1] = qdd[1];
            dx[4] = da[0];
            dx[5] = da[1];
            dx[6] = da[2];
        }
    }

    /// Lyapunov candidate `V = (s^T H s + a_tilde^T Gamma^-1 a_tilde) / 2`.
    pub fn lyapunov_v(
        &self,
        q: &Vector2<f64>,
        s: &Vector2<f64>,
        a_hat: &Vector3<f64>,
    ) -> f64 {
        let a_tilde = a_hat - self.model.params();
        0.5 * (s.dot(&(self.model.inertia(q) * s))
            + a_tilde.dot(&a_tilde) / self.controller.gamma)
    }

    /// Integrates the loop and records q, q_tilde, s, a_hat, tau, V.
    pub fn simulate(&self, cfg: &IntegratorConfig) -> Result<Trajectory> {
        self.validate()?;
        cfg.check_fixed_step_rate(
            self.controller
                .k_d
                .max(self.controller.lambda)
                .max(self.controller.gamma)
                .max(1.0),
        )?;
        let names: Vec<String> = [
            "q_1", "q_2", "qd_1", "qd_2", "a_hat_1", "a_hat_2", "a_hat_3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let traj = integrate_labeled(self.rhs(), &self.initial_state(), cfg, &names)?;
        let times = traj.times().to_vec();
        let mut channels: Vec<(String, Vec<f64>)> = names
            .iter()
            .map(|name| Ok((name.clone(), traj.channel(name)?.to_vec())))
            .collect::<Result<_>>()?;
        let len = times.len();
        let mut derived: Vec<Vec<f64>> = (0..7).map(|_| Vec::with_capacity(len)).collect();
        for (i, &t) in times.iter().enumerate() {
            let q = Vector2::new(channels[0].1[i], channels[1].1[i]);
            let qd = Vector2::new(channels[2].1[i], channels[3].1[i]);
            let a_hat = Vector3::new(channels[4].1[i], channels[5].1[i], channels[6].1[i]);
            let (q_d, _, _) = self.desired.eval(t);
            let (tau, s, _) = self.control(t, &q, &qd, &a_hat);
            derived[0].push(q[0] - q_d[0]);
            derived[1].push(q[1] - q_d[1]);
            derived[2].push(s[0]);
            derived[3].push(s[1]);
            derived[4].push(tau[0]);
            derived[5].push(tau[1]);
            derived[6].push(self.lyapunov_v(&q, &s, &a_hat));
        }
        let derived_names = ["q_tilde_1", "q_tilde_2", "s_1", "s_2", "tau_1", "tau_2", "V"];
        for (name, ch) in derived_names.iter().zip(derived) {
            channels.push((name.to_string(), ch));
        }
        let mut meta = traj.meta.clone();
        meta.scenario = format!(
            "robot lambda={} k_d={} gamma={}",
            self.controller.lambda, self.controller.k_d, self.controller.gamma
        );
        Trajectory::new(times, channels, meta)
    }
}

/// Largest discrete dissipation residual `|dV/dt + s^T k_d s|` over the
/// interior samples of a run, with dV/dt by central difference.
pub fn dissipation_residual(traj: &Trajectory, scen: &RobotScenario) -> Result<f64> {
    let times = traj.times();
    if times.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: times.len(),
        });
    }
    let v = traj.channel("V")?;
    let s1 = traj.channel("s_1")?;
    let s2 = traj.channel("s_2")?;
    let mut worst = 0.0_f64;
    for i in 1..times.len() - 1 {
        let dv = (v[i + 1] - v[i - 1]) / (times[i + 1] - times[i - 1]);
        let dissipation = scen.controller.k_d * (s1[i] * s1[i] + s2[i] * s2[i]);
        worst = worst.max((dv + dissipation).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn inertia_is_symmetric_positive_definite() {
        let model = RobotModel::default();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let q = Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let h = model.inertia(&q);
            assert_eq!(h[(0, 1)], h[(1, 0)]);
            assert!(h.cholesky().is_some(), "H not SPD at q = {q:?}");
        }
    }

    #[test]
    fn skew_symmetry_against_finite_difference_hdot() {
        // oracle: H' by central finite difference of H(q(t)) along a
        // direction q', compared against the analytic Christoffel C
        let model = RobotModel::default();
        let mut rng = StdRng::seed_from_u64(2);
        let h_fd = 1e-6;
        for _ in 0..100 {
            let q = Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let qd = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let hdot = (model.inertia(&(q + h_fd * qd)) - model.inertia(&(q - h_fd * qd)))
                / (2.0 * h_fd);
            let m = hdot - 2.0 * model.coriolis(&q, &qd);
            // x^T (H' - 2C) x = 0 for all x <=> symmetric part vanishes
            let sym = 0.5 * (m + m.transpose());
            assert!(sym.amax() < 1e-8, "skew defect {} at q = {q:?}", sym.amax());
        }
    }

    #[test]
    fn regressor_reproduces_dynamics() {
        let model = RobotModel::default();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let rv = |rng: &mut StdRng| {
                Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            };
            let q = rv(&mut rng);
            let qd = rv(&mut rng);
            let qr_d = rv(&mut rng);
            let qr_dd = rv(&mut rng);
            let lhs = model.regressor(&q, &qd, &qr_d, &qr_dd) * model.params();
            let rhs =
                model.inertia(&q) * qr_dd + model.coriolis(&q, &qd) * qr_d + model.gravity(&q);
            assert!((lhs - rhs).amax() < 1e-9, "residual {}", (lhs - rhs).amax());
        }
    }

    #[test]
    fn gravity_hand_values() {
        let model = RobotModel::default();
        // arm stretched horizontally: g = (2g*1*1 + g*1*1, g*1*1)
        let g = model.gravity(&Vector2::new(0.0, 0.0));
        assert_relative_eq!(g[0], 3.0 * GRAVITY, epsilon = 1e-12);
        assert_relative_eq!(g[1], GRAVITY, epsilon = 1e-12);
        // arm pointing straight up: no gravity torque
        let g = model.gravity(&Vector2::new(std::f64::consts::FRAC_PI_2, 0.0));
        assert!(g.amax() < 1e-12);
    }

    #[test]
    fn perfect_initialization_keeps_s_zero() {
        let mut scen = RobotScenario::default();
        let (q_d, qd_d, _) = scen.desired.eval(0.0);
        scen.q0 = [q_d[0], q_d[1]];
        scen.qd0 = [qd_d[0], qd_d[1]];
        let p = scen.model.params();
        scen.a_hat0 = [p[0], p[1], p[2]];
        let cfg = IntegratorConfig::rk4(1e-3, 5.0, 0.01);
        let traj = scen.simulate(&cfg).unwrap();
        for name in ["s_1", "s_2", "q_tilde_1", "q_tilde_2"] {
            for &v in traj.channel(name).unwrap() {
                assert!(v.abs() < 1e-8, "{name} left zero: {v}");
            }
        }
    }

    #[test]
    fn tracking_error_converges() {
        let scen = RobotScenario::default();
        let cfg = IntegratorConfig::rk4(1e-3, 20.0, 0.01);
        let traj = scen.simulate(&cfg).unwrap();
        let qt1 = traj.channel("q_tilde_1").unwrap().last().copied().unwrap();
        let qt2 = traj.channel("q_tilde_2").unwrap().last().copied().unwrap();
        let err = (qt1 * qt1 + qt2 * qt2).sqrt();
        assert!(err < 1e-2, "||q_tilde(20)|| = {err}");
        // V never increases (V' = -s^T k_d s <= 0)
        let v = traj.channel("V").unwrap();
        for w in v.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "V increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn dissipation_identity_holds_numerically() {
        let scen = RobotScenario::default();
        // fine record grid: the central difference carries an O(dt^2 V''')
        // error and V''' reaches ~1e6 in the initial transient
        let cfg = IntegratorConfig::rk4(1e-5, 2.0, 1e-5);
        let traj = scen.simulate(&cfg).unwrap();
        let worst = dissipation_residual(&traj, &scen).unwrap();
        assert!(worst < 1e-4, "max |dV/dt + s^T k_d s| = {worst}");
    }

    #[test]
    fn euler_oracle_matches_short_run() {
        let scen = RobotScenario::default();
        let cfg = IntegratorConfig::rk4(1e-4, 2.0, 0.01);
        let traj = scen.simulate(&cfg).unwrap();
        let rhs = scen.rhs();
        let mut y = scen.initial_state().to_vec();
        let mut dy = vec![0.0; 7];
        let dt = 1e-6;
        for i in 0..2_000_000 {
            rhs(i as f64 * dt, &y, &mut dy);
            for j in 0..7 {
                y[j] += dt * dy[j];
            }
        }
        for (j, name) in ["q_1", "q_2"].iter().enumerate() {
            let end = traj.channel(name).unwrap().last().copied().unwrap();
            assert!((end - y[j]).abs() < 1e-3, "{name}: {end} vs oracle {}", y[j]);
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut scen = RobotScenario::default();
        scen.model.m2 = 0.0;
        assert!(scen.validate().is_err());
        let mut scen = RobotScenario::default();
        scen.controller.lambda = -1.0;
        assert!(scen.validate().is_err());
    }
}
