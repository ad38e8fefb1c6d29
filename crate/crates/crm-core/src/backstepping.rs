//! Tuning-function adaptive backstepping for strict-feedback systems of
//! order one to three.
//!
//! The recursion produces the transformed error z, stabilizing functions
//! alpha_i, regression vectors w_i, and tuning functions tau_i; the
//! closed loop reduces to `z' = A_z z - W^T theta_tilde` with the
//! tridiagonal-plus-skew matrix A_z whose diagonal carries the design
//! gains -c_i. Those gains close the loop between the reference
//! trajectory and the plant state, which is what yields the L2 bound
//! `int ||z||^2 <= V(0) / c_0`, the analogue of the scalar CRM bound.
//!
//! Stabilizing-function partials are hand-derived in closed form at order
//! one; order-two partials (needed by the order-three recursion) use
//! central finite differences with step 1e-6.

use crate::bounds::BoundCertificate;
use crate::error::{Error, Result};
use crate::sim::{integrate_labeled, truncated_l2, IntegratorConfig, Trajectory};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Regressor closure: maps (x_1..x_i) to a parameter-dimension vector.
pub type RegressorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
/// Scalar field closure over the full state.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Strict-feedback plant
/// `x_i' = x_{i+1} + phi_i(x_1..x_i)^T theta*`, `x_n' = beta(x) u + phi_n(x)^T theta*`.
#[derive(Clone)]
pub struct StrictFeedbackSystem {
    pub n: usize,
    /// Parameter dimension.
    pub p: usize,
    /// phi_i, one per state; phi_i sees only (x_1..x_i).
    pub phi: Vec<RegressorFn>,
    /// d phi_1 / d x_1, used by the closed-form alpha_1 partials.
    pub dphi1: RegressorFn,
    pub beta: ScalarFn,
    pub theta_star: DVector<f64>,
}

impl std::fmt::Debug for StrictFeedbackSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StrictFeedbackSystem")
            .field("n", &self.n)
            .field("p", &self.p)
            .field("theta_star", &self.theta_star)
            .finish()
    }
}

impl StrictFeedbackSystem {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::UnsupportedOrder(self.n));
        }
        if self.phi.len() != self.n {
            return Err(Error::InvalidConfig(format!(
                "need {} regressors, got {}",
                self.n,
                self.phi.len()
            )));
        }
        if self.theta_star.len() != self.p {
            return Err(Error::InvalidConfig(
                "theta_star dimension mismatch".into(),
            ));
        }
        Ok(())
    }
}

/// Reference signal with derivatives available up to the plant order.
#[derive(Clone)]
pub struct ReferenceTrajectory {
    f: Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ReferenceTrajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ReferenceTrajectory")
    }
}

impl ReferenceTrajectory {
    /// y_r(t) = amplitude sin(omega t) with all derivatives analytic.
    pub fn sine(amplitude: f64, omega: f64) -> Self {
        Self {
            f: Arc::new(move |t, k| {
                let scale = amplitude * omega.powi(k as i32);
                match k % 4 {
                    0 => scale * (omega * t).sin(),
                    1 => scale * (omega * t).cos(),
                    2 => -scale * (omega * t).sin(),
                    _ => -scale * (omega * t).cos(),
                }
            }),
        }
    }

    /// Constant reference; all derivatives vanish.
    pub fn constant(value: f64) -> Self {
        Self {
            f: Arc::new(move |_, k| if k == 0 { value } else { 0.0 }),
        }
    }

    /// k-th derivative at time t (k = 0 is the value itself).
    pub fn eval(&self, t: f64, k: usize) -> f64 {
        (self.f)(t, k)
    }

    /// Values of y_r, y_r', ..., y_r^(upto) at time t.
    pub fn derivatives(&self, t: f64, upto: usize) -> Vec<f64> {
        (0..=upto).map(|k| self.eval(t, k)).collect()
    }
}

/// Design gains of the tuning-function recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct BacksteppingDesign {
    /// One positive gain per recursion step.
    pub c: Vec<f64>,
    /// Symmetric positive definite adaptation gain.
    pub gamma: DMatrix<f64>,
}

impl BacksteppingDesign {
    pub fn identity_gamma(c: Vec<f64>, p: usize) -> Self {
        Self {
            c,
            gamma: DMatrix::identity(p, p),
        }
    }

    /// min c_i, the rate in the z-L2 bound.
    pub fn c0(&self) -> f64 {
        self.c.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.c.len() != n {
            return Err(Error::InvalidConfig(format!(
                "need {n} gains, got {}",
                self.c.len()
            )));
        }
        if self.c.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidConfig("all c_i must be > 0".into()));
        }
        if self.gamma.nrows() != p || self.gamma.ncols() != p {
            return Err(Error::InvalidConfig("gamma dimension mismatch".into()));
        }
        if (&self.gamma - self.gamma.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidConfig("gamma must be symmetric".into()));
        }
        if self.gamma.clone().cholesky().is_none() {
            return Err(Error::InvalidConfig(
                "gamma must be positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluation of the recursion at a state/parameter/time triple.
#[derive(Debug, Clone)]
pub struct DesignEval {
    pub z: DVector<f64>,
    /// alpha_1 .. alpha_n.
    pub alpha: Vec<f64>,
    /// Regression vectors w_1 .. w_n.
    pub w: Vec<DVector<f64>>,
    /// Tuning functions tau_1 .. tau_n; tau_n drives the update law.
    pub tau: Vec<DVector<f64>>,
    pub u: f64,
    pub a_z: DMatrix<f64>,
    /// n x p matrix with rows w_i^T; the closed loop is
    /// `z' = A_z z - W theta_tilde` and the update law `theta' = Gamma W^T z`.
    pub w_mat: DMatrix<f64>,
}

const FD_STEP: f64 = 1e-6;

/// alpha_1 = -c_1 (x_1 - y_r) - phi_1(x_1)^T theta.
fn alpha1(
    sys: &StrictFeedbackSystem,
    des: &BacksteppingDesign,
    x1: f64,
    yr0: f64,
    theta: &DVector<f64>,
) -> f64 {
    -des.c[0] * (x1 - yr0) - (sys.phi[0])(&[x1]).dot(theta)
}

/// Closed-form partials of alpha_1: (d/dx_1, d/dy_r, d/dtheta).
fn alpha1_partials(
    sys: &StrictFeedbackSystem,
    des: &BacksteppingDesign,
    x1: f64,
    theta: &DVector<f64>,
) -> (f64, f64, DVector<f64>) {
    let dx1 = -des.c[0] - (sys.dphi1)(&[x1]).dot(theta);
    (dx1, des.c[0], -(sys.phi[0])(&[x1]))
}

/// alpha_2 from the recursion, using the closed-form alpha_1 partials.
fn alpha2(
    sys: &StrictFeedbackSystem,
    des: &BacksteppingDesign,
    x: &[f64],
    yr: &[f64],
    theta: &DVector<f64>,
) -> f64 {
    let z1 = x[0] - yr[0];
    let a1 = alpha1(sys, des, x[0], yr[0], theta);
    let z2 = x[1] - yr[1] - a1;
    let (d1x, d1y, d1th) = alpha1_partials(sys, des, x[0], theta);
    let w1 = (sys.phi[0])(&x[..1]);
    let w2 = (sys.phi[1])(&x[..2]) - d1x * &w1;
    let tau2 = &w1 * z1 + &w2 * z2;
    -z1 - des.c[1] * z2 - w2.dot(theta)
        + d1x * x[1]
        + d1y * yr[1]
        + d1th.dot(&(&des.gamma * tau2))
}

/// Central-finite-difference partials of alpha_2 with respect to
/// (x_1, x_2, y_r, y_r', theta).
#[allow(clippy::type_complexity)]
fn alpha2_partials(
    sys: &StrictFeedbackSystem,
    des: &BacksteppingDesign,
    x: &[f64],
    yr: &[f64],
    theta: &DVector<f64>,
) -> ([f64; 2], [f64; 2], DVector<f64>) {
    let mut dx = [0.0; 2];
    for k in 0..2 {
        let mut xp = [x[0], x[1]];
        let mut xm = xp;
        xp[k] += FD_STEP;
        xm[k] -= FD_STEP;
        dx[k] = (alpha2(sys, des, &xp, yr, theta) - alpha2(sys, des, &xm, yr, theta))
            / (2.0 * FD_STEP);
    }
    let mut dy = [0.0; 2];
    for k in 0..2 {
        let mut yp = [yr[0], yr[1]];
        let mut ym = yp;
        yp[k] += FD_STEP;
        ym[k] -= FD_STEP;
        dy[k] = (alpha2(sys, des, x, &yp, theta) - alpha2(sys, des, x, &ym, theta))
            / (2.0 * FD_STEP);
    }
    let mut dth = DVector::zeros(theta.len());
    for j in 0..theta.len() {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[j] += FD_STEP;
        tm[j] -= FD_STEP;
        dth[j] = (alpha2(sys, des, x, yr, &tp) - alpha2(sys, des, x, yr, &tm))
            / (2.0 * FD_STEP);
    }
    (dx, dy, dth)
}

/// Evaluates the full tuning-function recursion at one point.
///
/// `yr` must hold y_r, y_r', ..., y_r^(n) (n + 1 values).
pub fn backstepping_design(
    sys: &StrictFeedbackSystem,
    des: &BacksteppingDesign,
    x: &[f64],
    theta: &DVector<f64>,
    yr: &[f64],
) -> Result<DesignEval> {
    sys.validate()?;
    des.validate(sys.n, sys.p)?;
    if x.len() != sys.n || yr.len() != sys.n + 1 || theta.len() != sys.p {
        return Err(Error::InvalidConfig(
            "state, reference, or parameter dimension mismatch".into(),
        ));
    }
    let n = sys.n;
    let mut z = DVector::zeros(n);
    let mut alpha = Vec::with_capacity(n);
    let mut w: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut tau: Vec<DVector<f64>> = Vec::with_capacity(n);

    // base case
    z[0] = x[0] - yr[0];
    w.push((sys.phi[0])(&x[..1]));
    tau.push(&w[0] * z[0]);
    alpha.push(alpha1(sys, des, x[0], yr[0], theta));
    let mut sigma23 = 0.0;

    if n >= 2 {
        let (d1x, d1y, d1th) = alpha1_partials(sys, des, x[0], theta);
        z[1] = x[1] - yr[1] - alpha[0];
        let w2 = (sys.phi[1])(&x[..2]) - d1x * &w[0];
        let tau2 = &tau[0] + &w2 * z[1];
        let a2 = -z[0] - des.c[1] * z[1] - w2.dot(theta)
            + d1x * x[1]
            + d1y * yr[1]
            + d1th.dot(&(&des.gamma * &tau2));
        w.push(w2);
        tau.push(tau2);
        alpha.push(a2);

        if n == 3 {
            let (d2x, d2y, d2th) = alpha2_partials(sys, des, &x[..2], &yr[..2], theta);
            z[2] = x[2] - yr[2] - alpha[1];
            let w3 =
                (sys.phi[2])(&x[..3]) - d2x[0] * &w[0] - d2x[1] * (sys.phi[1])(&x[..2]);
            let tau3 = &tau[1] + &w3 * z[2];
            sigma23 = -d1th.dot(&(&des.gamma * &w3));
            let a3 = -z[1] - des.c[2] * z[2] - w3.dot(theta)
                + d2x[0] * x[1]
                + d2x[1] * x[2]
                + d2y[0] * yr[1]
                + d2y[1] * yr[2]
                + d2th.dot(&(&des.gamma * &tau3))
                - sigma23 * z[1];
            w.push(w3);
            tau.push(tau3);
            alpha.push(a3);
        }
    }

    let beta = (sys.beta)(x);
    if beta.abs() < 1e-12 {
        return Err(Error::SingularBeta);
    }
    let u = (alpha[n - 1] + yr[n]) / beta;

    let mut a_z = DMatrix::zeros(n, n);
    for i in 0..n {
        a_z[(i, i)] = -des.c[i];
        if i + 1 < n {
            a_z[(i, i + 1)] = 1.0;
            a_z[(i + 1, i)] = -1.0;
        }
    }
    if n == 3 {
        a_z[(1, 2)] += sigma23;
        a_z[(2, 1)] -= sigma23;
    }
    let mut w_mat = DMatrix::zeros(n, sys.p);
    for (i, wi) in w.iter().enumerate() {
        w_mat.set_row(i, &wi.transpose());
    }
    Ok(DesignEval {
        z,
        alpha,
        w,
        tau,
        u,
        a_z,
        w_mat,
    })
}

/// One closed-loop backstepping experiment.
#[derive(Debug, Clone)]
pub struct BacksteppingScenario {
    pub system: StrictFeedbackSystem,
    pub design: BacksteppingDesign,
    pub y_r: ReferenceTrajectory,
    pub x0: Vec<f64>,
    pub theta0: DVector<f64>,
}

impl BacksteppingScenario {
    /// Second-order demo: phi_1 = x_1^2 with a scalar unknown parameter,
    /// phi_2 = 0, beta = 1, c_1 = c_2 = 2, Gamma = I, y_r = sin t.
    pub fn n2_demo() -> Self {
        let system = StrictFeedbackSystem {
            n: 2,
            p: 1,
            phi: vec![
                Arc::new(|x: &[f64]| DVector::from_vec(vec![x[0] * x[0]])),
                Arc::new(|_: &[f64]| DVector::from_vec(vec![0.0])),
            ],
            dphi1: Arc::new(|x: &[f64]| DVector::from_vec(vec![2.0 * x[0]])),
            beta: Arc::new(|_: &[f64]| 1.0),
            theta_star: DVector::from_vec(vec![1.0]),
        };
        Self {
            system,
            design: BacksteppingDesign::identity_gamma(vec![2.0, 2.0], 1),
            y_r: ReferenceTrajectory::sine(1.0, 1.0),
            x0: vec![0.5, 0.0],
            theta0: DVector::from_vec(vec![0.0]),
        }
    }

    /// Third-order demo exercising the sigma coupling: phi_1 = x_1^2,
    /// phi_2 = x_1 x_2, phi_3 = 0, scalar parameter.
    pub fn n3_demo() -> Self {
        let system = StrictFeedbackSystem {
            n: 3,
            p: 1,
            phi: vec![
                Arc::new(|x: &[f64]| DVector::from_vec(vec![x[0] * x[0]])),
                Arc::new(|x: &[f64]| DVector::from_vec(vec![x[0] * x[1]])),
                Arc::new(|_: &[f64]| DVector::from_vec(vec![0.0])),
            ],
            dphi1: Arc::new(|x: &[f64]| DVector::from_vec(vec![2.0 * x[0]])),
            beta: Arc::new(|_: &[f64]| 1.0),
            theta_star: DVector::from_vec(vec![1.0]),
        };
        Self {
            system,
            design: BacksteppingDesign::identity_gamma(vec![2.0, 2.0, 2.0], 1),
            y_r: ReferenceTrajectory::sine(1.0, 1.0),
            x0: vec![0.5, 0.0, 0.0],
            theta0: DVector::from_vec(vec![0.0]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.design.validate(self.system.n, self.system.p)?;
        if self.x0.len() != self.system.n || self.theta0.len() != self.system.p {
            return Err(Error::InvalidConfig(
                "initial condition dimension mismatch".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut s = self.x0.clone();
        s.extend(self.theta0.iter());
        s
    }

    /// The closed-loop vector field over (x, theta).
    pub fn rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        let n = self.system.n;
        let p = self.system.p;
        move |t: f64, state: &[f64], dstate: &mut [f64]| {
            let x = &state[..n];
            let theta = DVector::from_column_slice(&state[n..n + p]);
            let yr = self.y_r.derivatives(t, n);
            let eval = backstepping_design(&self.system, &self.design, x, &theta, &yr)
                .expect("design evaluation fails only on invalid configs");
            for i in 0..n {
                let drift = (self.system.phi[i])(&x[..=i]).dot(&self.system.theta_star);
                dstate[i] = if i + 1 < n {
                    x[i + 1] + drift
                } else {
                    (self.system.beta)(x) * eval.u + drift
                };
            }
            let dtheta = &self.design.gamma * &eval.tau[n - 1];
            for j in 0..p {
                dstate[n + j] = dtheta[j];
            }
        }
    }

    /// Lyapunov candidate `V = z^T z / 2 + theta_tilde^T Gamma^-1 theta_tilde / 2`.
    pub fn lyapunov_v(&self, z: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        let dt = theta - &self.system.theta_star;
        let ginv_dt = self
            .design
            .gamma
            .clone()
            .cholesky()
            .expect("validated SPD gamma")
            .solve(&dt);
        0.5 * z.dot(z) + 0.5 * dt.dot(&ginv_dt)
    }

    /// Integrates the loop and records x_i, z_i, theta_j, u, V, and the
    /// instantaneous A_z entries.
    pub fn simulate(&self, cfg: &IntegratorConfig) -> Result<Trajectory> {
        self.validate()?;
        let n = self.system.n;
        let p = self.system.p;
        let rate = self
            .design
            .c
            .iter()
            .copied()
            .fold(1.0_f64, f64::max)
            .max(self.design.gamma.norm());
        cfg.check_fixed_step_rate(rate)?;
        let mut names: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        names.extend((1..=p).map(|j| format!("theta_{j}")));
        let traj = integrate_labeled(self.rhs(), &self.initial_state(), cfg, &names)?;

        let times = traj.times().to_vec();
        let mut channels: Vec<(String, Vec<f64>)> = names
            .iter()
            .map(|name| Ok((name.clone(), traj.channel(name)?.to_vec())))
            .collect::<Result<_>>()?;
        let mut z_ch = vec![Vec::with_capacity(times.len()); n];
        let mut az_ch = vec![Vec::with_capacity(times.len()); n * n];
        let mut u_ch = Vec::with_capacity(times.len());
        let mut v_ch = Vec::with_capacity(times.len());
        for (idx, &t) in times.iter().enumerate() {
            let x: Vec<f64> = (0..n).map(|i| channels[i].1[idx]).collect();
            let theta =
                DVector::from_iterator(p, (0..p).map(|j| channels[n + j].1[idx]));
            let yr = self.y_r.derivatives(t, n);
            let eval = backstepping_design(&self.system, &self.design, &x, &theta, &yr)?;
            for i in 0..n {
                z_ch[i].push(eval.z[i]);
                for j in 0..n {
                    az_ch[i * n + j].push(eval.a_z[(i, j)]);
                }
            }
            u_ch.push(eval.u);
            v_ch.push(self.lyapunov_v(&eval.z, &theta));
        }
        for (i, zc) in z_ch.into_iter().enumerate() {
            channels.push((format!("z_{}", i + 1), zc));
        }
        channels.push(("u".into(), u_ch));
        channels.push(("V".into(), v_ch));
        for i in 0..n {
            for j in 0..n {
                channels.push((format!("a_z_{}_{}", i + 1, j + 1), az_ch[i * n + j].clone()));
            }
        }
        let mut meta = traj.meta.clone();
        meta.scenario = format!("backstepping n={n} c0={}", self.design.c0());
        Trajectory::new(times, channels, meta)
    }
}

/// The z-L2 certificate `int ||z||^2 <= V(0) / c_0`.
pub fn certify_backstepping_run(
    traj: &Trajectory,
    scen: &BacksteppingScenario,
) -> Result<BoundCertificate> {
    scen.validate()?;
    let times = traj.times();
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let record_dt = times[1] - times[0];
    let mut measured = 0.0;
    for i in 1..=scen.system.n {
        measured += truncated_l2(traj, &format!("z_{i}"), 0.0)?;
    }
    let v0 = traj.channel("V")?[0];
    Ok(BoundCertificate::evaluate(
        "z-l2",
        measured,
        v0 / scen.design.c0(),
        record_dt,
    ))
}
