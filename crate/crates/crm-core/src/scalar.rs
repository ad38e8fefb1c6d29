//! The scalar CRM/ORM adaptive system: first-order plant, closed- and
//! open-loop reference models, adaptive controller, and the projection-
//! based update law, assembled into a closed-loop vector field.

use crate::error::{Error, Result};
use crate::signal::ReferenceInput;
use crate::sim::{integrate_labeled, IntegratorConfig, Trajectory};
use serde::{Deserialize, Serialize};

/// First-order plant `x_p' = a_p x_p + k_p u` with unknown pole and
/// known-sign input gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPlant {
    pub a_p: f64,
    pub k_p: f64,
}

impl ScalarPlant {
    pub fn validate(&self) -> Result<()> {
        if self.k_p == 0.0 {
            return Err(Error::ZeroInputGain);
        }
        Ok(())
    }
}

/// Reference model `x_m' = a_m x_m + k_m r - ell (x_p - x_m)`.
/// `ell = 0` selects the open-loop reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub a_m: f64,
    pub k_m: f64,
    pub ell: f64,
}

impl ReferenceModel {
    pub fn validate(&self) -> Result<()> {
        if self.a_m >= 0.0 {
            return Err(Error::InvalidConfig("a_m must be < 0".into()));
        }
        if self.ell > 0.0 {
            return Err(Error::InvalidConfig(
                "ell must be <= 0 (0 selects the ORM)".into(),
            ));
        }
        Ok(())
    }
}

/// Closed ball of radius `theta_bound` with a smooth boundary layer of
/// relative width `smoothing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSet {
    pub theta_bound: f64,
    pub smoothing: f64,
}

impl ProjectionSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_bound > 0.0) {
            return Err(Error::InvalidConfig("theta_bound must be > 0".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return Err(Error::InvalidConfig("smoothing must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Worst-case parameter-error norm over the set (both the estimate and
    /// the true parameters lie in the ball).
    pub fn theta_max(&self) -> f64 {
        2.0 * self.theta_bound
    }
}

/// Adaptation gain, initial parameters, optional projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub gamma: f64,
    pub theta0: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionSet>,
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig("gamma must be > 0".into()));
        }
        if let Some(p) = &self.projection {
            p.validate()?;
            let norm = (self.theta0[0] * self.theta0[0] + self.theta0[1] * self.theta0[1]).sqrt();
            if norm > p.theta_bound + 1e-9 {
                return Err(Error::OutsideSet {
                    norm,
                    bound: p.theta_bound,
                });
            }
        }
        Ok(())
    }
}

/// Ideal gains satisfying the matching conditions
/// `a_p + k_p theta_star = a_m` and `k_p k_star = k_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedGains {
    pub theta_star: f64,
    pub k_star: f64,
}

impl MatchedGains {
    pub fn as_vec(&self) -> [f64; 2] {
        [self.theta_star, self.k_star]
    }
}

pub fn matched_gains(plant: &ScalarPlant, refm: &ReferenceModel) -> Result<MatchedGains> {
    plant.validate()?;
    Ok(MatchedGains {
        theta_star: (refm.a_m - plant.a_p) / plant.k_p,
        k_star: refm.k_m / plant.k_p,
    })
}

/// Smooth ball projection. Returns the update unchanged in the interior of
/// the set; inside the boundary layer an outward-pointing update has its
/// radial component scaled down continuously so the flow never exits the
/// ball. Dimension-generic: also used for the Frobenius-ball projection of
/// matrix gains.
pub fn project(update: &[f64], theta: &[f64], set: &ProjectionSet) -> Result<Vec<f64>> {
    assert_eq!(update.len(), theta.len());
    let norm2: f64 = theta.iter().map(|v| v * v).sum();
    let norm = norm2.sqrt();
    if norm > set.theta_bound + 1e-9 {
        return Err(Error::OutsideSet {
            norm,
            bound: set.theta_bound,
        });
    }
    let tb2 = set.theta_bound * set.theta_bound;
    let f = ((norm2 - tb2 * (1.0 - set.smoothing)) / (set.smoothing * tb2)).clamp(0.0, 1.0);
    let radial: f64 = update.iter().zip(theta).map(|(u, th)| u * th).sum();
    if f <= 0.0 || radial <= 0.0 || norm2 == 0.0 {
        return Ok(update.to_vec());
    }
    Ok(update
        .iter()
        .zip(theta)
        .map(|(u, th)| u - f * radial / norm2 * th)
        .collect())
}

/// One closed-loop experiment for the scalar family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarScenario {
    pub plant: ScalarPlant,
    pub reference: ReferenceModel,
    pub adaptation: AdaptationConfig,
    #[serde(default)]
    pub input: ReferenceInput,
    /// x_p(0)
    pub x_p0: f64,
    /// x_m(0) = x_m_o(0)
    pub x_m0: f64,
}

/// State layout used by the scalar loop.
const X_P: usize = 0;
const X_M: usize = 1;
const X_M_O: usize = 2;
const THETA: usize = 3;
const K: usize = 4;

impl ScalarScenario {
    /// The Section II.C study plant/reference (a_p = 1, k_p = 2,
    /// a_m = -1, k_m = 1), adaptive parameters initialized to zero,
    /// unit-step reference.
    pub fn paper_study(gamma: f64, ell: f64) -> Self {
        Self {
            plant: ScalarPlant { a_p: 1.0, k_p: 2.0 },
            reference: ReferenceModel {
                a_m: -1.0,
                k_m: 1.0,
                ell,
            },
            adaptation: AdaptationConfig {
                gamma,
                theta0: [0.0, 0.0],
                projection: None,
            },
            input: ReferenceInput::default(),
            x_p0: 1.0,
            x_m0: 0.0,
        }
    }

    pub fn with_projection(mut self, theta_bound: f64, smoothing: f64) -> Self {
        self.adaptation.projection = Some(ProjectionSet {
            theta_bound,
            smoothing,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.reference.validate()?;
        self.adaptation.validate()?;
        Ok(())
    }

    pub fn matched_gains(&self) -> Result<MatchedGains> {
        matched_gains(&self.plant, &self.reference)
    }

    pub fn initial_state(&self) -> [f64; 5] {
        [
            self.x_p0,
            self.x_m0,
            self.x_m0,
            self.adaptation.theta0[0],
            self.adaptation.theta0[1],
        ]
    }

    /// Parameter velocity of the update law at the given loop signals,
    /// projected if configured. Index 0 is theta-dot, index 1 is k-dot.
    pub fn update_velocity(&self, e: f64, x_p: f64, r: f64, theta_bar: &[f64; 2]) -> [f64; 2] {
        let sgn = self.plant.k_p.signum();
        let raw = [
            -self.adaptation.gamma * sgn * e * x_p,
            -self.adaptation.gamma * sgn * e * r,
        ];
        match &self.adaptation.projection {
            None => raw,
            Some(set) => {
                match project(&raw, theta_bar, set) {
                    Ok(v) => [v[0], v[1]],
                    // Discrete stages of the integrator can overshoot the
                    // boundary by a hair; treat such points as on the
                    // boundary and strip any outward radial component so
                    // the flow points back into the ball.
                    Err(_) => {
                        let norm2 = theta_bar[0] * theta_bar[0] + theta_bar[1] * theta_bar[1];
                        let radial = raw[0] * theta_bar[0] + raw[1] * theta_bar[1];
                        if radial <= 0.0 {
                            raw
                        } else {
                            [
                                raw[0] - radial / norm2 * theta_bar[0],
                                raw[1] - radial / norm2 * theta_bar[1],
                            ]
                        }
                    }
                }
            }
        }
    }

    /// The closed-loop vector field over (x_p, x_m, x_m_o, theta, k).
    pub fn rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        let p = self.plant;
        let m = self.reference;
        move |t: f64, x: &[f64], dx: &mut [f64]| {
            let r = self.input.eval(t);
            let u = x[THETA] * x[X_P] + x[K] * r;
            let e = x[X_P] - x[X_M];
            dx[X_P] = p.a_p * x[X_P] + p.k_p * u;
            dx[X_M] = m.a_m * x[X_M] + m.k_m * r - m.ell * e;
            dx[X_M_O] = m.a_m * x[X_M_O] + m.k_m * r;
            let upd = self.update_velocity(e, x[X_P], r, &[x[THETA], x[K]]);
            dx[THETA] = upd[0];
            dx[K] = upd[1];
        }
    }

    /// Integrates the loop and records the spec channel set
    /// (x_p, x_m, x_m_o, e, theta, k, u, V).
    pub fn simulate(&self, cfg: &IntegratorConfig) -> Result<Trajectory> {
        self.validate()?;
        cfg.check_fixed_step_rate(
            self.adaptation
                .gamma
                .max(self.reference.ell.abs())
                .max(1.0),
        )?;
        let names: Vec<String> = ["x_p", "x_m", "x_m_o", "theta", "k"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut traj = integrate_labeled(self.rhs(), &self.initial_state(), cfg, &names)?;
        let gains = self.matched_gains()?;
        let x_p = traj.channel("x_p")?.to_vec();
        let x_m = traj.channel("x_m")?.to_vec();
        let theta = traj.channel("theta")?.to_vec();
        let k = traj.channel("k")?.to_vec();
        let times = traj.times().to_vec();
        let e: Vec<f64> = x_p.iter().zip(&x_m).map(|(p, m)| p - m).collect();
        let u: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| theta[i] * x_p[i] + k[i] * self.input.eval(t))
            .collect();
        let v: Vec<f64> = e
            .iter()
            .enumerate()
            .map(|(i, &ei)| lyapunov_v(ei, &[theta[i], k[i]], &self.plant, &self.adaptation, &gains))
            .collect();
        traj.push_channel("e", e)?;
        traj.push_channel("u", u)?;
        traj.push_channel("V", v)?;
        // reorder to the external channel contract
        let order = ["x_p", "x_m", "x_m_o", "e", "theta", "k", "u", "V"];
        let channels = order
            .iter()
            .map(|n| Ok((n.to_string(), traj.channel(n)?.to_vec())))
            .collect::<Result<Vec<_>>>()?;
        let mut meta = traj.meta.clone();
        if meta.scenario.is_empty() {
            meta.scenario = format!(
                "scalar gamma={} ell={}",
                self.adaptation.gamma, self.reference.ell
            );
        }
        Trajectory::new(times, channels, meta)
    }
}

/// Lyapunov candidate `V = e^2/2 + (|k_p| / 2 gamma) ||theta_bar - theta_star||^2`.
pub fn lyapunov_v(
    e: f64,
    theta_bar: &[f64; 2],
    plant: &ScalarPlant,
    adaptation: &AdaptationConfig,
    gains: &MatchedGains,
) -> f64 {
    let dt0 = theta_bar[0] - gains.theta_star;
    let dt1 = theta_bar[1] - gains.k_star;
    0.5 * e * e + plant.k_p.abs() / (2.0 * adaptation.gamma) * (dt0 * dt0 + dt1 * dt1)
}
