//! Reference-input signals shared by all system families.

use serde::{Deserialize, Serialize};

/// Bounded, piecewise-continuous reference input r(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceInput {
    Zero,
    /// amplitude * 1(t >= start)
    Step { amplitude: f64, start: f64 },
    /// Unit step through a first-order lag: amplitude * (1 - exp(-(t-start)/tau)).
    FilteredStep { amplitude: f64, start: f64, tau: f64 },
    /// amplitude * sin(omega t)
    Sine { amplitude: f64, omega: f64 },
}

impl Default for ReferenceInput {
    fn default() -> Self {
        ReferenceInput::Step {
            amplitude: 1.0,
            start: 0.0,
        }
    }
}

impl ReferenceInput {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ReferenceInput::Zero => 0.0,
            ReferenceInput::Step { amplitude, start } => {
                if t >= start {
                    amplitude
                } else {
                    0.0
                }
            }
            ReferenceInput::FilteredStep {
                amplitude,
                start,
                tau,
            } => {
                if t >= start {
                    amplitude * (1.0 - (-(t - start) / tau).exp())
                } else {
                    0.0
                }
            }
            ReferenceInput::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }

    /// Supremum of |r| over [0, infinity), used by the analytic bounds.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            ReferenceInput::Zero => 0.0,
            ReferenceInput::Step { amplitude, .. }
            | ReferenceInput::FilteredStep { amplitude, .. }
            | ReferenceInput::Sine { amplitude, .. } => amplitude.abs(),
        }
    }
}
