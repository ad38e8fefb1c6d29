//! Declarative run configurations for the experiment front-end.
//!
//! A [`ScenarioConfig`] names one of the supported loop families and
//! carries the family parameters plus the integrator grid. Configs load
//! from TOML (canonical) or JSON (accepted equivalently), and the shipped
//! presets are exposed programmatically so the files on disk can be
//! regenerated bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backstepping::BacksteppingScenario;
use crate::cmrac::{CmracScenario, CmracVariant};
use crate::error::{Error, Result};
use crate::mimo::MimoScenario;
use crate::robot::RobotScenario;
use crate::scalar::ScalarScenario;
use crate::sim::IntegratorConfig;

/// Loop family selector; decides which parameter table is consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    OrmScalar,
    CrmScalar,
    Mimo,
    Cmrac,
    CmracCo,
    Backstepping,
    Robot,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::OrmScalar => "orm-scalar",
            Family::CrmScalar => "crm-scalar",
            Family::Mimo => "mimo",
            Family::Cmrac => "cmrac",
            Family::CmracCo => "cmrac-co",
            Family::Backstepping => "backstepping",
            Family::Robot => "robot",
        }
    }
}

/// Backstepping scenarios are built from closures, so configs reference a
/// named preset with optional gain/initial-condition overrides instead of
/// serializing the system itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacksteppingConfig {
    /// "n2-demo" or "n3-demo".
    pub preset: String,
    /// Override for the design gains c_i (length must match the order).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    /// Override for the plant initial condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl BacksteppingConfig {
    pub fn build(&self) -> Result<BacksteppingScenario> {
        let mut scen = match self.preset.as_str() {
            "n2-demo" => BacksteppingScenario::n2_demo(),
            "n3-demo" => BacksteppingScenario::n3_demo(),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "backstepping.preset: unknown preset `{other}` (expected n2-demo or n3-demo)"
                )))
            }
        };
        if let Some(c) = &self.c {
            if c.len() != scen.system.n {
                return Err(Error::InvalidConfig(format!(
                    "backstepping.c: expected {} gains, got {}",
                    scen.system.n,
                    c.len()
                )));
            }
            scen.design.c = c.clone();
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != scen.system.n {
                return Err(Error::InvalidConfig(format!(
                    "backstepping.x0: expected {} states, got {}",
                    scen.system.n,
                    x0.len()
                )));
            }
            scen.x0 = x0.clone();
        }
        scen.validate()?;
        Ok(scen)
    }
}

/// One runnable experiment: a family, its parameters, and the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Artifact base name (`<name>.csv`, `<name>.certificates.json`, ...).
    pub name: String,
    pub family: Family,
    pub integrator: IntegratorConfig,
    /// Start of the tail window used by truncated certificates
    /// (t1/t2/t3 depending on the family). Defaults to 0.3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<ScalarScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mimo: Option<MimoScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmrac: Option<CmracScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backstepping: Option<BacksteppingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<RobotScenario>,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Loads a config file; `.json` parses as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tail_start(&self) -> f64 {
        self.tail_start.unwrap_or(0.3)
    }

    fn expect_table<T>(&self, table: &Option<T>, key: &str) -> Result<()> {
        if table.is_none() {
            return Err(Error::InvalidConfig(format!(
                "family `{}` requires a [{key}] table",
                self.family.as_str()
            )));
        }
        Ok(())
    }

    fn reject_table<T>(&self, table: &Option<T>, key: &str) -> Result<()> {
        if table.is_some() {
            return Err(Error::InvalidConfig(format!(
                "[{key}] table is not used by family `{}`",
                self.family.as_str()
            )));
        }
        Ok(())
    }

    /// Validates the config shape and the family-specific preconditions.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::InvalidConfig(format!(
                "name `{}` must be non-empty and use only [A-Za-z0-9_-]",
                self.name
            )));
        }
        self.integrator.validate()?;
        if let Some(t) = self.tail_start {
            if !(t >= 0.0 && t < self.integrator.horizon) {
                return Err(Error::InvalidConfig(format!(
                    "tail_start = {t} must lie in [0, horizon)"
                )));
            }
        }
        let scalar_needed = matches!(self.family, Family::OrmScalar | Family::CrmScalar);
        let cmrac_needed = matches!(self.family, Family::Cmrac | Family::CmracCo);
        if scalar_needed {
            self.expect_table(&self.scalar, "scalar")?;
        } else {
            self.reject_table(&self.scalar, "scalar")?;
        }
        if cmrac_needed {
            self.expect_table(&self.cmrac, "cmrac")?;
        } else {
            self.reject_table(&self.cmrac, "cmrac")?;
        }
        match self.family {
            Family::Mimo => self.expect_table(&self.mimo, "mimo")?,
            _ => self.reject_table(&self.mimo, "mimo")?,
        }
        match self.family {
            Family::Backstepping => self.expect_table(&self.backstepping, "backstepping")?,
            _ => self.reject_table(&self.backstepping, "backstepping")?,
        }
        match self.family {
            Family::Robot => self.expect_table(&self.robot, "robot")?,
            _ => self.reject_table(&self.robot, "robot")?,
        }

        match self.family {
            Family::OrmScalar => {
                let s = self.scalar.as_ref().unwrap();
                s.validate()?;
                if s.reference.ell != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "scalar.reference.ell = {} but family orm-scalar requires ell = 0",
                        s.reference.ell
                    )));
                }
            }
            Family::CrmScalar => {
                let s = self.scalar.as_ref().unwrap();
                s.validate()?;
                if !(s.reference.ell < 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "scalar.reference.ell = {} but family crm-scalar requires ell < 0",
                        s.reference.ell
                    )));
                }
            }
            Family::Mimo => self.mimo.as_ref().unwrap().validate()?,
            Family::Cmrac | Family::CmracCo => {
                let c = self.cmrac.as_ref().unwrap();
                c.validate()?;
                let want = if self.family == Family::Cmrac {
                    CmracVariant::Cmrac
                } else {
                    CmracVariant::CmracCo
                };
                if c.variant != want {
                    return Err(Error::InvalidConfig(format!(
                        "cmrac.variant does not match family `{}`",
                        self.family.as_str()
                    )));
                }
            }
            Family::Backstepping => {
                self.backstepping.as_ref().unwrap().build().map(|_| ())?;
            }
            Family::Robot => self.robot.as_ref().unwrap().validate()?,
        }
        Ok(())
    }
}

/// Names of the shipped presets, in catalog order.
pub fn preset_names() -> &'static [&'static str] {
    &[
        "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "mimo-demo",
        "backstep-n2", "robot-2link",
    ]
}

/// Builds a shipped preset by name.
///
/// fig1-fig3: open-loop reference model study, gamma in {1, 10, 100}.
/// fig4-fig6: closed-loop reference model study, ell = -100, same gammas.
/// fig7/fig8: composite study with measurement noise (seed 42), classical
/// vs observer-feedback variant. Plus one demo per remaining family.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let scalar_grid = IntegratorConfig::rk4(1e-4, 15.0, 0.001);
    let cfg = match name {
        "fig1" => scalar_preset("fig1", Family::OrmScalar, 1.0, 0.0, &scalar_grid),
        "fig2" => scalar_preset("fig2", Family::OrmScalar, 10.0, 0.0, &scalar_grid),
        "fig3" => scalar_preset("fig3", Family::OrmScalar, 100.0, 0.0, &scalar_grid),
        "fig4" => scalar_preset("fig4", Family::CrmScalar, 1.0, -100.0, &scalar_grid),
        "fig5" => scalar_preset("fig5", Family::CrmScalar, 100.0, -100.0, &scalar_grid),
        "fig6" => scalar_preset("fig6", Family::CrmScalar, 10.0, -100.0, &scalar_grid),
        "fig7" => cmrac_preset("fig7", CmracVariant::Cmrac),
        "fig8" => cmrac_preset("fig8", CmracVariant::CmracCo),
        "mimo-demo" => ScenarioConfig {
            name: "mimo-demo".into(),
            family: Family::Mimo,
            integrator: IntegratorConfig::rk4(1e-3, 15.0, 0.001),
            tail_start: Some(0.3),
            scalar: None,
            mimo: Some(MimoScenario::two_state_demo(100.0)),
            cmrac: None,
            backstepping: None,
            robot: None,
        },
        "backstep-n2" => ScenarioConfig {
            name: "backstep-n2".into(),
            family: Family::Backstepping,
            integrator: IntegratorConfig::rk4(1e-3, 20.0, 0.01),
            tail_start: None,
            scalar: None,
            mimo: None,
            cmrac: None,
            backstepping: Some(BacksteppingConfig {
                preset: "n2-demo".into(),
                c: None,
                x0: None,
            }),
            robot: None,
        },
        "robot-2link" => ScenarioConfig {
            name: "robot-2link".into(),
            family: Family::Robot,
            integrator: IntegratorConfig::rk4(1e-3, 20.0, 0.01),
            tail_start: None,
            scalar: None,
            mimo: None,
            cmrac: None,
            backstepping: None,
            robot: Some(RobotScenario::default()),
        },
        _ => return None,
    };
    Some(cfg)
}

fn scalar_preset(
    name: &str,
    family: Family,
    gamma: f64,
    ell: f64,
    grid: &IntegratorConfig,
) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        family,
        integrator: *grid,
        tail_start: None,
        scalar: Some(ScalarScenario::paper_study(gamma, ell)),
        mimo: None,
        cmrac: None,
        backstepping: None,
        robot: None,
    }
}

fn cmrac_preset(name: &str, variant: CmracVariant) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        family: if variant == CmracVariant::Cmrac {
            Family::Cmrac
        } else {
            Family::CmracCo
        },
        integrator: IntegratorConfig::rk4(1e-3, 15.0, 0.01),
        tail_start: Some(0.3),
        scalar: None,
        mimo: None,
        cmrac: Some(CmracScenario::table_study(variant).with_noise(42)),
        backstepping: None,
        robot: None,
    }
}
