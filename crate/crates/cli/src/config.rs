//! Run configuration read from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use semiclassical::actions::{ActionOptions, DEFAULT_S2_SIGN};
use semiclassical::exprjet::{parse_with, Expr};
use semiclassical::oracle::OracleConfig;
use semiclassical::orbit::OrbitOptions;
use semiclassical::quantize::QuantizeOptions;
use semiclassical::symbol::{EnergyWindow, HamiltonianSymbol};
use semiclassical::wronlab::WronOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub wronlab: Wronlab,
}

/// One value or a list of values of `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hbar {
    One(f64),
    Many(Vec<f64>),
}

impl Hbar {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Hbar::One(h) => vec![*h],
            Hbar::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    /// Potential `V(x)` as an expression or a built-in name (`harmonic`,
    /// `quartic`, `anharmonic`, `morse`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    /// Full principal symbol in `x` and `xi`, used instead of `potential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<String>,
    #[serde(default = "zero_expr")]
    pub p1: String,
    #[serde(default = "zero_expr")]
    pub p2: String,
    /// Named constants available inside every expression.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub hbar: Hbar,
    pub energy_min: f64,
    pub energy_max: f64,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub order: u8,
    pub quad_tol: f64,
    pub ode_tol: f64,
    pub root_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub s2_sign: f64,
    pub gram_steps: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            order: 2,
            quad_tol: 1e-10,
            ode_tol: 1e-10,
            root_tol: 1e-10,
            eta: None,
            s2_sign: DEFAULT_S2_SIGN,
            gram_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub halfwidth_factor: f64,
    pub shoot_tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            halfwidth_factor: 2.0,
            shoot_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cutoff {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Wronlab {
    pub grid_points_per_oscillation: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<Cutoff>,
    /// Energy of the grid experiments; the window midpoint when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

impl Default for Wronlab {
    fn default() -> Self {
        Wronlab {
            grid_points_per_oscillation: 1000,
            cutoff: None,
            energy: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        match (&p.potential, &p.p0) {
            (Some(_), Some(_)) => return Err(invalid("give either problem.potential or problem.p0, not both")),
            (None, None) => return Err(invalid("problem.potential or problem.p0 is required")),
            _ => {}
        }
        if !(p.energy_min.is_finite() && p.energy_max.is_finite() && p.energy_min < p.energy_max) {
            return Err(invalid(format!(
                "energy_min ({}) must be below energy_max ({})",
                p.energy_min, p.energy_max
            )));
        }
        let hs = p.hbar.values();
        if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(invalid("hbar values must be positive"));
        }
        let s = &self.solver;
        if s.order > 2 {
            return Err(invalid(format!("solver.order {} must be 0, 1 or 2", s.order)));
        }
        let tols = [
            ("solver.quad_tol", s.quad_tol),
            ("solver.ode_tol", s.ode_tol),
            ("solver.root_tol", s.root_tol),
            ("oracle.shoot_tol", self.oracle.shoot_tol),
        ];
        for (name, t) in tols {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if let Some(eta) = s.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(invalid("solver.eta must be positive"));
            }
        }
        if s.s2_sign.abs() != 1.0 {
            return Err(invalid("solver.s2_sign must be 1 or -1"));
        }
        if s.gram_steps < 2 {
            return Err(invalid("solver.gram_steps must be at least 2"));
        }
        if !(self.oracle.halfwidth_factor >= 1.5) {
            return Err(invalid("oracle.halfwidth_factor must be at least 1.5"));
        }
        if self.wronlab.grid_points_per_oscillation == 0 {
            return Err(invalid("wronlab.grid_points_per_oscillation must be positive"));
        }
        if let Some(c) = self.wronlab.cutoff {
            if !(c.r1 >= 0.0 && c.r2 > c.r1 && c.r2.is_finite()) {
                return Err(invalid("wronlab.cutoff needs 0 <= r1 < r2"));
            }
        }
        Ok(())
    }

    fn expr(&self, text: &str) -> Result<Expr, CliError> {
        Ok(parse_with(text, &self.problem.params)?)
    }

    pub fn symbol(&self) -> Result<HamiltonianSymbol, CliError> {
        let p = &self.problem;
        let base = match (&p.potential, &p.p0) {
            (Some(v), _) => match v.trim() {
                name @ ("harmonic" | "quartic" | "anharmonic" | "morse") => {
                    HamiltonianSymbol::builtin(name, &p.params)?
                }
                text => HamiltonianSymbol::custom(text, &p.params)?,
            },
            (None, Some(p0)) => HamiltonianSymbol::general(self.expr(p0)?),
            (None, None) => return Err(invalid("problem.potential or problem.p0 is required")),
        };
        Ok(base.with_p1(self.expr(&p.p1)?).with_p2(self.expr(&p.p2)?))
    }

    pub fn window(&self) -> Result<EnergyWindow, CliError> {
        Ok(EnergyWindow::new(self.problem.energy_min, self.problem.energy_max)?)
    }

    pub fn quantize_options(&self) -> QuantizeOptions {
        QuantizeOptions {
            eta: self.solver.eta,
            root_tol: self.solver.root_tol,
            actions: ActionOptions {
                s2_sign: self.solver.s2_sign,
                orbit: OrbitOptions {
                    rtol: self.solver.ode_tol,
                    quad_tol: self.solver.quad_tol,
                    ..OrbitOptions::default()
                },
            },
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            halfwidth_factor: self.oracle.halfwidth_factor,
            shoot_tol: self.oracle.shoot_tol,
            ..OracleConfig::default()
        }
    }

    pub fn wron_options(&self) -> WronOptions {
        WronOptions {
            order: self.solver.order.min(1),
            points_per_oscillation: self.wronlab.grid_points_per_oscillation,
            cutoff_radii: self.wronlab.cutoff.map(|c| (c.r1, c.r2)),
        }
    }
}
