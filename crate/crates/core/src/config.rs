//! Run configuration shared by the library and the command-line front end.

use serde::{Deserialize, Serialize};

use crate::config_space::Potential;
use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}
fn default_box_length() -> f64 {
    2.0 * std::f64::consts::PI
}
fn default_order() -> u8 {
    2
}
fn default_amplitude() -> f64 {
    1e-2
}
fn default_eta() -> f64 {
    0.1
}
fn default_s_max() -> usize {
    2
}
fn default_cadence() -> usize {
    10
}
fn default_out_dir() -> String {
    "out".into()
}
fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Equilibrium,
    KernelBump,
    Shear,
    TaylorGreen,
    RandomSmooth,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Equilibrium => "equilibrium",
            Scenario::KernelBump => "kernel-bump",
            Scenario::Shear => "shear",
            Scenario::TaylorGreen => "taylor-green",
            Scenario::RandomSmooth => "random-smooth",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialChoice {
    #[default]
    Hookean,
    Fene,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default)]
    pub kind: PotentialChoice,
    /// Dimer stiffness for hookean springs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_b: Option<f64>,
    /// Dimer FENE strength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// FENE maximal extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { kind: PotentialChoice::Hookean, h_b: Some(1.0), k: None, b0: None }
    }
}

impl PotentialConfig {
    pub fn dimer(&self, dim: usize) -> Result<Potential> {
        match self.kind {
            PotentialChoice::Hookean => Potential::hookean(self.h_b.unwrap_or(1.0), dim),
            PotentialChoice::Fene => {
                let k = self.k.ok_or_else(|| Error::InvalidParameter("potential.k is required for FENE".into()))?;
                let b0 = self.b0.ok_or_else(|| Error::InvalidParameter("potential.b0 is required for FENE".into()))?;
                Potential::fene(k, b0, dim)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    #[default]
    Upwind,
    Spectral,
}

/// Full description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub d_x: usize,
    pub d_q: usize,
    pub n_x: usize,
    pub n_q: usize,
    #[serde(default = "default_box_length")]
    pub box_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_radius: Option<f64>,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub k1: f64,
    #[serde(default = "one")]
    pub k2: f64,
    /// Fixed step; chosen adaptively when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_order")]
    pub scheme_order: u8,
    pub scenario: Scenario,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_s_max")]
    pub sobolev_s_max: usize,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub seed: u64,
    /// Split reaction updates that would lose positivity instead of rejecting the step.
    #[serde(default = "yes")]
    pub reaction_limiter: bool,
    /// Clamp densities at 1e-300 instead of aborting on loss of positivity.
    #[serde(default)]
    pub log_floor: bool,
    #[serde(default)]
    pub transport: TransportKind,
    /// Write a final-state snapshot.
    #[serde(default)]
    pub snapshot: bool,
}

impl SimConfig {
    /// Defaults for everything but the lattice and the scenario.
    pub fn new(d_x: usize, d_q: usize, n_x: usize, n_q: usize, scenario: Scenario) -> Self {
        Self {
            d_x,
            d_q,
            n_x,
            n_q,
            box_length: default_box_length(),
            q_radius: None,
            potential: PotentialConfig::default(),
            mu: 1.0,
            lambda: 1.0,
            k1: 1.0,
            k2: 1.0,
            dt: None,
            t_end: 1.0,
            scheme_order: 2,
            scenario,
            amplitude: default_amplitude(),
            eta: default_eta(),
            sobolev_s_max: default_s_max(),
            cadence: default_cadence(),
            out_dir: default_out_dir(),
            seed: 0,
            reaction_limiter: true,
            log_floor: false,
            transport: TransportKind::Upwind,
            snapshot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.scheme_order != 1 && self.scheme_order != 2 {
            return bad(format!("scheme_order must be 1 or 2, got {}", self.scheme_order));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if self.sobolev_s_max > 2 {
            return bad(format!("sobolev_s_max is capped at 2, got {}", self.sobolev_s_max));
        }
        if self.cadence == 0 {
            return bad("cadence must be at least 1".into());
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return bad(format!("amplitude must be nonnegative, got {}", self.amplitude));
        }
        if self.transport == TransportKind::Spectral && !self.log_floor {
            return bad("spectral transport does not preserve positivity; enable log_floor to use it".into());
        }
        if self.d_x > 1 && self.d_q < self.d_x {
            return Err(Error::UnsupportedRegime(format!(
                "d_q = {} < d_x = {}: the stretching term needs the configuration space to contain the flow gradient",
                self.d_q, self.d_x
            )));
        }
        if matches!(self.scenario, Scenario::Shear | Scenario::TaylorGreen) && self.d_x != 2 {
            return Err(Error::UnsupportedRegime(format!("scenario {} needs d_x = 2", self.scenario.name())));
        }
        Ok(())
    }
}
