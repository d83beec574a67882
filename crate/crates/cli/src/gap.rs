use serde::Serialize;

use micellar_core::config_space::{normalize_maxwellians, FokkerPlanckOperator, Potential, QGrid};

use crate::Failure;

/// Spring law for the gap computation.
#[derive(Clone, Copy, Debug)]
pub enum Spring {
    Hookean { stiffness: f64 },
    Fene { strength: f64, b0: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub lambda0: f64,
    /// Lowest eigenvalues of the negated operator, kernel included.
    pub eigs: Vec<f64>,
}

/// Spectral gap of the Fokker-Planck operator for a single spring law.
pub fn spectral_gap(spring: Spring, n_q: usize, d_q: usize, radius: Option<f64>) -> Result<GapReport, Failure> {
    let (pot, grid) = match spring {
        Spring::Hookean { stiffness } => {
            let pot = Potential::hookean(stiffness, d_q)?;
            let r = radius.unwrap_or_else(|| pot.default_radius());
            (pot, QGrid::boxed(d_q, n_q, r)?)
        }
        Spring::Fene { strength, b0 } => {
            if radius.is_some_and(|r| (r - b0).abs() > 1e-12 * b0) {
                return Err(Failure::Config("--radius must equal --b0 for FENE springs".into()));
            }
            let pot = Potential::fene(strength, b0, d_q)?;
            (pot, QGrid::ball(d_q, n_q, b0)?)
        }
    };
    let eq = normalize_maxwellians(&pot, &grid)?;
    let op = FokkerPlanckOperator::new(&grid, &eq.b)?;
    let spectrum = op.spectrum()?;
    Ok(GapReport { lambda0: spectrum[1], eigs: spectrum.iter().take(5).copied().collect() })
}
