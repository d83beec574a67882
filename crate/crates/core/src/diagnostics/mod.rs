//! Energy budgets, Sobolev functionals, coupling identities and decay fits.

mod cancellation;
mod energy;
mod fit;
mod sobolev;

pub use cancellation::{cancellation_residual, QuadratureRule};
pub use energy::{energy_law_residual, energy_report, relative_entropy_density, relative_entropy_h, EnergyReport};
pub use fit::{fit_decay, DecayFit};
pub use sobolev::{sobolev_report, SobolevReport};

use crate::error::Result;
use crate::micromacro::{Model, SimState};

/// Largest cancellation residual over both species.
pub fn state_cancellation_residual(model: &Model, state: &SimState) -> Result<f64> {
    let (f_a, f_b) = model.fluctuations(state)?;
    let ra = cancellation_residual(&f_a, &state.u, &model.maxwellians.a, &model.qgrid, &model.spectral, QuadratureRule::Shared)?;
    let rb = cancellation_residual(&f_b, &state.u, &model.maxwellians.b, &model.qgrid, &model.spectral, QuadratureRule::Shared)?;
    Ok(ra.max(rb))
}
