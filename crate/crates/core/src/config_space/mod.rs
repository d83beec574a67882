//! Configuration-space discretisation: spring potentials, equilibria,
//! the Fokker-Planck operator and its spectrum.

mod fokker_planck;
mod grid;
mod maxwellian;
mod potential;

pub use fokker_planck::{spectral_gap, FokkerPlanckOperator, KERNEL_TOLERANCE};
pub(crate) use fokker_planck::FaceCoef;
pub use grid::{Face, QGrid};
pub use maxwellian::{normalize_maxwellians, solve_normalization, Maxwellian, Maxwellians, TAIL_TOLERANCE};
pub use potential::{Potential, PotentialKind};

use crate::error::{check_len, Result};

/// Splits `g` into its `M`-weighted mean and the orthogonal remainder.
pub fn project_kernel(g: &[f64], m: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("field", g.len(), m.len())?;
    let num: f64 = g.iter().zip(m).map(|(a, b)| a * b).sum();
    let den: f64 = m.iter().sum();
    let mean = num / den;
    Ok((mean, g.iter().map(|v| v - mean).collect()))
}

/// `int q psi dq` for every slice of a field laid out x-major.
pub fn first_moment(psi: &[f64], grid: &QGrid) -> Result<Vec<[f64; 2]>> {
    let n = grid.len();
    if psi.len() % n != 0 {
        return Err(crate::error::Error::GridMismatch(format!(
            "field length {} not a multiple of {n}",
            psi.len()
        )));
    }
    let w = grid.weight();
    Ok(psi
        .chunks(n)
        .map(|s| {
            let mut j = [0.0; 2];
            for (v, q) in s.iter().zip(grid.nodes()) {
                j[0] += q[0] * v;
                j[1] += q[1] * v;
            }
            [j[0] * w, j[1] * w]
        })
        .collect())
}
