use rayon::prelude::*;
use serde::Serialize;

use crate::config_space::FokkerPlanckOperator;
use crate::error::{check_len, Error, Result};
use crate::fluid::velocity_gradient;
use crate::micromacro::{Model, SimState};
use crate::reaction::reaction_dissipation_density;

/// `h(z) = (1 + z) ln(1 + z) - z`, using its Taylor series near zero.
pub fn relative_entropy_h(z: f64) -> f64 {
    h_with_log(z, z.ln_1p())
}

/// `h(z)` given `ln(1 + z)`.
#[inline]
fn h_with_log(z: f64, log1p: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        z2 * (0.5 - z / 6.0 + z2 / 12.0 - z2 * z / 20.0 + z2 * z2 / 30.0)
    } else if z <= -1.0 {
        1.0
    } else {
        (1.0 + z) * log1p - z
    }
}

/// `psi ln(psi/M) - psi + M`, written as `M h(psi/M - 1)`.
pub fn relative_entropy_density(psi: f64, m: f64) -> f64 {
    m * relative_entropy_h((psi - m) / m)
}

/// Energy and dissipation budget of one state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub free_energy: f64,
    pub total: f64,
    pub d_u: f64,
    pub d_micro: f64,
    pub d_reaction: f64,
    pub d_total: f64,
}

/// `(total(next) - total(prev)) / dt + (D(prev) + D(next)) / 2`.
pub fn energy_law_residual(prev: &EnergyReport, next: &EnergyReport, dt: f64) -> f64 {
    (next.total - prev.total) / dt + 0.5 * (prev.d_total + next.d_total)
}

/// Relative entropy and Fisher information of one configuration slice.
///
/// The dissipation uses the same faces as the discrete operator, so that it is
/// exactly the rate at which the discrete operator lowers the discrete entropy.
fn slice_terms(psi: &[f64], op: &FokkerPlanckOperator, z: &mut [f64], l: &mut [f64]) -> Result<(f64, f64)> {
    let m = op.equilibrium();
    let mut f = 0.0;
    for k in 0..psi.len() {
        if !(psi[k] > 0.0) {
            return Err(Error::Domain(format!("nonpositive density {} in energy report", psi[k])));
        }
        z[k] = (psi[k] - m[k]) / m[k];
        l[k] = z[k].ln_1p();
        f += m[k] * h_with_log(z[k], l[k]);
    }
    let mut d = 0.0;
    for face in op.face_coefs() {
        d += face.coef * (z[face.hi] - z[face.lo]) * (l[face.hi] - l[face.lo]);
    }
    Ok((f, d))
}

/// Quadrature of every term of the energy-dissipation law.
pub fn energy_report(model: &Model, state: &SimState) -> Result<EnergyReport> {
    let nq = model.nq();
    let n = model.nx() * nq;
    check_len("tetramer density", state.psi_a.len(), n)?;
    check_len("dimer density", state.psi_b.len(), n)?;
    let lambda = model.fluid.coupling;
    let dv = model.xgrid.cell_volume();
    let w = model.qgrid.weight();
    let parts: Vec<Result<[f64; 3]>> = state
        .psi_a
        .par_chunks(nq)
        .zip(state.psi_b.par_chunks(nq))
        .map_init(
            || (vec![0.0; nq], vec![0.0; nq]),
            |(z, l), (a, b)| {
                let (fa, da) = slice_terms(a, &model.fp_a, z, l)?;
                let (fb, db) = slice_terms(b, &model.fp_b, z, l)?;
                let mut dr = 0.0;
                for k in 0..nq {
                    dr += reaction_dissipation_density(a[k], b[k], &model.reaction)?;
                }
                Ok([fa + fb, da + db, dr])
            },
        )
        .collect();
    let mut sums = [0.0; 3];
    for p in parts {
        let p = p?;
        for c in 0..3 {
            sums[c] += p[c];
        }
    }
    let scale = lambda * w * dv;
    let kinetic = state.u.kinetic_energy(&model.xgrid);
    let d_u = if model.xgrid.dim >= 2 {
        let g = velocity_gradient(&state.u, &model.spectral)?;
        model.fluid.viscosity * g.iter().map(|k| k.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() * dv
    } else {
        0.0
    };
    let free_energy = sums[0] * scale;
    let d_micro = sums[1] * scale;
    let d_reaction = sums[2] * scale;
    Ok(EnergyReport {
        kinetic,
        free_energy,
        total: kinetic + free_energy,
        d_u,
        d_micro,
        d_reaction,
        d_total: d_u + d_micro + d_reaction,
    })
}
