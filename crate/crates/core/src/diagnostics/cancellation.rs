use crate::config_space::{Maxwellian, QGrid};
use crate::error::{check_len, Error, Result};
use crate::fluid::{velocity_gradient, Spectral, VelocityField};

/// Which configuration nodes the stretching pairing is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Both pairings use the grid nodes.
    Shared,
    /// The stretching pairing uses nodes shifted by half a cell; a negative control.
    Shifted,
}

/// Normalised residual of the coupling cancellation for one species.
///
/// The stress pairing `sum u . div tau(f)` and the stretching pairing
/// `sum (grad u q) . grad U sqrt(M) f` must cancel. The sum is divided by
/// `|grad u| |f| S` with `S^2 = int |grad U|^2 |q|^2 M`.
pub fn cancellation_residual(
    f: &[f64],
    u: &VelocityField,
    m: &Maxwellian,
    qgrid: &QGrid,
    sp: &Spectral,
    rule: QuadratureRule,
) -> Result<f64> {
    let nq = qgrid.len();
    let nx = sp.len();
    check_len("fluctuation", f.len(), nx * nq)?;
    check_len("equilibrium", m.len(), nq)?;
    if u.dim() != sp.grid.dim {
        return Err(Error::GridMismatch("velocity dimension".into()));
    }
    let d = sp.grid.dim.min(qgrid.dim());
    if sp.grid.dim < 2 {
        return Ok(0.0);
    }
    let w = qgrid.weight();
    let dv = sp.grid.cell_volume();
    let sqrt_m = m.sqrt_values();
    let pot = m.potential;
    let shift = match rule {
        QuadratureRule::Shared => 0.0,
        QuadratureRule::Shifted => 0.5 * qgrid.spacing(),
    };
    // stress weights on grid nodes, stretching weights on possibly shifted nodes
    let weights = |offset: f64| -> Vec<[f64; 4]> {
        qgrid
            .nodes()
            .iter()
            .zip(sqrt_m)
            .map(|(q, s)| {
                let qs = [q[0] - offset, q[1] - offset];
                let g = pot.gradient(&qs);
                let mut out = [0.0; 4];
                for i in 0..d {
                    for j in 0..d {
                        out[2 * i + j] = g[i] * qs[j] * s * w;
                    }
                }
                out
            })
            .collect()
    };
    let ws = weights(0.0);
    let wt = weights(shift);
    let mut tau = vec![[0.0; 4]; nx];
    let mut stretch = vec![[0.0; 4]; nx];
    for x in 0..nx {
        for k in 0..nq {
            let v = f[x * nq + k];
            for c in 0..4 {
                tau[x][c] += ws[k][c] * v;
                stretch[x][c] += wt[k][c] * v;
            }
        }
    }
    let mut p1 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let comp: Vec<f64> = tau.iter().map(|t| t[2 * i + j]).collect();
            let div = sp.derivative(&comp, j);
            p1 += u.comps[i].iter().zip(&div).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let kappa = velocity_gradient(u, sp)?;
    let mut p2 = 0.0;
    for x in 0..nx {
        for c in 0..4 {
            p2 += kappa[x][c] * stretch[x][c];
        }
    }
    let num = (p1 + p2).abs() * dv;
    let grad_norm = (kappa.iter().map(|k| k.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() * dv).sqrt();
    let f_norm = (f.iter().map(|v| v * v).sum::<f64>() * w * dv).sqrt();
    let moment = qgrid
        .nodes()
        .iter()
        .zip(m.values())
        .map(|(q, mv)| {
            let g = pot.gradient(q);
            (g[0] * g[0] + g[1] * g[1]) * (q[0] * q[0] + q[1] * q[1]) * mv
        })
        .sum::<f64>()
        * w;
    let denom = grad_norm * f_norm * moment.sqrt();
    if num == 0.0 || denom == 0.0 {
        return Ok(0.0);
    }
    Ok(num / denom)
}
