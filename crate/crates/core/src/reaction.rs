//! Mass-action kinetics of the reversible association `A <-> 2B`.

use crate::config_space::{Maxwellians, QGrid};
use crate::error::{check_len, Error, Result};
use crate::fluid::{Spectral, VelocityField};

const MAX_BISECTIONS: u32 = 30;

/// Forward and backward rate constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionParams {
    pub k1: f64,
    pub k2: f64,
}

impl ReactionParams {
    /// Positive rate constants, or both zero to switch the reaction off.
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let ok = k1.is_finite() && k2.is_finite() && ((k1 > 0.0 && k2 > 0.0) || (k1 == 0.0 && k2 == 0.0));
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "rate constants must both be positive or both zero, got k1 = {k1}, k2 = {k2}"
            )));
        }
        Ok(Self { k1, k2 })
    }
    pub fn disabled() -> Self {
        Self { k1: 0.0, k2: 0.0 }
    }
    pub fn is_disabled(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }
    /// Equal constants, the case in which `M_A = M_B^2` is an equilibrium.
    pub fn is_balanced(&self) -> bool {
        self.k1 == self.k2
    }
    #[inline]
    pub fn rate(&self, a: f64, b: f64) -> f64 {
        self.k1 * a - self.k2 * b * b
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    check_len("dimer density", b.len(), a.len())
}

fn check_nonnegative(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::Domain(format!("negative or non-finite density ({a}, {b})")));
    }
    Ok(())
}

/// Nodewise rate `k1 psi_A - k2 psi_B^2`.
pub fn lma_rate(psi_a: &[f64], psi_b: &[f64], p: &ReactionParams) -> Result<Vec<f64>> {
    check_pair(psi_a, psi_b)?;
    psi_a
        .iter()
        .zip(psi_b)
        .map(|(&a, &b)| {
            check_nonnegative(a, b)?;
            Ok(p.rate(a, b))
        })
        .collect()
}

/// `r ln(k1 a / (k2 b^2))`, evaluated as `r ln(1 + r / (k2 b^2))` so that its sign is exact.
pub fn reaction_dissipation_density(a: f64, b: f64, p: &ReactionParams) -> Result<f64> {
    if p.is_disabled() {
        return Ok(0.0);
    }
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("reaction dissipation needs positive densities, got ({a}, {b})")));
    }
    let r = p.rate(a, b);
    Ok(r * (r / (p.k2 * b * b)).ln_1p())
}

/// Quadrature of the reaction dissipation with a uniform weight per node.
pub fn reaction_dissipation(psi_a: &[f64], psi_b: &[f64], p: &ReactionParams, weight: f64) -> Result<f64> {
    check_pair(psi_a, psi_b)?;
    let mut s = 0.0;
    for (&a, &b) in psi_a.iter().zip(psi_b) {
        s += reaction_dissipation_density(a, b, p)?;
    }
    Ok(s * weight)
}

/// Largest relative mismatch between `r ln(k1 a/(k2 b^2))` and `r (mu_A - 2 mu_B)`,
/// `mu = ln(psi / M)`, over the supplied nodes.
pub fn verify_gradient_flow(
    psi_a: &[f64],
    psi_b: &[f64],
    m_a: &[f64],
    m_b: &[f64],
    p: &ReactionParams,
) -> Result<f64> {
    check_pair(psi_a, psi_b)?;
    check_len("tetramer equilibrium", m_a.len(), psi_a.len())?;
    check_len("dimer equilibrium", m_b.len(), psi_a.len())?;
    let mut worst: f64 = 0.0;
    for k in 0..psi_a.len() {
        let (a, b) = (psi_a[k], psi_b[k]);
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::Domain(format!("nonpositive density ({a}, {b})")));
        }
        let r = p.rate(a, b);
        let direct = r * (p.k1 * a / (p.k2 * b * b)).ln();
        let mu_a = (a / m_a[k]).ln();
        let mu_b = (b / m_b[k]).ln();
        let via = r * (mu_a - 2.0 * mu_b + (p.k1 * m_a[k] / (p.k2 * m_b[k] * m_b[k])).ln());
        let scale = r.abs() * (mu_a.abs() + 2.0 * mu_b.abs() + 1.0);
        if scale > 0.0 {
            worst = worst.max((direct - via).abs() / scale);
        }
    }
    Ok(worst)
}

/// Fluctuation rates for `psi = M + sqrt(M) f` with `k1 = k2`:
/// `r_A = -k1 c`, `r_B = 2 k1 sqrt(M_B) c`, `c = f_A - 2 sqrt(M_B) f_B - f_B^2`.
///
/// `sqrt_mb` is a configuration-space array broadcast over physical nodes.
pub fn linearized_rates(f_a: &[f64], f_b: &[f64], sqrt_mb: &[f64], p: &ReactionParams) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(f_a, f_b)?;
    if !p.is_balanced() {
        return Err(Error::UnsupportedRegime("fluctuation rates need k1 = k2".into()));
    }
    let nq = sqrt_mb.len();
    if nq == 0 || f_a.len() % nq != 0 {
        return Err(Error::GridMismatch(format!("field length {} not a multiple of {nq}", f_a.len())));
    }
    let mut ra = Vec::with_capacity(f_a.len());
    let mut rb = Vec::with_capacity(f_a.len());
    for k in 0..f_a.len() {
        let s = sqrt_mb[k % nq];
        let c = f_a[k] - 2.0 * s * f_b[k] - f_b[k] * f_b[k];
        ra.push(-p.k1 * c);
        rb.push(2.0 * p.k1 * s * c);
    }
    Ok((ra, rb))
}

/// Implicit-midpoint increment for one node, `None` if it breaks positivity.
///
/// The midpoint equation `delta = dt (k1 (a - delta/2) - k2 (b + delta)^2)` is
/// the quadratic `A delta^2 + B delta - C = 0`; its root through zero is taken
/// in the cancellation-free form `2C / (B + sqrt(B^2 + 4AC))`.
fn midpoint_node(a: f64, b: f64, dt: f64, p: &ReactionParams) -> Option<(f64, f64)> {
    let r0 = p.rate(a, b);
    if r0 == 0.0 {
        return Some((a, b));
    }
    let qa = dt * p.k2;
    let qb = 1.0 + dt * (0.5 * p.k1 + 2.0 * p.k2 * b);
    let qc = dt * r0;
    let disc = qb * qb + 4.0 * qa * qc;
    if !(disc >= 0.0) || qb <= 0.0 {
        return None;
    }
    let delta = 2.0 * qc / (qb + disc.sqrt());
    let an = a - delta;
    let bn = b + 2.0 * delta;
    let ok = |old: f64, new: f64| new > 0.0 || (new == 0.0 && old == 0.0);
    (ok(a, an) && ok(b, bn)).then_some((an, bn))
}

fn limited_node(a: f64, b: f64, dt: f64, p: &ReactionParams, depth: u32) -> Option<(f64, f64)> {
    if let Some(v) = midpoint_node(a, b, dt, p) {
        return Some(v);
    }
    if depth >= MAX_BISECTIONS {
        return None;
    }
    let (a1, b1) = limited_node(a, b, 0.5 * dt, p, depth + 1)?;
    limited_node(a1, b1, 0.5 * dt, p, depth + 1)
}

/// Implicit-midpoint reaction update on every node.
///
/// Each node moves by a single increment, `psi_A -= delta`, `psi_B += 2 delta`.
/// With `limiter` a node whose update would lose positivity is integrated in
/// successively halved substeps; without it the step is rejected.
pub fn reaction_substep(psi_a: &mut [f64], psi_b: &mut [f64], dt: f64, p: &ReactionParams, limiter: bool) -> Result<()> {
    check_pair(psi_a, psi_b)?;
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    if p.is_disabled() || dt == 0.0 {
        return Ok(());
    }
    for k in 0..psi_a.len() {
        let (a, b) = (psi_a[k], psi_b[k]);
        check_nonnegative(a, b)?;
        let next = if limiter { limited_node(a, b, dt, p, 0) } else { midpoint_node(a, b, dt, p) };
        match next {
            Some((an, bn)) => {
                psi_a[k] = an;
                psi_b[k] = bn;
            }
            None => {
                let mut trial = dt;
                for _ in 0..MAX_BISECTIONS {
                    trial *= 0.5;
                    if midpoint_node(a, b, trial, p).is_some() {
                        break;
                    }
                }
                return Err(Error::StepRejected {
                    reason: format!("reaction update loses positivity at node {k}"),
                    suggested_dt: trial,
                });
            }
        }
    }
    Ok(())
}

/// Time derivatives of the fluctuation number densities `rho_alpha = int f sqrt(M) dq`.
///
/// Inputs are fluctuation fields laid out x-major. The transport term
/// `-u . grad rho` is included when a velocity is supplied.
pub fn number_density_rhs(
    f_a: &[f64],
    f_b: &[f64],
    maxwellians: &Maxwellians,
    qgrid: &QGrid,
    p: &ReactionParams,
    flow: Option<(&VelocityField, &Spectral)>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nq = qgrid.len();
    check_pair(f_a, f_b)?;
    check_len("tetramer equilibrium", maxwellians.a.len(), nq)?;
    if f_a.len() % nq != 0 {
        return Err(Error::GridMismatch(format!("field length {} not a multiple of {nq}", f_a.len())));
    }
    let (ra, _) = linearized_rates(f_a, f_b, maxwellians.b.sqrt_values(), p)?;
    let sa = maxwellians.a.sqrt_values();
    let sb = maxwellians.b.sqrt_values();
    let w = qgrid.weight();
    let nx = f_a.len() / nq;
    let mut rho_a = vec![0.0; nx];
    let mut rho_b = vec![0.0; nx];
    let mut da = vec![0.0; nx];
    for x in 0..nx {
        for k in 0..nq {
            let i = x * nq + k;
            rho_a[x] += f_a[i] * sa[k] * w;
            rho_b[x] += f_b[i] * sb[k] * w;
            da[x] += ra[i] * sa[k] * w;
        }
    }
    let mut db: Vec<f64> = da.iter().map(|v| -2.0 * v).collect();
    if let Some((u, sp)) = flow {
        check_len("physical nodes", sp.len(), nx)?;
        for axis in 0..u.dim() {
            let ga = sp.derivative(&rho_a, axis);
            let gb = sp.derivative(&rho_b, axis);
            for x in 0..nx {
                da[x] -= u.comps[axis][x] * ga[x];
                db[x] -= u.comps[axis][x] * gb[x];
            }
        }
    }
    Ok((da, db))
}
