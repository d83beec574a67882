//! Incompressible flow on the periodic torus.

mod spectral;

pub use spectral::{Spectral, XGrid};

use num_complex::Complex64;

use crate::config_space::{Maxwellians, QGrid};
use crate::error::{check_len, Error, Result};

/// CFL number above which a flow step is refused.
pub const FLOW_CFL_LIMIT: f64 = 0.9;

/// Velocity components stored nodewise; `comps.len()` equals the physical dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub comps: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn zeros(grid: &XGrid) -> Self {
        Self { comps: vec![vec![0.0; grid.len()]; grid.dim] }
    }
    pub fn dim(&self) -> usize {
        self.comps.len()
    }
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
    pub fn kinetic_energy(&self, grid: &XGrid) -> f64 {
        0.5 * self.comps.iter().flatten().map(|v| v * v).sum::<f64>() * grid.cell_volume()
    }
}

/// Viscosity and polymer coupling strength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    pub viscosity: f64,
    pub coupling: f64,
}

impl FluidParams {
    pub fn new(viscosity: f64, coupling: f64) -> Result<Self> {
        if !(viscosity > 0.0) || !(coupling >= 0.0) || !viscosity.is_finite() || !coupling.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "viscosity {viscosity} must be positive and coupling {coupling} nonnegative"
            )));
        }
        Ok(Self { viscosity, coupling })
    }
}

fn check_velocity(u: &VelocityField, sp: &Spectral) -> Result<()> {
    if u.dim() != sp.grid.dim {
        return Err(Error::GridMismatch(format!("{}-component velocity on a {}-d grid", u.dim(), sp.grid.dim)));
    }
    for c in &u.comps {
        check_len("velocity component", c.len(), sp.len())?;
    }
    Ok(())
}

fn project_hat(hats: &mut [Vec<Complex64>], sp: &Spectral) {
    if hats.len() < 2 {
        return;
    }
    for k in 0..sp.len() {
        let kv = sp.derivative_vector(k);
        let k2 = kv[0] * kv[0] + kv[1] * kv[1];
        if k2 == 0.0 {
            continue;
        }
        let dot = hats[0][k] * kv[0] + hats[1][k] * kv[1];
        hats[0][k] -= dot * (kv[0] / k2);
        hats[1][k] -= dot * (kv[1] / k2);
    }
}

/// Leray projection onto discretely divergence-free fields; the mean is untouched.
///
/// In one dimension every divergence-free periodic field is constant and the
/// flow is held at rest, so the projection returns zero.
pub fn leray_project(u: &VelocityField, sp: &Spectral) -> Result<VelocityField> {
    check_velocity(u, sp)?;
    if u.dim() == 1 {
        return Ok(VelocityField::zeros(&sp.grid));
    }
    let mut hats: Vec<_> = u.comps.iter().map(|c| sp.forward(c)).collect();
    project_hat(&mut hats, sp);
    Ok(VelocityField { comps: hats.into_iter().map(|h| sp.inverse(h)).collect() })
}

/// Spectral divergence.
pub fn divergence(u: &VelocityField, sp: &Spectral) -> Result<Vec<f64>> {
    check_velocity(u, sp)?;
    let mut out = vec![0.0; sp.len()];
    for (a, c) in u.comps.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(sp.derivative(c, a)) {
            *o += d;
        }
    }
    Ok(out)
}

/// Nodewise `kappa_ij = d_j u_i`, stored row-major in a 2x2 block.
pub fn velocity_gradient(u: &VelocityField, sp: &Spectral) -> Result<Vec<[f64; 4]>> {
    check_velocity(u, sp)?;
    let mut out = vec![[0.0; 4]; sp.len()];
    if u.dim() == 1 {
        return Ok(out);
    }
    for i in 0..2 {
        let hat = sp.forward(&u.comps[i]);
        for j in 0..2 {
            let d = sp.inverse(sp.derivative_hat(&hat, j));
            for (o, v) in out.iter_mut().zip(d) {
                o[2 * i + j] = v;
            }
        }
    }
    Ok(out)
}

/// Precomputed quadrature weights `w grad_i U q_j` for the polymer stress.
#[derive(Clone, Debug)]
pub struct StressKernel {
    nq: usize,
    dim: usize,
    wa: Vec<[f64; 4]>,
    wb: Vec<[f64; 4]>,
}

impl StressKernel {
    pub fn new(maxwellians: &Maxwellians, qgrid: &QGrid, dim_x: usize) -> Self {
        let w = qgrid.weight();
        let weights = |pot: &crate::config_space::Potential| -> Vec<[f64; 4]> {
            qgrid
                .nodes()
                .iter()
                .map(|q| {
                    let g = pot.gradient(q);
                    [w * g[0] * q[0], w * g[0] * q[1], w * g[1] * q[0], w * g[1] * q[1]]
                })
                .collect()
        };
        Self {
            nq: qgrid.len(),
            dim: dim_x.min(qgrid.dim()),
            wa: weights(&maxwellians.a.potential),
            wb: weights(&maxwellians.b.potential),
        }
    }

    /// `tau_ij(x) = coupling * sum_alpha int d_i U_alpha q_j psi_alpha dq` for `i, j < d_x`.
    pub fn evaluate(&self, psi_a: &[f64], psi_b: &[f64], coupling: f64) -> Result<Vec<[f64; 4]>> {
        check_len("tetramer density", psi_a.len(), psi_b.len())?;
        if psi_a.len() % self.nq != 0 {
            return Err(Error::GridMismatch(format!("field length {} not a multiple of {}", psi_a.len(), self.nq)));
        }
        let mask: [f64; 4] = if self.dim >= 2 { [1.0; 4] } else { [1.0, 0.0, 0.0, 0.0] };
        Ok(psi_a
            .chunks(self.nq)
            .zip(psi_b.chunks(self.nq))
            .map(|(a, b)| {
                let mut t = [0.0; 4];
                for k in 0..self.nq {
                    for c in 0..4 {
                        t[c] += self.wa[k][c] * a[k] + self.wb[k][c] * b[k];
                    }
                }
                [0, 1, 2, 3].map(|c| coupling * t[c] * mask[c])
            })
            .collect())
    }
}

/// Polymer extra stress at every physical node.
pub fn kramers_stress(
    psi_a: &[f64],
    psi_b: &[f64],
    maxwellians: &Maxwellians,
    qgrid: &QGrid,
    xgrid: &XGrid,
    coupling: f64,
) -> Result<Vec<[f64; 4]>> {
    check_len("tetramer density", psi_a.len(), xgrid.len() * qgrid.len())?;
    StressKernel::new(maxwellians, qgrid, xgrid.dim).evaluate(psi_a, psi_b, coupling)
}

/// Projected force `P(div tau - N(u))` in spectral space, `N` in skew-symmetric form.
fn rhs_hat(u_hat: &[Vec<Complex64>], tau_div: &[Vec<Complex64>], sp: &Spectral) -> Vec<Vec<Complex64>> {
    let n = sp.len();
    let mut filtered: Vec<Vec<Complex64>> = u_hat.to_vec();
    for h in filtered.iter_mut() {
        sp.dealias(h);
    }
    let u: Vec<Vec<f64>> = filtered.iter().map(|h| sp.inverse(h.clone())).collect();
    let mut out: Vec<Vec<Complex64>> = tau_div.to_vec();
    for i in 0..2 {
        // advective form u_j d_j u_i
        let mut adv = vec![0.0; n];
        for j in 0..2 {
            let d = sp.inverse(sp.derivative_hat(&filtered[i], j));
            for k in 0..n {
                adv[k] += u[j][k] * d[k];
            }
        }
        let mut adv_hat = sp.forward(&adv);
        // conservative form d_j (u_j u_i)
        for j in 0..2 {
            let prod: Vec<f64> = (0..n).map(|k| u[j][k] * u[i][k]).collect();
            let d = sp.derivative_hat(&sp.forward(&prod), j);
            for k in 0..n {
                adv_hat[k] += d[k];
            }
        }
        sp.dealias(&mut adv_hat);
        for k in 0..n {
            out[i][k] -= 0.5 * adv_hat[k];
        }
    }
    project_hat(&mut out, sp);
    out
}

fn stress_divergence_hat(tau: &[[f64; 4]], sp: &Spectral) -> Vec<Vec<Complex64>> {
    let n = sp.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let comp: Vec<f64> = tau.iter().map(|t| t[2 * i + j]).collect();
            let d = sp.derivative_hat(&sp.forward(&comp), j);
            for k in 0..n {
                out[i][k] += d[k];
            }
        }
    }
    out
}

/// Rate of kinetic energy change due to advection; vanishes for divergence-free fields.
pub fn advection_energy_transfer(u: &VelocityField, sp: &Spectral) -> Result<f64> {
    check_velocity(u, sp)?;
    if u.dim() == 1 {
        return Ok(0.0);
    }
    let zero = vec![vec![Complex64::new(0.0, 0.0); sp.len()]; 2];
    let hats: Vec<_> = u.comps.iter().map(|c| sp.forward(c)).collect();
    let r = rhs_hat(&hats, &zero, sp);
    let f: Vec<Vec<f64>> = r.into_iter().map(|h| sp.inverse(h)).collect();
    Ok((0..2).map(|i| u.comps[i].iter().zip(&f[i]).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>() * sp.grid.cell_volume())
}

/// One integrating-factor step of the forced Navier-Stokes equations.
///
/// `order` 1 is integrating-factor Euler, `order` 2 is integrating-factor Heun.
pub fn ns_step(
    u: &VelocityField,
    tau: &[[f64; 4]],
    dt: f64,
    params: &FluidParams,
    sp: &Spectral,
    order: u8,
) -> Result<VelocityField> {
    check_velocity(u, sp)?;
    check_len("stress", tau.len(), sp.len())?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    if order != 1 && order != 2 {
        return Err(Error::InvalidParameter(format!("scheme order {order}")));
    }
    if u.dim() == 1 {
        return Ok(VelocityField::zeros(&sp.grid));
    }
    let umax = u.max_abs();
    let h = sp.grid.spacing();
    if umax * dt / h > FLOW_CFL_LIMIT {
        return Err(Error::StepRejected {
            reason: format!("flow CFL {:.3} exceeds {FLOW_CFL_LIMIT}", umax * dt / h),
            suggested_dt: 0.4 * h / umax,
        });
    }
    let n = sp.len();
    let decay: Vec<f64> = (0..n)
        .map(|k| {
            let kv = sp.wavevector(k);
            (-params.viscosity * (kv[0] * kv[0] + kv[1] * kv[1]) * dt).exp()
        })
        .collect();
    let force = stress_divergence_hat(tau, sp);
    let u0: Vec<Vec<Complex64>> = u.comps.iter().map(|c| sp.forward(c)).collect();
    let f0 = rhs_hat(&u0, &force, sp);
    let euler: Vec<Vec<Complex64>> = (0..2)
        .map(|i| (0..n).map(|k| decay[k] * (u0[i][k] + dt * f0[i][k])).collect())
        .collect();
    let mut next = if order == 1 {
        euler
    } else {
        let f1 = rhs_hat(&euler, &force, sp);
        (0..2)
            .map(|i| (0..n).map(|k| decay[k] * (u0[i][k] + 0.5 * dt * f0[i][k]) + 0.5 * dt * f1[i][k]).collect())
            .collect()
    };
    project_hat(&mut next, sp);
    let out = VelocityField { comps: next.into_iter().map(|h| sp.inverse(h)).collect() };
    if out.comps.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite velocity".into()));
    }
    Ok(out)
}

/// Face-normal velocities of a divergence-free field, exactly face-divergence-free.
///
/// `east[k]` is the axis-0 velocity half a cell above node `k` along axis 0,
/// `north[k]` the axis-1 velocity half a cell above along axis 1.
#[derive(Clone, Debug)]
pub struct FaceVelocities {
    pub east: Vec<f64>,
    pub north: Vec<f64>,
}

impl FaceVelocities {
    pub fn max_abs(&self) -> f64 {
        self.east.iter().chain(&self.north).fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn face_velocities(u: &VelocityField, sp: &Spectral) -> Result<FaceVelocities> {
    check_velocity(u, sp)?;
    let n = sp.len();
    if u.dim() == 1 {
        return Ok(FaceVelocities { east: vec![0.0; n], north: vec![0.0; n] });
    }
    let m = sp.grid.n;
    let h = sp.grid.spacing();
    let hats: Vec<_> = u.comps.iter().map(|c| sp.forward(c)).collect();
    let mean = [hats[0][0].re / n as f64, hats[1][0].re / n as f64];
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let kd = sp.derivative_vector(k);
        let kw = sp.wavevector(k);
        if kd[0] != kw[0] || kd[1] != kw[1] {
            continue;
        }
        let k2 = kd[0] * kd[0] + kd[1] * kd[1];
        if k2 == 0.0 {
            continue;
        }
        let i = Complex64::new(0.0, 1.0);
        let omega = i * kd[0] * hats[1][k] - i * kd[1] * hats[0][k];
        let shift = Complex64::from_polar(1.0, 0.5 * h * (kw[0] + kw[1]));
        psi[k] = omega / k2 * shift;
    }
    let corner = sp.inverse(psi);
    let at = |i: usize, j: usize| corner[(i % m) * m + (j % m)];
    let mut east = vec![0.0; n];
    let mut north = vec![0.0; n];
    for i in 0..m {
        for j in 0..m {
            east[i * m + j] = mean[0] + (at(i, j) - at(i, j + m - 1)) / h;
            north[i * m + j] = mean[1] - (at(i, j) - at(i + m - 1, j)) / h;
        }
    }
    Ok(FaceVelocities { east, north })
}

/// `amplitude (sin kx cos ky, -cos kx sin ky)` with `k = 2 pi / L`.
pub fn taylor_green(sp: &Spectral, amplitude: f64) -> Result<VelocityField> {
    if sp.grid.dim != 2 {
        return Err(Error::UnsupportedRegime("Taylor-Green flow needs two physical dimensions".into()));
    }
    let k = 2.0 * std::f64::consts::PI / sp.grid.length;
    let g = sp.grid;
    let u0 = (0..g.len()).map(|i| { let x = g.coords(i); amplitude * (k * x[0]).sin() * (k * x[1]).cos() }).collect();
    let u1 = (0..g.len()).map(|i| { let x = g.coords(i); -amplitude * (k * x[0]).cos() * (k * x[1]).sin() }).collect();
    Ok(VelocityField { comps: vec![u0, u1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(n: usize) -> Spectral {
        Spectral::new(XGrid::new(2, n, 2.0 * std::f64::consts::PI).unwrap())
    }

    fn random_field(s: &Spectral, seed: &[f64]) -> VelocityField {
        let g = s.grid;
        let comp = |off: usize| -> Vec<f64> {
            (0..g.len())
                .map(|k| {
                    let x = g.coords(k);
                    seed[off] * (x[0] + seed[off + 1]).sin() + seed[off + 2] * (2.0 * x[1] - x[0]).cos()
                        + seed[off + 3] * (x[1] + 3.0 * x[0]).sin()
                })
                .collect()
        };
        VelocityField { comps: vec![comp(0), comp(4)] }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn projection_is_idempotent_and_solenoidal(seed in prop::collection::vec(-1.0f64..1.0, 8)) {
            let s = sp(16);
            let v = random_field(&s, &seed);
            let p1 = leray_project(&v, &s).unwrap();
            let p2 = leray_project(&p1, &s).unwrap();
            let scale = p1.max_abs().max(1e-300);
            for c in 0..2 {
                for k in 0..s.len() {
                    prop_assert!((p1.comps[c][k] - p2.comps[c][k]).abs() <= 1e-12 * scale.max(1.0));
                }
            }
            prop_assert!(divergence(&p1, &s).unwrap().iter().all(|d| d.abs() < 1e-12));
            let t = advection_energy_transfer(&p1, &s).unwrap();
            prop_assert!(t.abs() < 1e-12);
            let fv = face_velocities(&p1, &s).unwrap();
            let m = 16;
            let h = s.grid.spacing();
            for i in 0..m { for j in 0..m {
                let div = fv.east[i*m+j] - fv.east[((i+m-1)%m)*m+j] + fv.north[i*m+j] - fv.north[i*m+(j+m-1)%m];
                prop_assert!((div / h).abs() < 1e-12);
            }}
        }
    }

    #[test]
    fn taylor_green_decays_at_viscous_rate() {
        let s = sp(32);
        let mu = 0.1;
        let u0 = taylor_green(&s, 1.0).unwrap();
        let tau = vec![[0.0; 4]; s.len()];
        let p = FluidParams::new(mu, 0.0).unwrap();
        let dt = 0.01;
        let mut u = u0.clone();
        for _ in 0..100 {
            u = ns_step(&u, &tau, dt, &p, &s, 2).unwrap();
        }
        let factor = (-2.0 * mu * 1.0).exp();
        for c in 0..2 {
            for k in 0..s.len() {
                assert!((u.comps[c][k] - factor * u0.comps[c][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn face_velocities_interpolate_smooth_flow() {
        let s = sp(32);
        let u = taylor_green(&s, 1.0).unwrap();
        let fv = face_velocities(&u, &s).unwrap();
        let h = s.grid.spacing();
        for k in 0..s.len() {
            let x = s.grid.coords(k);
            let exact = (x[0] + 0.5 * h).sin() * x[1].cos();
            assert!((fv.east[k] - exact).abs() < 1e-2);
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let s = sp(16);
        let u = taylor_green(&s, 10.0).unwrap();
        let tau = vec![[0.0; 4]; s.len()];
        let p = FluidParams::new(0.1, 0.0).unwrap();
        match ns_step(&u, &tau, 1.0, &p, &s, 1) {
            Err(Error::StepRejected { suggested_dt, .. }) => assert!(suggested_dt < 0.1),
            other => panic!("{other:?}"),
        }
    }
}
