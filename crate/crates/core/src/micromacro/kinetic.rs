//! Transport in physical space and drift in configuration space.

use rayon::prelude::*;

use crate::config_space::{Face, QGrid};
use crate::error::{check_len, Error, Result};
use crate::fluid::{FaceVelocities, Spectral};

/// Relative size of `tr(grad u)` tolerated by the drift update.
pub const TRACE_TOLERANCE: f64 = 1e-8;

fn transport_rhs(psi: &[f64], faces: &FaceVelocities, n: usize, nq: usize, h: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let inv = 1.0 / h;
    for i in 0..n {
        for j in 0..n {
            let x = i * n + j;
            let neighbours = [(((i + 1) % n) * n + j, faces.east[x]), (i * n + (j + 1) % n, faces.north[x])];
            for (y, vel) in neighbours {
                if vel == 0.0 {
                    continue;
                }
                let c = vel * inv;
                let src = if vel > 0.0 { x } else { y };
                for k in 0..nq {
                    let f = c * psi[src * nq + k];
                    out[x * nq + k] -= f;
                    out[y * nq + k] += f;
                }
            }
        }
    }
}

/// Conservative first-order upwind transport `psi_t + div_x(u psi) = 0`, SSP-RK2 in time.
pub fn transport_upwind(psi: &mut [f64], faces: &FaceVelocities, n: usize, h: f64, dt: f64) -> Result<()> {
    let nx = faces.east.len();
    if nx == 0 || psi.len() % nx != 0 {
        return Err(Error::GridMismatch(format!("field length {} vs {nx} physical nodes", psi.len())));
    }
    let vmax = faces.max_abs();
    if vmax == 0.0 || dt == 0.0 {
        return Ok(());
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = i * n + j;
            let west = ((i + n - 1) % n) * n + j;
            let south = i * n + (j + n - 1) % n;
            let out = faces.east[x].max(0.0) + (-faces.east[west]).max(0.0) + faces.north[x].max(0.0) + (-faces.north[south]).max(0.0);
            worst = worst.max(out);
        }
    }
    if worst * dt / h > 1.0 {
        return Err(Error::StepRejected {
            reason: format!("transport CFL {:.3} exceeds 1", worst * dt / h),
            suggested_dt: 0.4 * h / vmax,
        });
    }
    let nq = psi.len() / nx;
    let mut k1 = vec![0.0; psi.len()];
    transport_rhs(psi, faces, n, nq, h, &mut k1);
    let stage: Vec<f64> = psi.iter().zip(&k1).map(|(p, k)| p + dt * k).collect();
    transport_rhs(&stage, faces, n, nq, h, &mut k1);
    for ((p, s), k) in psi.iter_mut().zip(&stage).zip(&k1) {
        *p = 0.5 * *p + 0.5 * (s + dt * k);
    }
    Ok(())
}

/// Pseudo-spectral transport `psi_t + div_x(u psi) = 0` with Heun time stepping.
pub fn transport_spectral(psi: &mut [f64], u: &[Vec<f64>], sp: &Spectral, dt: f64) -> Result<()> {
    let nx = sp.len();
    if psi.len() % nx != 0 {
        return Err(Error::GridMismatch(format!("field length {} vs {nx} physical nodes", psi.len())));
    }
    let nq = psi.len() / nx;
    let rhs = |field: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        let cols: Vec<Vec<f64>> = (0..nq)
            .into_par_iter()
            .map(|k| {
                let mut acc = vec![0.0; nx];
                for (axis, comp) in u.iter().enumerate() {
                    let flux: Vec<f64> = (0..nx).map(|x| comp[x] * field[x * nq + k]).collect();
                    for (a, d) in acc.iter_mut().zip(sp.derivative(&flux, axis)) {
                        *a -= d;
                    }
                }
                acc
            })
            .collect();
        for (k, col) in cols.iter().enumerate() {
            for x in 0..nx {
                out[x * nq + k] = col[x];
            }
        }
        out
    };
    let k1 = rhs(psi);
    let stage: Vec<f64> = psi.iter().zip(&k1).map(|(p, k)| p + dt * k).collect();
    let k2 = rhs(&stage);
    for ((p, a), b) in psi.iter_mut().zip(&k1).zip(&k2) {
        *p += 0.5 * dt * (a + b);
    }
    Ok(())
}

/// Drift right-hand side `-div_q(kappa q psi)` on one configuration slice, upwinded on faces.
///
/// `kappa` is row-major 2x2 with `kappa_ij = d_j u_i`; entries outside the grid
/// dimension are ignored.
pub fn drift_apply(psi: &[f64], kappa: &[f64; 4], grid: &QGrid) -> Result<Vec<f64>> {
    check_len("configuration slice", psi.len(), grid.len())?;
    let mut out = vec![0.0; psi.len()];
    Stencil::new(grid).rhs(psi, kappa, grid.spacing(), &mut out);
    Ok(out)
}

/// Face layout used by the drift: strided loops on a full 2D box, a face list otherwise.
enum Stencil {
    Box { n: usize, centers: Vec<f64> },
    Faces(Vec<Face>),
}

impl Stencil {
    fn new(grid: &QGrid) -> Self {
        if grid.dim() == 2 && grid.is_full_box() {
            let n = grid.n_axis();
            Stencil::Box { n, centers: (0..n).map(|j| grid.node(j)[1]).collect() }
        } else {
            Stencil::Faces(grid.faces())
        }
    }

    fn rhs(&self, psi: &[f64], kappa: &[f64; 4], h: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let inv = 1.0 / h;
        match self {
            Stencil::Faces(faces) => {
                for f in faces {
                    let q = f.position;
                    let a = f.axis;
                    let v = (kappa[2 * a] * q[0] + kappa[2 * a + 1] * q[1]) * inv;
                    let flux = v.max(0.0) * psi[f.lo] + v.min(0.0) * psi[f.hi];
                    out[f.lo] -= flux;
                    out[f.hi] += flux;
                }
            }
            Stencil::Box { n, centers } => {
                let n = *n;
                for i in 0..n - 1 {
                    let a0 = kappa[0] * (centers[i] + 0.5 * h);
                    let (head, tail) = out.split_at_mut((i + 1) * n);
                    let (lo, hi) = (&mut head[i * n..], &mut tail[..n]);
                    let (p_lo, p_hi) = (&psi[i * n..(i + 1) * n], &psi[(i + 1) * n..(i + 2) * n]);
                    for j in 0..n {
                        let v = (a0 + kappa[1] * centers[j]) * inv;
                        let flux = v.max(0.0) * p_lo[j] + v.min(0.0) * p_hi[j];
                        lo[j] -= flux;
                        hi[j] += flux;
                    }
                }
                for i in 0..n {
                    let a2 = kappa[2] * centers[i];
                    let row = &mut out[i * n..(i + 1) * n];
                    let p = &psi[i * n..(i + 1) * n];
                    for j in 0..n - 1 {
                        let v = (a2 + kappa[3] * (centers[j] + 0.5 * h)) * inv;
                        let flux = v.max(0.0) * p[j] + v.min(0.0) * p[j + 1];
                        row[j] -= flux;
                        row[j + 1] += flux;
                    }
                }
            }
        }
    }
}

/// Embeds the physical velocity gradient into configuration space.
pub fn embed_gradient(kappa: &[f64; 4], d_x: usize, d_q: usize) -> [f64; 4] {
    if d_x >= 2 && d_q >= 2 {
        *kappa
    } else {
        [0.0; 4]
    }
}

/// Drift substep on every slice, SSP-RK2 with a positivity CFL check.
pub fn drift_substep(psi: &mut [f64], kappa: &[[f64; 4]], grid: &QGrid, dt: f64) -> Result<()> {
    let nq = grid.len();
    check_len("drift field", psi.len(), kappa.len() * nq)?;
    let mut kmax: f64 = 0.0;
    for k in kappa {
        let size = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let trace = k[0] + k[3];
        if trace.abs() > TRACE_TOLERANCE * size.max(1e-300) && trace.abs() > 1e-14 {
            return Err(Error::Inconsistent(format!("velocity gradient has trace {trace:.3e}")));
        }
        kmax = kmax.max(k.iter().map(|v| v.abs()).sum());
    }
    if kmax == 0.0 || dt == 0.0 {
        return Ok(());
    }
    let h = grid.spacing();
    let r = grid.radius();
    if 2.0 * kmax * r * dt / h > 1.0 {
        return Err(Error::StepRejected {
            reason: format!("drift CFL {:.3} exceeds 1", 2.0 * kmax * r * dt / h),
            suggested_dt: 0.4 * h / (kmax * r),
        });
    }
    let stencil = Stencil::new(grid);
    psi.par_chunks_mut(nq).zip(kappa.par_iter()).for_each_init(
        || (vec![0.0; nq], vec![0.0; nq]),
        |(rhs, stage), (slice, k)| {
            if k.iter().all(|v| *v == 0.0) {
                return;
            }
            stencil.rhs(slice, k, h, rhs);
            for i in 0..nq {
                stage[i] = slice[i] + dt * rhs[i];
            }
            stencil.rhs(stage, k, h, rhs);
            for i in 0..nq {
                slice[i] = 0.5 * slice[i] + 0.5 * (stage[i] + dt * rhs[i]);
            }
        },
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{face_velocities, taylor_green, XGrid};
    use proptest::prelude::*;

    #[test]
    fn drift_conserves_slice_mass() {
        let g = QGrid::boxed(2, 16, 4.0).unwrap();
        let psi: Vec<f64> = g.nodes().iter().map(|q| (-(q[0] * q[0] + 2.0 * q[1] * q[1])).exp()).collect();
        let out = drift_apply(&psi, &[0.3, 1.0, -0.5, -0.3], &g).unwrap();
        let total: f64 = out.iter().sum();
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn box_stencil_matches_face_list() {
        let g = QGrid::boxed(2, 12, 5.0).unwrap();
        let psi: Vec<f64> = g.nodes().iter().map(|q| (-(q[0] * q[0] + q[1] * q[1]) / 2.0).exp() * (1.0 + 0.3 * q[0].sin())).collect();
        let kappa = [0.4, -1.1, 0.7, -0.4];
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        Stencil::new(&g).rhs(&psi, &kappa, g.spacing(), &mut a);
        Stencil::Faces(g.faces()).rhs(&psi, &kappa, g.spacing(), &mut b);
        assert!(matches!(Stencil::new(&g), Stencil::Box { .. }));
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-14 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn drift_rejects_compressible_gradient() {
        let g = QGrid::boxed(2, 8, 4.0).unwrap();
        let mut psi = vec![1.0; g.len()];
        let err = drift_substep(&mut psi, &[[1.0, 0.0, 0.0, 0.0]], &g, 0.01);
        assert!(matches!(err, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn transport_keeps_uniform_state_and_mass() {
        let x = XGrid::new(2, 16, 2.0 * std::f64::consts::PI).unwrap();
        let s = Spectral::new(x);
        let u = taylor_green(&s, 1.0).unwrap();
        let fv = face_velocities(&u, &s).unwrap();
        let mut psi = vec![0.7; x.len() * 3];
        transport_upwind(&mut psi, &fv, 16, x.spacing(), 0.05).unwrap();
        assert!(psi.iter().all(|v| (v - 0.7).abs() < 1e-13));
        let mut bump: Vec<f64> = (0..x.len() * 3).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let before: f64 = bump.iter().sum();
        transport_upwind(&mut bump, &fv, 16, x.spacing(), 0.05).unwrap();
        assert!((bump.iter().sum::<f64>() - before).abs() < 1e-12 * before);
        assert!(bump.iter().all(|v| *v >= 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn drift_preserves_positivity(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
            let g = QGrid::boxed(2, 12, 3.0).unwrap();
            let kappa = [a, b, c, -a];
            let mut psi: Vec<f64> = g.nodes().iter().map(|q| (-(q[0] * q[0] + q[1] * q[1])).exp()).collect();
            let before: f64 = psi.iter().sum();
            let kmax: f64 = kappa.iter().map(|v| v.abs()).sum();
            let dt = 0.4 * g.spacing() / (kmax.max(1e-3) * g.radius());
            drift_substep(&mut psi, &[kappa], &g, dt).unwrap();
            prop_assert!(psi.iter().all(|v| *v > 0.0));
            prop_assert!((psi.iter().sum::<f64>() - before).abs() < 1e-12 * before);
        }
    }
}
