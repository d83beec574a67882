use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config_space::{FaceCoef, QGrid};
use crate::error::{check_len, Error, Result};
use crate::fluid::VelocityField;
use crate::micromacro::Model;

/// Perturbative Sobolev energies and dissipations of order `s`.
///
/// Spatial derivatives are spectral, configuration derivatives are centred
/// differences with zero extension, and `s' = s - 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SobolevReport {
    pub order: usize,
    pub eta: f64,
    pub e_s: f64,
    pub d_s: f64,
    pub e_j: f64,
    pub d_j: f64,
    pub e_mix: f64,
    pub d_mix: f64,
    pub e_rho: f64,
    pub d_rho: f64,
    /// `E_s + eta E_rho + eta E_mix + eta^2 E_j`.
    pub energy_eta: f64,
    /// `D_s + eta D_rho + eta D_mix + eta^2 D_j`.
    pub dissipation_eta: f64,
    /// Unweighted energy: `E_s` plus every mixed term with unit weight plus `E_j`.
    pub energy_plain: f64,
    /// Flow gradient, tetramer density, Fokker-Planck, moment and reaction parts
    /// of the unweighted dissipation.
    pub dissipation_parts: [f64; 5],
}

impl SobolevReport {
    /// `energy_eta <= 2 energy_plain` and `eta^(s+1) energy_plain <= energy_eta`.
    pub fn equivalence_holds(&self) -> bool {
        let tol = 1e-12 * self.energy_plain.abs();
        self.energy_eta <= 2.0 * self.energy_plain + tol
            && self.eta.powi(self.order as i32 + 1) * self.energy_plain <= self.energy_eta + tol
    }
}

struct QForms<'a> {
    grid: &'a QGrid,
    w: f64,
    q2: Vec<f64>,
}

impl QForms<'_> {
    fn norm(&self, v: &[Complex64]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.w
    }
    fn moment(&self, v: &[Complex64]) -> f64 {
        v.iter().zip(&self.q2).map(|(c, q)| c.norm_sqr() * q).sum::<f64>() * self.w
    }
    /// `int |grad(v / sqrt M)|^2 M`, optionally weighted by `|q|^2` at the faces.
    fn dirichlet(&self, v: &[Complex64], sqrt_m: &[f64], faces: &[FaceCoef], face_q2: Option<&[f64]>) -> f64 {
        let mut s = 0.0;
        for (i, f) in faces.iter().enumerate() {
            let d = v[f.hi] / sqrt_m[f.hi] - v[f.lo] / sqrt_m[f.lo];
            let wq = face_q2.map_or(1.0, |q| q[i]);
            s += f.coef * wq * d.norm_sqr();
        }
        s * self.w
    }
    fn gradient(&self, v: &[Complex64]) -> Vec<Vec<Complex64>> {
        let inv = 0.5 / self.grid.spacing();
        (0..self.grid.dim())
            .map(|a| {
                (0..v.len())
                    .map(|k| {
                        let up = self.grid.neighbor(k, a, 1).map_or(Complex64::new(0.0, 0.0), |j| v[j]);
                        let dn = self.grid.neighbor(k, a, 0).map_or(Complex64::new(0.0, 0.0), |j| v[j]);
                        (up - dn) * inv
                    })
                    .collect()
            })
            .collect()
    }
}

const N_TERMS: usize = 15;

/// `sum_{k=0}^{m} kk^k`, zero for negative `m`.
fn weight(kk: f64, m: i64) -> f64 {
    (0..=m).map(|k| kk.powi(k as i32)).sum()
}

fn transform(model: &Model, f: &[f64]) -> Vec<Complex64> {
    let nx = model.nx();
    let nq = model.nq();
    let cols: Vec<Vec<Complex64>> = (0..nq)
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = (0..nx).map(|x| f[x * nq + k]).collect();
            model.spectral.forward(&col)
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); nx * nq];
    for (k, col) in cols.iter().enumerate() {
        for x in 0..nx {
            out[x * nq + k] = col[x];
        }
    }
    out
}

/// Sobolev functionals of the fluctuation `(f_A, f_B, u)`.
pub fn sobolev_report(model: &Model, f_a: &[f64], f_b: &[f64], u: &VelocityField, s: usize) -> Result<SobolevReport> {
    if s > model.config.sobolev_s_max {
        return Err(Error::InvalidParameter(format!(
            "Sobolev order {s} exceeds the configured maximum {}",
            model.config.sobolev_s_max
        )));
    }
    let nx = model.nx();
    let nq = model.nq();
    check_len("tetramer fluctuation", f_a.len(), nx * nq)?;
    check_len("dimer fluctuation", f_b.len(), nx * nq)?;
    let eta = model.config.eta;
    let grid = &model.qgrid;
    let forms = QForms {
        grid,
        w: grid.weight(),
        q2: grid.nodes().iter().map(|q| q[0] * q[0] + q[1] * q[1]).collect(),
    };
    let faces_list = grid.faces();
    let face_q2: Vec<f64> = faces_list.iter().map(|f| f.position[0].powi(2) + f.position[1].powi(2)).collect();
    let species = [
        (transform(model, f_a), model.fp_a.sqrt_equilibrium(), model.fp_a.face_coefs()),
        (transform(model, f_b), model.fp_b.sqrt_equilibrium(), model.fp_b.face_coefs()),
    ];
    let sa = model.maxwellians.a.sqrt_values();
    let sb = model.maxwellians.b.sqrt_values();
    let u_hat: Vec<Vec<Complex64>> = u.comps.iter().map(|c| model.spectral.forward(c)).collect();

    let per_mode: Vec<[f64; N_TERMS]> = (0..nx)
        .into_par_iter()
        .map(|kx| {
            let kv = model.spectral.wavevector(kx);
            let kk = kv[0] * kv[0] + kv[1] * kv[1];
            // n[l], d[l], c[l] for l = 0..=2, then qn, qd, uu, rho
            let mut n = [0.0; 3];
            let mut d = [0.0; 3];
            let mut c = [0.0; 3];
            let mut qn = 0.0;
            let mut qd = 0.0;
            let mut levels: Vec<[Vec<Vec<Complex64>>; 2]> = Vec::new();
            for (idx, (hat, sqrt_m, faces)) in species.iter().enumerate() {
                let v = &hat[kx * nq..(kx + 1) * nq];
                qn += forms.moment(v);
                qd += forms.dirichlet(v, sqrt_m, faces, Some(&face_q2));
                let mut level = vec![v.to_vec()];
                for l in 0..=s.min(2) {
                    if l > 0 {
                        level = level.iter().flat_map(|g| forms.gradient(g)).collect();
                    }
                    for g in &level {
                        n[l] += forms.norm(g);
                        d[l] += forms.dirichlet(g, sqrt_m, faces, None);
                    }
                    if levels.len() <= l {
                        levels.push([Vec::new(), Vec::new()]);
                    }
                    levels[l][idx] = level.clone();
                }
            }
            for (l, pair) in levels.iter().enumerate() {
                for (ga, gb) in pair[0].iter().zip(&pair[1]) {
                    let comb: Vec<Complex64> = ga.iter().zip(gb).zip(sb).map(|((a, b), s)| a - 2.0 * s * b).collect();
                    c[l] += forms.norm(&comb);
                }
            }
            let uu: f64 = u_hat.iter().map(|h| h[kx].norm_sqr()).sum();
            let rho: Complex64 = species[0].0[kx * nq..(kx + 1) * nq].iter().zip(sa).map(|(v, s)| v * s).sum::<Complex64>() * forms.w;
            let rr = rho.norm_sqr();

            let si = s as i64;
            let ws = weight(kk, si);
            let wj = weight(kk, si - 1);
            let mut t = [0.0; N_TERMS];
            t[0] = ws * (uu + n[0]);
            t[1] = kk * ws * uu + ws * d[0] + ws * c[0];
            if s >= 1 {
                t[2] = wj * qn;
                t[3] = wj * qd + wj * c[0];
            }
            for l in 1..=s {
                let wl = weight(kk, si - l as i64);
                t[4] += eta.powi(l as i32) * wl * n[l];
                t[5] += eta.powi(l as i32) * wl * (d[l] + c[l]);
                t[6] += wl * n[l];
            }
            t[7] = ws * rr;
            t[8] = kk * ws * uu;
            t[9] = ws * rr;
            for l in 0..=s {
                t[10] += weight(kk, si - l as i64) * d[l];
                let hk: f64 = (0..=(si - l as i64)).map(|k| weight(kk, k)).sum();
                t[12] += hk * c[l];
            }
            if s >= 1 {
                t[11] = wj * qd;
            }
            t
        })
        .collect();
    let mut tot = [0.0; N_TERMS];
    for t in &per_mode {
        for i in 0..N_TERMS {
            tot[i] += t[i];
        }
    }
    let p = model.xgrid.length.powi(model.xgrid.dim as i32) / (nx * nx) as f64;
    tot.iter_mut().for_each(|v| *v *= p);
    let (e_s, d_s, e_j, d_j, e_mix, d_mix) = (tot[0], tot[1], tot[2], tot[3], tot[4], tot[5]);
    let (e_rho, d_rho) = (tot[7], tot[7]);
    Ok(SobolevReport {
        order: s,
        eta,
        e_s,
        d_s,
        e_j,
        d_j,
        e_mix,
        d_mix,
        e_rho,
        d_rho,
        energy_eta: e_s + eta * e_rho + eta * e_mix + eta * eta * e_j,
        dissipation_eta: d_s + eta * d_rho + eta * d_mix + eta * eta * d_j,
        energy_plain: e_s + tot[6] + e_j,
        dissipation_parts: [tot[8], tot[9], tot[10], tot[11], tot[12]],
    })
}
