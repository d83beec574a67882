use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, SimState};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::fluid::{leray_project, taylor_green, VelocityField};

/// Shifts `f_A` along `sqrt(M_A)` so that `2 rho_A + rho_B = 0` at every physical node.
pub(crate) fn enforce_constraint(model: &Model, f_a: &mut [f64], f_b: &[f64]) {
    let nq = model.nq();
    let w = model.qgrid.weight();
    let sa = model.maxwellians.a.sqrt_values();
    let sb = model.maxwellians.b.sqrt_values();
    let mean_a = model.maxwellians.mean_a;
    for (fa, fb) in f_a.chunks_mut(nq).zip(f_b.chunks(nq)) {
        let rho_a: f64 = fa.iter().zip(sa).map(|(f, s)| f * s).sum::<f64>() * w;
        let rho_b: f64 = fb.iter().zip(sb).map(|(f, s)| f * s).sum::<f64>() * w;
        let shift = (2.0 * rho_a + rho_b) / (2.0 * mean_a);
        for (f, s) in fa.iter_mut().zip(sa) {
            *f -= shift * s;
        }
    }
}

fn positivity_error(e: Error, amplitude: f64) -> Error {
    match e {
        Error::Domain(msg) => Error::InvalidParameter(format!("amplitude {amplitude} too large for positivity: {msg}")),
        other => other,
    }
}

fn kernel_bump(model: &Model) -> Result<SimState> {
    let eps = model.config.amplitude;
    let nq = model.nq();
    let k = 2.0 * std::f64::consts::PI / model.xgrid.length;
    let sa = model.maxwellians.a.sqrt_values();
    let sb = model.maxwellians.b.sqrt_values();
    let mut f_a = Vec::with_capacity(model.nx() * nq);
    let mut f_b = Vec::with_capacity(model.nx() * nq);
    for x in 0..model.nx() {
        let c = eps * (k * model.xgrid.coords(x)[0]).cos();
        f_a.extend(sa.iter().map(|s| c * s));
        f_b.extend(sb.iter().map(|s| c * s));
    }
    enforce_constraint(model, &mut f_a, &f_b);
    model
        .state_from_fluctuations(&f_a, &f_b, VelocityField::zeros(&model.xgrid))
        .map_err(|e| positivity_error(e, eps))
}

fn random_profile(model: &Model, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = 2.0 * std::f64::consts::PI / model.xgrid.length;
    let r = model.qgrid.radius();
    let d_x = model.xgrid.dim;
    let d_q = model.qgrid.dim();
    let mut terms = Vec::new();
    for _ in 0..4 {
        let m0 = rng.gen_range(-2i32..=2) as f64;
        let m1 = if d_x == 2 { rng.gen_range(-2i32..=2) as f64 } else { 0.0 };
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let basis = rng.gen_range(0..if d_q == 2 { 4 } else { 3 });
        let amp = rng.gen_range(-1.0..1.0);
        terms.push((m0, m1, phase, basis, amp));
    }
    let nq = model.nq();
    let mut g = vec![0.0; model.nx() * nq];
    for x in 0..model.nx() {
        let xc = model.xgrid.coords(x);
        for (j, q) in model.qgrid.nodes().iter().enumerate() {
            let mut v = 0.0;
            for &(m0, m1, phase, basis, amp) in &terms {
                let chi = match basis {
                    0 => 1.0,
                    1 => q[0] / r,
                    2 if d_q == 1 => q[0] * q[0] / (r * r),
                    2 => q[1] / r,
                    _ => (q[0] * q[0] + q[1] * q[1]) / (r * r),
                };
                v += amp * (k * (m0 * xc[0] + m1 * xc[1]) + phase).cos() * chi;
            }
            g[x * nq + j] = v;
        }
    }
    let top = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top > 0.0 {
        g.iter_mut().for_each(|v| *v /= top);
    }
    g
}

fn random_smooth(model: &Model) -> Result<SimState> {
    let eps = model.config.amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
    let nq = model.nq();
    let ga = random_profile(model, &mut rng);
    let gb = random_profile(model, &mut rng);
    let sa = model.maxwellians.a.sqrt_values();
    let sb = model.maxwellians.b.sqrt_values();
    let mut f_a: Vec<f64> = ga.iter().enumerate().map(|(i, g)| eps * g * sa[i % nq]).collect();
    let f_b: Vec<f64> = gb.iter().enumerate().map(|(i, g)| eps * g * sb[i % nq]).collect();
    enforce_constraint(model, &mut f_a, &f_b);
    let u = if model.xgrid.dim == 2 {
        let k = 2.0 * std::f64::consts::PI / model.xgrid.length;
        let modes: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                let mut m0 = rng.gen_range(-2i32..=2) as f64;
                let m1 = rng.gen_range(-2i32..=2) as f64;
                if m0 == 0.0 && m1 == 0.0 {
                    m0 = 1.0;
                }
                (m0, m1, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.0..1.0))
            })
            .collect();
        // velocity of the stream function sum a cos(k m.x + phase)
        let mut comps = vec![vec![0.0; model.nx()]; 2];
        for x in 0..model.nx() {
            let c = model.xgrid.coords(x);
            for &(m0, m1, ph, a) in &modes {
                let s = -a * k * (k * (m0 * c[0] + m1 * c[1]) + ph).sin();
                comps[0][x] += s * m1;
                comps[1][x] -= s * m0;
            }
        }
        let u = leray_project(&VelocityField { comps }, &model.spectral)?;
        let top = u.max_abs();
        VelocityField { comps: u.comps.into_iter().map(|c| c.into_iter().map(|v| eps * v / top).collect()).collect() }
    } else {
        VelocityField::zeros(&model.xgrid)
    };
    model.state_from_fluctuations(&f_a, &f_b, u).map_err(|e| positivity_error(e, eps))
}

pub(crate) fn initial_state(model: &Model) -> Result<SimState> {
    let eps = model.config.amplitude;
    match model.config.scenario {
        Scenario::Equilibrium => Ok(model.equilibrium_state()),
        Scenario::KernelBump => kernel_bump(model),
        Scenario::RandomSmooth => random_smooth(model),
        Scenario::Shear => {
            let mut state = model.equilibrium_state();
            let k = 2.0 * std::f64::consts::PI / model.xgrid.length;
            state.u.comps[0] = (0..model.nx()).map(|x| eps * (k * model.xgrid.coords(x)[1]).sin()).collect();
            Ok(state)
        }
        Scenario::TaylorGreen => {
            let mut state = model.equilibrium_state();
            state.u = taylor_green(&model.spectral, eps)?;
            Ok(state)
        }
    }
}
