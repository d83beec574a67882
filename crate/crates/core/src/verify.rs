//! Built-in structural identity suite on small lattices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{PotentialChoice, Scenario, SimConfig};
use crate::diagnostics::{cancellation_residual, QuadratureRule};
use crate::error::Result;
use crate::fluid::VelocityField;
use crate::micromacro::Model;
use crate::reaction::{reaction_substep, verify_gradient_flow, ReactionParams};

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

const SEED: u64 = 20_240_601;

fn models() -> Result<Vec<Model>> {
    let mut fene = SimConfig::new(2, 2, 4, 16, Scenario::Equilibrium);
    fene.potential.kind = PotentialChoice::Fene;
    fene.potential.k = Some(1.0);
    fene.potential.b0 = Some(3.0);
    [
        SimConfig::new(1, 1, 8, 64, Scenario::Equilibrium),
        SimConfig::new(2, 2, 8, 12, Scenario::Equilibrium),
        fene,
    ]
    .iter()
    .map(Model::new)
    .collect()
}

fn detailed_balance(models: &[Model]) -> f64 {
    let p = ReactionParams { k1: 1.0, k2: 1.0 };
    models
        .iter()
        .flat_map(|m| m.maxwellians.a.values().iter().zip(m.maxwellians.b.values()).map(move |(a, b)| p.rate(*a, *b).abs()))
        .fold(0.0, f64::max)
}

fn gradient_flow(models: &[Model], rng: &mut ChaCha8Rng) -> Result<f64> {
    let p = ReactionParams { k1: 1.0, k2: 1.0 };
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let m = &models[i % models.len()];
        let (ma, mb) = (m.maxwellians.a.values(), m.maxwellians.b.values());
        let a: Vec<f64> = ma.iter().map(|v| v * rng.gen_range(-3.0f64..3.0).exp()).collect();
        let b: Vec<f64> = mb.iter().map(|v| v * rng.gen_range(-3.0f64..3.0).exp()).collect();
        worst = worst.max(verify_gradient_flow(&a, &b, ma, mb, &p)?);
    }
    Ok(worst)
}

fn self_adjointness(models: &[Model], rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for m in models {
        for op in [&m.fp_a, &m.fp_b] {
            for _ in 0..10 {
                let f: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let g: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let lf = op.apply_fluctuation(&f)?;
                let lg = op.apply_fluctuation(&g)?;
                let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                let norm = (dot(&f, &f) * dot(&g, &g)).sqrt();
                worst = worst.max((dot(&lf, &g) - dot(&f, &lg)).abs() / norm);
            }
        }
    }
    Ok(worst)
}

fn annihilation(models: &[Model]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for m in models {
        for op in [&m.fp_a, &m.fp_b] {
            let out = op.apply_density(op.equilibrium())?;
            worst = out.iter().fold(worst, |w, v| w.max(v.abs()));
        }
    }
    Ok(worst)
}

/// Largest change of `2 psi_A + psi_B` in units of its last place.
fn reaction_mass(rng: &mut ChaCha8Rng) -> Result<f64> {
    let p = ReactionParams { k1: 1.0, k2: 1.0 };
    let n = 2000;
    let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
    let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
    let before: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x + y).collect();
    reaction_substep(&mut a, &mut b, 0.1, &p, true)?;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let after = 2.0 * a[k] + b[k];
        let ulp = f64::EPSILON * before[k].abs().max(f64::MIN_POSITIVE);
        worst = worst.max((after - before[k]).abs() / ulp);
    }
    Ok(worst)
}

fn cancellation(rule: QuadratureRule, rng: &mut ChaCha8Rng) -> Result<f64> {
    let m = Model::new(&SimConfig::new(2, 2, 8, 12, Scenario::Equilibrium))?;
    let (nx, nq) = (m.nx(), m.nq());
    let g = m.xgrid;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let modes: Vec<([f64; 2], f64, f64)> = (0..6)
            .map(|_| {
                let k = [rng.gen_range(-2i32..=2) as f64, rng.gen_range(-2i32..=2) as f64];
                (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3))
            })
            .collect();
        let mut u = VelocityField::zeros(&g);
        for i in 0..nx {
            let [x, y] = g.coords(i);
            for (k, a, p) in &modes {
                let d = a * (k[0] * x + k[1] * y + p).cos();
                u.comps[0][i] += k[1] * d;
                u.comps[1][i] -= k[0] * d;
            }
        }
        let coef: Vec<f64> = (0..4 * modes.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for mx in [&m.maxwellians.a, &m.maxwellians.b] {
            let s = mx.sqrt_values();
            let f: Vec<f64> = (0..nx * nq)
                .map(|i| {
                    let [x, y] = g.coords(i / nq);
                    let q = m.qgrid.node(i % nq);
                    let basis = [1.0, q[0], q[1], q[0] * q[1]];
                    let mut v = 0.0;
                    for (j, (k, _, p)) in modes.iter().enumerate() {
                        let wave = (k[0] * x + k[1] * y + p).sin();
                        for (b, c) in basis.iter().zip(&coef[4 * j..4 * j + 4]) {
                            v += c * b * wave;
                        }
                    }
                    v * s[i % nq]
                })
                .collect();
            worst = worst.max(cancellation_residual(&f, &u, mx, &m.qgrid, &m.spectral, rule)?);
        }
    }
    Ok(worst)
}

fn constraint() -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut configs = Vec::new();
    for scenario in [Scenario::KernelBump, Scenario::RandomSmooth] {
        configs.push(SimConfig::new(1, 1, 16, 32, scenario));
        configs.push(SimConfig::new(2, 2, 8, 12, scenario));
    }
    configs.push(SimConfig::new(2, 2, 8, 12, Scenario::Shear));
    configs.push(SimConfig::new(2, 2, 8, 12, Scenario::TaylorGreen));
    for mut c in configs {
        c.amplitude = 0.1;
        let m = Model::new(&c)?;
        let s = m.initial_state()?;
        worst = worst.max(m.constraint_residual(&s));
    }
    Ok(worst)
}

/// Runs every structural check. `inject_mismatch` evaluates the cancellation
/// pairing with shifted quadrature nodes, which must make that check fail.
pub fn structural_suite(inject_mismatch: bool) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let models = models()?;
    let rule = if inject_mismatch { QuadratureRule::Shifted } else { QuadratureRule::Shared };
    Ok(vec![
        Check::new("detailed_balance", detailed_balance(&models), 1e-13),
        Check::new("gradient_flow_identity", gradient_flow(&models, &mut rng)?, 1e-12),
        Check::new("fp_self_adjointness", self_adjointness(&models, &mut rng)?, 1e-12),
        Check::new("equilibrium_annihilation", annihilation(&models)?, 1e-13),
        Check::new("reaction_mass_ulps", reaction_mass(&mut rng)?, 2.0),
        Check::new("cancellation_residual", cancellation(rule, &mut rng)?, 1e-11),
        Check::new("density_constraint", constraint()?, 1e-13),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_negative_control_fails() {
        let checks = structural_suite(false).unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        let injected = structural_suite(true).unwrap();
        let failing: Vec<_> = injected.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failing, ["cancellation_residual"]);
    }
}
