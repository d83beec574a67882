use micellar_core::diagnostics::*;
use micellar_core::fluid::{taylor_green, VelocityField};
use micellar_core::{Model, Scenario, SimConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn model(d_x: usize, d_q: usize, n_x: usize, n_q: usize) -> Model {
    Model::new(&SimConfig::new(d_x, d_q, n_x, n_q, Scenario::Equilibrium)).unwrap()
}

/// Smooth random fluctuation pair obeying the number-density constraint.
fn random_fluctuations(m: &Model, rng: &mut ChaCha8Rng, amp: f64) -> (Vec<f64>, Vec<f64>) {
    let (nx, nq) = (m.nx(), m.nq());
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sa = m.maxwellians.a.sqrt_values();
    let sb = m.maxwellians.b.sqrt_values();
    let mut f_a = vec![0.0; nx * nq];
    let mut f_b = vec![0.0; nx * nq];
    for x in 0..nx {
        let xc = m.xgrid.coords(x);
        let sx = (xc[0] + c[0]).sin() + c[1] * (xc[1] + c[2]).cos();
        let cx = (2.0 * xc[0] - xc[1] + c[3]).cos();
        for k in 0..nq {
            let q = m.qgrid.node(k);
            f_b[x * nq + k] = amp * sb[k] * (sx * (1.0 + c[4] * q[0]) + cx * c[5] * q[0] * q[1]);
            f_a[x * nq + k] = amp * sa[k] * (c[6] * sx * q[0] * q[0] + c[7] * cx * q[1]);
        }
    }
    let w = m.qgrid.weight();
    for x in 0..nx {
        let ra: f64 = (0..nq).map(|k| f_a[x * nq + k] * sa[k]).sum::<f64>() * w;
        let rb: f64 = (0..nq).map(|k| f_b[x * nq + k] * sb[k]).sum::<f64>() * w;
        let shift = (2.0 * ra + rb) / (2.0 * m.maxwellians.mean_a);
        for k in 0..nq {
            f_a[x * nq + k] -= shift * sa[k];
        }
    }
    (f_a, f_b)
}

#[test]
fn relative_entropy_series_matches_closed_form() {
    for z in [9.99e-4, -9.99e-4, 1.001e-3, -1.001e-3] {
        let exact = (1.0 + z) * f64::ln_1p(z) - z;
        assert!((relative_entropy_h(z) - exact).abs() <= 1e-9 * exact);
    }
    assert_eq!(relative_entropy_h(0.0), 0.0);
    assert!((relative_entropy_h(-1.0) - 1.0).abs() < 1e-15);
    assert!(relative_entropy_density(2.0, 1.0) > 0.0);
}

proptest! {
    #[test]
    fn relative_entropy_is_nonnegative(psi in 1e-12f64..1e3, m in 1e-12f64..1e3) {
        prop_assert!(relative_entropy_density(psi, m) >= 0.0);
    }
}

#[test]
fn equilibrium_budget_vanishes() {
    let m = model(2, 2, 8, 16);
    let s = m.equilibrium_state();
    let r = energy_report(&m, &s).unwrap();
    assert_eq!(r.kinetic, 0.0);
    assert_eq!(r.free_energy, 0.0);
    assert_eq!(r.d_total, 0.0);
    let (f_a, f_b) = m.fluctuations(&s).unwrap();
    let sob = sobolev_report(&m, &f_a, &f_b, &s.u, 2).unwrap();
    assert_eq!(sob.energy_eta, 0.0);
    assert_eq!(sob.dissipation_eta, 0.0);
    assert_eq!(state_cancellation_residual(&m, &s).unwrap(), 0.0);
}

#[test]
fn taylor_green_kinetic_energy_and_dissipation() {
    let m = model(2, 2, 16, 8);
    let a = 0.3;
    let mut s = m.equilibrium_state();
    s.u = taylor_green(&m.spectral, a).unwrap();
    let r = energy_report(&m, &s).unwrap();
    assert!((r.kinetic - PI * PI * a * a).abs() < 1e-12);
    assert!((r.d_u - 4.0 * PI * PI * m.fluid.viscosity * a * a).abs() < 1e-11);
    assert_eq!(r.free_energy, 0.0);
}

#[test]
fn small_perturbation_dissipation_matches_quadratic_form() {
    let m = model(1, 1, 4, 64);
    let g: Vec<f64> = m.qgrid.nodes().iter().map(|q| q[0] * (-0.1 * q[0] * q[0]).exp()).collect();
    let quad = m.fp_b.dirichlet_form(&g).unwrap() * m.nx() as f64 * m.xgrid.cell_volume() * m.fluid.coupling;
    let mut prev = f64::INFINITY;
    for eps in [1e-2, 1e-3] {
        let mut s = m.equilibrium_state();
        let mb = m.maxwellians.b.values();
        for x in 0..m.nx() {
            for (k, gk) in g.iter().enumerate() {
                s.psi_b[x * m.nq() + k] = mb[k] * (eps * gk).exp();
            }
        }
        let r = energy_report(&m, &s).unwrap();
        let err = (r.d_micro / (eps * eps * quad) - 1.0).abs();
        assert!(err < 10.0 * eps, "eps {eps}: {err}");
        assert!(err < prev);
        prev = err;
    }
}

#[test]
fn kernel_mode_density_energy() {
    let m = model(2, 2, 8, 16);
    let (nx, nq) = (m.nx(), m.nq());
    let sa = m.maxwellians.a.sqrt_values();
    let sb = m.maxwellians.b.sqrt_values();
    let (mean_a, mean_b) = (m.maxwellians.mean_a, m.maxwellians.mean_b);
    let f_b: Vec<f64> = (0..nx * nq).map(|i| sb[i % nq]).collect();
    let f_a: Vec<f64> = (0..nx * nq).map(|i| -mean_b / (2.0 * mean_a) * sa[i % nq]).collect();
    let u = VelocityField::zeros(&m.xgrid);
    let r = sobolev_report(&m, &f_a, &f_b, &u, 0).unwrap();
    // direct quadrature of the tetramer number density
    let w = m.qgrid.weight();
    let rho_a: f64 = (0..nq).map(|k| f_a[k] * sa[k]).sum::<f64>() * w;
    let rho_b: f64 = (0..nq).map(|k| f_b[k] * sb[k]).sum::<f64>() * w;
    assert!((rho_b - mean_b).abs() < 1e-14);
    assert!((rho_a + mean_b / 2.0).abs() < 1e-14);
    let vol = m.xgrid.length.powi(2);
    assert!((r.e_rho - rho_a * rho_a * vol).abs() < 1e-12 * r.e_rho);
}

#[test]
fn sobolev_order_above_cap_is_rejected() {
    let mut c = SimConfig::new(1, 1, 8, 16, Scenario::Equilibrium);
    c.sobolev_s_max = 1;
    let m = Model::new(&c).unwrap();
    let z = vec![0.0; m.nx() * m.nq()];
    let u = VelocityField::zeros(&m.xgrid);
    assert!(sobolev_report(&m, &z, &z, &u, 2).is_err());
}

#[test]
fn sobolev_equivalence_and_signs_on_random_states() {
    let m = model(2, 2, 8, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let amp = rng.gen_range(1e-3..1.0);
        let (f_a, f_b) = random_fluctuations(&m, &mut rng, amp);
        let mut u = taylor_green(&m.spectral, rng.gen_range(-1.0..1.0)).unwrap();
        u.comps[0].iter_mut().for_each(|v| *v *= 0.5);
        u.comps[1].iter_mut().for_each(|v| *v *= 0.5);
        for s in 0..=2 {
            let r = sobolev_report(&m, &f_a, &f_b, &u, s).unwrap();
            assert!(r.equivalence_holds(), "{r:?}");
            for v in [r.e_s, r.d_s, r.e_j, r.d_j, r.e_mix, r.d_mix, r.e_rho, r.d_rho] {
                assert!(v >= 0.0);
            }
            assert!(r.dissipation_parts.iter().all(|p| *p >= 0.0));
        }
    }
}

fn divergence_free(m: &Model, rng: &mut ChaCha8Rng) -> VelocityField {
    // stream function sum_i c_i sin(k_i . x + p_i), sharing modes with the fluctuations
    let modes = [[1.0, 0.0], [0.0, 1.0], [2.0, -1.0], [1.0, 2.0]];
    let c: Vec<[f64; 2]> = modes.iter().map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.0)]).collect();
    let g = m.xgrid;
    let (mut u0, mut u1) = (vec![0.0; g.len()], vec![0.0; g.len()]);
    for i in 0..g.len() {
        let [x, y] = g.coords(i);
        for (k, [a, p]) in modes.iter().zip(&c) {
            let d = a * (k[0] * x + k[1] * y + p).cos();
            u0[i] += k[1] * d;
            u1[i] -= k[0] * d;
        }
    }
    VelocityField { comps: vec![u0, u1] }
}

#[test]
fn cancellation_vanishes_on_trivial_inputs() {
    let m = model(2, 2, 8, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, f_b) = random_fluctuations(&m, &mut rng, 0.1);
    let u = divergence_free(&m, &mut rng);
    let zero_u = VelocityField::zeros(&m.xgrid);
    let zero_f = vec![0.0; f_b.len()];
    let b = &m.maxwellians.b;
    assert_eq!(cancellation_residual(&f_b, &zero_u, b, &m.qgrid, &m.spectral, QuadratureRule::Shared).unwrap(), 0.0);
    assert_eq!(cancellation_residual(&zero_f, &u, b, &m.qgrid, &m.spectral, QuadratureRule::Shared).unwrap(), 0.0);
}

#[test]
fn cancellation_holds_with_shared_quadrature() {
    let m = model(2, 2, 8, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (f_a, f_b) = random_fluctuations(&m, &mut rng, 1.0);
        let u = divergence_free(&m, &mut rng);
        for (f, mx) in [(&f_a, &m.maxwellians.a), (&f_b, &m.maxwellians.b)] {
            let r = cancellation_residual(f, &u, mx, &m.qgrid, &m.spectral, QuadratureRule::Shared).unwrap();
            assert!(r < 1e-11, "{r}");
        }
    }
}

#[test]
fn shifted_quadrature_breaks_cancellation_at_first_order() {
    // a pure first-moment fluctuation makes the shift error exactly linear in the shift
    let mut res = Vec::new();
    for n_q in [16, 32, 64] {
        let m = model(2, 2, 8, n_q);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = divergence_free(&m, &mut rng);
        let sb = m.maxwellians.b.sqrt_values();
        let nq = m.nq();
        let f: Vec<f64> = (0..m.nx() * nq)
            .map(|i| {
                let [x, y] = m.xgrid.coords(i / nq);
                let q = m.qgrid.node(i % nq);
                sb[i % nq] * (x.sin() * q[0] + (2.0 * x - y).cos() * q[1])
            })
            .collect();
        let r = cancellation_residual(&f, &u, &m.maxwellians.b, &m.qgrid, &m.spectral, QuadratureRule::Shifted).unwrap();
        res.push(r);
    }
    assert!(res[0] > 1e-3, "{res:?}");
    for w in res.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.9..2.1).contains(&ratio), "{res:?}");
    }
}

#[test]
fn energy_law_residual_is_centred() {
    let a = EnergyReport { total: 1.0, d_total: 2.0, ..Default::default() };
    let b = EnergyReport { total: 0.98, d_total: 2.0, ..Default::default() };
    assert!((energy_law_residual(&a, &b, 0.01) - 0.0).abs() < 1e-12);
}
