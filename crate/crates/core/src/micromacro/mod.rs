//! The coupled flow-kinetics system and its operator-split time stepper.

mod kinetic;
mod scenario;

pub use kinetic::{drift_apply, drift_substep, embed_gradient, transport_spectral, transport_upwind, TRACE_TOLERANCE};

use crate::config::{SimConfig, TransportKind};
use crate::config_space::{normalize_maxwellians, FokkerPlanckOperator, Maxwellian, Maxwellians, PotentialKind, QGrid};
use crate::error::{check_len, Error, Result};
use crate::fluid::{face_velocities, ns_step, velocity_gradient, FluidParams, Spectral, StressKernel, VelocityField, XGrid};
use crate::reaction::{reaction_substep, ReactionParams};

/// Density floor applied when `log_floor` is enabled.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// `(psi - M) / sqrt(M)` slice by slice.
pub fn encode_fluctuation(psi: &[f64], m: &Maxwellian) -> Result<Vec<f64>> {
    let nq = m.len();
    if psi.len() % nq != 0 {
        return Err(Error::GridMismatch(format!("field length {} not a multiple of {nq}", psi.len())));
    }
    let (mv, sv) = (m.values(), m.sqrt_values());
    Ok(psi.iter().enumerate().map(|(i, p)| (p - mv[i % nq]) / sv[i % nq]).collect())
}

/// `M + sqrt(M) f`, rejecting nonpositive results.
pub fn decode_fluctuation(f: &[f64], m: &Maxwellian) -> Result<Vec<f64>> {
    let nq = m.len();
    if f.len() % nq != 0 {
        return Err(Error::GridMismatch(format!("field length {} not a multiple of {nq}", f.len())));
    }
    let (mv, sv) = (m.values(), m.sqrt_values());
    let psi: Vec<f64> = f.iter().enumerate().map(|(i, v)| mv[i % nq] + sv[i % nq] * v).collect();
    if let Some(p) = psi.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Domain(format!("fluctuation decodes to nonpositive density {p}")));
    }
    Ok(psi)
}

/// Velocity and both densities, laid out x-major then q.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: VelocityField,
    pub psi_a: Vec<f64>,
    pub psi_b: Vec<f64>,
}

/// Discretised model: lattices, equilibria, operators and parameters.
#[derive(Debug)]
pub struct Model {
    pub config: SimConfig,
    pub xgrid: XGrid,
    pub spectral: Spectral,
    pub qgrid: QGrid,
    pub maxwellians: Maxwellians,
    pub fp_a: FokkerPlanckOperator,
    pub fp_b: FokkerPlanckOperator,
    pub reaction: ReactionParams,
    pub fluid: FluidParams,
    pub stress: StressKernel,
}

impl Model {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let reaction = ReactionParams::new(config.k1, config.k2)?;
        if !reaction.is_balanced() {
            return Err(Error::InvalidParameter(format!(
                "k1 = {} and k2 = {} must be equal: the equilibria satisfy M_A = M_B^2",
                config.k1, config.k2
            )));
        }
        let fluid = FluidParams::new(config.mu, config.lambda)?;
        let xgrid = XGrid::new(config.d_x, config.n_x, config.box_length)?;
        let pot_b = config.potential.dimer(config.d_q)?;
        let qgrid = match pot_b.kind {
            PotentialKind::Hookean { .. } => {
                let r = config.q_radius.unwrap_or_else(|| pot_b.default_radius());
                QGrid::boxed(config.d_q, config.n_q, r)?
            }
            PotentialKind::Fene { extension, .. } => {
                if let Some(r) = config.q_radius {
                    if (r - extension).abs() > 1e-12 * extension {
                        return Err(Error::InvalidParameter(format!(
                            "q_radius {r} must equal b0 = {extension} for FENE springs"
                        )));
                    }
                }
                QGrid::ball(config.d_q, config.n_q, extension)?
            }
        };
        let maxwellians = normalize_maxwellians(&pot_b, &qgrid)?;
        let fp_a = FokkerPlanckOperator::new(&qgrid, &maxwellians.a)?;
        let fp_b = FokkerPlanckOperator::new(&qgrid, &maxwellians.b)?;
        let stress = StressKernel::new(&maxwellians, &qgrid, config.d_x);
        Ok(Self {
            config: config.clone(),
            spectral: Spectral::new(xgrid),
            xgrid,
            qgrid,
            maxwellians,
            fp_a,
            fp_b,
            reaction,
            fluid,
            stress,
        })
    }

    pub fn nx(&self) -> usize {
        self.xgrid.len()
    }
    pub fn nq(&self) -> usize {
        self.qgrid.len()
    }
    /// Quadrature weight of one phase-space node.
    pub fn cell_weight(&self) -> f64 {
        self.xgrid.cell_volume() * self.qgrid.weight()
    }

    pub fn equilibrium_state(&self) -> SimState {
        let nx = self.nx();
        SimState {
            t: 0.0,
            u: VelocityField::zeros(&self.xgrid),
            psi_a: self.maxwellians.a.values().repeat(nx),
            psi_b: self.maxwellians.b.values().repeat(nx),
        }
    }

    /// Initial state of the configured scenario.
    pub fn initial_state(&self) -> Result<SimState> {
        scenario::initial_state(self)
    }

    pub fn state_from_fluctuations(&self, f_a: &[f64], f_b: &[f64], u: VelocityField) -> Result<SimState> {
        check_len("tetramer fluctuation", f_a.len(), self.nx() * self.nq())?;
        check_len("dimer fluctuation", f_b.len(), self.nx() * self.nq())?;
        Ok(SimState {
            t: 0.0,
            u,
            psi_a: decode_fluctuation(f_a, &self.maxwellians.a)?,
            psi_b: decode_fluctuation(f_b, &self.maxwellians.b)?,
        })
    }

    pub fn fluctuations(&self, state: &SimState) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            encode_fluctuation(&state.psi_a, &self.maxwellians.a)?,
            encode_fluctuation(&state.psi_b, &self.maxwellians.b)?,
        ))
    }

    /// Number-density fluctuations `int (psi - M) dq` at every physical node.
    pub fn number_densities(&self, state: &SimState) -> (Vec<f64>, Vec<f64>) {
        let nq = self.nq();
        let w = self.qgrid.weight();
        let density = |psi: &[f64], m: &[f64]| -> Vec<f64> {
            psi.chunks(nq).map(|s| s.iter().zip(m).map(|(p, m)| p - m).sum::<f64>() * w).collect()
        };
        (
            density(&state.psi_a, self.maxwellians.a.values()),
            density(&state.psi_b, self.maxwellians.b.values()),
        )
    }

    /// `max_x |2 rho_A + rho_B|`.
    pub fn constraint_residual(&self, state: &SimState) -> f64 {
        let (ra, rb) = self.number_densities(state);
        ra.iter().zip(&rb).fold(0.0, |m, (a, b)| m.max((2.0 * a + b).abs()))
    }

    /// `int int (2 psi_A + psi_B) dq dx`.
    pub fn total_mass(&self, state: &SimState) -> f64 {
        let s: f64 = state.psi_a.iter().zip(&state.psi_b).map(|(a, b)| 2.0 * a + b).sum();
        s * self.cell_weight()
    }

    /// Stable step for the current state.
    pub fn default_dt(&self, state: &SimState) -> Result<f64> {
        let mut dt: f64 = 0.5;
        let umax = state.u.max_abs();
        if umax > 0.0 {
            dt = dt.min(0.4 * self.xgrid.spacing() / umax);
        }
        if self.xgrid.dim >= 2 && self.qgrid.dim() >= 2 {
            let kappa = velocity_gradient(&state.u, &self.spectral)?;
            let kmax = kappa.iter().map(|k| k.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            if kmax > 0.0 {
                dt = dt.min(0.4 * self.qgrid.spacing() / (kmax * self.qgrid.radius()));
            }
        }
        Ok(dt)
    }

    fn kinetic_stage(&self, psi_a: &mut [f64], psi_b: &mut [f64], u: &VelocityField, dt: f64) -> Result<()> {
        let order = self.config.scheme_order;
        let limiter = self.config.reaction_limiter;
        let moving = u.max_abs() > 0.0;
        let faces = if moving && self.config.transport == TransportKind::Upwind {
            Some(face_velocities(u, &self.spectral)?)
        } else {
            None
        };
        let kappa: Option<Vec<[f64; 4]>> = if moving && self.xgrid.dim >= 2 && self.qgrid.dim() >= 2 {
            let g = velocity_gradient(u, &self.spectral)?;
            Some(g.iter().map(|k| embed_gradient(k, self.xgrid.dim, self.qgrid.dim())).collect())
        } else {
            None
        };
        let transport = |psi: &mut [f64], h: f64| -> Result<()> {
            if !moving {
                return Ok(());
            }
            match &faces {
                Some(f) => transport_upwind(psi, f, self.xgrid.n, self.xgrid.spacing(), h),
                None => transport_spectral(psi, &u.comps, &self.spectral, h),
            }
        };
        let drift = |psi: &mut [f64], h: f64| -> Result<()> {
            match &kappa {
                Some(k) => drift_substep(psi, k, &self.qgrid, h),
                None => Ok(()),
            }
        };
        if order == 1 {
            reaction_substep(psi_a, psi_b, dt, &self.reaction, limiter)?;
            for (psi, fp) in [(&mut *psi_a, &self.fp_a), (&mut *psi_b, &self.fp_b)] {
                transport(psi, dt)?;
                drift(psi, dt)?;
                fp.evolve(psi, dt)?;
            }
            positivity_check(psi_a, psi_b, self.config.log_floor)
        } else {
            let half = 0.5 * dt;
            reaction_substep(psi_a, psi_b, half, &self.reaction, limiter)?;
            for (psi, fp) in [(&mut *psi_a, &self.fp_a), (&mut *psi_b, &self.fp_b)] {
                transport(psi, half)?;
                drift(psi, half)?;
                fp.evolve(psi, dt)?;
                drift(psi, half)?;
                transport(psi, half)?;
            }
            positivity_check(psi_a, psi_b, self.config.log_floor)?;
            reaction_substep(psi_a, psi_b, half, &self.reaction, limiter)?;
            positivity_check(psi_a, psi_b, self.config.log_floor)
        }
    }

    /// Kinetic update with the velocity frozen.
    pub fn smoluchowski_step(&self, psi_a: &mut [f64], psi_b: &mut [f64], u: &VelocityField, dt: f64) -> Result<()> {
        check_len("tetramer density", psi_a.len(), self.nx() * self.nq())?;
        check_len("dimer density", psi_b.len(), self.nx() * self.nq())?;
        self.kinetic_stage(psi_a, psi_b, u, dt)
    }

    /// Polymer stress of a state.
    pub fn stress(&self, state: &SimState) -> Result<Vec<[f64; 4]>> {
        self.stress.evaluate(&state.psi_a, &state.psi_b, self.fluid.coupling)
    }

    /// Advances `state` by `dt`.
    ///
    /// Order 1 is a Lie splitting with the flow lagged by one step. Order 2
    /// brackets the kinetic Strang splitting by two half steps of the flow.
    pub fn step(&self, state: &mut SimState, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        let flow = self.xgrid.dim >= 2;
        let order = self.config.scheme_order;
        let mut psi_a = state.psi_a.clone();
        let mut psi_b = state.psi_b.clone();
        let u_next = if order == 1 {
            self.kinetic_stage(&mut psi_a, &mut psi_b, &state.u, dt)?;
            if flow {
                let tau = self.stress.evaluate(&psi_a, &psi_b, self.fluid.coupling)?;
                ns_step(&state.u, &tau, dt, &self.fluid, &self.spectral, 1)?
            } else {
                state.u.clone()
            }
        } else if flow {
            let tau = self.stress(state)?;
            let u_half = ns_step(&state.u, &tau, 0.5 * dt, &self.fluid, &self.spectral, 2)?;
            self.kinetic_stage(&mut psi_a, &mut psi_b, &u_half, dt)?;
            let tau = self.stress.evaluate(&psi_a, &psi_b, self.fluid.coupling)?;
            ns_step(&u_half, &tau, 0.5 * dt, &self.fluid, &self.spectral, 2)?
        } else {
            self.kinetic_stage(&mut psi_a, &mut psi_b, &state.u, dt)?;
            state.u.clone()
        };
        state.psi_a = psi_a;
        state.psi_b = psi_b;
        state.u = u_next;
        state.t += dt;
        Ok(())
    }
}

fn positivity_check(psi_a: &mut [f64], psi_b: &mut [f64], floor: bool) -> Result<()> {
    for psi in [psi_a, psi_b] {
        for p in psi.iter_mut() {
            if !(*p > 0.0) {
                if floor && p.is_finite() {
                    *p = DENSITY_FLOOR;
                } else {
                    return Err(Error::Domain(format!("density lost positivity: {p}")));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;
    use crate::diagnostics::energy_report;

    fn config(d_x: usize, d_q: usize, n_x: usize, n_q: usize, scenario: Scenario) -> SimConfig {
        let mut c = SimConfig::new(d_x, d_q, n_x, n_q, scenario);
        c.dt = Some(0.01);
        c
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = Model::new(&config(2, 2, 8, 16, Scenario::Equilibrium)).unwrap();
        let mut s = m.initial_state().unwrap();
        let s0 = s.clone();
        for _ in 0..20 {
            m.step(&mut s, 0.01).unwrap();
        }
        assert!(s.u.max_abs() == 0.0);
        for (a, b) in s.psi_a.iter().zip(&s0.psi_a).chain(s.psi_b.iter().zip(&s0.psi_b)) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn random_state_conserves_mass_and_constraint() {
        let mut c = config(2, 2, 8, 12, Scenario::RandomSmooth);
        c.amplitude = 0.05;
        c.seed = 7;
        let m = Model::new(&c).unwrap();
        let mut s = m.initial_state().unwrap();
        assert!(s.u.max_abs() > 0.0);
        let mass0 = m.total_mass(&s);
        assert!(m.constraint_residual(&s) < 1e-13);
        for _ in 0..20 {
            m.step(&mut s, 0.01).unwrap();
        }
        assert!(((m.total_mass(&s) - mass0) / mass0).abs() < 1e-12);
        assert!(m.constraint_residual(&s) < 1e-10);
        assert!(s.psi_a.iter().chain(&s.psi_b).all(|v| *v > 0.0));
    }

    #[test]
    fn relaxation_lowers_free_energy() {
        let mut c = config(1, 1, 4, 32, Scenario::Equilibrium);
        c.k1 = 0.0;
        c.k2 = 0.0;
        let m = Model::new(&c).unwrap();
        let mut s = m.initial_state().unwrap();
        let nq = m.nq();
        for (i, p) in s.psi_b.iter_mut().enumerate() {
            let q = m.qgrid.node(i % nq)[0];
            *p *= 1.0 + 0.1 * q / (1.0 + q * q);
        }
        let mut prev = energy_report(&m, &s).unwrap().free_energy;
        for _ in 0..30 {
            m.step(&mut s, 0.05).unwrap();
            let f = energy_report(&m, &s).unwrap().free_energy;
            assert!(f < prev);
            prev = f;
        }
    }

    fn global_error(order: u8, dt: f64, reference: &SimState, m_cfg: &SimConfig) -> f64 {
        let mut c = m_cfg.clone();
        c.scheme_order = order;
        let m = Model::new(&c).unwrap();
        let mut s = m.initial_state().unwrap();
        let n = (0.5 / dt).round() as usize;
        for _ in 0..n {
            m.step(&mut s, dt).unwrap();
        }
        s.psi_b.iter().zip(&reference.psi_b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn splitting_orders() {
        let mut c = config(1, 1, 4, 32, Scenario::KernelBump);
        c.amplitude = 0.3;
        let m = Model::new(&c).unwrap();
        let mut reference = m.initial_state().unwrap();
        for _ in 0..400 {
            m.step(&mut reference, 0.5 / 400.0).unwrap();
        }
        let r2 = global_error(2, 0.05, &reference, &c) / global_error(2, 0.025, &reference, &c);
        assert!((3.4..4.6).contains(&r2), "order 2 ratio {r2}");
        let mut c1 = c.clone();
        c1.scheme_order = 1;
        let m1 = Model::new(&c1).unwrap();
        let mut ref1 = m1.initial_state().unwrap();
        for _ in 0..4000 {
            m1.step(&mut ref1, 0.5 / 4000.0).unwrap();
        }
        let r1 = global_error(1, 0.05, &ref1, &c1) / global_error(1, 0.025, &ref1, &c1);
        assert!((1.7..2.3).contains(&r1), "order 1 ratio {r1}");
    }

    #[test]
    fn sheared_equilibrium_is_stretched_and_conserves_mass() {
        let mut c = config(2, 2, 8, 16, Scenario::Shear);
        c.amplitude = 0.5;
        let m = Model::new(&c).unwrap();
        let s0 = m.initial_state().unwrap();
        let mut s = s0.clone();
        for _ in 0..5 {
            m.step(&mut s, 0.01).unwrap();
        }
        assert!(((m.total_mass(&s) - m.total_mass(&s0)) / m.total_mass(&s0)).abs() < 1e-12);
        let tau = m.stress(&s).unwrap();
        assert!(tau.iter().any(|t| t[1].abs() > 1e-6));
    }

    #[test]
    fn invalid_configurations() {
        assert!(matches!(Model::new(&config(2, 1, 8, 16, Scenario::Equilibrium)), Err(Error::UnsupportedRegime(_))));
        let mut c = config(1, 1, 4, 16, Scenario::Equilibrium);
        c.k2 = 2.0;
        assert!(matches!(Model::new(&c), Err(Error::InvalidParameter(_))));
        let mut c = config(1, 1, 4, 16, Scenario::KernelBump);
        c.amplitude = 0.9;
        let m = Model::new(&c).unwrap();
        assert!(matches!(m.initial_state(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn fluctuation_round_trip() {
        let m = Model::new(&config(1, 1, 2, 16, Scenario::Equilibrium)).unwrap();
        let psi: Vec<f64> = m.maxwellians.b.values().repeat(2).iter().map(|v| v * 1.1).collect();
        let f = encode_fluctuation(&psi, &m.maxwellians.b).unwrap();
        let back = decode_fluctuation(&f, &m.maxwellians.b).unwrap();
        for (a, b) in psi.iter().zip(&back) {
            assert!((a - b).abs() < 1e-15 * a.max(1e-300) + 1e-300);
        }
        let bad: Vec<f64> = f.iter().map(|v| -v * 100.0).collect();
        assert!(decode_fluctuation(&bad, &m.maxwellians.b).is_err());
    }

    #[test]
    fn unsafe_reaction_step_is_rejected_without_limiter() {
        let mut c = config(1, 1, 2, 16, Scenario::Equilibrium);
        c.reaction_limiter = false;
        let m = Model::new(&c).unwrap();
        let mut s = m.initial_state().unwrap();
        for v in s.psi_b.iter_mut() {
            *v *= 40.0;
        }
        assert!(matches!(m.step(&mut s, 5.0), Err(Error::StepRejected { .. })));
    }
}
