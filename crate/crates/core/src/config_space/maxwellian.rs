use super::grid::QGrid;
use super::potential::{Potential, PotentialKind};
use crate::error::{Error, Result};

/// Boundary-to-peak ratio above which a hookean box is considered truncated.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Nodal and face samples of `c exp(-U)` on a configuration grid.
#[derive(Clone, Debug)]
pub struct Maxwellian {
    pub potential: Potential,
    pub norm: f64,
    values: Vec<f64>,
    sqrt_values: Vec<f64>,
    face_values: Vec<f64>,
}

impl Maxwellian {
    fn from_parts(potential: Potential, norm: f64, values: Vec<f64>, face_values: Vec<f64>) -> Self {
        let sqrt_values = values.iter().map(|m| m.sqrt()).collect();
        Self { potential, norm, values, sqrt_values, face_values }
    }

    /// Single-species equilibrium normalised to unit mass.
    pub fn unit_mass(potential: Potential, grid: &QGrid) -> Result<Self> {
        check_grid(&potential, grid)?;
        let raw: Vec<f64> = grid.nodes().iter().map(|q| (-potential.value(q)).exp()).collect();
        check_tail(&potential, grid, &raw)?;
        let c = 1.0 / grid.integrate(&raw);
        let values = raw.iter().map(|v| c * v).collect();
        let faces = grid.faces().iter().map(|f| c * (-potential.value(&f.position)).exp()).collect();
        Ok(Self::from_parts(potential, c, values, faces))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn sqrt_values(&self) -> &[f64] {
        &self.sqrt_values
    }
    /// Samples at the faces, in the order of [`QGrid::faces`].
    pub fn face_values(&self) -> &[f64] {
        &self.face_values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The coupled pair of equilibria. `a` holds the tetramer, `b` the dimer.
#[derive(Clone, Debug)]
pub struct Maxwellians {
    pub a: Maxwellian,
    pub b: Maxwellian,
    /// Quadrature of `M_A`.
    pub mean_a: f64,
    /// Quadrature of `M_B`.
    pub mean_b: f64,
}

/// Positive root of `2 i2 c^2 + i1 c - 1 = 0`.
pub fn solve_normalization(i1: f64, i2: f64) -> Result<f64> {
    if !(i1 > 0.0) || !(i2 >= 0.0) || !i1.is_finite() || !i2.is_finite() {
        return Err(Error::Domain(format!("normalisation integrals I1 = {i1}, I2 = {i2}")));
    }
    Ok(2.0 / (i1 + (i1 * i1 + 8.0 * i2).sqrt()))
}

fn check_grid(potential: &Potential, grid: &QGrid) -> Result<()> {
    if potential.dim != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "potential dimension {} on a {}-dimensional grid",
            potential.dim,
            grid.dim()
        )));
    }
    if grid.n_axis() < 4 {
        return Err(Error::Resolution(format!("{} cells per axis (need at least 4)", grid.n_axis())));
    }
    Ok(())
}

fn check_tail(potential: &Potential, grid: &QGrid, raw: &[f64]) -> Result<()> {
    if let PotentialKind::Hookean { .. } = potential.kind {
        let peak = raw.iter().cloned().fold(0.0, f64::max);
        let edge = (0..grid.len()).filter(|&k| grid.is_boundary(k)).map(|k| raw[k]).fold(0.0, f64::max);
        if edge >= TAIL_TOLERANCE * peak {
            return Err(Error::Resolution(format!(
                "equilibrium not resolved: boundary/peak ratio {:.3e} >= {TAIL_TOLERANCE:e}",
                edge / peak
            )));
        }
    }
    Ok(())
}

/// Normalised equilibria for dimer potential `pot_b` and tetramer potential `2 pot_b`.
///
/// The tetramer samples are squares of the dimer samples, so the detailed-balance
/// relation `M_A = M_B^2` holds exactly in floating point.
pub fn normalize_maxwellians(pot_b: &Potential, grid: &QGrid) -> Result<Maxwellians> {
    check_grid(pot_b, grid)?;
    let e_b: Vec<f64> = grid.nodes().iter().map(|q| (-pot_b.value(q)).exp()).collect();
    check_tail(pot_b, grid, &e_b)?;
    let i1 = grid.integrate(&e_b);
    let i2 = grid.integrate(&e_b.iter().map(|v| v * v).collect::<Vec<_>>());
    let c_b = solve_normalization(i1, i2)?;
    let m_b: Vec<f64> = e_b.iter().map(|v| c_b * v).collect();
    let m_a: Vec<f64> = m_b.iter().map(|v| v * v).collect();
    let face_b: Vec<f64> = grid.faces().iter().map(|f| c_b * (-pot_b.value(&f.position)).exp()).collect();
    let face_a: Vec<f64> = face_b.iter().map(|v| v * v).collect();
    let mean_a = grid.integrate(&m_a);
    let mean_b = grid.integrate(&m_b);
    let defect = 2.0 * mean_a + mean_b - 1.0;
    if defect.abs() > 1e-10 {
        return Err(Error::Inconsistent(format!("equilibrium mass defect {defect:.3e}")));
    }
    Ok(Maxwellians {
        a: Maxwellian::from_parts(pot_b.doubled(), c_b * c_b, m_a, face_a),
        b: Maxwellian::from_parts(*pot_b, c_b, m_b, face_b),
        mean_a,
        mean_b,
    })
}
