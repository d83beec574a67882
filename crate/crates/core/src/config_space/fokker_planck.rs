use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, SymmetricEigen};
use rayon::prelude::*;

use super::grid::QGrid;
use super::maxwellian::Maxwellian;
use super::potential::Potential;
use crate::error::{check_len, Error, Result};

/// Threshold separating the kernel eigenvalue from the rest of the spectrum.
pub const KERNEL_TOLERANCE: f64 = 1e-8;

const ROUNDOFF_FACTOR: f64 = 64.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct FaceCoef {
    pub lo: usize,
    pub hi: usize,
    /// Face sample of the equilibrium divided by the squared spacing.
    pub coef: f64,
}

/// Eigen-decomposition of the symmetric fluctuation operator.
#[derive(Clone, Debug)]
struct EigenPair {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

#[derive(Clone, Debug)]
enum PropagatorKind {
    Dense(DMatrix<f64>),
    Tensor { n: usize, factor: Vec<f64> },
}

/// Conservative discretisation of `div(M grad(psi / M))` with no-flux boundaries.
#[derive(Debug)]
pub struct FokkerPlanckOperator {
    grid: QGrid,
    potential: Potential,
    m: Vec<f64>,
    sqrt_m: Vec<f64>,
    faces: Vec<FaceCoef>,
    eigen: OnceLock<EigenPair>,
    axis_eigen: OnceLock<EigenPair>,
    propagators: Mutex<HashMap<u64, std::sync::Arc<PropagatorKind>>>,
}

impl Clone for FokkerPlanckOperator {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            potential: self.potential,
            m: self.m.clone(),
            sqrt_m: self.sqrt_m.clone(),
            faces: self.faces.clone(),
            eigen: self.eigen.clone(),
            axis_eigen: self.axis_eigen.clone(),
            propagators: Mutex::new(HashMap::new()),
        }
    }
}

impl FokkerPlanckOperator {
    pub fn new(grid: &QGrid, maxwellian: &Maxwellian) -> Result<Self> {
        check_len("maxwellian", maxwellian.len(), grid.len())?;
        let h2 = grid.spacing() * grid.spacing();
        let faces = grid
            .faces()
            .iter()
            .zip(maxwellian.face_values())
            .map(|(f, &mf)| FaceCoef { lo: f.lo, hi: f.hi, coef: mf / h2 })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            potential: maxwellian.potential,
            m: maxwellian.values().to_vec(),
            sqrt_m: maxwellian.sqrt_values().to_vec(),
            faces,
            eigen: OnceLock::new(),
            axis_eigen: OnceLock::new(),
            propagators: Mutex::new(HashMap::new()),
        })
    }

    pub fn grid(&self) -> &QGrid {
        &self.grid
    }
    pub fn len(&self) -> usize {
        self.m.len()
    }
    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
    pub fn equilibrium(&self) -> &[f64] {
        &self.m
    }
    pub fn sqrt_equilibrium(&self) -> &[f64] {
        &self.sqrt_m
    }
    pub(crate) fn face_coefs(&self) -> &[FaceCoef] {
        &self.faces
    }

    fn flux_divergence(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for f in &self.faces {
            let flux = f.coef * (g[f.hi] - g[f.lo]);
            out[f.lo] += flux;
            out[f.hi] -= flux;
        }
    }

    /// `div(M grad(psi / M))`.
    pub fn apply_density(&self, psi: &[f64]) -> Result<Vec<f64>> {
        check_len("density", psi.len(), self.len())?;
        let g: Vec<f64> = psi.iter().zip(&self.m).map(|(p, m)| p / m).collect();
        let mut out = vec![0.0; psi.len()];
        self.flux_divergence(&g, &mut out);
        Ok(out)
    }

    /// `M^{-1/2} div(M grad(f / M^{1/2}))`, symmetric in the flat inner product.
    pub fn apply_fluctuation(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len("fluctuation", f.len(), self.len())?;
        let g: Vec<f64> = f.iter().zip(&self.sqrt_m).map(|(v, s)| v / s).collect();
        let mut out = vec![0.0; f.len()];
        self.flux_divergence(&g, &mut out);
        out.iter_mut().zip(&self.sqrt_m).for_each(|(o, s)| *o /= s);
        Ok(out)
    }

    /// `M^{-1} div(M grad g)`, symmetric in the `M`-weighted inner product.
    pub fn apply_weighted(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len("weighted field", g.len(), self.len())?;
        let mut out = vec![0.0; g.len()];
        self.flux_divergence(g, &mut out);
        out.iter_mut().zip(&self.m).for_each(|(o, m)| *o /= m);
        Ok(out)
    }

    /// Discrete `int |grad g|^2 M dq`, equal to `-<A g, g>_M`.
    pub fn dirichlet_form(&self, g: &[f64]) -> Result<f64> {
        check_len("weighted field", g.len(), self.len())?;
        let s: f64 = self.faces.iter().map(|f| f.coef * (g[f.hi] - g[f.lo]).powi(2)).sum();
        Ok(s * self.grid.weight())
    }

    /// Dense symmetric matrix of the fluctuation operator.
    pub fn fluctuation_matrix(&self) -> DMatrix<f64> {
        dense_matrix(self.len(), &self.faces, &self.m, &self.sqrt_m)
    }

    fn is_tensor(&self) -> bool {
        self.grid.dim() == 2 && self.grid.is_full_box() && self.potential.is_separable()
    }

    fn eigen(&self) -> Result<&EigenPair> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = eigh(self.fluctuation_matrix())?;
        Ok(self.eigen.get_or_init(|| e))
    }

    fn axis_eigen(&self) -> Result<&EigenPair> {
        if let Some(e) = self.axis_eigen.get() {
            return Ok(e);
        }
        let pot = match self.potential.kind {
            super::potential::PotentialKind::Hookean { stiffness } => Potential::hookean(stiffness, 1)?,
            _ => return Err(Error::UnsupportedRegime("tensor factor of a non-separable potential".into())),
        };
        let g1 = QGrid::boxed(1, self.grid.n_axis(), self.grid.radius())?;
        let m1 = Maxwellian::unit_mass(pot, &g1)?;
        let op1 = FokkerPlanckOperator::new(&g1, &m1)?;
        let e = eigh(op1.fluctuation_matrix())?;
        Ok(self.axis_eigen.get_or_init(|| e))
    }

    /// Eigenvalues of `-L`, ascending, with the kernel check applied.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let mut ev: Vec<f64> = if self.is_tensor() {
            let e = &self.axis_eigen()?.values;
            let mut out = Vec::with_capacity(e.len() * e.len());
            for a in e {
                for b in e {
                    out.push(-(a + b));
                }
            }
            out
        } else {
            self.eigen()?.values.iter().map(|v| -v).collect()
        };
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kernel = ev.iter().filter(|v| v.abs() <= KERNEL_TOLERANCE).count();
        if ev.len() < 2 || ev[1] <= KERNEL_TOLERANCE {
            return Err(Error::Resolution(format!(
                "degenerate spectrum: second eigenvalue {:.3e} within {KERNEL_TOLERANCE:e} of zero",
                ev.get(1).copied().unwrap_or(0.0)
            )));
        }
        if kernel != 1 {
            return Err(Error::Eigen(format!("expected a one-dimensional kernel, found {kernel}")));
        }
        Ok(ev)
    }

    /// Eigenvectors of `-L` ordered as [`Self::spectrum`], dense route only.
    pub fn eigenvectors(&self) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let e = self.eigen()?;
        let mut idx: Vec<usize> = (0..e.values.len()).collect();
        idx.sort_by(|&a, &b| (-e.values[a]).partial_cmp(&-e.values[b]).unwrap());
        let vals = idx.iter().map(|&i| -e.values[i]).collect();
        let vecs = DMatrix::from_fn(e.vectors.nrows(), idx.len(), |r, c| e.vectors[(r, idx[c])]);
        Ok((vals, vecs))
    }

    fn propagator(&self, dt: f64) -> Result<std::sync::Arc<PropagatorKind>> {
        let key = dt.to_bits();
        if let Some(p) = self.propagators.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let kind = if self.is_tensor() {
            let e = self.axis_eigen()?;
            let n = e.values.len();
            let m = exp_from_eigen(e, dt);
            PropagatorKind::Tensor { n, factor: m.transpose().as_slice().to_vec() }
        } else {
            PropagatorKind::Dense(exp_from_eigen(self.eigen()?, dt))
        };
        let arc = std::sync::Arc::new(kind);
        let mut cache = self.propagators.lock().unwrap();
        if cache.len() > 8 {
            cache.clear();
        }
        cache.insert(key, arc.clone());
        Ok(arc)
    }

    /// Exact solution of `d psi/dt = div(M grad(psi/M))` over `dt` on every slice of `field`.
    ///
    /// The evolution is applied to the fluctuation `(psi - M)/sqrt(M)`, so an
    /// equilibrium slice is returned bit for bit. In the far tails, where `M`
    /// is many orders below the fluctuation, rounding can produce nonpositive
    /// values; these are reset to the rounding floor of that node.
    pub fn evolve(&self, field: &mut [f64], dt: f64) -> Result<()> {
        let n = self.len();
        if field.len() % n != 0 {
            return Err(Error::GridMismatch(format!("field length {} not a multiple of {n}", field.len())));
        }
        if dt == 0.0 {
            return Ok(());
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        let prop = self.propagator(dt)?;
        field.par_chunks_mut(n).for_each_init(
            || (vec![0.0; n], vec![0.0; n], vec![0.0; n]),
            |(f, scratch, t), slice| {
                let mut zero = true;
                for k in 0..n {
                    f[k] = (slice[k] - self.m[k]) / self.sqrt_m[k];
                    zero &= f[k] == 0.0;
                }
                if zero {
                    return;
                }
                match prop.as_ref() {
                    PropagatorKind::Dense(e) => symmetric_matvec(e, f, scratch),
                    PropagatorKind::Tensor { n: na, factor } => tensor_apply(factor, *na, f, t, scratch),
                }
                let f_norm: f64 = f.iter().map(|v| v.abs()).sum();
                for k in 0..n {
                    let v = self.m[k] + self.sqrt_m[k] * scratch[k];
                    // the exact semigroup is positive; a nonpositive value is rounding
                    slice[k] = if v > 0.0 {
                        v
                    } else {
                        (ROUNDOFF_FACTOR * f64::EPSILON * self.sqrt_m[k] * f_norm).max(f64::MIN_POSITIVE)
                    };
                }
            },
        );
        Ok(())
    }
}

fn dense_matrix(n: usize, faces: &[FaceCoef], m: &[f64], sqrt_m: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for f in faces {
        a[(f.lo, f.lo)] -= f.coef / m[f.lo];
        a[(f.hi, f.hi)] -= f.coef / m[f.hi];
        let off = f.coef / (sqrt_m[f.lo] * sqrt_m[f.hi]);
        a[(f.lo, f.hi)] += off;
        a[(f.hi, f.lo)] += off;
    }
    a
}

fn eigh(a: DMatrix<f64>) -> Result<EigenPair> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite operator entries".into()));
    }
    let e = SymmetricEigen::try_new(a, 1e-15, 0).ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    Ok(EigenPair { values: e.eigenvalues.iter().cloned().collect(), vectors: e.eigenvectors })
}

fn exp_from_eigen(e: &EigenPair, dt: f64) -> DMatrix<f64> {
    let n = e.values.len();
    let scaled = DMatrix::from_fn(n, n, |r, c| e.vectors[(r, c)] * (dt * e.values[c]).exp());
    let mut out = &scaled * e.vectors.transpose();
    // symmetrise to remove rounding asymmetry
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (out[(r, c)] + out[(c, r)]);
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
    }
    out
}

fn symmetric_matvec(e: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let n = x.len();
    let data = e.as_slice();
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = &data[j * n..(j + 1) * n];
        for (o, c) in out.iter_mut().zip(col) {
            *o += xj * c;
        }
    }
}

/// `out = E F E` for a symmetric `n x n` factor `E` stored row-major and `F` the slice viewed as a matrix.
fn tensor_apply(e: &[f64], n: usize, f: &[f64], t: &mut [f64], out: &mut [f64]) {
    // row-major n x n blocks viewed through swapped strides
    let e = DMatrixView::from_slice_with_strides(e, n, n, 1, n);
    let f = DMatrixView::from_slice_with_strides(f, n, n, 1, n);
    let mut t = DMatrixViewMut::from_slice_with_strides_mut(t, n, n, 1, n);
    t.gemm(1.0, &e, &f, 0.0);
    let mut out = DMatrixViewMut::from_slice_with_strides_mut(out, n, n, 1, n);
    out.gemm(1.0, &t, &e, 0.0);
}

/// Smallest nonzero eigenvalue of `-L`.
pub fn spectral_gap(op: &FokkerPlanckOperator) -> Result<f64> {
    Ok(op.spectrum()?[1])
}
