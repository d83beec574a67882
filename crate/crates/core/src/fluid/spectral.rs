use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic lattice on `[0, L)^d`, `d` in {1, 2}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XGrid {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl XGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedRegime(format!("physical dimension {dim} (supported: 1, 2)")));
        }
        if n < 2 {
            return Err(Error::Resolution(format!("{n} cells per physical axis")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidParameter(format!("box length {length}")));
        }
        Ok(Self { dim, n, length })
    }
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }
    /// Coordinates of node `k` (axis 0 slow).
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let h = self.spacing();
        if self.dim == 1 {
            [k as f64 * h, 0.0]
        } else {
            [(k / self.n) as f64 * h, (k % self.n) as f64 * h]
        }
    }
}

/// FFT helper for real fields on an [`XGrid`].
#[derive(Clone)]
pub struct Spectral {
    pub grid: XGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumber of every index along one axis.
    wave: Vec<f64>,
    /// Same with the Nyquist entry zeroed, used for derivatives.
    dwave: Vec<f64>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: XGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n;
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let base = 2.0 * std::f64::consts::PI / grid.length;
        let index = |i: usize| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
        let wave: Vec<f64> = (0..n).map(|i| base * index(i) as f64).collect();
        let dwave = (0..n)
            .map(|i| if n % 2 == 0 && i == n / 2 { 0.0 } else { wave[i] })
            .collect();
        let keep = (0..n).map(|i| 3 * index(i).unsigned_abs() as usize <= n).collect();
        Self { grid, fwd, inv, wave, dwave, keep }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn axis_pass(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        if self.grid.dim == 1 {
            plan.process(data);
            return;
        }
        for row in data.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// Unnormalised forward transform.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.axis_pass(&mut data, &self.fwd);
        data
    }

    /// Inverse transform returning the real part, normalised.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.axis_pass(&mut data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.iter().map(|c| c.re * s).collect()
    }

    /// Wavevector of spectral index `k`.
    pub fn wavevector(&self, k: usize) -> [f64; 2] {
        let n = self.grid.n;
        if self.grid.dim == 1 {
            [self.wave[k], 0.0]
        } else {
            [self.wave[k / n], self.wave[k % n]]
        }
    }

    /// Wavevector used for odd derivatives (Nyquist components zeroed).
    pub fn derivative_vector(&self, k: usize) -> [f64; 2] {
        let n = self.grid.n;
        if self.grid.dim == 1 {
            [self.dwave[k], 0.0]
        } else {
            [self.dwave[k / n], self.dwave[k % n]]
        }
    }

    /// Two-thirds-rule mask.
    pub fn keeps(&self, k: usize) -> bool {
        let n = self.grid.n;
        if self.grid.dim == 1 {
            self.keep[k]
        } else {
            self.keep[k / n] && self.keep[k % n]
        }
    }

    pub fn dealias(&self, hat: &mut [Complex64]) {
        for (k, v) in hat.iter_mut().enumerate() {
            if !self.keeps(k) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn derivative_hat(&self, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        hat.iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::new(0.0, self.derivative_vector(k)[axis]))
            .collect()
    }

    /// Spectral derivative; skew-symmetric in the discrete inner product.
    pub fn derivative(&self, field: &[f64], axis: usize) -> Vec<f64> {
        self.inverse(self.derivative_hat(&self.forward(field), axis))
    }
}
