use crate::error::{Error, Result};

/// Functional form of a spring potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialKind {
    /// U(q) = H |q|^2 / 2.
    Hookean { stiffness: f64 },
    /// U(q) = -(k b0^2 / 2) ln(1 - |q|^2 / b0^2) for |q| < b0.
    Fene { strength: f64, extension: f64 },
}

/// A spring potential on configuration space of dimension 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > 2 {
        return Err(Error::UnsupportedRegime(format!(
            "configuration dimension {dim} (supported: 1, 2)"
        )));
    }
    Ok(())
}

impl Potential {
    pub fn hookean(stiffness: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(stiffness > 0.0) || !stiffness.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hookean stiffness must be positive, got {stiffness}"
            )));
        }
        Ok(Self { kind: PotentialKind::Hookean { stiffness }, dim })
    }

    pub fn fene(strength: f64, extension: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(strength > 0.0) || !(extension > 0.0) || !strength.is_finite() || !extension.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "FENE parameters must be positive, got k = {strength}, b0 = {extension}"
            )));
        }
        Ok(Self { kind: PotentialKind::Fene { strength, extension }, dim })
    }

    /// The potential of the tetramer species: twice the dimer potential.
    pub fn doubled(&self) -> Self {
        let kind = match self.kind {
            PotentialKind::Hookean { stiffness } => PotentialKind::Hookean { stiffness: 2.0 * stiffness },
            PotentialKind::Fene { strength, extension } => {
                PotentialKind::Fene { strength: 2.0 * strength, extension }
            }
        };
        Self { kind, dim: self.dim }
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.kind, PotentialKind::Hookean { .. })
    }

    /// Default half-width of the configuration box.
    pub fn default_radius(&self) -> f64 {
        match self.kind {
            PotentialKind::Hookean { stiffness } => 8.0 / stiffness.sqrt(),
            PotentialKind::Fene { extension, .. } => extension,
        }
    }

    fn norm2(q: &[f64]) -> f64 {
        q.iter().map(|v| v * v).sum()
    }

    /// Potential value; `+inf` outside the FENE ball.
    pub fn value(&self, q: &[f64]) -> f64 {
        let r2 = Self::norm2(&q[..self.dim]);
        match self.kind {
            PotentialKind::Hookean { stiffness } => 0.5 * stiffness * r2,
            PotentialKind::Fene { strength, extension } => {
                let b2 = extension * extension;
                if r2 >= b2 {
                    f64::INFINITY
                } else {
                    -0.5 * strength * b2 * (-r2 / b2).ln_1p()
                }
            }
        }
    }

    /// Gradient; entries beyond `dim` are zero.
    pub fn gradient(&self, q: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        let scale = match self.kind {
            PotentialKind::Hookean { stiffness } => stiffness,
            PotentialKind::Fene { strength, extension } => {
                let b2 = extension * extension;
                strength / (1.0 - Self::norm2(&q[..self.dim]) / b2)
            }
        };
        for a in 0..self.dim {
            g[a] = scale * q[a];
        }
        g
    }

    pub fn laplacian(&self, q: &[f64]) -> f64 {
        match self.kind {
            PotentialKind::Hookean { stiffness } => stiffness * self.dim as f64,
            PotentialKind::Fene { strength, extension } => {
                let b2 = extension * extension;
                let s = 1.0 - Self::norm2(&q[..self.dim]) / b2;
                strength * self.dim as f64 / s + 2.0 * strength * Self::norm2(&q[..self.dim]) / (b2 * s * s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fene_gradient_matches_finite_difference() {
        let p = Potential::fene(1.5, 3.0, 2).unwrap();
        let q = [0.7, -1.1];
        let h = 1e-6;
        let g = p.gradient(&q);
        for a in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[a] += h;
            qm[a] -= h;
            let fd = (p.value(&qp) - p.value(&qm)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-7);
        }
        let lap_fd: f64 = (0..2)
            .map(|a| {
                let mut qp = q;
                let mut qm = q;
                qp[a] += 1e-4;
                qm[a] -= 1e-4;
                (p.value(&qp) - 2.0 * p.value(&q) + p.value(&qm)) / 1e-8
            })
            .sum();
        assert!((lap_fd - p.laplacian(&q)).abs() < 1e-4);
    }

    #[test]
    fn doubling_and_invalid_input() {
        let p = Potential::hookean(1.0, 1).unwrap();
        assert_eq!(p.doubled().value(&[2.0]), 2.0 * p.value(&[2.0]));
        assert!(Potential::hookean(-1.0, 1).is_err());
        assert!(Potential::hookean(1.0, 3).is_err());
        assert!(Potential::fene(1.0, 2.0, 1).unwrap().value(&[2.5]).is_infinite());
    }
}
