use crate::error::{Error, Result};

/// Interface between two adjacent active cells along one axis.
#[derive(Clone, Copy, Debug)]
pub struct Face {
    pub lo: usize,
    pub hi: usize,
    pub axis: usize,
    pub position: [f64; 2],
}

/// Cell-centred tensor lattice on `[-R, R]^d`, optionally masked to a ball.
///
/// Active nodes are numbered with axis 0 as the slow index. On a full box the
/// node of axis indices `(i, j)` therefore sits at `i * n + j`.
#[derive(Clone, Debug)]
pub struct QGrid {
    dim: usize,
    n_axis: usize,
    radius: f64,
    spacing: f64,
    nodes: Vec<[f64; 2]>,
    axis_index: Vec<[usize; 2]>,
    neighbors: Vec<[[Option<usize>; 2]; 2]>,
    full_box: bool,
}

impl QGrid {
    /// Full box with `n` cells per axis.
    pub fn boxed(dim: usize, n: usize, radius: f64) -> Result<Self> {
        Self::build(dim, n, radius, None)
    }

    /// Cells whose centre lies at least half a cell inside the ball of radius `b0`.
    pub fn ball(dim: usize, n: usize, b0: f64) -> Result<Self> {
        Self::build(dim, n, b0, Some(b0))
    }

    fn build(dim: usize, n: usize, radius: f64, ball: Option<f64>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedRegime(format!("configuration dimension {dim}")));
        }
        if n < 2 {
            return Err(Error::Resolution(format!("{n} cells per axis")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("box radius {radius}")));
        }
        let spacing = 2.0 * radius / n as f64;
        let center = |i: usize| -radius + (i as f64 + 0.5) * spacing;
        let ny = if dim == 2 { n } else { 1 };
        let mut lookup = vec![None; n * ny];
        let mut nodes = Vec::new();
        let mut axis_index = Vec::new();
        for i in 0..n {
            for j in 0..ny {
                let q = if dim == 2 { [center(i), center(j)] } else { [center(i), 0.0] };
                let active = match ball {
                    // in 1D every cell of [-b0, b0] is inside; in 2D inset by half a cell
                    Some(b0) if dim == 2 => {
                        (q[0] * q[0] + q[1] * q[1]).sqrt() <= b0 - 0.5 * spacing + 1e-12 * b0
                    }
                    _ => true,
                };
                if active {
                    lookup[i * ny + j] = Some(nodes.len());
                    nodes.push(q);
                    axis_index.push([i, j]);
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Resolution("no active configuration cells".into()));
        }
        let mut neighbors = vec![[[None; 2]; 2]; nodes.len()];
        for (k, &[i, j]) in axis_index.iter().enumerate() {
            if i > 0 {
                neighbors[k][0][0] = lookup[(i - 1) * ny + j];
            }
            if i + 1 < n {
                neighbors[k][0][1] = lookup[(i + 1) * ny + j];
            }
            if dim == 2 {
                if j > 0 {
                    neighbors[k][1][0] = lookup[i * ny + j - 1];
                }
                if j + 1 < n {
                    neighbors[k][1][1] = lookup[i * ny + j + 1];
                }
            }
        }
        let full_box = nodes.len() == n * ny;
        Ok(Self { dim, n_axis: n, radius, spacing, nodes, axis_index, neighbors, full_box })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn n_axis(&self) -> usize {
        self.n_axis
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn is_full_box(&self) -> bool {
        self.full_box
    }
    /// Quadrature weight shared by every active cell.
    pub fn weight(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }
    pub fn volume(&self) -> f64 {
        self.weight() * self.len() as f64
    }
    pub fn node(&self, k: usize) -> &[f64; 2] {
        &self.nodes[k]
    }
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }
    pub fn axis_index(&self, k: usize) -> [usize; 2] {
        self.axis_index[k]
    }
    /// Neighbour of node `k` along `axis`; `dir` 0 is minus, 1 is plus.
    pub fn neighbor(&self, k: usize, axis: usize, dir: usize) -> Option<usize> {
        self.neighbors[k][axis][dir]
    }

    /// True if some neighbour along any axis is missing.
    pub fn is_boundary(&self, k: usize) -> bool {
        (0..self.dim).any(|a| self.neighbors[k][a][0].is_none() || self.neighbors[k][a][1].is_none())
    }

    pub fn faces(&self) -> Vec<Face> {
        let mut faces = Vec::new();
        for k in 0..self.len() {
            for axis in 0..self.dim {
                if let Some(hi) = self.neighbors[k][axis][1] {
                    let mut position = self.nodes[k];
                    position[axis] += 0.5 * self.spacing;
                    faces.push(Face { lo: k, hi, axis, position });
                }
            }
        }
        faces
    }

    /// Quadrature of a nodal function.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.weight()
    }
}
