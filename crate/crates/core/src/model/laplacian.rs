use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spatial cross-section Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Point,
    Interval { a: f64, b: f64 },
    Circle { length: f64 },
}

impl DomainKind {
    pub fn volume(&self) -> f64 {
        match *self {
            DomainKind::Point => 1.0,
            DomainKind::Interval { a, b } => b - a,
            DomainKind::Circle { length } => length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Neumann,
    Periodic,
}

/// Second-order finite-difference Laplacian together with its full
/// eigendecomposition and the quadrature rule used for `∫_Ω`.
///
/// Grids:
/// * Dirichlet: `n` interior nodes, `h = (b-a)/(n+1)`; the two boundary nodes
///   carry value 0 and weight `h/2` each (`boundary_weight`).
/// * Neumann: cell-centred nodes, `h = (b-a)/n`, mirrored ghost cells.
/// * Periodic: `n` nodes on the circle, circulant stencil.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    boundary_weight: f64,
    spacing: f64,
}

pub fn build_laplacian(domain: DomainKind, boundary: Boundary, n: usize) -> Result<DiscreteLaplacian> {
    let (matrix, nodes, h, boundary_weight) = match domain {
        DomainKind::Point => (DMatrix::zeros(1, 1), vec![0.0], 0.0, 0.0),
        DomainKind::Interval { a, b } => {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::config(format!("interval requires a < b, got ({a}, {b})")));
            }
            if n < 2 {
                return Err(Error::config(format!("interval grid needs n >= 2, got {n}")));
            }
            match boundary {
                Boundary::Dirichlet => {
                    let h = (b - a) / (n + 1) as f64;
                    let nodes = (0..n).map(|i| a + (i + 1) as f64 * h).collect();
                    let m = tridiagonal(n, h, false);
                    (m, nodes, h, h)
                }
                Boundary::Neumann => {
                    let h = (b - a) / n as f64;
                    let nodes = (0..n).map(|i| a + (i as f64 + 0.5) * h).collect();
                    let m = tridiagonal(n, h, true);
                    (m, nodes, h, 0.0)
                }
                Boundary::Periodic => {
                    return Err(Error::config("periodic boundary data requires a circle domain"));
                }
            }
        }
        DomainKind::Circle { length } => {
            if !(length > 0.0) || !length.is_finite() {
                return Err(Error::config(format!("circle length must be positive, got {length}")));
            }
            if n < 2 {
                return Err(Error::config(format!("circle grid needs n >= 2, got {n}")));
            }
            if boundary != Boundary::Periodic {
                return Err(Error::config(format!(
                    "circle domain requires periodic boundary data, got {boundary:?}"
                )));
            }
            let h = length / n as f64;
            let nodes = (0..n).map(|i| i as f64 * h).collect();
            let inv = 1.0 / (h * h);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] -= 2.0 * inv;
                m[(i, (i + 1) % n)] += inv;
                m[(i, (i + n - 1) % n)] += inv;
            }
            (m, nodes, h, 0.0)
        }
    };
    let dim = matrix.nrows();
    let weights = if matches!(domain, DomainKind::Point) {
        vec![1.0]
    } else {
        vec![h; dim]
    };

    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // sign convention: the largest-magnitude entry (first on ties) is positive
        let mut pivot = 0;
        for k in 1..dim {
            if v[k].abs() > v[pivot].abs() + 1e-12 {
                pivot = k;
            }
        }
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(col, &v);
    }

    Ok(DiscreteLaplacian {
        matrix,
        eigenvalues,
        eigenvectors,
        nodes,
        weights,
        boundary_weight,
        spacing: h,
    })
}

fn tridiagonal(n: usize, h: f64, neumann: bool) -> DMatrix<f64> {
    let inv = 1.0 / (h * h);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = -2.0 * inv;
        if i > 0 {
            m[(i, i - 1)] = inv;
        }
        if i + 1 < n {
            m[(i, i + 1)] = inv;
        }
    }
    if neumann {
        m[(0, 0)] = -inv;
        m[(n - 1, n - 1)] = -inv;
    }
    m
}

impl DiscreteLaplacian {
    /// Number of unknowns (1 for a point).
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Euclidean-orthonormal eigenvectors, one column per eigenvalue.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature weight carried by boundary nodes that are not unknowns.
    pub fn boundary_weight(&self) -> f64 {
        self.boundary_weight
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.boundary_weight
    }

    /// Grid spacing `h` (0 for a point).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.matrix[(i, j)] * u[j];
            }
            out[i] = s;
        }
        out
    }

    /// Weighted inner product `Σ w_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    pub fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
