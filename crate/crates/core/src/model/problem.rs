use nalgebra::DMatrix;

use super::laplacian::{build_laplacian, Boundary, DiscreteLaplacian, DomainKind};
use super::nonlinearity::Nonlinearity;
use crate::{Error, Result};

/// A full problem instance: cross-section, boundary data, discrete Laplacian,
/// nonlinearity and wave speed.
#[derive(Debug, Clone)]
pub struct SpatialProblem {
    domain: DomainKind,
    boundary: Boundary,
    grid_size: usize,
    nonlinearity: Nonlinearity,
    wave_speed: f64,
    laplacian: DiscreteLaplacian,
}

impl SpatialProblem {
    pub fn new(
        domain: DomainKind,
        boundary: Boundary,
        grid_size: usize,
        nonlinearity: Nonlinearity,
        wave_speed: f64,
    ) -> Result<Self> {
        if !(wave_speed > 0.0) || !wave_speed.is_finite() {
            return Err(Error::config(format!("wave speed must be positive, got {wave_speed}")));
        }
        let (boundary, grid_size) = match domain {
            DomainKind::Point => (Boundary::Dirichlet, 0),
            _ => (boundary, grid_size),
        };
        let laplacian = build_laplacian(domain, boundary, grid_size)?;
        Ok(SpatialProblem { domain, boundary, grid_size, nonlinearity, wave_speed, laplacian })
    }

    /// Single-point cross-section: the planar system `u'' − c u' + f(u) = 0`.
    pub fn point(nonlinearity: Nonlinearity, wave_speed: f64) -> Result<Self> {
        SpatialProblem::new(DomainKind::Point, Boundary::Dirichlet, 0, nonlinearity, wave_speed)
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn is_point(&self) -> bool {
        matches!(self.domain, DomainKind::Point)
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian {
        &self.laplacian
    }

    /// Number of unknowns in `z`.
    pub fn dim(&self) -> usize {
        self.laplacian.dim()
    }

    pub fn volume(&self) -> f64 {
        self.laplacian.volume()
    }

    /// Same problem with a different wave speed.
    pub fn with_wave_speed(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::config(format!("wave speed must be positive, got {c}")));
        }
        let mut p = self.clone();
        p.wave_speed = c;
        Ok(p)
    }

    /// Same grid and wave speed with a different nonlinearity.
    pub fn with_nonlinearity(&self, nonlinearity: Nonlinearity) -> Self {
        let mut p = self.clone();
        p.nonlinearity = nonlinearity;
        p
    }

    pub fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::config(format!("{what} has length {}, grid has {}", v.len(), self.dim())));
        }
        Ok(())
    }

    pub fn f_vec(&self, u: &[f64]) -> Vec<f64> {
        let x = self.laplacian.nodes();
        u.iter().zip(x).map(|(&u, &x)| self.nonlinearity.f(x, u)).collect()
    }

    pub fn fu_vec(&self, u: &[f64]) -> Vec<f64> {
        let x = self.laplacian.nodes();
        u.iter().zip(x).map(|(&u, &x)| self.nonlinearity.fu(x, u)).collect()
    }

    /// `Δz + f(x, z)`.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let mut r = self.laplacian.apply(z);
        for (ri, fi) in r.iter_mut().zip(self.f_vec(z)) {
            *ri += fi;
        }
        r
    }

    /// `Δ + diag f_u(x, z)`.
    pub fn linearization(&self, z: &[f64]) -> DMatrix<f64> {
        let mut m = self.laplacian.matrix().clone();
        for (i, d) in self.fu_vec(z).into_iter().enumerate() {
            m[(i, i)] += d;
        }
        m
    }
}
