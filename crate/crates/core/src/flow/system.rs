use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::model::{HomotopyPath, SpatialProblem};
use crate::{Error, Result};

/// Right-hand side `y' = F(t, y)` with a dense Jacobian and energy bookkeeping.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]);

    fn jacobian(&self, t: f64, y: &[f64]) -> DMatrix<f64>;

    /// `∂F/∂t`; zero for autonomous systems.
    fn time_derivative(&self, _t: f64, _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn energy(&self, t: f64, y: &[f64]) -> f64;

    /// `‖v‖²` in the weighted `L²` norm.
    fn kinetic(&self, y: &[f64]) -> f64;
}

/// The flow `U' = −A(U)` written in Laplacian eigenmode coordinates
/// `y = (a, b)`, `u = E a`, `v = E b`:
///
/// `a' = b`, `b' = c b − Λ a − Eᵀ f(x, E a)`.
///
/// With all modes retained this is the full grid system in a rotated basis.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    problem: SpatialProblem,
    modes: usize,
    basis: DMatrix<f64>,
    lambdas: Vec<f64>,
    weight: f64,
}

impl FlowSystem {
    /// Galerkin truncation to the `modes` leading eigenmodes; `None` keeps all.
    pub fn new(problem: &SpatialProblem, modes: Option<usize>) -> Result<Self> {
        let lap = problem.laplacian();
        let n = lap.dim();
        let modes = modes.unwrap_or(n);
        if modes == 0 || modes > n {
            return Err(Error::config(format!("mode count must be in 1..={n}, got {modes}")));
        }
        let w = lap.weights()[0];
        if lap.weights().iter().any(|&x| (x - w).abs() > 1e-14 * w) {
            return Err(Error::config("Galerkin flow requires uniform quadrature weights"));
        }
        Ok(FlowSystem {
            problem: problem.clone(),
            modes,
            basis: lap.eigenvectors().columns(0, modes).into_owned(),
            lambdas: lap.eigenvalues()[..modes].to_vec(),
            weight: w,
        })
    }

    pub fn problem(&self) -> &SpatialProblem {
        &self.problem
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn is_full_grid(&self) -> bool {
        self.modes == self.problem.dim()
    }

    pub fn wave_speed(&self) -> f64 {
        self.problem.wave_speed()
    }

    /// Laplacian eigenvalues of the retained modes.
    pub fn mode_eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Same truncation with a different wave speed.
    pub fn with_wave_speed(&self, c: f64) -> Result<Self> {
        let mut s = self.clone();
        s.problem = self.problem.with_wave_speed(c)?;
        Ok(s)
    }

    /// Grid values `u = E a`.
    pub fn to_grid(&self, a: &[f64]) -> Vec<f64> {
        (&self.basis * DVector::from_column_slice(a)).as_slice().to_vec()
    }

    /// Mode coefficients `Eᵀ u`.
    pub fn to_modes(&self, u: &[f64]) -> Vec<f64> {
        (self.basis.transpose() * DVector::from_column_slice(u)).as_slice().to_vec()
    }

    /// Phase state `(u, v)` on the grid.
    pub fn state_to_grid(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.modes;
        (self.to_grid(&y[..n]), self.to_grid(&y[n..]))
    }

    pub fn state_from_grid(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut y = self.to_modes(u);
        y.extend(self.to_modes(v));
        y
    }

    /// `Λ a + Eᵀ f(x, E a)`, the mode-space stationary residual.
    pub fn stationary_residual(&self, a: &[f64]) -> Vec<f64> {
        let u = self.to_grid(a);
        let f = self.problem.f_vec(&u);
        let proj = self.to_modes(&f);
        a.iter().zip(&self.lambdas).zip(proj).map(|((a, l), p)| l * a + p).collect()
    }

    /// `S(a) = Λ + Eᵀ diag(f_u(x, E a)) E`, symmetric.
    pub fn linearization(&self, a: &[f64]) -> DMatrix<f64> {
        let u = self.to_grid(a);
        let fu = self.problem.fu_vec(&u);
        self.linearization_from_fu(&fu)
    }

    pub(crate) fn linearization_from_fu(&self, fu: &[f64]) -> DMatrix<f64> {
        let n = self.problem.dim();
        let mut scaled = self.basis.clone();
        for i in 0..n {
            for k in 0..self.modes {
                scaled[(i, k)] *= fu[i];
            }
        }
        let mut s = self.basis.transpose() * scaled;
        for k in 0..self.modes {
            s[(k, k)] += self.lambdas[k];
        }
        s.fill_lower_triangle_with_upper_triangle();
        s
    }

    /// Lifts a grid stationary point to a rest point `(a, 0)` of the truncated flow.
    pub fn lift_rest_point(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.problem.check_len(z, "stationary point")?;
        let mut a = self.to_modes(z);
        if self.is_full_grid() {
            let r = norm(&self.stationary_residual(&a));
            if r < 1e-9 {
                a.resize(2 * self.modes, 0.0);
                return Ok(a);
            }
        }
        for _ in 0..50 {
            let r = self.stationary_residual(&a);
            let rn = norm(&r);
            if rn < 1e-12 * (1.0 + norm(&a)) {
                a.resize(2 * self.modes, 0.0);
                return Ok(a);
            }
            let s = self.linearization(&a);
            let lu = s.lu();
            let step = lu
                .solve(&DVector::from_vec(r))
                .ok_or_else(|| Error::Singular("Galerkin rest-point lift".into()))?;
            for (ai, di) in a.iter_mut().zip(step.iter()) {
                *ai -= di;
            }
        }
        Err(Error::Divergence { iterations: 50, residual: norm(&self.stationary_residual(&a)) })
    }

    /// Vector field in grid coordinates: `(v, c v − Δu − f(x, u))`.
    pub fn vector_field_grid(&self, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.problem.check_len(u, "u")?;
        self.problem.check_len(v, "v")?;
        let c = self.wave_speed();
        let lu = self.problem.laplacian().apply(u);
        let f = self.problem.f_vec(u);
        let dv: Vec<f64> = (0..u.len()).map(|i| c * v[i] - lu[i] - f[i]).collect();
        if dv.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("vector field is not finite"));
        }
        Ok((v.to_vec(), dv))
    }

    /// Eigen-decomposition of `S(a)` with eigenvalues in descending order.
    pub fn linearization_spectrum(&self, a: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        sorted_symmetric_eigen(self.linearization(a))
    }
}

pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vecs.set_column(c, &v);
    }
    (vals, vecs)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl VectorField for FlowSystem {
    fn dim(&self) -> usize {
        2 * self.modes
    }

    fn eval(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.modes;
        let c = self.wave_speed();
        let (a, b) = y.split_at(n);
        let u = self.to_grid(a);
        let f = self.problem.f_vec(&u);
        let proj = self.to_modes(&f);
        for k in 0..n {
            out[k] = b[k];
            out[n + k] = c * b[k] - self.lambdas[k] * a[k] - proj[k];
        }
    }

    fn jacobian(&self, _t: f64, y: &[f64]) -> DMatrix<f64> {
        let n = self.modes;
        let s = self.linearization(&y[..n]);
        block_jacobian(&s, self.wave_speed())
    }

    fn energy(&self, _t: f64, y: &[f64]) -> f64 {
        galerkin_energy(self, y, |x, u| self.problem.nonlinearity().primitive(x, u))
    }

    fn kinetic(&self, y: &[f64]) -> f64 {
        self.weight * y[self.modes..].iter().map(|b| b * b).sum::<f64>()
    }
}

pub(crate) fn block_jacobian(s: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let n = s.nrows();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, n + k)] = c;
        for l in 0..n {
            j[(n + k, l)] = -s[(k, l)];
        }
    }
    j
}

fn galerkin_energy(sys: &FlowSystem, y: &[f64], prim: impl Fn(f64, f64) -> f64) -> f64 {
    let n = sys.modes;
    let (a, b) = y.split_at(n);
    let u = sys.to_grid(a);
    let nodes = sys.problem.laplacian().nodes();
    let mut quad = 0.0;
    for k in 0..n {
        quad += -0.5 * b[k] * b[k] - 0.5 * sys.lambdas[k] * a[k] * a[k];
    }
    let pot: f64 = u.iter().zip(nodes).map(|(&u, &x)| prim(x, u)).sum();
    sys.weight * (quad - pot)
}

/// The nonautonomous flow along a homotopy `(f_t, c_t)` in the mode
/// coordinates of the left endpoint.
#[derive(Debug, Clone)]
pub struct NonautonomousSystem {
    path: HomotopyPath,
    base: FlowSystem,
}

impl NonautonomousSystem {
    pub fn new(path: &HomotopyPath, modes: Option<usize>) -> Result<Self> {
        Ok(NonautonomousSystem { path: path.clone(), base: FlowSystem::new(path.minus(), modes)? })
    }

    pub fn path(&self) -> &HomotopyPath {
        &self.path
    }

    pub fn base(&self) -> &FlowSystem {
        &self.base
    }

    /// The autonomous system at time `t` (exact endpoints for `|t| ≥ ℓ`).
    pub fn endpoint(&self, plus: bool) -> Result<FlowSystem> {
        FlowSystem::new(if plus { self.path.plus() } else { self.path.minus() }, Some(self.base.modes))
    }

    fn nodes(&self) -> &[f64] {
        self.base.problem.laplacian().nodes()
    }
}

impl VectorField for NonautonomousSystem {
    fn dim(&self) -> usize {
        2 * self.base.modes
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.base.modes;
        let c = self.path.speed_at(t);
        let (a, b) = y.split_at(n);
        let u = self.base.to_grid(a);
        let f: Vec<f64> = u.iter().zip(self.nodes()).map(|(&u, &x)| self.path.f(t, x, u)).collect();
        let proj = self.base.to_modes(&f);
        for k in 0..n {
            out[k] = b[k];
            out[n + k] = c * b[k] - self.base.lambdas[k] * a[k] - proj[k];
        }
    }

    fn jacobian(&self, t: f64, y: &[f64]) -> DMatrix<f64> {
        let n = self.base.modes;
        let u = self.base.to_grid(&y[..n]);
        let fu: Vec<f64> = u.iter().zip(self.nodes()).map(|(&u, &x)| self.path.fu(t, x, u)).collect();
        block_jacobian(&self.base.linearization_from_fu(&fu), self.path.speed_at(t))
    }

    fn time_derivative(&self, t: f64, y: &[f64], out: &mut [f64]) -> bool {
        let ds = self.path.ds(t);
        if ds == 0.0 {
            return false;
        }
        let n = self.base.modes;
        let (a, b) = y.split_at(n);
        let u = self.base.to_grid(a);
        let (pm, pp) = (self.path.minus(), self.path.plus());
        let df: Vec<f64> = u
            .iter()
            .zip(self.nodes())
            .map(|(&u, &x)| ds * (pp.nonlinearity().f(x, u) - pm.nonlinearity().f(x, u)))
            .collect();
        let proj = self.base.to_modes(&df);
        let dc = ds * (pp.wave_speed() - pm.wave_speed());
        for k in 0..n {
            out[k] = 0.0;
            out[n + k] = dc * b[k] - proj[k];
        }
        true
    }

    fn energy(&self, t: f64, y: &[f64]) -> f64 {
        galerkin_energy(&self.base, y, |x, u| self.path.primitive(t, x, u))
    }

    fn kinetic(&self, y: &[f64]) -> f64 {
        self.base.kinetic(y)
    }
}
