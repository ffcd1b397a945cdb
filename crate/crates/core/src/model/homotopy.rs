use serde::{Deserialize, Serialize};

use super::hypotheses::{contact_excess, validate_hypotheses, ContactVariant, Grid};
use super::nonlinearity::{Alpha, Family, LowerOrder, Nonlinearity};
use super::problem::SpatialProblem;
use crate::{Error, Result};

/// Switching profile `s(t)` from 0 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchProfile {
    /// `C^∞` switch, exactly 0 for `t ≤ −ℓ` and exactly 1 for `t ≥ ℓ`.
    Smooth,
    /// `(1 + tanh(2t/ℓ))/2`; never exactly constant.
    Tanh,
}

impl SwitchProfile {
    pub fn value(self, t: f64, ell: f64) -> f64 {
        match self {
            SwitchProfile::Smooth => {
                if t <= -ell {
                    0.0
                } else if t >= ell {
                    1.0
                } else {
                    let x = (t + ell) / (2.0 * ell);
                    let (a, b) = ((-1.0 / x).exp(), (-1.0 / (1.0 - x)).exp());
                    a / (a + b)
                }
            }
            SwitchProfile::Tanh => 0.5 * (1.0 + (2.0 * t / ell).tanh()),
        }
    }

    pub fn derivative(self, t: f64, ell: f64) -> f64 {
        match self {
            SwitchProfile::Smooth => {
                if t <= -ell || t >= ell {
                    0.0
                } else {
                    let x = (t + ell) / (2.0 * ell);
                    let (a, b) = ((-1.0 / x).exp(), (-1.0 / (1.0 - x)).exp());
                    let (da, db) = (a / (x * x), b / ((1.0 - x) * (1.0 - x)));
                    let s = a + b;
                    (da * b + a * db) / (s * s) / (2.0 * ell)
                }
            }
            SwitchProfile::Tanh => {
                let th = (2.0 * t / ell).tanh();
                (1.0 - th * th) / ell
            }
        }
    }
}

/// `(f_t, c_t) = (f_− + s(t)(f_+ − f_−), c_− + s(t)(c_+ − c_−))` on a fixed grid.
#[derive(Debug, Clone)]
pub struct HomotopyPath {
    minus: SpatialProblem,
    plus: SpatialProblem,
    ell: f64,
    profile: SwitchProfile,
}

impl HomotopyPath {
    /// Both endpoints must share the cross-section and grid.
    pub fn new(minus: SpatialProblem, plus: SpatialProblem, ell: f64, profile: SwitchProfile) -> Result<Self> {
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(Error::config(format!("switching half-width must be positive, got {ell}")));
        }
        if minus.domain() != plus.domain() || minus.boundary() != plus.boundary() || minus.grid_size() != plus.grid_size() {
            return Err(Error::config("homotopy endpoints must share domain, boundary data and grid"));
        }
        Ok(HomotopyPath { minus, plus, ell, profile })
    }

    /// Wave-speed homotopy with a fixed nonlinearity.
    pub fn speed(problem: &SpatialProblem, c_minus: f64, c_plus: f64, ell: f64) -> Result<Self> {
        HomotopyPath::new(problem.with_wave_speed(c_minus)?, problem.with_wave_speed(c_plus)?, ell, SwitchProfile::Smooth)
    }

    /// Path that stays at `problem`.
    pub fn constant(problem: &SpatialProblem, ell: f64) -> Result<Self> {
        HomotopyPath::new(problem.clone(), problem.clone(), ell, SwitchProfile::Smooth)
    }

    pub fn minus(&self) -> &SpatialProblem {
        &self.minus
    }

    pub fn plus(&self) -> &SpatialProblem {
        &self.plus
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn profile(&self) -> SwitchProfile {
        self.profile
    }

    pub fn s(&self, t: f64) -> f64 {
        self.profile.value(t, self.ell)
    }

    pub fn ds(&self, t: f64) -> f64 {
        self.profile.derivative(t, self.ell)
    }

    /// Whether `f_t` is independent of `t` (only the speed moves).
    pub fn nonlinearity_fixed(&self) -> bool {
        same_nonlinearity(self.minus.nonlinearity(), self.plus.nonlinearity())
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let s = self.s(t);
        self.minus.wave_speed() + s * (self.plus.wave_speed() - self.minus.wave_speed())
    }

    pub fn f(&self, t: f64, x: f64, u: f64) -> f64 {
        let (fm, fp) = (self.minus.nonlinearity().f(x, u), self.plus.nonlinearity().f(x, u));
        blend(self.s(t), fm, fp)
    }

    pub fn fu(&self, t: f64, x: f64, u: f64) -> f64 {
        let (fm, fp) = (self.minus.nonlinearity().fu(x, u), self.plus.nonlinearity().fu(x, u));
        blend(self.s(t), fm, fp)
    }

    pub fn primitive(&self, t: f64, x: f64, u: f64) -> f64 {
        let (fm, fp) = (self.minus.nonlinearity().primitive(x, u), self.plus.nonlinearity().primitive(x, u));
        blend(self.s(t), fm, fp)
    }

    /// `∂_t F(t, x, u) = s′(t) (F_+ − F_−)`.
    pub fn primitive_dt(&self, t: f64, x: f64, u: f64) -> f64 {
        let (fm, fp) = (self.minus.nonlinearity().primitive(x, u), self.plus.nonlinearity().primitive(x, u));
        self.ds(t) * (fp - fm)
    }

    fn x_samples(&self) -> Vec<f64> {
        let mut xs = self.minus.nonlinearity().x_samples();
        xs.extend(self.plus.nonlinearity().x_samples());
        xs.extend_from_slice(self.minus.laplacian().nodes());
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

fn blend(s: f64, a: f64, b: f64) -> f64 {
    if s == 0.0 {
        a
    } else if s == 1.0 {
        b
    } else {
        a + s * (b - a)
    }
}

fn same_nonlinearity(a: &Nonlinearity, b: &Nonlinearity) -> bool {
    if a.family_kind() != b.family_kind() || a.p() != b.p() || a.alpha() != b.alpha() {
        return false;
    }
    match (a.lower_order(), b.lower_order()) {
        (LowerOrder::Polynomial(x), LowerOrder::Polynomial(y)) => {
            let n = x.len().max(y.len());
            (0..n).all(|k| x.get(k).copied().unwrap_or(0.0) == y.get(k).copied().unwrap_or(0.0))
        }
        (LowerOrder::Expression { source: x, .. }, LowerOrder::Expression { source: y, .. }) => x == y,
        (LowerOrder::Closure { f: x, .. }, LowerOrder::Closure { f: y, .. }) => std::sync::Arc::ptr_eq(x, y),
        _ => false,
    }
}

/// Small-perturbation data of a path written as `f_t = α_t f_− + h_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub sup_alpha_deviation: f64,
    pub sup_alpha_rate: f64,
    pub sup_lower_order_ratio: f64,
    /// Smallest admissible `ε` (the criteria are strict inequalities).
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub ell: f64,
    pub profile: SwitchProfile,
    pub constant_outside: bool,
    pub min_speed: f64,
    /// `Θ = max |∂_t F| / (1 + |F|)`.
    pub theta_big: f64,
    /// `C_f″ = max (|∂_t F| − Θ|F|)⁺`.
    pub c_f_double_prime: f64,
    pub contact_variant: ContactVariant,
    pub contact_theta: f64,
    /// `sup_t C_f′(t)` at the common `θ`; `None` if the condition fails somewhere.
    pub uniform_contact_constant: Option<f64>,
    pub uniform_growth_constant: f64,
    pub epsilon: Option<EpsilonReport>,
    pub pass: bool,
}

/// Checks the nonautonomous hypotheses on a sampled `(t, x, u)` grid.
pub fn validate_homotopy(path: &HomotopyPath, sample_count: usize) -> Result<HomotopyReport> {
    validate_homotopy_on(path, sample_count, 10.0)
}

pub fn validate_homotopy_on(path: &HomotopyPath, sample_count: usize, u_max: f64) -> Result<HomotopyReport> {
    if sample_count < 3 {
        return Err(Error::config(format!("homotopy validation needs at least 3 samples, got {sample_count}")));
    }
    let ell = path.ell;
    let xs = path.x_samples();
    let us: Vec<f64> = (0..sample_count)
        .map(|k| -u_max + 2.0 * u_max * k as f64 / (sample_count - 1) as f64)
        .collect();

    // constancy outside [−ℓ, ℓ]
    let mut outside_dev: f64 = 0.0;
    for k in 0..sample_count {
        let tau = ell * (1.0 + 2.0 * k as f64 / (sample_count - 1) as f64);
        for (t, end) in [(-tau, &path.minus), (tau, &path.plus)] {
            outside_dev = outside_dev.max((path.speed_at(t) - end.wave_speed()).abs());
            for &x in &xs {
                for &u in &us {
                    outside_dev = outside_dev.max((path.f(t, x, u) - end.nonlinearity().f(x, u)).abs());
                }
            }
        }
    }
    if outside_dev != 0.0 {
        return Err(Error::Validation(format!(
            "path is not constant outside [−{ell}, {ell}]: deviation {outside_dev:e}"
        )));
    }

    let ts: Vec<f64> = (0..sample_count).map(|k| -ell + 2.0 * ell * k as f64 / (sample_count - 1) as f64).collect();
    let min_speed = ts
        .iter()
        .map(|&t| path.speed_at(t))
        .chain([path.minus.wave_speed(), path.plus.wave_speed()])
        .fold(f64::INFINITY, f64::min);

    let mut theta_big: f64 = 0.0;
    for &t in &ts {
        for &x in &xs {
            for &u in &us {
                let (dtf, f) = (path.primitive_dt(t, x, u).abs(), path.primitive(t, x, u).abs());
                theta_big = theta_big.max(dtf / (1.0 + f));
            }
        }
    }
    let mut c_dd: f64 = 0.0;
    for &t in &ts {
        for &x in &xs {
            for &u in &us {
                let (dtf, f) = (path.primitive_dt(t, x, u).abs(), path.primitive(t, x, u).abs());
                c_dd = c_dd.max(dtf - theta_big * f);
            }
        }
    }

    // (f1), (f2) uniform in t at the θ selected for f_−
    let range = (-u_max, u_max);
    let rm = validate_hypotheses(path.minus.nonlinearity(), range, sample_count)?;
    let rp = validate_hypotheses(path.plus.nonlinearity(), range, sample_count)?;
    let (variant, theta) = (rm.f2_variant, rm.f2_theta);
    let grid = Grid { us: &us, xs: &xs, inner: 0.5 * u_max };
    let p = rm.p.max(rp.p);
    let mut uniform_c = Some(0.0f64);
    let mut growth: f64 = 0.0;
    let mut t_samples = ts.clone();
    t_samples.push(ell);
    for &t in &t_samples {
        let s = path.s(t);
        let nl_t = interpolated(path, s)?;
        let (c, c_inner) = grid.max_split(|x, u| contact_excess(&nl_t, variant, theta, x, u));
        let (c, c_inner) = (c.max(0.0), c_inner.max(0.0));
        let ok = c.is_finite() && c <= 1.05 * c_inner + 1e-9;
        uniform_c = match (uniform_c, ok) {
            (Some(acc), true) => Some(acc.max(c)),
            _ => None,
        };
        let (g, _) = grid.max_split(|x, u| nl_t.f(x, u).abs() / (1.0 + u.abs().powf(p)));
        growth = growth.max(g);
    }

    let epsilon = epsilon_report(path, &ts, &xs, &us);
    let pass = min_speed > 0.0 && uniform_c.is_some() && rm.f1_pass && rp.f1_pass && growth.is_finite();
    Ok(HomotopyReport {
        ell,
        profile: path.profile,
        constant_outside: true,
        min_speed,
        theta_big,
        c_f_double_prime: c_dd.max(0.0),
        contact_variant: variant,
        contact_theta: theta,
        uniform_contact_constant: uniform_c,
        uniform_growth_constant: growth,
        epsilon,
        pass,
    })
}

/// The nonlinearity `f_− + s (f_+ − f_−)` as a standalone object.
fn interpolated(path: &HomotopyPath, s: f64) -> Result<Nonlinearity> {
    let (m, p) = (path.minus.nonlinearity().clone(), path.plus.nonlinearity().clone());
    let (m2, p2) = (m.clone(), p.clone());
    let (m3, p3) = (m.clone(), p.clone());
    let fu: super::nonlinearity::ScalarFn = std::sync::Arc::new(move |x, u| blend(s, m2.fu(x, u), p2.fu(x, u)));
    let prim: super::nonlinearity::ScalarFn =
        std::sync::Arc::new(move |x, u| blend(s, m3.primitive(x, u), p3.primitive(x, u)));
    let pexp = m.p().max(p.p());
    Nonlinearity::from_fn("homotopy", pexp, move |x, u| blend(s, m.f(x, u), p.f(x, u)), Some(fu), Some(prim))
}

fn epsilon_report(path: &HomotopyPath, ts: &[f64], xs: &[f64], us: &[f64]) -> Option<EpsilonReport> {
    let (nm, np) = (path.minus.nonlinearity(), path.plus.nonlinearity());
    let max_ds = ts.iter().map(|&t| path.ds(t).abs()).fold(0.0, f64::max);
    let ratio = |x: f64| -> Option<f64> {
        match (nm.family_kind(), np.family_kind()) {
            (Family::Custom, Family::Custom) => Some(1.0),
            (a, b) if a == b && nm.p() == np.p() => Some(alpha_at(np.alpha(), x) / alpha_at(nm.alpha(), x)),
            _ => None,
        }
    };
    let mut dev: f64 = 0.0;
    let mut h_ratio: f64 = 0.0;
    for &x in xs {
        let r = ratio(x)?;
        dev = dev.max((r - 1.0).abs());
        for &u in us {
            // h_+ − r h_− = f_+ − r f_−
            let h = np.f(x, u) - r * nm.f(x, u);
            h_ratio = h_ratio.max(h.abs() / (1.0 + nm.f(x, u).abs()));
        }
    }
    let rate = max_ds * dev;
    let sup = dev.max(rate).max(h_ratio);
    Some(EpsilonReport {
        sup_alpha_deviation: dev,
        sup_alpha_rate: rate,
        sup_lower_order_ratio: h_ratio,
        epsilon: sup * (1.0 + 1e-6) + 1e-12,
    })
}

fn alpha_at(a: &Alpha, x: f64) -> f64 {
    a.at(x)
}
