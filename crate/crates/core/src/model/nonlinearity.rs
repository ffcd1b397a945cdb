use std::fmt;
use std::sync::Arc;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::{Error, Result};

/// Growth class of the principal part `σ α(x) |u|^{p-1} u` (odd) or
/// `σ α(x) |u|^p` (even).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    OddMinus,
    OddPlus,
    EvenMinus,
    EvenPlus,
    Custom,
}

impl Family {
    /// `σ ∈ {−1, +1}`; `None` for [`Family::Custom`].
    pub fn sigma(self) -> Option<f64> {
        match self {
            Family::OddMinus | Family::EvenMinus => Some(-1.0),
            Family::OddPlus | Family::EvenPlus => Some(1.0),
            Family::Custom => None,
        }
    }

    pub fn is_odd(self) -> bool {
        matches!(self, Family::OddMinus | Family::OddPlus)
    }

    pub fn is_even(self) -> bool {
        matches!(self, Family::EvenMinus | Family::EvenPlus)
    }
}

/// Coefficient `α(x)` of the principal part.
#[derive(Debug, Clone, PartialEq)]
pub enum Alpha {
    Constant(f64),
    /// Piecewise-linear interpolation of `(x, α)` samples, constant beyond the ends.
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

impl Alpha {
    fn validate(&self) -> Result<()> {
        match self {
            Alpha::Constant(a) => {
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::config(format!("alpha must be positive, got {a}")));
                }
            }
            Alpha::Table { nodes, values } => {
                if nodes.is_empty() || nodes.len() != values.len() {
                    return Err(Error::config("alpha table needs matching, non-empty nodes and values"));
                }
                if nodes.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::config("alpha table nodes must be strictly increasing"));
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                    return Err(Error::config(format!("alpha table value {v} is not positive")));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, x: f64) -> f64 {
        match self {
            Alpha::Constant(a) => *a,
            Alpha::Table { nodes, values } => {
                let k = nodes.partition_point(|&n| n <= x);
                if k == 0 {
                    values[0]
                } else if k == nodes.len() {
                    values[k - 1]
                } else {
                    let (x0, x1) = (nodes[k - 1], nodes[k]);
                    let w = (x - x0) / (x1 - x0);
                    values[k - 1] * (1.0 - w) + values[k] * w
                }
            }
        }
    }

    /// `inf_x α(x)`.
    pub fn infimum(&self) -> f64 {
        match self {
            Alpha::Constant(a) => *a,
            Alpha::Table { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn sample_nodes(&self) -> Vec<f64> {
        match self {
            Alpha::Constant(_) => vec![0.0],
            Alpha::Table { nodes, .. } => nodes.clone(),
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Lower-order term `h(x, u)`; for [`Family::Custom`] it is the whole of `f`.
#[derive(Clone)]
pub enum LowerOrder {
    /// `Σ_k c_k u^k`, independent of `x`.
    Polynomial(Vec<f64>),
    /// Expression in the variables `x` and `u` (evalexpr syntax).
    Expression { source: String, tree: Arc<Node<DefaultNumericTypes>> },
    Closure {
        label: String,
        f: ScalarFn,
        fu: Option<ScalarFn>,
        primitive: Option<ScalarFn>,
    },
}

impl fmt::Debug for LowerOrder {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LowerOrder::Polynomial(c) => fm.debug_tuple("Polynomial").field(c).finish(),
            LowerOrder::Expression { source, .. } => fm.debug_tuple("Expression").field(source).finish(),
            LowerOrder::Closure { label, .. } => fm.debug_tuple("Closure").field(label).finish(),
        }
    }
}

impl LowerOrder {
    pub fn zero() -> Self {
        LowerOrder::Polynomial(Vec::new())
    }

    pub fn expression(source: &str) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| Error::config(format!("cannot parse expression {source:?}: {e}")))?;
        for var in tree.iter_variable_identifiers() {
            if var != "x" && var != "u" {
                return Err(Error::config(format!(
                    "expression {source:?} uses unknown variable {var:?} (only x and u are bound)"
                )));
            }
        }
        let lo = LowerOrder::Expression { source: source.to_string(), tree: Arc::new(tree) };
        // surface evaluation errors (unknown functions, type errors) at construction
        lo.eval_expression(0.0, 0.5)?;
        Ok(lo)
    }

    fn eval_expression(&self, x: f64, u: f64) -> Result<f64> {
        let LowerOrder::Expression { source, tree } = self else {
            unreachable!("eval_expression on a non-expression term")
        };
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x)).expect("mutable context");
        ctx.set_value("u".into(), Value::Float(u)).expect("mutable context");
        tree.eval_number_with_context(&ctx)
            .map_err(|e| Error::numeric(format!("evaluating {source:?} at x={x}, u={u}: {e}")))
    }

    fn is_zero(&self) -> bool {
        matches!(self, LowerOrder::Polynomial(c) if c.iter().all(|&v| v == 0.0))
    }

    fn value(&self, x: f64, u: f64) -> f64 {
        match self {
            LowerOrder::Polynomial(c) => horner(c, u),
            LowerOrder::Expression { .. } => self.eval_expression(x, u).unwrap_or(f64::NAN),
            LowerOrder::Closure { f, .. } => f(x, u),
        }
    }

    fn derivative(&self, x: f64, u: f64) -> f64 {
        match self {
            LowerOrder::Polynomial(c) => {
                let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
                horner(&d, u)
            }
            LowerOrder::Closure { fu: Some(fu), .. } => fu(x, u),
            _ => {
                let h = 1e-5 * u.abs().max(1.0);
                (self.value(x, u + h) - self.value(x, u - h)) / (2.0 * h)
            }
        }
    }

    fn primitive(&self, x: f64, u: f64) -> f64 {
        match self {
            LowerOrder::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, v) in c.iter().enumerate().rev() {
                    acc = acc * u + v / (k + 1) as f64;
                }
                acc * u
            }
            LowerOrder::Closure { primitive: Some(pf), .. } => pf(x, u),
            _ => adaptive_simpson(&|s| self.value(x, s), 0.0, u, 1e-10),
        }
    }
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * u + v)
}

/// Adaptive Simpson quadrature of `g` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    fn rec(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (g(lm), g(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    // split into unit-length pieces so oscillatory integrands are resolved
    let pieces = ((b - a).abs().ceil() as usize).clamp(1, 1 << 16);
    let step = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + i as f64 * step;
        let hi = if i + 1 == pieces { b } else { lo + step };
        let (fa, fm, fb) = (g(lo), g(0.5 * (lo + hi)), g(hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += rec(g, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40);
    }
    total
}

/// A nonlinearity `f(x, u) = [σ α(x) |u|^{p−1} u or σ α(x) |u|^p] + h(x, u)`,
/// or an arbitrary `f = h` when the family is [`Family::Custom`].
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    family: Family,
    p: f64,
    alpha: Alpha,
    lower_order: LowerOrder,
}

impl Nonlinearity {
    pub fn family(family: Family, p: f64, alpha: Alpha, lower_order: LowerOrder) -> Result<Self> {
        if family == Family::Custom {
            return Err(Error::config("use Nonlinearity::custom for custom nonlinearities"));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::config(format!("exponent p must satisfy 1 < p < ∞, got {p}")));
        }
        alpha.validate()?;
        Ok(Nonlinearity { family, p, alpha, lower_order })
    }

    /// `f = h(x, u)`; `p` is the exponent used for the growth bound.
    pub fn custom(p: f64, rule: LowerOrder) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::config(format!("growth exponent must satisfy 1 <= p < ∞, got {p}")));
        }
        Ok(Nonlinearity { family: Family::Custom, p, alpha: Alpha::Constant(1.0), lower_order: rule })
    }

    /// Polynomial `Σ_k c_k u^k`; the growth exponent is the degree (at least 1).
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("polynomial coefficients must be finite"));
        }
        let degree = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        Nonlinearity::custom((degree as f64).max(1.0), LowerOrder::Polynomial(coeffs))
    }

    /// `f(u) = (u − a)(1 − u²)`.
    pub fn nagumo(a: f64) -> Self {
        Nonlinearity::polynomial(vec![-a, 1.0, a, -1.0]).expect("finite coefficients")
    }

    /// `f(u) = λ (u − u³)`.
    pub fn chafee_infante(lambda: f64) -> Self {
        Nonlinearity::polynomial(vec![0.0, lambda, 0.0, -lambda]).expect("finite coefficients")
    }

    pub fn from_fn(
        label: &str,
        p: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        fu: Option<ScalarFn>,
        primitive: Option<ScalarFn>,
    ) -> Result<Self> {
        Nonlinearity::custom(p, LowerOrder::Closure { label: label.to_string(), f: Arc::new(f), fu, primitive })
    }

    pub fn family_kind(&self) -> Family {
        self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> &Alpha {
        &self.alpha
    }

    pub fn lower_order(&self) -> &LowerOrder {
        &self.lower_order
    }

    /// Whether `f` may depend on `x`.
    pub fn depends_on_x(&self) -> bool {
        (matches!(self.alpha, Alpha::Table { .. }) && self.family != Family::Custom)
            || matches!(self.lower_order, LowerOrder::Expression { .. } | LowerOrder::Closure { .. })
    }

    /// The growth class used for homology predictions. Custom polynomials of
    /// degree ≥ 2 are classified by their leading term.
    pub fn homology_class(&self) -> Family {
        if self.family != Family::Custom {
            return self.family;
        }
        match self.leading_term() {
            Some((coef, degree)) if degree >= 2 => match (degree % 2 == 1, coef < 0.0) {
                (true, true) => Family::OddMinus,
                (true, false) => Family::OddPlus,
                (false, true) => Family::EvenMinus,
                (false, false) => Family::EvenPlus,
            },
            _ => Family::Custom,
        }
    }

    /// Leading coefficient and degree of a custom polynomial.
    pub fn leading_term(&self) -> Option<(f64, usize)> {
        match (&self.family, &self.lower_order) {
            (Family::Custom, LowerOrder::Polynomial(c)) => {
                c.iter().rposition(|&v| v != 0.0).map(|d| (c[d], d))
            }
            _ => None,
        }
    }

    /// Abscissae at which `f` is sampled in `x` for validation.
    pub fn x_samples(&self) -> Vec<f64> {
        if self.family == Family::Custom {
            vec![0.0]
        } else {
            self.alpha.sample_nodes()
        }
    }

    fn principal(&self, x: f64, u: f64) -> f64 {
        let Some(sigma) = self.family.sigma() else { return 0.0 };
        let a = self.alpha.at(x);
        let m = u.abs().powf(self.p);
        if self.family.is_odd() {
            sigma * a * m.copysign(u)
        } else {
            sigma * a * m
        }
    }

    fn principal_u(&self, x: f64, u: f64) -> f64 {
        let Some(sigma) = self.family.sigma() else { return 0.0 };
        let a = self.alpha.at(x);
        let m = self.p * u.abs().powf(self.p - 1.0);
        if self.family.is_odd() {
            sigma * a * m
        } else if u == 0.0 {
            0.0
        } else {
            sigma * a * m * u.signum()
        }
    }

    fn principal_primitive(&self, x: f64, u: f64) -> f64 {
        let Some(sigma) = self.family.sigma() else { return 0.0 };
        let a = self.alpha.at(x);
        let m = u.abs().powf(self.p + 1.0) / (self.p + 1.0);
        if self.family.is_odd() {
            sigma * a * m
        } else {
            sigma * a * m * u.signum()
        }
    }

    /// `f(x, u)`.
    #[inline]
    pub fn f(&self, x: f64, u: f64) -> f64 {
        self.principal(x, u) + self.lower_order.value(x, u)
    }

    /// `∂f/∂u (x, u)`.
    #[inline]
    pub fn fu(&self, x: f64, u: f64) -> f64 {
        self.principal_u(x, u) + self.lower_order.derivative(x, u)
    }

    /// `F(x, u) = ∫_0^u f(x, s) ds`.
    #[inline]
    pub fn primitive(&self, x: f64, u: f64) -> f64 {
        let lo = if self.lower_order.is_zero() { 0.0 } else { self.lower_order.primitive(x, u) };
        self.principal_primitive(x, u) + lo
    }

    pub fn evaluate_f(&self, x: f64, u: f64) -> Result<f64> {
        check_inputs(x, u)?;
        ensure_finite(self.f(x, u), "f(x, u)")
    }

    pub fn evaluate_fu(&self, x: f64, u: f64) -> Result<f64> {
        check_inputs(x, u)?;
        ensure_finite(self.fu(x, u), "f_u(x, u)")
    }

    #[allow(non_snake_case)]
    pub fn evaluate_F(&self, x: f64, u: f64) -> Result<f64> {
        check_inputs(x, u)?;
        ensure_finite(self.primitive(x, u), "F(x, u)")
    }
}

fn check_inputs(x: f64, u: f64) -> Result<()> {
    ensure_finite(x, "x")?;
    ensure_finite(u, "u")?;
    Ok(())
}
