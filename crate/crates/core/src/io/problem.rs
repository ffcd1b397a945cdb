use serde::{Deserialize, Serialize};

use crate::model::{Alpha, Boundary, DomainKind, Family, LowerOrder, Nonlinearity, SpatialProblem};
use crate::{Error, Result};

pub const PROBLEM_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Point,
    Interval,
    Circle,
}

/// `domain` block. Interval and circle both use `[a, b]`; the circle has
/// length `b − a` and is always periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Constant(f64),
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

impl AlphaSpec {
    fn build(&self) -> Alpha {
        match self {
            AlphaSpec::Constant(a) => Alpha::Constant(*a),
            AlphaSpec::Table { nodes, values } => Alpha::Table { nodes: nodes.clone(), values: values.clone() },
        }
    }
}

/// `nonlinearity` block: principal part `family, p, alpha` plus a lower-order
/// term given either as polynomial coefficients or as an expression in `x, u`.
/// With `family = "custom"` the lower-order term is all of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity> {
        let h = match (&self.h_coeffs, &self.expression) {
            (Some(_), Some(_)) => return Err(Error::config("nonlinearity takes h_coeffs or expression, not both")),
            (Some(c), None) => Some(LowerOrder::Polynomial(c.clone())),
            (None, Some(e)) => Some(LowerOrder::expression(e)?),
            (None, None) => None,
        };
        if self.family == Family::Custom {
            if self.alpha.is_some() {
                return Err(Error::config("alpha has no meaning for a custom nonlinearity"));
            }
            return match (h, self.p) {
                (None, _) => Err(Error::config("custom nonlinearity needs h_coeffs or expression")),
                (Some(LowerOrder::Polynomial(c)), None) => Nonlinearity::polynomial(c),
                (Some(_), None) => Err(Error::config("custom expression needs a growth exponent p")),
                (Some(rule), Some(p)) => Nonlinearity::custom(p, rule),
            };
        }
        let p = self.p.ok_or_else(|| Error::config(format!("family {:?} needs an exponent p", self.family)))?;
        let alpha = self.alpha.as_ref().map_or(Alpha::Constant(1.0), AlphaSpec::build);
        Nonlinearity::family(self.family, p, alpha, h.unwrap_or_else(LowerOrder::zero))
    }
}

/// Problem definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub nonlinearity: NonlinearitySpec,
    pub wave_speed: f64,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| Error::config(format!("problem file: {e}")))?;
        if p.schema_version != PROBLEM_SCHEMA {
            return Err(Error::config(format!(
                "problem schema_version {} is not supported (expected {PROBLEM_SCHEMA})",
                p.schema_version
            )));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    pub fn build(&self) -> Result<SpatialProblem> {
        let nl = self.nonlinearity.build()?;
        let d = &self.domain;
        let ends = || match (d.a, d.b) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::config("domain needs both a and b")),
        };
        let n = || d.n.ok_or_else(|| Error::config("domain needs a grid size n"));
        match d.kind {
            DomainName::Point => {
                if d.a.is_some() || d.b.is_some() || d.n.is_some() || d.boundary.is_some() {
                    return Err(Error::config("a point domain takes no a, b, n or boundary"));
                }
                SpatialProblem::point(nl, self.wave_speed)
            }
            DomainName::Interval => {
                let (a, b) = ends()?;
                let boundary = d.boundary.ok_or_else(|| Error::config("interval needs a boundary condition"))?;
                SpatialProblem::new(DomainKind::Interval { a, b }, boundary, n()?, nl, self.wave_speed)
            }
            DomainName::Circle => {
                let (a, b) = ends()?;
                let boundary = d.boundary.unwrap_or(Boundary::Periodic);
                SpatialProblem::new(DomainKind::Circle { length: b - a }, boundary, n()?, nl, self.wave_speed)
            }
        }
    }

    /// Whether `(f3)` belongs to the hypothesis set (no Dirichlet data).
    pub fn needs_f3(&self) -> bool {
        !matches!((self.domain.kind, self.domain.boundary), (DomainName::Interval, Some(Boundary::Dirichlet)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NAGUMO: &str = r#"{
        "schema_version": 1,
        "domain": {"kind": "point"},
        "nonlinearity": {"family": "custom", "h_coeffs": [-0.3, 1.0, 0.3, -1.0]},
        "wave_speed": 1.0
    }"#;

    #[test]
    fn nagumo_round_trip() {
        let p = ProblemFile::from_json(NAGUMO).unwrap();
        let again = ProblemFile::from_json(&p.to_json()).unwrap();
        assert_eq!(p, again);
        let sp = p.build().unwrap();
        assert!(sp.is_point());
        assert!((sp.nonlinearity().f(0.0, 0.5) - (0.2 * 0.75)).abs() < 1e-15);
    }

    #[test]
    fn family_with_lower_order() {
        let text = r#"{"schema_version":1,"domain":{"kind":"interval","a":0,"b":3.0,"n":16,"boundary":"neumann"},
            "nonlinearity":{"family":"even_plus","p":2,"h_coeffs":[1.0]},"wave_speed":1}"#;
        let p = ProblemFile::from_json(text).unwrap();
        let sp = p.build().unwrap();
        assert_eq!(sp.dim(), 16);
        assert!((sp.nonlinearity().f(0.0, -2.0) - 5.0).abs() < 1e-12);
        assert!(p.needs_f3());
    }

    #[test]
    fn unknown_keys_and_versions_are_config_errors() {
        let extra = NAGUMO.replace("\"wave_speed\"", "\"speed\": 2, \"wave_speed\"");
        assert!(matches!(ProblemFile::from_json(&extra), Err(Error::Config(_))));
        let old = NAGUMO.replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(ProblemFile::from_json(&old), Err(Error::Config(_))));
    }

    #[test]
    fn incomplete_domains_are_refused() {
        let text = NAGUMO.replace(r#"{"kind": "point"}"#, r#"{"kind": "interval", "a": 0, "b": 1}"#);
        let p = ProblemFile::from_json(&text).unwrap();
        assert!(matches!(p.build(), Err(Error::Config(_))));
    }
}
