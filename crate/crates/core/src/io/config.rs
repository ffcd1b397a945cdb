use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::problem::{NonlinearitySpec, ProblemFile};
use crate::orbits::{GalerkinOptions, IsolatingSet, NonautonomousOptions, PlanarOptions};
use crate::stationary::SearchStrategy;
use crate::{Error, Result};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stationary,
    Orbits,
    Homology,
    #[serde(rename = "continue")]
    Continuation,
    Validate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Stationary, Stage::Orbits, Stage::Homology, Stage::Continuation, Stage::Validate, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Stationary => "stationary",
            Stage::Orbits => "orbits",
            Stage::Homology => "homology",
            Stage::Continuation => "continue",
            Stage::Validate => "validate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Multiplies every solver tolerance (Newton, integrator, collocation).
    pub scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMethodChoice {
    /// Shooting on a point cross-section, collocation otherwise.
    Auto,
    Planar,
    Galerkin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSettings {
    pub method: OrbitMethodChoice,
    pub planar: PlanarOptions,
    pub galerkin: GalerkinOptions,
    pub set: IsolatingSet,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        OrbitSettings {
            method: OrbitMethodChoice::Auto,
            planar: PlanarOptions::default(),
            galerkin: GalerkinOptions::default(),
            set: IsolatingSet::Whole,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomologySettings {
    /// Extra partition of the generators to verify as a direct sum, on top of
    /// the connected components of `∂`.
    pub partition: Option<Vec<Vec<String>>>,
}

/// One end of a continuation leg: the base problem with some fields replaced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegSpec {
    pub wave_speed: Option<f64>,
    pub nonlinearity: Option<NonlinearitySpec>,
}

impl LegSpec {
    pub fn apply(&self, base: &ProblemFile) -> ProblemFile {
        let mut p = base.clone();
        if let Some(c) = self.wave_speed {
            p.wave_speed = c;
        }
        if let Some(nl) = &self.nonlinearity {
            p.nonlinearity = nl.clone();
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSettings {
    /// Half-width of the switching window.
    pub ell: f64,
    /// Successive end problems; the path runs base → legs[0] → legs[1] → …
    pub legs: Vec<LegSpec>,
    /// With two or more legs, also run the direct path and compare.
    pub composition: bool,
    pub options: NonautonomousOptions,
    pub homotopy_samples: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            ell: 2.0,
            legs: Vec::new(),
            composition: true,
            options: NonautonomousOptions::default(),
            homotopy_samples: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    /// Hypotheses are sampled on `[−u_radius, u_radius]`.
    pub u_radius: f64,
    pub samples: usize,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings { u_radius: 20.0, samples: 4001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportFlags {
    pub csv: bool,
    pub svg: bool,
    /// Eigenvalue traces keep this many of the largest eigenvalues.
    pub eigenvalues: usize,
}

impl Default for ReportFlags {
    fn default() -> Self {
        ReportFlags { csv: true, svg: true, eigenvalues: 4 }
    }
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

/// Experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Problem file, relative to the experiment file.
    pub problem: PathBuf,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub report: ReportFlags,
    #[serde(default)]
    pub stationary: SearchStrategy,
    #[serde(default)]
    pub orbits: OrbitSettings,
    #[serde(default)]
    pub homology: HomologySettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<ContinuationSettings>,
    #[serde(default)]
    pub validation: ValidationSettings,
}

impl ExperimentConfig {
    pub fn new(problem: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA,
            problem: problem.into(),
            stages: all_stages(),
            tolerances: Tolerances::default(),
            seed: 0,
            output: None,
            report: ReportFlags::default(),
            stationary: SearchStrategy::default(),
            orbits: OrbitSettings::default(),
            homology: HomologySettings::default(),
            continuation: None,
            validation: ValidationSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(format!("experiment file: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Structural checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA {
            return Err(Error::config(format!(
                "experiment schema_version {} is not supported (expected {CONFIG_SCHEMA})",
                self.schema_version
            )));
        }
        if !(self.tolerances.scale > 0.0) || !self.tolerances.scale.is_finite() {
            return Err(Error::config(format!("tolerance scale must be positive, got {}", self.tolerances.scale)));
        }
        if self.stages.is_empty() {
            return Err(Error::config("no stages selected"));
        }
        if let Some(c) = &self.continuation {
            if !(c.ell > 0.0) || !c.ell.is_finite() {
                return Err(Error::config(format!("continuation ell must be positive, got {}", c.ell)));
            }
            if c.legs.is_empty() {
                return Err(Error::config("continuation needs at least one leg"));
            }
        }
        if self.validation.samples < 3 || !(self.validation.u_radius > 0.0) {
            return Err(Error::config("validation grid needs at least 3 samples and a positive radius"));
        }
        Ok(())
    }

    /// Stationary strategy with the run seed and tolerance scale applied.
    pub fn strategy(&self) -> SearchStrategy {
        let mut s = self.stationary.clone();
        s.seed = self.seed;
        s.newton.tol *= self.tolerances.scale;
        s
    }

    pub fn planar(&self) -> PlanarOptions {
        self.orbits.planar.scaled(self.tolerances.scale)
    }

    pub fn galerkin(&self) -> GalerkinOptions {
        scaled_galerkin(&self.orbits.galerkin, self.tolerances.scale)
    }

    pub fn nonautonomous(&self) -> Option<NonautonomousOptions> {
        self.continuation.as_ref().map(|c| {
            let mut o = c.options.clone();
            o.planar = o.planar.scaled(self.tolerances.scale);
            o.galerkin = scaled_galerkin(&o.galerkin, self.tolerances.scale);
            o
        })
    }
}

fn scaled_galerkin(g: &GalerkinOptions, scale: f64) -> GalerkinOptions {
    let mut g = g.clone();
    g.collocation.tol *= scale;
    g
}

/// Experiment together with its problem file, paths resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedExperiment {
    pub config: ExperimentConfig,
    pub problem: ProblemFile,
}

impl LoadedExperiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let config = ExperimentConfig::from_json(&text)?;
        let problem_path = path.parent().unwrap_or(Path::new(".")).join(&config.problem);
        let text = std::fs::read_to_string(&problem_path)
            .map_err(|e| Error::config(format!("cannot read problem file {}: {e}", problem_path.display())))?;
        let problem = ProblemFile::from_json(&text)?;
        // fail before any computation
        problem.build()?;
        if let Some(c) = &config.continuation {
            for leg in &c.legs {
                leg.apply(&problem).build()?;
            }
        }
        Ok(LoadedExperiment { config, problem })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1, "problem": "p.json"}"#).unwrap();
        assert_eq!(c.stages, Stage::ALL.to_vec());
        assert_eq!(c.tolerances.scale, 1.0);
        assert_eq!(c.orbits.method, OrbitMethodChoice::Auto);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"schema_version": 1, "problem": "p.json", "stagess": []}"#,
            r#"{"schema_version": 1, "problem": "p.json", "orbits": {"planar": {"rtoll": 1}}}"#,
            r#"{"schema_version": 1, "problem": "p.json", "tolerances": {"scale": 1, "x": 2}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn flattened_collocation_keys_parse() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "problem": "p.json", "orbits": {"method": "galerkin", "galerkin": {"modes": 6, "tol": 1e-8}}}"#,
        )
        .unwrap();
        assert_eq!(c.orbits.galerkin.modes, 6);
        assert_eq!(c.orbits.galerkin.collocation.tol, 1e-8);
        let bad = r#"{"schema_version": 1, "problem": "p.json", "orbits": {"galerkin": {"modez": 6}}}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
    }

    #[test]
    fn stage_names_round_trip() {
        let s: Vec<Stage> = serde_json::from_str(r#"["stationary","continue","report"]"#).unwrap();
        assert_eq!(s, vec![Stage::Stationary, Stage::Continuation, Stage::Report]);
        assert_eq!(serde_json::to_string(&Stage::Continuation).unwrap(), "\"continue\"");
    }

    #[test]
    fn scale_reaches_every_solver() {
        let mut c = ExperimentConfig::new("p.json");
        c.tolerances.scale = 0.1;
        c.continuation = Some(ContinuationSettings { legs: vec![LegSpec::default()], ..Default::default() });
        assert!((c.strategy().newton.tol - 1e-11).abs() < 1e-25);
        assert!((c.planar().rtol - 1e-10).abs() < 1e-24);
        assert!((c.galerkin().collocation.tol - 1e-10).abs() < 1e-24);
        assert!((c.nonautonomous().unwrap().planar.rtol - 1e-10).abs() < 1e-24);
    }
}
