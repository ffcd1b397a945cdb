//! Problem description: cross-sections, discrete Laplacians, nonlinearities,
//! hypothesis checks, homotopies and the energy functional.

mod energy;
mod homotopy;
mod hypotheses;
mod laplacian;
mod nonlinearity;
mod problem;

pub use energy::{energy, energy_non_increasing, energy_rate_check, energy_rate_deviation};
pub use homotopy::{validate_homotopy, validate_homotopy_on, EpsilonReport, HomotopyPath, HomotopyReport, SwitchProfile};
pub use hypotheses::{
    family_theta, validate_hypotheses, validate_hypotheses_with, ContactVariant, HypothesisOptions, HypothesisReport,
};
pub use laplacian::{build_laplacian, Boundary, DiscreteLaplacian, DomainKind};
pub use nonlinearity::{adaptive_simpson, Alpha, Family, LowerOrder, Nonlinearity, ScalarFn};
pub use problem::SpatialProblem;
