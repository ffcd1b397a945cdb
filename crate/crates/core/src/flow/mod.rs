//! The first-order travelling-wave flow, its linearization at rest points,
//! time integration and spectral flow along trajectories.

mod integrate;
mod spectral_flow;
mod spectrum;
mod system;
mod trajectory;

pub use integrate::{integrate, integrate_until, IntegratorOptions};
pub use spectral_flow::{spectral_flow, Crossing, SpectralFlowReport};
pub use spectrum::{invariant_splitting, mode_eigenvalues, rest_point_spectrum, InvariantSplitting, RestSpectrum};
pub use system::{FlowSystem, NonautonomousSystem, VectorField};
pub use trajectory::{IntegratorMeta, TerminalEvent, Trajectory};

pub(crate) use system::sorted_symmetric_eigen;

use crate::Result;

/// `dU/dt` at the state `y` of `system`.
pub fn vector_field(system: &dyn VectorField, t: f64, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != system.dim() {
        return Err(crate::Error::config(format!("state has length {}, system has {}", y.len(), system.dim())));
    }
    let mut out = vec![0.0; y.len()];
    system.eval(t, y, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::numeric("vector field is not finite"));
    }
    Ok(out)
}
