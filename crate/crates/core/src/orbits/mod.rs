//! Connecting orbits between rest points, their counts and tails.

mod build;
mod collocation;
mod count;
mod galerkin;
mod nonautonomous;
mod planar;
mod rest;
mod tail;
mod types;

pub use collocation::CollocationOptions;
pub use count::{count_mod2, IsolatingSet, OrbitCount, PairCount, LEVEL_TOLERANCE, SEPARATION};
pub use galerkin::{find_heteroclinics_galerkin, GalerkinOptions};
pub use nonautonomous::{continuation_counts, find_nonautonomous_connections, ContinuationCounts, ContinuationEntry, NonautonomousOptions};
pub use planar::{find_heteroclinics_planar, PlanarOptions};
pub use rest::{lift_all, RestPoint};
pub use tail::{curve_distance, tail_rate, MIN_TAIL_SAMPLES};
pub use types::{Containment, HeteroclinicOrbit, OrbitMethod, OrbitSearch, TailRates};
