//! Stationary solutions of `Δz + f(x, z) = 0`: Newton with deflation,
//! Morse indices, hyperbolicity and the energy lower bound.

mod newton;
mod search;

pub use newton::{
    certify, energy_bound_check, hyperbolicity_check, hyperbolicity_threshold, linearized_eigenvalues, morse_index,
    solve_newton, solve_newton_with, NewtonOptions, StationaryPoint,
};
pub use search::{find_all, seeds, sort_and_label, SearchStrategy, StationarySet};
