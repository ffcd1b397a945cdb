//! Small linear-algebra kernels that nalgebra does not provide: a banded LU
//! for the collocation systems and dense bit matrices over GF(2).

mod banded;
mod gf2;

pub use banded::{BandedLu, BandedMatrix};
pub use gf2::BitMatrix;
