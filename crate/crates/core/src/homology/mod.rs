//! Chain complexes over GF(2) built from orbit counts, their homology,
//! direct sums, continuation maps and the forcing bound.

mod complex;
mod continuation;
mod forcing;
mod sums;

pub use complex::{build_complex, check_d_squared, compute_homology, ChainComplex, DSquaredReport, HomologyResult};
pub use continuation::{composition_check, continuation_check, ChainMap, CompositionReport, ContinuationReport};
pub use forcing::{expected_homology, forcing_analysis, matches_expected, ExpectedHomology, ForcingReport};
pub use sums::{connection_components, direct_sum_check, disjoint_union, subcomplex, DirectSumReport};
