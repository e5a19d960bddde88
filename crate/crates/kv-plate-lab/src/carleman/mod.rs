//! Two-phase weight systems on the annular domain and the 1-D weighted
//! transmission inequality test.

pub mod bracket;
pub mod field;
pub mod ratio;
pub mod weights;

pub use bracket::{
    certify_subellipticity, certify_with_exclusion, finite_difference_bracket, poisson_bracket,
    Certificate, ConjugatedSymbol, LAMBDA_CAP,
};
pub use field::Field2;
pub use ratio::{carleman_ratio, manufactured_pair, PhasePair1D, RatioReport, H0_DEFAULT};
pub use weights::{
    build_weight_pair, build_weight_pair_with_options, critical_points, validate_pair,
    CriticalKind, CriticalPoint, PhaseId, WeightPair,
};
