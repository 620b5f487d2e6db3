//! Two-stage degradation quantifier: first stage predicts internal battery
//! state (IT, IR, ELCN) from observable stress, second stage predicts SOH loss.

mod cbup;
mod model;
mod select;
mod variants;

pub use cbup::{cbup, make_ubdf_features, AggregatedCycle, Direction, FLAT_EPS, HALF_CYCLE};
pub use model::{
    check_closure, closure_checksum, DegradationEstimator, DegradationModel, ModelArtifact,
    OracleDegradation, RangeWarning, UbdfPrediction, ZeroDegradation, GUARD_BAND,
};
pub use select::{
    best_pair, comparison_table, derive_seed, select_best_combination, train_benchmarks,
    train_pair, AccuracyRow, Benchmarks, PairAccuracy, Selection, SelectionReport, VariantFailure,
};
pub use variants::{compatible_pairs, BdpVariant, Feature, UbdfVariant, BDF};
