//! Reference implementations used by the test suites as independent oracles.
//!
//! Nothing here is called by the production paths. The routines are written
//! straight from the defining formulas (plain nested loops, `f64` end to
//! end) so the main implementations can be checked against them.

mod gradcheck;
mod refagg;
mod refnet;

pub use gradcheck::{random_gradcheck_case, GradcheckCase};
pub use refagg::{
    reference_argmin_select, reference_fedavg, reference_median_scores,
    reference_softmax_weights, reference_weighted_sum,
};
pub use refnet::{finite_difference_gradient, reference_predictions, reference_rmse_loss};
