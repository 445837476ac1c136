//! Reference optima, distances to the solution set, variance-assumption
//! certificates and empirical rates.

mod assumptions;
mod empirical;
mod solution;

pub use assumptions::{
    check_assumptions, cocoercivity_slack, descent_slack, implicit_gradient, quadratic_growth_slack,
    sapa_sigma_closed_form, unbiased_residual, AbcConstants, AssumptionReport,
};
pub use empirical::{empirical_rate, iterations_to_accuracy, weighted_average, weighted_average_iterate, Accuracy};
pub use solution::{
    distance_to_argmin, reference_optimum, ReferenceMethod, ReferenceSolution, SolutionSet, REFERENCE_MAX_ITERS,
};
