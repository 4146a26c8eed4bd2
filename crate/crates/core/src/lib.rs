//! Numerical kernels for risk-averse optimization on finite probability
//! spaces: quantile and Lorenz functions, average value-at-risk and its
//! identifiers, piecewise-affine integrands, composite subgradients,
//! stochastic dominance constraints, a constrained solver, and optimality
//! certificates.

pub mod certify;
pub mod composite;
pub mod dominance;
pub mod error;
pub mod integrand;
mod nnls;
pub mod quantile;
pub mod risk;
pub mod scenario;
pub mod selftest;
pub mod solver;

pub use certify::{certify, nu_from_mu, Certificate, CertifyOptions, LevelMultiplier};
pub use composite::{
    composite_directional, composite_lmo, composite_subgradient, composite_value,
    steepest_subgradient, strassen_gradient, CompositeGradient,
};
pub use dominance::{
    avar_constraint_lmo, constraint_subgradient, constraint_values, dominates_first_order,
    dominates_second_order, first_order_by_distribution, first_order_by_quantile,
    first_order_margin, in_b, max_violation, second_order_by_lorenz, second_order_by_shortfall,
    second_order_margin, uniform_dominance_margin, DominanceConstraint,
};
pub use error::{Result, RiskError};
pub use integrand::{
    AffinePiece, Curvature, DecisionPoint, Extreme, MaxAffineIntegrand, SubgradientSelector,
};
pub use quantile::{
    cdf, integrated_cdf, lorenz, lorenz_conjugate, quantile, ExtendedReal, SortedScenarioView,
};
pub use risk::{
    avar, avar_identifier, avar_lower, avar_upper, identifier_lmo, lorenz_supergradient,
    spectral_identifier, spectral_lmo, spectral_risk, Orientation, RiskFunctional,
    RiskIdentifier, SpectralMeasure,
};
pub use scenario::{
    almost_sure_leq, conditional_expectation, expectation, is_measurable, InfoPartition,
    ProbSpace, RandomVariable,
};
pub use solver::{
    brute_force_optimum, lagrangian_value, solve, BruteForceResult, FeasibleBox, ProblemSpec,
    Solution, SolverOptions, TracePoint,
};
