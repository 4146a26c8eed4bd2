//! Seeded fixtures shared by the benchmarks.

use riskcalc_core::selftest::{random_integrand, random_space, random_variable, random_vector, rng};
use riskcalc_core::{
    Curvature, DecisionPoint, DominanceConstraint, FeasibleBox, InfoPartition, MaxAffineIntegrand,
    ProblemSpec, RandomVariable, RiskFunctional,
};

pub fn variable(n: usize, seed: u64) -> RandomVariable {
    let mut r = rng(seed);
    let s = random_space(&mut r, n);
    random_variable(&mut r, &s, -10.0, 10.0)
}

pub struct Composite {
    pub risk: RiskFunctional,
    pub integrand: MaxAffineIntegrand,
    pub point: DecisionPoint,
    pub info: InfoPartition,
}

/// AVaR at 0.3 of a random max-affine integrand with kinks at the point.
pub fn composite(n: usize, dim: usize, pieces: usize, seed: u64) -> Composite {
    let mut r = rng(seed);
    let s = random_space(&mut r, n);
    let point = DecisionPoint::deterministic(n, random_vector(&mut r, dim, -1.0, 1.0));
    let integrand = random_integrand(&mut r, &s, dim, pieces, Curvature::Convex, Some(&point));
    Composite {
        risk: RiskFunctional::avar_upper(0.3).expect("valid level"),
        integrand,
        point,
        info: InfoPartition::trivial(n),
    }
}

/// A feasible problem on `[-1, 1]^dim`: the benchmark sits below `G` at the
/// box center, so the center is strictly feasible.
pub fn problem(n: usize, dim: usize, seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let s = random_space(&mut r, n);
    let f = random_integrand(&mut r, &s, dim, 4, Curvature::Convex, None);
    let g = random_integrand(&mut r, &s, dim, 2, Curvature::Concave, None);
    let center = DecisionPoint::deterministic(n, vec![0.0; dim]);
    let y = g.evaluate(&center).expect("dimensions match").map(|v| v - 0.1).expect("finite");
    let c = DominanceConstraint::uniform_grid(y, 0.1, 1.0, 10).expect("valid grid");
    let fb = FeasibleBox::new(vec![-1.0; dim], vec![1.0; dim]).expect("valid box");
    ProblemSpec::new(RiskFunctional::avar_upper(0.3).expect("valid level"), f, g, c, fb, InfoPartition::trivial(n))
        .expect("consistent problem")
}
