//! Seeded random instance generators and reduced-scale property checks.
//!
//! The generators are shared with the test suites; [`run`] is what the
//! command-line `selftest` executes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::composite::{composite_directional, composite_subgradient, composite_value, steepest_subgradient};
use crate::dominance::{
    first_order_by_distribution, first_order_by_quantile, second_order_by_lorenz,
    second_order_by_shortfall,
};
use crate::error::Result;
use crate::integrand::{AffinePiece, Curvature, DecisionPoint, MaxAffineIntegrand};
use crate::quantile::{lorenz, lorenz_conjugate};
use crate::risk::{lorenz_supergradient, Orientation, RiskFunctional, SpectralMeasure};
use crate::scenario::{InfoPartition, ProbSpace, RandomVariable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform with probability 1/4, otherwise random positive weights.
pub fn random_space(rng: &mut impl Rng, n: usize) -> ProbSpace {
    if rng.gen_bool(0.25) {
        return ProbSpace::uniform(n).expect("n > 0");
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    ProbSpace::new(w.iter().map(|v| v / total).collect()).expect("valid weights")
}

/// Values in `[lo, hi]`; with probability 0.3 rounded to integers so that
/// ties occur.
pub fn random_variable(rng: &mut impl Rng, space: &ProbSpace, lo: f64, hi: f64) -> RandomVariable {
    let round = rng.gen_bool(0.3);
    let vals = (0..space.len())
        .map(|_| {
            let v = rng.gen_range(lo..=hi);
            if round {
                v.round().clamp(lo, hi)
            } else {
                v
            }
        })
        .collect();
    RandomVariable::new(space, vals).expect("finite values")
}

pub fn random_vector(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Up to `max_pieces` pieces per scenario with slopes in `[−2, 2]`. When
/// `kink_at` is given, about half the pieces are shifted to pass through the
/// first piece's value there, which produces ties in the active set.
pub fn random_integrand(
    rng: &mut impl Rng,
    space: &ProbSpace,
    dim: usize,
    max_pieces: usize,
    curvature: Curvature,
    kink_at: Option<&DecisionPoint>,
) -> MaxAffineIntegrand {
    let pieces = (0..space.len())
        .map(|k| {
            let m = rng.gen_range(1..=max_pieces);
            let mut out: Vec<AffinePiece> = Vec::with_capacity(m);
            for j in 0..m {
                let slope = random_vector(rng, dim, -2.0, 2.0);
                let mut intercept = rng.gen_range(-1.0..=1.0);
                if let Some(x) = kink_at {
                    if j > 0 && rng.gen_bool(0.5) {
                        let target = out[0].eval(x.at(k));
                        let lin: f64 = slope.iter().zip(x.at(k)).map(|(a, b)| a * b).sum();
                        intercept = target - lin;
                    }
                }
                out.push(AffinePiece::new(slope, intercept));
            }
            out
        })
        .collect();
    MaxAffineIntegrand::new(space, dim, curvature, pieces).expect("consistent shapes")
}

/// Expectation, upper AVaR at 0.3, or a two-atom upper spectral measure.
pub fn random_risk(rng: &mut impl Rng) -> RiskFunctional {
    match rng.gen_range(0..3) {
        0 => RiskFunctional::Expectation,
        1 => RiskFunctional::avar_upper(0.3).expect("valid level"),
        _ => {
            let a = rng.gen_range(0.05..0.5);
            let b = rng.gen_range(0.5..=1.0);
            let w = rng.gen_range(0.1..0.9);
            RiskFunctional::Spectral(
                SpectralMeasure::new(vec![a, b], vec![w, 1.0 - w], Orientation::UpperLoss)
                    .expect("valid measure"),
            )
        }
    }
}

/// Two blocks: the first `split` scenarios and the rest.
pub fn two_block_partition(n: usize, split: usize) -> InfoPartition {
    InfoPartition::new(n, vec![(0..split).collect(), (split..n).collect()]).expect("valid split")
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub worst: f64,
}

fn outcome(name: &'static str, cases: usize, worst: f64, tol: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= tol,
        cases,
        worst,
    }
}

fn check_fenchel(rng: &mut impl Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    let cases = 20;
    for _ in 0..cases {
        let n = rng.gen_range(1..=20);
        let s = random_space(rng, n);
        let z = random_variable(rng, &s, -10.0, 10.0);
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let l = lorenz(&z, p).finite().expect("p in [0, 1]");
            worst = worst.max((l - lorenz_conjugate(&z, p)?).abs());
        }
    }
    Ok(outcome("lorenz-conjugate duality", cases, worst, 1e-9))
}

fn check_dominance_routes(rng: &mut impl Rng) -> Result<CheckOutcome> {
    let cases = 100;
    let mut failures = 0;
    for _ in 0..cases {
        let (x, y) = random_dominance_pair(rng);
        let ssd = second_order_by_shortfall(&x, &y);
        let fsd = first_order_by_distribution(&x, &y);
        if ssd != second_order_by_lorenz(&x, &y)
            || fsd != first_order_by_quantile(&x, &y)?
            || (fsd && !ssd)
        {
            failures += 1;
        }
    }
    Ok(outcome("dominance route agreement", cases, failures as f64, 0.0))
}

/// A pair `(X, Y)` that is dominated, dominating or unrelated with roughly
/// equal frequency. `X` and `Y` may live on different spaces.
pub fn random_dominance_pair(rng: &mut impl Rng) -> (RandomVariable, RandomVariable) {
    let n = rng.gen_range(1..=30);
    let s = random_space(rng, n);
    let y = random_variable(rng, &s, -5.0, 5.0);
    let x = match rng.gen_range(0..4) {
        0 => {
            let m = rng.gen_range(1..=30);
            let t = random_space(rng, m);
            random_variable(rng, &t, -5.0, 5.0)
        }
        1 => {
            // Monotone improvement: first-order dominance.
            let bumps = random_vector(rng, n, 0.0, 1.0);
            y.zip_with(&RandomVariable::new(&s, bumps).expect("finite"), |a, b| a + b)
                .expect("same space")
        }
        2 => {
            // Contraction toward the mean: second-order dominance.
            let lambda = rng.gen_range(0.0..1.0);
            let m = y.expectation();
            y.map(|v| lambda * v + (1.0 - lambda) * m).expect("finite")
        }
        _ => {
            let shift = rng.gen_range(-0.5..0.5);
            y.map(|v| v + shift).expect("finite")
        }
    };
    (x, y)
}

fn check_lorenz_supergradient(rng: &mut impl Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    let cases = 20;
    for _ in 0..cases {
        let n = rng.gen_range(1..=20);
        let s = random_space(rng, n);
        let z = random_variable(rng, &s, -10.0, 10.0);
        let p = rng.gen_range(0.01..=1.0);
        let pz = lorenz_supergradient(&z, p)?;
        let lz = lorenz(&z, p).finite().expect("p in (0, 1]");
        for _ in 0..20 {
            let v = random_variable(rng, &s, -10.0, 10.0);
            let lv = lorenz(&v, p).finite().expect("p in (0, 1]");
            let lin: f64 = (0..n).map(|k| s.prob(k) * pz[k] * (v.values()[k] - z.values()[k])).sum();
            worst = worst.max(lv - lz - lin);
        }
    }
    Ok(outcome("lorenz supergradient inequality", cases, worst, 1e-10))
}

fn check_chain_rule(rng: &mut impl Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    let cases = 10;
    for _ in 0..cases {
        let n = rng.gen_range(1..=10);
        let dim = rng.gen_range(1..=3);
        let s = random_space(rng, n);
        let x = DecisionPoint::deterministic(n, random_vector(rng, dim, -1.0, 1.0));
        let f = random_integrand(rng, &s, dim, 4, Curvature::Convex, Some(&x));
        let rho = random_risk(rng);
        let info = InfoPartition::trivial(n);
        let g = composite_subgradient(&rho, &f, &x, &info)?;
        let phi_x = composite_value(&rho, &f, &x)?;
        for _ in 0..100 {
            let y = DecisionPoint::deterministic(n, random_vector(rng, dim, -2.0, 2.0));
            let h = x.add_scaled(-1.0, &y)?.restrict_to(&info)?;
            let lin = phi_x - g.pairing(&h);
            worst = worst.max(lin - composite_value(&rho, &f, &y)?);
            let dir = composite_directional(&rho, &f, &x, &y)?;
            let steep = steepest_subgradient(&rho, &f, &x, &info, &y)?.pairing(&y);
            worst = worst.max((dir - steep).abs());
        }
    }
    Ok(outcome("composite subgradient and support function", cases, worst, 1e-10))
}

fn check_local_property(rng: &mut impl Rng) -> Result<CheckOutcome> {
    let cases = 50;
    let mut failures = 0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=10);
        let dim = rng.gen_range(1..=3);
        let s = random_space(rng, n);
        let x = DecisionPoint::scenario_wise((0..n).map(|_| random_vector(rng, dim, -1.0, 1.0)).collect())?;
        let f = random_integrand(rng, &s, dim, 4, Curvature::Convex, Some(&x));
        let h = DecisionPoint::scenario_wise((0..n).map(|_| random_vector(rng, dim, -1.0, 1.0)).collect())?;
        let event: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if !f.local_property_check(&x, &h, &event)? {
            failures += 1;
        }
    }
    Ok(outcome("local property", cases, failures as f64, 0.0))
}

fn check_difference_quotients(rng: &mut impl Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    let cases = 50;
    for _ in 0..cases {
        let n = rng.gen_range(1..=10);
        let dim = rng.gen_range(1..=3);
        let s = random_space(rng, n);
        let x = DecisionPoint::deterministic(n, random_vector(rng, dim, -1.0, 1.0));
        let f = random_integrand(rng, &s, dim, 4, Curvature::Convex, Some(&x));
        let h = DecisionPoint::deterministic(n, random_vector(rng, dim, -1.0, 1.0));
        let t1 = rng.gen_range(0.01..1.0);
        let t2 = rng.gen_range(t1..=1.0);
        let q1 = f.differential_quotient(&x, &h, t1)?;
        let q2 = f.differential_quotient(&x, &h, t2)?;
        let fwd = f.differential_quotient(&x, &h, 1.0)?;
        let bwd = f.differential_quotient(&x, &h.add_scaled(-2.0, &h)?, 1.0)?;
        let d = f.directional_derivative(&x, &h)?;
        for k in 0..n {
            let back = -bwd.values()[k];
            worst = worst
                .max(q1.values()[k] - q2.values()[k])
                .max(d.values()[k] - q1.values()[k])
                .max(back - q1.values()[k])
                .max(q2.values()[k] - fwd.values()[k]);
        }
    }
    Ok(outcome("difference quotient monotonicity", cases, worst, 1e-12))
}

/// Runs every check with the given seed.
pub fn run(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut r = rng(seed);
    Ok(vec![
        check_fenchel(&mut r)?,
        check_dominance_routes(&mut r)?,
        check_lorenz_supergradient(&mut r)?,
        check_chain_rule(&mut r)?,
        check_local_property(&mut r)?,
        check_difference_quotients(&mut r)?,
    ])
}
