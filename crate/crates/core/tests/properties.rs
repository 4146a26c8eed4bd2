//! Property tests for the structural invariants of the public types and the
//! order, homogeneity and convexity laws of the Lorenz and AVaR maps.

use proptest::prelude::*;
use riskcalc_core::{
    avar_identifier, avar_lower, avar_upper, certify, dominates_first_order, dominates_second_order,
    expectation, in_b, lorenz, quantile, solve, spectral_risk, Certificate, CertifyOptions,
    Curvature, DecisionPoint, DominanceConstraint, FeasibleBox, InfoPartition, MaxAffineIntegrand,
    AffinePiece, Orientation, ProbSpace, ProblemSpec, RandomVariable, RiskFunctional,
    SortedScenarioView, SolverOptions, SpectralMeasure,
};

fn space_and_values(max_n: usize) -> impl Strategy<Value = (ProbSpace, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05..1.0_f64, n),
            prop::collection::vec(-10.0..10.0_f64, n),
            any::<bool>(),
        )
            .prop_map(|(w, v, round)| {
                let total: f64 = w.iter().sum();
                let space = ProbSpace::new(w.iter().map(|x| x / total).collect()).unwrap();
                let v = if round { v.iter().map(|x| x.round()).collect() } else { v };
                (space, v)
            })
    })
}

fn rv(space: &ProbSpace, v: Vec<f64>) -> RandomVariable {
    RandomVariable::new(space, v).unwrap()
}

fn l(z: &RandomVariable, p: f64) -> f64 {
    lorenz(z, p).finite().unwrap()
}

proptest! {
    #[test]
    fn probabilities_are_positive_and_normalized((space, _) in space_and_values(30)) {
        prop_assert!(space.probs().iter().all(|&p| p > 0.0));
        prop_assert!((space.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sorted_view_is_monotone_and_ends_at_one((space, v) in space_and_values(30)) {
        let view = SortedScenarioView::new(&rv(&space, v));
        prop_assert!(view.sorted_values().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(view.cumulative().windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*view.cumulative().last().unwrap(), 1.0);
    }

    #[test]
    fn quantile_is_nondecreasing((space, v) in space_and_values(20), a in 0.001..1.0_f64, b in 0.001..1.0_f64) {
        let z = rv(&space, v);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantile(&z, lo).unwrap() <= quantile(&z, hi).unwrap());
    }

    #[test]
    fn lorenz_endpoints_and_convexity_in_level((space, v) in space_and_values(20), a in 0.0..=1.0_f64, b in 0.0..=1.0_f64) {
        let z = rv(&space, v);
        prop_assert_eq!(l(&z, 0.0), 0.0);
        prop_assert!((l(&z, 1.0) - expectation(&z)).abs() <= 1e-12);
        let mid = l(&z, 0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (l(&z, a) + l(&z, b)) + 1e-12);
    }

    #[test]
    fn lorenz_is_positively_homogeneous_and_translation_equivariant(
        (space, v) in space_and_values(20), c in 0.0..5.0_f64, shift in -5.0..5.0_f64, p in 0.0..=1.0_f64,
    ) {
        let z = rv(&space, v.clone());
        let scaled = rv(&space, v.iter().map(|x| c * x).collect());
        let shifted = rv(&space, v.iter().map(|x| x + shift).collect());
        prop_assert!((l(&scaled, p) - c * l(&z, p)).abs() <= 1e-11);
        prop_assert!((l(&shifted, p) - l(&z, p) - shift * p).abs() <= 1e-11);
    }

    #[test]
    fn lorenz_is_concave_in_the_variable((space, v) in space_and_values(20), seed in prop::collection::vec(-10.0..10.0_f64, 20), p in 0.0..=1.0_f64) {
        let n = space.len();
        let z = rv(&space, v.clone());
        let w = rv(&space, seed[..n].to_vec());
        let mid = rv(&space, v.iter().zip(&seed).map(|(a, b)| 0.5 * (a + b)).collect());
        prop_assert!(l(&mid, p) >= 0.5 * (l(&z, p) + l(&w, p)) - 1e-12);
    }

    #[test]
    fn avar_brackets_the_mean_and_is_monotone_in_level((space, v) in space_and_values(20), a in 0.01..=1.0_f64, b in 0.01..=1.0_f64) {
        let z = rv(&space, v);
        let e = expectation(&z);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(avar_lower(&z, lo).unwrap() >= -e - 1e-12);
        prop_assert!(avar_upper(&z, lo).unwrap() >= e - 1e-12);
        prop_assert!(avar_upper(&z, lo).unwrap() >= avar_upper(&z, hi).unwrap() - 1e-12);
        prop_assert!(avar_lower(&z, lo).unwrap() >= avar_lower(&z, hi).unwrap() - 1e-12);
        let neg = z.map(|x| -x).unwrap();
        prop_assert!((avar_upper(&neg, lo).unwrap() - avar_lower(&z, lo).unwrap()).abs() <= 1e-11 * (1.0 + e.abs()));
    }

    #[test]
    fn identifiers_are_feasible_and_attain_the_value((space, v) in space_and_values(20), p in 0.01..=1.0_f64, upper in any::<bool>()) {
        let z = rv(&space, v);
        let orientation = if upper { Orientation::UpperLoss } else { Orientation::LowerProfit };
        let id = avar_identifier(&z, p, orientation).unwrap();
        prop_assert!(id.is_feasible(&space, 1e-10));
        // The lower identifier pairs to the lower-tail mean, which is −AVaR⁻.
        let target = if upper { avar_upper(&z, p).unwrap() } else { -avar_lower(&z, p).unwrap() };
        prop_assert!((id.pair(&z) - target).abs() <= 1e-10 * (1.0 + target.abs()));
    }

    #[test]
    fn spectral_risk_is_the_weighted_avar((space, v) in space_and_values(20), a in 0.01..0.5_f64, b in 0.5..=1.0_f64, w in 0.0..=1.0_f64) {
        let z = rv(&space, v);
        let mu = SpectralMeasure::new(vec![a, b], vec![w, 1.0 - w], Orientation::UpperLoss).unwrap();
        let expected = w * avar_upper(&z, a).unwrap() + (1.0 - w) * avar_upper(&z, b).unwrap();
        prop_assert!((spectral_risk(&z, &mu).unwrap() - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn dominance_is_reflexive_and_first_order_implies_second((space, v) in space_and_values(20), bumps in prop::collection::vec(0.0..1.0_f64, 20)) {
        let y = rv(&space, v.clone());
        prop_assert!(dominates_first_order(&y, &y).unwrap());
        prop_assert!(dominates_second_order(&y, &y).unwrap());
        let x = rv(&space, v.iter().zip(&bumps).map(|(a, b)| a + b).collect());
        prop_assert!(dominates_first_order(&x, &y).unwrap());
        prop_assert!(dominates_second_order(&x, &y).unwrap());
    }

    #[test]
    fn lorenz_constraint_set_is_convex(
        (space, v) in space_and_values(15),
        d1 in prop::collection::vec(-1.0..2.0_f64, 15),
        d2 in prop::collection::vec(-1.0..2.0_f64, 15),
        alpha in 0.05..0.5_f64,
    ) {
        let n = space.len();
        let y = rv(&space, v.clone());
        let c = DominanceConstraint::uniform_grid(y, alpha, 1.0, 6).unwrap();
        let x1 = rv(&space, v.iter().zip(&d1).map(|(a, b)| a + b).collect());
        let x2 = rv(&space, v.iter().zip(&d2).map(|(a, b)| a + b).collect());
        if in_b(&x1, c.benchmark(), &c) && in_b(&x2, c.benchmark(), &c) {
            let mid = rv(&space, (0..n).map(|k| 0.5 * (x1.values()[k] + x2.values()[k])).collect());
            prop_assert!(in_b(&mid, c.benchmark(), &c));
        }
    }

    #[test]
    fn partitions_cover_every_scenario_once(n in 1..20_usize, cuts in prop::collection::vec(any::<bool>(), 20)) {
        let mut blocks: Vec<Vec<usize>> = vec![vec![0]];
        for k in 1..n {
            if cuts[k] {
                blocks.push(vec![k]);
            } else {
                blocks.last_mut().unwrap().push(k);
            }
        }
        let p = InfoPartition::new(n, blocks).unwrap();
        let mut seen = vec![0; n];
        for b in p.blocks() {
            for &k in b {
                seen[k] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for k in 0..n {
            prop_assert!(p.block(p.block_of(k)).contains(&k));
        }
    }

    #[test]
    fn default_selector_picks_an_active_gradient(
        (space, _) in space_and_values(8),
        coeffs in prop::collection::vec((-2.0..2.0_f64, -2.0..2.0_f64, -1.0..1.0_f64), 32),
        x in prop::collection::vec(-1.0..1.0_f64, 2),
    ) {
        let n = space.len();
        let pieces: Vec<Vec<AffinePiece>> = (0..n)
            .map(|k| (0..4).map(|j| {
                let (a, b, c) = coeffs[4 * k + j];
                AffinePiece::new(vec![a, b], c)
            }).collect())
            .collect();
        let f = MaxAffineIntegrand::new(&space, 2, Curvature::Convex, pieces).unwrap();
        let xp = DecisionPoint::deterministic(n, x);
        let sel = f.subgradient_selector(&xp, None).unwrap();
        for k in 0..n {
            let active = f.active_pieces(k, xp.at(k));
            prop_assert!(active.iter().any(|&j| f.pieces()[k][j].slope == sel.vectors[k]));
        }
    }
}

fn scalar_problem(target: f64, kink: f64) -> ProblemSpec {
    // minimize E|x − kink| subject to E[x·r] dominating a constant benchmark.
    let space = ProbSpace::uniform(2).unwrap();
    let f = MaxAffineIntegrand::new(
        &space,
        1,
        Curvature::Convex,
        vec![
            vec![AffinePiece::new(vec![1.0], -kink), AffinePiece::new(vec![-1.0], kink)],
            vec![AffinePiece::new(vec![2.0], -2.0 * kink), AffinePiece::new(vec![-2.0], 2.0 * kink)],
        ],
    )
    .unwrap();
    let g = MaxAffineIntegrand::new(
        &space,
        1,
        Curvature::Concave,
        vec![vec![AffinePiece::new(vec![1.0], 0.0)], vec![AffinePiece::new(vec![0.5], 0.0)]],
    )
    .unwrap();
    let y = RandomVariable::new(&space, vec![target, target]).unwrap();
    let c = DominanceConstraint::uniform_grid(y, 0.5, 1.0, 3).unwrap();
    let fb = FeasibleBox::new(vec![0.0], vec![3.0]).unwrap();
    ProblemSpec::new(RiskFunctional::avar_upper(0.5).unwrap(), f, g, c, fb, InfoPartition::trivial(2)).unwrap()
}

fn check_certificate(cert: &Certificate) -> Result<(), TestCaseError> {
    prop_assert!(cert.residual >= 0.0 && cert.complementarity_gap >= 0.0 && cert.kappa >= 0.0);
    prop_assert_eq!(cert.nu.len(), cert.weights.len());
    for (&(p, nu), &(_, w)) in cert.nu.iter().zip(&cert.weights) {
        prop_assert_eq!(nu, cert.kappa * w / p);
    }
    if !cert.weights.is_empty() {
        let total: f64 = cert.weights.iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_stay_in_the_box_and_report_their_objective(target in 0.0..1.0_f64, kink in 0.0..3.0_f64) {
        let spec = scalar_problem(target, kink);
        let opts = SolverOptions { max_iter: 3000, ..SolverOptions::default() };
        let sol = solve(&spec, &opts).unwrap();
        prop_assert!(spec.in_box(&sol.x));
        prop_assert_eq!(sol.objective, spec.objective_value(&sol.x).unwrap());
        let cert = certify(&spec, &sol.x, &CertifyOptions::default()).unwrap();
        check_certificate(&cert)?;
    }

    #[test]
    fn certificates_are_well_formed_at_arbitrary_points(target in 0.0..1.0_f64, kink in 0.0..3.0_f64, x in 0.0..=3.0_f64) {
        let spec = scalar_problem(target, kink);
        let xp = spec.decision(&[x]).unwrap();
        let cert = certify(&spec, &xp, &CertifyOptions::default()).unwrap();
        check_certificate(&cert)?;
        if cert.accepted {
            prop_assert!(cert.feasible);
        }
    }
}
