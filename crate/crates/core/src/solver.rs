//! Dominance-constrained risk minimization over a box:
//!
//! ```text
//! minimize   ϱ(F(x))
//! subject to L_{G(x)}(p) ≥ L_Y(p)   for p ∈ [α, β]
//!            l ≤ x ≤ u
//! ```
//!
//! [`solve`] runs a switching subgradient method; [`brute_force_optimum`] is
//! an exhaustive grid search used as an independent oracle.

use crate::composite::{composite_subgradient, composite_value};
use crate::dominance::{constraint_subgradient, max_violation, DominanceConstraint};
use crate::error::{configuration, domain, structural, Result, RiskError};
use crate::integrand::{Curvature, DecisionPoint, MaxAffineIntegrand};
use crate::risk::{spectral_risk, Orientation, RiskFunctional, SpectralMeasure};
use crate::scenario::InfoPartition;

/// Default feasibility tolerance on the largest constraint value.
pub const TOL_FEAS: f64 = 1e-6;
/// Feasibility tolerance of the grid search. Grid points that sit exactly on
/// the constraint boundary only violate it by rounding.
pub const BRUTE_FORCE_FEAS_TOL: f64 = 1e-9;
/// Largest total decision dimension the grid search accepts.
pub const BRUTE_FORCE_MAX_DIM: usize = 4;

/// Per-coordinate bounds `l_i ≤ x_i ≤ u_i`, applied to every block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FeasibleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(structural("box bounds must be nonempty and of equal length"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(domain(format!("box bound {i} is not finite")));
            }
            if l > u {
                return Err(domain(format!("box coordinate {i} has lower {l} > upper {u}")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    risk: RiskFunctional,
    objective: MaxAffineIntegrand,
    constraint_integrand: MaxAffineIntegrand,
    constraint: DominanceConstraint,
    feasible_box: FeasibleBox,
    info: InfoPartition,
}

impl ProblemSpec {
    pub fn new(
        risk: RiskFunctional,
        objective: MaxAffineIntegrand,
        constraint_integrand: MaxAffineIntegrand,
        constraint: DominanceConstraint,
        feasible_box: FeasibleBox,
        info: InfoPartition,
    ) -> Result<Self> {
        risk.require_monotone()?;
        if objective.curvature() != Curvature::Convex {
            return Err(configuration("the objective integrand must be convex"));
        }
        if constraint_integrand.curvature() != Curvature::Concave {
            return Err(configuration("the constraint integrand must be concave"));
        }
        if objective.space() != constraint_integrand.space() {
            return Err(structural("objective and constraint live on different spaces"));
        }
        if objective.dim() != constraint_integrand.dim() || objective.dim() != feasible_box.dim() {
            return Err(structural(format!(
                "dimension mismatch: objective {}, constraint {}, box {}",
                objective.dim(),
                constraint_integrand.dim(),
                feasible_box.dim()
            )));
        }
        if info.n_scenarios() != objective.n_scenarios() {
            return Err(structural("information partition has the wrong scenario count"));
        }
        Ok(Self {
            risk,
            objective,
            constraint_integrand,
            constraint,
            feasible_box,
            info,
        })
    }

    pub fn risk(&self) -> &RiskFunctional {
        &self.risk
    }

    pub fn objective(&self) -> &MaxAffineIntegrand {
        &self.objective
    }

    pub fn constraint_integrand(&self) -> &MaxAffineIntegrand {
        &self.constraint_integrand
    }

    pub fn constraint(&self) -> &DominanceConstraint {
        &self.constraint
    }

    pub fn feasible_box(&self) -> &FeasibleBox {
        &self.feasible_box
    }

    pub fn info(&self) -> &InfoPartition {
        &self.info
    }

    /// Per-block dimension `n`.
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// `n` times the number of information blocks.
    pub fn total_dim(&self) -> usize {
        self.dim() * self.info.n_blocks()
    }

    /// Decision with one vector per information block from a flat vector.
    pub fn decision(&self, flat: &[f64]) -> Result<DecisionPoint> {
        DecisionPoint::from_flat(self.info.clone(), self.dim(), flat)
    }

    /// `ϱ(F(x))`.
    pub fn objective_value(&self, x: &DecisionPoint) -> Result<f64> {
        composite_value(&self.risk, &self.objective, x)
    }

    /// Largest `ρ_p(G(x))` over the effective constraint levels and the level
    /// attaining it.
    pub fn violation(&self, x: &DecisionPoint) -> Result<(f64, f64)> {
        max_violation(&self.constraint_integrand, x, &self.constraint)
    }

    pub fn in_box(&self, x: &DecisionPoint) -> bool {
        x.block_values().iter().all(|b| self.feasible_box.contains(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Total number of subgradient steps.
    pub max_iter: usize,
    /// Steps per epoch. Each epoch restarts from the incumbent with half the
    /// previous initial step.
    pub epoch_len: usize,
    pub tol_feas: f64,
    /// Initial step; the box diameter when `None`.
    pub step0: Option<f64>,
    /// Starting point; the box center when `None`.
    pub start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            epoch_len: 500,
            tol_feas: TOL_FEAS,
            step0: None,
            start: None,
        }
    }
}

/// Best objective among feasible iterates, recorded whenever it improves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DecisionPoint,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub trace: Vec<TracePoint>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

struct Incumbent {
    flat: Vec<f64>,
    objective: f64,
    violation: f64,
}

/// Switching subgradient method with restarts.
///
/// At an iterate whose largest constraint value exceeds `tol_feas` the step
/// follows a subgradient of the most violated level; otherwise it follows a
/// subgradient of the objective. Steps are normalized, have length
/// `γ_e/√(t+1)` within epoch `e` with `γ_e = γ₀/2^e`, and are projected onto
/// the box. Epochs restart from the best feasible iterate found so far, or
/// the least violating one when none is feasible.
pub fn solve(problem: &ProblemSpec, opts: &SolverOptions) -> Result<Solution> {
    if opts.epoch_len == 0 {
        return Err(domain("epoch length must be positive"));
    }
    let info = problem.info();
    let n = problem.dim();
    let block_probs = info.block_probs(problem.objective().space());
    let mut flat = match &opts.start {
        Some(s) if s.len() == n => s.repeat(info.n_blocks()),
        Some(s) if s.len() == problem.total_dim() => s.clone(),
        Some(_) => return Err(structural("start point has the wrong dimension")),
        None => problem.feasible_box().center().repeat(info.n_blocks()),
    };
    project_flat(problem, &mut flat);
    let step0 = match opts.step0 {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(domain(format!("initial step {s} must be positive"))),
        None => {
            let d = problem.feasible_box().diameter();
            if d > 0.0 {
                d
            } else {
                1.0
            }
        }
    };

    let mut best_feasible: Option<Incumbent> = None;
    let mut least_violation: Option<Incumbent> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;

    'outer: for epoch in 0.. {
        if iterations >= opts.max_iter {
            break;
        }
        if epoch > 0 {
            let restart = best_feasible.as_ref().or(least_violation.as_ref());
            if let Some(inc) = restart {
                flat.clone_from(&inc.flat);
            }
        }
        let gamma = step0 * 0.5_f64.powi(epoch.min(1000) as i32);
        for t in 0..opts.epoch_len {
            if iterations >= opts.max_iter {
                break 'outer;
            }
            iterations += 1;
            let x = problem.decision(&flat)?;
            let (viol, level) = problem.violation(&x)?;
            let feasible = viol <= opts.tol_feas;
            let direction = if feasible {
                let obj = problem.objective_value(&x)?;
                if best_feasible.as_ref().is_none_or(|b| obj < b.objective) {
                    best_feasible = Some(Incumbent {
                        flat: flat.clone(),
                        objective: obj,
                        violation: viol,
                    });
                    trace.push(TracePoint {
                        iteration: iterations,
                        objective: obj,
                    });
                }
                composite_subgradient(problem.risk(), problem.objective(), &x, info)?.blocks
            } else {
                if least_violation.as_ref().is_none_or(|b| viol < b.violation) {
                    least_violation = Some(Incumbent {
                        flat: flat.clone(),
                        objective: f64::NAN,
                        violation: viol,
                    });
                }
                constraint_subgradient(problem.constraint_integrand(), &x, level, info)?
            };
            // Gradient with respect to the flat coordinates.
            let grad: Vec<f64> = direction
                .iter()
                .zip(&block_probs)
                .flat_map(|(b, pb)| b.iter().map(move |v| pb * v))
                .collect();
            let gnorm = norm(&grad);
            if gnorm == 0.0 {
                // Zero is a subgradient: a global minimizer of the objective,
                // or of the violation when infeasible.
                break 'outer;
            }
            let step = gamma / ((t + 1) as f64).sqrt() / gnorm;
            for (v, g) in flat.iter_mut().zip(&grad) {
                *v -= step * g;
            }
            project_flat(problem, &mut flat);
        }
    }

    let (inc, feasible) = match (best_feasible, least_violation) {
        (Some(b), _) => (b, true),
        (None, Some(l)) => (l, false),
        (None, None) => {
            let x = problem.decision(&flat)?;
            let viol = problem.violation(&x)?.0;
            (
                Incumbent {
                    flat,
                    objective: f64::NAN,
                    violation: viol,
                },
                viol <= opts.tol_feas,
            )
        }
    };
    let x = problem.decision(&inc.flat)?;
    let objective = problem.objective_value(&x)?;
    Ok(Solution {
        x,
        objective,
        max_violation: inc.violation,
        iterations,
        feasible,
        trace,
    })
}

fn project_flat(problem: &ProblemSpec, flat: &mut [f64]) {
    for chunk in flat.chunks_mut(problem.dim()) {
        problem.feasible_box().project(chunk);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Best feasible grid point, `None` when no grid point is feasible.
    pub x: Option<DecisionPoint>,
    pub value: f64,
    pub points_evaluated: usize,
}

impl BruteForceResult {
    pub fn feasible(&self) -> bool {
        self.x.is_some()
    }
}

fn axis(lower: f64, upper: f64, h: f64) -> Vec<f64> {
    let steps = ((upper - lower) / h + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=steps).map(|i| lower + i as f64 * h).collect();
    if let Some(last) = pts.last_mut() {
        if *last > upper {
            *last = upper;
        } else if upper - *last > 1e-12 * (1.0 + upper.abs()) {
            pts.push(upper);
        }
    }
    pts
}

/// Exhaustive search over the grid `l + i·h` (plus the upper bound) in every
/// coordinate. A point is feasible when its largest constraint value over
/// the effective levels is at most [`BRUTE_FORCE_FEAS_TOL`]. Ties keep the
/// first point in lexicographic order.
pub fn brute_force_optimum(problem: &ProblemSpec, resolution: f64) -> Result<BruteForceResult> {
    if !(resolution > 0.0) {
        return Err(domain(format!("grid resolution {resolution} must be positive")));
    }
    let total = problem.total_dim();
    if total > BRUTE_FORCE_MAX_DIM {
        return Err(RiskError::Precondition(format!(
            "grid search needs total dimension ≤ {BRUTE_FORCE_MAX_DIM}, got {total}"
        )));
    }
    let n = problem.dim();
    let fb = problem.feasible_box();
    let axes: Vec<Vec<f64>> = (0..total)
        .map(|c| axis(fb.lower()[c % n], fb.upper()[c % n], resolution))
        .collect();
    let mut idx = vec![0usize; total];
    let mut flat: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluated = 0;
    loop {
        evaluated += 1;
        let x = problem.decision(&flat)?;
        let value = problem.objective_value(&x)?;
        if best.as_ref().is_none_or(|(_, b)| value < *b)
            && problem.violation(&x)?.0 <= BRUTE_FORCE_FEAS_TOL
        {
            best = Some((flat.clone(), value));
        }
        // Odometer increment, last coordinate fastest.
        let mut c = total;
        loop {
            if c == 0 {
                let (x, value) = match best {
                    Some((f, v)) => (Some(problem.decision(&f)?), v),
                    None => (None, f64::INFINITY),
                };
                return Ok(BruteForceResult {
                    x,
                    value,
                    points_evaluated: evaluated,
                });
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < axes[c].len() {
                flat[c] = axes[c][idx[c]];
                break;
            }
            idx[c] = 0;
            flat[c] = axes[c][0];
        }
    }
}

/// `ϱ(F(x)) + κ·Σ_i w_i AVaR⁻_{p_i}(G(x))` for a lower-oriented measure
/// `μ̂ = Σ w_i δ_{p_i}` supported in `[α, β]`.
pub fn lagrangian_value(
    problem: &ProblemSpec,
    x: &DecisionPoint,
    kappa: f64,
    mu: &SpectralMeasure,
) -> Result<f64> {
    if mu.orientation() != Orientation::LowerProfit {
        return Err(configuration("the multiplier measure must be lower-oriented"));
    }
    if !(kappa >= 0.0) {
        return Err(domain(format!("multiplier κ = {kappa} must be nonnegative")));
    }
    let c = problem.constraint();
    if let Some(p) = mu.levels().iter().find(|&&p| p < c.alpha() || p > c.beta()) {
        return Err(domain(format!("measure level {p} outside [{}, {}]", c.alpha(), c.beta())));
    }
    let z = problem.constraint_integrand().evaluate(x)?;
    Ok(problem.objective_value(x)? + kappa * spectral_risk(&z, mu)?)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scenario::{ProbSpace, RandomVariable};

    /// `f(x, k) = |x − c_k|`, c = (1, 2), ϱ = E, box [0, 3], slack constraint.
    pub(crate) fn median_problem() -> ProblemSpec {
        let s = ProbSpace::uniform(2).unwrap();
        let pieces = |c: f64| {
            vec![
                crate::integrand::AffinePiece::new(vec![1.0], -c),
                crate::integrand::AffinePiece::new(vec![-1.0], c),
            ]
        };
        let f = MaxAffineIntegrand::new(&s, 1, Curvature::Convex, vec![pieces(1.0), pieces(2.0)])
            .unwrap();
        let g = MaxAffineIntegrand::affine(&s, Curvature::Concave, vec![vec![0.0]; 2], vec![0.0; 2])
            .unwrap();
        let y = RandomVariable::new(&s, vec![-1.0, -1.0]).unwrap();
        let c = DominanceConstraint::new(y, 0.5, 1.0, vec![0.5, 1.0]).unwrap();
        ProblemSpec::new(
            RiskFunctional::Expectation,
            f,
            g,
            c,
            FeasibleBox::new(vec![0.0], vec![3.0]).unwrap(),
            InfoPartition::trivial(2),
        )
        .unwrap()
    }

    /// Minimize x on [0, 3] subject to E[x] ≥ E[Y] = 1.
    pub(crate) fn active_scalar_problem(benchmark: f64) -> ProblemSpec {
        let s = ProbSpace::uniform(2).unwrap();
        let f = MaxAffineIntegrand::affine(&s, Curvature::Convex, vec![vec![1.0]; 2], vec![0.0; 2])
            .unwrap();
        let g = MaxAffineIntegrand::affine(&s, Curvature::Concave, vec![vec![1.0]; 2], vec![0.0; 2])
            .unwrap();
        let y = RandomVariable::new(&s, vec![benchmark; 2]).unwrap();
        let c = DominanceConstraint::new(y, 1.0, 1.0, vec![1.0]).unwrap();
        ProblemSpec::new(
            RiskFunctional::Expectation,
            f,
            g,
            c,
            FeasibleBox::new(vec![0.0], vec![3.0]).unwrap(),
            InfoPartition::trivial(2),
        )
        .unwrap()
    }

    #[test]
    fn median_instance() {
        let p = median_problem();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(sol.feasible);
        let x = sol.x.block_values()[0][0];
        assert!((1.0..=2.0).contains(&x), "{x}");
        assert!((sol.objective - 0.5).abs() < 1e-12);
        let bf = brute_force_optimum(&p, 1e-3).unwrap();
        assert!((bf.value - 0.5).abs() < 1e-12);
        assert_eq!(bf.x.unwrap().block_values()[0][0], 1.0);
    }

    #[test]
    fn active_constraint_instance() {
        let p = active_scalar_problem(1.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(sol.feasible);
        assert!((sol.objective - 1.0).abs() < 1e-5, "{}", sol.objective);
        let bf = brute_force_optimum(&p, 1e-3).unwrap();
        assert!((bf.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_instance() {
        // G(x) = x ≤ 3 < E[Y] = 4.
        let p = active_scalar_problem(4.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(!sol.feasible);
        assert!((sol.max_violation - 1.0).abs() < 1e-12);
        assert_eq!(sol.x.block_values()[0][0], 3.0);
        assert!(!brute_force_optimum(&p, 1e-2).unwrap().feasible());
    }

    #[test]
    fn solution_invariants() {
        let p = active_scalar_problem(1.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(p.in_box(&sol.x));
        assert_eq!(sol.objective, p.objective_value(&sol.x).unwrap());
        assert!(sol.trace.windows(2).all(|w| w[1].objective < w[0].objective));
    }

    #[test]
    fn budget_monotonicity() {
        let p = active_scalar_problem(1.0);
        let mut prev = f64::INFINITY;
        for budget in [10, 100, 1000, 5000] {
            let opts = SolverOptions {
                max_iter: budget,
                ..SolverOptions::default()
            };
            let v = solve(&p, &opts).unwrap().objective;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn determinism() {
        let p = median_problem();
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brute_force_refinement_never_worsens() {
        let p = active_scalar_problem(1.05);
        let coarse = brute_force_optimum(&p, 0.1).unwrap().value;
        let fine = brute_force_optimum(&p, 0.05).unwrap().value;
        assert!(fine <= coarse);
        assert!((fine - 1.05).abs() < 1e-12);
    }

    #[test]
    fn brute_force_refuses_large_dimension() {
        let s = ProbSpace::uniform(1).unwrap();
        let f = MaxAffineIntegrand::affine(&s, Curvature::Convex, vec![vec![0.0; 5]], vec![0.0])
            .unwrap();
        let g = MaxAffineIntegrand::affine(&s, Curvature::Concave, vec![vec![0.0; 5]], vec![0.0])
            .unwrap();
        let y = RandomVariable::new(&s, vec![0.0]).unwrap();
        let p = ProblemSpec::new(
            RiskFunctional::Expectation,
            f,
            g,
            DominanceConstraint::new(y, 1.0, 1.0, vec![1.0]).unwrap(),
            FeasibleBox::new(vec![0.0; 5], vec![1.0; 5]).unwrap(),
            InfoPartition::trivial(1),
        )
        .unwrap();
        assert!(matches!(
            brute_force_optimum(&p, 0.5),
            Err(RiskError::Precondition(_))
        ));
    }

    #[test]
    fn lagrangian_examples() {
        let p = active_scalar_problem(1.0);
        let x = p.decision(&[2.0]).unwrap();
        let mu = SpectralMeasure::point_mass(1.0, Orientation::LowerProfit).unwrap();
        assert_eq!(lagrangian_value(&p, &x, 0.0, &mu).unwrap(), 2.0);
        // AVaR⁻ of the constant 2 is −2.
        assert_eq!(lagrangian_value(&p, &x, 3.0, &mu).unwrap(), 2.0 - 6.0);
        let upper = SpectralMeasure::point_mass(1.0, Orientation::UpperLoss).unwrap();
        assert!(matches!(
            lagrangian_value(&p, &x, 1.0, &upper),
            Err(RiskError::Configuration(_))
        ));
    }

    #[test]
    fn box_axis_includes_upper_bound() {
        assert_eq!(axis(0.0, 1.0, 0.3).len(), 5);
        assert_eq!(*axis(0.0, 1.0, 0.3).last().unwrap(), 1.0);
        assert_eq!(axis(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(axis(2.0, 2.0, 0.1), vec![2.0]);
    }
}
