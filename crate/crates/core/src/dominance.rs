//! First- and second-order stochastic dominance, and Lorenz dominance
//! constraints `L_{G(x)}(p) ≥ L_Y(p)` for `p` in an interval `[α, β]`.
//!
//! All functions involved are step or piecewise-linear functions with
//! breakpoints at atoms (distribution side) or cumulative masses (quantile
//! side), so every "for all" below is checked exactly on a finite set.

use crate::composite::{assemble, CompositeGradient};
use crate::error::{configuration, domain, structural, Result, RiskError};
use crate::integrand::{dot, Curvature, DecisionPoint, Extreme, MaxAffineIntegrand};
use crate::quantile::{integrated_cdf, SortedScenarioView};
use crate::risk::{avar_identifier, identifier_lmo, Orientation, LMO_TIE_TOL};
use crate::scenario::{InfoPartition, RandomVariable};

/// Slack on probability comparisons.
const PROB_TOL: f64 = 1e-12;
/// Relative slack on value comparisons, scaled by `1 + max|value|`.
const VALUE_RTOL: f64 = 1e-12;
/// Levels closer than this are merged when building evaluation sets.
const LEVEL_MERGE_TOL: f64 = 1e-15;

fn value_tol(x: &RandomVariable, y: &RandomVariable) -> f64 {
    let scale = x
        .values()
        .iter()
        .chain(y.values())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    VALUE_RTOL * (1.0 + scale)
}

fn merged_atoms(x: &RandomVariable, y: &RandomVariable) -> Vec<f64> {
    let mut atoms: Vec<f64> = x.values().iter().chain(y.values()).copied().collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    atoms
}

fn merge_levels(mut levels: Vec<f64>) -> Vec<f64> {
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= LEVEL_MERGE_TOL);
    levels
}

fn merged_breakpoints(xv: &SortedScenarioView, yv: &SortedScenarioView) -> Vec<f64> {
    let mut levels = xv.breakpoints();
    levels.extend(yv.breakpoints());
    merge_levels(levels)
}

/// `H_X(η) ≤ H_Y(η)` at every atom of `X` or `Y`.
pub fn first_order_by_distribution(x: &RandomVariable, y: &RandomVariable) -> bool {
    let xv = SortedScenarioView::new(x);
    let yv = SortedScenarioView::new(y);
    merged_atoms(x, y)
        .iter()
        .all(|&eta| xv.cdf(eta) <= yv.cdf(eta) + PROB_TOL)
}

/// `Q_X(p) ≥ Q_Y(p)` at every cumulative breakpoint of `X` or `Y`.
pub fn first_order_by_quantile(x: &RandomVariable, y: &RandomVariable) -> Result<bool> {
    let xv = SortedScenarioView::new(x);
    let yv = SortedScenarioView::new(y);
    for p in merged_breakpoints(&xv, &yv) {
        if xv.quantile(p)? < yv.quantile(p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `X ⪰₁ Y`: `H_X ≤ H_Y` everywhere, equivalently `Q_X ≥ Q_Y` on `(0, 1)`.
///
/// Both characterizations are evaluated; a disagreement is reported as an
/// invariant violation.
pub fn dominates_first_order(x: &RandomVariable, y: &RandomVariable) -> Result<bool> {
    let by_cdf = first_order_by_distribution(x, y);
    let by_quantile = first_order_by_quantile(x, y)?;
    if by_cdf != by_quantile {
        return Err(RiskError::InvariantViolation(format!(
            "first-order tests disagree: distribution side {by_cdf}, quantile side {by_quantile}"
        )));
    }
    Ok(by_cdf)
}

/// `H2_X(η) ≤ H2_Y(η)` at every atom of `X` or `Y`. Both sides are
/// piecewise linear with kinks at atoms, so this covers all `η`.
pub fn second_order_by_shortfall(x: &RandomVariable, y: &RandomVariable) -> bool {
    let tol = value_tol(x, y);
    merged_atoms(x, y)
        .iter()
        .all(|&eta| integrated_cdf(x, eta) <= integrated_cdf(y, eta) + tol)
}

/// `L_X(p) ≥ L_Y(p)` at every cumulative breakpoint of `X` or `Y`.
pub fn second_order_by_lorenz(x: &RandomVariable, y: &RandomVariable) -> bool {
    let tol = value_tol(x, y);
    let xv = SortedScenarioView::new(x);
    let yv = SortedScenarioView::new(y);
    merged_breakpoints(&xv, &yv)
        .iter()
        .all(|&p| xv.lorenz_unchecked(p) >= yv.lorenz_unchecked(p) - tol)
}

/// `X ⪰₂ Y`: `H2_X ≤ H2_Y` everywhere, equivalently `L_X ≥ L_Y` on `(0, 1]`.
pub fn dominates_second_order(x: &RandomVariable, y: &RandomVariable) -> Result<bool> {
    let by_shortfall = second_order_by_shortfall(x, y);
    let by_lorenz = second_order_by_lorenz(x, y);
    if by_shortfall != by_lorenz {
        return Err(RiskError::InvariantViolation(format!(
            "second-order tests disagree: shortfall side {by_shortfall}, Lorenz side {by_lorenz}"
        )));
    }
    Ok(by_shortfall)
}

/// `min_η [H_Y(η) − H_X(η)]` over merged atoms; nonnegative iff `X ⪰₁ Y`.
pub fn first_order_margin(x: &RandomVariable, y: &RandomVariable) -> f64 {
    let xv = SortedScenarioView::new(x);
    let yv = SortedScenarioView::new(y);
    merged_atoms(x, y)
        .iter()
        .map(|&eta| yv.cdf(eta) - xv.cdf(eta))
        .fold(f64::INFINITY, f64::min)
}

/// `min_p [L_X(p) − L_Y(p)]` over merged breakpoints; nonnegative iff
/// `X ⪰₂ Y`.
pub fn second_order_margin(x: &RandomVariable, y: &RandomVariable) -> f64 {
    let xv = SortedScenarioView::new(x);
    let yv = SortedScenarioView::new(y);
    merged_breakpoints(&xv, &yv)
        .iter()
        .map(|&p| xv.lorenz_unchecked(p) - yv.lorenz_unchecked(p))
        .fold(f64::INFINITY, f64::min)
}

/// `L_{G(x)}(p) ≥ L_Y(p)` for all `p ∈ [α, β]`, enforced on `grid` plus the
/// breakpoints of both Lorenz functions.
///
/// `α = 0` is accepted only together with `β = 1` ("full" mode); the grid
/// always lives in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceConstraint {
    benchmark: RandomVariable,
    alpha: f64,
    beta: f64,
    grid: Vec<f64>,
}

impl DominanceConstraint {
    pub fn new(benchmark: RandomVariable, alpha: f64, beta: f64, grid: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) || alpha > beta {
            return Err(domain(format!("interval [{alpha}, {beta}] is not inside [0, 1]")));
        }
        if beta == 0.0 {
            return Err(domain("interval must reach into (0, 1]"));
        }
        if alpha == 0.0 && beta < 1.0 {
            return Err(domain("α = 0 is only allowed for the full interval [0, 1]"));
        }
        if grid.is_empty() {
            return Err(structural("dominance grid is empty"));
        }
        if grid.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(domain("grid levels must lie in (0, 1]"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("grid levels must be strictly increasing"));
        }
        if grid[0] < alpha || grid[grid.len() - 1] > beta {
            return Err(domain("grid levels must lie inside [α, β]"));
        }
        if (alpha > 0.0 && grid[0] != alpha) || grid[grid.len() - 1] != beta {
            return Err(domain("grid must contain both interval endpoints"));
        }
        Ok(Self {
            benchmark,
            alpha,
            beta,
            grid,
        })
    }

    /// `m ≥ 2` equally spaced levels from `α` to `β` (from `1/m` when `α = 0`).
    pub fn uniform_grid(benchmark: RandomVariable, alpha: f64, beta: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(structural("grid needs at least one level"));
        }
        let grid: Vec<f64> = if alpha == 0.0 {
            (1..=m).map(|i| beta * i as f64 / m as f64).collect()
        } else if m == 1 || alpha == beta {
            if alpha != beta {
                return Err(domain("a one-point grid needs α = β"));
            }
            vec![alpha]
        } else {
            (0..m)
                .map(|i| {
                    if i == m - 1 {
                        beta
                    } else {
                        alpha + (beta - alpha) * i as f64 / (m - 1) as f64
                    }
                })
                .collect()
        };
        Self::new(benchmark, alpha, beta, grid)
    }

    pub fn benchmark(&self) -> &RandomVariable {
        &self.benchmark
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `[α, β] = [0, 1]`.
    pub fn is_full(&self) -> bool {
        self.alpha == 0.0 && self.beta == 1.0
    }

    /// `ρ_p(Z) = L_Y(p) − L_Z(p)` at the given levels.
    pub fn values_at(&self, z: &RandomVariable, levels: &[f64]) -> Vec<f64> {
        lorenz_gaps(z, &self.benchmark, levels)
    }

    /// The grid together with every breakpoint of `L_Z` and `L_Y` inside
    /// `[α, β]`. On this set the grid minimum of `L_Z − L_Y` equals its
    /// infimum over the interval (over `(0, 1]` in full mode).
    pub fn effective_levels(&self, z: &RandomVariable) -> Vec<f64> {
        let mut levels = self.grid.clone();
        let zv = SortedScenarioView::new(z);
        let yv = SortedScenarioView::new(&self.benchmark);
        levels.extend(
            zv.breakpoints()
                .into_iter()
                .chain(yv.breakpoints())
                .filter(|&p| p >= self.alpha && p <= self.beta && p > 0.0),
        );
        merge_levels(levels)
    }
}

fn check_concave(g: &MaxAffineIntegrand) -> Result<()> {
    if g.curvature() != Curvature::Concave {
        return Err(configuration("the constraint integrand must be concave"));
    }
    Ok(())
}

fn lorenz_gaps(z: &RandomVariable, y: &RandomVariable, levels: &[f64]) -> Vec<f64> {
    let zv = SortedScenarioView::new(z);
    let yv = SortedScenarioView::new(y);
    levels
        .iter()
        .map(|&p| yv.lorenz_unchecked(p) - zv.lorenz_unchecked(p))
        .collect()
}

/// `ρ_p(G(x)) = L_Y(p) − L_{G(x)}(p)` on the constraint grid. Feasible iff
/// every entry is `≤ 0`.
pub fn constraint_values(
    g: &MaxAffineIntegrand,
    x: &DecisionPoint,
    c: &DominanceConstraint,
) -> Result<Vec<f64>> {
    check_concave(g)?;
    let z = g.evaluate(x)?;
    Ok(lorenz_gaps(&z, &c.benchmark, &c.grid))
}

/// Largest `ρ_p(G(x))` over the effective levels, with the level attaining it
/// (smallest such level on ties).
pub fn max_violation(
    g: &MaxAffineIntegrand,
    x: &DecisionPoint,
    c: &DominanceConstraint,
) -> Result<(f64, f64)> {
    check_concave(g)?;
    let z = g.evaluate(x)?;
    let levels = c.effective_levels(&z);
    let gaps = lorenz_gaps(&z, &c.benchmark, &levels);
    let mut best = (f64::NEG_INFINITY, levels[0]);
    for (&p, &v) in levels.iter().zip(&gaps) {
        if v > best.0 {
            best = (v, p);
        }
    }
    Ok(best)
}

/// Membership of `X` in `{X : L_X(p) ≥ L_Y(p)}` on the constraint grid.
pub fn in_b(x: &RandomVariable, y: &RandomVariable, c: &DominanceConstraint) -> bool {
    let tol = value_tol(x, y);
    lorenz_gaps(x, y, &c.grid).iter().all(|&gap| gap <= tol)
}

/// `min_p [L_{G(x̃)}(p) − L_Y(p)]` over the effective levels. Positive iff the
/// uniform inverse dominance condition holds at `x̃`. In full mode the level
/// `p = 0`, where both Lorenz functions vanish, is part of the interval, so
/// the margin is never positive there.
pub fn uniform_dominance_margin(
    g: &MaxAffineIntegrand,
    x_tilde: &DecisionPoint,
    c: &DominanceConstraint,
) -> Result<f64> {
    check_concave(g)?;
    let z = g.evaluate(x_tilde)?;
    let levels = c.effective_levels(&z);
    let min_gap = lorenz_gaps(&z, &c.benchmark, &levels)
        .into_iter()
        .map(|v| -v)
        .fold(f64::INFINITY, f64::min);
    Ok(if c.alpha == 0.0 { min_gap.min(0.0) } else { min_gap })
}

fn check_level(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("level {p} outside (0, 1]")));
    }
    Ok(())
}

/// A subgradient of the convex map `x ↦ ρ_p(G(x))`: `−p·E[ζ s | G]` with
/// `ζ` the lower-tail identifier of `G(x)` and `s` a supergradient selector
/// of `G`. One vector per block of `info`.
pub fn constraint_subgradient(
    g: &MaxAffineIntegrand,
    x: &DecisionPoint,
    p: f64,
    info: &InfoPartition,
) -> Result<Vec<Vec<f64>>> {
    check_concave(g)?;
    check_level(p)?;
    if !x.is_measurable(info) {
        return Err(RiskError::Precondition(
            "decision is not measurable with respect to the information partition".into(),
        ));
    }
    let z = g.evaluate(x)?;
    let zeta = avar_identifier(&z, p, Orientation::LowerProfit)?.zeta;
    let selector = g.subgradient_selector(x, None)?;
    let grad = assemble(g, info, zeta, selector)?;
    Ok(grad
        .blocks
        .into_iter()
        .map(|b| b.into_iter().map(|v| -p * v).collect())
        .collect())
}

/// Linear minimization over the subdifferential of `x ↦ AVaR⁻_p(G(x))`,
/// the set `{−E[ζ s | G]}`. Minimizes `Σ_B ⟨c_B, d_B⟩`; the returned
/// gradient's blocks already carry the minus sign.
pub fn avar_constraint_lmo(
    g: &MaxAffineIntegrand,
    x: &DecisionPoint,
    p: f64,
    info: &InfoPartition,
    c: &[Vec<f64>],
) -> Result<CompositeGradient> {
    check_concave(g)?;
    check_level(p)?;
    if c.len() != info.n_blocks() {
        return Err(structural("one direction per information block is required"));
    }
    let z = g.evaluate(x)?;
    let block_probs = info.block_probs(g.space());
    let per_scenario: Vec<Vec<f64>> =
        (0..g.n_scenarios()).map(|k| c[info.block_of(k)].clone()).collect();
    let selector = g.extreme_selector(x, &per_scenario, Extreme::Max)?;
    let scores: Vec<f64> = (0..g.n_scenarios())
        .map(|k| dot(&selector.vectors[k], &per_scenario[k]) / block_probs[info.block_of(k)])
        .collect();
    let zeta = identifier_lmo(&z, p, Orientation::LowerProfit, &scores, LMO_TIE_TOL)?.zeta;
    let mut grad = assemble(g, info, zeta, selector)?;
    for b in grad.blocks.iter_mut() {
        for v in b.iter_mut() {
            *v = -*v;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ProbSpace;

    fn rv(s: &ProbSpace, v: &[f64]) -> RandomVariable {
        RandomVariable::new(s, v.to_vec()).unwrap()
    }

    #[test]
    fn first_order_examples() {
        let s = ProbSpace::uniform(2).unwrap();
        let y = rv(&s, &[0.3, 1.7]);
        assert!(dominates_first_order(&y.map(|v| v + 1.0).unwrap(), &y).unwrap());
        assert!(dominates_first_order(&y, &y).unwrap());
        // H_X(0) = 0.5 > H_Y(0) = 0
        assert!(!dominates_first_order(&rv(&s, &[0.0, 2.0]), &rv(&s, &[1.0, 1.0])).unwrap());
    }

    #[test]
    fn second_order_examples() {
        let s = ProbSpace::uniform(2).unwrap();
        let x = rv(&s, &[1.0, 1.0]);
        let y = rv(&s, &[0.0, 2.0]);
        assert!(dominates_second_order(&x, &y).unwrap());
        assert!(!dominates_second_order(&y, &x).unwrap());
        assert!(dominates_second_order(&y, &y).unwrap());
    }

    #[test]
    fn comparisons_across_spaces() {
        let a = ProbSpace::new(vec![0.1, 0.2, 0.7]).unwrap();
        let b = ProbSpace::new(vec![0.3, 0.7]).unwrap();
        let x = rv(&a, &[1.0, 1.0, 2.0]);
        let y = rv(&b, &[1.0, 2.0]);
        assert!(dominates_first_order(&x, &y).unwrap());
        assert!(dominates_first_order(&y, &x).unwrap());
        assert!(dominates_second_order(&x, &y).unwrap());
    }

    fn scalar_identity() -> MaxAffineIntegrand {
        // g(x, k) = x in every scenario
        let s = ProbSpace::uniform(4).unwrap();
        MaxAffineIntegrand::affine(&s, Curvature::Concave, vec![vec![1.0]; 4], vec![0.0; 4])
            .unwrap()
    }

    fn shifted(shift: f64) -> (MaxAffineIntegrand, DominanceConstraint) {
        let s = ProbSpace::uniform(4).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        let g = MaxAffineIntegrand::affine(
            &s,
            Curvature::Concave,
            vec![vec![0.0]; 4],
            y.iter().map(|v| v + shift).collect(),
        )
        .unwrap();
        let c = DominanceConstraint::new(rv(&s, &y), 0.25, 1.0, vec![0.25, 0.5, 0.75, 1.0])
            .unwrap();
        (g, c)
    }

    #[test]
    fn constraint_value_examples() {
        let x = DecisionPoint::deterministic(4, vec![0.0]);
        let (g, c) = shifted(0.0);
        assert_eq!(constraint_values(&g, &x, &c).unwrap(), vec![0.0; 4]);
        let (g, c) = shifted(1.0);
        let vals = constraint_values(&g, &x, &c).unwrap();
        for (v, p) in vals.iter().zip(c.grid()) {
            assert!((v + p).abs() < 1e-14);
        }
        let (g, c) = shifted(-1.0);
        let vals = constraint_values(&g, &x, &c).unwrap();
        for (v, p) in vals.iter().zip(c.grid()) {
            assert!((v - p).abs() < 1e-14);
        }
        let convex = MaxAffineIntegrand::affine(
            g.space(),
            Curvature::Convex,
            vec![vec![0.0]; 4],
            vec![0.0; 4],
        )
        .unwrap();
        assert!(matches!(
            constraint_values(&convex, &x, &c),
            Err(RiskError::Configuration(_))
        ));
    }

    #[test]
    fn margin_examples() {
        let x = DecisionPoint::deterministic(4, vec![0.0]);
        let (g, c) = shifted(1.0);
        assert!((uniform_dominance_margin(&g, &x, &c).unwrap() - 0.25).abs() < 1e-14);
        let (g, c) = shifted(0.0);
        assert_eq!(uniform_dominance_margin(&g, &x, &c).unwrap(), 0.0);
        let (g, c) = shifted(-1.0);
        assert!((uniform_dominance_margin(&g, &x, &c).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_mode_margin_is_never_positive() {
        let s = ProbSpace::uniform(4).unwrap();
        let y = rv(&s, &[1.0, 2.0, 3.0, 4.0]);
        let c = DominanceConstraint::uniform_grid(y, 0.0, 1.0, 4).unwrap();
        assert!(c.is_full());
        let g = MaxAffineIntegrand::affine(&s, Curvature::Concave, vec![vec![0.0]; 4], vec![9.0; 4])
            .unwrap();
        let x = DecisionPoint::deterministic(4, vec![0.0]);
        assert_eq!(uniform_dominance_margin(&g, &x, &c).unwrap(), 0.0);
    }

    #[test]
    fn in_b_examples() {
        let (_, c) = shifted(0.0);
        let y = c.benchmark().clone();
        assert!(in_b(&y, &y, &c));
        assert!(!in_b(&y.map(|v| v - 1e-3).unwrap(), &y, &c));
        assert!(in_b(&y.map(|v| v + 1e-3).unwrap(), &y, &c));
    }

    #[test]
    fn constraint_validation() {
        let s = ProbSpace::uniform(2).unwrap();
        let y = rv(&s, &[0.0, 1.0]);
        assert!(DominanceConstraint::new(y.clone(), 0.0, 0.5, vec![0.5]).is_err());
        assert!(DominanceConstraint::new(y.clone(), 0.2, 0.5, vec![0.3, 0.5]).is_err());
        assert!(DominanceConstraint::new(y.clone(), 0.2, 0.5, vec![0.2, 0.4]).is_err());
        assert!(DominanceConstraint::new(y.clone(), 0.2, 0.5, vec![]).is_err());
        assert!(DominanceConstraint::new(y.clone(), 0.6, 0.5, vec![0.5]).is_err());
        assert!(DominanceConstraint::new(y.clone(), 0.0, 1.0, vec![0.0, 1.0]).is_err());
        assert!(DominanceConstraint::new(y.clone(), 1.0, 1.0, vec![1.0]).is_ok());
        assert!(DominanceConstraint::new(y, 0.0, 1.0, vec![0.5, 1.0]).is_ok());
    }

    #[test]
    fn effective_levels_include_breakpoints() {
        let (_, c) = shifted(0.0);
        let s = ProbSpace::new(vec![0.1, 0.9]).unwrap();
        let _ = s;
        let z = c.benchmark().clone();
        assert_eq!(c.effective_levels(&z), vec![0.25, 0.5, 0.75, 1.0]);
        let s5 = ProbSpace::uniform(4).unwrap();
        let c2 = DominanceConstraint::new(rv(&s5, &[1.0, 2.0, 3.0, 4.0]), 0.3, 0.9, vec![0.3, 0.9])
            .unwrap();
        assert_eq!(c2.effective_levels(c2.benchmark()), vec![0.3, 0.5, 0.75, 0.9]);
    }

    #[test]
    fn constraint_subgradient_examples() {
        let g = scalar_identity();
        let x = DecisionPoint::deterministic(4, vec![2.0]);
        let info = InfoPartition::trivial(4);
        // ρ_1(G(x)) = E[Y] − x has gradient −1.
        assert_eq!(constraint_subgradient(&g, &x, 1.0, &info).unwrap(), vec![vec![-1.0]]);
        // At level p the Lorenz value is p·x: gradient −p.
        let d = constraint_subgradient(&g, &x, 0.4, &info).unwrap();
        assert!((d[0][0] + 0.4).abs() < 1e-15);

        let (constant, _) = shifted(0.0);
        assert_eq!(
            constraint_subgradient(&constant, &x, 0.5, &info).unwrap(),
            vec![vec![0.0]]
        );
        assert!(constraint_subgradient(&g, &x, 0.0, &info).is_err());
    }

    #[test]
    fn avar_lmo_matches_scaled_subgradient_without_ties() {
        let s = ProbSpace::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = MaxAffineIntegrand::affine(
            &s,
            Curvature::Concave,
            vec![vec![1.0], vec![2.0], vec![-1.0], vec![0.5]],
            vec![0.0, 0.1, 0.7, 0.2],
        )
        .unwrap();
        let x = DecisionPoint::deterministic(4, vec![0.3]);
        let info = InfoPartition::trivial(4);
        let p = 0.35;
        let sub = constraint_subgradient(&g, &x, p, &info).unwrap();
        let lmo = avar_constraint_lmo(&g, &x, p, &info, &[vec![1.0]]).unwrap();
        assert!((lmo.blocks[0][0] - sub[0][0] / p).abs() < 1e-14);
    }
}
