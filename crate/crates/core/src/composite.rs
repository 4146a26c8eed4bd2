//! The composite `φ(x) = ϱ(F(x))` of a monotone risk functional with a convex
//! integrand operator.
//!
//! Subgradients come from the chain rule: pick a risk identifier `ζ` of `ϱ`
//! at `F(x)` and a selector `s` of `F` at `x`, then take `E[ζ s | G]` block by
//! block. With singleton blocks this is the scenario-wise product `ζ_k s_k`;
//! with the expectation and the trivial partition it is `E[s]`.

use crate::error::{configuration, structural, Result, RiskError};
use crate::integrand::{
    dot, Curvature, DecisionPoint, Extreme, MaxAffineIntegrand, SubgradientSelector,
};
use crate::risk::{RiskFunctional, LMO_TIE_TOL};
use crate::scenario::InfoPartition;

/// An element of `∂φ(x)`, one vector per block of `partition`, together with
/// the identifier and selector that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGradient {
    pub partition: InfoPartition,
    pub block_probs: Vec<f64>,
    pub blocks: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
    pub selector: SubgradientSelector,
}

impl CompositeGradient {
    /// Duality pairing `E[⟨g(ω), h(ω)⟩] = Σ_B P(B) ⟨g_B, h_B⟩` with a
    /// direction that is measurable for the same partition.
    pub fn pairing(&self, h: &DecisionPoint) -> f64 {
        self.partition
            .blocks()
            .iter()
            .zip(&self.blocks)
            .zip(&self.block_probs)
            .fold(0.0, |acc, ((b, g), pb)| acc + pb * dot(g, h.at(b[0])))
    }

    /// Concatenated block vectors.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }
}

fn check_convex(f: &MaxAffineIntegrand) -> Result<()> {
    if f.curvature() != Curvature::Convex {
        return Err(configuration("the objective integrand must be convex"));
    }
    Ok(())
}

/// `E[ζ s | G]` restricted to block coordinates.
pub(crate) fn assemble(
    f: &MaxAffineIntegrand,
    g: &InfoPartition,
    zeta: Vec<f64>,
    selector: SubgradientSelector,
) -> Result<CompositeGradient> {
    if let Some(k) = zeta.iter().position(|&z| z < 0.0) {
        return Err(RiskError::InvariantViolation(format!(
            "risk identifier is negative at scenario {k}; the risk functional is not monotone"
        )));
    }
    let space = f.space();
    let block_probs = g.block_probs(space);
    let blocks = g
        .blocks()
        .iter()
        .zip(&block_probs)
        .map(|(b, pb)| {
            let mut acc = vec![0.0; f.dim()];
            for &k in b {
                let w = space.prob(k) * zeta[k];
                for (a, s) in acc.iter_mut().zip(&selector.vectors[k]) {
                    *a += w * s;
                }
            }
            acc.iter().map(|a| a / pb).collect()
        })
        .collect();
    Ok(CompositeGradient {
        partition: g.clone(),
        block_probs,
        blocks,
        zeta,
        selector,
    })
}

fn check_info(f: &MaxAffineIntegrand, x: &DecisionPoint, g: &InfoPartition) -> Result<()> {
    if g.n_scenarios() != f.n_scenarios() {
        return Err(structural("information partition and integrand disagree on scenarios"));
    }
    if !x.is_measurable(g) {
        return Err(RiskError::Precondition(
            "decision is not measurable with respect to the information partition".into(),
        ));
    }
    Ok(())
}

/// `ϱ(F(x))`.
pub fn composite_value(
    rho: &RiskFunctional,
    f: &MaxAffineIntegrand,
    x: &DecisionPoint,
) -> Result<f64> {
    rho.require_monotone()?;
    check_convex(f)?;
    rho.value(&f.evaluate(x)?)
}

/// `φ'(x; h) = ϱ'(F(x); F'(x; h))`, the inner derivative taken as the
/// support function of the identifier set.
pub fn composite_directional(
    rho: &RiskFunctional,
    f: &MaxAffineIntegrand,
    x: &DecisionPoint,
    h: &DecisionPoint,
) -> Result<f64> {
    rho.require_monotone()?;
    check_convex(f)?;
    let z = f.evaluate(x)?;
    let d = f.directional_derivative(x, h)?;
    let zeta = rho.lmo(&z, d.values(), LMO_TIE_TOL)?;
    Ok(z.space().probs().iter().zip(&zeta).zip(d.values()).fold(0.0, |acc, ((p, w), v)| {
        acc + p * w * v
    }))
}

/// Chain-rule subgradient with the default identifier and selector.
pub fn composite_subgradient(
    rho: &RiskFunctional,
    f: &MaxAffineIntegrand,
    x: &DecisionPoint,
    g: &InfoPartition,
) -> Result<CompositeGradient> {
    rho.require_monotone()?;
    check_convex(f)?;
    check_info(f, x, g)?;
    let z = f.evaluate(x)?;
    let zeta = rho.identifier(&z)?;
    let selector = f.subgradient_selector(x, None)?;
    assemble(f, g, zeta, selector)
}

/// The subgradient attaining `φ'(x; h)`: a direction-aligned selector paired
/// with the identifier that maximizes `E[ζ F'(x; h)]`.
pub fn steepest_subgradient(
    rho: &RiskFunctional,
    f: &MaxAffineIntegrand,
    x: &DecisionPoint,
    g: &InfoPartition,
    h: &DecisionPoint,
) -> Result<CompositeGradient> {
    rho.require_monotone()?;
    check_convex(f)?;
    check_info(f, x, g)?;
    let z = f.evaluate(x)?;
    let d = f.directional_derivative(x, h)?;
    let selector = f.subgradient_selector(x, Some(h))?;
    let zeta = rho.lmo(&z, d.values(), LMO_TIE_TOL)?;
    assemble(f, g, zeta, selector)
}

/// Linear minimization over `∂φ(x)`: the element minimizing
/// `Σ_B ⟨c_B, g_B⟩` for block directions `c`.
pub fn composite_lmo(
    rho: &RiskFunctional,
    f: &MaxAffineIntegrand,
    x: &DecisionPoint,
    g: &InfoPartition,
    c: &[Vec<f64>],
) -> Result<CompositeGradient> {
    rho.require_monotone()?;
    check_convex(f)?;
    check_info(f, x, g)?;
    if c.len() != g.n_blocks() {
        return Err(structural("one direction per information block is required"));
    }
    let z = f.evaluate(x)?;
    let block_probs = g.block_probs(f.space());
    let per_scenario: Vec<Vec<f64>> =
        (0..f.n_scenarios()).map(|k| c[g.block_of(k)].clone()).collect();
    let selector = f.extreme_selector(x, &per_scenario, Extreme::Min)?;
    // ζ ≥ 0, so minimizing scenario by scenario first is exact.
    let scores: Vec<f64> = (0..f.n_scenarios())
        .map(|k| -dot(&selector.vectors[k], &per_scenario[k]) / block_probs[g.block_of(k)])
        .collect();
    let zeta = rho.lmo(&z, &scores, LMO_TIE_TOL)?;
    assemble(f, g, zeta, selector)
}

/// `∂E[F(x)] = E[∂F(x)]` for a deterministic decision: the probability
/// average of a selector.
pub fn strassen_gradient(f: &MaxAffineIntegrand, x: &DecisionPoint) -> Result<CompositeGradient> {
    if x.n_blocks() != 1 {
        return Err(RiskError::Precondition(
            "the Strassen form needs a deterministic decision".into(),
        ));
    }
    composite_subgradient(
        &RiskFunctional::Expectation,
        f,
        x,
        &InfoPartition::trivial(f.n_scenarios()),
    )
}
