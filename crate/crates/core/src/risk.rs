//! Average Value-at-Risk in both orientations, its risk identifiers, and
//! finite spectral mixtures.
//!
//! Orientation is always explicit:
//!
//! * [`Orientation::UpperLoss`] averages the largest `p`-fraction of outcomes.
//!   This is the convex, nondecreasing functional used on cost variables.
//! * [`Orientation::LowerProfit`] is `−(1/p)·L(p)`, minus the average of the
//!   smallest `p`-fraction. It is convex and nonincreasing, and it is the
//!   functional behind Lorenz dominance constraints.
//!
//! An identifier is a density `ζ ≥ 0` with `E[ζ] = 1`, `ζ ≤ 1/p`, which puts
//! all its mass on the relevant tail. Under ties the set of such densities is
//! a polytope; [`identifier_lmo`] returns the vertex maximizing `E[ζ d]` for a
//! given direction `d`.

use crate::error::{configuration, domain, structural, Result};
use crate::quantile::SortedScenarioView;
use crate::scenario::{ProbSpace, RandomVariable};

/// Tolerance on `Σ w_i = 1` for spectral weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Values closer than this are treated as tied by the linear-minimization
/// oracles. The plain identifiers use exact ties.
pub const LMO_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Mean of the upper tail (losses).
    UpperLoss,
    /// Negated mean of the lower tail (profits).
    LowerProfit,
}

/// A dual density `ζ` for AVaR at `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskIdentifier {
    pub zeta: Vec<f64>,
    pub level: f64,
    pub orientation: Orientation,
}

impl RiskIdentifier {
    /// Box `0 ≤ ζ ≤ 1/p` and `E[ζ] = 1`, both within `tol`.
    pub fn is_feasible(&self, space: &ProbSpace, tol: f64) -> bool {
        let cap = 1.0 / self.level;
        self.zeta.len() == space.len()
            && self.zeta.iter().all(|&z| z >= -tol && z <= cap + tol)
            && (space.weighted_sum(&self.zeta) - 1.0).abs() <= tol
    }

    /// `E[ζ Z]`.
    pub fn pair(&self, z: &RandomVariable) -> f64 {
        z.space()
            .probs()
            .iter()
            .zip(&self.zeta)
            .zip(z.values())
            .fold(0.0, |acc, ((p, zeta), v)| acc + p * zeta * v)
    }
}

fn check_level(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("AVaR level {p} outside (0, 1]")));
    }
    Ok(())
}

/// Greedy tail fill. Scenarios are visited from the extreme end of the
/// distribution; values within `tie_tol` of their neighbour form one tie
/// group, ordered inside by `direction` (descending) and then index.
fn tail_density(
    z: &RandomVariable,
    p: f64,
    orientation: Orientation,
    direction: Option<&[f64]>,
    tie_tol: f64,
) -> Vec<f64> {
    let vals = z.values();
    let probs = z.space().probs();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    match orientation {
        Orientation::LowerProfit => {
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)))
        }
        Orientation::UpperLoss => {
            order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)))
        }
    }
    if let Some(d) = direction {
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && (vals[order[end]] - vals[order[end - 1]]).abs() <= tie_tol {
                end += 1;
            }
            order[start..end].sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
            start = end;
        }
    }
    let mut zeta = vec![0.0; vals.len()];
    let cap = 1.0 / p;
    let mut remaining = p;
    for &k in &order {
        if remaining <= 0.0 {
            break;
        }
        if probs[k] <= remaining {
            zeta[k] = cap;
            remaining -= probs[k];
        } else {
            zeta[k] = remaining / (p * probs[k]);
            remaining = 0.0;
        }
    }
    zeta
}

fn pair_density(z: &RandomVariable, zeta: &[f64]) -> f64 {
    z.space()
        .probs()
        .iter()
        .zip(zeta)
        .zip(z.values())
        .fold(0.0, |acc, ((p, w), v)| acc + p * w * v)
}

/// `AVaR⁻_p(Z) = −(1/p)·L_Z(p)`.
pub fn avar_lower(z: &RandomVariable, p: f64) -> Result<f64> {
    check_level(p)?;
    Ok(-SortedScenarioView::new(z).lorenz_unchecked(p) / p)
}

/// Mean of the upper `p`-tail, `(1/p)∫_{1−p}^1 quantile(α) dα`.
pub fn avar_upper(z: &RandomVariable, p: f64) -> Result<f64> {
    check_level(p)?;
    let zeta = tail_density(z, p, Orientation::UpperLoss, None, 0.0);
    Ok(pair_density(z, &zeta))
}

pub fn avar(z: &RandomVariable, p: f64, orientation: Orientation) -> Result<f64> {
    match orientation {
        Orientation::UpperLoss => avar_upper(z, p),
        Orientation::LowerProfit => avar_lower(z, p),
    }
}

/// The tail identifier with ties broken by ascending scenario index.
///
/// For the lower orientation `E[ζZ] = L_Z(p)/p`; for the upper orientation
/// `E[ζZ] = avar_upper(Z, p)`.
pub fn avar_identifier(
    z: &RandomVariable,
    p: f64,
    orientation: Orientation,
) -> Result<RiskIdentifier> {
    check_level(p)?;
    Ok(RiskIdentifier {
        zeta: tail_density(z, p, orientation, None, 0.0),
        level: p,
        orientation,
    })
}

/// Identifier maximizing `E[ζ d]` over all optimal identifiers at `Z`.
///
/// Values of `Z` closer than `tie_tol` count as tied.
pub fn identifier_lmo(
    z: &RandomVariable,
    p: f64,
    orientation: Orientation,
    direction: &[f64],
    tie_tol: f64,
) -> Result<RiskIdentifier> {
    check_level(p)?;
    if direction.len() != z.len() {
        return Err(structural("direction length differs from scenario count"));
    }
    Ok(RiskIdentifier {
        zeta: tail_density(z, p, orientation, Some(direction), tie_tol),
        level: p,
        orientation,
    })
}

/// An element `pζ` of the concave superdifferential of `Z ↦ L_Z(p)`.
pub fn lorenz_supergradient(z: &RandomVariable, p: f64) -> Result<Vec<f64>> {
    let id = avar_identifier(z, p, Orientation::LowerProfit)?;
    Ok(id.zeta.iter().map(|w| p * w).collect())
}

/// A finitely supported probability measure on levels in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    levels: Vec<f64>,
    weights: Vec<f64>,
    orientation: Orientation,
}

impl SpectralMeasure {
    pub fn new(levels: Vec<f64>, weights: Vec<f64>, orientation: Orientation) -> Result<Self> {
        if levels.is_empty() || levels.len() != weights.len() {
            return Err(structural("spectral measure needs matching, nonempty levels and weights"));
        }
        for &p in &levels {
            check_level(p)?;
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("spectral support points must be strictly increasing"));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(domain("spectral weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(domain(format!("spectral weights sum to {total}, expected 1")));
        }
        Ok(Self {
            levels,
            weights,
            orientation,
        })
    }

    pub fn point_mass(p: f64, orientation: Orientation) -> Result<Self> {
        Self::new(vec![p], vec![1.0], orientation)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.levels.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `Σ_i w_i · AVaR_{p_i}(Z)` in the measure's orientation.
pub fn spectral_risk(z: &RandomVariable, mu: &SpectralMeasure) -> Result<f64> {
    mu.atoms().try_fold(0.0, |acc, (p, w)| {
        Ok(acc + w * avar(z, p, mu.orientation)?)
    })
}

/// `Σ_i w_i ζ⁽ⁱ⁾` with each `ζ⁽ⁱ⁾` the tie-broken AVaR identifier at `p_i`.
pub fn spectral_identifier(z: &RandomVariable, mu: &SpectralMeasure) -> Result<Vec<f64>> {
    mix(z.len(), mu, |p| avar_identifier(z, p, mu.orientation))
}

/// Direction-maximizing element of the spectral identifier set.
pub fn spectral_lmo(
    z: &RandomVariable,
    mu: &SpectralMeasure,
    direction: &[f64],
    tie_tol: f64,
) -> Result<Vec<f64>> {
    mix(z.len(), mu, |p| identifier_lmo(z, p, mu.orientation, direction, tie_tol))
}

fn mix(
    n: usize,
    mu: &SpectralMeasure,
    mut component: impl FnMut(f64) -> Result<RiskIdentifier>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    for (p, w) in mu.atoms() {
        let id = component(p)?;
        for (o, z) in out.iter_mut().zip(&id.zeta) {
            *o += w * z;
        }
    }
    Ok(out)
}

/// The risk functionals the composite and solver layers work with.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskFunctional {
    Expectation,
    Avar { level: f64, orientation: Orientation },
    Spectral(SpectralMeasure),
}

impl RiskFunctional {
    pub fn avar_upper(level: f64) -> Result<Self> {
        check_level(level)?;
        Ok(RiskFunctional::Avar {
            level,
            orientation: Orientation::UpperLoss,
        })
    }

    /// `None` for the expectation, which is orientation-free.
    pub fn orientation(&self) -> Option<Orientation> {
        match self {
            RiskFunctional::Expectation => None,
            RiskFunctional::Avar { orientation, .. } => Some(*orientation),
            RiskFunctional::Spectral(mu) => Some(mu.orientation),
        }
    }

    /// Fails unless the functional is convex and nondecreasing.
    pub fn require_monotone(&self) -> Result<()> {
        if self.orientation() == Some(Orientation::LowerProfit) {
            return Err(configuration(
                "a lower-tail functional is nonincreasing; compose convex costs with an upper-tail risk",
            ));
        }
        Ok(())
    }

    pub fn value(&self, z: &RandomVariable) -> Result<f64> {
        match self {
            RiskFunctional::Expectation => Ok(z.expectation()),
            RiskFunctional::Avar { level, orientation } => avar(z, *level, *orientation),
            RiskFunctional::Spectral(mu) => spectral_risk(z, mu),
        }
    }

    /// Default identifier (index tie-breaking).
    pub fn identifier(&self, z: &RandomVariable) -> Result<Vec<f64>> {
        match self {
            RiskFunctional::Expectation => Ok(vec![1.0; z.len()]),
            RiskFunctional::Avar { level, orientation } => {
                Ok(avar_identifier(z, *level, *orientation)?.zeta)
            }
            RiskFunctional::Spectral(mu) => spectral_identifier(z, mu),
        }
    }

    /// Identifier maximizing `E[ζ d]`; its value is the directional
    /// derivative of the functional at `Z` in direction `d`.
    pub fn lmo(&self, z: &RandomVariable, direction: &[f64], tie_tol: f64) -> Result<Vec<f64>> {
        if direction.len() != z.len() {
            return Err(structural("direction length differs from scenario count"));
        }
        match self {
            RiskFunctional::Expectation => Ok(vec![1.0; z.len()]),
            RiskFunctional::Avar { level, orientation } => {
                Ok(identifier_lmo(z, *level, *orientation, direction, tie_tol)?.zeta)
            }
            RiskFunctional::Spectral(mu) => spectral_lmo(z, mu, direction, tie_tol),
        }
    }
}
