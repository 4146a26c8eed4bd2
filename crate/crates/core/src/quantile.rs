//! Distribution function, left-continuous quantile, and their integrated
//! versions: the shortfall function `H2(η) = E[(η − Z)+]` and the absolute
//! Lorenz function `L(p) = ∫₀ᵖ quantile(α) dα`.
//!
//! Both integrated functions are piecewise linear for discrete data, so
//! everything here is evaluated in closed form from a sorted view.

use std::fmt;

use crate::error::{domain, Result};
use crate::scenario::RandomVariable;

/// Slack used when comparing a level `p` against cumulative probabilities.
/// Absorbs the rounding of partial sums such as `0.1 + 0.2`.
pub const CUM_TOL: f64 = 1e-13;

/// A real number or `+∞`. Only produced by [`lorenz`] outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => f.write_str("+inf"),
        }
    }
}

/// Scenario indices sorted by value (ties by index) with cumulative masses.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedScenarioView {
    order: Vec<usize>,
    values: Vec<f64>,
    masses: Vec<f64>,
    cum: Vec<f64>,
}

impl SortedScenarioView {
    pub fn new(z: &RandomVariable) -> Self {
        let vals = z.values();
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let values: Vec<f64> = order.iter().map(|&k| vals[k]).collect();
        let masses: Vec<f64> = order.iter().map(|&k| z.space().prob(k)).collect();
        let mut cum = Vec::with_capacity(vals.len() + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Self {
            order,
            values,
            masses,
            cum,
        }
    }

    /// Scenario indices in ascending value order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.values
    }

    /// `c_0 = 0 ≤ c_1 ≤ … ≤ c_N = 1`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Cumulative levels in `(0, 1]` where the quantile may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.values.len());
        for j in 1..=self.values.len() {
            // Only the end of a run of equal values is a real breakpoint.
            if j < self.values.len() && self.values[j] == self.values[j - 1] {
                continue;
            }
            out.push(self.cum[j]);
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn cdf(&self, eta: f64) -> f64 {
        let j = self.values.partition_point(|&v| v <= eta);
        self.cum[j]
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(domain(format!("quantile level {p} outside (0, 1]")));
        }
        let j = self.cum[1..]
            .iter()
            .position(|&c| c >= p - CUM_TOL)
            .unwrap_or(self.values.len() - 1);
        Ok(self.values[j])
    }

    /// Lorenz value for `p ∈ [0, 1]`.
    pub fn lorenz_unchecked(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for j in 0..self.values.len() {
            let lo = self.cum[j];
            if lo >= p {
                break;
            }
            let hi = self.cum[j + 1];
            let w = if hi <= p { self.masses[j] } else { p - lo };
            acc += w * self.values[j];
        }
        acc
    }

    pub fn lorenz(&self, p: f64) -> ExtendedReal {
        if !(0.0..=1.0).contains(&p) {
            return ExtendedReal::PosInfinity;
        }
        ExtendedReal::Finite(self.lorenz_unchecked(p))
    }

    /// Right derivative of the Lorenz function at `p ∈ [0, 1)`.
    pub fn lorenz_right_slope(&self, p: f64) -> f64 {
        let j = self.cum[1..]
            .iter()
            .position(|&c| c > p + CUM_TOL)
            .unwrap_or(self.values.len() - 1);
        self.values[j]
    }
}

/// `P[Z ≤ η]`.
pub fn cdf(z: &RandomVariable, eta: f64) -> f64 {
    z.values()
        .iter()
        .zip(z.space().probs())
        .filter(|(&v, _)| v <= eta)
        .fold(0.0, |acc, (_, &p)| acc + p)
        .min(1.0)
}

/// Left-continuous inverse `inf{η : P[Z ≤ η] ≥ p}` for `p ∈ (0, 1]`.
pub fn quantile(z: &RandomVariable, p: f64) -> Result<f64> {
    SortedScenarioView::new(z).quantile(p)
}

/// `E[max(η − Z, 0)]`.
pub fn integrated_cdf(z: &RandomVariable, eta: f64) -> f64 {
    z.values()
        .iter()
        .zip(z.space().probs())
        .fold(0.0, |acc, (&v, &p)| acc + p * (eta - v).max(0.0))
}

/// Absolute Lorenz function: `0` at `p = 0`, `+∞` off `[0, 1]`.
pub fn lorenz(z: &RandomVariable, p: f64) -> ExtendedReal {
    SortedScenarioView::new(z).lorenz(p)
}

/// `sup_η { pη − H2(η) }`, evaluated over the atoms of `Z`.
///
/// The supremand is concave and piecewise linear with kinks at the atoms,
/// and for `p ∈ [0, 1]` its supremum is attained at one of them. `H2` at the
/// atoms is accumulated in one ascending sweep: `H2(v) = v·P[Z < v] − E[Z; Z < v]`.
pub fn lorenz_conjugate(z: &RandomVariable, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("conjugate level {p} outside [0, 1]")));
    }
    let mut atoms: Vec<(f64, f64)> = z.values().iter().copied().zip(z.space().probs().iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut mass, mut first_moment) = (0.0, 0.0);
    let mut best = f64::NEG_INFINITY;
    let mut i = 0;
    while i < atoms.len() {
        let eta = atoms[i].0;
        best = best.max(p * eta - (eta * mass - first_moment));
        while i < atoms.len() && atoms[i].0 == eta {
            mass += atoms[i].1;
            first_moment += atoms[i].1 * atoms[i].0;
            i += 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ProbSpace;

    fn staircase() -> RandomVariable {
        RandomVariable::new(&ProbSpace::uniform(4).unwrap(), vec![3.0, 1.0, 4.0, 2.0]).unwrap()
    }

    // Direct enumeration over the four atoms of the staircase variable.
    fn brute_cdf(vals: &[f64], probs: &[f64], eta: f64) -> f64 {
        vals.iter().zip(probs).filter(|(v, _)| **v <= eta).map(|(_, p)| p).sum()
    }

    #[test]
    fn cdf_examples() {
        let z = staircase();
        assert_eq!(cdf(&z, 2.5), brute_cdf(z.values(), z.space().probs(), 2.5));
        assert_eq!(cdf(&z, 2.5), 0.5);
        assert_eq!(cdf(&z, 0.0), 0.0);
        assert_eq!(cdf(&z, 4.0), 1.0);
        assert_eq!(SortedScenarioView::new(&z).cdf(2.5), 0.5);
    }

    #[test]
    fn quantile_examples() {
        let z = staircase();
        assert_eq!(quantile(&z, 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&z, 0.51).unwrap(), 3.0);
        assert_eq!(quantile(&z, 1.0).unwrap(), 4.0);
        assert_eq!(quantile(&z, 1e-9).unwrap(), 1.0);
        let c = RandomVariable::constant(&ProbSpace::uniform(3).unwrap(), -2.0).unwrap();
        for p in [0.1, 0.5, 1.0] {
            assert_eq!(quantile(&c, p).unwrap(), -2.0);
        }
        assert!(quantile(&z, 0.0).is_err());
        assert!(quantile(&z, 1.5).is_err());
    }

    #[test]
    fn integrated_cdf_examples() {
        let z = staircase();
        // (3-1 + 3-2) / 4
        assert_eq!(integrated_cdf(&z, 3.0), 0.75);
        assert_eq!(integrated_cdf(&z, 1.0), 0.0);
        assert_eq!(integrated_cdf(&z, -5.0), 0.0);
        let s = ProbSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let w = RandomVariable::new(&s, vec![1.0, 5.0, 9.0]).unwrap();
        assert!((integrated_cdf(&w, 1.0 + 0.7) - 0.2 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn lorenz_examples() {
        let z = staircase();
        // ∫₀^½ quantile = ¼·1 + ¼·2
        assert_eq!(lorenz(&z, 0.5), ExtendedReal::Finite(0.75));
        assert_eq!(lorenz(&z, 1.0), ExtendedReal::Finite(2.5));
        assert_eq!(lorenz(&z, 0.0), ExtendedReal::Finite(0.0));
        assert_eq!(lorenz(&z, -0.1), ExtendedReal::PosInfinity);
        assert_eq!(lorenz(&z, 1.1), ExtendedReal::PosInfinity);
        assert_eq!(ExtendedReal::PosInfinity.to_string(), "+inf");
    }

    #[test]
    fn lorenz_conjugate_examples() {
        let z = staircase();
        assert_eq!(lorenz_conjugate(&z, 0.5).unwrap(), 0.75);
        assert_eq!(lorenz_conjugate(&z, 0.0).unwrap(), 0.0);
        assert_eq!(lorenz_conjugate(&z, 1.0).unwrap(), 2.5);
        assert!(lorenz_conjugate(&z, 1.2).is_err());
    }

    #[test]
    fn breakpoints_merge_ties() {
        let s = ProbSpace::uniform(4).unwrap();
        let z = RandomVariable::new(&s, vec![2.0, 1.0, 2.0, 3.0]).unwrap();
        let v = SortedScenarioView::new(&z);
        assert_eq!(v.breakpoints(), vec![0.25, 0.75, 1.0]);
        assert_eq!(v.order(), &[1, 0, 2, 3]);
        assert_eq!(v.lorenz_right_slope(0.0), 1.0);
        assert_eq!(v.lorenz_right_slope(0.25), 2.0);
        assert_eq!(v.lorenz_right_slope(0.8), 3.0);
    }
}
