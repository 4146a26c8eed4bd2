//! Scenario-wise piecewise-affine integrands and the operators they induce.
//!
//! A convex integrand is `f(x, ω_k) = max_j ⟨a_kj, x⟩ + b_kj`; a concave one
//! uses `min`. The operator `F` maps a decision `x` (deterministic, or one
//! vector per block of an information partition) to the random variable
//! `ω ↦ f(x(ω), ω)`.

use crate::error::{domain, structural, Result};
use crate::scenario::{InfoPartition, ProbSpace, RandomVariable};

/// Absolute slack for deciding which pieces are active at a point.
pub const ACTIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curvature {
    /// `max` over pieces.
    Convex,
    /// `min` over pieces.
    Concave,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn new(slope: Vec<f64>, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.intercept
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// A decision: one vector per block of its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    partition: InfoPartition,
    values: Vec<Vec<f64>>,
}

impl DecisionPoint {
    pub fn new(partition: InfoPartition, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != partition.n_blocks() {
            return Err(structural(format!(
                "{} block vectors for {} blocks",
                values.len(),
                partition.n_blocks()
            )));
        }
        let dim = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != dim) {
            return Err(structural("block vectors have different dimensions"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(domain("decision contains a non-finite coordinate"));
        }
        Ok(Self { partition, values })
    }

    /// A deterministic decision: the trivial partition with one vector.
    pub fn deterministic(n_scenarios: usize, x: Vec<f64>) -> Self {
        Self {
            partition: InfoPartition::trivial(n_scenarios),
            values: vec![x],
        }
    }

    /// One vector per scenario.
    pub fn scenario_wise(values: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(InfoPartition::singletons(values.len()), values)
    }

    pub fn from_flat(partition: InfoPartition, dim: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != dim * partition.n_blocks() {
            return Err(structural("flat vector has the wrong length"));
        }
        if dim == 0 {
            return Err(structural("decisions need at least one coordinate"));
        }
        let values = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        Self::new(partition, values)
    }

    pub fn partition(&self) -> &InfoPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn n_blocks(&self) -> usize {
        self.values.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.partition.n_scenarios()
    }

    pub fn block_values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The vector used in scenario `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[self.partition.block_of(k)]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// The per-scenario field `ω ↦ x(ω)`.
    pub fn expand(&self) -> Vec<Vec<f64>> {
        (0..self.n_scenarios()).map(|k| self.at(k).to_vec()).collect()
    }

    /// True when `x` is constant on every block of `g`.
    pub fn is_measurable(&self, g: &InfoPartition) -> bool {
        g.n_scenarios() == self.n_scenarios()
            && g.blocks().iter().all(|b| {
                let first = self.at(b[0]);
                b.iter().all(|&k| self.at(k) == first)
            })
    }

    /// Re-expresses a `g`-measurable decision with one vector per block of `g`.
    pub fn restrict_to(&self, g: &InfoPartition) -> Result<Self> {
        if !self.is_measurable(g) {
            return Err(crate::RiskError::Precondition(
                "decision is not measurable with respect to the information partition".into(),
            ));
        }
        let values = g.blocks().iter().map(|b| self.at(b[0]).to_vec()).collect();
        Self::new(g.clone(), values)
    }

    /// `self + t·h` on the common refinement (scenario-wise when the
    /// partitions differ).
    pub fn add_scaled(&self, t: f64, h: &DecisionPoint) -> Result<Self> {
        if h.n_scenarios() != self.n_scenarios() || h.dim() != self.dim() {
            return Err(structural("decision and direction have different shapes"));
        }
        if h.partition == self.partition {
            let values = self
                .values
                .iter()
                .zip(&h.values)
                .map(|(x, d)| x.iter().zip(d).map(|(a, b)| a + t * b).collect())
                .collect();
            return Self::new(self.partition.clone(), values);
        }
        let values = (0..self.n_scenarios())
            .map(|k| self.at(k).iter().zip(h.at(k)).map(|(a, b)| a + t * b).collect())
            .collect();
        Self::scenario_wise(values)
    }
}

/// Per-scenario vectors `s_k`, each a subgradient (or supergradient) of the
/// scenario integrand. Induces the operator `[S h](ω) = ⟨s(ω), h(ω)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSelector {
    pub vectors: Vec<Vec<f64>>,
}

impl SubgradientSelector {
    /// `[S h](ω_k) = ⟨s_k, h(ω_k)⟩`.
    pub fn apply(&self, h: &DecisionPoint) -> Vec<f64> {
        self.vectors
            .iter()
            .enumerate()
            .map(|(k, s)| dot(s, h.at(k)))
            .collect()
    }

    /// Scenario-wise blend `α_k s¹_k + (1 − α_k) s²_k`.
    pub fn blend(&self, other: &Self, alphas: &[f64]) -> Self {
        let vectors = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .zip(alphas)
            .map(|((a, b), &t)| a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect())
            .collect();
        Self { vectors }
    }
}

/// Which extreme of `⟨a, d⟩` over the active pieces to select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffineIntegrand {
    space: ProbSpace,
    dim: usize,
    curvature: Curvature,
    pieces: Vec<Vec<AffinePiece>>,
}

impl MaxAffineIntegrand {
    pub fn new(
        space: &ProbSpace,
        dim: usize,
        curvature: Curvature,
        pieces: Vec<Vec<AffinePiece>>,
    ) -> Result<Self> {
        if pieces.len() != space.len() {
            return Err(structural(format!(
                "integrand has pieces for {} scenarios, space has {}",
                pieces.len(),
                space.len()
            )));
        }
        for (k, list) in pieces.iter().enumerate() {
            if list.is_empty() {
                return Err(structural(format!("scenario {k} has no affine pieces")));
            }
            for piece in list {
                if piece.slope.len() != dim {
                    return Err(structural(format!(
                        "scenario {k}: slope of length {} in dimension {dim}",
                        piece.slope.len()
                    )));
                }
                if !piece.intercept.is_finite() || piece.slope.iter().any(|v| !v.is_finite()) {
                    return Err(domain(format!("scenario {k}: non-finite coefficient")));
                }
            }
        }
        Ok(Self {
            space: space.clone(),
            dim,
            curvature,
            pieces,
        })
    }

    /// The same affine piece in every scenario is not required; this builds
    /// `⟨a_k, x⟩ + b_k` with one piece per scenario.
    pub fn affine(
        space: &ProbSpace,
        curvature: Curvature,
        slopes: Vec<Vec<f64>>,
        intercepts: Vec<f64>,
    ) -> Result<Self> {
        let dim = slopes.first().map_or(0, Vec::len);
        let pieces = slopes
            .into_iter()
            .zip(intercepts)
            .map(|(a, b)| vec![AffinePiece::new(a, b)])
            .collect();
        Self::new(space, dim, curvature, pieces)
    }

    pub fn space(&self) -> &ProbSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn pieces(&self) -> &[Vec<AffinePiece>] {
        &self.pieces
    }

    pub fn n_scenarios(&self) -> usize {
        self.pieces.len()
    }

    fn check_point(&self, x: &DecisionPoint) -> Result<()> {
        if x.n_scenarios() != self.n_scenarios() {
            return Err(structural(format!(
                "decision covers {} scenarios, integrand has {}",
                x.n_scenarios(),
                self.n_scenarios()
            )));
        }
        if x.dim() != self.dim {
            return Err(structural(format!(
                "decision dimension {} differs from integrand dimension {}",
                x.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `f(x, ω_k)` for an explicit point.
    pub fn value_at(&self, k: usize, x: &[f64]) -> f64 {
        let vals = self.pieces[k].iter().map(|p| p.eval(x));
        match self.curvature {
            Curvature::Convex => vals.fold(f64::NEG_INFINITY, f64::max),
            Curvature::Concave => vals.fold(f64::INFINITY, f64::min),
        }
    }

    /// Indices of pieces active at `x` in scenario `k`.
    pub fn active_pieces(&self, k: usize, x: &[f64]) -> Vec<usize> {
        let vals: Vec<f64> = self.pieces[k].iter().map(|p| p.eval(x)).collect();
        let best = self.value_at(k, x);
        vals.iter()
            .enumerate()
            .filter(|(_, &v)| match self.curvature {
                Curvature::Convex => v >= best - ACTIVITY_TOL,
                Curvature::Concave => v <= best + ACTIVITY_TOL,
            })
            .map(|(j, _)| j)
            .collect()
    }

    pub fn evaluate(&self, x: &DecisionPoint) -> Result<RandomVariable> {
        self.check_point(x)?;
        let vals = (0..self.n_scenarios()).map(|k| self.value_at(k, x.at(k))).collect();
        RandomVariable::new(&self.space, vals)
    }

    /// `[F'(x; h)](ω_k)`: max (convex) or min (concave) of `⟨a, h(ω_k)⟩` over
    /// the pieces active at `x(ω_k)`.
    pub fn directional_derivative(
        &self,
        x: &DecisionPoint,
        h: &DecisionPoint,
    ) -> Result<RandomVariable> {
        self.check_point(x)?;
        self.check_point(h)?;
        let vals = (0..self.n_scenarios())
            .map(|k| {
                let slopes = self
                    .active_pieces(k, x.at(k))
                    .into_iter()
                    .map(|j| dot(&self.pieces[k][j].slope, h.at(k)));
                match self.curvature {
                    Curvature::Convex => slopes.fold(f64::NEG_INFINITY, f64::max),
                    Curvature::Concave => slopes.fold(f64::INFINITY, f64::min),
                }
            })
            .collect();
        RandomVariable::new(&self.space, vals)
    }

    /// `(F(x + t h) − F(x)) / t`.
    pub fn differential_quotient(
        &self,
        x: &DecisionPoint,
        h: &DecisionPoint,
        t: f64,
    ) -> Result<RandomVariable> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(domain(format!("differential quotient needs t > 0, got {t}")));
        }
        self.check_point(x)?;
        self.check_point(h)?;
        let vals = (0..self.n_scenarios())
            .map(|k| {
                let shifted: Vec<f64> =
                    x.at(k).iter().zip(h.at(k)).map(|(a, b)| a + t * b).collect();
                (self.value_at(k, &shifted) - self.value_at(k, x.at(k))) / t
            })
            .collect();
        RandomVariable::new(&self.space, vals)
    }

    /// Without a direction, the gradient of the lowest-index active piece.
    /// With a direction `d`, an active gradient attaining `[F'(x; d)](ω_k)`,
    /// so `⟨s_k, d(ω_k)⟩` equals the directional derivative scenario-wise.
    pub fn subgradient_selector(
        &self,
        x: &DecisionPoint,
        d: Option<&DecisionPoint>,
    ) -> Result<SubgradientSelector> {
        match d {
            None => {
                self.check_point(x)?;
                let vectors = (0..self.n_scenarios())
                    .map(|k| {
                        let j = self.active_pieces(k, x.at(k))[0];
                        self.pieces[k][j].slope.clone()
                    })
                    .collect();
                Ok(SubgradientSelector { vectors })
            }
            Some(d) => {
                self.check_point(d)?;
                let extreme = match self.curvature {
                    Curvature::Convex => Extreme::Max,
                    Curvature::Concave => Extreme::Min,
                };
                self.extreme_selector(x, &d.expand(), extreme)
            }
        }
    }

    /// Per scenario, the active gradient with the largest (or smallest)
    /// inner product against `directions[k]`; ties go to the lowest index.
    pub fn extreme_selector(
        &self,
        x: &DecisionPoint,
        directions: &[Vec<f64>],
        extreme: Extreme,
    ) -> Result<SubgradientSelector> {
        self.check_point(x)?;
        if directions.len() != self.n_scenarios() {
            return Err(structural("one direction per scenario is required"));
        }
        let vectors = (0..self.n_scenarios())
            .map(|k| {
                let mut best: Option<(usize, f64)> = None;
                for j in self.active_pieces(k, x.at(k)) {
                    let v = dot(&self.pieces[k][j].slope, &directions[k]);
                    let better = match (best, extreme) {
                        (None, _) => true,
                        (Some((_, b)), Extreme::Max) => v > b,
                        (Some((_, b)), Extreme::Min) => v < b,
                    };
                    if better {
                        best = Some((j, v));
                    }
                }
                let (j, _) = best.expect("every scenario has an active piece");
                self.pieces[k][j].slope.clone()
            })
            .collect();
        Ok(SubgradientSelector { vectors })
    }

    /// Checks that the selector-induced operator and the directional
    /// derivative commute with multiplication by the indicator of `event`.
    pub fn local_property_check(
        &self,
        x: &DecisionPoint,
        h: &DecisionPoint,
        event: &[usize],
    ) -> Result<bool> {
        self.check_point(x)?;
        self.check_point(h)?;
        let n = self.n_scenarios();
        let mut indicator = vec![false; n];
        for &k in event {
            if k >= n {
                return Err(structural(format!("event index {k} out of range")));
            }
            indicator[k] = true;
        }
        let masked = DecisionPoint::scenario_wise(
            (0..n)
                .map(|k| {
                    if indicator[k] {
                        h.at(k).to_vec()
                    } else {
                        vec![0.0; self.dim]
                    }
                })
                .collect(),
        )?;
        let s = self.subgradient_selector(x, None)?;
        let lhs = s.apply(&masked);
        let rhs = s.apply(h);
        let selector_local = (0..n).all(|k| {
            let expected = if indicator[k] { rhs[k] } else { 0.0 };
            lhs[k] == expected
        });
        let d_masked = self.directional_derivative(x, &masked)?;
        let d_full = self.directional_derivative(x, h)?;
        let derivative_local = (0..n).all(|k| {
            let expected = if indicator[k] { d_full.values()[k] } else { 0.0 };
            d_masked.values()[k] == expected
        });
        Ok(selector_local && derivative_local)
    }
}
