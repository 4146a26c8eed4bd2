//! Finite probability spaces, random variables on them, and information
//! partitions.
//!
//! Every scenario carries strictly positive mass, so "almost surely" reduces
//! to "for every scenario". All sums run in ascending scenario order.

use std::sync::Arc;

use crate::error::{domain, structural, Result};

/// Absolute tolerance accepted on the total probability mass.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, PartialEq)]
struct SpaceInner {
    probs: Vec<f64>,
    labels: Vec<String>,
}

/// A finite probability space `{ω_1, …, ω_N}` with positive weights.
///
/// Cloning is cheap; clones share the same storage.
#[derive(Debug, Clone)]
pub struct ProbSpace(Arc<SpaceInner>);

impl PartialEq for ProbSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.probs == other.0.probs
    }
}

impl ProbSpace {
    /// Builds a space from scenario probabilities; labels default to `s0, s1, …`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|k| format!("s{k}")).collect();
        Self::with_labels(probs, labels)
    }

    pub fn with_labels(mut probs: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if probs.is_empty() {
            return Err(structural("a probability space needs at least one scenario"));
        }
        if labels.len() != probs.len() {
            return Err(structural(format!(
                "{} labels for {} scenarios",
                labels.len(),
                probs.len()
            )));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(domain(format!("scenario {k} has non-positive probability {p}")));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(domain(format!("probabilities sum to {total}, expected 1")));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        // Push the leftover rounding into the largest atom so the stored
        // sequential sum is 1.
        let largest = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        for _ in 0..4 {
            let s: f64 = probs.iter().sum();
            if s == 1.0 {
                break;
            }
            probs[largest] += 1.0 - s;
        }
        Ok(Self(Arc::new(SpaceInner { probs, labels })))
    }

    /// `n` equally likely scenarios.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(structural("a probability space needs at least one scenario"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.0.probs[k]
    }

    pub fn probs(&self) -> &[f64] {
        &self.0.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.0.labels
    }

    /// `Σ_k π_k v_k` in ascending scenario order.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        self.0
            .probs
            .iter()
            .zip(values)
            .fold(0.0, |acc, (p, v)| acc + p * v)
    }
}

/// A real-valued random variable on a [`ProbSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    space: ProbSpace,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(space: &ProbSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(structural(format!(
                "random variable has {} values but the space has {} scenarios",
                values.len(),
                space.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("value at scenario {k} is not finite")));
        }
        Ok(Self {
            space: space.clone(),
            values,
        })
    }

    pub fn constant(space: &ProbSpace, c: f64) -> Result<Self> {
        Self::new(space, vec![c; space.len()])
    }

    pub fn space(&self) -> &ProbSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn expectation(&self) -> f64 {
        self.space.weighted_sum(&self.values)
    }

    /// Applies `op` scenario-wise and wraps the result on the same space.
    pub fn map(&self, op: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(&self.space, self.values.iter().map(|&v| op(v)).collect())
    }

    /// Scenario-wise combination of two variables on the same space.
    pub fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_space(self, other)?;
        Self::new(
            &self.space,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        )
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn same_space(a: &RandomVariable, b: &RandomVariable) -> Result<()> {
    if a.space != b.space {
        return Err(structural("random variables live on different probability spaces"));
    }
    Ok(())
}

#[derive(Debug, PartialEq, Eq)]
struct PartitionInner {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

/// A partition of the scenario indices, standing in for a sub-σ-algebra.
///
/// Blocks are stored with sorted members and ordered by their smallest member,
/// so two partitions describing the same σ-algebra compare equal.
#[derive(Debug, Clone)]
pub struct InfoPartition(Arc<PartitionInner>);

impl PartialEq for InfoPartition {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl InfoPartition {
    pub fn new(n_scenarios: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; n_scenarios];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        for b in &blocks {
            if b.is_empty() {
                return Err(structural("information partition contains an empty block"));
            }
        }
        blocks.sort_by_key(|b| b[0]);
        for (j, b) in blocks.iter().enumerate() {
            for &k in b {
                if k >= n_scenarios {
                    return Err(structural(format!(
                        "scenario index {k} out of range for {n_scenarios} scenarios"
                    )));
                }
                if block_of[k] != usize::MAX {
                    return Err(structural(format!("scenario {k} appears in two blocks")));
                }
                block_of[k] = j;
            }
        }
        if let Some(k) = block_of.iter().position(|&j| j == usize::MAX) {
            return Err(structural(format!("scenario {k} is not covered by any block")));
        }
        Ok(Self(Arc::new(PartitionInner { blocks, block_of })))
    }

    /// The trivial σ-algebra: one block holding every scenario.
    pub fn trivial(n_scenarios: usize) -> Self {
        Self(Arc::new(PartitionInner {
            blocks: vec![(0..n_scenarios).collect()],
            block_of: vec![0; n_scenarios],
        }))
    }

    /// Full information: every scenario is its own block.
    pub fn singletons(n_scenarios: usize) -> Self {
        Self(Arc::new(PartitionInner {
            blocks: (0..n_scenarios).map(|k| vec![k]).collect(),
            block_of: (0..n_scenarios).collect(),
        }))
    }

    pub fn n_scenarios(&self) -> usize {
        self.0.block_of.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.0.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.0.blocks
    }

    pub fn block(&self, j: usize) -> &[usize] {
        &self.0.blocks[j]
    }

    pub fn block_of(&self, k: usize) -> usize {
        self.0.block_of[k]
    }

    /// Probability of every block under `space`.
    pub fn block_probs(&self, space: &ProbSpace) -> Vec<f64> {
        self.0
            .blocks
            .iter()
            .map(|b| b.iter().fold(0.0, |acc, &k| acc + space.prob(k)))
            .collect()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &InfoPartition) -> bool {
        self.n_scenarios() == coarser.n_scenarios()
            && self.0.blocks.iter().all(|b| {
                let j = coarser.block_of(b[0]);
                b.iter().all(|&k| coarser.block_of(k) == j)
            })
    }
}

fn check_partition(z: &RandomVariable, g: &InfoPartition) -> Result<()> {
    if g.n_scenarios() != z.len() {
        return Err(structural(format!(
            "partition covers {} scenarios, random variable has {}",
            g.n_scenarios(),
            z.len()
        )));
    }
    Ok(())
}

pub fn expectation(z: &RandomVariable) -> f64 {
    z.expectation()
}

/// `E[Z | G]`: on each block, the probability-weighted block average.
pub fn conditional_expectation(z: &RandomVariable, g: &InfoPartition) -> Result<RandomVariable> {
    check_partition(z, g)?;
    let space = z.space();
    let mut out = vec![0.0; z.len()];
    for block in g.blocks() {
        let (mass, acc) = block.iter().fold((0.0, 0.0), |(m, a), &k| {
            (m + space.prob(k), a + space.prob(k) * z.values()[k])
        });
        let avg = acc / mass;
        for &k in block {
            out[k] = avg;
        }
    }
    RandomVariable::new(space, out)
}

/// Exact block-constancy of the stored values.
pub fn is_measurable(z: &RandomVariable, g: &InfoPartition) -> Result<bool> {
    check_partition(z, g)?;
    Ok(g.blocks().iter().all(|b| {
        let first = z.values()[b[0]];
        b.iter().all(|&k| z.values()[k] == first)
    }))
}

pub fn almost_sure_leq(z: &RandomVariable, v: &RandomVariable) -> Result<bool> {
    same_space(z, v)?;
    Ok(z.values().iter().zip(v.values()).all(|(a, b)| a <= b))
}
