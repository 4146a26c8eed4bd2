//! Optimality certificates for the dominance-constrained problem.
//!
//! At a candidate `x̂` we look for `κ ≥ 0`, weights `w_i` on near-active
//! levels and a normal vector `n` to the box such that
//!
//! ```text
//! 0 ∈ ∂φ(x̂) + κ Σ_i w_i ∂[AVaR⁻_{p_i}(G(·))](x̂) + N(x̂).
//! ```
//!
//! The residual `min ‖g + Σ η_i d_i + n‖` is found by fully corrective
//! Frank–Wolfe: the exact linear minimization oracles of the objective and
//! of each level supply new atoms, and the restricted problem over the
//! collected atoms is a nonnegative least-squares problem.

use nalgebra::{DMatrix, DVector};

use crate::composite::{composite_lmo, composite_subgradient, CompositeGradient};
use crate::dominance::avar_constraint_lmo;
use crate::error::{domain, Result, RiskError};
use crate::integrand::DecisionPoint;
use crate::nnls::nnls;
use crate::risk::{avar_lower, SpectralMeasure};
use crate::solver::ProblemSpec;

/// Default certificate tolerance on the residual and complementarity gap.
pub const CERT_TOL: f64 = 1e-5;
/// Levels with `|ρ_p(G(x̂))|` at most this are eligible for the multiplier.
pub const ACT_TOL: f64 = 1e-5;
/// A coordinate within this distance of a bound counts as active.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub tol: f64,
    pub act_tol: f64,
    pub bound_tol: f64,
    pub max_iter: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol: CERT_TOL,
            act_tol: ACT_TOL,
            bound_tol: BOUND_TOL,
            max_iter: 200,
        }
    }
}

/// A level carrying positive multiplier mass.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMultiplier {
    pub level: f64,
    /// `κ·w_i`.
    pub eta: f64,
    /// `ρ_{p_i}(G(x̂))`.
    pub constraint_value: f64,
    /// Averaged lower-tail identifier of `G(x̂)` at this level.
    pub zeta: Vec<f64>,
    /// The element of `∂[AVaR⁻_{p_i}(G(·))](x̂)` used, one vector per block.
    pub gradient: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kappa: f64,
    /// `(p_i, w_i)` with `Σ w_i = 1`; empty when `κ ≤ tol`.
    pub weights: Vec<(f64, f64)>,
    /// `(p_i, κ w_i / p_i)`; empty when `weights` is.
    pub nu: Vec<(f64, f64)>,
    pub multipliers: Vec<LevelMultiplier>,
    /// Element of `∂φ(x̂)`, one vector per block.
    pub objective_gradient: Vec<Vec<f64>>,
    /// Averaged risk identifier behind `objective_gradient`.
    pub objective_zeta: Vec<f64>,
    /// Element of the normal cone of the box at `x̂`.
    pub normal: Vec<Vec<f64>>,
    /// The residual vector and its Euclidean norm.
    pub residual_vector: Vec<f64>,
    pub residual: f64,
    pub complementarity_gap: f64,
    /// Levels with `|ρ_p| ≤ act_tol`, the candidate support.
    pub active_levels: Vec<f64>,
    pub max_violation: f64,
    pub feasible: bool,
    pub iterations: usize,
    /// Frank–Wolfe gap of the objective part at termination.
    pub fw_gap: f64,
    pub accepted: bool,
}

/// `ν̂ = (κ/p) μ̂` as `(p_i, κ w_i / p_i)` pairs.
pub fn nu_from_mu(kappa: f64, mu: &SpectralMeasure) -> Vec<(f64, f64)> {
    mu.levels()
        .iter()
        .zip(mu.weights())
        .map(|(&p, &w)| (p, kappa * w / p))
        .collect()
}

#[derive(Debug, Clone)]
enum Column {
    Objective(CompositeGradient),
    Level(usize, CompositeGradient),
    Normal,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn blocks_of(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    flat.chunks(n).map(<[f64]>::to_vec).collect()
}

fn combine(columns: &[Vec<f64>], coef: &[f64], pick: impl Fn(usize) -> bool, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (j, col) in columns.iter().enumerate() {
        if pick(j) && coef[j] != 0.0 {
            for (o, v) in out.iter_mut().zip(col) {
                *o += coef[j] * v;
            }
        }
    }
    out
}

/// Searches for optimality multipliers at `x̂`. A failed search is not an
/// error: the certificate reports the smallest residual found and
/// `accepted = false`.
pub fn certify(problem: &ProblemSpec, x_hat: &DecisionPoint, opts: &CertifyOptions) -> Result<Certificate> {
    if !(opts.tol > 0.0) || !(opts.act_tol >= 0.0) || !(opts.bound_tol >= 0.0) {
        return Err(domain("certificate tolerances must be positive"));
    }
    let info = problem.info();
    let x = x_hat.restrict_to(info)?;
    if !problem.in_box(&x) {
        return Err(RiskError::Precondition("candidate lies outside the feasible box".into()));
    }
    let n = problem.dim();
    let dim = problem.total_dim();
    let g = problem.constraint_integrand();
    let c = problem.constraint();

    let gz = g.evaluate(&x)?;
    let levels = c.effective_levels(&gz);
    let values = c.values_at(&gz, &levels);
    let max_violation = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let active: Vec<(f64, f64)> = levels
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.abs() <= opts.act_tol)
        .map(|(&p, &v)| (p, v))
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut kinds: Vec<Column> = Vec::new();
    let fb = problem.feasible_box();
    for (b, block) in x.block_values().iter().enumerate() {
        for i in 0..n {
            let mut push = |sign: f64| {
                let mut e = vec![0.0; dim];
                e[b * n + i] = sign;
                columns.push(e);
                kinds.push(Column::Normal);
            };
            if block[i] - fb.lower()[i] <= opts.bound_tol {
                push(-1.0);
            }
            if fb.upper()[i] - block[i] <= opts.bound_tol {
                push(1.0);
            }
        }
    }
    let start = composite_subgradient(problem.risk(), problem.objective(), &x, info)?;
    columns.push(start.flatten());
    kinds.push(Column::Objective(start));

    let threshold = opts.tol * opts.tol / 4.0;
    let mut coef: Vec<f64>;
    let mut v: Vec<f64>;
    let mut fw_gap;
    let mut iterations = 0;
    loop {
        iterations += 1;
        coef = restricted_solve(&columns, &kinds, dim);
        v = combine(&columns, &coef, |_| true, dim);
        let vv = dot(&v, &v);
        let dir = blocks_of(&v, n);

        let atom = composite_lmo(problem.risk(), problem.objective(), &x, info, &dir)?;
        let atom_flat = atom.flatten();
        fw_gap = vv - dot(&v, &atom_flat);
        if vv.sqrt() <= 1e-3 * opts.tol || iterations >= opts.max_iter {
            break;
        }
        let mut added = false;
        if fw_gap > threshold && !columns.contains(&atom_flat) {
            columns.push(atom_flat);
            kinds.push(Column::Objective(atom));
            added = true;
        }
        for (i, &(p, _)) in active.iter().enumerate() {
            let d = avar_constraint_lmo(g, &x, p, info, &dir)?;
            let d_flat = d.flatten();
            let slope = dot(&v, &d_flat);
            if slope < -1e-15 * vv.sqrt() * dot(&d_flat, &d_flat).sqrt()
                && !columns.contains(&d_flat)
            {
                columns.push(d_flat);
                kinds.push(Column::Level(i, d));
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    let residual = dot(&v, &v).sqrt();
    let objective_gradient =
        blocks_of(&combine(&columns, &coef, |j| matches!(kinds[j], Column::Objective(_)), dim), n);
    let normal = blocks_of(&combine(&columns, &coef, |j| matches!(kinds[j], Column::Normal), dim), n);
    let n_scen = problem.objective().n_scenarios();
    let mut objective_zeta = vec![0.0; n_scen];
    for (j, k) in kinds.iter().enumerate() {
        if let Column::Objective(a) = k {
            for (o, z) in objective_zeta.iter_mut().zip(&a.zeta) {
                *o += coef[j] * z;
            }
        }
    }

    let y = c.benchmark();
    let mut multipliers = Vec::new();
    let mut gap_sum = 0.0;
    for (i, &(p, value)) in active.iter().enumerate() {
        let mut eta = 0.0;
        let mut zeta = vec![0.0; n_scen];
        let mut grad = vec![0.0; dim];
        for (j, k) in kinds.iter().enumerate() {
            if let Column::Level(li, d) = k {
                if *li == i && coef[j] > 0.0 {
                    eta += coef[j];
                    for (o, z) in zeta.iter_mut().zip(&d.zeta) {
                        *o += coef[j] * z;
                    }
                    for (o, z) in grad.iter_mut().zip(&columns[j]) {
                        *o += coef[j] * z;
                    }
                }
            }
        }
        if eta > 0.0 {
            zeta.iter_mut().for_each(|z| *z /= eta);
            grad.iter_mut().for_each(|z| *z /= eta);
            gap_sum += eta * (avar_lower(&gz, p)? - avar_lower(y, p)?);
            multipliers.push(LevelMultiplier {
                level: p,
                eta,
                constraint_value: value,
                zeta,
                gradient: blocks_of(&grad, n),
            });
        }
    }
    let kappa = multipliers.iter().fold(0.0, |acc, m| acc + m.eta);
    let (weights, nu) = if kappa > opts.tol {
        let mu = SpectralMeasure::new(
            multipliers.iter().map(|m| m.level).collect(),
            multipliers.iter().map(|m| m.eta / kappa).collect(),
            crate::risk::Orientation::LowerProfit,
        )?;
        let weights = mu.levels().iter().copied().zip(mu.weights().iter().copied()).collect();
        (weights, nu_from_mu(kappa, &mu))
    } else {
        (Vec::new(), Vec::new())
    };
    let complementarity_gap = gap_sum.abs();
    let feasible = max_violation <= opts.act_tol;
    let accepted = residual <= opts.tol && complementarity_gap <= opts.tol && feasible;
    Ok(Certificate {
        kappa,
        weights,
        nu,
        multipliers,
        objective_gradient,
        objective_zeta,
        normal,
        residual_vector: v,
        residual,
        complementarity_gap,
        active_levels: active.iter().map(|a| a.0).collect(),
        max_violation,
        feasible,
        iterations,
        fw_gap,
        accepted,
    })
}

/// Minimizes `‖Σ c_j a_j‖` over `c ≥ 0` with the objective coefficients
/// summing to one. The equality enters as a weighted extra row and the result
/// is rescaled so the objective coefficients sum to one. Since the residual
/// is homogeneous in `c`, the rescaled minimizer is exact for any weight.
fn restricted_solve(columns: &[Vec<f64>], kinds: &[Column], dim: usize) -> Vec<f64> {
    let m = columns.len();
    let max_norm = columns
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(1.0_f64, f64::max);
    let weight = max_norm;
    let a = DMatrix::from_fn(dim + 1, m, |r, j| {
        if r < dim {
            columns[j][r]
        } else if matches!(kinds[j], Column::Objective(_)) {
            weight
        } else {
            0.0
        }
    });
    let mut b = DVector::zeros(dim + 1);
    b[dim] = weight;
    let sol = nnls(&a, &b);
    let total: f64 = (0..m)
        .filter(|&j| matches!(kinds[j], Column::Objective(_)))
        .map(|j| sol[j])
        .sum();
    if total > 0.0 {
        sol.iter().map(|c| c / total).collect()
    } else {
        // Degenerate: fall back to the first objective atom alone.
        let first = kinds
            .iter()
            .position(|k| matches!(k, Column::Objective(_)))
            .expect("an objective atom is always present");
        (0..m).map(|j| if j == first { 1.0 } else { 0.0 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::{active_scalar_problem, median_problem};

    #[test]
    fn active_scalar_certificate() {
        let p = active_scalar_problem(1.0);
        let x = p.decision(&[1.0]).unwrap();
        let cert = certify(&p, &x, &CertifyOptions::default()).unwrap();
        assert!(cert.accepted, "{cert:?}");
        assert!((cert.kappa - 1.0).abs() < 1e-9);
        assert_eq!(cert.weights.len(), 1);
        assert_eq!(cert.weights[0], (1.0, 1.0));
        assert!(cert.residual <= 1e-6);
        assert!(cert.complementarity_gap <= 1e-8);
        for (&(p, nu), &(_, w)) in cert.nu.iter().zip(&cert.weights) {
            assert_eq!(nu, cert.kappa * w / p);
        }
    }

    #[test]
    fn interior_unconstrained_minimizer() {
        let p = median_problem();
        let x = p.decision(&[1.5]).unwrap();
        let cert = certify(&p, &x, &CertifyOptions::default()).unwrap();
        assert!(cert.accepted);
        assert_eq!(cert.kappa, 0.0);
        assert!(cert.weights.is_empty());
        assert!(cert.residual <= 1e-12);
    }

    #[test]
    fn kink_minimizer_needs_mixed_subgradient() {
        let p = median_problem();
        let x = p.decision(&[1.0]).unwrap();
        let cert = certify(&p, &x, &CertifyOptions::default()).unwrap();
        assert!(cert.accepted);
        assert!(cert.residual <= 1e-12);
    }

    #[test]
    fn non_optimal_points_are_rejected() {
        let p = active_scalar_problem(1.0);
        let mut prev = 0.0;
        for delta in [0.01, 0.05, 0.1] {
            let x = p.decision(&[1.0 + delta]).unwrap();
            let cert = certify(&p, &x, &CertifyOptions::default()).unwrap();
            assert!(!cert.accepted);
            assert!(cert.residual >= prev);
            prev = cert.residual;
        }
        let p = median_problem();
        let x = p.decision(&[2.5]).unwrap();
        let cert = certify(&p, &x, &CertifyOptions::default()).unwrap();
        assert!((cert.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_bound_absorbs_gradient() {
        // Minimize x on [1, 3] without a binding constraint.
        let p = active_scalar_problem(0.0);
        let fb = crate::solver::FeasibleBox::new(vec![1.0], vec![3.0]).unwrap();
        let p = ProblemSpec::new(
            p.risk().clone(),
            p.objective().clone(),
            p.constraint_integrand().clone(),
            p.constraint().clone(),
            fb,
            p.info().clone(),
        )
        .unwrap();
        let cert = certify(&p, &p.decision(&[1.0]).unwrap(), &CertifyOptions::default()).unwrap();
        assert!(cert.accepted);
        assert_eq!(cert.kappa, 0.0);
        assert!((cert.normal[0][0] + 1.0).abs() < 1e-12, "{cert:?}");
    }

    #[test]
    fn nu_examples() {
        let mu = SpectralMeasure::point_mass(0.5, crate::risk::Orientation::LowerProfit).unwrap();
        assert_eq!(nu_from_mu(2.0, &mu), vec![(0.5, 4.0)]);
        assert_eq!(nu_from_mu(0.0, &mu), vec![(0.5, 0.0)]);
    }

    #[test]
    fn deterministic() {
        let p = active_scalar_problem(1.0);
        let x = p.decision(&[1.0]).unwrap();
        let a = certify(&p, &x, &CertifyOptions::default()).unwrap();
        let b = certify(&p, &x, &CertifyOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
