//! Lawson–Hanson active-set solver for `min ‖Ax − b‖` subject to `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero
/// in the unconstrained subproblems.
const RANK_RTOL: f64 = 1e-13;

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(cols);
    let svd = sub.svd(true, true);
    let eps = RANK_RTOL * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("both factors were computed")
}

/// Returns the minimizer. Column `j` joins the passive set only when its
/// dual value exceeds `1e-12·‖a_j‖·max(‖b‖, 1)`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = b.norm().max(1.0);
    let thresholds: Vec<f64> = (0..n).map(|j| 1e-12 * a.column(j).norm() * scale).collect();
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let entering = (0..n)
            .filter(|&j| !passive[j] && w[j] > thresholds[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = entering else { break };
        passive[t] = true;
        for _ in 0..=n {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let s = lstsq(a, b, &cols);
            if s.iter().all(|&v| v > 0.0) {
                for (i, &j) in cols.iter().enumerate() {
                    x[j] = s[i];
                }
                break;
            }
            // Move toward s until the first passive coordinate hits zero.
            let mut alpha = 1.0_f64;
            for (i, &j) in cols.iter().enumerate() {
                if s[i] <= 0.0 {
                    let denom = x[j] - s[i];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (i, &j) in cols.iter().enumerate() {
                x[j] += alpha * (s[i] - x[j]);
                if x[j] <= 0.0 || (s[i] <= 0.0 && x[j] <= 1e-15 * scale) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_solution_is_kept_when_positive() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_coordinates_are_clipped() {
        // Unconstrained optimum is (−1, 1).
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![-1.0, 1.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_conditions_hold() {
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, -1.0, 0.5, -1.0, 2.0, 3.0, 0.0, 1.0, -2.0, 1.0, 0.5],
        );
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let x = nnls(&a, &b);
        let w = a.transpose() * (&b - &a * &x);
        for j in 0..3 {
            assert!(x[j] >= 0.0);
            assert!(w[j] <= 1e-10);
            if x[j] > 0.0 {
                assert!(w[j].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duplicate_columns() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 1.0]);
        let x = nnls(&a, &b);
        let r = &b - &a * &x;
        assert!(r.norm() < 1e-12);
        assert!(x.iter().all(|&v| v >= 0.0));
    }
}
