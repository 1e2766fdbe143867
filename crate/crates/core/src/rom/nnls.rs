//! Lawson-Hanson active-set nonnegative least squares.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct NnlsResult {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(passive);
    crate::linalg::lstsq(&sub, b)
}

/// Minimizes `|A x - b|_2` over `x >= 0`. Stops when no dual entry exceeds
/// `step_tol` or when an outer step changes `x` by at most `step_tol` in the
/// Euclidean norm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, step_tol: f64, max_iter: usize) -> NnlsResult {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive: Vec<usize> = Vec::new();
    let mut in_p = vec![false; n];
    let floor = (1e-14 * (a.transpose() * b).amax()).max(step_tol).max(1e-300);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let w = a.transpose() * (b - a * &x);
        let mut best = None;
        for j in 0..n {
            if !in_p[j] && w[j] > floor && best.is_none_or(|(_, v)| w[j] > v) {
                best = Some((j, w[j]));
            }
        }
        let Some((j, _)) = best else { break };
        passive.push(j);
        in_p[j] = true;
        let x_old = x.clone();
        loop {
            let s = solve_passive(a, b, &passive);
            if s.iter().all(|v| *v > 0.0) {
                for (i, &p) in passive.iter().enumerate() {
                    x[p] = s[i];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (i, &p) in passive.iter().enumerate() {
                if s[i] <= 0.0 {
                    alpha = alpha.min(x[p] / (x[p] - s[i]));
                }
            }
            for (i, &p) in passive.iter().enumerate() {
                x[p] += alpha * (s[i] - x[p]);
            }
            passive.retain(|&p| {
                let keep = x[p] > 1e-15 * x.amax().max(1e-300);
                if !keep {
                    x[p] = 0.0;
                    in_p[p] = false;
                }
                keep
            });
            if passive.is_empty() {
                break;
            }
        }
        if (&x - &x_old).norm() <= step_tol {
            break;
        }
    }
    let residual = (a * &x - b).norm();
    NnlsResult { x, residual, iterations: it }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_nonnegative_solution() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.5, 0.0, 1.0]);
        let xt = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        let b = &a * &xt;
        let r = nnls(&a, &b, 0.0, 100);
        assert!((&r.x - xt).norm() < 1e-12);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn clips_negative_directions() {
        // unconstrained optimum is x = (1, -1)
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let r = nnls(&a, &b, 0.0, 100);
        assert_eq!(r.x.as_slice(), &[1.0, 0.0]);
        assert!((r.residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_tolerance_stops_early() {
        let a = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, 1e-3, 0.0]);
        assert_eq!(nnls(&a, &b, 1e-2, 100).x.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(nnls(&a, &b, 0.0, 100).x.as_slice(), &[1.0, 1e-3, 0.0]);
    }

    #[test]
    fn kkt_conditions_hold_on_random_instance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(12, 30, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let r = nnls(&a, &b, 0.0, 500);
        let w = a.transpose() * (&b - &a * &r.x);
        for j in 0..30 {
            assert!(r.x[j] >= 0.0);
            assert!(w[j] <= 1e-10);
            if r.x[j] > 0.0 {
                assert!(w[j].abs() < 1e-10);
            }
        }
    }
}
