//! Thin-plate-spline RBF regression with a linear tail, one interpolant per
//! target, gated by k-fold cross-validated R^2.

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, StrobeError};

/// Targets whose cross-validated R^2 falls below this predict the mean.
pub const R2_GATE: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfRegressor {
    /// Parameter box used for normalization to the unit cube.
    pub bounds: Vec<[f64; 2]>,
    /// Normalized training parameters.
    pub centers: Vec<Vec<f64>>,
    /// Per target: `n` kernel weights followed by `dim + 1` tail coefficients.
    pub weights: Vec<Vec<f64>>,
    pub r2: Vec<f64>,
    pub active: Vec<bool>,
    pub mean: Vec<f64>,
    /// Held-out index sets used for the R^2 estimate.
    pub folds: Vec<Vec<usize>>,
}

fn tps(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `1 - sum (y - yhat)^2 / sum (y - mean y)^2`, and 0 when `y` is constant.
pub fn r2_score(y: &[f64], yhat: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let den: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if den <= 1e-300 {
        return 0.0;
    }
    let num: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - num / den
}

/// Interpolation weights for all targets at once; `ys[k]` is the target
/// vector of center `k`.
fn interpolate(centers: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = centers.len();
    let d = centers[0].len();
    let size = n + d + 1;
    let mut a = DMatrix::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = tps(dist2(&centers[i], &centers[j]));
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        for c in 0..d {
            a[(i, n + 1 + c)] = centers[i][c];
            a[(n + 1 + c, i)] = centers[i][c];
        }
    }
    let nt = ys[0].len();
    let mut b = DMatrix::zeros(size, nt);
    for (i, y) in ys.iter().enumerate() {
        for t in 0..nt {
            b[(i, t)] = y[t];
        }
    }
    let lu = a.lu();
    let x = lu
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| StrobeError::IllPosedData("RBF system is singular (too few or collinear parameters)".into()))?;
    Ok((0..nt).map(|t| x.column(t).iter().copied().collect()).collect())
}

fn evaluate(centers: &[Vec<f64>], w: &[f64], x: &[f64]) -> f64 {
    let n = centers.len();
    let mut v = w[n];
    for (c, xc) in x.iter().enumerate() {
        v += w[n + 1 + c] * xc;
    }
    for (ci, wi) in centers.iter().zip(w) {
        v += wi * tps(dist2(ci, x));
    }
    v
}

impl RbfRegressor {
    /// Fits one interpolant per target and estimates R^2 on `k_folds`
    /// seeded folds.
    pub fn fit(bounds: &[[f64; 2]], mus: &[Vec<f64>], ys: &[Vec<f64>], k_folds: usize, seed: u64) -> Result<Self> {
        let n = mus.len();
        if n == 0 {
            return Err(StrobeError::EmptyInput("no training data".into()));
        }
        if ys.len() != n {
            return Err(invalid("one target vector per parameter required"));
        }
        if k_folds < 2 || k_folds > n {
            return Err(invalid(format!("need n_train ({n}) >= k_folds ({k_folds}) >= 2")));
        }
        let dim = bounds.len();
        if bounds.iter().any(|b| !(b[1] > b[0])) {
            return Err(invalid("empty parameter box"));
        }
        let nt = ys[0].len();
        if ys.iter().any(|y| y.len() != nt) || mus.iter().any(|m| m.len() != dim) {
            return Err(invalid("inconsistent training dimensions"));
        }
        let centers: Vec<Vec<f64>> = mus.iter().map(|m| normalize(bounds, m)).collect();
        for i in 0..n {
            for j in 0..i {
                if dist2(&centers[i], &centers[j]) <= 1e-24 {
                    return Err(StrobeError::IllPosedData(format!("duplicate parameter {:?}", mus[i])));
                }
            }
        }
        let mean: Vec<f64> = (0..nt).map(|t| ys.iter().map(|y| y[t]).sum::<f64>() / n as f64).collect();
        let weights = if nt == 0 { Vec::new() } else { interpolate(&centers, ys)? };

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let folds: Vec<Vec<usize>> = (0..k_folds)
            .map(|f| {
                let mut v: Vec<usize> = order[f * n / k_folds..(f + 1) * n / k_folds].to_vec();
                v.sort_unstable();
                v
            })
            .collect();
        let mut held = vec![vec![0.0; nt]; n];
        if nt > 0 {
            for fold in &folds {
                let train: Vec<usize> = (0..n).filter(|i| fold.binary_search(i).is_err()).collect();
                let c: Vec<Vec<f64>> = train.iter().map(|&i| centers[i].clone()).collect();
                let y: Vec<Vec<f64>> = train.iter().map(|&i| ys[i].clone()).collect();
                let w = interpolate(&c, &y)?;
                for &i in fold {
                    for t in 0..nt {
                        held[i][t] = evaluate(&c, &w[t], &centers[i]);
                    }
                }
            }
        }
        let r2: Vec<f64> = (0..nt)
            .map(|t| {
                let y: Vec<f64> = ys.iter().map(|y| y[t]).collect();
                let yh: Vec<f64> = held.iter().map(|y| y[t]).collect();
                r2_score(&y, &yh)
            })
            .collect();
        let active = r2.iter().map(|r| *r >= R2_GATE).collect();
        Ok(Self { bounds: bounds.to_vec(), centers, weights, r2, active, mean, folds })
    }

    pub fn n_targets(&self) -> usize {
        self.mean.len()
    }

    pub fn predict(&self, mu: &[f64]) -> Vec<f64> {
        if mu.iter().zip(&self.bounds).any(|(m, b)| *m < b[0] - 1e-12 || *m > b[1] + 1e-12) {
            warn!("predicting outside the parameter box at {mu:?}");
        }
        let x = normalize(&self.bounds, mu);
        (0..self.n_targets())
            .map(|t| if self.active[t] { evaluate(&self.centers, &self.weights[t], &x) } else { self.mean[t] })
            .collect()
    }

    /// Index of the training parameter nearest to `mu` (normalized distance).
    pub fn nearest(&self, mu: &[f64]) -> usize {
        let x = normalize(&self.bounds, mu);
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = dist2(c, &x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

fn normalize(bounds: &[[f64; 2]], mu: &[f64]) -> Vec<f64> {
    mu.iter().zip(bounds).map(|(m, b)| (m - b[0]) / (b[1] - b[0])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const BOX: [[f64; 2]; 2] = [[1.0, 1.3], [0.25, 0.35]];

    fn sample(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| BOX.iter().map(|b| rng.random_range(b[0]..b[1])).collect()).collect()
    }

    #[test]
    fn linear_targets_are_reproduced() {
        let mus = sample(20, 1);
        let f = |m: &[f64]| vec![2.0 * m[0] - 3.0 * m[1] + 0.5, m[1]];
        let ys: Vec<Vec<f64>> = mus.iter().map(|m| f(m)).collect();
        let r = RbfRegressor::fit(&BOX, &mus, &ys, 5, 7).unwrap();
        assert!(r.r2.iter().all(|v| *v > 0.99));
        for m in sample(25, 2) {
            let p = r.predict(&m);
            let e = f(&m);
            assert!((p[0] - e[0]).abs() < 1e-3 && (p[1] - e[1]).abs() < 1e-3);
        }
        let mid: Vec<f64> = (0..2).map(|c| 0.5 * (mus[0][c] + mus[1][c])).collect();
        let p = r.predict(&mid);
        assert!((p[0] - 0.5 * (ys[0][0] + ys[1][0])).abs() < 1e-6);
    }

    #[test]
    fn interpolates_training_points() {
        let mus = sample(15, 3);
        let ys: Vec<Vec<f64>> = mus.iter().map(|m| vec![(10.0 * m[0]).sin() * (20.0 * m[1]).cos()]).collect();
        let mut r = RbfRegressor::fit(&BOX, &mus, &ys, 5, 7).unwrap();
        r.active = vec![true];
        for (m, y) in mus.iter().zip(&ys) {
            assert!((r.predict(m)[0] - y[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_and_gated_targets_predict_the_mean() {
        let mus = sample(12, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ys: Vec<Vec<f64>> = mus.iter().map(|_| vec![4.0, rng.random_range(-1.0..1.0)]).collect();
        let r = RbfRegressor::fit(&BOX, &mus, &ys, 4, 1).unwrap();
        assert_eq!(r.r2[0], 0.0);
        assert!(!r.active[0] && !r.active[1]);
        let p = r.predict(&[1.1, 0.3]);
        assert_eq!(p[0], 4.0);
        assert_eq!(p[1], r.mean[1]);
    }

    #[test]
    fn r2_of_perfect_prediction_is_one() {
        assert_eq!(r2_score(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]), 1.0);
    }

    #[test]
    fn folds_partition_and_are_seeded() {
        let mus = sample(13, 5);
        let ys: Vec<Vec<f64>> = mus.iter().map(|m| vec![m[0]]).collect();
        let a = RbfRegressor::fit(&BOX, &mus, &ys, 5, 3).unwrap();
        let b = RbfRegressor::fit(&BOX, &mus, &ys, 5, 3).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..13).collect::<Vec<_>>());
    }

    #[test]
    fn bad_inputs() {
        let mus = vec![vec![1.1, 0.3], vec![1.1, 0.3], vec![1.2, 0.26]];
        let ys = vec![vec![1.0], vec![2.0], vec![0.0]];
        assert!(matches!(RbfRegressor::fit(&BOX, &mus, &ys, 2, 0), Err(StrobeError::IllPosedData(_))));
        assert!(RbfRegressor::fit(&BOX, &mus[..1], &ys[..1], 2, 0).is_err());
    }
}
