//! Gauss rules on the unit interval and the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}`.

use crate::error::{invalid, Result};

#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("Gauss-Legendre rule needs at least one point"));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// Gauss rule on [0, 1] with `n` points.
pub fn line_rule(n: usize) -> Result<LineRule> {
    let (x, w) = gauss_legendre(n)?;
    Ok(LineRule {
        points: x.iter().map(|&s| 0.5 * (s + 1.0)).collect(),
        weights: w.iter().map(|&s| 0.5 * s).collect(),
    })
}

/// Symmetric rule exact for polynomials of total degree `degree` on the reference
/// triangle. Low degrees use compact symmetric rules; higher degrees fall back
/// to a collapsed tensor Gauss rule.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let rule = match degree {
        0 | 1 => TriangleRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        },
        2 => {
            let a = 1.0 / 6.0;
            let b = 2.0 / 3.0;
            TriangleRule {
                points: vec![[a, a], [b, a], [a, b]],
                weights: vec![1.0 / 6.0; 3],
            }
        }
        3..=5 => {
            let s = 15f64.sqrt();
            let a1 = (6.0 - s) / 21.0;
            let b1 = (9.0 + 2.0 * s) / 21.0;
            let w1 = (155.0 - s) / 2400.0;
            let a2 = (6.0 + s) / 21.0;
            let b2 = (9.0 - 2.0 * s) / 21.0;
            let w2 = (155.0 + s) / 2400.0;
            TriangleRule {
                points: vec![
                    [1.0 / 3.0, 1.0 / 3.0],
                    [a1, a1],
                    [b1, a1],
                    [a1, b1],
                    [a2, a2],
                    [b2, a2],
                    [a2, b2],
                ],
                weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
            }
        }
        _ => collapsed_rule(degree.div_ceil(2) + 1)?,
    };
    Ok(rule)
}

/// Duffy-collapsed tensor rule, exact to total degree `2n - 2`.
pub fn collapsed_rule(n: usize) -> Result<TriangleRule> {
    let g = line_rule(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (i, &u) in g.points.iter().enumerate() {
        for (j, &v) in g.points.iter().enumerate() {
            points.push([u, v * (1.0 - u)]);
            weights.push(g.weights[i] * g.weights[j] * (1.0 - u));
        }
    }
    Ok(TriangleRule { points, weights })
}
