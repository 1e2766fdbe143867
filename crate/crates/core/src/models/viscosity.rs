//! Piecewise-constant sub-cell shock-capturing viscosity driven by the decay of
//! the highest-order modal content of a sensor field.

use serde::{Deserialize, Serialize};

use crate::dg::DgSpace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscosityParams {
    pub s0: f64,
    pub kappa: f64,
    /// Amplitude of the sensor-activated part.
    pub eps0: f64,
    /// Background viscosity present everywhere.
    pub eps_base: f64,
    /// Relative width of the smoothed `|.|` and `max` in the upwind
    /// dissipation (0 gives the exact Rusanov flux).
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

fn default_smoothing() -> f64 {
    0.05
}

impl Default for ViscosityParams {
    fn default() -> Self {
        Self { s0: -2.5, kappa: 1.5, eps0: 1e-2, eps_base: 5e-4, smoothing: default_smoothing() }
    }
}

impl ViscosityParams {
    /// Multiplies both viscosity levels by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self { eps0: self.eps0 * factor, eps_base: self.eps_base * factor, ..self }
    }
}

/// Sine ramp from 0 (below `s0 - kappa`) to `eps0` (above `s0 + kappa`).
pub fn ramp(s: f64, p: &ViscosityParams) -> f64 {
    if s < p.s0 - p.kappa {
        0.0
    } else if s < p.s0 + p.kappa {
        0.5 * p.eps0 * (1.0 + (std::f64::consts::PI * (s - p.s0) / (2.0 * p.kappa)).sin())
    } else {
        p.eps0
    }
}

/// Derivative of [`ramp`].
pub fn ramp_derivative(s: f64, p: &ViscosityParams) -> f64 {
    if s <= p.s0 - p.kappa || s >= p.s0 + p.kappa {
        0.0
    } else {
        let c = std::f64::consts::PI / (2.0 * p.kappa);
        0.5 * p.eps0 * c * (c * (s - p.s0)).cos()
    }
}

/// Element viscosity and its gradient with respect to the nodal sensor values.
pub fn element_viscosity_grad(space: &DgSpace, sensor: &[f64], p: &ViscosityParams) -> (f64, Vec<f64>) {
    let t = &space.tables;
    let nl = sensor.len();
    let r: Vec<f64> = (0..nl)
        .map(|i| sensor[i] - (0..nl).map(|j| t.proj_lower[(i, j)] * sensor[j]).sum::<f64>())
        .collect();
    let mr: Vec<f64> = (0..nl).map(|i| (0..nl).map(|j| t.mass_ref[(i, j)] * r[j]).sum()).collect();
    let ms: Vec<f64> = (0..nl).map(|i| (0..nl).map(|j| t.mass_ref[(i, j)] * sensor[j]).sum()).collect();
    let num: f64 = r.iter().zip(&mr).map(|(a, b)| a * b).sum();
    let den: f64 = sensor.iter().zip(&ms).map(|(a, b)| a * b).sum();
    if den <= 0.0 || num <= 0.0 {
        return (p.eps_base, vec![0.0; nl]);
    }
    let s2 = num / den;
    let x = 0.5 * s2.log10();
    let eps = p.eps_base + ramp(x, p);
    let dr = ramp_derivative(x, p);
    if dr == 0.0 {
        return (eps, vec![0.0; nl]);
    }
    // d num / ds = 2 (I - P)^T M r
    let c = dr * 0.5 / (s2 * std::f64::consts::LN_10);
    let grad = (0..nl)
        .map(|j| {
            let dnum = 2.0 * (mr[j] - (0..nl).map(|i| t.proj_lower[(i, j)] * mr[i]).sum::<f64>());
            c * (dnum / den - 2.0 * num * ms[j] / (den * den))
        })
        .collect();
    (eps, grad)
}

/// Viscosity of one element from the nodal values of its sensor polynomial.
pub fn element_viscosity(space: &DgSpace, sensor: &[f64], p: &ViscosityParams) -> f64 {
    let t = &space.tables;
    let nl = sensor.len();
    let mut r = vec![0.0; nl];
    for i in 0..nl {
        let mut s = 0.0;
        for j in 0..nl {
            s += t.proj_lower[(i, j)] * sensor[j];
        }
        r[i] = sensor[i] - s;
    }
    let quad = |v: &[f64]| {
        let mut e = 0.0;
        for i in 0..nl {
            for j in 0..nl {
                e += v[i] * t.mass_ref[(i, j)] * v[j];
            }
        }
        e.max(0.0)
    };
    let den = quad(sensor);
    if den <= 0.0 {
        return p.eps_base;
    }
    let sk = (quad(&r) / den).sqrt();
    if sk <= 0.0 {
        return p.eps_base;
    }
    p.eps_base + ramp(sk.log10(), p)
}

/// Per-element viscosity of a full field, using component `comp` as sensor.
pub fn artificial_viscosity(space: &DgSpace, u: &[f64], comp: usize, p: &ViscosityParams) -> Vec<f64> {
    let nl = space.n_local();
    (0..space.n_elements())
        .map(|k| {
            let base = space.index(0, k, comp);
            element_viscosity(space, &u[base..base + nl], p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpaceTimeMesh;
    use std::sync::Arc;

    #[test]
    fn viscosity_gradient_matches_fd() {
        let m = Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 1, 1, 2).unwrap());
        let s = DgSpace::new(m, 1).unwrap();
        let p = ViscosityParams::default();
        let nl = s.n_local();
        let sensor: Vec<f64> = (0..nl).map(|i| 1.0 + 0.02 * (i as f64 * 1.7).sin()).collect();
        let (e, g) = element_viscosity_grad(&s, &sensor, &p);
        assert!((e - element_viscosity(&s, &sensor, &p)).abs() < 1e-15);
        assert!(g.iter().any(|v| *v != 0.0));
        for j in 0..nl {
            let h = 1e-7;
            let mut a = sensor.clone();
            a[j] += h;
            let mut b = sensor.clone();
            b[j] -= h;
            let fd = (element_viscosity(&s, &a, &p) - element_viscosity(&s, &b, &p)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()), "{fd} {}", g[j]);
        }
    }

    #[test]
    fn ramp_values() {
        let p = ViscosityParams::default();
        assert_eq!(ramp(-10.0, &p), 0.0);
        assert!((ramp(p.s0, &p) - 0.5 * p.eps0).abs() < 1e-15);
        assert_eq!(ramp(p.s0 + p.kappa, &p), p.eps0);
    }

    #[test]
    fn low_degree_sensor_gets_base_viscosity() {
        let m = Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 2, 2, 2).unwrap());
        let s = DgSpace::new(m, 1).unwrap();
        let p = ViscosityParams::default();
        let u = s.interpolate(|x| vec![1.0 + x[0] - 2.0 * x[1]]);
        let eps = artificial_viscosity(&s, &u, 0, &p);
        assert!(eps.iter().all(|&e| (e - p.eps_base).abs() < 1e-12));
        let v = s.interpolate(|x| vec![if x[0] > 0.3 { 1.0 } else { 0.0 }]);
        let e2 = artificial_viscosity(&s, &v, 0, &p);
        assert!(e2.iter().any(|&e| e > p.eps_base + 0.5 * p.eps0));
    }
}
