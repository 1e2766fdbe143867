//! Registration sensor fields: extraction, smoothing, and evaluation at
//! arbitrary (mapped) points.

use crate::dg::DgSpace;
use crate::error::{invalid, Result};

/// Scalar sensor field `s(U)`: component `comp` of a DG field, as a field of
/// the scalar DG space.
pub fn extract_sensor(space: &DgSpace, u: &[f64], comp: usize) -> Result<Vec<f64>> {
    space.check_len(u)?;
    if comp >= space.n_comp {
        return Err(invalid(format!("sensor component {comp} of a {}-component field", space.n_comp)));
    }
    Ok(space.component(u, comp))
}

/// Moving average of the nodal values along `x` on each row of the global
/// node lattice (spacing `h / p`). Near the ends the window shrinks
/// symmetrically. The result is continuous and reproduces constants.
pub fn filter_sensor(space: &DgSpace, s: &[f64], window: usize) -> Result<Vec<f64>> {
    if space.n_comp != 1 {
        return Err(invalid("filter expects a scalar field"));
    }
    space.check_len(s)?;
    if window.is_multiple_of(2) {
        return Err(invalid(format!("filter window {window} must be odd")));
    }
    let mesh = &space.mesh;
    let p = mesh.p;
    let (nxl, ntl) = (mesh.nx * p + 1, mesh.nt * p + 1);
    if window > nxl {
        return Err(invalid(format!("filter window {window} exceeds the {nxl} lattice columns")));
    }
    let (hx, ht) = mesh.cell_size();
    let (dx, dt) = (hx / p as f64, ht / p as f64);
    let nl = space.n_local();
    let lattice_index = |x: [f64; 2]| -> usize {
        let i = (x[0] / dx).round() as usize;
        let j = (x[1] / dt).round() as usize;
        j.min(ntl - 1) * nxl + i.min(nxl - 1)
    };
    let mut sum = vec![0.0; nxl * ntl];
    let mut cnt = vec![0usize; nxl * ntl];
    let mut node_of = Vec::with_capacity(s.len());
    for k in 0..space.n_elements() {
        let geo = &mesh.geometry[k];
        for i in 0..nl {
            let li = lattice_index(geo.to_physical(mesh.reference.nodes[i]));
            sum[li] += s[space.index(i, k, 0)];
            cnt[li] += 1;
            node_of.push(li);
        }
    }
    let avg: Vec<f64> = sum.iter().zip(&cnt).map(|(a, c)| if *c > 0 { a / *c as f64 } else { 0.0 }).collect();
    let half = window / 2;
    let mut smooth = vec![0.0; avg.len()];
    for j in 0..ntl {
        let row = &avg[j * nxl..(j + 1) * nxl];
        for i in 0..nxl {
            let h = half.min(i).min(nxl - 1 - i);
            let seg = &row[i - h..=i + h];
            smooth[j * nxl + i] = seg.iter().sum::<f64>() / seg.len() as f64;
        }
    }
    let mut out = vec![0.0; s.len()];
    for k in 0..space.n_elements() {
        for i in 0..nl {
            out[space.index(i, k, 0)] = smooth[node_of[k * nl + i]];
        }
    }
    Ok(out)
}

/// Point evaluation of a scalar DG field and its gradient.
pub struct FieldEvaluator<'a> {
    space: &'a DgSpace,
    field: &'a [f64],
    vals: Vec<f64>,
    grads: Vec<[f64; 2]>,
    scratch: Vec<f64>,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(space: &'a DgSpace, field: &'a [f64]) -> Self {
        let nl = space.n_local();
        Self { space, field, vals: vec![0.0; nl], grads: vec![[0.0; 2]; nl], scratch: vec![0.0; 3 * nl] }
    }

    /// Value and physical gradient at `y`; `clamped` reports whether `y` lay
    /// outside the domain by more than `1e-10`.
    pub fn eval(&mut self, y: [f64; 2]) -> (f64, [f64; 2], bool) {
        let mesh = &self.space.mesh;
        let clamped = y[0] < -1e-10 || y[1] < -1e-10 || y[0] > mesh.length + 1e-10 || y[1] > mesh.time + 1e-10;
        let (k, xi) = mesh.locate(y);
        mesh.reference.eval_grad_into(xi, &mut self.vals, &mut self.grads, &mut self.scratch);
        let nl = self.vals.len();
        let base = self.space.index(0, k, 0);
        let c = &self.field[base..base + nl];
        let geo = &mesh.geometry[k];
        let (mut v, mut g) = (0.0, [0.0; 2]);
        for i in 0..nl {
            v += c[i] * self.vals[i];
            g[0] += c[i] * self.grads[i][0];
            g[1] += c[i] * self.grads[i][1];
        }
        (v, geo.grad_to_physical(g), clamped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpaceTimeMesh;
    use std::sync::Arc;

    fn space() -> DgSpace {
        DgSpace::new(Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 6, 2, 2).unwrap()), 1).unwrap()
    }

    #[test]
    fn constants_and_unit_window() {
        let s = space();
        let c = s.interpolate(|_| vec![3.0]);
        let f = filter_sensor(&s, &c, 5).unwrap();
        assert!(f.iter().all(|v| (v - 3.0).abs() < 1e-14));
        let u = s.interpolate(|x| vec![(x[0] * 7.0).sin() + x[1]]);
        let cont = crate::dg::to_continuous(&s, &u);
        let f1 = filter_sensor(&s, &u, 1).unwrap();
        assert!(f1.iter().zip(&cont).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(filter_sensor(&s, &u, 4).is_err());
        assert!(filter_sensor(&s, &u, 15).is_err());
    }

    #[test]
    fn step_becomes_convolution_ramp() {
        let s = space();
        // lattice spacing 1/12; step between columns 5 and 6 at x = 0.4583
        let u = s.interpolate(|x| vec![if x[0] > 0.45 { 1.0 } else { 0.0 }]);
        let f = filter_sensor(&s, &u, 3).unwrap();
        let at = |x: f64| s.eval_point(&f, [x, 0.0])[0];
        let h = 1.0 / 12.0;
        assert!((at(4.0 * h) - 0.0).abs() < 1e-12);
        assert!((at(5.0 * h) - 1.0 / 3.0).abs() < 1e-12);
        assert!((at(6.0 * h) - 2.0 / 3.0).abs() < 1e-12);
        assert!((at(7.0 * h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluator_matches_eval_point() {
        let s = space();
        let u = s.interpolate(|x| vec![x[0] * x[0] - 2.0 * x[0] * x[1]]);
        let mut ev = FieldEvaluator::new(&s, &u);
        let (v, g, c) = ev.eval([0.37, 0.61]);
        assert!(!c);
        assert!((v - (0.37f64.powi(2) - 2.0 * 0.37 * 0.61)).abs() < 1e-12);
        assert!((g[0] - (2.0 * 0.37 - 2.0 * 0.61)).abs() < 1e-11);
        assert!((g[1] + 2.0 * 0.37).abs() < 1e-11);
        assert!(ev.eval([1.5, 0.2]).2);
    }
}
