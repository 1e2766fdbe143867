//! Explicit time marching on spatial slices, used as the Newton initial guess.

use crate::dg::DgSpace;
use crate::error::{Result, StrobeError};
use crate::mesh::BoundaryTag;
use crate::models::{rusanov_flux, ConservationLaw, MAX_COMP};

/// Piecewise-constant DG (Rusanov finite volumes) with Heun's method.
#[derive(Clone, Debug)]
pub struct MarchOptions {
    pub cells: usize,
    pub cfl: f64,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self { cells: 200, cfl: 0.3 }
    }
}

/// Space-time history `U(x_i, t^n)` at cell centres.
#[derive(Clone, Debug)]
pub struct History {
    pub n_comp: usize,
    pub dx: f64,
    pub times: Vec<f64>,
    /// `states[n][i * n_comp + d]`.
    pub states: Vec<Vec<f64>>,
}

impl History {
    pub fn eval(&self, x: [f64; 2]) -> Vec<f64> {
        let nc = self.n_comp;
        let cells = self.states[0].len() / nc;
        let s = (x[0] / self.dx - 0.5).clamp(0.0, (cells - 1) as f64);
        let i = (s.floor() as usize).min(cells.saturating_sub(2));
        let a = (s - i as f64).clamp(0.0, 1.0);
        let n = match self.times.partition_point(|&t| t <= x[1]) {
            0 => 0,
            n => (n - 1).min(self.times.len() - 2),
        };
        let b = ((x[1] - self.times[n]) / (self.times[n + 1] - self.times[n])).clamp(0.0, 1.0);
        (0..nc)
            .map(|d| {
                let at = |m: usize| {
                    let st = &self.states[m];
                    let i1 = (i + 1).min(cells - 1);
                    (1.0 - a) * st[i * nc + d] + a * st[i1 * nc + d]
                };
                (1.0 - b) * at(n) + b * at(n + 1)
            })
            .collect()
    }
}

pub fn march(law: &dyn ConservationLaw, length: f64, time: f64, opts: &MarchOptions) -> Result<History> {
    let nc = law.n_comp();
    let n = opts.cells.max(2);
    let dx = length / n as f64;
    let xc: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
    let mut g = [0.0; MAX_COMP];
    let mut u = vec![0.0; n * nc];
    for i in 0..n {
        let mask = law.dirichlet(BoundaryTag::Bottom, [xc[i], 0.0], &mut g[..nc]);
        for d in 0..nc {
            if mask >> d & 1 == 0 {
                return Err(StrobeError::InvalidArgument("initial data must prescribe every component".into()));
            }
            u[i * nc + d] = g[d];
        }
    }
    let rhs = |u: &[f64], t: f64, out: &mut [f64]| -> Result<f64> {
        out.iter_mut().for_each(|v| *v = 0.0);
        let ghost = |tag: BoundaryTag, x: f64, inner: &[f64]| {
            let mut g = [0.0; MAX_COMP];
            let mask = law.dirichlet(tag, [x, t], &mut g[..nc]);
            let mut s = [0.0; MAX_COMP];
            for d in 0..nc {
                s[d] = if mask >> d & 1 == 1 { g[d] } else { inner[d] };
            }
            s
        };
        let mut smax: f64 = 0.0;
        let mut h = [0.0; MAX_COMP];
        for f in 0..=n {
            let ul = if f == 0 { ghost(BoundaryTag::Left, 0.0, &u[..nc]) } else { copy(&u[(f - 1) * nc..f * nc]) };
            let ur = if f == n { ghost(BoundaryTag::Right, length, &u[(n - 1) * nc..]) } else { copy(&u[f * nc..(f + 1) * nc]) };
            law.check_state(&ul[..nc])?;
            law.check_state(&ur[..nc])?;
            rusanov_flux(law, &ur[..nc], &ul[..nc], [1.0, 0.0], &mut h[..nc]);
            smax = smax.max(law.wave_speed(&ul[..nc], [1.0, 0.0])).max(law.wave_speed(&ur[..nc], [1.0, 0.0]));
            for d in 0..nc {
                if f > 0 {
                    out[(f - 1) * nc + d] -= h[d] / dx;
                }
                if f < n {
                    out[f * nc + d] += h[d] / dx;
                }
            }
        }
        if law.has_source() {
            let mut s = [0.0; MAX_COMP];
            for i in 0..n {
                law.source(&u[i * nc..(i + 1) * nc], [xc[i], t], &mut s[..nc]);
                for d in 0..nc {
                    out[i * nc + d] += s[d];
                }
            }
        }
        Ok(smax)
    };

    let mut times = vec![0.0];
    let mut states = vec![u.clone()];
    let mut t = 0.0;
    let mut k1 = vec![0.0; n * nc];
    let mut k2 = vec![0.0; n * nc];
    let mut stage = vec![0.0; n * nc];
    while t < time {
        let smax = rhs(&u, t, &mut k1)?;
        let dt = (opts.cfl * dx / smax.max(1e-12)).min(time - t);
        for j in 0..u.len() {
            stage[j] = u[j] + dt * k1[j];
        }
        rhs(&stage, t + dt, &mut k2)?;
        for j in 0..u.len() {
            u[j] += 0.5 * dt * (k1[j] + k2[j]);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(StrobeError::NonConvergence { iterations: times.len(), residual: f64::NAN, last: None });
        }
        t += dt;
        if time - t < 1e-12 * time {
            t = time;
        }
        times.push(t);
        states.push(u.clone());
    }
    Ok(History { n_comp: nc, dx, times, states })
}

fn copy(s: &[f64]) -> [f64; MAX_COMP] {
    let mut o = [0.0; MAX_COMP];
    o[..s.len()].copy_from_slice(s);
    o
}

/// Nodal interpolant of the marched history on the space-time DG space.
pub fn initial_guess(space: &DgSpace, law: &dyn ConservationLaw, opts: &MarchOptions) -> Result<Vec<f64>> {
    let h = march(law, space.mesh.length, space.mesh.time, opts)?;
    Ok(space.interpolate(|x| h.eval(x)))
}
