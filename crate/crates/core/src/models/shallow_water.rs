use super::{smoothing_width, soft_abs, ConservationLaw, ViscosityParams};
use crate::error::{Result, StrobeError};
use crate::mesh::BoundaryTag;

pub const GRAVITY: f64 = 9.81;
pub const H_INF: f64 = 2.0;
pub const Q0: f64 = 4.4;
pub const LENGTH: f64 = 25.0;
pub const TIME: f64 = 3.0;

pub fn bathymetry(x: f64) -> f64 {
    -0.2 + (-0.125 * (x - 10.0).powi(4)).exp()
}

pub fn bathymetry_slope(x: f64) -> f64 {
    let d = x - 10.0;
    -0.5 * d.powi(3) * (-0.125 * d.powi(4)).exp()
}

/// Steady flow over the bump, the `t -> infinity` limit of the channel problem
/// with constant inflow discharge `Q0` and outflow depth `H_INF`.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub dx: f64,
    pub h: Vec<f64>,
    pub q: Vec<f64>,
    /// Max-norm of the discrete steady residual at termination.
    pub residual: f64,
}

impl SteadyState {
    /// Pseudo-time marching of a first-order finite-volume scheme (Rusanov
    /// flux, hydrostatic reconstruction of the bed) with local time stepping.
    pub fn compute(cells: usize) -> Result<Self> {
        if cells < 10 {
            return Err(StrobeError::InvalidArgument("steady state needs at least 10 cells".into()));
        }
        let n = cells;
        let dx = LENGTH / n as f64;
        let xc: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
        let bc: Vec<f64> = xc.iter().map(|&x| bathymetry(x)).collect();
        let mut h: Vec<f64> = bc.iter().map(|b| (H_INF - 0.2 - b).max(0.3)).collect();
        let mut q = vec![Q0; n];
        let g = GRAVITY;
        let flux = |h: f64, q: f64| [q, q * q / h + 0.5 * g * h * h];
        let speed = |h: f64, q: f64| (q / h).abs() + (g * h).sqrt();
        let mut residual = f64::INFINITY;
        let mut dh = vec![0.0; n];
        let mut dq = vec![0.0; n];
        let mut dt = vec![0.0; n];
        for it in 0..400_000 {
            // interface states: ghost cells carry the boundary data
            let state = |i: isize, h: &[f64], q: &[f64]| -> (f64, f64, f64) {
                if i < 0 {
                    (h[0], Q0, bc[0])
                } else if i as usize >= n {
                    (H_INF, q[n - 1], bc[n - 1])
                } else {
                    (h[i as usize], q[i as usize], bc[i as usize])
                }
            };
            dh.iter_mut().for_each(|v| *v = 0.0);
            dq.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                dt[i] = 0.45 * dx / speed(h[i], q[i]);
            }
            for f in 0..=n {
                let (hl, ql, bl) = state(f as isize - 1, &h, &q);
                let (hr, qr, br) = state(f as isize, &h, &q);
                let bm = bl.max(br);
                let hls = (hl + bl - bm).max(0.0);
                let hrs = (hr + br - bm).max(0.0);
                if hls <= 0.0 || hrs <= 0.0 {
                    return Err(StrobeError::DryState(format!("steady-state interface {f}")));
                }
                let (qls, qrs) = (ql / hl * hls, qr / hr * hrs);
                let fl = flux(hls, qls);
                let fr = flux(hrs, qrs);
                let a = speed(hls, qls).max(speed(hrs, qrs));
                let fh = 0.5 * (fl[0] + fr[0]) - 0.5 * a * (hrs - hls);
                let fq = 0.5 * (fl[1] + fr[1]) - 0.5 * a * (qrs - qls);
                // hydrostatic correction terms keep lake-at-rest exact
                if f > 0 {
                    dh[f - 1] -= fh;
                    dq[f - 1] -= fq + 0.5 * g * (hl * hl - hls * hls);
                }
                if f < n {
                    dh[f] += fh;
                    dq[f] += fq + 0.5 * g * (hr * hr - hrs * hrs);
                }
            }
            let mut res: f64 = 0.0;
            for i in 0..n {
                res = res.max((dh[i] / dx).abs()).max((dq[i] / dx).abs());
                h[i] += dt[i] / dx * dh[i];
                q[i] += dt[i] / dx * dq[i];
                if !(h[i] > 0.0) {
                    return Err(StrobeError::DryState(format!("steady-state cell {i}")));
                }
            }
            residual = res;
            if res < 1e-8 {
                log::debug!("steady state converged after {it} iterations");
                break;
            }
        }
        Ok(Self { dx, h, q, residual })
    }

    /// Piecewise-linear interpolation between cell centers.
    pub fn eval(&self, x: f64) -> [f64; 2] {
        let n = self.h.len();
        let s = (x / self.dx - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        [
            (1.0 - t) * self.h[i] + t * self.h[i + 1],
            (1.0 - t) * self.q[i] + t * self.q[i + 1],
        ]
    }
}

/// Saint-Venant equations over the bump; `mu = [pulse amplitude, pulse width]`.
#[derive(Clone, Debug)]
pub struct ShallowWater {
    pub mu: [f64; 2],
    pub steady: std::sync::Arc<SteadyState>,
    pub viscosity: ViscosityParams,
}

impl ShallowWater {
    pub fn inflow(&self, t: f64) -> f64 {
        let (a, s) = (self.mu[0], self.mu[1]);
        Q0 * (1.0 + a * t * (-(t - 0.05).powi(2) / (2.0 * s * s)).exp())
    }
}

impl ConservationLaw for ShallowWater {
    fn n_comp(&self) -> usize {
        2
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        out[0] = q;
        out[1] = q * q / h + 0.5 * GRAVITY * h * h;
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        let v = u[1] / u[0];
        out[0] = 0.0;
        out[1] = 1.0;
        out[2] = -v * v + GRAVITY * u[0];
        out[3] = 2.0 * v;
    }

    fn wave_speed(&self, u: &[f64], n: [f64; 2]) -> f64 {
        let v = u[1] / u[0];
        let c = (GRAVITY * u[0].max(0.0)).sqrt();
        soft_abs(v * n[0] + n[1], smoothing_width(self.viscosity.smoothing, n)).0 + c * n[0].abs()
    }

    fn wave_speed_grad(&self, u: &[f64], n: [f64; 2], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        let v = q / h;
        let c = (GRAVITY * h.max(0.0)).sqrt();
        let s = soft_abs(v * n[0] + n[1], smoothing_width(self.viscosity.smoothing, n)).1;
        out[0] = s * n[0] * (-q / (h * h)) + n[0].abs() * GRAVITY / (2.0 * c.max(1e-300));
        out[1] = s * n[0] / h;
    }

    fn has_source(&self) -> bool {
        true
    }

    fn source(&self, u: &[f64], x: [f64; 2], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -GRAVITY * u[0] * bathymetry_slope(x[0]);
    }

    fn source_jacobian(&self, _u: &[f64], x: [f64; 2], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = -GRAVITY * bathymetry_slope(x[0]);
        out[3] = 0.0;
    }

    fn dirichlet(&self, tag: BoundaryTag, x: [f64; 2], out: &mut [f64]) -> u32 {
        match tag {
            BoundaryTag::Bottom => {
                let s = self.steady.eval(x[0]);
                out[0] = s[0];
                out[1] = s[1];
                0b11
            }
            BoundaryTag::Left => {
                out[1] = self.inflow(x[1]);
                0b10
            }
            BoundaryTag::Right => {
                out[0] = H_INF;
                0b01
            }
            BoundaryTag::Top => 0,
        }
    }

    fn viscosity(&self) -> ViscosityParams {
        self.viscosity
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        if u[0] > 0.0 && u[0].is_finite() && u[1].is_finite() {
            Ok(())
        } else {
            Err(StrobeError::DryState(format!("h = {:.3e}", u[0])))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bathymetry_values() {
        assert!((bathymetry(10.0) - 0.8).abs() < 1e-15);
        assert!((bathymetry(0.0) + 0.2).abs() < 1e-12);
        assert!((bathymetry(25.0) + 0.2).abs() < 1e-12);
        let h = 1e-6;
        let fd = (bathymetry(11.0 + h) - bathymetry(11.0 - h)) / (2.0 * h);
        assert!((fd - bathymetry_slope(11.0)).abs() < 1e-8);
    }

    #[test]
    fn flux_example() {
        let s = ShallowWater {
            mu: [2.0, 0.1],
            steady: std::sync::Arc::new(SteadyState { dx: 1.0, h: vec![2.0; 2], q: vec![0.0; 2], residual: 0.0 }),
            viscosity: ViscosityParams::default(),
        };
        let mut f = [0.0; 2];
        s.flux(&[2.0, 0.0], &mut f);
        assert!((f[0]).abs() < 1e-15 && (f[1] - 19.62).abs() < 1e-12);
        assert!(s.check_state(&[0.0, 1.0]).is_err());
        assert!((s.inflow(0.0) - Q0).abs() < 1e-15);
    }
}
