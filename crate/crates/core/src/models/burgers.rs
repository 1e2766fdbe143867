use std::sync::Arc;

use super::{smoothing_width, soft_abs, ConservationLaw, ViscosityParams};
use crate::mesh::BoundaryTag;

const NU: f64 = 260.0;

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-NU * s).exp())
}

/// Inviscid Burgers with a two-shock initial profile; `mu = [amplitude, shock position]`.
#[derive(Clone, Debug)]
pub struct Burgers {
    pub mu: [f64; 2],
    pub viscosity: ViscosityParams,
}

impl Burgers {
    /// Initial (and inflow) data.
    pub fn data(&self, x: f64) -> f64 {
        self.mu[0] * (2.0 - logistic(x - self.mu[1]) - logistic(x - 0.5)) + 0.3 * (std::f64::consts::PI * x).sin()
    }
}

impl ConservationLaw for Burgers {
    fn n_comp(&self) -> usize {
        1
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * u[0] * u[0];
    }

    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }

    fn wave_speed(&self, u: &[f64], n: [f64; 2]) -> f64 {
        soft_abs(u[0] * n[0] + n[1], smoothing_width(self.viscosity.smoothing, n)).0
    }

    fn wave_speed_grad(&self, u: &[f64], n: [f64; 2], out: &mut [f64]) {
        out[0] = soft_abs(u[0] * n[0] + n[1], smoothing_width(self.viscosity.smoothing, n)).1 * n[0];
    }

    fn dirichlet(&self, tag: BoundaryTag, x: [f64; 2], out: &mut [f64]) -> u32 {
        match tag {
            BoundaryTag::Bottom => {
                out[0] = self.data(x[0]);
                1
            }
            BoundaryTag::Left => {
                out[0] = self.data(0.0);
                1
            }
            _ => 0,
        }
    }

    fn viscosity(&self) -> ViscosityParams {
        self.viscosity
    }
}

/// `d_t U + a d_x U = 0` with inflow/initial data from a profile `U(x, t) = u0(x - a t)`.
#[derive(Clone)]
pub struct LinearAdvection {
    pub speed: f64,
    pub profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub viscosity: ViscosityParams,
}

impl std::fmt::Debug for LinearAdvection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearAdvection").field("speed", &self.speed).finish()
    }
}

impl LinearAdvection {
    pub fn exact(&self, x: [f64; 2]) -> f64 {
        (self.profile)(x[0] - self.speed * x[1])
    }
}

impl ConservationLaw for LinearAdvection {
    fn n_comp(&self) -> usize {
        1
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.speed * u[0];
    }

    fn flux_jacobian(&self, _u: &[f64], out: &mut [f64]) {
        out[0] = self.speed;
    }

    fn wave_speed(&self, _u: &[f64], n: [f64; 2]) -> f64 {
        (self.speed * n[0] + n[1]).abs()
    }

    fn wave_speed_grad(&self, _u: &[f64], _n: [f64; 2], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn dirichlet(&self, tag: BoundaryTag, x: [f64; 2], out: &mut [f64]) -> u32 {
        match tag {
            BoundaryTag::Bottom | BoundaryTag::Left => {
                out[0] = self.exact(x);
                1
            }
            _ => 0,
        }
    }

    fn viscosity(&self) -> ViscosityParams {
        self.viscosity
    }
}
