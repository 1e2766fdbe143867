//! Conservation laws `d_t U + d_x f(U) = S(U)` recast in space-time as
//! `div F(U) = S(U)` with `F(U) = [f(U), U]`.

mod burgers;
mod shallow_water;
mod viscosity;

pub use burgers::{Burgers, LinearAdvection};
pub use shallow_water::{bathymetry, bathymetry_slope, ShallowWater, SteadyState, GRAVITY, H_INF, Q0};
pub use viscosity::{artificial_viscosity, element_viscosity, element_viscosity_grad, ramp, ramp_derivative, ViscosityParams};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::BoundaryTag;

/// Maximum state dimension supported by the stack-allocated kernels.
pub const MAX_COMP: usize = 2;

pub trait ConservationLaw: Send + Sync {
    fn n_comp(&self) -> usize;

    /// Physical flux `f(U)`.
    fn flux(&self, u: &[f64], out: &mut [f64]);

    /// `df/dU`, row-major `D x D`.
    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]);

    /// Spectral radius of `n_x df/dU + n_t I` (homogeneous of degree one in `n`).
    fn wave_speed(&self, u: &[f64], n: [f64; 2]) -> f64;

    /// Gradient of [`ConservationLaw::wave_speed`] with respect to `U`.
    fn wave_speed_grad(&self, u: &[f64], n: [f64; 2], out: &mut [f64]);

    fn has_source(&self) -> bool {
        false
    }

    /// Source `S(U)` at physical point `x`.
    fn source(&self, _u: &[f64], _x: [f64; 2], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `dS/dU`, row-major.
    fn source_jacobian(&self, _u: &[f64], _x: [f64; 2], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Dirichlet data on a boundary edge at physical point `x`. Returns a bit
    /// mask of prescribed components; `out` holds their values.
    fn dirichlet(&self, tag: BoundaryTag, x: [f64; 2], out: &mut [f64]) -> u32;

    /// Component used as shock and registration sensor.
    fn sensor_component(&self) -> usize {
        0
    }

    fn viscosity(&self) -> ViscosityParams {
        ViscosityParams::default()
    }

    /// Rejects inadmissible states (e.g. nonpositive depth).
    fn check_state(&self, _u: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// `sqrt(z^2 + w^2)` and its derivative.
#[inline]
pub fn soft_abs(z: f64, width: f64) -> (f64, f64) {
    let r = (z * z + width * width).sqrt();
    if r == 0.0 {
        (0.0, 0.0)
    } else {
        (r, z / r)
    }
}

/// Absolute smoothing width for a (non-unit) normal `n`.
#[inline]
pub fn smoothing_width(rel: f64, n: [f64; 2]) -> f64 {
    rel * (n[0] * n[0] + n[1] * n[1]).sqrt()
}

/// `F(U) . n = n_x f(U) + n_t U`.
pub fn normal_flux(law: &dyn ConservationLaw, u: &[f64], n: [f64; 2], out: &mut [f64]) {
    law.flux(u, out);
    for (o, ui) in out.iter_mut().zip(u) {
        *o = n[0] * *o + n[1] * ui;
    }
}

/// Rusanov flux `H(Ua, Ub, n) = 0.5 (F(Ua) + F(Ub)) n - 0.5 tau (Ua - Ub)`.
///
/// `n` points from the `Ub` side towards the `Ua` side, so for an element with
/// outward normal `n` the facet flux is `H(exterior, interior, n)`. `n` need
/// not be unit: the flux is homogeneous of degree one in `n`.
pub fn rusanov_flux(law: &dyn ConservationLaw, ua: &[f64], ub: &[f64], n: [f64; 2], out: &mut [f64]) {
    let d = law.n_comp();
    let mut fa = [0.0; MAX_COMP];
    let mut fb = [0.0; MAX_COMP];
    normal_flux(law, ua, n, &mut fa[..d]);
    normal_flux(law, ub, n, &mut fb[..d]);
    let ta = law.wave_speed(ua, n);
    let tb = law.wave_speed(ub, n);
    let tau = 0.5 * (ta + tb + soft_abs(ta - tb, smoothing_width(law.viscosity().smoothing, n)).0);
    for i in 0..d {
        out[i] = 0.5 * (fa[i] + fb[i]) - 0.5 * tau * (ua[i] - ub[i]);
    }
}

/// Derivatives of [`rusanov_flux`] with respect to `Ua` and `Ub` (row-major).
pub fn rusanov_flux_jacobian(
    law: &dyn ConservationLaw,
    ua: &[f64],
    ub: &[f64],
    n: [f64; 2],
    da: &mut [f64],
    db: &mut [f64],
) {
    let d = law.n_comp();
    let mut aa = [0.0; MAX_COMP * MAX_COMP];
    let mut ab = [0.0; MAX_COMP * MAX_COMP];
    law.flux_jacobian(ua, &mut aa[..d * d]);
    law.flux_jacobian(ub, &mut ab[..d * d]);
    let ta = law.wave_speed(ua, n);
    let tb = law.wave_speed(ub, n);
    let (sm, dsm) = soft_abs(ta - tb, smoothing_width(law.viscosity().smoothing, n));
    let tau = 0.5 * (ta + tb + sm);
    let mut ga = [0.0; MAX_COMP];
    let mut gb = [0.0; MAX_COMP];
    law.wave_speed_grad(ua, n, &mut ga[..d]);
    law.wave_speed_grad(ub, n, &mut gb[..d]);
    let (wa, wb) = (0.5 * (1.0 + dsm), 0.5 * (1.0 - dsm));
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { n[1] } else { 0.0 };
            let jump = -0.5 * (ua[i] - ub[i]);
            da[i * d + j] = 0.5 * (n[0] * aa[i * d + j] + id) + jump * wa * ga[j];
            db[i * d + j] = 0.5 * (n[0] * ab[i * d + j] + id) + jump * wb * gb[j];
        }
        da[i * d + i] -= 0.5 * tau;
        db[i * d + i] += 0.5 * tau;
    }
}

/// Mapped space-time flux `g F(U) G^{-T}` (row `d` is component `d`), and
/// mapped source `g S`.
pub fn mapped_fluxes(
    law: &dyn ConservationLaw,
    u: &[f64],
    x: [f64; 2],
    gmat: [[f64; 2]; 2],
) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let det = gmat[0][0] * gmat[1][1] - gmat[0][1] * gmat[1][0];
    if det <= 0.0 {
        return Err(crate::error::StrobeError::DegenerateMap(format!("det G = {det:.3e}")));
    }
    let d = law.n_comp();
    let mut f = vec![0.0; d];
    law.flux(u, &mut f);
    // g G^{-T} = cofactor matrix of G
    let cof = [[gmat[1][1], -gmat[1][0]], [-gmat[0][1], gmat[0][0]]];
    let fm = (0..d)
        .map(|i| {
            let row = [f[i], u[i]];
            [row[0] * cof[0][0] + row[1] * cof[1][0], row[0] * cof[0][1] + row[1] * cof[1][1]]
        })
        .collect();
    let mut s = vec![0.0; d];
    law.source(u, x, &mut s);
    Ok((fm, s.iter().map(|v| v * det).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Burgers,
    ShallowWater,
}

impl std::str::FromStr for ModelKind {
    type Err = crate::error::StrobeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers" => Ok(ModelKind::Burgers),
            "shallow-water" | "sw" => Ok(ModelKind::ShallowWater),
            _ => Err(invalid(format!("unknown model '{s}'"))),
        }
    }
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Burgers => "burgers",
            ModelKind::ShallowWater => "shallow-water",
        }
    }

    pub fn param_box(&self) -> [[f64; 2]; 2] {
        match self {
            ModelKind::Burgers => [[1.0, 1.3], [0.25, 0.35]],
            ModelKind::ShallowWater => [[2.0, 8.0], [0.1, 0.2]],
        }
    }
}

/// A parameterized family of problems: domain, parameter box and the
/// parameter-independent data shared by all members.
#[derive(Clone, Debug)]
pub struct Family {
    pub kind: ModelKind,
    pub length: f64,
    pub time: f64,
    pub param_box: [[f64; 2]; 2],
    pub n_comp: usize,
    pub viscosity: ViscosityParams,
    pub steady: Option<Arc<SteadyState>>,
}

impl Family {
    pub fn burgers() -> Self {
        Self {
            kind: ModelKind::Burgers,
            length: 1.0,
            time: 0.8,
            param_box: ModelKind::Burgers.param_box(),
            n_comp: 1,
            viscosity: ViscosityParams::default(),
            steady: None,
        }
    }

    /// Shallow-water family; computes the steady base flow on `cells` finite volumes.
    pub fn shallow_water(cells: usize) -> Result<Self> {
        let steady = SteadyState::compute(cells)?;
        Ok(Self {
            kind: ModelKind::ShallowWater,
            length: shallow_water::LENGTH,
            time: shallow_water::TIME,
            param_box: ModelKind::ShallowWater.param_box(),
            n_comp: 2,
            // viscosity carries units of length x speed: scale by the channel length
            viscosity: ViscosityParams::default().scaled(shallow_water::LENGTH),
            steady: Some(Arc::new(steady)),
        })
    }

    pub fn from_kind(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::Burgers => Ok(Self::burgers()),
            ModelKind::ShallowWater => Self::shallow_water(1000),
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        [
            0.5 * (self.param_box[0][0] + self.param_box[0][1]),
            0.5 * (self.param_box[1][0] + self.param_box[1][1]),
        ]
    }

    pub fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != 2 || mu.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("parameter must be two finite numbers, got {mu:?}")));
        }
        Ok(())
    }

    pub fn instantiate(&self, mu: &[f64]) -> Result<Arc<dyn ConservationLaw>> {
        self.check_mu(mu)?;
        let mu = [mu[0], mu[1]];
        Ok(match self.kind {
            ModelKind::Burgers => Arc::new(Burgers { mu, viscosity: self.viscosity }),
            ModelKind::ShallowWater => Arc::new(ShallowWater {
                mu,
                steady: self.steady.clone().ok_or_else(|| invalid("shallow water needs a steady state"))?,
                viscosity: self.viscosity,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rusanov_examples() {
        let sharp = ViscosityParams { smoothing: 0.0, ..Default::default() };
        let b = Burgers { mu: [1.0, 0.3], viscosity: sharp };
        let mut out = [0.0];
        rusanov_flux(&b, &[2.0], &[0.0], [1.0, 0.0], &mut out);
        // tau = 2: 0.5 (2 + 0) - 0.5 * 2 * 2
        assert!((out[0] + 1.0).abs() < 1e-15);
        rusanov_flux(&b, &[2.0], &[0.5], [0.0, 1.0], &mut out);
        // temporal facet: tau = 1 and the flux is the earlier-in-time value
        assert!((out[0] - 0.5).abs() < 1e-15);
        rusanov_flux(&b, &[1.5], &[1.5], [0.6, -0.8], &mut out);
        assert!((out[0] - (0.6 * 1.125 - 0.8 * 1.5)).abs() < 1e-15);
        // smoothing only adds dissipation
        let smooth = Burgers { mu: [1.0, 0.3], viscosity: ViscosityParams::default() };
        rusanov_flux(&smooth, &[2.0], &[0.0], [1.0, 0.0], &mut out);
        assert!(out[0] < -1.0 && out[0] > -1.01);
    }

    #[test]
    fn rusanov_jacobian_matches_fd() {
        let fam = Family::shallow_water(50).unwrap();
        let law = fam.instantiate(&[4.0, 0.15]).unwrap();
        let (ua, ub, n) = ([2.1, 4.0], [1.8, 4.6], [0.3, -0.7]);
        let (mut da, mut db) = ([0.0; 4], [0.0; 4]);
        rusanov_flux_jacobian(law.as_ref(), &ua, &ub, n, &mut da, &mut db);
        let h = 1e-7;
        for j in 0..2 {
            let (mut p, mut m) = ([0.0; 2], [0.0; 2]);
            let (mut a1, mut a2) = (ua, ua);
            a1[j] += h;
            a2[j] -= h;
            rusanov_flux(law.as_ref(), &a1, &ub, n, &mut p);
            rusanov_flux(law.as_ref(), &a2, &ub, n, &mut m);
            for i in 0..2 {
                assert!(((p[i] - m[i]) / (2.0 * h) - da[i * 2 + j]).abs() < 1e-6);
            }
            let (mut b1, mut b2) = (ub, ub);
            b1[j] += h;
            b2[j] -= h;
            rusanov_flux(law.as_ref(), &ua, &b1, n, &mut p);
            rusanov_flux(law.as_ref(), &ua, &b2, n, &mut m);
            for i in 0..2 {
                assert!(((p[i] - m[i]) / (2.0 * h) - db[i * 2 + j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mapped_flux_dilation() {
        let b = Burgers { mu: [1.0, 0.3], viscosity: ViscosityParams::default() };
        let (f, _) = mapped_fluxes(&b, &[2.0], [0.5, 0.5], [[2.0, 0.0], [0.0, 3.0]]).unwrap();
        // F = [2, 2]; g G^{-T} = diag(3, 2)
        assert!((f[0][0] - 6.0).abs() < 1e-15 && (f[0][1] - 4.0).abs() < 1e-15);
        assert!(mapped_fluxes(&b, &[2.0], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]]).is_err());
    }
}
