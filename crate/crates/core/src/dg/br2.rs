//! BR2 discretization of `-div(eps grad w)` with a piecewise-constant `eps`.
//!
//! Facet operators are stored split by which side's `eps` multiplies them, so
//! the same tables serve the norm matrix (`eps = 1`) and the artificial
//! viscosity (element-wise `eps`).

use nalgebra::DMatrix;

use super::DgSpace;

/// Penalty constant of the BR2 lifting term.
pub const BR2_ETA: f64 = 3.0;

#[derive(Clone, Debug)]
pub enum FacetOperator {
    /// Acts on `[plus dofs | minus dofs]`, size `2 n_lp`.
    Interior {
        by_plus: DMatrix<f64>,
        by_minus: DMatrix<f64>,
    },
    /// Acts on the single adjacent element. `data` maps Dirichlet values at the
    /// facet quadrature points to the residual contribution.
    Boundary {
        op: DMatrix<f64>,
        data: DMatrix<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct Br2 {
    pub eta: f64,
    pub stiffness: Vec<DMatrix<f64>>,
    pub facets: Vec<FacetOperator>,
}

/// Trace values and normal derivatives (along the facet's plus normal) of the
/// basis of element `k` on its local edge `l`, at facet points in plus order.
pub(crate) fn side_traces(space: &DgSpace, k: usize, l: usize, reversed: bool, normal: [f64; 2]) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = &space.tables;
    let nl = space.n_local();
    let nf = t.n_edge();
    let geo = &space.mesh.geometry[k];
    let mut tr = DMatrix::zeros(nf, nl);
    let mut dn = DMatrix::zeros(nf, nl);
    for q in 0..nf {
        let qq = if reversed { nf - 1 - q } else { q };
        for i in 0..nl {
            tr[(q, i)] = t.edge_phi[l][qq * nl + i];
            let g = geo.grad_to_physical(t.edge_dphi[l][qq * nl + i]);
            dn[(q, i)] = g[0] * normal[0] + g[1] * normal[1];
        }
    }
    (tr, dn)
}

impl Br2 {
    pub fn new(space: &DgSpace, eta: f64) -> Self {
        let mesh = &space.mesh;
        let t = &space.tables;
        let nl = space.n_local();
        let nf = t.n_edge();

        let stiffness = (0..mesh.n_elements())
            .map(|k| {
                let geo = &mesh.geometry[k];
                let mut kk = DMatrix::zeros(nl, nl);
                for (q, w) in t.vol.weights.iter().enumerate() {
                    let grads: Vec<[f64; 2]> =
                        (0..nl).map(|i| geo.grad_to_physical(t.vol_dphi[q * nl + i])).collect();
                    for i in 0..nl {
                        for j in 0..nl {
                            kk[(i, j)] += w * geo.det * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                        }
                    }
                }
                kk
            })
            .collect();

        let facets = mesh
            .facets
            .iter()
            .map(|f| {
                let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    nf,
                    t.edge_w.iter().map(|w| w * f.length),
                ));
                let (ka, la) = f.plus;
                let (ta, da) = side_traces(space, ka, la, false, f.normal);
                let minv_a = &t.mass_ref_inv / mesh.geometry[ka].det;
                match f.minus {
                    Some((kb, lb)) => {
                        let (tb, db) = side_traces(space, kb, lb, true, f.normal);
                        let minv_b = &t.mass_ref_inv / mesh.geometry[kb].det;
                        let mut jump = DMatrix::zeros(nf, 2 * nl);
                        jump.view_mut((0, 0), (nf, nl)).copy_from(&ta);
                        jump.view_mut((0, nl), (nf, nl)).copy_from(&(-&tb));
                        let mut dpa = DMatrix::zeros(nf, 2 * nl);
                        dpa.view_mut((0, 0), (nf, nl)).copy_from(&da);
                        let mut dpb = DMatrix::zeros(nf, 2 * nl);
                        dpb.view_mut((0, nl), (nf, nl)).copy_from(&db);
                        let jw = jump.transpose() * &w;
                        let ca = -0.5 * (&jw * &dpa + (&jw * &dpa).transpose());
                        let cb = -0.5 * (&jw * &dpb + (&jw * &dpb).transpose());
                        let ea = ta.transpose() * &w * &jump;
                        let eb = tb.transpose() * &w * &jump;
                        let qa = 0.25 * ea.transpose() * &minv_a * &ea;
                        let qb = 0.25 * eb.transpose() * &minv_b * &eb;
                        FacetOperator::Interior { by_plus: ca + eta * qa, by_minus: cb + eta * qb }
                    }
                    None => {
                        let tw = ta.transpose() * &w;
                        let c = -(&tw * &da + (&tw * &da).transpose());
                        let ea = &tw * &ta;
                        let q = ea.transpose() * &minv_a * &ea;
                        let data = da.transpose() * &w - eta * ea.transpose() * &minv_a * &tw;
                        FacetOperator::Boundary { op: c + eta * q, data }
                    }
                }
            })
            .collect();
        Self { eta, stiffness, facets }
    }
}
