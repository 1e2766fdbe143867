use super::{MapSpace, ReducedMapBasis};

/// Map basis functions (and gradients) tabulated at a fixed set of points.
///
/// Entry layout per (point, mode): `[v0, v1, d0v0, d1v0, d0v1, d1v1]`.
#[derive(Clone, Debug)]
pub struct MapTable {
    pub points: Vec<[f64; 2]>,
    pub n_modes: usize,
    data: Vec<[f64; 6]>,
}

impl MapTable {
    pub fn new(basis: &ReducedMapBasis, points: Vec<[f64; 2]>) -> Self {
        let space: &MapSpace = &basis.space;
        let nm = basis.dim();
        let mut data = vec![[0.0; 6]; points.len() * nm];
        for (p, x) in points.iter().enumerate() {
            let evals = space.eval_basis(*x);
            for (m, mode) in basis.modes.iter().enumerate() {
                let e = &mut data[p * nm + m];
                for (b, c) in evals.iter().zip(mode) {
                    if *c == 0.0 {
                        continue;
                    }
                    e[b.comp] += c * b.val;
                    e[2 + 2 * b.comp] += c * b.grad[0];
                    e[3 + 2 * b.comp] += c * b.grad[1];
                }
            }
        }
        Self { points, n_modes: nm, data }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn entry(&self, p: usize, m: usize) -> &[f64; 6] {
        &self.data[p * self.n_modes + m]
    }

    /// `Phi(x_p)` and `G(x_p)` for reduced coefficients `a`.
    #[inline]
    pub fn eval(&self, a: &[f64], p: usize) -> ([f64; 2], [[f64; 2]; 2]) {
        let x = self.points[p];
        let mut y = x;
        let mut g = [[1.0, 0.0], [0.0, 1.0]];
        let row = &self.data[p * self.n_modes..(p + 1) * self.n_modes];
        for (e, am) in row.iter().zip(a) {
            y[0] += am * e[0];
            y[1] += am * e[1];
            g[0][0] += am * e[2];
            g[0][1] += am * e[3];
            g[1][0] += am * e[4];
            g[1][1] += am * e[5];
        }
        (y, g)
    }
}
