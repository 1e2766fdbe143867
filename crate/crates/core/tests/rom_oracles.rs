use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strobe::dg::{assemble_norms, DgSpace};
use strobe::hf::{solve_hf, Discretization, MapGeometry, NewtonOptions, Start};
use strobe::maps::{Displacement, MapSpace};
use strobe::mesh::SpaceTimeMesh;
use strobe::models::Family;
use strobe::rom::*;

fn tiny(nx: usize, nt: usize, p: usize) -> Discretization {
    let mesh = Arc::new(SpaceTimeMesh::generate(1.0, 0.8, nx, nt, p).unwrap());
    Discretization::new(DgSpace::new(mesh, 1).unwrap())
}

fn random_vectors(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn mapped_geo(d: &Discretization) -> MapGeometry {
    let ms = MapSpace::new(2, 1.0, 0.8).unwrap();
    let c = (0..ms.dim()).map(|m| 0.03 * (m as f64 * 1.3).sin()).collect();
    MapGeometry::from_displacement(&d.space, &Displacement::new(ms, c).unwrap()).unwrap()
}

fn to_mat(v: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(v[0].len(), v.len(), |i, j| v[j][i])
}

#[test]
fn tested_residual_matches_dense_assembly() {
    let d = tiny(4, 3, 2);
    let law = Family::burgers().instantiate(&[1.1, 0.3]).unwrap();
    let geo = mapped_geo(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = d.space.n_dofs();
    let z = random_vectors(3, n, &mut rng);
    let y = random_vectors(5, n, &mut rng);
    let alpha = [0.4, -0.2, 0.3];
    let w = expand(&z, &alpha);
    let lb = LocalBases::full(&d, &z, &y).unwrap();
    for lin in [Linearization::Exact, Linearization::Frozen] {
        let (r, j) = lb.evaluate(&d, law.as_ref(), &geo, &alpha, lin, true).unwrap();
        let (rf, jf) = match lin {
            Linearization::Exact => d.jacobian(law.as_ref(), &geo, &w).unwrap(),
            Linearization::Frozen => {
                let eps = d.viscosity(law.as_ref(), &w);
                d.jacobian_with(law.as_ref(), &geo, &w, &eps).unwrap()
            }
        };
        let ym = to_mat(&y);
        let r_ref = ym.transpose() * DVector::from_vec(rf);
        let j_ref = ym.transpose() * jf.mul_dense(&to_mat(&z));
        assert!((&r - &r_ref).norm() <= 1e-10 * r_ref.norm());
        assert!((j.unwrap() - &j_ref).norm() <= 1e-10 * j_ref.norm());
    }
}

#[test]
fn unit_weights_reproduce_full_residual() {
    let d = tiny(3, 2, 1);
    let law = Family::burgers().instantiate(&[1.2, 0.28]).unwrap();
    let geo = mapped_geo(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = d.space.n_dofs();
    let z = random_vectors(2, n, &mut rng);
    let y = random_vectors(4, n, &mut rng);
    let ne = d.space.n_elements();
    let full = LocalBases::full(&d, &z, &y).unwrap();
    let weighted = LocalBases::new(&d, &z, &y, (0..ne).rev().collect(), vec![1.0; ne]).unwrap();
    let a = [0.7, 0.1];
    let (r1, _) = full.evaluate(&d, law.as_ref(), &geo, &a, Linearization::Exact, false).unwrap();
    let (r2, _) = weighted.evaluate(&d, law.as_ref(), &geo, &a, Linearization::Exact, false).unwrap();
    assert!((&r1 - &r2).norm() <= 1e-13 * r1.norm().max(1.0));
}

#[test]
fn full_test_space_amr_equals_minimum_residual() {
    let d = tiny(2, 2, 1);
    let fam = Family::burgers();
    let law = fam.instantiate(&[1.15, 0.3]).unwrap();
    let geo = mapped_geo(&d);
    let norms = assemble_norms(&d.space).unwrap();
    let ydense = norms.y.to_dense();
    let l = ydense.clone().cholesky().unwrap().l();
    let yfull = l.transpose().try_inverse().unwrap();
    let n = d.space.n_dofs();
    let ycols: Vec<Vec<f64>> = (0..n).map(|c| yfull.column(c).iter().copied().collect()).collect();
    let sol = solve_hf(&d, law.as_ref(), Start::Cold, &NewtonOptions::default()).unwrap();
    let mut z = vec![sol.w.clone(), d.space.interpolate(|x| vec![x[0] - 0.5 * x[1]])];
    strobe::dg::pod::orthonormalize(&mut z, strobe::dg::pod::Inner::L2(&d.space));
    let a0 = [0.5, 0.0];
    let opts = GnOptions::default();
    let lb = LocalBases::full(&d, &z, &ycols).unwrap();
    let amr = amr_solve(&lb, &d, law.as_ref(), &geo, &a0, Linearization::Exact, &opts).unwrap();
    let mr = minres_solve(&d, &norms, law.as_ref(), &geo, &z, &a0, Linearization::Exact, &opts).unwrap();
    for (a, b) in amr.alpha.iter().zip(&mr.alpha) {
        assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", amr.alpha, mr.alpha);
    }
}

#[test]
fn test_space_spans_dense_riesz_representers() {
    let d = tiny(3, 2, 1);
    let fam = Family::burgers();
    let norms = assemble_norms(&d.space).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = d.space.n_dofs();
    let z = random_vectors(2, n, &mut rng);
    let cases: Vec<MappedCase> = [[1.05, 0.26], [1.25, 0.33]]
        .iter()
        .map(|mu| MappedCase {
            law: fam.instantiate(mu).unwrap(),
            geo: mapped_geo(&d),
            state: (0..n).map(|_| 1.0 + 0.2 * rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let (yj, _) = build_test_space(&d, &norms, &cases, &z, TestSize::Fixed(4), false, Linearization::Exact).unwrap();
    assert_eq!(yj.len(), 4);
    let ydense = norms.y.to_dense();
    let ym = to_mat(&yj);
    let gram = ym.transpose() * &ydense * &ym;
    assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-10);
    let chol = ydense.clone().cholesky().unwrap();
    for c in &cases {
        let (_, jac) = d.jacobian(c.law.as_ref(), &c.geo, &c.state).unwrap();
        for zn in &z {
            let eta = chol.solve(&DVector::from_vec(jac.matvec(zn)));
            let proj = &ym * (ym.transpose() * &ydense * &eta);
            let e = &eta - proj;
            let rel = (e.transpose() * &ydense * &e)[(0, 0)].sqrt() / (eta.transpose() * &ydense * &eta)[(0, 0)].sqrt();
            assert!(rel < 1e-8, "{rel}");
        }
    }
}

#[test]
fn eqp_system_is_consistent_at_unit_weights() {
    let d = tiny(3, 3, 1);
    let fam = Family::burgers();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = d.space.n_dofs();
    let z = random_vectors(2, n, &mut rng);
    let y = random_vectors(4, n, &mut rng);
    let cases: Vec<MappedCase> = [[1.05, 0.26], [1.25, 0.33], [1.1, 0.3]]
        .iter()
        .map(|mu| MappedCase { law: fam.instantiate(mu).unwrap(), geo: mapped_geo(&d), state: vec![] })
        .collect();
    let alphas = vec![vec![0.3, 0.2], vec![-0.1, 0.5], vec![0.2, 0.2]];
    let (g, b) = eqp_system(&d, &cases, &alphas, &z, &y, Linearization::Exact).unwrap();
    assert_eq!(g.nrows(), 1 + 2 * 3);
    let ones = DVector::from_element(g.ncols(), 1.0);
    assert!((&g * &ones - &b).norm() < 1e-12);
    let eq = build_eqp(&g, &b, 1e-12).unwrap();
    assert!(eq.weights.iter().all(|w| *w > 0.0));
    assert!(eq.residual <= 1e-6, "{}", eq.residual);
}

#[test]
fn full_basis_galerkin_recovers_hf_solution() {
    let d = tiny(2, 2, 1);
    let law = Family::burgers().instantiate(&[1.1, 0.3]).unwrap();
    let geo = MapGeometry::identity(&d.space);
    let opts = NewtonOptions { adaptive_iter: 0, ..Default::default() };
    let sol = solve_hf(&d, law.as_ref(), Start::Cold, &opts).unwrap();
    let n = d.space.n_dofs();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let a0: Vec<f64> = sol.w.iter().map(|v| v * 0.98).collect();
    let r = galerkin_solve(&d, law.as_ref(), &geo, &z, &a0, Linearization::Exact, &GnOptions { gtol: 1e-10, ..Default::default() }).unwrap();
    assert!(r.converged);
    let res = d.residual(law.as_ref(), &geo, &r.alpha).unwrap();
    assert!(res.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-9);
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * n as f64 * 0.5
}

#[test]
fn amr_bounds_hold_on_random_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40;
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * 8.0;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let (x, y) = (random_spd(n, &mut rng), random_spd(n, &mut rng));
    let z = DMatrix::from_fn(n, 4, |_, _| rng.random_range(-1.0..1.0));
    let yj = DMatrix::from_fn(n, 8, |_, _| rng.random_range(-1.0..1.0));
    let r = verify_amr_bounds(&a, &f, &x, &y, &z, &yj).unwrap();
    assert!(r.holds(1e-10), "{r:?}");
    assert!(r.delta_test > 0.0 && r.delta_test <= 1.0);
}

#[test]
fn optimal_test_space_has_unit_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 20;
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * 6.0;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let (x, y) = (random_spd(n, &mut rng), random_spd(n, &mut rng));
    let z = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let sup = y.clone().cholesky().unwrap().solve(&(&a * &z));
    let r = verify_amr_bounds(&a, &f, &x, &y, &z, &sup).unwrap();
    assert!((r.delta_test - 1.0).abs() < 1e-10);
    assert!(r.holds(1e-10));
    // with the optimal test space AMR is the minimum-residual solution
    let ly = y.clone().cholesky().unwrap();
    let zo = &z * (z.transpose() * &x * &z).cholesky().unwrap().l().transpose().try_inverse().unwrap();
    let az = &a * &zo;
    let lhs = az.transpose() * ly.solve(&az);
    let rhs = az.transpose() * ly.solve(&f);
    let u_mr = &zo * lhs.lu().solve(&rhs).unwrap();
    let u_hat = DVector::from_vec(r.u_hat.clone());
    assert!((u_hat - u_mr).norm() < 1e-9);
}

#[test]
fn galerkin_constants_on_spd_problem() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 15;
    let a = random_spd(n, &mut rng);
    let x = DMatrix::identity(n, n);
    let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let z = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let r = verify_amr_bounds(&a, &f, &x, &x, &z, &z).unwrap();
    let eig = a.clone().symmetric_eigen().eigenvalues;
    assert!((r.beta - eig.min()).abs() < 1e-10 && (r.gamma - eig.max()).abs() < 1e-10);
    // beta_NJ of Galerkin is the smallest eigenvalue of the orthonormalized reduced matrix
    let q = z.clone().qr().q();
    let red = q.transpose() * &a * &q;
    assert!((r.beta_nj - red.symmetric_eigen().eigenvalues.min()).abs() < 1e-10);
    assert!(r.holds(1e-10));
}

#[test]
fn unstable_operator_is_rejected() {
    let mut a = DMatrix::identity(4, 4);
    a[(3, 3)] = 0.0;
    let i = DMatrix::identity(4, 4);
    let z = DMatrix::from_fn(4, 2, |r, c| if r == c { 1.0 } else { 0.0 });
    let res = verify_amr_bounds(&a, &DVector::from_element(4, 1.0), &i, &i, &z, &z);
    assert!(matches!(res, Err(strobe::StrobeError::NotInfSupStable(_))));
}

fn brr_blocks(rng: &mut ChaCha8Rng) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    (0..10)
        .map(|_| (DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0)), DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0))))
        .collect()
}

#[test]
fn brr_bound_exact_quadrature_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let r = verify_brr_residual_bound(&brr_blocks(&mut rng), &[1.0; 10]).unwrap();
    assert!(r.n_norm < 1e-12);
    assert!(r.holds());
}

#[test]
fn brr_bound_holds_for_perturbed_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let blocks = brr_blocks(&mut rng);
    let rho: Vec<f64> = (0..10).map(|_| 1.0 + 0.3 * rng.random_range(-1.0..1.0)).collect();
    let r = verify_brr_residual_bound(&blocks, &rho).unwrap();
    assert!(r.n_norm > 0.0 && r.n_norm < r.bound());
    assert!(r.bound() <= 10.0 * r.n_norm, "bound {} vs {}", r.bound(), r.n_norm);
}
