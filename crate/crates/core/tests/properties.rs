use proptest::prelude::*;

use quotient_landscape::geometry::{
    exp_map, horizontal_project, is_horizontal, log_map, quotient_distance, vertical_project,
    FactorPoint,
};
use quotient_landscape::kernels::{procrustes_align, sym_eig, thin_svd, truncated_frob_norm, Matrix};
use quotient_landscape::landscape::{classify_region, RegionParams};
use quotient_landscape::objectives::{
    make_denoising, make_trace_regression, riemannian_grad_lift, riemannian_hess_quadform,
    SpectrumSpec,
};
use quotient_landscape::sampling::{gaussian_matrix, random_orthogonal, rng_for};

fn factor(p: usize, r: usize, seed: u64, stream: u64) -> FactorPoint {
    FactorPoint::new(gaussian_matrix(p, r, &mut rng_for(seed, stream))).unwrap()
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4).prop_flat_map(|r| (r..=r + 6, Just(r)))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs_any_rank(rows in 1usize..9, cols in 1usize..9, k in 1usize..9, seed: u64) {
        let mut rng = rng_for(seed, 0);
        let k = k.min(rows).min(cols);
        let a = gaussian_matrix(rows, k, &mut rng) * gaussian_matrix(k, cols, &mut rng);
        let svd = thin_svd(&a).unwrap();
        prop_assert!((svd.reconstruct() - &a).norm() <= 1e-12 * a.norm().max(1.0));
        prop_assert!(svd.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let gu = svd.u.transpose() * &svd.u;
        prop_assert!((gu - Matrix::identity(svd.len(), svd.len())).amax() < 1e-12);
        prop_assert!(close(truncated_frob_norm(&a, rows.min(cols)).unwrap(), a.norm(), 1e-12));
    }

    #[test]
    fn truncated_norm_is_monotone_in_rank(rows in 2usize..9, cols in 2usize..9, seed: u64) {
        let a = gaussian_matrix(rows, cols, &mut rng_for(seed, 0));
        let norms: Vec<f64> = (1..=rows.min(cols)).map(|r| truncated_frob_norm(&a, r).unwrap()).collect();
        prop_assert!(norms.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn sym_eig_reconstructs(n in 1usize..9, seed: u64) {
        let g = gaussian_matrix(n, n, &mut rng_for(seed, 0));
        let s = (&g + g.transpose()) * 0.5;
        let e = sym_eig(&s).unwrap();
        prop_assert!((e.reconstruct() - &s).norm() <= 1e-12 * s.norm().max(1.0));
    }

    #[test]
    fn procrustes_is_optimal_against_random_rotations((p, r) in shape(), seed: u64) {
        let y1 = gaussian_matrix(p, r, &mut rng_for(seed, 0));
        let y2 = gaussian_matrix(p, r, &mut rng_for(seed, 1));
        let al = procrustes_align(&y1, &y2).unwrap();
        let mut rng = rng_for(seed, 2);
        for _ in 0..8 {
            let o = random_orthogonal(r, &mut rng);
            prop_assert!(al.residual <= (&y2 * o - &y1).norm() + 1e-10);
        }
    }

    #[test]
    fn distance_is_fiber_invariant_and_symmetric((p, r) in shape(), seed: u64) {
        let y1 = factor(p, r, seed, 0);
        let y2 = factor(p, r, seed, 1);
        let mut rng = rng_for(seed, 2);
        let d = quotient_distance(&y1, &y2).unwrap();
        let d_rot = quotient_distance(
            &y1.rotate(&random_orthogonal(r, &mut rng)).unwrap(),
            &y2.rotate(&random_orthogonal(r, &mut rng)).unwrap(),
        )
        .unwrap();
        prop_assert!(close(d, d_rot, 1e-10));
        prop_assert!(close(d, quotient_distance(&y2, &y1).unwrap(), 1e-10));
    }

    #[test]
    fn distance_satisfies_triangle_inequality((p, r) in shape(), seed: u64) {
        let (a, b, c) = (factor(p, r, seed, 0), factor(p, r, seed, 1), factor(p, r, seed, 2));
        let ab = quotient_distance(&a, &b).unwrap();
        let bc = quotient_distance(&b, &c).unwrap();
        let ac = quotient_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10 * (ab + bc).max(1.0));
    }

    #[test]
    fn horizontal_and_vertical_parts_split_any_matrix((p, r) in shape(), seed: u64) {
        let y = factor(p, r, seed, 0);
        let z = gaussian_matrix(p, r, &mut rng_for(seed, 1));
        let h = horizontal_project(&y, &z).unwrap();
        let v = vertical_project(&y, &z).unwrap();
        prop_assert!(is_horizontal(&y, h.matrix()));
        prop_assert!((h.matrix() + &v - &z).norm() <= 1e-10 * z.norm().max(1.0));
        prop_assert!(h.matrix().dot(&v).abs() <= 1e-9 * z.norm_squared().max(1.0));
        let hh = horizontal_project(&y, h.matrix()).unwrap();
        prop_assert!((hh.matrix() - h.matrix()).norm() <= 1e-10 * z.norm().max(1.0));
    }

    #[test]
    fn exp_inverts_log((p, r) in shape(), seed: u64) {
        let y1 = factor(p, r, seed, 0);
        let y2 = factor(p, r, seed, 1);
        if let Ok(th) = log_map(&y1, &y2) {
            let back = exp_map(&y1, &th, 1.0).unwrap();
            let d = quotient_distance(&back, &y2).unwrap();
            prop_assert!(d <= 1e-9 * y2.sigma_max().max(1.0));
            prop_assert!(close(th.norm(), quotient_distance(&y1, &y2).unwrap(), 1e-10));
        }
    }

    #[test]
    fn gradient_is_horizontal_and_equivariant((p, r) in shape(), seed: u64, regression: bool) {
        let y = factor(p, r, seed, 0);
        let o = random_orthogonal(r, &mut rng_for(seed, 1));
        let check = |obj: &dyn quotient_landscape::objectives::Objective| -> Result<(), TestCaseError> {
            let g = riemannian_grad_lift(obj, &y).unwrap();
            prop_assert!(is_horizontal(&y, g.matrix()));
            let g_rot = riemannian_grad_lift(obj, &y.rotate(&o).unwrap()).unwrap();
            prop_assert!((g.matrix() * &o - g_rot.matrix()).norm() <= 1e-10 * g.norm().max(1.0));
            Ok(())
        };
        if regression {
            let (obj, _) = make_trace_regression(p, r, 6 * p * r, 0.1, seed).unwrap();
            check(&obj)?;
        } else {
            let (obj, _) = make_denoising(p, r, SpectrumSpec::new(if r == 1 { 1.0 } else { 2.0 }, 1.0), seed).unwrap();
            check(&obj)?;
        }
    }

    #[test]
    fn hessian_quadform_is_fiber_invariant((p, r) in shape(), seed: u64) {
        let (obj, _) = make_denoising(p, r, SpectrumSpec::new(if r == 1 { 1.0 } else { 1.5 }, 1.0), seed).unwrap();
        let y = factor(p, r, seed, 0);
        let th = horizontal_project(&y, &gaussian_matrix(p, r, &mut rng_for(seed, 1))).unwrap();
        let o = random_orthogonal(r, &mut rng_for(seed, 2));
        let yo = y.rotate(&o).unwrap();
        let tho = horizontal_project(&yo, &(th.matrix() * &o)).unwrap();
        let a = riemannian_hess_quadform(&obj, &y, &th).unwrap();
        let b = riemannian_hess_quadform(&obj, &yo, &tho).unwrap();
        prop_assert!(close(a, b, 1e-9));
    }

    #[test]
    fn region_labels_are_fiber_invariant((p, r) in shape(), seed: u64, scale in 0.05f64..3.0) {
        let kappa = if r == 1 { 1.0 } else { 2.0 };
        let (_, gt) = make_denoising(p, r, SpectrumSpec::new(kappa, 1.0), seed).unwrap();
        let params = RegionParams::default();
        let y = FactorPoint::new(gt.y_star.matrix() + gaussian_matrix(p, r, &mut rng_for(seed, 0)) * scale).unwrap();
        let o = random_orthogonal(r, &mut rng_for(seed, 1));
        let a = classify_region(&y, &gt, &params).unwrap();
        let b = classify_region(&y.rotate(&o).unwrap(), &gt, &params).unwrap();
        prop_assert!(!a.is_empty());
        prop_assert_eq!(a, b);
    }
}
