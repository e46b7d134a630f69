use equivar::gauge_mesh::{build_atlas, harmonic_conv, MeshFeature, TriMesh};
use equivar::gcnn::{group_conv, lifting_conv, GroupKernel, ImageZ2, Kernel2D, P4Feature, Padding};
use equivar::grids::{
    rotate_spectral_s2, rotate_spectral_so3, s2_analysis, s2_synthesis, so3_analysis, so3_synthesis, S2Grid, SO3Grid,
    SpectralS2Signal, SpectralSO3Signal,
};
use equivar::harmonics::{clebsch_gordan, wigner_D, EulerZYZ};
use equivar::repr::FeatureType;
use equivar::rng;
use equivar::spectral_conv::{s2_conv_scalar, so3_conv_scalar, KernelS2, KernelSO3};
use equivar::steerable::{CircularHarmonic, RadialProfile};
use equivar::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn rotation() -> impl Strategy<Value = EulerZYZ> {
    (0.0..TAU, 0.0..PI, 0.0..TAU).prop_map(|(a, b, c)| EulerZYZ::new(a, b, c))
}

fn d(ell: usize, g: &EulerZYZ) -> DMatrix<C64> {
    wigner_D(ell, g).entries
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wigner_is_unitary(ell in 0usize..=16, g in rotation()) {
        let m = d(ell, &g);
        let err = (&m * m.adjoint() - DMatrix::<C64>::identity(2 * ell + 1, 2 * ell + 1)).camax();
        prop_assert!(err < 1e-12, "{}", err);
    }

    #[test]
    fn wigner_is_homomorphism(ell in 0usize..=12, g in rotation(), h in rotation()) {
        let err = (d(ell, &g.compose(&h)) - d(ell, &g) * d(ell, &h)).camax();
        prop_assert!(err < 1e-11, "{}", err);
    }

    #[test]
    fn s2_rotations_compose(seed: u64, l in 1usize..7, g in rotation(), h in rotation()) {
        let mut r = rng::seeded(seed);
        let f = SpectralS2Signal::random(&mut r, l, 2);
        let twice = rotate_spectral_s2(&rotate_spectral_s2(&f, &h), &g);
        let once = rotate_spectral_s2(&f, &g.compose(&h));
        prop_assert!(twice.max_abs_diff(&once) < 1e-11);
    }

    #[test]
    fn so3_rotations_compose(seed: u64, l in 1usize..5, g in rotation(), h in rotation()) {
        let mut r = rng::seeded(seed);
        let f = SpectralSO3Signal::random(&mut r, l, 1);
        let twice = rotate_spectral_so3(&rotate_spectral_so3(&f, &h), &g);
        let once = rotate_spectral_so3(&f, &g.compose(&h));
        prop_assert!(twice.max_abs_diff(&once) < 1e-11);
    }

    #[test]
    fn s2_round_trip(seed: u64, l in 1usize..12, channels in 1usize..3) {
        let mut r = rng::seeded(seed);
        let f = SpectralS2Signal::random(&mut r, l, channels);
        let grid = S2Grid::new(l);
        let back = s2_analysis(&grid, &s2_synthesis(&f, &grid).unwrap(), channels).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn so3_round_trip(seed: u64, l in 1usize..6) {
        let mut r = rng::seeded(seed);
        let f = SpectralSO3Signal::random(&mut r, l, 1);
        let grid = SO3Grid::new(l);
        let back = so3_analysis(&grid, &so3_synthesis(&f, &grid).unwrap(), 1).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-9);
    }

    #[test]
    fn scalar_convs_are_linear(seed: u64, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut r = rng::seeded(seed);
        let k = KernelS2::random(&mut r, 4, 2, 2);
        let f = SpectralS2Signal::random_real(&mut r, 4, 2);
        let h = SpectralS2Signal::random_real(&mut r, 4, 2);
        let mut mix = f.scale(C64::new(a, 0.0));
        for (m, x) in mix.coeffs.iter_mut().zip(&h.coeffs) {
            *m += x * b;
        }
        let lhs = s2_conv_scalar(&k, &mix).unwrap();
        let (cf, ch) = (s2_conv_scalar(&k, &f).unwrap(), s2_conv_scalar(&k, &h).unwrap());
        let err = lhs.coeffs.iter().zip(cf.coeffs.iter().zip(&ch.coeffs))
            .map(|(l, (x, y))| (l - (x * a + y * b)).norm())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-12);

        let k3 = KernelSO3::random(&mut r, 3, 1, 1);
        let u = SpectralSO3Signal::random(&mut r, 3, 1);
        let v = SpectralSO3Signal::random(&mut r, 3, 1);
        let mut w = u.clone();
        for (m, (x, y)) in w.coeffs.iter_mut().zip(u.coeffs.iter().zip(&v.coeffs)) {
            *m = x * a + y * b;
        }
        let lhs = so3_conv_scalar(&k3, &w).unwrap();
        let (cu, cv) = (so3_conv_scalar(&k3, &u).unwrap(), so3_conv_scalar(&k3, &v).unwrap());
        let err = lhs.coeffs.iter().zip(cu.coeffs.iter().zip(&cv.coeffs))
            .map(|(l, (x, y))| (l - (x * a + y * b)).norm())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn cg_rows_orthonormal(l1 in 0i64..6, l2 in 0i64..6, ja in 0i64..12, jb in 0i64..12, m in -11i64..12) {
        let lo = (l1 - l2).abs();
        let j1 = lo + ja % (l1 + l2 - lo + 1);
        let j2 = lo + jb % (l1 + l2 - lo + 1);
        prop_assume!(m.abs() <= j1.min(j2));
        let mut s = 0.0;
        for m1 in -l1..=l1 {
            let m2 = m - m1;
            if m2.abs() <= l2 {
                s += clebsch_gordan(l1, m1, l2, m2, j1, m) * clebsch_gordan(l1, m1, l2, m2, j2, m);
            }
        }
        let want = if j1 == j2 { 1.0 } else { 0.0 };
        prop_assert!((s - want).abs() < 1e-12, "{}", s);
    }

    #[test]
    fn feature_type_round_trip(pairs in proptest::collection::vec((0usize..6, 1usize..4), 0..5), g in rotation()) {
        let ft = FeatureType::new(&pairs);
        prop_assert_eq!(&FeatureType::from_json(&ft.to_json()).unwrap(), &ft);
        let dim: usize = ft.mult.iter().map(|(l, n)| (2 * l + 1) * n).sum();
        prop_assert_eq!(ft.dim(), dim);
        let rho = ft.representation(&g);
        let err = (&rho * rho.transpose() - DMatrix::<f64>::identity(dim, dim)).camax();
        prop_assert!(err < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lifting_and_group_conv_commute_with_p4(seed: u64, tx in -6i64..6, ty in -6i64..6, k in 0usize..4) {
        let mut r = rng::seeded(seed);
        let img = ImageZ2::random(&mut r, 6, 6, 2);
        let lift = Kernel2D::random(&mut r, 3, 2, 2);
        let moved = lifting_conv(&lift, &img.transformed((tx, ty), k).unwrap(), Padding::Periodic).unwrap();
        let f = lifting_conv(&lift, &img, Padding::Periodic).unwrap();
        prop_assert_eq!(moved.max_abs_diff(&f.transformed((tx, ty), k)), 0.0);

        let gk = GroupKernel::random(&mut r, 3, 2, 2);
        let p = P4Feature::random(&mut r, 6, 2);
        let lhs = group_conv(&gk, &p.transformed((tx, ty), k), Padding::Periodic).unwrap();
        let rhs = group_conv(&gk, &p, Padding::Periodic).unwrap().transformed((tx, ty), k);
        prop_assert_eq!(lhs.max_abs_diff(&rhs), 0.0);
    }

    #[test]
    fn p4_action_is_a_group_action(seed: u64, a in (-5i64..5, -5i64..5, 0usize..4), b in (-5i64..5, -5i64..5, 0usize..4)) {
        let mut r = rng::seeded(seed);
        let p = P4Feature::random(&mut r, 5, 1);
        let ((ax, ay, ar), (bx, by, br)) = (a, b);
        let twice = p.transformed((bx, by), br).transformed((ax, ay), ar);
        let (rx, ry) = equivar::gcnn::rot_offset(ar, bx, by);
        let once = p.transformed((ax + rx, ay + ry), (ar + br) % 4);
        prop_assert_eq!(twice.max_abs_diff(&once), 0.0);
    }

    #[test]
    fn harmonic_conv_gauge_phase_law(
        seed: u64,
        m_in in -2i64..3,
        m in -2i64..3,
        gauge in proptest::collection::vec(0.0..TAU, 12),
    ) {
        let mesh = TriMesh::icosahedron();
        let atlas = build_atlas(&mesh).unwrap();
        let moved = atlas.with_gauge(&mesh, &gauge).unwrap();
        let mut r = rng::seeded(seed);
        let f = MeshFeature::random(&mut r, m_in, 12);
        let k = CircularHarmonic::new(m, RadialProfile::Gaussian { center: 0.5, sigma: 0.5 }, 0.3);
        let out = harmonic_conv(&atlas, &k, &f).unwrap();
        prop_assert_eq!(out.order, m_in + m);
        let lhs = harmonic_conv(&moved, &k, &f.gauge_transformed(&gauge)).unwrap();
        let scale = out.values.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        prop_assert!(lhs.max_abs_diff(&out.gauge_transformed(&gauge)) / scale < 1e-10);
    }
}
