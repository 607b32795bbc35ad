use proptest::prelude::*;

use combo::imaging::*;
use combo::laminate::*;
use combo::material::Material;
use combo::tensor::*;

fn tensor(amp: f64) -> impl Strategy<Value = Tensor2> {
    prop::array::uniform9(-amp..amp).prop_map(|v| Tensor2::from_row_slice(&v))
}

fn gradient() -> impl Strategy<Value = Tensor2> {
    tensor(0.4).prop_map(|h| Tensor2::identity() + h).prop_filter("det > 0.2", |f| det3(f) > 0.2)
}

fn direction() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0..1.0f64).prop_map(Vec3::from).prop_filter("nonzero", |v| v.norm() > 0.1)
}

fn mats() -> (Material, Material) {
    (Material::neo_hookean(10.0, 0.3).unwrap(), Material::neo_hookean(1.0, 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn vector_inner_product_is_double_contraction(a in tensor(2.0), b in tensor(2.0)) {
        let sum: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * b[(i, j)]).sum();
        prop_assert!((to_vector9(&a).dot(&to_vector9(&b)) - sum).abs() <= 1e-13 * (1.0 + sum.abs()));
    }

    #[test]
    fn mandel_preserves_symmetric_contraction(a in tensor(2.0), b in tensor(2.0)) {
        let (sa, sb) = (sym(&a), sym(&b));
        prop_assert!((to_mandel(&sa).dot(&to_mandel(&sb)) - ddot(&sa, &sb)).abs() <= 1e-13 * (1.0 + ddot(&sa, &sb).abs()));
        prop_assert!((from_mandel(&to_mandel(&sa)) - sa).amax() <= 1e-15);
    }

    #[test]
    fn determinant_lemma_matches_update(f in gradient(), u in direction(), v in direction()) {
        let direct = det3(&(f + u * v.transpose()));
        let lemma = det_lemma(&f, &u, &v).unwrap();
        prop_assert!((direct - lemma).abs() <= 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn phase_gradients_average_to_box(f in gradient(), n in direction(), cp in 0.01..0.99f64, a in prop::array::uniform3(-2.0..2.0f64)) {
        let meta = ComboMeta::new(n, cp).unwrap();
        let (fp, fm) = meta.phase_gradients(&f, &Vec3::from(a));
        prop_assert!((fp * meta.c_plus() + fm * meta.c_minus() - f).amax() <= 1e-14 * (1.0 + 2.0 / cp.min(1.0 - cp)));
        prop_assert!((meta.normal().norm() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(meta.c_plus() + meta.c_minus(), 1.0);
    }

    #[test]
    fn converged_laminate_is_admissible_and_warm_starts(f in gradient(), n in direction(), cp in 0.02..0.98f64) {
        let (mp, mm) = mats();
        let meta = ComboMeta::new(n, cp).unwrap();
        let opts = LaminateOptions::default();
        let Ok(s) = finite_strain_solve(&f, &mp, &mm, &meta, &Vec3::zeros(), &opts) else { return Ok(()) };
        prop_assert!(det3(&s.result.f_plus) > 0.0 && det3(&s.result.f_minus) > 0.0);
        prop_assert!(admissibility_bounds(&f, &meta).unwrap().contains(&s.state.a));
        let jump = (s.result.p_plus - s.result.p_minus) * meta.normal();
        prop_assert!(jump.norm() <= 1e-9 * s.result.traction.norm().max(1.0));
        let again = finite_strain_solve(&f, &mp, &mm, &meta, &s.state.a, &opts).unwrap();
        prop_assert!(again.state.iterations <= 1);
    }

    #[test]
    fn back_projection_lands_inside(f in gradient(), n in direction(), cp in 0.02..0.98f64, d in prop::array::uniform3(-20.0..20.0f64)) {
        let meta = ComboMeta::new(n, cp).unwrap();
        let b = admissibility_bounds(&f, &meta).unwrap();
        let a1 = Vec3::from(d);
        let out = back_project(&a1, &Vec3::zeros(), &b.m_beta, b.beta_plus, b.beta_minus);
        prop_assert!(b.contains(&out));
        let (fp, fm) = meta.phase_gradients(&f, &out);
        prop_assert!(det3(&fp) > 0.0 && det3(&fm) > 0.0);
    }

    #[test]
    fn implicit_rule_ignores_lambda(lp in 0.1..10.0f64, mp in 0.1..10.0f64, lm in 0.1..10.0f64, mm in 0.1..10.0f64, n in direction(), cp in 0.05..0.95f64) {
        let (c1, c2) = (isotropic_sym4(lp, mp), isotropic_sym4(lm, mm));
        let l = milton_default_lambda(&c1, &c2);
        let a = milton_laminate(&c1, &c2, cp, &n, l).unwrap();
        let b = milton_laminate(&c1, &c2, cp, &n, 2.0 * l).unwrap();
        prop_assert!((a - b).norm() <= 1e-8 * a.norm());
    }

    #[test]
    fn facet_offset_cuts_requested_volume(n in direction(), cp in 0.01..0.99f64, l in prop::array::uniform3(0.2..3.0f64)) {
        let d = facet_plane_offset(l, &n, cp);
        let v = halfspace_box_volume(l, &n, d) / (l[0] * l[1] * l[2]);
        prop_assert!((v - cp).abs() <= 1e-8);
    }
}

#[test]
fn mirrored_image_mirrors_normals() {
    let shape = Shape::Sphere { radius: 0.3, center: Some([0.45, 0.55, 0.5]) };
    let img = generate(&shape, [32; 3], [1.0; 3]).unwrap();
    for method in [NormalMethod::Barycenter, NormalMethod::SecondMoment] {
        for axis in 0..3 {
            let m = img.mirrored(axis);
            let mut g = coarsen(&img, [4; 3]).unwrap();
            let mut gm = coarsen(&m, [4; 3]).unwrap();
            assign_normals(&img, &mut g, method, MomentCentering::WeightedCentroid);
            assign_normals(&m, &mut gm, method, MomentCentering::WeightedCentroid);
            for b in 0..g.len() {
                let mut c = g.coords(b);
                c[axis] = g.dims[axis] - 1 - c[axis];
                let mut expected = g.normals[b];
                expected[axis] = -expected[axis];
                let got = gm.normals[gm.index(c[0], c[1], c[2])];
                assert!((got - expected).norm() < 1e-10, "{method:?} axis {axis} boxel {b}");
            }
        }
    }
}

#[test]
fn coarsening_preserves_counts_per_boxel() {
    let img = generate(&Shape::Octahedron { radius: 0.45, center: None }, [24, 12, 36], [2.0, 1.0, 3.0]).unwrap();
    let g = coarsen(&img, [3, 4, 6]).unwrap();
    let f = g.factors;
    for b in 0..g.len() {
        let [bi, bj, bk] = g.coords(b);
        let mut count = 0u32;
        for i in 0..f[0] {
            for j in 0..f[1] {
                for k in 0..f[2] {
                    count += img.get(bi * f[0] + i, bj * f[1] + j, bk * f[2] + k) as u32;
                }
            }
        }
        assert_eq!(count, g.counts[b]);
        if g.kinds[b] == BoxelKind::Composite {
            assert!(g.c_plus[b] > 0.0 && g.c_plus[b] < 1.0);
        }
    }
    assert_eq!(g.inclusion_count(), img.inclusion_count());
}
