use combo::imaging::*;
use combo::laminate::LaminateOptions;
use combo::material::Material;
use combo::post::*;
use combo::solver::*;
use combo::tensor::*;

fn mats() -> (Material, Material) {
    (Material::neo_hookean(10.0, 0.3).unwrap(), Material::neo_hookean(1.0, 0.0).unwrap())
}

fn shear() -> Tensor2 {
    Tensor2::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
}

fn planar(p: [[f64; 2]; 2]) -> Tensor2 {
    Tensor2::new(p[0][0], p[0][1], 0.0, p[1][0], p[1][1], 0.0, 0.0, 0.0, 0.0)
}

#[test]
fn tabulated_relative_error_is_recomputed() {
    let coarse = planar([[0.0010, 0.3760], [0.3709, 0.0102]]);
    let reference = planar([[0.0007, 0.3722], [0.3665, 0.0114]]);
    let e = 100.0 * error_norm(&coarse, &reference).unwrap();
    assert!((e - 1.1446).abs() <= 0.1, "{e}");
}

#[test]
fn recovery_reproduces_solver_state() {
    let (plus, minus) = mats();
    let img = generate(&Shape::Sphere { radius: 0.4, center: None }, [64; 3], [1.0; 3]).unwrap();
    let mut g = coarsen(&img, [4; 3]).unwrap();
    assign_normals(&img, &mut g, NormalMethod::SecondMoment, MomentCentering::WeightedCentroid);
    let micro = Microstructure::from_combo(&g, plus, minus, true).unwrap();
    let cfg = SolverConfig { tol_equilibrium: 1e-6, ..Default::default() };
    let sol = solve(&micro, &shear(), &cfg).unwrap();
    let rec = recover_phase_fields(&micro, &sol.f, &sol.warm, &cfg.laminate).unwrap();
    assert_eq!(rec.composites.len(), micro.composites().len());
    assert!(rec.stats.max_iterations <= 1);
    for r in &rec.composites {
        let mix = r.result.p_plus * r.meta.c_plus() + r.result.p_minus * r.meta.c_minus();
        assert!((mix - r.result.p_box).norm() <= 1e-12 * r.result.p_box.norm().max(1.0));
        assert!((r.result.p_box - sol.p.get(r.cell)).norm() <= 1e-8 * r.result.p_box.norm().max(1.0));
    }
    let avg = phase_averages(&micro, &sol.p, &rec);
    let (pp, pm) = (avg.p_plus.unwrap(), avg.p_minus.unwrap());
    assert!((pp * avg.c_plus + pm * avg.c_minus - avg.p_bar).norm() <= 1e-12);
    assert!((avg.p_bar - sol.p_mean).norm() <= 1e-8);
    assert!((avg.c_plus - g.inclusion_fraction()).abs() <= 1e-14);
}

/// Layered cell with normal e1: equilibrium makes `P e1` uniform, so every
/// interface traction equals `P̄ e1`.
#[test]
fn laminate_tractions_equal_mean_traction() {
    let (plus, minus) = mats();
    let img = PhaseImage::from_fn([16, 4, 4], [4.0, 1.0, 1.0], |x| x[0] < 1.25).unwrap();
    let mut g = coarsen(&img, [4, 4, 4]).unwrap();
    assign_normals(&img, &mut g, NormalMethod::SecondMoment, MomentCentering::WeightedCentroid);
    assert_eq!(g.composite_count(), 1);
    let micro = Microstructure::from_combo(&g, plus, minus, true).unwrap();
    let cfg = SolverConfig { tol_equilibrium: 1e-10, ..Default::default() };
    let f = Tensor2::new(1.05, 0.3, 0.0, 0.1, 0.97, 0.0, 0.0, 0.0, 1.0);
    let sol = solve(&micro, &f, &cfg).unwrap();
    let rec = recover_phase_fields(&micro, &sol.f, &sol.warm, &cfg.laminate).unwrap();
    let samples = interface_tractions(&rec, &facet_export(&g)).unwrap();
    assert_eq!(samples.len(), 1);
    let s = &samples[0];
    let expected = sol.p_mean * Vec3::x();
    assert!((s.normal - Vec3::x()).norm() < 1e-12);
    assert!((s.traction - expected).norm() <= 1e-8 * expected.norm(), "{:?} {:?}", s.traction, expected);
    assert!((s.traction_minus - expected).norm() <= 1e-8 * expected.norm());
    assert!((s.area - 1.0).abs() < 1e-12);

    let rest = solve(&micro, &Tensor2::identity(), &cfg).unwrap();
    let rec = recover_phase_fields(&micro, &rest.f, &rest.warm, &LaminateOptions::default()).unwrap();
    let samples = interface_tractions(&rec, &facet_export(&g)).unwrap();
    assert!(samples[0].traction.norm() < 1e-14);
}
