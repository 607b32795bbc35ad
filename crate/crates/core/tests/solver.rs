use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use combo::imaging::*;
use combo::laminate::LaminateOptions;
use combo::material::Material;
use combo::post::error_norm;
use combo::solver::*;
use combo::tensor::*;

fn shear() -> Tensor2 {
    Tensor2::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
}

fn sphere_micro(fine: usize, factor: usize, plus: Material) -> Microstructure {
    let img = generate(&Shape::Sphere { radius: 0.4, center: None }, [fine; 3], [1.0; 3]).unwrap();
    let mut g = coarsen(&img, [factor; 3]).unwrap();
    assign_normals(&img, &mut g, NormalMethod::SecondMoment, MomentCentering::WeightedCentroid);
    Microstructure::from_combo(&g, plus, Material::neo_hookean(1.0, 0.0).unwrap(), true).unwrap()
}

/// Scatter form of the doubly-fine evaluation: every fine cell reads each
/// component from the staggered variable nearest to it and sends one eighth
/// of its stress back there.
fn dfmg_scatter(f: &FieldF, grid: &SimGrid, mat: impl Fn(usize) -> Material) -> FieldF {
    let n = grid.dims;
    let mut out = vec![0.0; 9 * grid.len()];
    let owner = |fine: [usize; 3], i: usize, j: usize| {
        let cell = fine.map(|v| v / 2);
        if i == j {
            return grid.index(cell[0], cell[1], cell[2]);
        }
        let mut at = cell;
        for a in [i, j] {
            at[a] = ((fine[a] + 1) / 2) % n[a];
        }
        grid.index(at[0], at[1], at[2])
    };
    for i1 in 0..2 * n[0] {
        for i2 in 0..2 * n[1] {
            for i3 in 0..2 * n[2] {
                let fine = [i1, i2, i3];
                let ff = Tensor2::from_fn(|i, j| f.data()[9 * owner(fine, i, j) + 3 * i + j]);
                let cell = grid.index(i1 / 2, i2 / 2, i3 / 2);
                let p = mat(cell).stress(&ff).unwrap();
                for i in 0..3 {
                    for j in 0..3 {
                        out[9 * owner(fine, i, j) + 3 * i + j] += p[(i, j)] / 8.0;
                    }
                }
            }
        }
    }
    FieldF::from_vec(n, out)
}

#[test]
fn dfmg_matches_scatter_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = SimGrid::new([4, 4, 4], [1.0, 1.5, 0.8]).unwrap();
    let (plus, minus) = (Material::neo_hookean(10.0, 0.3).unwrap(), Material::neo_hookean(1.0, 0.0).unwrap());
    let cells: Vec<CellKind> = (0..grid.len()).map(|_| if rng.gen_bool(0.4) { CellKind::Plus } else { CellKind::Minus }).collect();
    let micro = Microstructure::new(grid, plus, minus, cells.clone(), vec![]).unwrap();
    let data: Vec<f64> = (0..9 * grid.len()).map(|k| if k % 9 % 4 == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.1..0.1)).collect();
    let f = FieldF::from_vec(grid.dims, data);
    let p = dfmg_stress(&micro, &f, &mut [], &LaminateOptions::default()).unwrap();
    let q = dfmg_scatter(&f, &grid, |c| if cells[c] == CellKind::Plus { plus } else { minus });
    let diff = p.data().iter().zip(q.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn staggered_grad_and_div_are_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = SimGrid::new([4, 5, 3], [1.0, 2.0, 0.7]).unwrap();
    let u = [0, 1, 2].map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
    let p = FieldF::from_vec(grid.dims, (0..9 * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let lhs = grad_staggered(&u, &grid).dot(&p);
    let div = div_staggered(&p, &grid);
    let rhs: f64 = (0..3).map(|i| u[i].iter().zip(&div[i]).map(|(a, b)| a * b).sum::<f64>()).sum();
    assert!((lhs + rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
}

#[test]
fn forward_difference_of_sawtooth() {
    let grid = SimGrid::new([6, 2, 3], [3.0, 1.0, 1.0]).unwrap();
    let phi: Vec<f64> = (0..grid.len()).map(|c| grid.coords(c)[0] as f64).collect();
    let d = diff_plus(&phi, &grid, 0);
    for c in 0..grid.len() {
        let expected = if grid.coords(c)[0] == 5 { -5.0 / 0.5 } else { 1.0 / 0.5 };
        assert_eq!(d[c], expected);
    }
}

#[test]
fn residual_is_scale_invariant() {
    let micro = sphere_micro(32, 4, Material::neo_hookean(10.0, 0.3).unwrap());
    let cfg = SolverConfig { tol_equilibrium: 1e-4, ..Default::default() };
    let sol = solve(&micro, &shear(), &cfg).unwrap();
    let problem = CellProblem::new(&micro, &cfg).unwrap();
    let r = problem.equilibrium_residual(&sol.p);
    let mut scaled = sol.p.clone();
    scaled.scale(7.5);
    let rs = problem.equilibrium_residual(&scaled);
    assert!(r > 0.0 && (rs - r).abs() <= 1e-12 * r, "{r} {rs}");
}

#[test]
fn result_is_independent_of_load_steps() {
    let micro = sphere_micro(64, 4, Material::neo_hookean(10.0, 0.3).unwrap());
    let tol = 1e-8;
    let run = |steps| solve(&micro, &shear(), &SolverConfig { tol_equilibrium: tol, load_steps: steps, ..Default::default() }).unwrap();
    let (one, four) = (run(1), run(4));
    assert_eq!(four.report.steps.len(), 4);
    let e = error_norm(&four.p_mean, &one.p_mean).unwrap();
    assert!(e <= 10.0 * tol, "{e}");
}

#[test]
fn bisection_rescues_a_stiff_step() {
    let micro = sphere_micro(32, 4, Material::neo_hookean(1000.0, 0.3).unwrap());
    let cfg = SolverConfig { max_outer: 4, tol_equilibrium: 1e-6, ..Default::default() };
    let sol = solve(&micro, &shear(), &cfg).unwrap();
    let bisections: usize = sol.report.steps.iter().map(|s| s.bisections).sum();
    assert!(bisections > 0);
    assert!((sol.report.steps.last().unwrap().load_factor - 1.0).abs() < 1e-12);
    assert!(sol.report.final_residual().unwrap() <= 1e-6);

    let strict = SolverConfig { max_bisections: 0, ..cfg };
    assert!(matches!(solve(&micro, &shear(), &strict), Err(combo::Error::LoadPathFailed { .. })));
}
