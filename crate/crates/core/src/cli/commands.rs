use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::imaging::io::{read_combo_grid, read_f64s, read_phase_image, write_combo_grid, write_f64s, write_phase_image};
use crate::imaging::{assign_normals, coarsen, facet_export, facet_gap_metric, generate, ComboGrid, MomentCentering, NormalMethod, NormalStatus, PhaseImage, Shape};
use crate::material::Material;
use crate::post::{
    error_norm, field_component, interface_tractions, phase_averages, recover_phase_fields, write_csv, write_slice, TractionRecord,
};
use crate::solver::{solve, tensor_rows, FieldF, Microstructure, SimGrid, Solution, SolverConfig};
use crate::tensor::{Tensor2, Vec3};

pub const IMAGE: &str = "image.json";
pub const GRID: &str = "grid.json";
pub const NORMALS: &str = "normals.json";
pub const SOLUTION: &str = "solution.json";
pub const EFFECTIVE_CONFIG: &str = "config.effective.json";

/// Output of one subcommand: a reproducible report and wall-clock timings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommandOutput {
    pub report: Value,
    pub timings: Value,
    /// Human-readable lines for the terminal.
    #[serde(skip)]
    pub lines: Vec<String>,
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::IoFailure(format!("{}: {e}", cfg.output.display())))?;
    Ok(cfg.output.clone())
}

/// Writes the effective configuration, with defaults filled in.
pub fn echo_config(cfg: &RunConfig) -> Result<PathBuf> {
    let p = out_dir(cfg)?.join(EFFECTIVE_CONFIG);
    fs::write(&p, serde_json::to_string_pretty(cfg)?)?;
    Ok(p)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn materials(cfg: &RunConfig) -> Result<(Material, Material)> {
    Ok((cfg.materials.plus.build()?, cfg.materials.minus.build()?))
}

fn load_image(cfg: &RunConfig) -> Result<PhaseImage> {
    match &cfg.image {
        Some(p) => read_phase_image(p),
        None => read_phase_image(&cfg.output.join(IMAGE)),
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<CommandOutput> {
    let dir = out_dir(cfg)?;
    let t = Instant::now();
    let shape = cfg.effective_geometry().ok_or_else(|| Error::ConfigInvalid("generate needs a geometry".into()))?;
    let img = generate(&shape, cfg.resolution, cfg.lengths)?;
    write_phase_image(&img, &dir.join(IMAGE))?;
    let report = json!({
        "command": "generate",
        "dims": img.dims(),
        "inclusion_voxels": img.inclusion_count(),
        "inclusion_fraction": img.inclusion_fraction(),
    });
    let lines = vec![format!("inclusion fraction: {:.6}", img.inclusion_fraction())];
    Ok(CommandOutput { report, timings: json!({ "total_s": t.elapsed().as_secs_f64() }), lines })
}

pub fn cmd_coarsen(cfg: &RunConfig) -> Result<CommandOutput> {
    let dir = out_dir(cfg)?;
    let t = Instant::now();
    let img = load_image(cfg)?;
    let g = coarsen(&img, cfg.factors)?;
    write_combo_grid(&g, &dir.join(GRID))?;
    let n = g.composite_count();
    let report = json!({
        "command": "coarsen",
        "dims": g.dims,
        "factors": g.factors,
        "composite_boxels": n,
        "composite_fraction": n as f64 / g.len() as f64,
        "inclusion_fraction_image": img.inclusion_fraction(),
        "inclusion_fraction_grid": g.inclusion_fraction(),
    });
    let lines = vec![
        format!("composite boxels: {n}"),
        format!("inclusion fraction: image {:.12}, boxels {:.12}", img.inclusion_fraction(), g.inclusion_fraction()),
    ];
    Ok(CommandOutput { report, timings: json!({ "total_s": t.elapsed().as_secs_f64() }), lines })
}

/// Colinearity `|N · N_exact|` against the analytic geometry at the facet
/// centroids; `None` when the geometry has no analytic normal.
pub fn normal_colinearity(shape: &Shape, grid: &ComboGrid) -> Option<Vec<f64>> {
    let facets = facet_export(grid);
    let mut out = Vec::with_capacity(facets.len());
    for f in &facets {
        let exact = shape.outward_normal([f.centroid.x, f.centroid.y, f.centroid.z], grid.lengths)?;
        out.push(f.normal.normalize().dot(&exact).abs());
    }
    Some(out)
}

pub fn cmd_normals(cfg: &RunConfig) -> Result<CommandOutput> {
    let dir = out_dir(cfg)?;
    let t = Instant::now();
    let img = load_image(cfg)?;
    let mut g = read_combo_grid(&dir.join(GRID))?;
    assign_normals(&img, &mut g, cfg.normals.method, cfg.normals.centering);
    write_combo_grid(&g, &dir.join(NORMALS))?;
    let flagged = g.status.iter().filter(|s| matches!(s, NormalStatus::DegenerateBarycenters | NormalStatus::TooFewInterfaceVoxels)).count();
    let facets = facet_export(&g);
    let gap = facet_gap_metric(&g, &facets);
    let mut report = json!({
        "command": "normals",
        "method": cfg.normals.method,
        "centering": cfg.normals.centering,
        "composite_boxels": g.composite_count(),
        "flagged": flagged,
        "facet_gap": gap,
    });
    let mut lines = vec![format!("normals: {} composite boxels, {flagged} flagged, facet gap {gap:.3e}", g.composite_count())];
    if cfg.normals.oracle && cfg.image.is_none() {
        if let Some(c) = cfg.effective_geometry().and_then(|s| normal_colinearity(&s, &g)) {
            let mean = c.iter().sum::<f64>() / c.len().max(1) as f64;
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            report["colinearity"] = json!({ "mean": mean, "min": min, "samples": c.len() });
            lines.push(format!("colinearity with analytic normals: mean {mean:.6}, min {min:.6}"));
        }
    }
    Ok(CommandOutput { report, timings: json!({ "total_s": t.elapsed().as_secs_f64() }), lines })
}

/// Microstructure described by the configuration and the artifacts in the
/// output directory. Factors of 1 solve on the voxel image directly.
pub fn load_microstructure(cfg: &RunConfig) -> Result<Microstructure> {
    let (plus, minus) = materials(cfg)?;
    if cfg.factors == [1, 1, 1] {
        return Microstructure::from_image(&load_image(cfg)?, plus, minus);
    }
    let normals = cfg.output.join(NORMALS);
    let g = if cfg.solver.combo || normals.exists() { read_combo_grid(&normals)? } else { read_combo_grid(&cfg.output.join(GRID))? };
    Microstructure::from_combo(&g, plus, minus, cfg.solver.combo)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionHeader {
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    pub order: String,
    pub f: String,
    pub p: String,
    pub warm: String,
    pub warm_len: usize,
    pub p_mean: [[f64; 3]; 3],
}

pub fn write_solution(sol: &Solution, grid: &SimGrid, dir: &Path) -> Result<()> {
    write_f64s(&dir.join("F.raw"), sol.f.data().iter().copied())?;
    write_f64s(&dir.join("P.raw"), sol.p.data().iter().copied())?;
    write_f64s(&dir.join("warm.raw"), sol.warm.iter().flat_map(|a| [a.x, a.y, a.z]))?;
    let h = SolutionHeader {
        dims: grid.dims,
        lengths: grid.lengths,
        order: "C, k fastest, 9 components per cell (row-major i, J)".into(),
        f: "F.raw".into(),
        p: "P.raw".into(),
        warm: "warm.raw".into(),
        warm_len: sol.warm.len(),
        p_mean: tensor_rows(&sol.p_mean),
    };
    write_json(&dir.join(SOLUTION), &h)
}

/// Fields and jump vectors of a stored solution.
pub fn read_solution(dir: &Path) -> Result<(SolutionHeader, FieldF, FieldF, Vec<Vec3>)> {
    let hp = dir.join(SOLUTION);
    if !hp.exists() {
        return Err(Error::UpstreamArtifactMissing(hp));
    }
    let h: SolutionHeader = serde_json::from_slice(&fs::read(&hp)?)?;
    let n = 9 * h.dims.iter().product::<usize>();
    let f = read_f64s(&dir.join(&h.f))?;
    let p = read_f64s(&dir.join(&h.p))?;
    let w = read_f64s(&dir.join(&h.warm))?;
    if f.len() != n || p.len() != n || w.len() != 3 * h.warm_len {
        return Err(Error::Format("solution arrays do not match the header".into()));
    }
    let warm = w.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    Ok((h.clone(), FieldF::from_vec(h.dims, f), FieldF::from_vec(h.dims, p), warm))
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<CommandOutput> {
    let dir = out_dir(cfg)?;
    let t = Instant::now();
    let micro = load_microstructure(cfg)?;
    let target = cfg.loading_tensor();
    let sol = solve(&micro, &target, &cfg.solver)?;
    write_solution(&sol, micro.grid(), &dir)?;
    let rep = &sol.report;
    let report = json!({
        "command": "solve",
        "dims": micro.grid().dims,
        "composites": micro.composites().len(),
        "inclusion_fraction": micro.inclusion_fraction(),
        "f_bar": cfg.loading,
        "p_mean": tensor_rows(&sol.p_mean),
        "outer_iterations": rep.outer_iterations(),
        "cg_iterations": rep.cg_iterations(),
        "final_residual": rep.final_residual(),
        "steps": rep.steps,
    });
    write_json(&dir.join("report.json"), &report)?;
    let timings = json!({ "solve": rep.timings, "total_s": t.elapsed().as_secs_f64() });
    write_json(&dir.join("timings.json"), &timings)?;
    let p = sol.p_mean;
    let lines = vec![
        format!("outer iterations: {}, CG iterations: {}", rep.outer_iterations(), rep.cg_iterations()),
        format!("P_mean: XX {:.6} XY {:.6} YX {:.6} YY {:.6}", p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]),
    ];
    Ok(CommandOutput { report, timings, lines })
}

pub fn cmd_post(cfg: &RunConfig) -> Result<CommandOutput> {
    let dir = out_dir(cfg)?;
    let t = Instant::now();
    let micro = load_microstructure(cfg)?;
    let (h, f, p, warm) = read_solution(&dir)?;
    if h.dims != micro.grid().dims {
        return Err(Error::Format(format!("solution grid {:?} does not match the microstructure {:?}", h.dims, micro.grid().dims)));
    }
    let rec = recover_phase_fields(&micro, &f, &warm, &cfg.solver.laminate)?;
    let avg = phase_averages(&micro, &p, &rec);
    write_csv(&dir.join("phase_averages.csv"), &avg.records())?;
    let mut tractions = vec![];
    if cfg.factors != [1, 1, 1] && !rec.composites.is_empty() {
        let g = read_combo_grid(&dir.join(NORMALS))?;
        let samples = interface_tractions(&rec, &facet_export(&g))?;
        tractions = samples.iter().map(|s| TractionRecord::new(s, cfg.post.interface_gradient)).collect();
    }
    write_csv(&dir.join("tractions.csv"), &tractions)?;
    let mut slices = vec![];
    for s in &cfg.post.slices {
        let field = if s.field == "F" { &f } else { &p };
        let [i, j] = s.component;
        let name = format!("slice_{}{}{}_axis{}_{}.json", s.field, i + 1, j + 1, s.axis, s.index);
        write_slice(&field_component(field, i, j), h.dims, s.axis, s.index, &format!("{}{}{}", s.field, i + 1, j + 1), &dir.join(&name))?;
        slices.push(name);
    }
    let max_jump = rec.composites.iter().fold(0.0f64, |m, r| {
        let n = r.meta.normal();
        m.max(((r.result.p_plus - r.result.p_minus) * n).norm())
    });
    let mut report = json!({
        "command": "post",
        "p_bar": tensor_rows(&avg.p_bar),
        "p_plus": avg.p_plus.as_ref().map(tensor_rows),
        "p_minus": avg.p_minus.as_ref().map(tensor_rows),
        "c_plus": avg.c_plus,
        "c_minus": avg.c_minus,
        "recovery_max_iterations": rec.stats.max_iterations,
        "interface_samples": tractions.len(),
        "max_traction_jump": max_jump,
        "slices": slices,
    });
    let mut lines = vec![format!("phase averages written, {} interface samples", tractions.len())];
    if let Some(r) = cfg.post.reference {
        let rt = Tensor2::from_row_slice(&r.concat());
        let e = error_norm(&avg.p_bar, &rt)?;
        report["error"] = json!(e);
        lines.push(format!("relative error vs reference: {:.4}%", 100.0 * e));
    }
    write_json(&dir.join("post.json"), &report)?;
    Ok(CommandOutput { report, timings: json!({ "total_s": t.elapsed().as_secs_f64() }), lines })
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub shape: String,
    pub dims: [usize; 3],
    /// `reference`, `barycenter`, `second_moment` or `no_combo`.
    pub normals: String,
    pub composite_fraction: f64,
    pub p_mean: [[f64; 3]; 3],
    pub error: Option<f64>,
    pub outer_iterations: usize,
}

pub fn bench_shapes(suite: &str) -> Vec<(&'static str, Shape)> {
    let sphere = ("sphere", Shape::Sphere { radius: 0.4, center: None });
    if suite == "sphere-desk" {
        return vec![sphere];
    }
    vec![
        sphere,
        ("octahedron", Shape::Octahedron { radius: 0.5, center: None }),
        ("cross-ply", Shape::CrossPly { radius: 0.2, period: 1.0, rotation_deg: 0.0 }),
        ("fiber", Shape::Fiber { axis: [1.0, 0.0, 0.0], radius: 0.25, length: 0.7, center: None }),
    ]
}

/// Reference solve on the fine image, then ComBo runs per coarsening factor
/// with barycenter and second-moment normals, and a majority-phase run.
pub fn run_bench(cfg: &RunConfig, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let (plus, minus) = materials(cfg)?;
    let target = cfg.loading_tensor();
    let n = cfg.bench.resolution;
    let lengths = [1.0; 3];
    let mut rows = vec![];
    let mut push = |rows: &mut Vec<BenchRow>, r: BenchRow| {
        progress(&r);
        rows.push(r);
    };
    for (name, shape) in bench_shapes(&cfg.bench.suite) {
        let img = generate(&shape, [n; 3], lengths)?;
        let reference = solve(&Microstructure::from_image(&img, plus, minus)?, &target, &SolverConfig { combo: false, ..cfg.solver.clone() })?;
        let pref = reference.p_mean;
        push(&mut rows, BenchRow {
            shape: name.into(),
            dims: [n; 3],
            normals: "reference".into(),
            composite_fraction: 0.0,
            p_mean: tensor_rows(&pref),
            error: None,
            outer_iterations: reference.report.outer_iterations(),
        });
        drop(reference);
        for &factors in &cfg.bench.factors {
            let base = coarsen(&img, factors)?;
            let frac = base.composite_count() as f64 / base.len() as f64;
            let runs = [("barycenter", Some(NormalMethod::Barycenter)), ("second_moment", Some(NormalMethod::SecondMoment)), ("no_combo", None)];
            for (label, method) in runs {
                let mut g = base.clone();
                if let Some(m) = method {
                    assign_normals(&img, &mut g, m, MomentCentering::WeightedCentroid);
                }
                let micro = Microstructure::from_combo(&g, plus, minus, method.is_some())?;
                let s = solve(&micro, &target, &cfg.solver)?;
                push(&mut rows, BenchRow {
                    shape: name.into(),
                    dims: g.dims,
                    normals: label.into(),
                    composite_fraction: frac,
                    p_mean: tensor_rows(&s.p_mean),
                    error: Some(error_norm(&s.p_mean, &pref)?),
                    outer_iterations: s.report.outer_iterations(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn bench_table_header() -> String {
    format!("{:<11} {:<12} {:<14} {:>9} {:>9} {:>9} {:>9} {:>10}", "shape", "grid", "normals", "XX", "XY", "YX", "YY", "error[%]")
}

pub fn bench_table_line(r: &BenchRow) -> String {
    let p = &r.p_mean;
    let e = r.error.map_or("-".to_string(), |e| format!("{:.4}", 100.0 * e));
    let grid = format!("{}x{}x{}", r.dims[0], r.dims[1], r.dims[2]);
    format!("{:<11} {:<12} {:<14} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>10}", r.shape, grid, r.normals, p[0][0], p[0][1], p[1][0], p[1][1], e)
}

pub fn cmd_bench(cfg: &RunConfig, mut on_row: impl FnMut(&str)) -> Result<CommandOutput> {
    let dir = out_dir(cfg)?;
    let t = Instant::now();
    on_row(&bench_table_header());
    let rows = run_bench(cfg, |r| on_row(&bench_table_line(r)))?;
    let headline = rows.iter().filter(|r| r.normals == "second_moment").filter_map(|r| r.error).fold(0.0f64, f64::max);
    let report = json!({ "command": "bench", "suite": cfg.bench.suite, "rows": rows, "headline_error": headline });
    write_json(&dir.join("bench.json"), &report)?;
    let lines = vec![format!("largest second-moment error: {:.4}%", 100.0 * headline)];
    Ok(CommandOutput { report, timings: json!({ "total_s": t.elapsed().as_secs_f64() }), lines })
}
