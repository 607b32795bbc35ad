use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::store;
use super::{FieldF, MaterialEval, SimGrid};
use crate::error::{Error, Result};
use crate::imaging::{BoxelKind, ComboGrid, PhaseImage};
use crate::laminate::{finite_strain_solve, ComboMeta, LaminateOptions, LaminateResult};
use crate::material::Material;
use crate::tensor::{Tensor2, Tensor4, Vec3};

/// Number of stored entries of a symmetric 9×9 tangent.
pub const PACKED: usize = 45;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Minus,
    Plus,
    /// Index into [`Microstructure::composites`].
    Composite(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Composite {
    pub cell: usize,
    pub meta: ComboMeta,
}

/// Material layout on the simulation grid.
#[derive(Clone, Debug)]
pub struct Microstructure {
    grid: SimGrid,
    plus: Material,
    minus: Material,
    cells: Vec<CellKind>,
    composites: Vec<Composite>,
}

impl Microstructure {
    pub fn new(grid: SimGrid, plus: Material, minus: Material, cells: Vec<CellKind>, composites: Vec<Composite>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(Error::ConfigInvalid(format!("{} cell kinds for a grid of {} cells", cells.len(), grid.len())));
        }
        for (i, c) in composites.iter().enumerate() {
            if cells.get(c.cell) != Some(&CellKind::Composite(i as u32)) {
                return Err(Error::ConfigInvalid(format!("composite {i} does not match its cell")));
            }
        }
        Ok(Self { grid, plus, minus, cells, composites })
    }

    pub fn homogeneous(grid: SimGrid, mat: Material) -> Self {
        Self { grid, plus: mat, minus: mat, cells: vec![CellKind::Minus; grid.len()], composites: vec![] }
    }

    /// One cell per voxel; voxels with value 1 get the `plus` material.
    pub fn from_image(img: &PhaseImage, plus: Material, minus: Material) -> Result<Self> {
        let grid = SimGrid::new(img.dims(), img.lengths())?;
        let cells = img.data().iter().map(|&v| if v == 1 { CellKind::Plus } else { CellKind::Minus }).collect();
        Ok(Self { grid, plus, minus, cells, composites: vec![] })
    }

    /// One cell per boxel. Without `combo`, composite boxels take the
    /// majority phase (ties go to the matrix).
    pub fn from_combo(g: &ComboGrid, plus: Material, minus: Material, combo: bool) -> Result<Self> {
        let grid = SimGrid::new(g.dims, g.lengths)?;
        let mut cells = Vec::with_capacity(g.len());
        let mut composites = vec![];
        for b in 0..g.len() {
            cells.push(match g.kinds[b] {
                BoxelKind::PureMatrix => CellKind::Minus,
                BoxelKind::PureInclusion => CellKind::Plus,
                BoxelKind::Composite if !combo => {
                    if 2 * g.counts[b] as usize > g.voxels_per_boxel() {
                        CellKind::Plus
                    } else {
                        CellKind::Minus
                    }
                }
                BoxelKind::Composite => {
                    if g.normals[b].norm() == 0.0 {
                        return Err(Error::ConfigInvalid(format!("composite boxel {b} has no normal")));
                    }
                    composites.push(Composite { cell: b, meta: ComboMeta::new(g.normals[b], g.c_plus[b])? });
                    CellKind::Composite(composites.len() as u32 - 1)
                }
            });
        }
        Ok(Self { grid, plus, minus, cells, composites })
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn plus(&self) -> &Material {
        &self.plus
    }

    pub fn minus(&self) -> &Material {
        &self.minus
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    pub fn composites(&self) -> &[Composite] {
        &self.composites
    }

    /// Inclusion fraction carried by the cells, composites counted by `c+`.
    pub fn inclusion_fraction(&self) -> f64 {
        let s: f64 = self
            .cells
            .iter()
            .map(|k| match k {
                CellKind::Minus => 0.0,
                CellKind::Plus => 1.0,
                CellKind::Composite(i) => self.composites[*i as usize].meta.c_plus(),
            })
            .sum();
        s / self.cells.len() as f64
    }

    pub fn material(&self, kind: CellKind) -> Option<&Material> {
        match kind {
            CellKind::Minus => Some(&self.minus),
            CellKind::Plus => Some(&self.plus),
            CellKind::Composite(_) => None,
        }
    }

    pub fn modulus_scale(&self) -> f64 {
        self.plus.modulus_scale().max(self.minus.modulus_scale())
    }
}

/// Per-boxel laminate statistics of one constitutive sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaminateStats {
    pub solves: usize,
    pub max_iterations: usize,
    pub back_projections: usize,
    pub failures: usize,
}

impl LaminateStats {
    pub fn merge(&mut self, o: &LaminateStats) {
        self.solves += o.solves;
        self.max_iterations = self.max_iterations.max(o.max_iterations);
        self.back_projections += o.back_projections;
        self.failures += o.failures;
    }
}

pub fn pack_tangent(a: &Tensor4, out: &mut [f64]) {
    let mut k = 0;
    for r in 0..9 {
        for s in r..9 {
            out[k] = 0.5 * (a[(r, s)] + a[(s, r)]);
            k += 1;
        }
    }
}

#[inline]
pub fn apply_packed(t: &[f64], x: &[f64], y: &mut [f64]) {
    y[..9].fill(0.0);
    let mut k = 0;
    for r in 0..9 {
        y[r] += t[k] * x[r];
        k += 1;
        for s in r + 1..9 {
            y[r] += t[k] * x[s];
            y[s] += t[k] * x[r];
            k += 1;
        }
    }
}

pub(crate) fn with_cell(e: Error, cell: usize) -> Error {
    match e {
        Error::InadmissibleDeformation { det, .. } | Error::InadmissibleMacroState { det } => {
            Error::InadmissibleDeformation { det, cell: Some(cell) }
        }
        e => e,
    }
}

fn eval_pure(mat: &Material, f: &Tensor2, cell: usize, tangent: bool) -> Result<(Tensor2, Option<Tensor4>)> {
    if tangent {
        let (p, a) = mat.eval(f).map_err(|e| with_cell(e, cell))?;
        Ok((p, Some(a)))
    } else {
        Ok((mat.stress(f).map_err(|e| with_cell(e, cell))?, None))
    }
}

/// Laminate solve that never aborts on non-convergence: the best iterate is
/// returned and counted as a failure.
pub fn solve_composite(
    micro: &Microstructure,
    comp: &Composite,
    f: &Tensor2,
    warm: &mut Vec3,
    opts: &LaminateOptions,
    stats: &mut LaminateStats,
) -> Result<LaminateResult> {
    let sol = match finite_strain_solve(f, &micro.plus, &micro.minus, &comp.meta, warm, opts) {
        Ok(s) => s,
        Err(Error::LaminateNoConvergence(best)) => {
            stats.failures += 1;
            *best
        }
        Err(e) => return Err(with_cell(e, comp.cell)),
    };
    stats.solves += 1;
    stats.max_iterations = stats.max_iterations.max(sol.state.iterations);
    stats.back_projections += sol.state.back_projections;
    *warm = sol.state.a;
    Ok(sol.result)
}

const OCTANTS: [[usize; 3]; 8] = [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1], [1, 0, 0], [1, 0, 1], [1, 1, 0], [1, 1, 1]];

/// Full deformation gradient in octant `o` of cell `c` on the doubly-fine
/// grid: diagonal entries from the cell itself, each off-diagonal pair from
/// the edge touching the octant.
pub fn dfmg_assemble(f: &FieldF, grid: &SimGrid, c: usize, o: usize) -> Tensor2 {
    let x = grid.coords(c);
    let [o1, o2, o3] = OCTANTS[o].map(|v| v as isize);
    let e12 = grid.shifted(x, [o1, o2, 0]);
    let e13 = grid.shifted(x, [o1, 0, o3]);
    let e23 = grid.shifted(x, [0, o2, o3]);
    let d = f.data();
    let at = |cell: usize, m: usize| d[9 * cell + m];
    Tensor2::new(at(c, 0), at(e12, 1), at(e13, 2), at(e12, 3), at(c, 4), at(e23, 5), at(e13, 6), at(e23, 7), at(c, 8))
}

/// Averages doubly-fine values (`72` per cell, octant-major) back onto the
/// staggered positions.
fn dfmg_reduce(pdf: &[f64], grid: &SimGrid, out: &mut FieldF) {
    out.data_mut().par_chunks_mut(9).enumerate().for_each(|(xi, s)| {
        let x = grid.coords(xi);
        s.fill(0.0);
        for (o, off) in OCTANTS.iter().enumerate() {
            let [o1, o2, o3] = off.map(|v| v as isize);
            let v = |cell: usize, m: usize| pdf[72 * cell + 9 * o + m];
            let c12 = grid.shifted(x, [-o1, -o2, 0]);
            let c13 = grid.shifted(x, [-o1, 0, -o3]);
            let c23 = grid.shifted(x, [0, -o2, -o3]);
            for m in [0, 4, 8] {
                s[m] += v(xi, m);
            }
            s[1] += v(c12, 1);
            s[3] += v(c12, 3);
            s[2] += v(c13, 2);
            s[6] += v(c13, 6);
            s[5] += v(c23, 5);
            s[7] += v(c23, 7);
        }
        s.iter_mut().for_each(|v| *v *= 0.125);
    });
}

/// Constitutive evaluation over the grid.
pub struct Constitutive<'a> {
    micro: &'a Microstructure,
    mode: MaterialEval,
    opts: LaminateOptions,
}

impl<'a> Constitutive<'a> {
    pub fn new(micro: &'a Microstructure, mode: MaterialEval, opts: LaminateOptions) -> Self {
        Self { micro, mode, opts }
    }

    pub fn micro(&self) -> &Microstructure {
        self.micro
    }

    fn per_cell(&self) -> usize {
        match self.mode {
            MaterialEval::PerCell => 1,
            MaterialEval::Dfmg => 8,
        }
    }

    /// Number of material points, i.e. tangents stored.
    pub fn points(&self) -> usize {
        self.per_cell() * self.micro.grid.len()
    }

    /// Length of the jump-vector warm-start store.
    pub fn warm_len(&self) -> usize {
        self.per_cell() * self.micro.composites.len()
    }

    pub fn tangent_len(&self) -> usize {
        PACKED * self.points()
    }

    /// Evaluates `P(F)` and optionally the packed tangents.
    pub fn stress(&self, f: &FieldF, warm: &mut [Vec3], p: &mut FieldF, tangent: Option<&mut [f64]>) -> Result<LaminateStats> {
        assert_eq!(warm.len(), self.warm_len());
        match self.mode {
            MaterialEval::PerCell => self.stress_points(|c, _| f.get(c), p.data_mut(), warm, tangent),
            MaterialEval::Dfmg => {
                let grid = self.micro.grid;
                let mut pdf = vec![0.0; 72 * grid.len()];
                let stats = self.stress_points(|c, o| dfmg_assemble(f, &grid, c, o), &mut pdf, warm, tangent)?;
                dfmg_reduce(&pdf, &grid, p);
                Ok(stats)
            }
        }
    }

    /// Evaluates every material point; point `(c, o)` gets the deformation
    /// `fget(c, o)` and the material of cell `c`.
    fn stress_points(
        &self,
        fget: impl Fn(usize, usize) -> Tensor2 + Sync,
        out: &mut [f64],
        warm: &mut [Vec3],
        mut tangent: Option<&mut [f64]>,
    ) -> Result<LaminateStats> {
        let m = self.micro;
        let k = self.per_cell();
        match tangent.as_deref_mut() {
            Some(t) => out.par_chunks_mut(9 * k).zip(t.par_chunks_mut(PACKED * k)).enumerate().try_for_each(|(c, (ps, ts))| {
                let Some(mat) = m.material(m.cells[c]) else { return Ok(()) };
                for o in 0..k {
                    let (pp, aa) = eval_pure(mat, &fget(c, o), c, true)?;
                    store(&mut ps[9 * o..9 * o + 9], &pp);
                    pack_tangent(&aa.unwrap(), &mut ts[PACKED * o..PACKED * (o + 1)]);
                }
                Ok::<(), Error>(())
            })?,
            None => out.par_chunks_mut(9 * k).enumerate().try_for_each(|(c, ps)| {
                let Some(mat) = m.material(m.cells[c]) else { return Ok(()) };
                for o in 0..k {
                    let (pp, _) = eval_pure(mat, &fget(c, o), c, false)?;
                    store(&mut ps[9 * o..9 * o + 9], &pp);
                }
                Ok::<(), Error>(())
            })?,
        }
        let results: Vec<(LaminateStats, Vec<(Tensor2, Tensor4)>)> = warm
            .par_chunks_mut(k)
            .zip(m.composites.par_iter())
            .map(|(ws, comp)| {
                let mut st = LaminateStats::default();
                let mut res = Vec::with_capacity(k);
                for (o, w) in ws.iter_mut().enumerate() {
                    let r = solve_composite(m, comp, &fget(comp.cell, o), w, &self.opts, &mut st)?;
                    res.push((r.p_box, r.a_box));
                }
                Ok((st, res))
            })
            .collect::<Result<_>>()?;
        let mut stats = LaminateStats::default();
        for (comp, (st, res)) in m.composites.iter().zip(results) {
            stats.merge(&st);
            for (o, (pp, aa)) in res.iter().enumerate() {
                let slot = comp.cell * k + o;
                store(&mut out[9 * slot..9 * slot + 9], pp);
                if let Some(t) = tangent.as_deref_mut() {
                    pack_tangent(aa, &mut t[PACKED * slot..PACKED * (slot + 1)]);
                }
            }
        }
        Ok(stats)
    }

    /// `y = A : x` with the stored tangents (through the doubly-fine grid
    /// when enabled).
    pub fn apply_tangent(&self, tangent: &[f64], x: &FieldF, y: &mut FieldF) {
        match self.mode {
            MaterialEval::PerCell => {
                y.data_mut().par_chunks_mut(9).zip(x.data().par_chunks(9)).zip(tangent.par_chunks(PACKED)).for_each(|((ys, xs), t)| {
                    apply_packed(t, xs, ys);
                });
            }
            MaterialEval::Dfmg => {
                let grid = self.micro.grid;
                let mut ydf = vec![0.0; 72 * grid.len()];
                ydf.par_chunks_mut(72).zip(tangent.par_chunks(8 * PACKED)).enumerate().for_each(|(c, (ys, ts))| {
                    for o in 0..8 {
                        let xs = dfmg_assemble(x, &grid, c, o);
                        let mut xv = [0.0; 9];
                        store(&mut xv, &xs);
                        apply_packed(&ts[PACKED * o..PACKED * (o + 1)], &xv, &mut ys[9 * o..9 * o + 9]);
                    }
                });
                dfmg_reduce(&ydf, &grid, y);
            }
        }
    }
}

/// Stress on the staggered grid through the doubly-fine material grid.
pub fn dfmg_stress(micro: &Microstructure, f: &FieldF, warm: &mut [Vec3], opts: &LaminateOptions) -> Result<FieldF> {
    let c = Constitutive::new(micro, MaterialEval::Dfmg, opts.clone());
    let mut p = FieldF::zeros(f.dims());
    c.stress(f, warm, &mut p, None)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn packed_tangent_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Tensor4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let a = a + a.transpose();
        let mut t = [0.0; PACKED];
        pack_tangent(&a, &mut t);
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = [0.0; 9];
        apply_packed(&t, &x, &mut y);
        let yd = a * crate::tensor::Vec9::from_column_slice(&x);
        for r in 0..9 {
            assert!((y[r] - yd[r]).abs() < 1e-13);
        }
    }

    #[test]
    fn dfmg_constant_field_is_pointwise() {
        let grid = SimGrid::new([3, 2, 4], [1.0; 3]).unwrap();
        let mat = Material::neo_hookean(10.0, 0.3).unwrap();
        let micro = Microstructure::homogeneous(grid, mat);
        let fbar = Tensor2::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let f = FieldF::uniform(grid.dims, &fbar);
        let p = dfmg_stress(&micro, &f, &mut [], &LaminateOptions::default()).unwrap();
        let pe = mat.stress(&fbar).unwrap();
        for c in 0..grid.len() {
            assert!((p.get(c) - pe).norm() < 1e-13);
        }
    }
}
