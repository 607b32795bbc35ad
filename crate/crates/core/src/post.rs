//! Recovery of phase fields inside composite boxels, phase averages,
//! interface tractions, error norms and plot-ready exports.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Facet;
use crate::laminate::{finite_strain_solve, ComboMeta, LaminateOptions, LaminateResult};
use crate::solver::{with_cell, CellKind, FieldF, LaminateStats, Microstructure};
use crate::tensor::{det3, inv3, Tensor2, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredComposite {
    pub cell: usize,
    pub meta: ComboMeta,
    pub result: LaminateResult,
    pub a: Vec3,
    pub iterations: usize,
}

/// Laminate solutions of every composite cell, in the order of
/// [`Microstructure::composites`].
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub composites: Vec<RecoveredComposite>,
    pub stats: LaminateStats,
}

impl Recovery {
    pub fn find(&self, cell: usize) -> Option<&RecoveredComposite> {
        self.composites.binary_search_by_key(&cell, |r| r.cell).ok().map(|i| &self.composites[i])
    }
}

/// Re-solves the laminate problem of every composite cell at the cell
/// gradient of `f`, starting from the stored jump vectors. `warm` holds one
/// entry per composite, or eight (doubly-fine evaluation), in which case the
/// first octant's jump is used as start.
pub fn recover_phase_fields(micro: &Microstructure, f: &FieldF, warm: &[Vec3], opts: &LaminateOptions) -> Result<Recovery> {
    let comps = micro.composites();
    let stride = if comps.is_empty() { 1 } else { warm.len() / comps.len() };
    if !comps.is_empty() && (stride == 0 || warm.len() != stride * comps.len()) {
        return Err(Error::ConfigInvalid(format!("{} warm starts for {} composite cells", warm.len(), comps.len())));
    }
    let composites = comps
        .par_iter()
        .enumerate()
        .map(|(i, comp)| {
            let sol = finite_strain_solve(&f.get(comp.cell), micro.plus(), micro.minus(), &comp.meta, &warm[i * stride], opts).map_err(|e| {
                if matches!(e, Error::LaminateNoConvergence(_)) {
                    log::warn!("laminate recovery failed in cell {}", comp.cell);
                }
                with_cell(e, comp.cell)
            })?;
            Ok(RecoveredComposite { cell: comp.cell, meta: comp.meta, result: sol.result, a: sol.state.a, iterations: sol.state.iterations })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = LaminateStats::default();
    for r in &composites {
        stats.solves += 1;
        stats.max_iterations = stats.max_iterations.max(r.iterations);
    }
    Ok(Recovery { composites, stats })
}

/// Volume averages of the first Piola-Kirchhoff stress over each phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAverages {
    pub p_bar: Tensor2,
    /// Absent when the phase has zero volume.
    pub p_plus: Option<Tensor2>,
    pub p_minus: Option<Tensor2>,
    pub c_plus: f64,
    pub c_minus: f64,
}

/// Composite cells are split by `c±` using the recovered phase stresses;
/// pure cells contribute `p` at the cell. `p_bar` is the recombination
/// `c+ P̄+ + c− P̄−`.
pub fn phase_averages(micro: &Microstructure, p: &FieldF, recovery: &Recovery) -> PhaseAverages {
    let n = micro.cells().len() as f64;
    let (mut sp, mut sm) = (Tensor2::zeros(), Tensor2::zeros());
    let (mut vp, mut vm) = (0.0, 0.0);
    for (c, kind) in micro.cells().iter().enumerate() {
        match kind {
            CellKind::Plus => {
                sp += p.get(c);
                vp += 1.0;
            }
            CellKind::Minus => {
                sm += p.get(c);
                vm += 1.0;
            }
            CellKind::Composite(_) => {}
        }
    }
    for r in &recovery.composites {
        let (cp, cm) = (r.meta.c_plus(), r.meta.c_minus());
        sp += r.result.p_plus * cp;
        sm += r.result.p_minus * cm;
        vp += cp;
        vm += cm;
    }
    let (c_plus, c_minus) = (vp / n, vm / n);
    PhaseAverages {
        p_bar: (sp + sm) / n,
        p_plus: (vp > 0.0).then(|| sp / vp),
        p_minus: (vm > 0.0).then(|| sm / vm),
        c_plus,
        c_minus,
    }
}

/// Deformation gradient used to push interface quantities forward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceGradient {
    Plus,
    Minus,
    #[default]
    Midpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceSample {
    pub boxel: usize,
    pub centroid: Vec3,
    pub normal: Vec3,
    /// `P+ N`, force per reference area.
    pub traction: Vec3,
    /// `P− N`; equals `traction` up to the laminate tolerance.
    pub traction_minus: Vec3,
    /// Force per deformed area for the plus, minus and midpoint gradients.
    pub spatial: [Vec3; 3],
    pub area: f64,
    /// Deformed facet area for the same three gradients.
    pub spatial_area: [f64; 3],
}

impl InterfaceSample {
    pub fn spatial_traction(&self, which: InterfaceGradient) -> Vec3 {
        self.spatial[which as usize]
    }

    pub fn deformed_area(&self, which: InterfaceGradient) -> f64 {
        self.spatial_area[which as usize]
    }
}

/// Nanson's relation: returns `(t, da/dA)` with `t da = P N dA`.
fn push_forward(f: &Tensor2, pn: &Vec3, n: &Vec3) -> Result<(Vec3, f64)> {
    let cof = inv3(f)?.transpose() * det3(f);
    let ratio = (cof * n).norm();
    Ok((pn / ratio, ratio))
}

/// One sample per facet whose boxel was recovered.
pub fn interface_tractions(recovery: &Recovery, facets: &[Facet]) -> Result<Vec<InterfaceSample>> {
    facets
        .iter()
        .filter_map(|fc| recovery.find(fc.boxel).map(|r| (fc, r)))
        .map(|(fc, r)| {
            let n = r.meta.normal();
            let res = &r.result;
            let t = res.p_plus * n;
            let mid = (res.f_plus + res.f_minus) * 0.5;
            let mut spatial = [Vec3::zeros(); 3];
            let mut spatial_area = [0.0; 3];
            for (k, f) in [res.f_plus, res.f_minus, mid].iter().enumerate() {
                let (s, ratio) = push_forward(f, &t, &n).map_err(|e| with_cell(e, r.cell))?;
                spatial[k] = s;
                spatial_area[k] = fc.area * ratio;
            }
            Ok(InterfaceSample { boxel: r.cell, centroid: fc.centroid, normal: n, traction: t, traction_minus: res.p_minus * n, spatial, area: fc.area, spatial_area })
        })
        .collect()
}

/// `‖p − p_ref‖_F / ‖p_ref‖_F`.
pub fn error_norm(p: &Tensor2, p_ref: &Tensor2) -> Result<f64> {
    let r = p_ref.norm();
    if r == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((p - p_ref).norm() / r)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::IoFailure(format!("{}: {e}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAverageRecord {
    pub phase: String,
    pub fraction: f64,
    pub xx: Option<f64>,
    pub xy: Option<f64>,
    pub xz: Option<f64>,
    pub yx: Option<f64>,
    pub yy: Option<f64>,
    pub yz: Option<f64>,
    pub zx: Option<f64>,
    pub zy: Option<f64>,
    pub zz: Option<f64>,
}

impl PhaseAverageRecord {
    fn new(phase: &str, fraction: f64, t: Option<&Tensor2>) -> Self {
        let g = |i, j| t.map(|t| t[(i, j)]);
        Self {
            phase: phase.into(),
            fraction,
            xx: g(0, 0),
            xy: g(0, 1),
            xz: g(0, 2),
            yx: g(1, 0),
            yy: g(1, 1),
            yz: g(1, 2),
            zx: g(2, 0),
            zy: g(2, 1),
            zz: g(2, 2),
        }
    }

    pub fn tensor(&self) -> Option<Tensor2> {
        Some(Tensor2::new(self.xx?, self.xy?, self.xz?, self.yx?, self.yy?, self.yz?, self.zx?, self.zy?, self.zz?))
    }
}

impl PhaseAverages {
    /// Rows `total`, `plus`, `minus`; an absent phase has empty components.
    pub fn records(&self) -> Vec<PhaseAverageRecord> {
        vec![
            PhaseAverageRecord::new("total", 1.0, Some(&self.p_bar)),
            PhaseAverageRecord::new("plus", self.c_plus, self.p_plus.as_ref()),
            PhaseAverageRecord::new("minus", self.c_minus, self.p_minus.as_ref()),
        ]
    }
}

/// One row of the interface traction table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TractionRecord {
    pub boxel: usize,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub t_norm: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub s_norm: f64,
    pub area: f64,
    pub spatial_area: f64,
}

impl TractionRecord {
    pub fn new(s: &InterfaceSample, which: InterfaceGradient) -> Self {
        let sp = s.spatial_traction(which);
        Self {
            boxel: s.boxel,
            cx: s.centroid.x,
            cy: s.centroid.y,
            cz: s.centroid.z,
            nx: s.normal.x,
            ny: s.normal.y,
            nz: s.normal.z,
            tx: s.traction.x,
            ty: s.traction.y,
            tz: s.traction.z,
            t_norm: s.traction.norm(),
            sx: sp.x,
            sy: sp.y,
            sz: sp.z,
            s_norm: sp.norm(),
            area: s.area,
            spatial_area: s.deformed_area(which),
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::UpstreamArtifactMissing(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))).collect()
}

/// Header of a raw plane dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceHeader {
    /// Dimensions of the full grid.
    pub grid: [usize; 3],
    pub axis: usize,
    pub index: usize,
    /// Plane dimensions, the two remaining axes in increasing order.
    pub dims: [usize; 2],
    pub dtype: String,
    pub order: String,
    pub quantity: String,
    pub data: String,
}

/// Plane `axis = index` of a scalar grid field stored in C order.
pub fn extract_slice(values: &[f64], dims: [usize; 3], axis: usize, index: usize) -> Result<(Vec<f64>, [usize; 2])> {
    if axis > 2 {
        return Err(Error::IoFailure(format!("slice axis {axis} out of range")));
    }
    if index >= dims[axis] {
        return Err(Error::IoFailure(format!("slice index {index} out of range 0..{} along axis {axis}", dims[axis])));
    }
    if values.len() != dims.iter().product::<usize>() {
        return Err(Error::IoFailure(format!("{} values for a {dims:?} grid", values.len())));
    }
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut out = Vec::with_capacity(dims[a] * dims[b]);
    let mut c = [0; 3];
    c[axis] = index;
    for u in 0..dims[a] {
        for v in 0..dims[b] {
            c[a] = u;
            c[b] = v;
            out.push(values[(c[0] * dims[1] + c[1]) * dims[2] + c[2]]);
        }
    }
    Ok((out, [dims[a], dims[b]]))
}

/// Writes the plane as little-endian f64 next to a JSON header at `header`.
pub fn write_slice(values: &[f64], dims: [usize; 3], axis: usize, index: usize, quantity: &str, header: &Path) -> Result<SliceHeader> {
    let (plane, pd) = extract_slice(values, dims, axis, index)?;
    let stem = header.file_stem().and_then(|s| s.to_str()).unwrap_or("slice");
    let raw = header.with_file_name(format!("{stem}.raw"));
    let h = SliceHeader {
        grid: dims,
        axis,
        index,
        dims: pd,
        dtype: "f64le".into(),
        order: "C, last fastest".into(),
        quantity: quantity.into(),
        data: raw.file_name().unwrap().to_string_lossy().into_owned(),
    };
    let bytes: Vec<u8> = plane.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&raw, bytes).map_err(|e| io_err(&raw, e))?;
    fs::write(header, serde_json::to_string_pretty(&h)?).map_err(|e| io_err(header, e))?;
    Ok(h)
}

pub fn read_slice(header: &Path) -> Result<(SliceHeader, Vec<f64>)> {
    if !header.exists() {
        return Err(Error::UpstreamArtifactMissing(header.to_path_buf()));
    }
    let h: SliceHeader = serde_json::from_slice(&fs::read(header)?)?;
    let raw = header.with_file_name(&h.data);
    let v = crate::imaging::io::read_f64s(&raw)?;
    if v.len() != h.dims[0] * h.dims[1] {
        return Err(Error::Format(format!("{} holds {} values, header says {:?}", raw.display(), v.len(), h.dims)));
    }
    Ok((h, v))
}

/// Component `(i, J)` of a tensor field as a scalar grid field.
pub fn field_component(f: &FieldF, i: usize, j: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.cells()];
    f.component(i, j, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laminate::ComboMeta;
    use crate::material::Material;
    use crate::solver::{Composite, SimGrid};

    fn laminate_micro() -> Microstructure {
        let grid = SimGrid::new([2, 1, 1], [1.0; 3]).unwrap();
        let meta = ComboMeta::new(Vec3::new(1.0, 1.0, 0.0), 0.4).unwrap();
        Microstructure::new(
            grid,
            Material::neo_hookean(10.0, 0.3).unwrap(),
            Material::neo_hookean(1.0, 0.0).unwrap(),
            vec![CellKind::Plus, CellKind::Composite(0)],
            vec![Composite { cell: 1, meta }],
        )
        .unwrap()
    }

    #[test]
    fn partition_identity_and_absent_phase() {
        let micro = laminate_micro();
        let mut f = FieldF::uniform([2, 1, 1], &Tensor2::identity());
        f.set(1, &Tensor2::new(1.1, 0.3, 0.0, 0.05, 0.95, 0.0, 0.0, 0.0, 1.02));
        let opts = LaminateOptions::default();
        let rec = recover_phase_fields(&micro, &f, &[Vec3::zeros()], &opts).unwrap();
        let mut p = FieldF::zeros([2, 1, 1]);
        p.set(0, &micro.plus().stress(&f.get(0)).unwrap());
        p.set(1, &rec.composites[0].result.p_box);
        let avg = phase_averages(&micro, &p, &rec);
        let back = avg.p_plus.unwrap() * avg.c_plus + avg.p_minus.unwrap() * avg.c_minus;
        assert!((back - avg.p_bar).norm() <= 1e-12 * avg.p_bar.norm());
        assert!((avg.p_bar - p.mean()).norm() <= 1e-9 * avg.p_bar.norm());
        assert!((avg.c_plus - 0.7).abs() < 1e-15);

        let again = recover_phase_fields(&micro, &f, &[rec.composites[0].a], &opts).unwrap();
        assert!(again.stats.max_iterations <= 1);

        let grid = SimGrid::new([2, 2, 2], [1.0; 3]).unwrap();
        let hom = Microstructure::homogeneous(grid, Material::neo_hookean(1.0, 0.2).unwrap());
        let f = FieldF::uniform(grid.dims, &Tensor2::new(1.0, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0));
        let mut p = FieldF::zeros(grid.dims);
        p.fill(&hom.minus().stress(&f.get(0)).unwrap());
        let rec = recover_phase_fields(&hom, &f, &[], &opts).unwrap();
        let avg = phase_averages(&hom, &p, &rec);
        assert!(avg.p_plus.is_none());
        assert_eq!(avg.p_minus, Some(avg.p_bar));
    }

    #[test]
    fn error_norm_cases() {
        let r = Tensor2::new(0.0007, 0.3719, 0.0, 0.3662, 0.0114, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(error_norm(&r, &r).unwrap(), 0.0);
        let p = r * 1.01;
        assert!((error_norm(&(p * 2.0), &(r * 2.0)).unwrap() - error_norm(&p, &r).unwrap()).abs() < 1e-15);
        assert!(matches!(error_norm(&r, &Tensor2::zeros()), Err(Error::ZeroReference)));
    }

    #[test]
    fn slices_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = [3, 4, 5];
        let vals: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let (plane, pd) = extract_slice(&vals, dims, 1, 2).unwrap();
        assert_eq!(pd, [3, 5]);
        assert_eq!(plane[0], 10.0);
        assert_eq!(plane[5], 30.0);
        assert!(matches!(extract_slice(&vals, dims, 2, 5), Err(Error::IoFailure(_))));

        let c = vec![2.5; 60];
        let h = dir.path().join("p12.json");
        write_slice(&c, dims, 0, 1, "P12", &h).unwrap();
        let (hdr, v) = read_slice(&h).unwrap();
        assert_eq!(hdr.dims, [4, 5]);
        assert!(v.iter().all(|&x| x == 2.5));

        let avg = PhaseAverages { p_bar: Tensor2::identity(), p_plus: None, p_minus: Some(Tensor2::identity()), c_plus: 0.0, c_minus: 1.0 };
        let path = dir.path().join("avg.csv");
        write_csv(&path, &avg.records()).unwrap();
        let back: Vec<PhaseAverageRecord> = read_csv(&path).unwrap();
        assert_eq!(back, avg.records());
        assert_eq!(back[0].tensor(), Some(Tensor2::identity()));
        assert_eq!(back[1].tensor(), None);
    }
}
