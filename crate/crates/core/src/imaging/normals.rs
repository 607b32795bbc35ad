use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoxelKind, ComboGrid, NormalStatus, PhaseImage};
use crate::fft::Fft3;
use crate::tensor::{sym_eig3, Tensor2, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalEstimate {
    pub normal: Vec3,
    pub status: NormalStatus,
}

impl NormalEstimate {
    const UNSET: Self = Self { normal: Vec3::new(0.0, 0.0, 0.0), status: NormalStatus::Unset };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMethod {
    Barycenter,
    #[default]
    SecondMoment,
}

/// Reference point for the second-moment tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentCentering {
    #[default]
    WeightedCentroid,
    BoxelCenter,
}

/// Interface indicator per fine voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

/// Iterates the fine voxels of boxel `b`, yielding (flat index, local center).
fn boxel_voxels<'a>(img: &'a PhaseImage, grid: &'a ComboGrid, b: usize) -> impl Iterator<Item = (usize, Vec3)> + 'a {
    let c = grid.coords(b);
    let f = grid.factors;
    let h = img.spacing();
    (0..f[0]).flat_map(move |a| {
        (0..f[1]).flat_map(move |bb| {
            (0..f[2]).map(move |cc| {
                let (i, j, k) = (c[0] * f[0] + a, c[1] * f[1] + bb, c[2] * f[2] + cc);
                let x = Vec3::new((a as f64 + 0.5) * h[0], (bb as f64 + 0.5) * h[1], (cc as f64 + 0.5) * h[2]);
                (img.index(i, j, k), x)
            })
        })
    })
}

fn barycenter_one(img: &PhaseImage, grid: &ComboGrid, b: usize) -> NormalEstimate {
    let (mut sp, mut sm) = (Vec3::zeros(), Vec3::zeros());
    let (mut np, mut nm) = (0usize, 0usize);
    for (idx, x) in boxel_voxels(img, grid, b) {
        if img.data()[idx] == 1 {
            sp += x;
            np += 1;
        } else {
            sm += x;
            nm += 1;
        }
    }
    let d = sm / nm as f64 - sp / np as f64;
    let size = grid.boxel_size();
    let scale = Vec3::from(size).norm();
    if d.norm() < 1e-12 * scale {
        let axis = (0..3).fold(0, |best, a| if size[a] > size[best] { a } else { best });
        let mut n = Vec3::zeros();
        n[axis] = 1.0;
        return NormalEstimate { normal: n, status: NormalStatus::DegenerateBarycenters };
    }
    NormalEstimate { normal: d.normalize(), status: NormalStatus::Ok }
}

/// Normals along the line joining the phase barycenters of each composite
/// boxel, pointing from `+` to `−`.
pub fn normal_barycenter(img: &PhaseImage, grid: &ComboGrid) -> Vec<NormalEstimate> {
    (0..grid.len())
        .into_par_iter()
        .map(|b| if grid.kinds[b] == BoxelKind::Composite { barycenter_one(img, grid, b) } else { NormalEstimate::UNSET })
        .collect()
}

fn axis_weights(h: [f64; 3]) -> [f64; 3] {
    [h[1] * h[2] / h[0], h[0] * h[2] / h[1], h[0] * h[1] / h[2]]
}

/// `|S ∗ χ|` with the anisotropically weighted 7-point Laplacian stencil,
/// periodic.
pub fn laplace_weights(img: &PhaseImage) -> WeightField {
    let [n1, n2, n3] = img.dims();
    let r = axis_weights(img.spacing());
    let chi = |i: usize, j: usize, k: usize| img.get(i, j, k) as f64;
    let data = (0..img.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx / (n2 * n3), (idx / n3) % n2, idx % n3);
            let c = 2.0 * chi(i, j, k);
            let s = r[0] * (chi((i + n1 - 1) % n1, j, k) + chi((i + 1) % n1, j, k) - c)
                + r[1] * (chi(i, (j + n2 - 1) % n2, k) + chi(i, (j + 1) % n2, k) - c)
                + r[2] * (chi(i, j, (k + n3 - 1) % n3) + chi(i, j, (k + 1) % n3) - c);
            s.abs()
        })
        .collect();
    WeightField { dims: img.dims(), data }
}

/// Same convolution as [`laplace_weights`], evaluated in Fourier space.
pub fn laplace_weights_fft(img: &PhaseImage) -> WeightField {
    let dims = img.dims();
    let r = axis_weights(img.spacing());
    let fft = Fft3::new(dims);
    let chi: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
    let mut spec = fft.alloc_spectrum();
    fft.forward(&chi, &mut spec);
    let m3 = fft.m3();
    let sym = |a: usize, k: usize| r[a] * (2.0 * (2.0 * std::f64::consts::PI * k as f64 / dims[a] as f64).cos() - 2.0);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..m3 {
                spec[(i * dims[1] + j) * m3 + k] *= sym(0, i) + sym(1, j) + sym(2, k);
            }
        }
    }
    let mut out = vec![0.0; img.len()];
    fft.inverse(&mut spec, &mut out);
    WeightField { dims, data: out.into_iter().map(f64::abs).collect() }
}

fn second_moment_one(
    img: &PhaseImage,
    grid: &ComboGrid,
    w: &WeightField,
    b: usize,
    centering: MomentCentering,
) -> NormalEstimate {
    let reference = barycenter_one(img, grid, b);
    let pts: Vec<(f64, Vec3)> = boxel_voxels(img, grid, b).filter(|&(idx, _)| w.data[idx] > 1e-12).map(|(idx, x)| (w.data[idx], x)).collect();
    if pts.len() < 3 {
        return NormalEstimate { normal: reference.normal, status: NormalStatus::TooFewInterfaceVoxels };
    }
    let center = match centering {
        MomentCentering::WeightedCentroid => {
            let sw: f64 = pts.iter().map(|p| p.0).sum();
            pts.iter().fold(Vec3::zeros(), |acc, (wi, x)| acc + x * *wi) / sw
        }
        MomentCentering::BoxelCenter => {
            let s = grid.boxel_size();
            Vec3::new(0.5 * s[0], 0.5 * s[1], 0.5 * s[2])
        }
    };
    let mut m = Tensor2::zeros();
    for (wi, x) in &pts {
        let d = x - center;
        m += d * d.transpose() * *wi;
    }
    // Axes that are a single voxel thick carry no orientation information:
    // push them to the top of the spectrum.
    let big = 1.0 + 2.0 * m.trace();
    for a in 0..3 {
        if grid.factors[a] == 1 {
            for c in 0..3 {
                m[(a, c)] = 0.0;
                m[(c, a)] = 0.0;
            }
            m[(a, a)] = big;
        }
    }
    let Ok((_, vecs)) = sym_eig3(&m) else {
        return NormalEstimate { normal: reference.normal, status: NormalStatus::TooFewInterfaceVoxels };
    };
    let mut n: Vec3 = vecs.column(0).into_owned();
    if n.dot(&reference.normal) < 0.0 {
        n = -n;
    }
    NormalEstimate { normal: n.normalize(), status: NormalStatus::Ok }
}

/// Smallest-eigenvalue direction of the weighted second moment of the
/// interface voxels in each composite boxel, oriented out of phase `+`.
pub fn normal_second_moment(img: &PhaseImage, grid: &ComboGrid, w: &WeightField, centering: MomentCentering) -> Vec<NormalEstimate> {
    (0..grid.len())
        .into_par_iter()
        .map(|b| {
            if grid.kinds[b] == BoxelKind::Composite {
                second_moment_one(img, grid, w, b, centering)
            } else {
                NormalEstimate::UNSET
            }
        })
        .collect()
}

/// Computes normals with `method` and stores them in `grid`.
pub fn assign_normals(img: &PhaseImage, grid: &mut ComboGrid, method: NormalMethod, centering: MomentCentering) {
    let est = match method {
        NormalMethod::Barycenter => normal_barycenter(img, grid),
        NormalMethod::SecondMoment => normal_second_moment(img, grid, &laplace_weights(img), centering),
    };
    for (b, e) in est.into_iter().enumerate() {
        grid.normals[b] = e.normal;
        grid.status[b] = e.status;
    }
}
