use serde::{Deserialize, Serialize};

use super::PhaseImage;
use crate::error::{Error, Result};
use crate::tensor::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum BoxelKind {
    PureMatrix = 0,
    PureInclusion = 1,
    Composite = 2,
}

impl BoxelKind {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(BoxelKind::PureMatrix),
            1 => Ok(BoxelKind::PureInclusion),
            2 => Ok(BoxelKind::Composite),
            _ => Err(Error::Format(format!("unknown boxel kind {v}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalStatus {
    Unset,
    Ok,
    DegenerateBarycenters,
    TooFewInterfaceVoxels,
}

/// Coarse grid of boxels, each made of `f1 × f2 × f3` fine voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct ComboGrid {
    pub dims: [usize; 3],
    pub factors: [usize; 3],
    pub lengths: [f64; 3],
    pub kinds: Vec<BoxelKind>,
    /// Inclusion voxel count per boxel.
    pub counts: Vec<u32>,
    pub c_plus: Vec<f64>,
    /// Unit normal out of phase `+`; zero until normals are assigned.
    pub normals: Vec<Vec3>,
    pub status: Vec<NormalStatus>,
}

impl ComboGrid {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn voxels_per_boxel(&self) -> usize {
        self.factors.iter().product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        [idx / (self.dims[1] * self.dims[2]), (idx / self.dims[2]) % self.dims[1], idx % self.dims[2]]
    }

    /// Physical boxel edge lengths.
    pub fn boxel_size(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.lengths[a] / self.dims[a] as f64)
    }

    /// Lower corner of boxel `idx` in physical coordinates.
    pub fn boxel_origin(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let h = self.boxel_size();
        Vec3::new(c[0] as f64 * h[0], c[1] as f64 * h[1], c[2] as f64 * h[2])
    }

    pub fn boxel_center(&self, idx: usize) -> Vec3 {
        let h = self.boxel_size();
        self.boxel_origin(idx) + Vec3::new(0.5 * h[0], 0.5 * h[1], 0.5 * h[2])
    }

    pub fn composite_count(&self) -> usize {
        self.kinds.iter().filter(|&&k| k == BoxelKind::Composite).count()
    }

    pub fn composite_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&b| self.kinds[b] == BoxelKind::Composite).collect()
    }

    pub fn inclusion_count(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Global inclusion fraction from the integer counts.
    pub fn inclusion_fraction(&self) -> f64 {
        self.inclusion_count() as f64 / (self.len() * self.voxels_per_boxel()) as f64
    }
}

/// Merges blocks of `factors` fine voxels into boxels.
pub fn coarsen(img: &PhaseImage, factors: [usize; 3]) -> Result<ComboGrid> {
    let n = img.dims();
    for a in 0..3 {
        if factors[a] == 0 || n[a] % factors[a] != 0 {
            return Err(Error::NonDividingFactor { axis: a, n: n[a], factor: factors[a] });
        }
    }
    let dims = [n[0] / factors[0], n[1] / factors[1], n[2] / factors[2]];
    let nb = dims.iter().product::<usize>();
    let mut counts = vec![0u32; nb];
    for i in 0..n[0] {
        for j in 0..n[1] {
            let row = img.index(i, j, 0);
            let base = (i / factors[0] * dims[1] + j / factors[1]) * dims[2];
            for (k, &v) in img.data()[row..row + n[2]].iter().enumerate() {
                counts[base + k / factors[2]] += v as u32;
            }
        }
    }
    let vol = factors.iter().product::<usize>() as u32;
    let kinds = counts
        .iter()
        .map(|&c| match c {
            0 => BoxelKind::PureMatrix,
            c if c == vol => BoxelKind::PureInclusion,
            _ => BoxelKind::Composite,
        })
        .collect();
    let c_plus = counts.iter().map(|&c| c as f64 / vol as f64).collect();
    Ok(ComboGrid {
        dims,
        factors,
        lengths: img.lengths(),
        kinds,
        counts,
        c_plus,
        normals: vec![Vec3::zeros(); nb],
        status: vec![NormalStatus::Unset; nb],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_kinds() {
        let img = PhaseImage::from_fn([4, 2, 2], [1.0; 3], |x| x[0] < 0.3).unwrap();
        let g = coarsen(&img, [2, 2, 2]).unwrap();
        assert_eq!(g.dims, [2, 1, 1]);
        assert_eq!(g.counts, vec![4, 0]);
        assert_eq!(g.kinds, vec![BoxelKind::Composite, BoxelKind::PureMatrix]);
        assert_eq!(g.c_plus[0], 0.5);
        assert_eq!(g.inclusion_fraction(), img.inclusion_fraction());
        assert!(matches!(coarsen(&img, [3, 1, 1]), Err(Error::NonDividingFactor { axis: 0, .. })));
        let empty = PhaseImage::zeros([4, 4, 4], [1.0; 3]).unwrap();
        assert!(coarsen(&empty, [2, 2, 2]).unwrap().kinds.iter().all(|&k| k == BoxelKind::PureMatrix));
    }
}
