//! Voxel microstructures, coarse graining to composite boxels and interface
//! normal detection.

mod coarsen;
mod facets;
mod generate;
pub mod io;
mod normals;

pub use coarsen::*;
pub use facets::*;
pub use generate::*;
pub use normals::*;

use crate::error::{Error, Result};

/// Binary fine-scale image; 1 marks the inclusion phase `+`, 0 the matrix.
/// Storage is C order with the last index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseImage {
    dims: [usize; 3],
    lengths: [f64; 3],
    data: Vec<u8>,
}

impl PhaseImage {
    pub fn new(dims: [usize; 3], lengths: [f64; 3], data: Vec<u8>) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::BadShapeSpec(format!("dimensions {dims:?} must be positive")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::BadShapeSpec(format!("lengths {lengths:?} must be positive")));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::Format(format!("expected {} voxels, got {}", dims.iter().product::<usize>(), data.len())));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Format("phase indicator must be 0 or 1".into()));
        }
        Ok(Self { dims, lengths, data })
    }

    pub fn zeros(dims: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        Self::new(dims, lengths, vec![0; dims.iter().product()])
    }

    pub fn from_fn(dims: [usize; 3], lengths: [f64; 3], f: impl Fn([f64; 3]) -> bool) -> Result<Self> {
        let mut img = Self::zeros(dims, lengths)?;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let idx = img.index(i, j, k);
                    img.data[idx] = f(img.voxel_center(i, j, k)) as u8;
                }
            }
        }
        Ok(img)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.lengths[a] / self.dims[a] as f64)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.data[self.index(i, j, k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [(i as f64 + 0.5) * h[0], (j as f64 + 0.5) * h[1], (k as f64 + 0.5) * h[2]]
    }

    pub fn inclusion_count(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn inclusion_fraction(&self) -> f64 {
        self.inclusion_count() as f64 / self.data.len() as f64
    }

    /// Image reflected along `axis` (index `i ↦ n − 1 − i`).
    pub fn mirrored(&self, axis: usize) -> Self {
        let mut out = self.clone();
        let [n1, n2, n3] = self.dims;
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let mut s = [i, j, k];
                    s[axis] = self.dims[axis] - 1 - s[axis];
                    let idx = self.index(i, j, k);
                    out.data[idx] = self.get(s[0], s[1], s[2]);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(PhaseImage::new([0, 1, 1], [1.0; 3], vec![]).is_err());
        assert!(PhaseImage::new([1, 1, 1], [0.0, 1.0, 1.0], vec![0]).is_err());
        assert!(PhaseImage::new([1, 1, 2], [1.0; 3], vec![0]).is_err());
        assert!(PhaseImage::new([1, 1, 1], [1.0; 3], vec![2]).is_err());
        let img = PhaseImage::new([1, 2, 3], [1.0, 2.0, 3.0], vec![0, 1, 0, 0, 1, 1]).unwrap();
        assert_eq!(img.get(0, 0, 2), 0);
        assert_eq!(img.get(0, 1, 2), 1);
        assert_eq!(img.inclusion_count(), 3);
        assert_eq!(img.spacing(), [1.0, 1.0, 1.0]);
        assert_eq!(img.mirrored(2).data(), &[0, 1, 0, 1, 1, 0]);
    }
}
