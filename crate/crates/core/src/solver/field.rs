use rayon::prelude::*;

use crate::tensor::Tensor2;

/// Per-cell fields are summed in fixed-size blocks so that reductions do not
/// depend on the thread count.
const BLOCK: usize = 4096;

/// Nine-component tensor field, cell-major; component `(i, J)` of cell `c`
/// sits at `9c + 3i + J`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldF {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl FieldF {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, data: vec![0.0; 9 * dims.iter().product::<usize>()] }
    }

    pub fn uniform(dims: [usize; 3], t: &Tensor2) -> Self {
        let mut f = Self::zeros(dims);
        f.fill(t);
        f
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Self {
        assert_eq!(data.len(), 9 * dims.iter().product::<usize>());
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cells(&self) -> usize {
        self.data.len() / 9
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize) -> Tensor2 {
        tensor_at(&self.data[9 * c..9 * c + 9])
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: &Tensor2) {
        store(&mut self.data[9 * c..9 * c + 9], t);
    }

    pub fn fill(&mut self, t: &Tensor2) {
        self.data.par_chunks_mut(9).for_each(|s| store(s, t));
    }

    /// Copies component `(i, J)` into `out`.
    pub fn component(&self, i: usize, j: usize, out: &mut [f64]) {
        let m = 3 * i + j;
        out.par_iter_mut().zip(self.data.par_chunks(9)).for_each(|(o, s)| *o = s[m]);
    }

    pub fn set_component(&mut self, i: usize, j: usize, src: &[f64]) {
        let m = 3 * i + j;
        self.data.par_chunks_mut(9).zip(src.par_iter()).for_each(|(s, v)| s[m] = *v);
    }

    pub fn mean(&self) -> Tensor2 {
        let partial: Vec<[f64; 9]> = self
            .data
            .par_chunks(9 * BLOCK)
            .map(|b| {
                let mut acc = [0.0; 9];
                for s in b.chunks(9) {
                    for m in 0..9 {
                        acc[m] += s[m];
                    }
                }
                acc
            })
            .collect();
        let mut acc = [0.0; 9];
        for p in partial {
            for m in 0..9 {
                acc[m] += p[m];
            }
        }
        tensor_at(&acc) / self.cells() as f64
    }

    /// Adds `t` to every cell.
    pub fn shift(&mut self, t: &Tensor2) {
        let v: Vec<f64> = (0..9).map(|m| t[(m / 3, m % 3)]).collect();
        self.data.par_chunks_mut(9).for_each(|s| {
            for m in 0..9 {
                s[m] += v[m];
            }
        });
    }

    pub fn set_mean(&mut self, t: &Tensor2) {
        let d = t - self.mean();
        self.shift(&d);
    }

    pub fn dot(&self, other: &Self) -> f64 {
        blocked_sum(self.data.par_chunks(9 * BLOCK).zip(other.data.par_chunks(9 * BLOCK)).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum()))
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    /// Root mean square of the cellwise Frobenius norm.
    pub fn rms(&self) -> f64 {
        (self.norm_squared() / self.cells() as f64).sqrt()
    }

    /// `self += s · x`.
    pub fn axpy(&mut self, s: f64, x: &Self) {
        self.data.par_iter_mut().zip(x.data.par_iter()).for_each(|(a, b)| *a += s * b);
    }

    /// `self = x + s · self`.
    pub fn xpay(&mut self, x: &Self, s: f64) {
        self.data.par_iter_mut().zip(x.data.par_iter()).for_each(|(a, b)| *a = b + s * *a);
    }

    pub fn scale(&mut self, s: f64) {
        self.data.par_iter_mut().for_each(|a| *a *= s);
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.data.copy_from_slice(&other.data);
    }

    /// Smallest `det F` over all cells.
    pub fn min_det(&self) -> f64 {
        self.data.par_chunks(9).map(|s| crate::tensor::det3(&tensor_at(s))).reduce(|| f64::INFINITY, f64::min)
    }
}

fn blocked_sum(it: impl IndexedParallelIterator<Item = f64>) -> f64 {
    let partial: Vec<f64> = it.collect();
    partial.iter().sum()
}

#[inline]
pub(crate) fn tensor_at(s: &[f64]) -> Tensor2 {
    Tensor2::new(s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8])
}

#[inline]
pub(crate) fn store(s: &mut [f64], t: &Tensor2) {
    for m in 0..9 {
        s[m] = t[(m / 3, m % 3)];
    }
}
