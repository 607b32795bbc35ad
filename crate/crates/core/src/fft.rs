//! Real-to-complex 3D FFT on C-ordered arrays (last index fastest).
//!
//! The half spectrum has shape `(n1, n2, n3/2 + 1)`. The inverse is scaled so
//! that `inverse(forward(x)) == x`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    dims: [usize; 3],
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Self {
            dims,
            r2c: rp.plan_fft_forward(dims[2]),
            c2r: rp.plan_fft_inverse(dims[2]),
            fwd: [cp.plan_fft_forward(dims[0]), cp.plan_fft_forward(dims[1])],
            inv: [cp.plan_fft_inverse(dims[0]), cp.plan_fft_inverse(dims[1])],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Length of the last spectral axis.
    pub fn m3(&self) -> usize {
        self.dims[2] / 2 + 1
    }

    pub fn spectrum_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.m3()
    }

    pub fn alloc_spectrum(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.spectrum_len()]
    }

    pub fn forward(&self, input: &[f64], out: &mut [Complex64]) {
        let [n1, n2, n3] = self.dims;
        let m3 = self.m3();
        assert_eq!(input.len(), n1 * n2 * n3);
        assert_eq!(out.len(), self.spectrum_len());
        out.par_chunks_mut(n2 * m3).zip(input.par_chunks(n2 * n3)).for_each(|(plane_out, plane_in)| {
            let mut buf = self.r2c.make_input_vec();
            let mut scratch = self.r2c.make_scratch_vec();
            for (row_out, row_in) in plane_out.chunks_mut(m3).zip(plane_in.chunks(n3)) {
                buf.copy_from_slice(row_in);
                self.r2c.process_with_scratch(&mut buf, row_out, &mut scratch).expect("r2c length mismatch");
            }
        });
        self.complex_axes(out, &self.fwd);
    }

    /// Consumes the spectrum (it is used as scratch).
    pub fn inverse(&self, spec: &mut [Complex64], out: &mut [f64]) {
        let [n1, n2, n3] = self.dims;
        let m3 = self.m3();
        assert_eq!(out.len(), n1 * n2 * n3);
        assert_eq!(spec.len(), self.spectrum_len());
        self.complex_axes(spec, &self.inv);
        let scale = 1.0 / (n1 * n2 * n3) as f64;
        let even = n3 % 2 == 0;
        out.par_chunks_mut(n2 * n3).zip(spec.par_chunks_mut(n2 * m3)).for_each(|(plane_out, plane_in)| {
            let mut scratch = self.c2r.make_scratch_vec();
            for (row_out, row_in) in plane_out.chunks_mut(n3).zip(plane_in.chunks_mut(m3)) {
                row_in[0].im = 0.0;
                if even {
                    row_in[m3 - 1].im = 0.0;
                }
                self.c2r.process_with_scratch(row_in, row_out, &mut scratch).expect("c2r length mismatch");
                for v in row_out.iter_mut() {
                    *v *= scale;
                }
            }
        });
    }

    fn complex_axes(&self, spec: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 2]) {
        let [n1, n2, _] = self.dims;
        let m3 = self.m3();
        if n2 > 1 {
            let plan = &plans[1];
            spec.par_chunks_mut(n2 * m3).for_each(|plane| {
                let mut t = transpose(plane, n2, m3);
                let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(&mut t, &mut scratch);
                transpose_into(&t, m3, n2, plane);
            });
        }
        if n1 > 1 {
            let plan = &plans[0];
            let cols = n2 * m3;
            let mut t = transpose(spec, n1, cols);
            let chunk = n1 * 64;
            t.par_chunks_mut(chunk).for_each(|c| {
                let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(c, &mut scratch);
            });
            transpose_into(&t, cols, n1, spec);
        }
    }
}

fn transpose(a: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len()];
    transpose_into(a, rows, cols, &mut out);
    out
}

fn transpose_into(a: &[Complex64], rows: usize, cols: usize, out: &mut [Complex64]) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
}

/// Signed integer frequency of index `k` on an axis of length `n`.
#[inline]
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64], dims: [usize; 3], f: [usize; 3]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let ph = -2.0 * std::f64::consts::PI
                        * ((f[0] * i) as f64 / dims[0] as f64 + (f[1] * j) as f64 / dims[1] as f64 + (f[2] * k) as f64 / dims[2] as f64);
                    acc += x[(i * dims[1] + j) * dims[2] + k] * Complex64::from_polar(1.0, ph);
                }
            }
        }
        acc
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for dims in [[4, 3, 5], [2, 1, 1], [1, 1, 6], [3, 4, 2], [1, 5, 1]] {
            let n = dims.iter().product();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fft = Fft3::new(dims);
            let mut spec = fft.alloc_spectrum();
            fft.forward(&x, &mut spec);
            let m3 = fft.m3();
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    for k in 0..m3 {
                        let d = naive_dft(&x, dims, [i, j, k]);
                        assert!((spec[(i * dims[1] + j) * m3 + k] - d).norm() < 1e-12, "{dims:?}");
                    }
                }
            }
            let mut back = vec![0.0; n];
            fft.inverse(&mut spec, &mut back);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn frequencies() {
        assert_eq!((0..4).map(|k| signed_frequency(k, 4)).collect::<Vec<_>>(), vec![0, 1, 2, -1]);
        assert_eq!((0..5).map(|k| signed_frequency(k, 5)).collect::<Vec<_>>(), vec![0, 1, 2, -2, -1]);
    }
}
