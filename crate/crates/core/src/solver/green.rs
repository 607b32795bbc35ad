use num_complex::Complex64;
use rayon::prelude::*;

use super::{FieldF, GreenKind, SimGrid};
use crate::fft::{signed_frequency, Fft3};

type C = Complex64;

/// `e^{2πi k/n}` with exact values at the zero and Nyquist frequencies.
fn unit_root(k: usize, n: usize) -> C {
    if k == 0 {
        C::new(1.0, 0.0)
    } else if 2 * k == n {
        C::new(-1.0, 0.0)
    } else {
        C::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
    }
}

/// Fourier symbols of the forward and backward differences along each axis,
/// over the full index range `0..n_a`.
#[derive(Clone, Debug)]
pub struct StaggeredSymbols {
    pub plus: [Vec<C>; 3],
    pub minus: [Vec<C>; 3],
}

pub fn staggered_symbols(grid: &SimGrid) -> StaggeredSymbols {
    let h = grid.spacing();
    let plus = [0, 1, 2].map(|a| (0..grid.dims[a]).map(|k| (unit_root(k, grid.dims[a]) - 1.0) / h[a]).collect());
    let minus = [0, 1, 2].map(|a| (0..grid.dims[a]).map(|k| (1.0 - unit_root(k, grid.dims[a]).conj()) / h[a]).collect());
    StaggeredSymbols { plus, minus }
}

/// Projection onto periodic gradient fields for a reference medium `α I`.
pub struct GreenOperator {
    kind: GreenKind,
    grid: SimGrid,
    fft: Fft3,
    /// Per axis: primary symbol, and for the staggered (backward difference)
    /// and rotated (averaging factor) schemes a secondary one.
    p: [Vec<C>; 3],
    m: [Vec<C>; 3],
    zero_tol: f64,
}

impl GreenOperator {
    pub fn new(kind: GreenKind, grid: SimGrid) -> Self {
        let fft = Fft3::new(grid.dims);
        let h = grid.spacing();
        let lens = [grid.dims[0], grid.dims[1], fft.m3()];
        let sym = |a: usize, f: &dyn Fn(usize) -> C| -> Vec<C> { (0..lens[a]).map(f).collect() };
        let (p, m) = match kind {
            GreenKind::Continuous => {
                let p = [0, 1, 2].map(|a| {
                    let n = grid.dims[a];
                    sym(a, &|k| C::new(0.0, 2.0 * std::f64::consts::PI * signed_frequency(k, n) as f64 / grid.lengths[a]))
                });
                (p, [vec![], vec![], vec![]])
            }
            GreenKind::Rotated => {
                let p = [0, 1, 2].map(|a| sym(a, &|k| (unit_root(k, grid.dims[a]) - 1.0) / h[a]));
                let m = [0, 1, 2].map(|a| sym(a, &|k| (unit_root(k, grid.dims[a]) + 1.0) * 0.5));
                (p, m)
            }
            GreenKind::Staggered => {
                let p = [0, 1, 2].map(|a| sym(a, &|k| (unit_root(k, grid.dims[a]) - 1.0) / h[a]));
                let m = [0, 1, 2].map(|a| sym(a, &|k| (1.0 - unit_root(k, grid.dims[a]).conj()) / h[a]));
                (p, m)
            }
        };
        let scale: f64 = h.iter().map(|x| 4.0 / (x * x)).sum();
        Self { kind, grid, fft, p, m, zero_tol: 1e-24 * scale }
    }

    pub fn kind(&self) -> GreenKind {
        self.kind
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    /// Discrete gradient symbol acting on displacement component `row` at
    /// frequency `(k1, k2, k3)`, `k3 ≤ n3/2`.
    #[inline]
    pub fn row_symbol(&self, row: usize, k: [usize; 3]) -> [C; 3] {
        let (p, m) = (&self.p, &self.m);
        match self.kind {
            GreenKind::Continuous => {
                // At Nyquist frequencies only the Nyquist axes keep their
                // component, which keeps the multiplier Hermitian.
                let nyq = [0, 1, 2].map(|a| self.grid.dims[a] % 2 == 0 && 2 * k[a] == self.grid.dims[a]);
                let any = nyq.iter().any(|&b| b);
                let pick = |a: usize| if any && !nyq[a] { C::new(0.0, 0.0) } else { p[a][k[a]] };
                [pick(0), pick(1), pick(2)]
            }
            GreenKind::Rotated => {
                let (a0, a1, a2) = (m[0][k[0]], m[1][k[1]], m[2][k[2]]);
                [p[0][k[0]] * a1 * a2, a0 * p[1][k[1]] * a2, a0 * a1 * p[2][k[2]]]
            }
            GreenKind::Staggered => {
                let pick = |j: usize| if j == row { p[j][k[j]] } else { m[j][k[j]] };
                [pick(0), pick(1), pick(2)]
            }
        }
    }

    /// Replaces `field` by its orthogonal projection onto zero-mean gradient
    /// fields (`Γ⁰` with `α = 1`).
    pub fn project(&self, field: &mut FieldF) {
        let [n1, n2, _] = self.grid.dims;
        let m3 = self.fft.m3();
        let mut real = vec![0.0; self.grid.len()];
        let mut spec: [Vec<C>; 3] = [self.fft.alloc_spectrum(), self.fft.alloc_spectrum(), self.fft.alloc_spectrum()];
        for row in 0..3 {
            for (j, s) in spec.iter_mut().enumerate() {
                field.component(row, j, &mut real);
                self.fft.forward(&real, s);
            }
            let [s0, s1, s2] = &mut spec;
            s0.par_chunks_mut(m3)
                .zip(s1.par_chunks_mut(m3))
                .zip(s2.par_chunks_mut(m3))
                .enumerate()
                .for_each(|(line, ((a, b), c))| {
                    let (k1, k2) = (line / n2, line % n2);
                    debug_assert!(k1 < n1);
                    for k3 in 0..m3 {
                        let g = self.row_symbol(row, [k1, k2, k3]);
                        let den = g[0].norm_sqr() + g[1].norm_sqr() + g[2].norm_sqr();
                        if den <= self.zero_tol {
                            a[k3] = C::new(0.0, 0.0);
                            b[k3] = C::new(0.0, 0.0);
                            c[k3] = C::new(0.0, 0.0);
                            continue;
                        }
                        let t = (g[0].conj() * a[k3] + g[1].conj() * b[k3] + g[2].conj() * c[k3]) / den;
                        a[k3] = g[0] * t;
                        b[k3] = g[1] * t;
                        c[k3] = g[2] * t;
                    }
                });
            for (j, s) in spec.iter_mut().enumerate() {
                self.fft.inverse(s, &mut real);
                field.set_component(row, j, &real);
            }
        }
    }

    /// `Γ⁰ τ` for the reference medium `α I`.
    pub fn apply(&self, tau: &FieldF, alpha: f64) -> FieldF {
        let mut out = tau.clone();
        self.project(&mut out);
        out.scale(1.0 / alpha);
        out
    }
}

fn diff(phi: &[f64], grid: &SimGrid, axis: usize, forward: bool) -> Vec<f64> {
    let h = grid.spacing()[axis];
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let c = grid.coords(idx);
            let mut d = [0isize; 3];
            d[axis] = if forward { 1 } else { -1 };
            let nb = phi[grid.shifted(c, d)];
            if forward {
                (nb - phi[idx]) / h
            } else {
                (phi[idx] - nb) / h
            }
        })
        .collect()
}

/// `D⁺_axis φ[I] = (φ[I + e] − φ[I]) / h`.
pub fn diff_plus(phi: &[f64], grid: &SimGrid, axis: usize) -> Vec<f64> {
    diff(phi, grid, axis, true)
}

/// `D⁻_axis φ[I] = (φ[I] − φ[I − e]) / h`.
pub fn diff_minus(phi: &[f64], grid: &SimGrid, axis: usize) -> Vec<f64> {
    diff(phi, grid, axis, false)
}

/// Staggered gradient: forward differences on the diagonal, backward
/// differences off the diagonal.
pub fn grad_staggered(u: &[Vec<f64>; 3], grid: &SimGrid) -> FieldF {
    let mut out = FieldF::zeros(grid.dims);
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { diff_plus(&u[i], grid, j) } else { diff_minus(&u[i], grid, j) };
            out.set_component(i, j, &d);
        }
    }
    out
}

/// Staggered divergence, `(Div P)_i = Σ_J D_J P_iJ`, the negative adjoint of
/// [`grad_staggered`].
pub fn div_staggered(p: &FieldF, grid: &SimGrid) -> [Vec<f64>; 3] {
    let mut comp = vec![0.0; grid.len()];
    [0, 1, 2].map(|i| {
        let mut acc = vec![0.0; grid.len()];
        for j in 0..3 {
            p.component(i, j, &mut comp);
            let d = if i == j { diff_minus(&comp, grid, j) } else { diff_plus(&comp, grid, j) };
            acc.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(dims: [usize; 3], seed: u64) -> FieldF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 9 * dims.iter().product::<usize>();
        FieldF::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn projectors_are_idempotent_and_kill_constants() {
        let grid = SimGrid::new([6, 5, 4], [1.0, 0.8, 1.3]).unwrap();
        for kind in [GreenKind::Continuous, GreenKind::Rotated, GreenKind::Staggered] {
            let g = GreenOperator::new(kind, grid);
            let mut c = FieldF::uniform(grid.dims, &Tensor2::identity());
            g.project(&mut c);
            assert!(c.rms() < 1e-14);
            let mut f = random_field(grid.dims, 3);
            g.project(&mut f);
            let mut f2 = f.clone();
            g.project(&mut f2);
            f2.axpy(-1.0, &f);
            assert!(f2.rms() < 1e-12 * f.rms(), "{kind:?}");
            assert!(f.mean().norm() < 1e-14);
        }
    }

    #[test]
    fn staggered_gradient_is_fixed_point() {
        let grid = SimGrid::new([5, 4, 6], [1.0, 2.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = [0, 1, 2].map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        let grad = grad_staggered(&u, &grid);
        let mut p = grad.clone();
        GreenOperator::new(GreenKind::Staggered, grid).project(&mut p);
        p.axpy(-1.0, &grad);
        assert!(p.rms() < 1e-12 * grad.rms());
    }
}
