//! Small dense tensor algebra.
//!
//! Second order tensors are stored as 3×3 matrices. The 9-vector form is row
//! major, `(11, 12, 13, 21, …, 33)`, so index `(i, J)` maps to `3 i + J`.
//! Symmetric tensors use Mandel 6-vectors `(11, 22, 33, √2·12, √2·13, √2·23)`,
//! which preserve inner products.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};

pub type Tensor2 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;
pub type Vec9 = SVector<f64, 9>;
/// Symmetric second order tensor in Mandel form.
pub type SymTensor2 = Vector6<f64>;
/// Fourth order tensor acting on 9-vectors.
pub type Tensor4 = SMatrix<f64, 9, 9>;
/// Fourth order tensor with minor symmetries acting on Mandel 6-vectors.
pub type SymTensor4 = Matrix6<f64>;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Index pairs of the Mandel ordering.
pub const MANDEL_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Mandel weight of slot `a`: 1 on the diagonal, √2 for shear slots.
#[inline]
pub fn mandel_weight(a: usize) -> f64 {
    if a < 3 {
        1.0
    } else {
        SQRT2
    }
}

/// Mandel slot holding the `(i, j)` component.
#[inline]
pub fn mandel_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

pub fn to_vector9(t: &Tensor2) -> Vec9 {
    Vec9::from_fn(|a, _| t[(a / 3, a % 3)])
}

pub fn from_vector9(v: &Vec9) -> Tensor2 {
    Tensor2::from_fn(|i, j| v[3 * i + j])
}

/// Mandel vector of the symmetric part of `s`.
pub fn to_mandel(s: &Tensor2) -> SymTensor2 {
    SymTensor2::from_fn(|a, _| {
        let (i, j) = MANDEL_PAIRS[a];
        if a < 3 {
            s[(i, j)]
        } else {
            SQRT2 * 0.5 * (s[(i, j)] + s[(j, i)])
        }
    })
}

pub fn from_mandel(v: &SymTensor2) -> Tensor2 {
    let mut t = Tensor2::zeros();
    for (a, &(i, j)) in MANDEL_PAIRS.iter().enumerate() {
        let x = v[a] / mandel_weight(a);
        t[(i, j)] = x;
        t[(j, i)] = x;
    }
    t
}

pub fn sym(t: &Tensor2) -> Tensor2 {
    (t + t.transpose()) * 0.5
}

pub fn det3(t: &Tensor2) -> f64 {
    t[(0, 0)] * (t[(1, 1)] * t[(2, 2)] - t[(1, 2)] * t[(2, 1)])
        - t[(0, 1)] * (t[(1, 0)] * t[(2, 2)] - t[(1, 2)] * t[(2, 0)])
        + t[(0, 2)] * (t[(1, 0)] * t[(2, 1)] - t[(1, 1)] * t[(2, 0)])
}

/// Cofactor matrix, `cof(t) = det(t) t⁻ᵀ`.
pub fn cofactor(t: &Tensor2) -> Tensor2 {
    let c = |a: usize, b: usize, c: usize, d: usize| t[(a, b)] * t[(c, d)] - t[(a, d)] * t[(c, b)];
    Tensor2::new(
        c(1, 1, 2, 2),
        -c(1, 0, 2, 2),
        c(1, 0, 2, 1),
        -c(0, 1, 2, 2),
        c(0, 0, 2, 2),
        -c(0, 0, 2, 1),
        c(0, 1, 1, 2),
        -c(0, 0, 1, 2),
        c(0, 0, 1, 1),
    )
}

pub fn inv3(t: &Tensor2) -> Result<Tensor2> {
    let det = det3(t);
    if !(det.abs() > 1e-300) {
        return Err(Error::SingularMatrix { det });
    }
    Ok(cofactor(t).transpose() / det)
}

/// `det(t + u ⊗ v)` via the matrix determinant lemma.
pub fn det_lemma(t: &Tensor2, u: &Vec3, v: &Vec3) -> Result<f64> {
    let inv = inv3(t)?;
    Ok((1.0 + v.dot(&(inv * u))) * det3(t))
}

/// Symmetric 3×3 eigen decomposition with eigenvalues sorted ascending and
/// eigenvectors stored as the columns of the returned matrix.
pub fn sym_eig3(m: &Tensor2) -> Result<(Vec3, Tensor2)> {
    let norm = m.norm();
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym / norm });
    }
    if norm == 0.0 {
        return Ok((Vec3::zeros(), Tensor2::identity()));
    }
    let a = sym(m) / norm;
    let (vals, mut v) = analytic_eig(&a);
    let gap = (vals[1] - vals[0]).min(vals[2] - vals[1]);
    let b = v.transpose() * a * v;
    let off = b[(0, 1)].abs() + b[(0, 2)].abs() + b[(1, 2)].abs();
    if gap < 1e-8 || off > 1e-14 {
        v = jacobi_cleanup(&a, v);
    }
    let b = v.transpose() * a * v;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| b[(i, i)].partial_cmp(&b[(j, j)]).unwrap());
    let vals = Vec3::new(b[(order[0], order[0])], b[(order[1], order[1])], b[(order[2], order[2])]) * norm;
    let vecs = Tensor2::from_columns(&[v.column(order[0]).into_owned(), v.column(order[1]).into_owned(), v.column(order[2]).into_owned()]);
    Ok((vals, vecs))
}

fn analytic_eig(a: &Tensor2) -> (Vec3, Tensor2) {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p < 1e-15 {
        return (Vec3::from_element(q), Tensor2::identity());
    }
    let b = (a - Tensor2::identity() * q) / p;
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let v_lo = null_vector(a, lo);
    let mut v_hi = null_vector(a, hi);
    v_hi -= v_lo * v_lo.dot(&v_hi);
    let v_hi = if v_hi.norm() > 1e-8 { v_hi.normalize() } else { any_orthogonal(&v_lo) };
    let v_mid = v_hi.cross(&v_lo);
    (Vec3::new(lo, mid, hi), Tensor2::from_columns(&[v_lo, v_mid, v_hi]))
}

fn null_vector(a: &Tensor2, lambda: f64) -> Vec3 {
    let s = a - Tensor2::identity() * lambda;
    let r = [s.row(0).transpose(), s.row(1).transpose(), s.row(2).transpose()];
    let cands = [r[0].cross(&r[1]), r[0].cross(&r[2]), r[1].cross(&r[2])];
    let best = cands.iter().max_by(|x, y| x.norm_squared().partial_cmp(&y.norm_squared()).unwrap()).unwrap();
    if best.norm() > 1e-300 {
        best.normalize()
    } else {
        Vec3::x()
    }
}

fn any_orthogonal(v: &Vec3) -> Vec3 {
    let e = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (e - v * v.dot(&e)).normalize()
}

fn jacobi_cleanup(a: &Tensor2, mut v: Tensor2) -> Tensor2 {
    // Re-orthonormalize the starting basis before rotating.
    let qr = v.qr();
    v = qr.q();
    for _ in 0..50 {
        let b = v.transpose() * a * v;
        let off = b[(0, 1)].abs() + b[(0, 2)].abs() + b[(1, 2)].abs();
        if off < 1e-17 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let b = v.transpose() * a * v;
            let bpq = b[(p, q)];
            if bpq.abs() < 1e-300 {
                continue;
            }
            let theta = (b[(q, q)] - b[(p, p)]) / (2.0 * bpq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let vkp = v[(k, p)];
                let vkq = v[(k, q)];
                v[(k, p)] = c * vkp - s * vkq;
                v[(k, q)] = s * vkp + c * vkq;
            }
        }
    }
    v
}

/// Mandel 6×6 matrix of a fourth order tensor with minor symmetries given by
/// its components `c(i, j, k, l)`.
pub fn sym4_from_fn(c: impl Fn(usize, usize, usize, usize) -> f64) -> SymTensor4 {
    SymTensor4::from_fn(|a, b| {
        let (i, j) = MANDEL_PAIRS[a];
        let (k, l) = MANDEL_PAIRS[b];
        mandel_weight(a) * mandel_weight(b) * c(i, j, k, l)
    })
}

/// Component `(i, j, k, l)` of a Mandel 6×6 tensor.
#[inline]
pub fn sym4_component(m: &SymTensor4, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let a = mandel_slot(i, j);
    let b = mandel_slot(k, l);
    m[(a, b)] / (mandel_weight(a) * mandel_weight(b))
}

/// 9×9 form of a fourth order tensor given by its components.
pub fn tensor4_from_fn(c: impl Fn(usize, usize, usize, usize) -> f64) -> Tensor4 {
    Tensor4::from_fn(|a, b| c(a / 3, a % 3, b / 3, b % 3))
}

/// Expands a Mandel 6×6 tensor into the 9×9 form.
pub fn sym4_to_tensor4(m: &SymTensor4) -> Tensor4 {
    tensor4_from_fn(|i, j, k, l| sym4_component(m, i, j, k, l))
}

/// Isotropic stiffness `λ I⊗I + 2μ 𝕀ˢ` in Mandel form.
pub fn isotropic_sym4(lambda: f64, mu: f64) -> SymTensor4 {
    let mut m = SymTensor4::identity() * (2.0 * mu);
    for a in 0..3 {
        for b in 0..3 {
            m[(a, b)] += lambda;
        }
    }
    m
}

pub fn contract4(a: &Tensor4, t: &Tensor2) -> Tensor2 {
    from_vector9(&(a * to_vector9(t)))
}

/// `t1 : t2`.
pub fn ddot(t1: &Tensor2, t2: &Tensor2) -> f64 {
    t1.component_mul(t2).sum()
}
