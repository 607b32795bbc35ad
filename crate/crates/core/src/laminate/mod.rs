//! Rank-one laminate kernels for composite boxels.
//!
//! A composite boxel holds two phases separated by a planar interface with
//! unit normal `N` pointing out of phase `+`. The phase gradients are
//! `F± = F_□ ± a ⊗ N / c±`, so the volume average is `F_□` for any jump `a`.

mod finite_strain;
mod mixing;
mod small_strain;
mod thermal;

use nalgebra::SMatrix;

pub use finite_strain::*;
pub use mixing::*;
pub use small_strain::*;
pub use thermal::*;

use crate::error::{Error, Result};
use crate::tensor::*;

/// 9×3 matrix mapping a jump `a` to the 9-vector of `a ⊗ N`.
pub type JumpMatrix = SMatrix<f64, 9, 3>;
/// 6×3 matrix mapping a jump `a` to the Mandel vector of `sym(a ⊗ N)`.
pub type SymJumpMatrix = SMatrix<f64, 6, 3>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComboMeta {
    normal: Vec3,
    c_plus: f64,
}

impl ComboMeta {
    /// Normalizes `normal`; requires `0 < c_plus < 1`.
    pub fn new(normal: Vec3, c_plus: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::BadMaterial(format!("interface normal {normal:?} has no direction")));
        }
        if !(c_plus > 0.0 && c_plus < 1.0) {
            return Err(Error::BadMaterial(format!("volume fraction {c_plus} outside (0, 1)")));
        }
        Ok(Self { normal: normal / n, c_plus })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }

    pub fn c_minus(&self) -> f64 {
        1.0 - self.c_plus
    }

    /// `(F₊, F₋)` for jump `a`.
    pub fn phase_gradients(&self, f_box: &Tensor2, a: &Vec3) -> (Tensor2, Tensor2) {
        let an = a * self.normal.transpose();
        (f_box + an / self.c_plus, f_box - an / self.c_minus())
    }
}

pub fn jump_matrix(n: &Vec3) -> JumpMatrix {
    JumpMatrix::from_fn(|r, k| if r / 3 == k { n[r % 3] } else { 0.0 })
}

pub fn sym_jump_matrix(n: &Vec3) -> SymJumpMatrix {
    SymJumpMatrix::from_fn(|slot, k| {
        let (i, j) = MANDEL_PAIRS[slot];
        let mut e = Tensor2::zeros();
        e[(k, 0)] = n[0];
        e[(k, 1)] = n[1];
        e[(k, 2)] = n[2];
        let s = sym(&e);
        mandel_weight(slot) * s[(i, j)]
    })
}
