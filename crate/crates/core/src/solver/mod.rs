//! Periodic cell solvers on regular grids: Green operators, the basic
//! fixed-point scheme, Newton-CG and load stepping.

mod constitutive;
mod field;
mod green;
mod schemes;

pub use constitutive::*;
pub use field::*;
pub use green::*;
pub use schemes::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminate::LaminateOptions;

/// Periodic grid of `n1 × n2 × n3` cells spanning `l1 × l2 × l3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
}

impl SimGrid {
    pub fn new(dims: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::ConfigInvalid(format!("grid dimensions {dims:?} must be positive")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::ConfigInvalid(format!("grid lengths {lengths:?} must be positive")));
        }
        Ok(Self { dims, lengths })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.lengths[a] / self.dims[a] as f64)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        [idx / (self.dims[1] * self.dims[2]), (idx / self.dims[2]) % self.dims[1], idx % self.dims[2]]
    }

    /// Index of the cell at `c + d`, wrapped periodically.
    #[inline]
    pub fn shifted(&self, c: [usize; 3], d: [isize; 3]) -> usize {
        let w = |a: usize| (c[a] as isize + d[a]).rem_euclid(self.dims[a] as isize) as usize;
        self.index(w(0), w(1), w(2))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Basic,
    #[default]
    NewtonCg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenKind {
    Continuous,
    #[default]
    Rotated,
    Staggered,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialEval {
    #[default]
    PerCell,
    /// Doubly-fine material grid; staggered discretization only.
    Dfmg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub green: GreenKind,
    pub material_eval: MaterialEval,
    pub tol_equilibrium: f64,
    pub max_outer: usize,
    /// Relative CG tolerance per Newton step.
    pub cg_tol: f64,
    pub cg_max: usize,
    pub load_steps: usize,
    pub max_bisections: usize,
    /// Line-search halvings per Newton step.
    pub max_halvings: usize,
    /// Composite boxels use the laminate law; otherwise the majority phase.
    pub combo: bool,
    /// Reference stiffness for the basic scheme; estimated when absent.
    pub alpha: Option<f64>,
    /// Residual denominator floor, relative to the largest modulus.
    pub stress_floor: f64,
    pub laminate: LaminateOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::NewtonCg,
            green: GreenKind::Rotated,
            material_eval: MaterialEval::PerCell,
            tol_equilibrium: 1e-8,
            max_outer: 1000,
            cg_tol: 1e-4,
            cg_max: 1000,
            load_steps: 1,
            max_bisections: 5,
            max_halvings: 10,
            combo: true,
            alpha: None,
            stress_floor: 1e-12,
            laminate: LaminateOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.into()));
        if self.material_eval == MaterialEval::Dfmg && self.green != GreenKind::Staggered {
            return bad("the doubly-fine material grid requires the staggered Green operator");
        }
        if !(self.tol_equilibrium > 0.0) {
            return bad("tol_equilibrium must be positive");
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad("cg_tol must lie in (0, 1)");
        }
        if self.load_steps == 0 || self.max_outer == 0 || self.cg_max == 0 {
            return bad("load_steps, max_outer and cg_max must be at least 1");
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad("alpha must be positive");
            }
        }
        Ok(())
    }
}
