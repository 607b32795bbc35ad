use nalgebra::Matrix3;

use super::{jump_matrix, ComboMeta};
use crate::error::{Error, Result};
use crate::material::Material;
use crate::tensor::*;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaminateOptions {
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Stress floor of the tolerance, relative to the largest phase modulus.
    pub stress_floor: f64,
    pub max_iter: usize,
    pub back_projection: bool,
    /// Boxels with `min(c₊, c₋) < c_min` use the Voigt bound instead of the laminate.
    pub c_min: f64,
}

impl Default for LaminateOptions {
    fn default() -> Self {
        Self { tol_rel: 1e-10, tol_abs: 0.0, stress_floor: 1e-12, max_iter: 50, back_projection: true, c_min: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JumpVectorState {
    pub a: Vec3,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub back_projections: usize,
    /// First Newton iteration (1-based) whose raw update left the admissible set.
    pub first_projection: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaminateResult {
    pub f_plus: Tensor2,
    pub f_minus: Tensor2,
    pub p_plus: Tensor2,
    pub p_minus: Tensor2,
    pub p_box: Tensor2,
    pub s_box: SymTensor2,
    pub a_box: Tensor4,
    /// Interface traction per reference area.
    pub traction: Vec3,
}

#[derive(Clone, Copy, Debug)]
pub struct LaminateSolution {
    pub result: LaminateResult,
    pub state: JumpVectorState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibilityBounds {
    pub m_beta: Vec3,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

impl AdmissibilityBounds {
    pub fn contains(&self, a: &Vec3) -> bool {
        let b = a.dot(&self.m_beta);
        self.beta_plus < b && b < self.beta_minus
    }
}

/// Interval of `aᵀ m_β` keeping both phase Jacobians positive.
pub fn admissibility_bounds(f_box: &Tensor2, meta: &ComboMeta) -> Result<AdmissibilityBounds> {
    let det = det3(f_box);
    if !(det > 0.0) {
        return Err(Error::InadmissibleMacroState { det });
    }
    let w = inv3(f_box)?.transpose() * meta.normal();
    let nw = w.norm();
    Ok(AdmissibilityBounds { m_beta: w / nw, beta_plus: -meta.c_plus() / nw, beta_minus: meta.c_minus() / nw })
}

/// Moves the `m_β` component of an inadmissible `a1` halfway between the
/// previous admissible iterate `a0` and the violated bound.
pub fn back_project(a1: &Vec3, a0: &Vec3, m_beta: &Vec3, beta_plus: f64, beta_minus: f64) -> Vec3 {
    let b1 = a1.dot(m_beta);
    let b0 = a0.dot(m_beta);
    let bc = if b1 <= beta_plus {
        beta_plus
    } else if b1 >= beta_minus {
        beta_minus
    } else if (b1 - beta_plus).abs() < (b1 - beta_minus).abs() {
        beta_plus
    } else {
        beta_minus
    };
    let target = 0.5 * (b0 + bc);
    a1 + m_beta * (target - b1)
}

struct PhaseEval {
    f_plus: Tensor2,
    f_minus: Tensor2,
    p_plus: Tensor2,
    p_minus: Tensor2,
    a_plus: Tensor4,
    a_minus: Tensor4,
    f: Vec3,
}

fn eval_phases(f_box: &Tensor2, a: &Vec3, mp: &Material, mm: &Material, meta: &ComboMeta) -> Result<PhaseEval> {
    let (f_plus, f_minus) = meta.phase_gradients(f_box, a);
    let (p_plus, a_plus) = mp.eval(&f_plus)?;
    let (p_minus, a_minus) = mm.eval(&f_minus)?;
    let f = (p_plus - p_minus) * meta.normal();
    Ok(PhaseEval { f_plus, f_minus, p_plus, p_minus, a_plus, a_minus, f })
}

fn newton_matrix(e: &PhaseEval, meta: &ComboMeta) -> Result<Matrix3<f64>> {
    let d = jump_matrix(&meta.normal());
    let delta = d.transpose() * (e.a_plus / meta.c_plus() + e.a_minus / meta.c_minus()) * d;
    delta.try_inverse().ok_or(Error::SingularMatrix { det: delta.determinant() })
}

/// Convergence threshold. The last term is the attainable accuracy of the
/// traction jump in double precision, which dominates for tiny loads.
fn tolerance(e: &PhaseEval, floor: f64, modulus: f64, opts: &LaminateOptions, n: &Vec3) -> f64 {
    let scale = (e.p_plus * n).norm().max((e.p_minus * n).norm()).max(floor);
    let roundoff = 16.0 * f64::EPSILON * modulus * e.f_plus.norm().max(e.f_minus.norm());
    opts.tol_abs + opts.tol_rel * scale + roundoff
}

fn assemble(e: &PhaseEval, f_box: &Tensor2, meta: &ComboMeta, converged: bool) -> Result<LaminateResult> {
    let (cp, cm) = (meta.c_plus(), meta.c_minus());
    let d = jump_matrix(&meta.normal());
    let k = newton_matrix(e, meta)?;
    let da = e.a_plus - e.a_minus;
    let a_box = e.a_plus * cp + e.a_minus * cm - da * d * k * d.transpose() * da;
    let p_box = e.p_plus * cp + e.p_minus * cm;
    let s_box = to_mandel(&(inv3(f_box)? * p_box));
    let tp = e.p_plus * meta.normal();
    let traction = if converged { tp } else { 0.5 * (tp + e.p_minus * meta.normal()) };
    Ok(LaminateResult {
        f_plus: e.f_plus,
        f_minus: e.f_minus,
        p_plus: e.p_plus,
        p_minus: e.p_minus,
        p_box,
        s_box,
        a_box,
        traction,
    })
}

/// Solves the interface traction balance `(P₊ − P₋) N = 0` for the jump `a`
/// by Newton's method, starting from `a0`.
pub fn finite_strain_solve(
    f_box: &Tensor2,
    mat_plus: &Material,
    mat_minus: &Material,
    meta: &ComboMeta,
    a0: &Vec3,
    opts: &LaminateOptions,
) -> Result<LaminateSolution> {
    let bounds = admissibility_bounds(f_box, meta)?;
    if meta.c_plus().min(meta.c_minus()) < opts.c_min {
        return voigt_fallback(f_box, mat_plus, mat_minus, meta);
    }
    let n = meta.normal();
    let modulus = mat_plus.modulus_scale().max(mat_minus.modulus_scale());
    let floor = opts.stress_floor * modulus;
    let mut a = if bounds.contains(a0) { *a0 } else { Vec3::zeros() };
    let mut e = eval_phases(f_box, &a, mat_plus, mat_minus, meta)?;
    let mut state = JumpVectorState { a, residual: e.f.norm(), ..Default::default() };
    let mut best = (state.residual, a);
    for k in 1..=opts.max_iter + 1 {
        if state.residual <= tolerance(&e, floor, modulus, opts, &n) {
            state.converged = true;
            break;
        }
        if k > opts.max_iter {
            break;
        }
        let step = -(newton_matrix(&e, meta)? * e.f);
        let mut a1 = a + step;
        if !bounds.contains(&a1) {
            if !opts.back_projection {
                return Err(Error::InadmissibleIterate { iteration: k });
            }
            a1 = back_project(&a1, &a, &bounds.m_beta, bounds.beta_plus, bounds.beta_minus);
            state.back_projections += 1;
            state.first_projection.get_or_insert(k);
        }
        a = a1;
        e = eval_phases(f_box, &a, mat_plus, mat_minus, meta)?;
        state.iterations = k;
        state.a = a;
        state.residual = e.f.norm();
        if state.residual < best.0 {
            best = (state.residual, a);
        }
    }
    if state.converged {
        let result = assemble(&e, f_box, meta, true)?;
        return Ok(LaminateSolution { result, state });
    }
    let e = eval_phases(f_box, &best.1, mat_plus, mat_minus, meta)?;
    state.a = best.1;
    state.residual = best.0;
    let result = assemble(&e, f_box, meta, false)?;
    Err(Error::LaminateNoConvergence(Box::new(LaminateSolution { result, state })))
}

fn voigt_fallback(f_box: &Tensor2, mp: &Material, mm: &Material, meta: &ComboMeta) -> Result<LaminateSolution> {
    let (pp, ap) = mp.eval(f_box)?;
    let (pm, am) = mm.eval(f_box)?;
    let (cp, cm) = (meta.c_plus(), meta.c_minus());
    let p_box = pp * cp + pm * cm;
    let result = LaminateResult {
        f_plus: *f_box,
        f_minus: *f_box,
        p_plus: pp,
        p_minus: pm,
        p_box,
        s_box: to_mandel(&(inv3(f_box)? * p_box)),
        a_box: ap * cp + am * cm,
        traction: 0.5 * (pp + pm) * meta.normal(),
    };
    let state = JumpVectorState { converged: true, ..Default::default() };
    Ok(LaminateSolution { result, state })
}

/// Algorithmic tangent of a converged laminate state.
pub fn effective_tangent(f_box: &Tensor2, mat_plus: &Material, mat_minus: &Material, meta: &ComboMeta, a: &Vec3) -> Result<Tensor4> {
    let e = eval_phases(f_box, a, mat_plus, mat_minus, meta)?;
    Ok(assemble(&e, f_box, meta, true)?.a_box)
}
