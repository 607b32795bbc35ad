//! Pointwise constitutive laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::*;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeoHookeanParams {
    pub lambda: f64,
    pub mu: f64,
}

impl NeoHookeanParams {
    pub fn from_young(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) || !(nu > -1.0 && nu < 0.5) {
            return Err(Error::BadMaterial(format!("E = {e}, nu = {nu}")));
        }
        let (lambda, mu) = lame(e, nu);
        Ok(Self { lambda, mu })
    }
}

/// Lamé parameters `(λ, μ)` from Young's modulus and Poisson ratio.
pub fn lame(e: f64, nu: f64) -> (f64, f64) {
    (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearElasticParams {
    pub stiffness: SymTensor4,
}

impl LinearElasticParams {
    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        Self { stiffness: isotropic_sym4(lambda, mu) }
    }

    pub fn from_young(e: f64, nu: f64) -> Result<Self> {
        let p = NeoHookeanParams::from_young(e, nu)?;
        Ok(Self::isotropic(p.lambda, p.mu))
    }

    pub fn new(stiffness: SymTensor4) -> Result<Self> {
        let asym = (stiffness - stiffness.transpose()).norm();
        if asym > 1e-10 * stiffness.norm() {
            return Err(Error::NotSymmetric { asymmetry: asym / stiffness.norm() });
        }
        if stiffness.cholesky().is_none() {
            return Err(Error::BadMaterial("stiffness is not positive definite".into()));
        }
        Ok(Self { stiffness })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalParams {
    pub kappa: Tensor2,
}

impl ThermalParams {
    pub fn isotropic(k: f64) -> Self {
        Self { kappa: Tensor2::identity() * k }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NeoHookeanEval {
    pub energy: f64,
    pub s: SymTensor2,
    pub c: SymTensor4,
}

pub fn neo_hookean_energy(f: &Tensor2, p: &NeoHookeanParams) -> Result<f64> {
    let j = det3(f);
    if !(j > 0.0) {
        return Err(Error::InadmissibleDeformation { det: j, cell: None });
    }
    let lnj = j.ln();
    let tr_c = f.norm_squared();
    Ok(0.5 * p.lambda * lnj * lnj - p.mu * lnj + 0.5 * p.mu * (tr_c - 3.0))
}

/// Energy, second Piola-Kirchhoff stress and material tangent `∂S/∂E`.
pub fn neo_hookean(f: &Tensor2, p: &NeoHookeanParams) -> Result<NeoHookeanEval> {
    let j = det3(f);
    if !(j > 0.0) {
        return Err(Error::InadmissibleDeformation { det: j, cell: None });
    }
    let lnj = j.ln();
    let c = f.transpose() * f;
    let ci = sym(&inv3(&c)?);
    let s = ci * (p.lambda * lnj) + (Tensor2::identity() - ci) * p.mu;
    let g = p.mu - p.lambda * lnj;
    let tangent = sym4_from_fn(|i, j, k, l| {
        p.lambda * ci[(i, j)] * ci[(k, l)] + g * (ci[(i, k)] * ci[(j, l)] + ci[(i, l)] * ci[(j, k)])
    });
    let energy = 0.5 * p.lambda * lnj * lnj - p.mu * lnj + 0.5 * p.mu * (c.trace() - 3.0);
    Ok(NeoHookeanEval { energy, s: to_mandel(&s), c: tangent })
}

pub fn pk2_to_pk1(f: &Tensor2, s: &SymTensor2) -> Tensor2 {
    f * from_mandel(s)
}

/// `A_iJkL = δ_ik S_JL + F_iI ℂ_IJKL F_kK`.
pub fn tangent_pk1(f: &Tensor2, s: &SymTensor2, c: &SymTensor4) -> Tensor4 {
    let s = from_mandel(s);
    let full = sym4_to_tensor4(c);
    // G[(I,J),(k,L)] = ℂ_IJKL F_kK
    let mut g = Tensor4::zeros();
    for ij in 0..9 {
        for k in 0..3 {
            for l in 0..3 {
                let mut acc = 0.0;
                for kk in 0..3 {
                    acc += full[(ij, 3 * kk + l)] * f[(k, kk)];
                }
                g[(ij, 3 * k + l)] = acc;
            }
        }
    }
    let mut a = Tensor4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for kl in 0..9 {
                let mut acc = 0.0;
                for ii in 0..3 {
                    acc += f[(i, ii)] * g[(3 * ii + j, kl)];
                }
                a[(3 * i + j, kl)] = acc;
            }
            for l in 0..3 {
                a[(3 * i + j, 3 * i + l)] += s[(j, l)];
            }
        }
    }
    a
}

pub fn linear_stress(eps: &SymTensor2, p: &LinearElasticParams) -> SymTensor2 {
    p.stiffness * eps
}

pub fn thermal_flux(g: &Vec3, p: &ThermalParams) -> Vec3 {
    -(p.kappa * g)
}

/// Mechanical law usable at finite strain. Linear elasticity is wrapped as
/// `P = ℂ : sym(F − I)`, the small-strain mode of the solvers.
#[derive(Clone, Copy, Debug)]
pub enum Material {
    NeoHookean(NeoHookeanParams),
    Linear(LinearElasticParams),
}

impl Material {
    pub fn neo_hookean(e: f64, nu: f64) -> Result<Self> {
        Ok(Material::NeoHookean(NeoHookeanParams::from_young(e, nu)?))
    }

    pub fn linear(e: f64, nu: f64) -> Result<Self> {
        Ok(Material::Linear(LinearElasticParams::from_young(e, nu)?))
    }

    pub fn stress(&self, f: &Tensor2) -> Result<Tensor2> {
        match self {
            Material::NeoHookean(p) => {
                let j = det3(f);
                if !(j > 0.0) {
                    return Err(Error::InadmissibleDeformation { det: j, cell: None });
                }
                let lnj = j.ln();
                // P = μ F + (λ ln J − μ) F⁻ᵀ
                let fit = cofactor(f) / j;
                Ok(f * p.mu + fit * (p.lambda * lnj - p.mu))
            }
            Material::Linear(p) => {
                let eps = to_mandel(&sym(&(f - Tensor2::identity())));
                Ok(from_mandel(&linear_stress(&eps, p)))
            }
        }
    }

    /// First Piola-Kirchhoff stress and its derivative with respect to `F`.
    pub fn eval(&self, f: &Tensor2) -> Result<(Tensor2, Tensor4)> {
        match self {
            Material::NeoHookean(p) => {
                let e = neo_hookean(f, p)?;
                Ok((pk2_to_pk1(f, &e.s), tangent_pk1(f, &e.s, &e.c)))
            }
            Material::Linear(p) => Ok((self.stress(f)?, sym4_to_tensor4(&p.stiffness))),
        }
    }

    pub fn energy(&self, f: &Tensor2) -> Result<f64> {
        match self {
            Material::NeoHookean(p) => neo_hookean_energy(f, p),
            Material::Linear(p) => {
                let eps = to_mandel(&sym(&(f - Tensor2::identity())));
                Ok(0.5 * eps.dot(&(p.stiffness * eps)))
            }
        }
    }

    /// Stiffness at the undeformed state.
    pub fn small_strain_stiffness(&self) -> SymTensor4 {
        match self {
            Material::NeoHookean(p) => isotropic_sym4(p.lambda, p.mu),
            Material::Linear(p) => p.stiffness,
        }
    }

    /// Characteristic modulus used to scale tolerances.
    pub fn modulus_scale(&self) -> f64 {
        match self {
            Material::NeoHookean(p) => p.mu.abs().max(p.lambda.abs()),
            Material::Linear(p) => p.stiffness.diagonal().amax(),
        }
    }
}
