use nalgebra::Matrix3;

use super::{sym_jump_matrix, ComboMeta};
use crate::error::{Error, Result};
use crate::tensor::*;

fn hessian(c_plus: &SymTensor4, c_minus: &SymTensor4, meta: &ComboMeta) -> Result<Matrix3<f64>> {
    let ds = sym_jump_matrix(&meta.normal());
    let delta = ds.transpose() * (c_plus / meta.c_plus() + c_minus / meta.c_minus()) * ds;
    delta.try_inverse().ok_or(Error::SingularMatrix { det: delta.determinant() })
}

/// Jump vector of the linear laminate for mean strain `eps_box`.
pub fn small_strain_jump(eps_box: &SymTensor2, c_plus: &SymTensor4, c_minus: &SymTensor4, meta: &ComboMeta) -> Result<Vec3> {
    let ds = sym_jump_matrix(&meta.normal());
    let k = hessian(c_plus, c_minus, meta)?;
    Ok(k * ds.transpose() * ((c_minus - c_plus) * eps_box))
}

/// Phase strains `(ε₊, ε₋)` for a jump `a`.
pub fn small_strain_phase_strains(eps_box: &SymTensor2, a: &Vec3, meta: &ComboMeta) -> (SymTensor2, SymTensor2) {
    let d = sym_jump_matrix(&meta.normal()) * a;
    (eps_box + d / meta.c_plus(), eps_box - d / meta.c_minus())
}

/// Effective stiffness of the linear laminate.
pub fn small_strain_stiffness(c_plus: &SymTensor4, c_minus: &SymTensor4, meta: &ComboMeta) -> Result<SymTensor4> {
    let ds = sym_jump_matrix(&meta.normal());
    let k = hessian(c_plus, c_minus, meta)?;
    let dc = c_plus - c_minus;
    let out = c_plus * meta.c_plus() + c_minus * meta.c_minus() - dc * ds * k * ds.transpose() * dc;
    Ok((out + out.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laminate::{milton_default_lambda, milton_laminate, mix_reuss, mix_voigt};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_jumps() {
        let c = isotropic_sym4(2.0, 1.0);
        let meta = ComboMeta::new(Vec3::new(1.0, 1.0, 0.0), 0.3).unwrap();
        let eps = SymTensor2::new(1e-3, 0.0, 0.0, 1e-3, 0.0, 0.0);
        assert!(small_strain_jump(&eps, &c, &c, &meta).unwrap().norm() < 1e-18);
        let d = isotropic_sym4(20.0, 5.0);
        assert_eq!(small_strain_jump(&SymTensor2::zeros(), &c, &d, &meta).unwrap(), Vec3::zeros());
    }

    #[test]
    fn traction_balance_by_substitution() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let cp = isotropic_sym4(rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
            let cm = isotropic_sym4(rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
            let meta = ComboMeta::new(Vec3::x(), rng.gen_range(0.05..0.95)).unwrap();
            let eps = SymTensor2::new(rng.gen_range(-1.0..1.0), 0.0, 0.0, 0.0, 0.0, 0.0);
            let a = small_strain_jump(&eps, &cp, &cm, &meta).unwrap();
            let (ep, em) = small_strain_phase_strains(&eps, &a, &meta);
            let t = from_mandel(&(cp * ep - cm * em)) * meta.normal();
            let scale = from_mandel(&(cp * ep)).norm();
            assert!(t.norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn single_phase_limit_and_bounds() {
        let cp = isotropic_sym4(5.0, 3.0);
        let cm = isotropic_sym4(1.0, 0.5);
        let n = Vec3::new(0.3, 0.5, -0.2);
        let meta = ComboMeta::new(n, 1.0 - 1e-9).unwrap();
        let c = small_strain_stiffness(&cp, &cm, &meta).unwrap();
        assert!((c - cp).norm() <= 1e-6 * cp.norm());
        let meta = ComboMeta::new(n, 0.4).unwrap();
        let c = small_strain_stiffness(&cp, &cm, &meta).unwrap();
        let r = mix_reuss(&cp, &cm, 0.4).unwrap();
        let v = mix_voigt(&cp, &cm, 0.4);
        assert!((c - r).symmetric_eigenvalues().min() >= -1e-10);
        assert!((v - c).symmetric_eigenvalues().min() >= -1e-10);
        let lam = milton_default_lambda(&cp, &cm);
        let m = milton_laminate(&cp, &cm, 0.4, &n, lam).unwrap();
        assert!((m - c).norm() <= 1e-8 * c.norm());
    }
}
