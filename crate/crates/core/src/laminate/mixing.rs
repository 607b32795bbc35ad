use crate::error::{Error, Result};
use crate::tensor::*;

pub fn mix_voigt(c_plus: &SymTensor4, c_minus: &SymTensor4, cp: f64) -> SymTensor4 {
    c_plus * cp + c_minus * (1.0 - cp)
}

pub fn mix_reuss(c_plus: &SymTensor4, c_minus: &SymTensor4, cp: f64) -> Result<SymTensor4> {
    let ip = invert6(c_plus)?;
    let im = invert6(c_minus)?;
    invert6(&(ip * cp + im * (1.0 - cp)))
}

pub fn mix_hill(c_plus: &SymTensor4, c_minus: &SymTensor4, cp: f64) -> Result<SymTensor4> {
    Ok((mix_voigt(c_plus, c_minus, cp) + mix_reuss(c_plus, c_minus, cp)?) * 0.5)
}

pub(crate) fn invert6(m: &SymTensor4) -> Result<SymTensor4> {
    m.try_inverse().ok_or(Error::SingularMatrix { det: m.determinant() })
}

/// Laminate projector `ℙ(N)` in Mandel form.
pub fn laminate_projector(n: &Vec3) -> SymTensor4 {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    sym4_from_fn(|i, j, k, l| {
        0.5 * (n[i] * d(j, k) * n[l] + n[i] * d(j, l) * n[k] + n[j] * d(i, k) * n[l] + n[j] * d(i, l) * n[k])
            - n[i] * n[j] * n[k] * n[l]
    })
}

/// Default Milton parameter: slightly above the largest phase eigenvalue.
pub fn milton_default_lambda(c_plus: &SymTensor4, c_minus: &SymTensor4) -> f64 {
    1.01 * max_eigenvalue(c_plus).max(max_eigenvalue(c_minus))
}

fn max_eigenvalue(m: &SymTensor4) -> f64 {
    m.symmetric_eigenvalues().max()
}

/// Implicit laminate mixing rule with auxiliary parameter `lambda`.
pub fn milton_laminate(c_plus: &SymTensor4, c_minus: &SymTensor4, cp: f64, n: &Vec3, lambda: f64) -> Result<SymTensor4> {
    let bound = max_eigenvalue(c_plus).max(max_eigenvalue(c_minus));
    if !(lambda > bound) {
        return Err(Error::BadLambda { lambda, bound });
    }
    let p = laminate_projector(&n.normalize());
    let id = SymTensor4::identity();
    let term = |c: &SymTensor4| -> Result<SymTensor4> { invert6(&(p + invert6(&(c - id * lambda))? * lambda)) };
    let y = term(c_plus)? * cp + term(c_minus)? * (1.0 - cp);
    let out = id * lambda + invert6(&(invert6(&y)? - p))? * lambda;
    Ok((out + out.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(rng: &mut ChaCha8Rng) -> SymTensor4 {
        let a = SymTensor4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        a * a.transpose() + SymTensor4::identity() * 0.5
    }

    fn min_eig(m: &SymTensor4) -> f64 {
        ((m + m.transpose()) * 0.5).symmetric_eigenvalues().min()
    }

    #[test]
    fn identical_phases_and_single_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = random_spd(&mut rng);
        let d = random_spd(&mut rng);
        for m in [mix_voigt(&c, &c, 0.3), mix_reuss(&c, &c, 0.3).unwrap(), mix_hill(&c, &c, 0.3).unwrap()] {
            assert!((m - c).norm() < 1e-12 * c.norm());
        }
        for m in [mix_voigt(&c, &d, 1.0), mix_reuss(&c, &d, 1.0).unwrap(), mix_hill(&c, &d, 1.0).unwrap()] {
            assert!((m - c).norm() < 1e-12 * c.norm());
        }
        let lam = milton_default_lambda(&c, &c);
        let m = milton_laminate(&c, &c, 0.4, &Vec3::new(1.0, 2.0, 3.0), lam).unwrap();
        assert!((m - c).norm() < 1e-10 * c.norm());
    }

    #[test]
    fn bounds_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let c = random_spd(&mut rng);
            let d = random_spd(&mut rng);
            let cp = rng.gen_range(0.05..0.95);
            let v = mix_voigt(&c, &d, cp);
            let r = mix_reuss(&c, &d, cp).unwrap();
            let h = mix_hill(&c, &d, cp).unwrap();
            assert!(min_eig(&(h - r)) >= -1e-10);
            assert!(min_eig(&(v - h)) >= -1e-10);
        }
    }

    #[test]
    fn milton_rejects_small_lambda_and_is_lambda_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let c = random_spd(&mut rng);
        let d = random_spd(&mut rng);
        let n = Vec3::new(0.3, -0.4, 0.8);
        let lam = milton_default_lambda(&c, &d);
        assert!(matches!(milton_laminate(&c, &d, 0.5, &n, 0.5 * lam), Err(Error::BadLambda { .. })));
        let a = milton_laminate(&c, &d, 0.5, &n, lam).unwrap();
        let b = milton_laminate(&c, &d, 0.5, &n, 2.0 * lam).unwrap();
        assert!((a - b).norm() <= 1e-8 * a.norm());
    }
}
