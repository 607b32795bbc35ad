use super::ComboMeta;
use crate::material::{thermal_flux, ThermalParams};
use crate::tensor::*;

#[derive(Clone, Copy, Debug)]
pub struct ThermalLaminate {
    /// Scalar gradient jump, `g₊ − g₋ = a N`.
    pub a: f64,
    pub g_plus: Vec3,
    pub g_minus: Vec3,
    pub q_box: Vec3,
    pub kappa_box: Tensor2,
}

pub fn thermal_jump(g_box: &Vec3, k_plus: &ThermalParams, k_minus: &ThermalParams, meta: &ComboMeta) -> ThermalLaminate {
    let n = meta.normal();
    let (cp, cm) = (meta.c_plus(), meta.c_minus());
    let delta = n.dot(&((k_plus.kappa / cp + k_minus.kappa / cm) * n));
    let dk = k_plus.kappa - k_minus.kappa;
    let a = n.dot(&((k_minus.kappa - k_plus.kappa) * g_box)) / delta;
    let g_plus = g_box + n * (a / cp);
    let g_minus = g_box - n * (a / cm);
    let q_box = thermal_flux(&g_plus, k_plus) * cp + thermal_flux(&g_minus, k_minus) * cm;
    let dkn = dk * n;
    let kappa_box = k_plus.kappa * cp + k_minus.kappa * cm - dkn * (n.transpose() * dk) / delta;
    ThermalLaminate { a, g_plus, g_minus, q_box, kappa_box }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng) -> Tensor2 {
        let a = Tensor2::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        a * a.transpose() + Tensor2::identity() * 0.1
    }

    #[test]
    fn identical_phases() {
        let k = ThermalParams { kappa: Tensor2::new(2., 0.1, 0., 0.1, 1., 0.2, 0., 0.2, 3.) };
        let meta = ComboMeta::new(Vec3::new(1., 2., 3.), 0.3).unwrap();
        let r = thermal_jump(&Vec3::new(1., -1., 0.5), &k, &k, &meta);
        assert!(r.a.abs() < 1e-15);
        assert!((r.kappa_box - k.kappa).norm() < 1e-14);
    }

    #[test]
    fn flux_continuity_and_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let kp = ThermalParams { kappa: random_spd(&mut rng) };
            let km = ThermalParams { kappa: random_spd(&mut rng) };
            let n = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let meta = ComboMeta::new(n, rng.gen_range(0.01..0.99)).unwrap();
            let g = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r = thermal_jump(&g, &kp, &km, &meta);
            let jump = (thermal_flux(&r.g_plus, &kp) - thermal_flux(&r.g_minus, &km)).dot(&meta.normal());
            assert!(jump.abs() <= 1e-12 * (kp.kappa.norm() + km.kappa.norm()) * g.norm() / meta.c_plus().min(meta.c_minus()));
            assert!((r.g_plus * meta.c_plus() + r.g_minus * meta.c_minus() - g).norm() < 1e-14);
            assert!((r.q_box + r.kappa_box * g).norm() < 1e-12 * r.q_box.norm().max(1.0));
        }
    }
}
