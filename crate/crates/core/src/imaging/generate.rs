use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PhaseImage;
use crate::error::{Error, Result};
use crate::tensor::Vec3;

/// Analytic inclusion geometry. Coordinates are physical; omitted centers
/// default to the middle of the domain. All solids except the half space are
/// periodically wrapped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        radius: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
    },
    /// `|x| + |y| + |z| < radius`.
    Octahedron {
        radius: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
    },
    /// Straight cylinder with flat ends.
    Fiber {
        axis: [f64; 3],
        radius: f64,
        length: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
    },
    /// Two plies of orthogonal cylindrical fibers in a cell of size `period`.
    /// The lower ply (`z < 0`) holds fibers along x at `y = ±p/4, z = −p/4`,
    /// the upper ply fibers along y at `x = ±p/4, z = p/4`. The pattern is
    /// rotated by `rotation_deg` about the x axis.
    CrossPly {
        #[serde(default = "default_ply_radius")]
        radius: f64,
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default)]
        rotation_deg: f64,
    },
    /// Randomly placed, randomly tilted fibers around the x axis.
    FiberPack { seed: u64, count: usize, radius: f64, length: f64, orientation_spread: f64 },
    /// `(x − point)·normal < 0`, not wrapped.
    HalfSpace { normal: [f64; 3], point: [f64; 3] },
}

fn default_ply_radius() -> f64 {
    0.2
}

fn default_period() -> f64 {
    1.0
}

#[inline]
fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

fn wrapped(x: [f64; 3], c: [f64; 3], l: [f64; 3]) -> Vec3 {
    Vec3::new(wrap(x[0] - c[0], l[0]), wrap(x[1] - c[1], l[1]), wrap(x[2] - c[2], l[2]))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::BadShapeSpec(format!("{name} must be non-negative, got {v}")));
    }
    Ok(())
}

fn segment_distance(p: &Vec3, axis: &Vec3, half_len: f64) -> f64 {
    let t = p.dot(axis).clamp(-half_len, half_len);
    (p - axis * t).norm()
}

impl Shape {
    /// Unit normal pointing out of the inclusion, of the surface through `x`
    /// (lateral surface for fibers). `None` for cross-ply and fiber packs and
    /// at singular points.
    pub fn outward_normal(&self, x: [f64; 3], lengths: [f64; 3]) -> Option<Vec3> {
        let mid = [0.5 * lengths[0], 0.5 * lengths[1], 0.5 * lengths[2]];
        let unit = |v: Vec3| (v.norm() > 0.0).then(|| v.normalize());
        match self {
            Shape::Sphere { center, .. } => unit(wrapped(x, center.unwrap_or(mid), lengths)),
            Shape::Octahedron { center, .. } => {
                let d = wrapped(x, center.unwrap_or(mid), lengths);
                unit(d.map(|v| if v == 0.0 { 0.0 } else { v.signum() }))
            }
            Shape::Fiber { axis, center, .. } => {
                let a = unit(Vec3::from(*axis))?;
                let d = wrapped(x, center.unwrap_or(mid), lengths);
                unit(d - a * d.dot(&a))
            }
            Shape::HalfSpace { normal, .. } => unit(Vec3::from(*normal)),
            Shape::CrossPly { .. } | Shape::FiberPack { .. } => None,
        }
    }
}

struct FiberSeg {
    center: [f64; 3],
    axis: Vec3,
}

/// Voxelizes `shape` on a grid of `dims` voxels spanning `lengths`. A voxel
/// belongs to the inclusion iff its center lies inside the solid.
pub fn generate(shape: &Shape, dims: [usize; 3], lengths: [f64; 3]) -> Result<PhaseImage> {
    let mid = [0.5 * lengths[0], 0.5 * lengths[1], 0.5 * lengths[2]];
    let inside: Box<dyn Fn([f64; 3]) -> bool + Sync> = match shape.clone() {
        Shape::Sphere { radius, center } => {
            check_positive("radius", radius)?;
            let c = center.unwrap_or(mid);
            Box::new(move |x| wrapped(x, c, lengths).norm_squared() < radius * radius)
        }
        Shape::Octahedron { radius, center } => {
            check_positive("radius", radius)?;
            let c = center.unwrap_or(mid);
            Box::new(move |x| wrapped(x, c, lengths).abs().sum() < radius)
        }
        Shape::Fiber { axis, radius, length, center } => {
            check_positive("radius", radius)?;
            check_positive("length", length)?;
            let a = Vec3::from(axis);
            if !(a.norm() > 0.0) {
                return Err(Error::BadShapeSpec("fiber axis must be non-zero".into()));
            }
            let a = a.normalize();
            let c = center.unwrap_or(mid);
            Box::new(move |x| segment_distance(&wrapped(x, c, lengths), &a, 0.5 * length) < radius)
        }
        Shape::CrossPly { radius, period, rotation_deg } => {
            check_positive("radius", radius)?;
            if !(period > 0.0) {
                return Err(Error::BadShapeSpec("period must be positive".into()));
            }
            let (s, c) = rotation_deg.to_radians().sin_cos();
            Box::new(move |x| {
                let d = [x[0] - mid[0], x[1] - mid[1], x[2] - mid[2]];
                let y = c * d[1] + s * d[2];
                let z = -s * d[1] + c * d[2];
                let p = [wrap(d[0], period), wrap(y, period), wrap(z, period)];
                let q = 0.25 * period;
                let r2 = radius * radius;
                let ply = |u: f64, w: f64| {
                    let du = (u.abs() - q).powi(2);
                    du + (w - if w < 0.0 { -q } else { q }).powi(2) < r2
                };
                if p[2] < 0.0 {
                    ply(p[1], p[2])
                } else {
                    ply(p[0], p[2])
                }
            })
        }
        Shape::FiberPack { seed, count, radius, length, orientation_spread } => {
            check_positive("radius", radius)?;
            check_positive("length", length)?;
            check_positive("orientation_spread", orientation_spread)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fibers: Vec<FiberSeg> = (0..count)
                .map(|_| {
                    let center = [rng.gen::<f64>() * lengths[0], rng.gen::<f64>() * lengths[1], rng.gen::<f64>() * lengths[2]];
                    let g2: f64 = rng.sample(StandardNormal);
                    let g3: f64 = rng.sample(StandardNormal);
                    let axis = Vec3::new(1.0, orientation_spread * g2, orientation_spread * g3).normalize();
                    FiberSeg { center, axis }
                })
                .collect();
            Box::new(move |x| fibers.iter().any(|f| segment_distance(&wrapped(x, f.center, lengths), &f.axis, 0.5 * length) < radius))
        }
        Shape::HalfSpace { normal, point } => {
            let n = Vec3::from(normal);
            if !(n.norm() > 0.0) {
                return Err(Error::BadShapeSpec("half-space normal must be non-zero".into()));
            }
            Box::new(move |x| (Vec3::from(x) - Vec3::from(point)).dot(&n) < 0.0)
        }
    };
    let mut img = PhaseImage::zeros(dims, lengths)?;
    let h = img.spacing();
    let plane = dims[1] * dims[2];
    let data: Vec<u8> = (0..dims[0])
        .into_par_iter()
        .flat_map_iter(|i| {
            let inside = &inside;
            (0..plane).map(move |jk| {
                let (j, k) = (jk / dims[2], jk % dims[2]);
                inside([(i as f64 + 0.5) * h[0], (j as f64 + 0.5) * h[1], (k as f64 + 0.5) * h[2]]) as u8
            })
        })
        .collect();
    img = PhaseImage::new(dims, lengths, data)?;
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sphere_and_deterministic_pack() {
        let img = generate(&Shape::Sphere { radius: 0.0, center: None }, [9, 9, 9], [1.0; 3]).unwrap();
        assert_eq!(img.inclusion_count(), 0);
        let spec = Shape::FiberPack { seed: 7, count: 5, radius: 0.08, length: 0.6, orientation_spread: 0.2 };
        let a = generate(&spec, [16, 16, 16], [1.0; 3]).unwrap();
        let b = generate(&spec, [16, 16, 16], [1.0; 3]).unwrap();
        assert_eq!(a, b);
        assert!(a.inclusion_count() > 0);
        assert!(generate(&Shape::Sphere { radius: -1.0, center: None }, [4, 4, 4], [1.0; 3]).is_err());
        assert!(generate(&Shape::Fiber { axis: [0.0; 3], radius: 0.1, length: 1.0, center: None }, [4, 4, 4], [1.0; 3]).is_err());
    }

    #[test]
    fn sphere_fraction_and_periodic_wrap() {
        let img = generate(&Shape::Sphere { radius: 0.4, center: None }, [64, 64, 64], [1.0; 3]).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.4f64.powi(3);
        assert!((img.inclusion_fraction() - exact).abs() < 2e-3);
        let corner = generate(&Shape::Sphere { radius: 0.4, center: Some([0.0; 3]) }, [64, 64, 64], [1.0; 3]).unwrap();
        assert_eq!(corner.inclusion_count(), img.inclusion_count());
    }

    #[test]
    fn octahedron_fraction() {
        let img = generate(&Shape::Octahedron { radius: 0.4, center: None }, [80, 80, 80], [1.0; 3]).unwrap();
        let exact = 4.0 / 3.0 * 0.4f64.powi(3);
        assert!((img.inclusion_fraction() - exact).abs() < 2e-3);
    }

    #[test]
    fn shape_spec_json() {
        let s: Shape = serde_json::from_str(r#"{"shape":"sphere","radius":0.4}"#).unwrap();
        assert_eq!(s, Shape::Sphere { radius: 0.4, center: None });
        let s: Shape = serde_json::from_str(r#"{"shape":"cross_ply"}"#).unwrap();
        assert_eq!(s, Shape::CrossPly { radius: 0.2, period: 1.0, rotation_deg: 0.0 });
        assert!(serde_json::from_str::<Shape>(r#"{"shape":"sphere","radius":0.4,"bogus":1}"#).is_err());
    }
}
