use rayon::prelude::*;

use super::{BoxelKind, ComboGrid};
use crate::tensor::Vec3;

/// Planar interface patch of a composite boxel. The plane is `x·N = offset`
/// in boxel-local coordinates; the `+` phase lies on the side `x·N < offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub boxel: usize,
    pub normal: Vec3,
    pub offset: f64,
    /// Polygon vertices in global coordinates, ordered around the normal.
    pub vertices: Vec<Vec3>,
    pub centroid: Vec3,
    pub area: f64,
}

const BOX_EDGES: [([usize; 3], usize); 12] = [
    ([0, 0, 0], 0),
    ([0, 1, 0], 0),
    ([0, 0, 1], 0),
    ([0, 1, 1], 0),
    ([0, 0, 0], 1),
    ([1, 0, 0], 1),
    ([0, 0, 1], 1),
    ([1, 0, 1], 1),
    ([0, 0, 0], 2),
    ([1, 0, 0], 2),
    ([0, 1, 0], 2),
    ([1, 1, 0], 2),
];

/// Polygon where the plane `x·n = d` cuts the box `[0, l]`, ordered
/// counter-clockwise about `n`.
pub fn plane_box_polygon(l: [f64; 3], n: &Vec3, d: f64) -> Vec<Vec3> {
    let mut pts: Vec<Vec3> = Vec::with_capacity(6);
    let tol = 1e-12 * (l[0] + l[1] + l[2]);
    for (start, axis) in BOX_EDGES {
        let p = Vec3::new(start[0] as f64 * l[0], start[1] as f64 * l[1], start[2] as f64 * l[2]);
        let mut q = p;
        q[axis] = l[axis];
        let sp = p.dot(n) - d;
        let sq = q.dot(n) - d;
        let cand = if sp.abs() <= tol * n.norm() {
            Some(p)
        } else if sq.abs() <= tol * n.norm() {
            Some(q)
        } else if sp * sq < 0.0 {
            Some(p + (q - p) * (sp / (sp - sq)))
        } else {
            None
        };
        if let Some(c) = cand {
            if !pts.iter().any(|x| (x - c).norm() <= tol) {
                pts.push(c);
            }
        }
    }
    if pts.len() < 3 {
        return pts;
    }
    let c = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let e = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = (e - n * n.dot(&e) / n.norm_squared()).normalize();
    let v = n.normalize().cross(&u);
    pts.sort_by(|a, b| {
        let ta = (a - c).dot(&v).atan2((a - c).dot(&u));
        let tb = (b - c).dot(&v).atan2((b - c).dot(&u));
        ta.partial_cmp(&tb).unwrap()
    });
    pts
}

pub fn polygon_area(pts: &[Vec3]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut s = Vec3::zeros();
    for i in 0..pts.len() {
        s += pts[i].cross(&pts[(i + 1) % pts.len()]);
    }
    0.5 * s.norm()
}

fn clipped_rect_area(a: f64, b: f64, na: f64, nb: f64, rhs: f64) -> f64 {
    // Area of {(y, z) ∈ [0,a]×[0,b] : na y + nb z ≤ rhs} with na, nb ≥ 0.
    if rhs <= 0.0 {
        return 0.0;
    }
    if na * a + nb * b <= rhs {
        return a * b;
    }
    let poly = [(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)];
    let inside = |p: (f64, f64)| na * p.0 + nb * p.1 - rhs;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(6);
    for i in 0..4 {
        let p = poly[i];
        let q = poly[(i + 1) % 4];
        let (sp, sq) = (inside(p), inside(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if sp * sq < 0.0 {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    let mut s = 0.0;
    for i in 0..out.len() {
        let (p, q) = (out[i], out[(i + 1) % out.len()]);
        s += p.0 * q.1 - q.0 * p.1;
    }
    0.5 * s.abs()
}

/// Volume of `{x ∈ [0, l] : x·n ≤ d}`, computed with the divergence theorem
/// over the clipped faces (stable for nearly axis-aligned `n`).
pub fn halfspace_box_volume(l: [f64; 3], n: &Vec3, d: f64) -> f64 {
    let mut m = *n;
    let mut rhs = d;
    for a in 0..3 {
        if m[a] < 0.0 {
            rhs -= m[a] * l[a];
            m[a] = -m[a];
        }
    }
    let full = l[0] * l[1] * l[2];
    let top = m[0] * l[0] + m[1] * l[1] + m[2] * l[2];
    if rhs <= 0.0 {
        return 0.0;
    }
    if rhs >= top {
        return full;
    }
    let norm = m.norm();
    let mut v = 0.0;
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        v += l[a] * clipped_rect_area(l[b], l[c], m[b], m[c], rhs - m[a] * l[a]);
    }
    let cap = polygon_area(&plane_box_polygon(l, &(m / norm), rhs / norm));
    v += rhs / norm * cap;
    (v / 3.0).clamp(0.0, full)
}

/// Offset `d` of the plane `x·n = d` cutting volume fraction `c_plus` off the
/// box on the side `x·n < d`.
pub fn facet_plane_offset(l: [f64; 3], n: &Vec3, c_plus: f64) -> f64 {
    let corners = (0..8).map(|c| Vec3::new((c & 1) as f64 * l[0], ((c >> 1) & 1) as f64 * l[1], ((c >> 2) & 1) as f64 * l[2]).dot(n));
    let (mut lo, mut hi) = corners.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let target = c_plus * l[0] * l[1] * l[2];
    let width = hi - lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if halfspace_box_volume(l, n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * width {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Interface polygons of all composite boxels with assigned normals.
pub fn facet_export(grid: &ComboGrid) -> Vec<Facet> {
    let l = grid.boxel_size();
    grid.composite_indices()
        .into_par_iter()
        .filter(|&b| grid.kinds[b] == BoxelKind::Composite && grid.normals[b].norm() > 0.0)
        .map(|b| {
            let n = grid.normals[b];
            let d = facet_plane_offset(l, &n, grid.c_plus[b]);
            let origin = grid.boxel_origin(b);
            let local = plane_box_polygon(l, &n, d);
            let area = polygon_area(&local);
            let vertices: Vec<Vec3> = local.iter().map(|p| p + origin).collect();
            let centroid = polygon_centroid(&vertices);
            Facet { boxel: b, normal: n, offset: d, vertices, centroid, area }
        })
        .collect()
}

fn polygon_centroid(pts: &[Vec3]) -> Vec3 {
    if pts.len() < 3 {
        return pts.iter().sum::<Vec3>() / pts.len().max(1) as f64;
    }
    let o = pts[0];
    let mut acc = Vec3::zeros();
    let mut total = 0.0;
    for i in 1..pts.len() - 1 {
        let a = (pts[i] - o).cross(&(pts[i + 1] - o)).norm() * 0.5;
        acc += (o + pts[i] + pts[i + 1]) / 3.0 * a;
        total += a;
    }
    if total > 0.0 {
        acc / total
    } else {
        pts.iter().sum::<Vec3>() / pts.len() as f64
    }
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Edge of a facet polygon lying on the face `x_axis = value` (global coords).
fn face_segment(f: &Facet, axis: usize, value: f64, tol: f64) -> Option<(Vec3, Vec3)> {
    let on: Vec<Vec3> = f.vertices.iter().filter(|v| (v[axis] - value).abs() <= tol).copied().collect();
    match on.len() {
        0 => None,
        1 => Some((on[0], on[0])),
        _ => {
            let (mut best, mut dist) = ((on[0], on[1]), -1.0);
            for i in 0..on.len() {
                for j in i + 1..on.len() {
                    let d = (on[i] - on[j]).norm();
                    if d > dist {
                        dist = d;
                        best = (on[i], on[j]);
                    }
                }
            }
            Some(best)
        }
    }
}

/// Mean mismatch of facet edges across faces shared by face-adjacent
/// composite boxels. For each shared face where at least one facet touches
/// the face, the contribution is the mean distance of the four segment
/// endpoints to the opposite segment, or the segment length when the
/// neighbor facet does not reach the face. Smaller is better; 0 means the
/// facets form a watertight surface.
pub fn facet_gap_metric(grid: &ComboGrid, facets: &[Facet]) -> f64 {
    let mut by_boxel = vec![usize::MAX; grid.len()];
    for (i, f) in facets.iter().enumerate() {
        by_boxel[f.boxel] = i;
    }
    let h = grid.boxel_size();
    let tol = 1e-9 * (h[0] + h[1] + h[2]);
    let (mut sum, mut count) = (0.0, 0usize);
    for f in facets {
        let c = grid.coords(f.boxel);
        for axis in 0..3 {
            if grid.dims[axis] < 2 {
                continue;
            }
            let mut nc = c;
            nc[axis] = (c[axis] + 1) % grid.dims[axis];
            let nb = grid.index(nc[0], nc[1], nc[2]);
            if by_boxel[nb] == usize::MAX {
                continue;
            }
            let g = &facets[by_boxel[nb]];
            let face = (c[axis] + 1) as f64 * h[axis];
            let wrapped = nc[axis] == 0;
            let mut shift = Vec3::zeros();
            if wrapped {
                shift[axis] = grid.lengths[axis];
            }
            let sa = face_segment(f, axis, face, tol);
            let sb = face_segment(g, axis, if wrapped { 0.0 } else { face }, tol).map(|(a, b)| (a + shift, b + shift));
            let gap = match (sa, sb) {
                (None, None) => continue,
                (Some((a, b)), None) | (None, Some((a, b))) => (a - b).norm(),
                (Some((a0, a1)), Some((b0, b1))) => {
                    0.25 * (point_segment_distance(&a0, &b0, &b1)
                        + point_segment_distance(&a1, &b0, &b1)
                        + point_segment_distance(&b0, &a0, &a1)
                        + point_segment_distance(&b1, &a0, &a1))
                }
            };
            sum += gap;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mid_plane() {
        let d = facet_plane_offset([1.0; 3], &Vec3::x(), 0.5);
        assert!((d - 0.5).abs() < 1e-12);
        let poly = plane_box_polygon([1.0; 3], &Vec3::x(), d);
        assert_eq!(poly.len(), 4);
        assert!((polygon_area(&poly) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn volume_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..20 {
            let l = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
            let n = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let c = rng.gen_range(0.01..0.99);
            let d = facet_plane_offset(l, &n, c);
            let v = halfspace_box_volume(l, &n, d);
            assert!((v / (l[0] * l[1] * l[2]) - c).abs() < 1e-8);
            // Midpoint quadrature oracle.
            let m = 60;
            let mut inside = 0usize;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let x = Vec3::new((i as f64 + 0.5) / m as f64 * l[0], (j as f64 + 0.5) / m as f64 * l[1], (k as f64 + 0.5) / m as f64 * l[2]);
                        inside += (x.dot(&n) < d) as usize;
                    }
                }
            }
            assert!((inside as f64 / (m * m * m) as f64 - c).abs() < 0.02);
        }
    }

    #[test]
    fn nearly_axis_aligned_volume_is_stable() {
        let l = [1.0, 2.0, 0.5];
        for eps in [1e-14, 1e-10, 1e-6, 1e-3] {
            let n = Vec3::new(1.0, eps, -eps).normalize();
            let v = halfspace_box_volume(l, &n, 0.3 * n.x);
            assert!((v - 0.3 * 2.0 * 0.5).abs() < 1e-3 + 1e-12, "eps {eps}: {v}");
        }
    }
}
