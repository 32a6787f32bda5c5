//! Ray and point queries against triangles, plus a bounding-volume
//! hierarchy over triangle soups.

use alloc::vec::Vec;

use crate::math::{abs, Vec3};

/// Möller–Trumbore intersection. Returns the ray distance `t >= t_min` and
/// whether the hit is on the front side (counter-clockwise seen from the
/// ray origin).
pub fn ray_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3], t_min: f64) -> Option<(f64, bool)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if abs(det) <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t < t_min {
        return None;
    }
    Some((t, det > 0.0))
}

/// Closest point on a triangle to `p`.
pub fn closest_point_on_triangle(p: Vec3, tri: &[Vec3; 3]) -> Vec3 {
    // Region classification after Ericson, "Real-Time Collision Detection".
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `start..start+count` into `order`. Inner: `start` is the right
    /// child, the left child follows this node.
    start: usize,
    count: usize,
}

/// Median-split BVH over triangles. Queries return the lowest triangle id
/// among equally distant hits, so results do not depend on traversal order.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

/// A ray hit: distance, triangle id, front-facing flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub front: bool,
}

impl TriangleBvh {
    pub fn new(tris: Vec<[Vec3; 3]>) -> Self {
        let mut bvh = TriangleBvh { order: (0..tris.len()).collect(), tris, nodes: Vec::new() };
        if !bvh.tris.is_empty() {
            let centroids: Vec<Vec3> = bvh.tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
            bvh.build(0, bvh.order.len(), &centroids);
        }
        bvh
    }

    pub fn triangles(&self) -> &[[Vec3; 3]] {
        &self.tris
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    fn bounds(&self, range: &[usize]) -> (Vec3, Vec3) {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for &i in range {
            for p in self.tris[i] {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        (lo, hi)
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Vec3]) -> usize {
        let (lo, hi) = self.bounds(&self.order[start..end]);
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, count: end - start });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let ext = hi - lo;
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] { 0 } else if ext[1] >= ext[2] { 1 } else { 2 };
        self.order[start..end].sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
        let mid = (start + end) / 2;
        self.build(start, mid, centroids);
        let right = self.build(mid, end, centroids);
        self.nodes[id].start = right;
        self.nodes[id].count = 0;
        id
    }

    /// Nearest hit with `t >= t_min`.
    pub fn first_hit(&self, origin: Vec3, dir: Vec3, t_min: f64) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir[0], 1.0 / dir[1], 1.0 / dir[2]);
        let mut best: Option<RayHit> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(n) = stack.pop() {
            let node = self.nodes[n];
            let limit = best.map_or(f64::INFINITY, |b| b.t);
            if !slab_hit(node.lo, node.hi, origin, inv, t_min, limit) {
                continue;
            }
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    if let Some((t, front)) = ray_triangle(origin, dir, &self.tris[i], t_min) {
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && i < b.triangle),
                        };
                        if better {
                            best = Some(RayHit { t, triangle: i, front });
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(n + 1);
            }
        }
        best
    }

    /// Closest point over all triangles, with its distance and triangle id.
    pub fn closest_point(&self, p: Vec3) -> Option<(Vec3, f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(Vec3, f64, usize)> = None;
        let mut stack = alloc::vec![0usize];
        while let Some(n) = stack.pop() {
            let node = self.nodes[n];
            let limit = best.map_or(f64::INFINITY, |b| b.1);
            if box_distance(node.lo, node.hi, p) > limit {
                continue;
            }
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    let q = closest_point_on_triangle(p, &self.tris[i]);
                    let d = q.distance(p);
                    let better = match best {
                        None => true,
                        Some(b) => d < b.1 || (d == b.1 && i < b.2),
                    };
                    if better {
                        best = Some((q, d, i));
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(n + 1);
            }
        }
        best
    }
}

fn slab_hit(lo: Vec3, hi: Vec3, o: Vec3, inv: Vec3, t_min: f64, t_max: f64) -> bool {
    let pad = 1e-9 * (hi - lo).norm().max(1e-300);
    let mut t0 = t_min;
    let mut t1 = t_max;
    for a in 0..3 {
        let mut ta = (lo[a] - pad - o[a]) * inv[a];
        let mut tb = (hi[a] + pad - o[a]) * inv[a];
        if ta.is_nan() || tb.is_nan() {
            // Ray parallel to the slab and origin on its plane.
            continue;
        }
        if ta > tb {
            core::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

fn box_distance(lo: Vec3, hi: Vec3, p: Vec3) -> f64 {
    let mut d = Vec3::ZERO;
    for a in 0..3 {
        d[a] = (lo[a] - p[a]).max(0.0).max(p[a] - hi[a]);
    }
    d.norm()
}
