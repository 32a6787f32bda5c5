use alloc::vec;
use alloc::vec::Vec;

use super::contains_barycentric;
use crate::math::{barycentric, floor, powf, Vec3};

/// Uniform grid over tet bounding boxes. Each cell lists, in ascending order,
/// the tets whose bounding box overlaps it.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Vec3,
    cell: Vec3,
    dims: [usize; 3],
    cell_start: Vec<usize>,
    cell_tets: Vec<u32>,
}

impl PointLocator {
    pub fn build(vertices: &[Vec3], tets: &[[usize; 4]]) -> Self {
        if tets.is_empty() {
            return PointLocator {
                lo: Vec3::ZERO,
                cell: Vec3::new(1.0, 1.0, 1.0),
                dims: [1, 1, 1],
                cell_start: vec![0, 0],
                cell_tets: Vec::new(),
            };
        }
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for tet in tets {
            for &v in tet {
                lo = lo.min(vertices[v]);
                hi = hi.max(vertices[v]);
            }
        }
        let ext = hi - lo;
        let pad = ext.norm() * 1e-9 + 1e-300;
        let lo = lo - Vec3::new(pad, pad, pad);
        let ext = ext + Vec3::new(2.0 * pad, 2.0 * pad, 2.0 * pad);
        // About one tet per cell on average, scaled by aspect ratio.
        let vol = ext[0] * ext[1] * ext[2];
        let target = (tets.len() as f64).max(1.0);
        let h = if vol > 0.0 { powf(vol / target, 1.0 / 3.0) } else { ext.norm() };
        let mut dims = [1usize; 3];
        for a in 0..3 {
            dims[a] = (libm::ceil(ext[a] / h) as usize).clamp(1, 256);
        }
        let cell = Vec3::new(ext[0] / dims[0] as f64, ext[1] / dims[1] as f64, ext[2] / dims[2] as f64);
        let ncell = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; ncell + 1];
        let range = |tet: &[usize; 4]| {
            let mut tlo = vertices[tet[0]];
            let mut thi = tlo;
            for &v in &tet[1..] {
                tlo = tlo.min(vertices[v]);
                thi = thi.max(vertices[v]);
            }
            let a = Self::cell_coords(lo, cell, dims, tlo);
            let b = Self::cell_coords(lo, cell, dims, thi);
            (a, b)
        };
        for tet in tets {
            let (a, b) = range(tet);
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        counts[(i * dims[1] + j) * dims[2] + k + 1] += 1;
                    }
                }
            }
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut cell_tets = vec![0u32; counts[ncell]];
        for (t, tet) in tets.iter().enumerate() {
            let (a, b) = range(tet);
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for k in a[2]..=b[2] {
                        let c = (i * dims[1] + j) * dims[2] + k;
                        cell_tets[fill[c]] = t as u32;
                        fill[c] += 1;
                    }
                }
            }
        }
        PointLocator { lo, cell, dims, cell_start: counts, cell_tets }
    }

    fn cell_coords(lo: Vec3, cell: Vec3, dims: [usize; 3], p: Vec3) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = floor((p[a] - lo[a]) / cell[a]);
            out[a] = if f < 0.0 { 0 } else { (f as usize).min(dims[a] - 1) };
        }
        out
    }

    pub fn locate(&self, vertices: &[Vec3], tets: &[[usize; 4]], p: Vec3) -> Option<(usize, [f64; 4])> {
        if !p.is_finite() {
            return None;
        }
        let slack = self.cell.norm() * 1e-9;
        for a in 0..3 {
            let hi = self.lo[a] + self.cell[a] * self.dims[a] as f64;
            if p[a] < self.lo[a] - slack || p[a] > hi + slack {
                return None;
            }
        }
        let c = Self::cell_coords(self.lo, self.cell, self.dims, p);
        let idx = (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2];
        // Candidates near a cell wall may live only in the neighbor cell, so
        // also visit cells within slack and keep the lowest passing id.
        let mut best: Option<(usize, [f64; 4])> = None;
        let mut visit = |cell: usize| {
            for &t in &self.cell_tets[self.cell_start[cell]..self.cell_start[cell + 1]] {
                let t = t as usize;
                if best.is_some_and(|(b, _)| b <= t) {
                    break;
                }
                let pts = tets[t].map(|v| vertices[v]);
                if let Some(b) = barycentric(&pts, p) {
                    if contains_barycentric(&b) {
                        best = Some((t, b));
                        break;
                    }
                }
            }
        };
        visit(idx);
        let near_wall = (0..3).any(|a| {
            let local = (p[a] - self.lo[a]) / self.cell[a] - c[a] as f64;
            local < 1e-6 || local > 1.0 - 1e-6
        });
        if near_wall {
            let mut cells = Vec::new();
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    for dk in -1i64..=1 {
                        let q = [c[0] as i64 + di, c[1] as i64 + dj, c[2] as i64 + dk];
                        if (0..3).all(|a| q[a] >= 0 && (q[a] as usize) < self.dims[a]) {
                            let id = (q[0] as usize * self.dims[1] + q[1] as usize) * self.dims[2] + q[2] as usize;
                            if id != idx {
                                cells.push(id);
                            }
                        }
                    }
                }
            }
            for id in cells {
                visit(id);
            }
        }
        best
    }
}
