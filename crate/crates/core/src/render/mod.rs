//! CPU reference ray caster for muscle surfaces on the tet grid.
//!
//! Each ray enters the mesh through a boundary face, then walks tet to tet
//! through shared faces. Inside a tet it marches the segment between entry
//! and exit, classifying samples by the largest interpolated field, and
//! stops at the first fat-to-muscle transition.

mod camera;

use alloc::vec;
use alloc::vec::Vec;

pub use camera::Camera;

use crate::error::{Error, Result};
use crate::geometry::TriangleBvh;
use crate::math::{barycentric, Vec3};
use crate::solver::TissueFieldSet;
use crate::tetmesh::{TetMesh, CONTAINMENT_EPS, TET_FACES};

/// Outward normal (unnormalized) of face `k` and a point on it.
fn face_plane(tet: &[Vec3; 4], k: usize) -> (Vec3, Vec3) {
    let [a, b, c] = TET_FACES[k].map(|i| tet[i]);
    ((b - a).cross(c - a), a)
}

/// Exit distance and face of a ray starting inside a tet. Faces the ray
/// points into (negative denominator) are visible and skipped; ties go to
/// the lowest face index.
pub fn ray_tet_exit(tet: &[Vec3; 4], entry: Vec3, dir: Vec3) -> Result<(f64, usize)> {
    let b = barycentric(tet, entry).ok_or(Error::PointOutsideTet)?;
    if b.iter().any(|&x| x < -CONTAINMENT_EPS) {
        return Err(Error::PointOutsideTet);
    }
    Ok(exit_unchecked(tet, entry, dir))
}

fn exit_unchecked(tet: &[Vec3; 4], entry: Vec3, dir: Vec3) -> (f64, usize) {
    // Face normals point outward only for positively oriented tets.
    let flip = crate::math::signed_volume(tet[0], tet[1], tet[2], tet[3]) < 0.0;
    let lambdas: [f64; 4] = core::array::from_fn(|k| {
        let (n, a) = face_plane(tet, k);
        let n = if flip { -n } else { n };
        let denom = dir.dot(n);
        if denom > 0.0 {
            (a - entry).dot(n) / denom
        } else {
            f64::INFINITY
        }
    });
    let min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    // Rounding can separate faces that meet at the exit point; treat them
    // as tied so the lowest index wins.
    let tol = 1e-12 * (1.0 + crate::math::abs(min));
    let face = (0..4).find(|&k| lambdas[k] <= min + tol).unwrap_or(0);
    (min.max(0.0), face)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Marching step as a fraction of each tet's crossing length.
    pub march_step: f64,
    /// Colors indexed like the field set's tissues (the fat slot is unused).
    pub colors: Vec<[u8; 3]>,
    pub bone_color: [u8; 3],
    pub background: [u8; 4],
}

pub const DEFAULT_MARCH_STEP: f64 = 0.1;

/// A pleasant fixed palette for muscles.
pub const PALETTE: [[u8; 3]; 8] = [
    [200, 60, 50],
    [60, 130, 200],
    [90, 170, 80],
    [220, 160, 40],
    [150, 80, 180],
    [40, 170, 170],
    [210, 100, 150],
    [130, 110, 70],
];

impl RenderOptions {
    pub fn for_tissues(n: usize) -> Self {
        RenderOptions {
            march_step: DEFAULT_MARCH_STEP,
            colors: (0..n).map(|i| PALETTE[i % PALETTE.len()]).collect(),
            bone_color: [235, 230, 210],
            background: [0, 0, 0, 0],
        }
    }
}

/// What a ray stopped on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitKind {
    /// Tissue index into the field set.
    Muscle(usize),
    Bone,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelHit {
    pub kind: HitKind,
    pub point: Vec3,
    pub tet: usize,
    /// Ray distance to the hit.
    pub t: f64,
    /// Marching step length used in the hit tet.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// Row-major RGBA.
    pub rgba: Vec<u8>,
    pub hits: Vec<Option<PixelHit>>,
}

impl Image {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = 4 * (y as usize * self.width as usize + x as usize);
        [self.rgba[i], self.rgba[i + 1], self.rgba[i + 2], self.rgba[i + 3]]
    }

    /// Box-filter downsample by an integer factor.
    pub fn downsample(&self, factor: u32) -> Image {
        let (w, h) = (self.width / factor, self.height / factor);
        let mut rgba = vec![0u8; (w * h * 4) as usize];
        for y in 0..h {
            for x in 0..w {
                for c in 0..4 {
                    let mut sum = 0u32;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            sum += self.pixel(x * factor + dx, y * factor + dy)[c as usize] as u32;
                        }
                    }
                    let n = factor * factor;
                    rgba[((y * w + x) * 4 + c) as usize] = ((sum + n / 2) / n) as u8;
                }
            }
        }
        Image { width: w, height: h, rgba, hits: vec![None; (w * h) as usize] }
    }
}

/// Scene state shared by all rays.
#[derive(Debug, Clone)]
pub struct Renderer<'a> {
    mesh: &'a TetMesh,
    fields: &'a TissueFieldSet,
    opts: RenderOptions,
    boundary: TriangleBvh,
    /// `(tet, face)` of each boundary triangle.
    faces: Vec<(usize, usize)>,
}

impl<'a> Renderer<'a> {
    /// `mesh` may include bone tets; `fields` must cover all its vertices
    /// (values at bone-only vertices are ignored).
    pub fn new(mesh: &'a TetMesh, fields: &'a TissueFieldSet, opts: RenderOptions) -> Result<Self> {
        if fields.num_vertices() != mesh.num_vertices() {
            return Err(Error::InvalidInput("fields do not match the render mesh".into()));
        }
        if !(opts.march_step > 0.0 && opts.march_step <= 1.0) {
            return Err(Error::InvalidInput("march_step must lie in (0, 1]".into()));
        }
        let faces = mesh.boundary_faces();
        let tris = faces
            .iter()
            .map(|&(t, k)| {
                let tet = mesh.tet_points(t);
                TET_FACES[k].map(|i| tet[i])
            })
            .collect();
        Ok(Renderer { mesh, fields, opts, boundary: TriangleBvh::new(tris), faces })
    }

    pub fn options(&self) -> &RenderOptions {
        &self.opts
    }

    fn values(&self, t: usize, p: Vec3) -> Vec<f64> {
        let tet = self.mesh.tet(t);
        let b = barycentric(&self.mesh.tet_points(t), p).unwrap_or([0.25; 4]);
        (0..self.fields.num_tissues())
            .map(|k| {
                let f = self.fields.field(k);
                (0..4).map(|i| b[i] * f[tet[i]]).sum()
            })
            .collect()
    }

    /// Largest tissue at `p` (affine extension of tet `t`); ties go to the
    /// lowest index.
    fn label(&self, t: usize, p: Vec3) -> usize {
        argmax(&self.values(t, p))
    }

    fn is_fat(&self, k: usize) -> bool {
        k + 1 == self.fields.num_tissues()
    }

    /// `f_m - max(others)` on the affine extension of tet `t`.
    fn surface_fn(&self, t: usize, m: usize, p: Vec3) -> f64 {
        let v = self.values(t, p);
        let others = v.iter().enumerate().filter(|(k, _)| *k != m).map(|(_, x)| *x).fold(f64::NEG_INFINITY, f64::max);
        v[m] - others
    }

    /// Trace one ray; `None` when it leaves the mesh without hitting bone
    /// or muscle.
    pub fn trace(&self, origin: Vec3, dir: Vec3) -> Option<PixelHit> {
        let mut t_start = 0.0;
        let mut budget = 4 * self.mesh.num_tets() + 16;
        loop {
            let hit = self.boundary.first_hit(origin, dir, t_start)?;
            if !hit.front {
                // Exiting face first (origin inside the mesh or grazing);
                // continue past it.
                t_start = hit.t + 1e-12 * (1.0 + hit.t);
                budget = budget.checked_sub(1)?;
                continue;
            }
            let (mut tet, _) = self.faces[hit.triangle];
            let mut t = hit.t;
            loop {
                budget = budget.checked_sub(1)?;
                let p = origin + dir * t;
                if self.mesh.is_bone_tet(tet) {
                    return Some(PixelHit { kind: HitKind::Bone, point: p, tet, t, step: 0.0 });
                }
                let pts = self.mesh.tet_points(tet);
                let (lambda, face) = exit_unchecked(&pts, p, dir);
                let step = self.opts.march_step * lambda;
                if let Some(h) = self.march(tet, origin, dir, t, lambda, step) {
                    return Some(h);
                }
                t += lambda;
                match self.mesh.neighbor(tet, face) {
                    Some(n) => tet = n,
                    None => {
                        t_start = t + 1e-9 * (1.0 + t);
                        break;
                    }
                }
            }
        }
    }

    fn march(&self, tet: usize, origin: Vec3, dir: Vec3, t0: f64, lambda: f64, step: f64) -> Option<PixelHit> {
        let at = |s: f64| origin + dir * (t0 + s);
        let first = self.label(tet, at(0.0));
        if !self.is_fat(first) {
            return Some(self.shade_hit(tet, first, origin, dir, t0, step));
        }
        if lambda <= 0.0 {
            return None;
        }
        let n = crate::math::floor(1.0 / self.opts.march_step + 0.5).max(1.0) as usize;
        let mut prev = 0.0;
        for i in 1..=n {
            let s = if i == n { lambda } else { step * i as f64 };
            let k = self.label(tet, at(s));
            if !self.is_fat(k) {
                let (mut lo, mut hi) = (prev, s);
                while hi - lo > 1e-6 * lambda {
                    let mid = 0.5 * (lo + hi);
                    if self.is_fat(self.label(tet, at(mid))) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let m = self.label(tet, at(hi));
                return Some(self.shade_hit(tet, m, origin, dir, t0 + hi, step));
            }
            prev = s;
        }
        None
    }

    fn shade_hit(&self, tet: usize, m: usize, origin: Vec3, dir: Vec3, t: f64, step: f64) -> PixelHit {
        PixelHit { kind: HitKind::Muscle(m), point: origin + dir * t, tet, t, step }
    }

    /// Lambertian headlight shading of a hit.
    pub fn color(&self, hit: &PixelHit, dir: Vec3) -> [u8; 4] {
        match hit.kind {
            HitKind::Bone => {
                let c = self.opts.bone_color;
                [c[0], c[1], c[2], 255]
            }
            HitKind::Muscle(m) => {
                let h = 1e-3 * self.mesh.mean_edge_length();
                let mut g = Vec3::ZERO;
                for a in 0..3 {
                    let mut e = Vec3::ZERO;
                    e[a] = h;
                    g[a] = (self.surface_fn(hit.tet, m, hit.point + e) - self.surface_fn(hit.tet, m, hit.point - e))
                        / (2.0 * h);
                }
                // The field grows into the muscle, so the outward normal is -g.
                let lambert = (-g).normalized().map_or(1.0, |n| n.dot(-dir).max(0.0));
                let shade = 0.2 + 0.8 * lambert;
                let c = self.opts.colors.get(m).copied().unwrap_or([255, 255, 255]);
                let ch = |x: u8| (x as f64 * shade + 0.5).min(255.0) as u8;
                [ch(c[0]), ch(c[1]), ch(c[2]), 255]
            }
        }
    }

    /// Color and hit record for pixel `(x, y)`.
    pub fn render_pixel(&self, camera: &Camera, x: u32, y: u32) -> ([u8; 4], Option<PixelHit>) {
        let (o, d) = camera.pixel_ray(x, y);
        match self.trace(o, d) {
            Some(hit) => (self.color(&hit, d), Some(hit)),
            None => (self.opts.background, None),
        }
    }

    /// Render rows `y0..y1` into a row-major RGBA buffer.
    pub fn render_rows(&self, camera: &Camera, y0: u32, y1: u32) -> (Vec<u8>, Vec<Option<PixelHit>>) {
        let mut rgba = Vec::with_capacity(((y1 - y0) * camera.width * 4) as usize);
        let mut hits = Vec::with_capacity(((y1 - y0) * camera.width) as usize);
        for y in y0..y1 {
            for x in 0..camera.width {
                let (c, h) = self.render_pixel(camera, x, y);
                rgba.extend_from_slice(&c);
                hits.push(h);
            }
        }
        (rgba, hits)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

/// Render a full image sequentially.
pub fn render_image(mesh: &TetMesh, fields: &TissueFieldSet, camera: &Camera, opts: RenderOptions) -> Result<Image> {
    camera.validate()?;
    let r = Renderer::new(mesh, fields, opts)?;
    let (rgba, hits) = r.render_rows(camera, 0, camera.height);
    Ok(Image { width: camera.width, height: camera.height, rgba, hits })
}
