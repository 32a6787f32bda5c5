//! Tetrahedral mesh container, adjacency and point location.

mod locate;
mod operators;

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{barycentric, signed_volume, Vec3};

pub use locate::PointLocator;
pub use operators::{
    anisotropic_laplacian, cotan_laplacian, gradient_operator, mass_operator, stiffness_from_tensors,
    tet_basis_gradients,
};

/// Vertices of face `k`, which lies opposite local vertex `k`. Ordered so the
/// normal `(b-a)x(c-a)` points out of a positively oriented tet.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// The six local edges of a tet.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Barycentric slack for containment tests.
pub const CONTAINMENT_EPS: f64 = 1e-9;

/// Per-vertex boundary role. A vertex with no flags is interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VertexTag(u8);

impl VertexTag {
    pub const INTERIOR: VertexTag = VertexTag(0);
    pub const SKIN: VertexTag = VertexTag(1);
    pub const BONE_SURFACE: VertexTag = VertexTag(2);
    pub const OPEN_BOUNDARY: VertexTag = VertexTag(4);

    pub fn contains(self, other: VertexTag) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn insert(&mut self, other: VertexTag) {
        self.0 |= other.0;
    }

    pub fn is_interior(self) -> bool {
        self.0 == 0
    }
}

/// Tag lists as they appear in the sidecar file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MeshTags {
    pub skin_vertices: Vec<usize>,
    pub bone_surface_vertices: Vec<usize>,
    pub open_boundary_vertices: Vec<usize>,
    pub bone_tets: Vec<usize>,
}

/// An immutable, consistently oriented, manifold tet mesh.
#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    tags: Vec<VertexTag>,
    bone_tets: Vec<bool>,
    /// Neighbor across each face, `usize::MAX` on the boundary.
    adjacency: Vec<[usize; 4]>,
    locator: PointLocator,
}

const NONE: usize = usize::MAX;

impl TetMesh {
    /// Build a mesh, repairing inverted tets by swapping two indices.
    pub fn new(vertices: Vec<Vec3>, mut tets: Vec<[usize; 4]>, tags: &MeshTags) -> Result<Self> {
        let nv = vertices.len();
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!("vertex {i} has a non-finite coordinate")));
        }
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidInput(alloc::format!(
                    "tet {t} references vertex {bad} but there are {nv} vertices"
                )));
            }
            let s: BTreeSet<usize> = tet.iter().copied().collect();
            if s.len() != 4 {
                return Err(Error::DegenerateTet(t));
            }
            let p = tet.map(|v| vertices[v]);
            let vol = signed_volume(p[0], p[1], p[2], p[3]);
            if vol == 0.0 || !vol.is_finite() {
                return Err(Error::DegenerateTet(t));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        let mut vtags = vec![VertexTag::INTERIOR; nv];
        for (list, tag) in [
            (&tags.skin_vertices, VertexTag::SKIN),
            (&tags.bone_surface_vertices, VertexTag::BONE_SURFACE),
            (&tags.open_boundary_vertices, VertexTag::OPEN_BOUNDARY),
        ] {
            for &v in list {
                if v >= nv {
                    return Err(Error::InvalidInput(alloc::format!("tagged vertex {v} out of range")));
                }
                vtags[v].insert(tag);
            }
        }
        let mut bone = vec![false; tets.len()];
        for &t in &tags.bone_tets {
            if t >= tets.len() {
                return Err(Error::InvalidInput(alloc::format!("bone tet {t} out of range")));
            }
            bone[t] = true;
        }
        let adjacency = build_adjacency(&tets)?;
        let locator = PointLocator::build(&vertices, &tets);
        Ok(TetMesh { vertices, tets, tags: vtags, bone_tets: bone, adjacency, locator })
    }

    /// Mesh without tags.
    pub fn from_geometry(vertices: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Result<Self> {
        Self::new(vertices, tets, &MeshTags::default())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Vec3 {
        self.vertices[v]
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn tet(&self, t: usize) -> [usize; 4] {
        self.tets[t]
    }

    pub fn tet_points(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tag(&self, v: usize) -> VertexTag {
        self.tags[v]
    }

    pub fn tags(&self) -> &[VertexTag] {
        &self.tags
    }

    pub fn is_bone_tet(&self, t: usize) -> bool {
        self.bone_tets[t]
    }

    pub fn bone_tet_ids(&self) -> Vec<usize> {
        (0..self.tets.len()).filter(|&t| self.bone_tets[t]).collect()
    }

    /// Neighbor of `t` across face `k` (the face opposite local vertex `k`).
    pub fn neighbor(&self, t: usize, k: usize) -> Option<usize> {
        match self.adjacency[t][k] {
            NONE => None,
            n => Some(n),
        }
    }

    pub fn neighbors(&self, t: usize) -> [Option<usize>; 4] {
        [0, 1, 2, 3].map(|k| self.neighbor(t, k))
    }

    /// Global vertex ids of face `k` of tet `t`, outward oriented.
    pub fn face_vertices(&self, t: usize, k: usize) -> [usize; 3] {
        let tet = self.tets[t];
        TET_FACES[k].map(|i| tet[i])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        signed_volume(p[0], p[1], p[2], p[3])
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn tet_centroid(&self, t: usize) -> Vec3 {
        let p = self.tet_points(t);
        (p[0] + p[1] + p[2] + p[3]) * 0.25
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for &v in &self.vertices {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.tets.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for tet in &self.tets {
            for [a, b] in TET_EDGES {
                sum += self.vertices[tet[a]].distance(self.vertices[tet[b]]);
            }
        }
        sum / (6 * self.tets.len()) as f64
    }

    /// Boundary faces as `(tet, local face)` pairs, in tet order.
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for t in 0..self.tets.len() {
            for k in 0..4 {
                if self.adjacency[t][k] == NONE {
                    out.push((t, k));
                }
            }
        }
        out
    }

    /// Vertices incident to any boundary face.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut on = vec![false; self.vertices.len()];
        for (t, k) in self.boundary_faces() {
            for v in self.face_vertices(t, k) {
                on[v] = true;
            }
        }
        (0..on.len()).filter(|&v| on[v]).collect()
    }

    /// Vertices referenced by at least one tet.
    pub fn referenced_vertices(&self) -> Vec<bool> {
        let mut used = vec![false; self.vertices.len()];
        for tet in &self.tets {
            for &v in tet {
                used[v] = true;
            }
        }
        used
    }

    /// Copy of the mesh with different tags (geometry unchanged).
    pub fn with_tags(&self, tags: &MeshTags) -> Result<Self> {
        Self::new(self.vertices.clone(), self.tets.clone(), tags)
    }

    /// Tag lists in sidecar form.
    pub fn mesh_tags(&self) -> MeshTags {
        let pick = |tag: VertexTag| (0..self.tags.len()).filter(|&v| self.tags[v].contains(tag)).collect();
        MeshTags {
            skin_vertices: pick(VertexTag::SKIN),
            bone_surface_vertices: pick(VertexTag::BONE_SURFACE),
            open_boundary_vertices: pick(VertexTag::OPEN_BOUNDARY),
            bone_tets: self.bone_tet_ids(),
        }
    }

    /// Tet containing `p` and its barycentric coordinates. Points on shared
    /// faces resolve to the lowest tet id.
    pub fn tet_containing_point(&self, p: Vec3) -> Option<(usize, [f64; 4])> {
        self.locator.locate(&self.vertices, &self.tets, p)
    }

    /// Exhaustive-scan variant of [`Self::tet_containing_point`].
    pub fn tet_containing_point_brute_force(&self, p: Vec3) -> Option<(usize, [f64; 4])> {
        (0..self.tets.len()).find_map(|t| {
            let b = barycentric(&self.tet_points(t), p)?;
            contains_barycentric(&b).then_some((t, b))
        })
    }

    pub fn barycentric_in(&self, t: usize, p: Vec3) -> Option<[f64; 4]> {
        barycentric(&self.tet_points(t), p)
    }

    /// Barycentric interpolation of a per-vertex field inside tet `t`.
    pub fn interpolate(&self, t: usize, bary: &[f64; 4], field: &[f64]) -> f64 {
        let tet = self.tets[t];
        (0..4).map(|k| bary[k] * field[tet[k]]).sum()
    }

    /// Remove bone tets, compacting indices. Vertices on the former bone
    /// interface are tagged `BONE_SURFACE`.
    pub fn remove_bone_tets(&self) -> Result<BoneRemoval> {
        let kept: Vec<usize> = (0..self.tets.len()).filter(|&t| !self.bone_tets[t]).collect();
        if kept.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut in_bone = vec![false; self.vertices.len()];
        for t in (0..self.tets.len()).filter(|&t| self.bone_tets[t]) {
            for &v in &self.tets[t] {
                in_bone[v] = true;
            }
        }
        let mut original_to_vertex = vec![None; self.vertices.len()];
        let mut vertex_to_original = Vec::new();
        for &t in &kept {
            for &v in &self.tets[t] {
                if original_to_vertex[v].is_none() {
                    original_to_vertex[v] = Some(usize::MAX);
                }
            }
        }
        // Preserve original relative vertex order.
        for v in 0..self.vertices.len() {
            if original_to_vertex[v].is_some() {
                original_to_vertex[v] = Some(vertex_to_original.len());
                vertex_to_original.push(v);
            }
        }
        let vertices = vertex_to_original.iter().map(|&v| self.vertices[v]).collect();
        let tets = kept
            .iter()
            .map(|&t| self.tets[t].map(|v| original_to_vertex[v].unwrap()))
            .collect();
        let mut tags = MeshTags::default();
        for (new, &old) in vertex_to_original.iter().enumerate() {
            let tag = self.tags[old];
            if tag.contains(VertexTag::SKIN) {
                tags.skin_vertices.push(new);
            }
            if tag.contains(VertexTag::BONE_SURFACE) || in_bone[old] {
                tags.bone_surface_vertices.push(new);
            }
            if tag.contains(VertexTag::OPEN_BOUNDARY) {
                tags.open_boundary_vertices.push(new);
            }
        }
        let mesh = TetMesh::new(vertices, tets, &tags)?;
        Ok(BoneRemoval { mesh, vertex_to_original, original_to_vertex, tet_to_original: kept })
    }

    /// Assemble from precomputed parts without validation. Only for tests
    /// that need deliberately broken meshes.
    #[cfg(test)]
    pub(crate) fn from_raw_unchecked(vertices: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Self {
        let n = tets.len();
        let nv = vertices.len();
        let locator = PointLocator::build(&vertices, &tets);
        TetMesh {
            vertices,
            tets,
            tags: vec![VertexTag::INTERIOR; nv],
            bone_tets: vec![false; n],
            adjacency: vec![[NONE; 4]; n],
            locator,
        }
    }
}

/// Result of [`TetMesh::remove_bone_tets`]: the domain mesh plus the maps
/// needed to go back to the original indexing.
#[derive(Debug, Clone)]
pub struct BoneRemoval {
    pub mesh: TetMesh,
    pub vertex_to_original: Vec<usize>,
    pub original_to_vertex: Vec<Option<usize>>,
    pub tet_to_original: Vec<usize>,
}

impl BoneRemoval {
    pub fn is_identity(&self) -> bool {
        self.vertex_to_original.iter().enumerate().all(|(i, &v)| i == v)
            && self.tet_to_original.iter().enumerate().all(|(i, &t)| i == t)
            && self.vertex_to_original.len() == self.original_to_vertex.len()
    }
}

pub fn contains_barycentric(b: &[f64; 4]) -> bool {
    b.iter().all(|&x| (-CONTAINMENT_EPS..=1.0 + CONTAINMENT_EPS).contains(&x))
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

fn build_adjacency(tets: &[[usize; 4]]) -> Result<Vec<[usize; 4]>> {
    let mut faces: Vec<([usize; 3], usize, usize)> = Vec::with_capacity(tets.len() * 4);
    for (t, tet) in tets.iter().enumerate() {
        for (k, f) in TET_FACES.iter().enumerate() {
            faces.push((sorted3(f.map(|i| tet[i])), t, k));
        }
    }
    faces.sort_unstable();
    let mut adj = vec![[NONE; 4]; tets.len()];
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j].0 == faces[i].0 {
            j += 1;
        }
        match j - i {
            1 => {}
            2 => {
                let (_, ta, ka) = faces[i];
                let (_, tb, kb) = faces[i + 1];
                adj[ta][ka] = tb;
                adj[tb][kb] = ta;
            }
            count => return Err(Error::NonManifoldFace { face: faces[i].0, count }),
        }
        i = j;
    }
    Ok(adj)
}

/// Count faces by number of incident tets: `(boundary, interior, non_manifold)`.
pub fn face_incidence_counts(tets: &[[usize; 4]]) -> (usize, usize, usize) {
    let mut faces: Vec<[usize; 3]> = Vec::with_capacity(tets.len() * 4);
    for tet in tets {
        for f in TET_FACES {
            faces.push(sorted3(f.map(|i| tet[i])));
        }
    }
    faces.sort_unstable();
    let (mut b, mut int, mut bad) = (0, 0, 0);
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j] == faces[i] {
            j += 1;
        }
        match j - i {
            1 => b += 1,
            2 => int += 1,
            _ => bad += 1,
        }
        i = j;
    }
    (b, int, bad)
}

impl core::fmt::Display for TetMesh {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "TetMesh({} vertices, {} tets)", self.vertices.len(), self.tets.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::{cube_grid, unit_cube_six_tets};

    fn unit_tet() -> TetMesh {
        TetMesh::from_geometry(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_tet_has_four_boundary_faces() {
        let m = unit_tet();
        assert_eq!(m.num_tets(), 1);
        assert_eq!(m.boundary_faces().len(), 4);
        assert_eq!(m.neighbors(0), [None; 4]);
    }

    #[test]
    fn inverted_tet_is_reoriented() {
        let m = TetMesh::from_geometry(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z],
            vec![[0, 2, 1, 3]],
        )
        .unwrap();
        assert!(m.tet_volume(0) > 0.0);
    }

    #[test]
    fn face_normals_point_outward() {
        let m = unit_tet();
        let c = m.tet_centroid(0);
        for k in 0..4 {
            let [a, b, cc] = m.face_vertices(0, k).map(|v| m.vertex(v));
            let n = (b - a).cross(cc - a);
            assert!(n.dot(a - c) > 0.0, "face {k}");
        }
    }

    #[test]
    fn cube_volume_and_adjacency() {
        let m = unit_cube_six_tets();
        assert_eq!(m.num_tets(), 6);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        let (boundary, interior, bad) = face_incidence_counts(m.tets());
        assert_eq!((boundary, interior, bad), (12, 6, 0));
        for t in 0..m.num_tets() {
            for k in 0..4 {
                if let Some(n) = m.neighbor(t, k) {
                    assert!(m.neighbors(n).contains(&Some(t)));
                }
            }
        }
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let r = TetMesh::from_geometry(vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z], vec![[0, 1, 2, 4]]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_manifold_face_is_rejected() {
        let v = vec![
            Vec3::ZERO,
            Vec3::X,
            Vec3::Y,
            Vec3::Z,
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.2, 0.2, 1.0),
        ];
        let r = TetMesh::from_geometry(v, vec![[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]]);
        assert!(matches!(r, Err(Error::NonManifoldFace { face: [0, 1, 2], count: 3 })));
    }

    #[test]
    fn bone_removal_identity_and_counts() {
        let m = unit_cube_six_tets();
        let r = m.remove_bone_tets().unwrap();
        assert!(r.is_identity());
        assert_eq!(r.mesh.num_tets(), 6);

        let boned = m.with_tags(&MeshTags { bone_tets: vec![2], ..Default::default() }).unwrap();
        let before = boned.boundary_faces().len();
        let r = boned.remove_bone_tets().unwrap();
        assert_eq!(r.mesh.num_tets(), 5);
        // Brute force: every face of the removed tet that was interior is now boundary.
        let interior_of_removed = (0..4).filter(|&k| boned.neighbor(2, k).is_some()).count();
        let boundary_of_removed = 4 - interior_of_removed;
        assert_eq!(r.mesh.boundary_faces().len(), before - boundary_of_removed + interior_of_removed);
        let vol: f64 = (0..6).filter(|&t| t != 2).map(|t| boned.tet_volume(t)).sum();
        assert_eq!(r.mesh.total_volume(), vol);
        for v in boned.tet(2) {
            if let Some(nv) = r.original_to_vertex[v] {
                assert!(r.mesh.tag(nv).contains(VertexTag::BONE_SURFACE));
            }
        }
    }

    #[test]
    fn all_bone_is_empty_domain() {
        let m = unit_cube_six_tets();
        let boned = m.with_tags(&MeshTags { bone_tets: (0..6).collect(), ..Default::default() }).unwrap();
        assert_eq!(boned.remove_bone_tets().unwrap_err(), Error::EmptyDomain);
    }

    #[test]
    fn centroid_and_outside_queries() {
        let m = cube_grid(3, 1.0);
        let c = m.tet_centroid(0);
        let (t, b) = m.tet_containing_point(c).unwrap();
        assert_eq!(t, 0);
        for x in b {
            assert!((x - 0.25).abs() < 1e-12);
        }
        assert!(m.tet_containing_point(Vec3::new(50.0, 0.0, 0.0)).is_none());
    }
}
