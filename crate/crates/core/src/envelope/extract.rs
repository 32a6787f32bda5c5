use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{signed_volume, Vec3};
use crate::tetmesh::{TetMesh, TET_FACES};

use super::{LabeledTetMesh, TissueLabel};

/// Tets of one label, compacted. `source` maps each vertex back to the
/// labeled mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueMesh {
    pub label: TissueLabel,
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub source: Vec<usize>,
}

impl TissueMesh {
    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.tets
            .iter()
            .map(|t| {
                let [a, b, c, d] = t.map(|v| self.vertices[v]);
                signed_volume(a, b, c, d)
            })
            .sum()
    }

    pub fn to_tet_mesh(&self) -> Result<TetMesh> {
        if self.tets.is_empty() {
            return Err(Error::InvalidInput("tissue mesh is empty".into()));
        }
        TetMesh::from_geometry(self.vertices.clone(), self.tets.clone())
    }
}

/// Closed triangle surface with outward orientation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.normal(t).norm() * 0.5).sum()
    }

    fn normal(&self, t: &[usize; 3]) -> Vec3 {
        let [a, b, c] = t.map(|v| self.vertices[v]);
        (b - a).cross(c - a)
    }

    /// Volume enclosed by the surface (divergence theorem).
    pub fn enclosed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v]);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    /// Directed edges without a matching reverse edge.
    pub fn unmatched_edges(&self) -> usize {
        let mut count: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += if a < b { 1 } else { -1 };
            }
        }
        count.values().map(|c| c.unsigned_abs() as usize).sum()
    }

    pub fn is_closed(&self) -> bool {
        self.unmatched_edges() == 0
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)), ());
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}

/// Tets carrying `label`. An absent label gives an empty mesh.
pub fn extract_tissue_mesh(labeled: &LabeledTetMesh, label: TissueLabel) -> TissueMesh {
    let mut map = vec![usize::MAX; labeled.vertices.len()];
    let mut vertices = Vec::new();
    let mut source = Vec::new();
    let mut tets = Vec::new();
    for (t, tet) in labeled.tets.iter().enumerate() {
        if labeled.labels[t] != label {
            continue;
        }
        tets.push(tet.map(|v| {
            if map[v] == usize::MAX {
                map[v] = vertices.len();
                vertices.push(labeled.vertices[v]);
                source.push(v);
            }
            map[v]
        }));
    }
    if tets.is_empty() {
        log::warn!("label {label:?} has no tets");
    }
    TissueMesh { label, vertices, tets, source }
}

/// Boundary faces of a tet set, outward oriented, vertices compacted.
pub fn extract_boundary_surface(vertices: &[Vec3], tets: &[[usize; 4]]) -> Result<TriangleMesh> {
    let mut faces: Vec<([usize; 3], [usize; 3])> = Vec::with_capacity(tets.len() * 4);
    for tet in tets {
        let p = tet.map(|v| vertices[v]);
        let flip = signed_volume(p[0], p[1], p[2], p[3]) < 0.0;
        for f in TET_FACES {
            let mut tri = f.map(|i| tet[i]);
            if flip {
                tri.swap(1, 2);
            }
            let mut key = tri;
            key.sort_unstable();
            faces.push((key, tri));
        }
    }
    faces.sort_unstable();
    let mut map = vec![usize::MAX; vertices.len()];
    let mut out = TriangleMesh::default();
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j].0 == faces[i].0 {
            j += 1;
        }
        match j - i {
            1 => {
                let tri = faces[i].1.map(|v| {
                    if map[v] == usize::MAX {
                        map[v] = out.vertices.len();
                        out.vertices.push(vertices[v]);
                    }
                    map[v]
                });
                out.triangles.push(tri);
            }
            2 => {}
            count => return Err(Error::NonManifoldFace { face: faces[i].0, count }),
        }
        i = j;
    }
    Ok(out)
}
