//! Maximization diagram of the tissue fields: every tet of the output lies
//! in the region of exactly one tissue.

mod extract;
mod refine;

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{barycentric, signed_volume, Vec3};
use crate::solver::TissueFieldSet;
use crate::tetmesh::{face_incidence_counts, BoneRemoval, TetMesh, TET_FACES};

pub use extract::{extract_boundary_surface, extract_tissue_mesh, TissueMesh, TriangleMesh};

use refine::{candidates, Work};

/// Degeneracy threshold relative to the global field scale.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TissueLabel {
    /// Tissue id as in the field set (fat is 0).
    Tissue(u32),
    Bone,
}

/// Where an output vertex came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// Vertex of the input mesh (original numbering).
    Original(usize),
    /// Point `a + t (b - a)` on the edge between two output vertices.
    Split { a: usize, b: usize, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    pub eps: f64,
    /// Skip tissue pairs that cannot meet on the envelope. Never changes
    /// the result, only the running time.
    pub prune: bool,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions { eps: DEFAULT_EPS, prune: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitStats {
    pub original_tets: usize,
    pub output_tets: usize,
    /// Original (non-bone) tets that were not split.
    pub unsplit: usize,
    /// `histogram[n]` counts original tets whose children carry `n`
    /// distinct labels.
    pub histogram: Vec<usize>,
    pub rounds: usize,
    pub pairs_processed: usize,
    pub pairs_total: usize,
    /// Absolute threshold used for sign tests.
    pub threshold: f64,
}

impl SplitStats {
    pub fn single_tissue_fraction(&self) -> f64 {
        let n: usize = self.histogram.iter().sum();
        if n == 0 {
            return 1.0;
        }
        self.histogram.get(1).copied().unwrap_or(0) as f64 / n as f64
    }
}

/// Refined, labeled tet mesh.
#[derive(Debug, Clone)]
pub struct LabeledTetMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub labels: Vec<TissueLabel>,
    pub provenance: Vec<Provenance>,
    /// Input tet each output tet descends from (original numbering).
    pub origin: Vec<usize>,
    pub tissue_ids: Vec<u32>,
    /// Interpolated field values, `tissue_ids.len()` per vertex. NaN for
    /// vertices only touched by bone.
    pub values: Vec<f64>,
    pub stats: SplitStats,
}

impl LabeledTetMesh {
    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tets[t].map(|v| self.vertices[v]);
        signed_volume(a, b, c, d)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn vertex_values(&self, v: usize) -> &[f64] {
        let k = self.tissue_ids.len();
        &self.values[v * k..(v + 1) * k]
    }

    /// Distinct labels present, in ascending order (tissues by id, bone last).
    pub fn label_set(&self) -> Vec<TissueLabel> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Total volume per label, in `label_set` order.
    pub fn label_volumes(&self) -> Vec<(TissueLabel, f64)> {
        self.label_set()
            .into_iter()
            .map(|l| {
                let v = (0..self.tets.len()).filter(|&t| self.labels[t] == l).map(|t| self.tet_volume(t)).sum();
                (l, v)
            })
            .collect()
    }

    /// Faces shared by more than two tets.
    pub fn non_manifold_faces(&self) -> usize {
        face_incidence_counts(&self.tets).2
    }

    /// Boundary faces of the refinement that do not lie on a boundary face
    /// of `original`. Any such face is a hanging face (T-junction).
    pub fn t_junctions(&self, original: &TetMesh) -> usize {
        let mut faces: Vec<([usize; 3], usize)> = Vec::with_capacity(self.tets.len() * 4);
        for (t, tet) in self.tets.iter().enumerate() {
            for f in TET_FACES {
                let mut key = f.map(|i| tet[i]);
                key.sort_unstable();
                faces.push((key, t));
            }
        }
        faces.sort_unstable();
        let mut bad = 0;
        let mut i = 0;
        while i < faces.len() {
            let mut j = i + 1;
            while j < faces.len() && faces[j].0 == faces[i].0 {
                j += 1;
            }
            if j - i == 1 && !self.on_original_boundary(original, faces[i].0, self.origin[faces[i].1]) {
                bad += 1;
            }
            i = j;
        }
        bad
    }

    fn on_original_boundary(&self, original: &TetMesh, face: [usize; 3], o: usize) -> bool {
        let pts = original.tet_points(o);
        let Some(bs) = face.iter().map(|&v| barycentric(&pts, self.vertices[v])).collect::<Option<Vec<_>>>() else {
            return false;
        };
        (0..4).any(|k| bs.iter().all(|b| b[k].abs() <= 1e-9) && original.neighbor(o, k).is_none())
    }

    /// Structural self-check: positive volumes and a manifold face graph.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = (0..self.tets.len()).find(|&t| !(self.tet_volume(t) > 0.0)) {
            return Err(Error::Internal(alloc::format!("refined tet {t} has non-positive volume")));
        }
        let n = self.non_manifold_faces();
        if n > 0 {
            return Err(Error::Internal(alloc::format!("refinement produced {n} non-manifold faces")));
        }
        Ok(())
    }
}

/// Symmetric matrix of tissue pairs that may share a boundary somewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMatrix {
    k: usize,
    w: Vec<bool>,
}

impl PruneMatrix {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.w[i * self.k + j]
    }

    /// Pairs `i < j` that need processing, ascending.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.k {
            for j in i + 1..self.k {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn check_fields(mesh: &TetMesh, fields: &TissueFieldSet) -> Result<()> {
    if fields.num_vertices() != mesh.num_vertices() {
        return Err(Error::InvalidInput(alloc::format!(
            "fields cover {} vertices but the mesh has {}",
            fields.num_vertices(),
            mesh.num_vertices()
        )));
    }
    if fields.fields().iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("tissue field has a non-finite value".into()));
    }
    Ok(())
}

fn interleave(fields: &TissueFieldSet) -> Vec<f64> {
    let (k, n) = (fields.num_tissues(), fields.num_vertices());
    let mut val = vec![0.0; k * n];
    for a in 0..k {
        for (v, &x) in fields.field(a).iter().enumerate() {
            val[v * k + a] = x;
        }
    }
    val
}

/// Global scale for the degeneracy threshold: the spread of all field values.
fn field_scale(fields: &TissueFieldSet) -> f64 {
    let (lo, hi) = fields
        .fields()
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let s = hi - lo;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

pub fn prune_tissues(mesh: &TetMesh, fields: &TissueFieldSet) -> Result<PruneMatrix> {
    prune_tissues_with(mesh, fields, DEFAULT_EPS)
}

pub fn prune_tissues_with(mesh: &TetMesh, fields: &TissueFieldSet, eps: f64) -> Result<PruneMatrix> {
    check_fields(mesh, fields)?;
    let k = fields.num_tissues();
    let val = interleave(fields);
    let cand = candidates(k, mesh.tets(), &val, eps * field_scale(fields));
    Ok(prune_from(k, &vec![true; mesh.num_tets()], &cand))
}

fn prune_from(k: usize, include: &[bool], cand: &refine::Candidates) -> PruneMatrix {
    let mut w = vec![false; k * k];
    let mut members = Vec::with_capacity(k);
    for t in (0..include.len()).filter(|&t| include[t]) {
        members.clear();
        members.extend((0..k).filter(|&a| cand.has(t, a)));
        for &i in &members {
            for &j in &members {
                w[i * k + j] = true;
            }
        }
    }
    PruneMatrix { k, w }
}

/// Tissue index with the largest value at `p`, ties to the lower index.
/// `None` outside the mesh.
pub fn classify_point(mesh: &TetMesh, fields: &TissueFieldSet, p: Vec3) -> Option<usize> {
    let (t, b) = mesh.tet_containing_point(p)?;
    let vals: Vec<f64> = (0..fields.num_tissues()).map(|a| mesh.interpolate(t, &b, fields.field(a))).collect();
    Some(argmax(&vals))
}

pub(crate) fn argmax(vals: &[f64]) -> usize {
    let mut best = 0;
    for (a, &x) in vals.iter().enumerate().skip(1) {
        if x > vals[best] {
            best = a;
        }
    }
    best
}

/// Diagram on a mesh whose vertices all carry field values.
pub fn maximization_diagram(mesh: &TetMesh, fields: &TissueFieldSet, opts: &EnvelopeOptions) -> Result<LabeledTetMesh> {
    check_fields(mesh, fields)?;
    let work = Work {
        k: fields.num_tissues(),
        pos: mesh.vertices().to_vec(),
        val: interleave(fields),
        prov: (0..mesh.num_vertices()).map(Provenance::Original).collect(),
        tets: mesh.tets().to_vec(),
        origin: (0..mesh.num_tets()).collect(),
        thr: 0.0,
        history: Vec::new(),
    };
    build(work, fields, opts, mesh.num_tets(), Vec::new(), Vec::new())
}

/// Diagram on the bone-free domain, with the bone tets of `original`
/// reattached and split to match. Provenance and origins refer to
/// `original`.
pub fn maximization_diagram_with_bone(
    original: &TetMesh,
    removal: &BoneRemoval,
    fields: &TissueFieldSet,
    opts: &EnvelopeOptions,
) -> Result<LabeledTetMesh> {
    let dom = &removal.mesh;
    check_fields(dom, fields)?;
    let k = fields.num_tissues();
    let mut pos = dom.vertices().to_vec();
    let mut val = interleave(fields);
    let mut prov: Vec<Provenance> = removal.vertex_to_original.iter().map(|&v| Provenance::Original(v)).collect();
    let mut map = removal.original_to_vertex.clone();
    let bone = original.bone_tet_ids();
    let mut bone_tets = Vec::with_capacity(bone.len());
    for &t in &bone {
        bone_tets.push(original.tet(t).map(|v| {
            *map[v].get_or_insert_with(|| {
                pos.push(original.vertex(v));
                val.extend(core::iter::repeat_n(f64::NAN, k));
                prov.push(Provenance::Original(v));
                pos.len() - 1
            })
        }));
    }
    let work = Work {
        k,
        pos,
        val,
        prov,
        tets: dom.tets().to_vec(),
        origin: removal.tet_to_original.clone(),
        thr: 0.0,
        history: Vec::new(),
    };
    build(work, fields, opts, original.num_tets(), bone_tets, bone)
}

fn build(
    mut work: Work,
    fields: &TissueFieldSet,
    opts: &EnvelopeOptions,
    num_original: usize,
    bone_tets: Vec<[usize; 4]>,
    bone_origin: Vec<usize>,
) -> Result<LabeledTetMesh> {
    if !(opts.eps >= 0.0 && opts.eps.is_finite()) {
        return Err(Error::InvalidInput(alloc::format!("eps must be non-negative, got {}", opts.eps)));
    }
    let k = work.k;
    work.thr = opts.eps * field_scale(fields);
    // Candidate sets are indexed by original tet id; bone slots stay empty.
    let mut orig_tets = vec![[0usize; 4]; num_original];
    let mut is_soft = vec![false; num_original];
    for (tet, &o) in work.tets.iter().zip(&work.origin) {
        orig_tets[o] = *tet;
        is_soft[o] = true;
    }
    let mut cand_val = work.val.clone();
    // Bone-only vertices have NaN values; the unused slots point at vertex 0.
    for x in cand_val.iter_mut().filter(|x| x.is_nan()) {
        *x = 0.0;
    }
    let cand = candidates(k, &orig_tets, &cand_val, work.thr);
    let pairs_total = k * k.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if opts.prune {
        prune_from(k, &is_soft, &cand).pairs()
    } else {
        (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
    };
    // Pairs outside the prune matrix have no tet where both are candidates,
    // so their passes would be no-ops.
    let rounds = work.run(&pairs, &cand)?;

    let (bt, bo) = work.replay(bone_tets, bone_origin);
    let soft = work.tets.len();
    let mut tets = core::mem::take(&mut work.tets);
    let mut origin = core::mem::take(&mut work.origin);
    tets.extend(bt);
    origin.extend(bo);

    let ids = fields.tissue_ids().to_vec();
    let mut labels = Vec::with_capacity(tets.len());
    let mut c = vec![0.0; k];
    for (n, tet) in tets.iter().enumerate() {
        if n >= soft {
            labels.push(TissueLabel::Bone);
            continue;
        }
        for (a, ca) in c.iter_mut().enumerate() {
            *ca = tet.iter().map(|&v| work.val[v * k + a]).sum::<f64>() * 0.25;
        }
        labels.push(TissueLabel::Tissue(ids[argmax(&c)]));
    }

    let mut per: Vec<BTreeSet<TissueLabel>> = vec![BTreeSet::new(); num_original];
    let mut children = vec![0usize; num_original];
    for n in 0..soft {
        per[origin[n]].insert(labels[n]);
        children[origin[n]] += 1;
    }
    let mut histogram = vec![0usize; 2];
    let mut unsplit = 0;
    for t in (0..num_original).filter(|&t| is_soft[t]) {
        let d = per[t].len();
        if histogram.len() <= d {
            histogram.resize(d + 1, 0);
        }
        histogram[d] += 1;
        unsplit += usize::from(children[t] == 1);
    }
    let stats = SplitStats {
        original_tets: is_soft.iter().filter(|&&s| s).count(),
        output_tets: tets.len(),
        unsplit,
        histogram,
        rounds,
        pairs_processed: pairs.len(),
        pairs_total,
        threshold: work.thr,
    };
    let out = LabeledTetMesh {
        vertices: work.pos,
        tets,
        labels,
        provenance: work.prov,
        origin,
        tissue_ids: ids,
        values: work.val,
        stats,
    };
    out.validate()?;
    Ok(out)
}

/// Result of splitting a single tet along the zero set of a linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSplit {
    /// The four corners, then the new edge points.
    pub vertices: Vec<Vec3>,
    pub values: Vec<f64>,
    pub tets: Vec<[usize; 4]>,
    /// The function was constant; nothing to split.
    pub degenerate: bool,
}

/// Split a tet where the linear function with vertex values `f` changes
/// sign. Sign tests use `eps` relative to the spread of `f`.
pub fn split_tet(points: [Vec3; 4], f: [f64; 4], eps: f64) -> Result<LocalSplit> {
    if f.iter().any(|x| !x.is_finite()) || !points.iter().all(|p| p.is_finite()) {
        return Err(Error::InvalidInput("split_tet needs finite input".into()));
    }
    let mut tet = [0, 1, 2, 3];
    if signed_volume(points[0], points[1], points[2], points[3]) < 0.0 {
        tet.swap(2, 3);
    }
    let spread = f.iter().copied().fold(f64::NEG_INFINITY, f64::max) - f.iter().copied().fold(f64::INFINITY, f64::min);
    if spread == 0.0 {
        return Ok(LocalSplit { vertices: points.to_vec(), values: f.to_vec(), tets: vec![tet], degenerate: true });
    }
    let mut work = Work {
        k: 2,
        pos: points.to_vec(),
        val: f.iter().flat_map(|&x| [x, 0.0]).collect(),
        prov: (0..4).map(Provenance::Original).collect(),
        tets: vec![tet],
        origin: vec![0],
        thr: eps * spread,
        history: Vec::new(),
    };
    work.run(&[(0, 1)], &refine::Candidates::all(2, 1))?;
    Ok(LocalSplit {
        vertices: work.pos,
        values: work.val.chunks(2).map(|c| c[0]).collect(),
        tets: work.tets,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests;
