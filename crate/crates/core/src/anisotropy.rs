//! Curve-aligned diffusion tensors.
//!
//! Frames are transported along the traced curve with minimal rotation,
//! copied onto the vertices of the tets the curve crosses, and spread over
//! the rest of the mesh by nine harmonic solves (one per matrix entry).

use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{CollocationSet, MuscleCurve};
use crate::error::{Error, Result};
use crate::math::{abs, acos, cos, sin, Mat3, Vec3};
use crate::solver::QuadraticSystem;
use crate::sparse::SparseOperator;
use crate::tetmesh::{cotan_laplacian, TetMesh};

/// Eigenvalue floor applied when repairing interpolated tensors.
pub const EIGEN_FLOOR: f64 = 1e-6;

/// One symmetric positive definite matrix per tet.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    per_tet: Vec<Mat3>,
}

impl TensorField {
    pub fn new(per_tet: Vec<Mat3>) -> Self {
        TensorField { per_tet }
    }

    pub fn identity(num_tets: usize) -> Self {
        Self::uniform(num_tets, Mat3::IDENTITY)
    }

    pub fn uniform(num_tets: usize, m: Mat3) -> Self {
        TensorField { per_tet: vec![m; num_tets] }
    }

    pub fn len(&self) -> usize {
        self.per_tet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_tet.is_empty()
    }

    pub fn get(&self, t: usize) -> Mat3 {
        self.per_tet[t]
    }

    pub fn as_slice(&self) -> &[Mat3] {
        &self.per_tet
    }

    /// Symmetric within `1e-10` (relative) with strictly positive eigenvalues.
    pub fn is_spd(&self, t: usize) -> bool {
        let m = self.per_tet[t];
        if !m.is_finite() {
            return false;
        }
        let scale = (0..3).map(|i| abs(m.0[i][i])).fold(0.0, f64::max).max(1e-300);
        if m.max_abs_diff(&m.transpose()) > 1e-10 * scale {
            return false;
        }
        let (w, _) = m.symmetrized().symmetric_eigen();
        w[0] > 0.0
    }
}

/// Orthonormal frames `[e1 e2 e3]` (as matrix columns), one per
/// collocation entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub frames: Vec<Mat3>,
}

/// Rotation about unit `axis` by `angle` applied to `v` (Rodrigues).
fn rotate(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let (s, c) = (sin(angle), cos(angle));
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Rotation-minimizing frames along the collocation tangents, then a twist
/// of `(e2, e3)` about `e1`.
pub fn propagate_frames(colloc: &CollocationSet, twist_angle: f64) -> Result<FrameSet> {
    let mut frames = Vec::with_capacity(colloc.len());
    let mut prev: Option<(Vec3, Vec3)> = None;
    for (i, e) in colloc.entries.iter().enumerate() {
        let t = e.tangent.normalized().ok_or(Error::ZeroTangent(i))?;
        let e2 = match prev {
            None => t.any_orthogonal(),
            Some((tp, e2p)) => {
                let axis = tp.cross(t);
                let turned = match axis.normalized() {
                    Some(a) if axis.norm() > 1e-12 => rotate(e2p, a, acos(tp.dot(t))),
                    // Parallel: nothing to do. Antiparallel: half turn
                    // about the old normal keeps e2.
                    _ => e2p,
                };
                // Re-project to stop drift.
                (turned - t * turned.dot(t)).normalized().unwrap_or_else(|| t.any_orthogonal())
            }
        };
        prev = Some((t, e2));
        frames.push((t, e2));
    }
    let (s, c) = (sin(twist_angle), cos(twist_angle));
    Ok(FrameSet {
        frames: frames
            .into_iter()
            .map(|(e1, e2)| {
                let e3 = e1.cross(e2);
                Mat3::from_cols(e1, e2 * c + e3 * s, e3 * c - e2 * s)
            })
            .collect(),
    })
}

/// Gram–Schmidt on the columns, keeping the direction of `e1` first.
fn orthonormalize(q: &Mat3) -> Option<Mat3> {
    let e1 = q.col(0).normalized()?;
    let c2 = q.col(1);
    let e2 = (c2 - e1 * c2.dot(e1)).normalized().or_else(|| Some(e1.any_orthogonal()))?;
    Some(Mat3::from_cols(e1, e2, e1.cross(e2)))
}

/// Clamp eigenvalues of a symmetric matrix from below.
fn clamp_spd(m: &Mat3) -> Mat3 {
    let (w, v) = m.symmetrized().symmetric_eigen();
    if w[0] >= EIGEN_FLOOR {
        return m.symmetrized();
    }
    Mat3::from_eigen(w.map(|x| x.max(EIGEN_FLOOR)), v)
}

/// Spread the frames over the mesh and assemble per-tet tensors with
/// eigenvalues `lambda` along `(e1, e2, e3)`.
pub fn build_tensor_field(
    mesh: &TetMesh,
    frames: &FrameSet,
    colloc: &CollocationSet,
    lambda: [f64; 3],
) -> Result<TensorField> {
    if !lambda.iter().all(|l| *l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput("tensor eigenvalues must be positive".into()));
    }
    if frames.frames.len() != colloc.len() {
        return Err(Error::InvalidInput("frames and collocation entries differ in count".into()));
    }
    let n_tets = mesh.num_tets();
    if colloc.is_empty() {
        return Ok(TensorField::identity(n_tets));
    }
    if lambda[0] == lambda[1] && lambda[1] == lambda[2] {
        return Ok(TensorField::uniform(n_tets, Mat3::IDENTITY.scale(lambda[0])));
    }
    let n = mesh.num_vertices();
    // Seed vertices: corners of collocation tets, frame of the nearest entry.
    let mut seed: Vec<Option<usize>> = vec![None; n];
    for e in &colloc.entries {
        for v in mesh.tet(e.tet) {
            if seed[v].is_none() {
                let p = mesh.vertex(v);
                let best = (0..colloc.len())
                    .min_by(|&a, &b| {
                        let da = colloc.entries[a].point.distance(p);
                        let db = colloc.entries[b].point.distance(p);
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
                    .unwrap();
                seed[v] = Some(best);
            }
        }
    }
    // Components without a seed would make the harmonic system singular;
    // give them the first frame.
    for comp in vertex_components(mesh) {
        if comp.iter().all(|&v| seed[v].is_none()) {
            for v in comp {
                seed[v] = Some(0);
            }
        }
    }
    let fixed: Vec<usize> = (0..n).filter(|&v| seed[v].is_some()).collect();
    let lc = cotan_laplacian(mesh)?;
    let sys = QuadraticSystem::new(&lc, &SparseOperator::zeros(0, n), 0.0, &fixed)?;
    let mut entries = [[Vec::new(), Vec::new(), Vec::new()], [Vec::new(), Vec::new(), Vec::new()], [
        Vec::new(),
        Vec::new(),
        Vec::new(),
    ]];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let vals: Vec<f64> = fixed.iter().map(|&v| frames.frames[seed[v].unwrap()].0[i][j]).collect();
            *slot = sys.solve(&[], &vals);
        }
    }
    let lam = Mat3::diag(lambda);
    let vertex_tensor: Vec<Mat3> = (0..n)
        .map(|v| {
            let mut q = Mat3::ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    q.0[i][j] = entries[i][j][v];
                }
            }
            let q = orthonormalize(&q).unwrap_or(Mat3::IDENTITY);
            clamp_spd(&q.mul_mat(&lam).mul_mat(&q.transpose()))
        })
        .collect();
    Ok(TensorField {
        per_tet: (0..n_tets)
            .map(|t| {
                let tet = mesh.tet(t);
                let sum = tet.iter().fold(Mat3::ZERO, |acc, &v| acc.add(&vertex_tensor[v]));
                sum.scale(0.25).symmetrized()
            })
            .collect(),
    })
}

/// Frames and tensors for one curve from its own collocation set.
pub fn build_curve_tensor_field(mesh: &TetMesh, curve: &MuscleCurve, colloc: &CollocationSet) -> Result<TensorField> {
    let frames = propagate_frames(colloc, curve.twist_angle)?;
    build_tensor_field(mesh, &frames, colloc, curve.eigenvalues)
}

fn vertex_components(mesh: &TetMesh) -> Vec<Vec<usize>> {
    let n = mesh.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for tet in mesh.tets() {
        for k in 1..4 {
            let a = find(&mut parent, tet[0]);
            let b = find(&mut parent, tet[k]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let used = mesh.referenced_vertices();
    let mut groups: alloc::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in (0..n).filter(|&v| used[v]) {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    groups.into_values().collect()
}
