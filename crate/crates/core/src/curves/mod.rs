//! Muscle curves, collocation tracing, and the soft-constraint system.

mod sketch;
mod spline;
mod trace;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::TriangleBvh;
use crate::math::Vec3;
use crate::sparse::SparseOperator;
use crate::tetmesh::{TetMesh, TET_FACES};

pub use sketch::project_sketch;
pub use spline::{fit_spline, CatmullRom, SplineFit, Weights};
pub use trace::{trace_collocation, trace_collocation_with, TraceMode, TraceOptions};

/// Default number of control points for a fitted curve.
pub const DEFAULT_CONTROL_POINTS: usize = 4;
/// Default samples per spline span used to detect tet crossings.
pub const DEFAULT_SAMPLES_PER_SPAN: usize = 64;
/// Endpoint snap tolerance as a fraction of the bounding-box diagonal.
pub const SNAP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct MuscleCurve {
    pub id: u32,
    pub control_points: Vec<Vec3>,
    pub tissue_values: Vec<f64>,
    /// Rotation of `(e2, e3)` about `e1`, radians.
    pub twist_angle: f64,
    pub eigenvalues: [f64; 3],
}

impl MuscleCurve {
    /// Isotropic, untwisted curve.
    pub fn new(id: u32, control_points: Vec<Vec3>, tissue_values: Vec<f64>) -> Self {
        MuscleCurve { id, control_points, tissue_values, twist_angle: 0.0, eigenvalues: [1.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id == 0 {
            return Err(Error::InvalidInput("curve ids start at 1".into()));
        }
        if self.control_points.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "curve {} has {} control points, need at least 4",
                self.id,
                self.control_points.len()
            )));
        }
        if self.tissue_values.len() != self.control_points.len() {
            return Err(Error::InvalidInput(format!(
                "curve {} has {} tissue values for {} control points",
                self.id,
                self.tissue_values.len(),
                self.control_points.len()
            )));
        }
        if !self.control_points.iter().all(|p| p.is_finite()) {
            return Err(Error::InvalidInput(format!("curve {} has non-finite control points", self.id)));
        }
        if !self.tissue_values.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(Error::InvalidInput(format!("curve {} tissue values must be finite and positive", self.id)));
        }
        if !self.eigenvalues.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(Error::InvalidInput(format!("curve {} eigenvalues must be positive", self.id)));
        }
        if !self.twist_angle.is_finite() {
            return Err(Error::InvalidInput(format!("curve {} twist angle is not finite", self.id)));
        }
        Ok(())
    }

    pub fn spline(&self) -> CatmullRom<'_> {
        CatmullRom::new(&self.control_points)
    }

    pub fn is_isotropic(&self) -> bool {
        self.eigenvalues[0] == self.eigenvalues[1] && self.eigenvalues[1] == self.eigenvalues[2]
    }

    pub fn first_point(&self) -> Vec3 {
        self.control_points[0]
    }

    pub fn last_point(&self) -> Vec3 {
        *self.control_points.last().expect("validated curve")
    }
}

/// One clipped curve piece inside one tet.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationEntry {
    pub tet: usize,
    /// Arc-length midpoint of the clipped piece.
    pub point: Vec3,
    pub bary: [f64; 4],
    pub tissue_value: f64,
    pub tangent: Vec3,
    /// Spline parameter of `point`.
    pub param: f64,
    /// Spline parameters where the piece enters and leaves the tet.
    pub span: (f64, f64),
    /// Arc length of the piece.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub curve_id: u32,
    pub entries: Vec<CollocationEntry>,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.entries.iter().map(|e| e.length).sum()
    }

    /// Distinct tets in first-visit order.
    pub fn tets(&self) -> Vec<usize> {
        let mut seen = alloc::collections::BTreeSet::new();
        self.entries.iter().map(|e| e.tet).filter(|t| seen.insert(*t)).collect()
    }
}

/// `B x = d`, one row per collocation entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub b: SparseOperator,
    pub d: Vec<f64>,
}

impl ConstraintSystem {
    pub fn empty(num_vertices: usize) -> Self {
        ConstraintSystem { b: SparseOperator::zeros(0, num_vertices), d: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.d.len()
    }

    /// Same rows with every target zeroed, as used for other tissues.
    pub fn with_zero_targets(&self) -> Self {
        ConstraintSystem { b: self.b.clone(), d: alloc::vec![0.0; self.d.len()] }
    }

    pub fn stack(&self, o: &ConstraintSystem) -> Self {
        let mut d = self.d.clone();
        d.extend_from_slice(&o.d);
        ConstraintSystem { b: self.b.vstack(&o.b), d }
    }
}

/// Stack the barycentric rows of `colloc` against the mesh vertices.
pub fn assemble_constraints(mesh: &TetMesh, colloc: &CollocationSet) -> Result<ConstraintSystem> {
    let mut trip = Vec::with_capacity(colloc.len() * 4);
    let mut d = Vec::with_capacity(colloc.len());
    for (r, e) in colloc.entries.iter().enumerate() {
        if e.tet >= mesh.num_tets() {
            return Err(Error::InvalidInput(format!("collocation entry {r} references tet {}", e.tet)));
        }
        for (k, &v) in mesh.tet(e.tet).iter().enumerate() {
            trip.push((r, v, e.bary[k]));
        }
        d.push(e.tissue_value);
    }
    Ok(ConstraintSystem { b: SparseOperator::from_triplets(colloc.len(), mesh.num_vertices(), trip), d })
}

/// Triangles bounding the bone region of a mesh that still holds its bone
/// tets: faces of bone tets whose neighbor is missing or not bone.
pub fn bone_surface(mesh: &TetMesh) -> TriangleBvh {
    let mut tris = Vec::new();
    for t in mesh.bone_tet_ids() {
        for k in 0..4 {
            let other_bone = mesh.neighbor(t, k).is_some_and(|n| mesh.is_bone_tet(n));
            if !other_bone {
                let tet = mesh.tet(t);
                tris.push(TET_FACES[k].map(|i| mesh.vertex(tet[i])));
            }
        }
    }
    TriangleBvh::new(tris)
}

/// Check that both curve ends lie within the snap tolerance of the bone
/// surface of `original` (the mesh before bone removal).
pub fn check_endpoints_on_bone(original: &TetMesh, surface: &TriangleBvh, curve: &MuscleCurve) -> Result<()> {
    let tol = SNAP_TOLERANCE * original.bbox_diagonal();
    for p in [curve.first_point(), curve.last_point()] {
        match surface.closest_point(p) {
            Some((_, d, _)) if d <= tol => {}
            _ => return Err(Error::StrokeOffBone),
        }
    }
    Ok(())
}
