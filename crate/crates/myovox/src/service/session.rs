//! One authoring session: a mesh, its curve network and the current
//! fields. Plain synchronous code; the HTTP layer serializes access.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use myovox_core::curves::{fit_spline, project_sketch, MuscleCurve, DEFAULT_CONTROL_POINTS};
use myovox_core::solver::{default_d_fat, FieldProblem, SolveParams, TissueFieldSet, DEFAULT_ALPHA};
use myovox_core::tetmesh::TetMesh;
use myovox_core::{ErrorKind, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::io::{self, CameraJson, CurveJson, TagsFile};
use crate::manifest::Manifest;
use crate::pipeline::{check_curves, finalize_artifacts, solve_fields, Model, OutputSettings};

/// Why a session operation failed, in HTTP terms.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionError {
    /// Unusable mesh or malformed request content (422).
    Invalid(String),
    /// Edit conflicts with the session state (409).
    Conflict(String),
    /// The requested revision is no longer current (410).
    Stale { current: u64 },
    NotFound(String),
    Internal(String),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionError::Invalid(m) | SessionError::Conflict(m) | SessionError::NotFound(m) | SessionError::Internal(m) => {
                f.write_str(m)
            }
            SessionError::Stale { current } => write!(f, "revision is stale, current is {current}"),
        }
    }
}

impl std::error::Error for SessionError {}

impl From<myovox_core::Error> for SessionError {
    fn from(e: myovox_core::Error) -> Self {
        match e {
            myovox_core::Error::StrokeOffBone => SessionError::Conflict("stroke must start and end on bone".into()),
            e if e.kind() == ErrorKind::Internal => SessionError::Internal(e.to_string()),
            e => SessionError::Invalid(e.to_string()),
        }
    }
}

impl From<Error> for SessionError {
    fn from(e: Error) -> Self {
        match e {
            Error::Core(c) => c.into(),
            e if e.kind() == ErrorKind::Input => SessionError::Invalid(e.to_string()),
            e => SessionError::Internal(e.to_string()),
        }
    }
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

/// `POST /sessions` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `.node` file contents.
    pub node: String,
    /// `.ele` file contents.
    pub ele: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<TagsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_fat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

/// A stroke drawn in a view, lifted onto the mesh and fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeRequest {
    pub id: u32,
    /// Pixel coordinates, `y` down.
    pub stroke: Vec<[f64; 2]>,
    pub camera: CameraJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tissue_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_points: Option<usize>,
}

/// `POST /sessions/{id}/curves` body: a full curve or a stroke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveRequest {
    Curve(CurveJson),
    Stroke(StrokeRequest),
}

/// Journal line. Strokes are journaled as the fitted curve, so replay does
/// not depend on projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum JournalOp {
    Create { request: CreateRequest },
    Upsert { curve: CurveJson, revision: u64 },
    Delete { id: u32, revision: u64 },
}

/// What the UI needs to draw the mesh: counts, bounds, and the skin and
/// bone triangles as input-vertex index triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub tets: usize,
    pub bone_tets: usize,
    pub bounds: [[f64; 3]; 2],
    pub skin_triangles: Vec<[usize; 3]>,
    pub bone_triangles: Vec<[usize; 3]>,
}

impl MeshSummary {
    pub fn of(mesh: &TetMesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let face = |t: usize, k: usize| mesh.face_vertices(t, k);
        let skin_triangles = mesh.boundary_faces().into_iter().map(|(t, k)| face(t, k)).collect();
        let mut bone_triangles = Vec::new();
        for t in mesh.bone_tet_ids() {
            for k in 0..4 {
                if !mesh.neighbor(t, k).is_some_and(|n| mesh.is_bone_tet(n)) {
                    bone_triangles.push(face(t, k));
                }
            }
        }
        MeshSummary {
            vertices: mesh.num_vertices(),
            tets: mesh.num_tets(),
            bone_tets: mesh.bone_tet_ids().len(),
            bounds: [[lo.x(), lo.y(), lo.z()], [hi.x(), hi.y(), hi.z()]],
            skin_triangles,
            bone_triangles,
        }
    }
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    model: Model,
    /// Explicit fat value; `None` follows the curves.
    d_fat: Option<f64>,
    settings: OutputSettings,
    problem: FieldProblem,
    fields: TissueFieldSet,
    revision: u64,
    journal: Option<PathBuf>,
    finalized: Option<(u64, Manifest)>,
}

fn solve(problem: &FieldProblem) -> SessionResult<TissueFieldSet> {
    Ok(solve_fields(problem)?)
}

impl Session {
    /// Build a session from a create request. With a journal path, the
    /// request is written as the journal's first line.
    pub fn create(id: &str, request: CreateRequest, journal: Option<PathBuf>) -> SessionResult<Self> {
        let s = Session::build(id, &request, journal)?;
        s.append(&JournalOp::Create { request })?;
        Ok(s)
    }

    fn build(id: &str, req: &CreateRequest, journal: Option<PathBuf>) -> SessionResult<Self> {
        let mesh = io::mesh_from_text(&req.node, &req.ele, req.tags.clone())?;
        let params = SolveParams { alpha: req.alpha.unwrap_or(DEFAULT_ALPHA), ..SolveParams::default() };
        let name = req.name.clone().unwrap_or_else(|| id.to_string());
        let model = Model::new(&name, mesh, Vec::new(), req.d_fat, params)?;
        let mut settings = OutputSettings::default();
        if let Some(eps) = req.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(SessionError::Invalid(format!("eps must be non-negative, got {eps}")));
            }
            settings.envelope.eps = eps;
        }
        let problem = model.problem()?;
        let fields = solve(&problem)?;
        Ok(Session {
            id: id.into(),
            model,
            d_fat: req.d_fat,
            settings,
            problem,
            fields,
            revision: 0,
            journal,
            finalized: None,
        })
    }

    /// Rebuild a session by replaying its journal.
    pub fn replay(id: &str, path: &Path) -> SessionResult<Self> {
        let file = File::open(path).map_err(|e| SessionError::Internal(format!("{}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> SessionResult<Option<JournalOp>> {
            match lines.next() {
                None => Ok(None),
                Some(line) => {
                    let line = line.map_err(|e| SessionError::Internal(e.to_string()))?;
                    serde_json::from_str(&line).map(Some).map_err(|e| SessionError::Internal(format!("journal: {e}")))
                }
            }
        };
        let Some(JournalOp::Create { request }) = next()? else {
            return Err(SessionError::Internal("journal must start with create".into()));
        };
        let mut s = Session::build(id, &request, None)?;
        while let Some(op) = next()? {
            let want = match op {
                JournalOp::Create { .. } => return Err(SessionError::Internal("repeated create in journal".into())),
                JournalOp::Upsert { curve, revision } => {
                    s.upsert_curve(MuscleCurve::from(&curve))?;
                    revision
                }
                JournalOp::Delete { id, revision } => {
                    s.delete_curve(id)?;
                    revision
                }
            };
            if want != s.revision {
                return Err(SessionError::Internal(format!("journal revision {want} replayed as {}", s.revision)));
            }
        }
        s.journal = Some(path.to_path_buf());
        Ok(s)
    }

    fn append(&self, op: &JournalOp) -> SessionResult<()> {
        let Some(path) = &self.journal else { return Ok(()) };
        let io_err = |e: std::io::Error| SessionError::Internal(format!("{}: {e}", path.display()));
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        let mut line = serde_json::to_string(op).map_err(|e| SessionError::Internal(e.to_string()))?;
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(io_err)?;
        f.sync_data().map_err(io_err)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn curves(&self) -> &[MuscleCurve] {
        &self.model.curves
    }

    /// Current fields on the bone-free domain.
    pub fn fields(&self) -> &TissueFieldSet {
        &self.fields
    }

    pub fn settings(&self) -> &OutputSettings {
        &self.settings
    }

    pub fn summary(&self) -> MeshSummary {
        MeshSummary::of(&self.model.original)
    }

    /// Fields in input-vertex numbering as the f32 wire buffer. A stale
    /// `revision` is refused.
    pub fn field_buffer(&self, revision: Option<u64>) -> SessionResult<Vec<u8>> {
        if revision.is_some_and(|r| r != self.revision) {
            return Err(SessionError::Stale { current: self.revision });
        }
        Ok(io::field_buffer_f32(&self.fields.lift(&self.model.removal, 0.0)))
    }

    /// Lift a stroke onto the bone surface and fit a curve to it.
    pub fn curve_from_stroke(&self, req: &StrokeRequest) -> SessionResult<MuscleCurve> {
        let camera = req.camera.to_camera()?;
        let stroke: Vec<(f64, f64)> = req.stroke.iter().map(|p| (p[0], p[1])).collect();
        let samples = project_sketch(&self.model.original, &stroke, &camera)?;
        let k = req.control_points.unwrap_or(DEFAULT_CONTROL_POINTS);
        let fit = fit_spline(&samples, k)?;
        let tissue_values = req.tissue_values.clone().unwrap_or_else(|| vec![1.0; k]);
        Ok(MuscleCurve::new(req.id, fit.control_points, tissue_values))
    }

    pub fn apply(&mut self, req: &CurveRequest) -> SessionResult<u64> {
        let curve = match req {
            CurveRequest::Curve(c) => MuscleCurve::from(c),
            CurveRequest::Stroke(s) => self.curve_from_stroke(s)?,
        };
        self.upsert_curve(curve)
    }

    /// Add or replace a curve and re-solve. A change of tissue values alone
    /// keeps the factorizations; anything else rebuilds the problem.
    pub fn upsert_curve(&mut self, curve: MuscleCurve) -> SessionResult<u64> {
        let mut curves = self.model.curves.clone();
        let old = curves.iter().position(|c| c.id == curve.id);
        let values_only = old.is_some_and(|i| same_geometry(&curves[i], &curve));
        match old {
            Some(i) => curves[i] = curve.clone(),
            None => curves.push(curve.clone()),
        }
        check_curves(&self.model.original, &curves)?;
        let d_fat = self.d_fat.unwrap_or_else(|| default_d_fat(&curves));
        let mut params = self.model.params;
        params.d_fat = d_fat;
        let problem = if values_only {
            self.problem.with_tissue_values(curve.id, &curve.tissue_values)?.with_d_fat(d_fat)?
        } else {
            FieldProblem::new(&self.model.removal.mesh, &curves, &params)?
        };
        self.commit(curves, params, problem)?;
        self.append(&JournalOp::Upsert { curve: CurveJson::from(&curve), revision: self.revision })?;
        Ok(self.revision)
    }

    /// Remove a curve and re-solve. Without curves only fat remains.
    pub fn delete_curve(&mut self, id: u32) -> SessionResult<u64> {
        let mut curves = self.model.curves.clone();
        let Some(i) = curves.iter().position(|c| c.id == id) else {
            return Err(SessionError::NotFound(format!("no curve {id}")));
        };
        curves.remove(i);
        let mut params = self.model.params;
        params.d_fat = self.d_fat.unwrap_or_else(|| default_d_fat(&curves));
        let problem = FieldProblem::new(&self.model.removal.mesh, &curves, &params)?;
        self.commit(curves, params, problem)?;
        self.append(&JournalOp::Delete { id, revision: self.revision })?;
        Ok(self.revision)
    }

    fn commit(&mut self, curves: Vec<MuscleCurve>, params: SolveParams, problem: FieldProblem) -> SessionResult<()> {
        self.fields = solve(&problem)?;
        self.problem = problem;
        self.model.curves = curves;
        self.model.params = params;
        self.revision += 1;
        Ok(())
    }

    /// Write the deliverables for the current revision into `dir`. Calling
    /// again at the same revision returns the same manifest without
    /// rewriting.
    pub fn finalize(&mut self, dir: &Path) -> SessionResult<Manifest> {
        if self.model.curves.is_empty() {
            return Err(SessionError::Conflict("cannot finalize a session without curves".into()));
        }
        if let Some((rev, m)) = &self.finalized {
            if *rev == self.revision {
                return Ok(m.clone());
            }
        }
        let manifest = finalize_artifacts(&self.model, &self.fields, &self.settings, dir)?;
        self.finalized = Some((self.revision, manifest.clone()));
        Ok(manifest)
    }
}

fn same_geometry(a: &MuscleCurve, b: &MuscleCurve) -> bool {
    let bits = |p: &[Vec3]| p.iter().flat_map(|v| [v.x(), v.y(), v.z()].map(f64::to_bits)).collect::<Vec<_>>();
    bits(&a.control_points) == bits(&b.control_points)
        && a.twist_angle.to_bits() == b.twist_angle.to_bits()
        && a.eigenvalues.map(f64::to_bits) == b.eigenvalues.map(f64::to_bits)
        && a.tissue_values.len() == b.tissue_values.len()
}
