//! Constrained Dirichlet solves for the muscle and fat tissue functions.
//!
//! Every tissue minimizes `x^T L x + alpha |B x - d|^2` with hard values on
//! the skin. `B` stacks the collocation rows of all curves, so every
//! isotropic muscle and the fat function share one system matrix and one
//! factorization; they differ only in `d` and the skin values.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::anisotropy::{build_curve_tensor_field, TensorField};
use crate::cholesky::{CholeskyFactor, FactorError};
use crate::curves::{assemble_constraints, trace_collocation, CollocationSet, ConstraintSystem, MuscleCurve};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use crate::tetmesh::{anisotropic_laplacian, cotan_laplacian, BoneRemoval, TetMesh, VertexTag};

/// Tissue id used for the fat function in headers and label tables.
pub const FAT_ID: u32 = 0;
pub const DEFAULT_ALPHA: f64 = 5.0;
/// Fraction of the mean control-point tissue value used for `d_fat` when
/// the input does not give one.
pub const DEFAULT_D_FAT_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub alpha: f64,
    pub d_fat: f64,
    /// Leave open-boundary skin vertices unconstrained (half-mesh models).
    pub exclude_open_boundary: bool,
    pub samples_per_span: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            alpha: DEFAULT_ALPHA,
            d_fat: DEFAULT_D_FAT_FRACTION,
            exclude_open_boundary: false,
            samples_per_span: crate::curves::DEFAULT_SAMPLES_PER_SPAN,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.d_fat >= 0.0 && self.d_fat.is_finite()) {
            return Err(Error::InvalidInput(format!("d_fat must be non-negative, got {}", self.d_fat)));
        }
        if self.samples_per_span == 0 {
            return Err(Error::InvalidInput("samples_per_span must be positive".into()));
        }
        Ok(())
    }
}

/// `d_fat` default: 0.3 of the mean control-point tissue value, or 0.3 with
/// no curves.
pub fn default_d_fat(curves: &[MuscleCurve]) -> f64 {
    let vals: Vec<f64> = curves.iter().flat_map(|c| c.tissue_values.iter().copied()).collect();
    if vals.is_empty() {
        DEFAULT_D_FAT_FRACTION
    } else {
        DEFAULT_D_FAT_FRACTION * vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Per-vertex fields, one per tissue: muscles in ascending curve id, then fat.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueFieldSet {
    tissue_ids: Vec<u32>,
    fields: Vec<Vec<f64>>,
}

impl TissueFieldSet {
    /// `tissue_ids` must end with [`FAT_ID`] and match `fields` in length.
    pub fn new(tissue_ids: Vec<u32>, fields: Vec<Vec<f64>>) -> Result<Self> {
        if tissue_ids.len() != fields.len() || tissue_ids.last() != Some(&FAT_ID) {
            return Err(Error::InvalidInput("field set must list muscles then fat".into()));
        }
        if tissue_ids[..tissue_ids.len() - 1].contains(&FAT_ID) {
            return Err(Error::InvalidInput("tissue id 0 is reserved for fat".into()));
        }
        let n = fields[0].len();
        if fields.iter().any(|f| f.len() != n) {
            return Err(Error::InvalidInput("fields differ in length".into()));
        }
        if fields.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("fields contain non-finite values".into()));
        }
        Ok(TissueFieldSet { tissue_ids, fields })
    }

    /// Wrap raw fields for tissues `1..=m` followed by fat.
    pub fn from_fields(fields: Vec<Vec<f64>>) -> Result<Self> {
        let m = fields.len().saturating_sub(1) as u32;
        let mut ids: Vec<u32> = (1..=m).collect();
        ids.push(FAT_ID);
        Self::new(ids, fields)
    }

    pub fn tissue_ids(&self) -> &[u32] {
        &self.tissue_ids
    }

    pub fn num_tissues(&self) -> usize {
        self.fields.len()
    }

    pub fn num_muscles(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn num_vertices(&self) -> usize {
        self.fields[0].len()
    }

    pub fn field(&self, k: usize) -> &[f64] {
        &self.fields[k]
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn muscle_fields(&self) -> &[Vec<f64>] {
        &self.fields[..self.fields.len() - 1]
    }

    pub fn fat_field(&self) -> &[f64] {
        self.fields.last().expect("fat field present")
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.tissue_ids.iter().position(|&t| t == id)
    }

    /// Values of every tissue at vertex `v`.
    pub fn values_at(&self, v: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f[v]).collect()
    }

    /// Scale every value (used for linearity checks).
    pub fn scaled(&self, s: f64) -> Self {
        TissueFieldSet {
            tissue_ids: self.tissue_ids.clone(),
            fields: self.fields.iter().map(|f| f.iter().map(|v| v * s).collect()).collect(),
        }
    }

    /// Carry fields on the bone-free domain back to the original vertex
    /// numbering. Bone-only vertices get `fill`.
    pub fn lift(&self, removal: &BoneRemoval, fill: f64) -> Self {
        let n = removal.original_to_vertex.len();
        let fields = self
            .fields
            .iter()
            .map(|f| (0..n).map(|v| removal.original_to_vertex[v].map_or(fill, |d| f[d])).collect())
            .collect();
        TissueFieldSet { tissue_ids: self.tissue_ids.clone(), fields }
    }
}

/// A factored free-set system `(L + alpha B^T B)_ff`, reusable for any
/// constraint targets and fixed values.
#[derive(Debug, Clone)]
pub struct QuadraticSystem {
    n: usize,
    alpha: f64,
    b: SparseOperator,
    free: Vec<usize>,
    fixed: Vec<usize>,
    /// `Q_fc`: free rows, fixed columns.
    coupling: SparseOperator,
    factor: Option<CholeskyFactor>,
}

impl QuadraticSystem {
    pub fn new(l: &SparseOperator, b: &SparseOperator, alpha: f64, fixed_ids: &[usize]) -> Result<Self> {
        let n = l.rows();
        if l.cols() != n || b.cols() != n {
            return Err(Error::InvalidInput("operator shapes do not match".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be non-negative, got {alpha}")));
        }
        let mut is_fixed = vec![false; n];
        for &v in fixed_ids {
            if v >= n {
                return Err(Error::InvalidInput(format!("fixed vertex {v} out of range")));
            }
            if is_fixed[v] {
                return Err(Error::InvalidInput(format!("fixed vertex {v} listed twice")));
            }
            is_fixed[v] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&v| !is_fixed[v]).collect();
        let fixed: Vec<usize> = (0..n).filter(|&v| is_fixed[v]).collect();
        let q = if b.rows() > 0 && alpha > 0.0 { l.add(&b.gram().scaled(alpha)) } else { l.clone() };
        let coupling = q.submatrix(&free, &fixed);
        let factor = if free.is_empty() {
            None
        } else {
            let qff = q.submatrix(&free, &free);
            match CholeskyFactor::factor(&qff) {
                Ok(f) => Some(f),
                Err(FactorError::NotPositiveDefinite(r)) => {
                    return Err(Error::Singular(format!("free system (vertex {})", free[r])))
                }
                Err(FactorError::NotSquare) => return Err(Error::Internal("free system not square".into())),
            }
        };
        Ok(QuadraticSystem { n, alpha, b: b.clone(), free, fixed, coupling, factor })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn fixed_ids(&self) -> &[usize] {
        &self.fixed
    }

    /// Minimizer for targets `d` and values on the fixed set (in ascending
    /// fixed-id order).
    pub fn solve(&self, d: &[f64], fixed_vals: &[f64]) -> Vec<f64> {
        assert_eq!(d.len(), self.b.rows());
        assert_eq!(fixed_vals.len(), self.fixed.len());
        let mut x = vec![0.0; self.n];
        for (&v, &val) in self.fixed.iter().zip(fixed_vals) {
            x[v] = val;
        }
        let Some(factor) = &self.factor else { return x };
        let btd = if d.is_empty() { vec![0.0; self.n] } else { self.b.mul_transpose_vec(d) };
        let couple = self.coupling.mul_vec(fixed_vals);
        let rhs: Vec<f64> = self.free.iter().enumerate().map(|(i, &v)| self.alpha * btd[v] - couple[i]).collect();
        let xf = factor.solve(&rhs);
        for (&v, val) in self.free.iter().zip(xf) {
            x[v] = val;
        }
        x
    }
}

/// `argmin x^T L x + alpha |B x - d|^2` with `x[fixed_ids] = fixed_vals`.
pub fn solve_quadratic(
    l: &SparseOperator,
    b: &SparseOperator,
    d: &[f64],
    alpha: f64,
    fixed_ids: &[usize],
    fixed_vals: &[f64],
) -> Result<Vec<f64>> {
    if fixed_ids.len() != fixed_vals.len() || d.len() != b.rows() {
        return Err(Error::InvalidInput("constraint sizes do not match".into()));
    }
    let sys = QuadraticSystem::new(l, b, alpha, fixed_ids)?;
    let mut by_id: Vec<(usize, f64)> = fixed_ids.iter().copied().zip(fixed_vals.iter().copied()).collect();
    by_id.sort_by_key(|p| p.0);
    let vals: Vec<f64> = by_id.iter().map(|p| p.1).collect();
    Ok(sys.solve(d, &vals))
}

/// Everything needed to solve each tissue independently: traced curves,
/// stacked constraints, and the factorizations.
#[derive(Debug, Clone)]
pub struct FieldProblem {
    params: SolveParams,
    curves: Vec<MuscleCurve>,
    collocations: Vec<CollocationSet>,
    /// Row range of each curve inside the stacked `B`.
    row_ranges: Vec<(usize, usize)>,
    targets: Vec<Vec<f64>>,
    shared: Arc<QuadraticSystem>,
    /// Own system for anisotropic muscles, by curve position.
    anisotropic: Vec<Option<Arc<QuadraticSystem>>>,
    fixed_count: usize,
}

/// Skin vertices carrying hard values.
pub fn dirichlet_vertices(mesh: &TetMesh, exclude_open_boundary: bool) -> Vec<usize> {
    (0..mesh.num_vertices())
        .filter(|&v| {
            let tag = mesh.tag(v);
            tag.contains(VertexTag::SKIN) && !(exclude_open_boundary && tag.contains(VertexTag::OPEN_BOUNDARY))
        })
        .collect()
}

impl FieldProblem {
    /// Trace every curve and factor the shared system. Tensors for curves
    /// with unequal eigenvalues are built from their frames.
    pub fn new(mesh: &TetMesh, curves: &[MuscleCurve], params: &SolveParams) -> Result<Self> {
        Self::build(mesh, curves, None, params)
    }

    /// Like [`FieldProblem::new`] with caller-supplied tensors (one slot per
    /// curve, in the given curve order).
    pub fn with_tensors(
        mesh: &TetMesh,
        curves: &[MuscleCurve],
        tensors: &[Option<TensorField>],
        params: &SolveParams,
    ) -> Result<Self> {
        if tensors.len() != curves.len() {
            return Err(Error::InvalidInput("one tensor slot per curve is required".into()));
        }
        Self::build(mesh, curves, Some(tensors), params)
    }

    fn build(
        mesh: &TetMesh,
        curves: &[MuscleCurve],
        tensors: Option<&[Option<TensorField>]>,
        params: &SolveParams,
    ) -> Result<Self> {
        params.validate()?;
        let mut order: Vec<usize> = (0..curves.len()).collect();
        order.sort_by_key(|&i| curves[i].id);
        for w in order.windows(2) {
            if curves[w[0]].id == curves[w[1]].id {
                return Err(Error::InvalidInput(format!("duplicate curve id {}", curves[w[0]].id)));
            }
        }
        let sorted: Vec<MuscleCurve> = order.iter().map(|&i| curves[i].clone()).collect();
        let mut collocations = Vec::with_capacity(sorted.len());
        for c in &sorted {
            collocations.push(trace_collocation(mesh, c, params.samples_per_span)?);
        }
        let mut stacked = ConstraintSystem::empty(mesh.num_vertices());
        let mut row_ranges = Vec::new();
        let mut targets = Vec::new();
        for set in &collocations {
            let sys = assemble_constraints(mesh, set)?;
            row_ranges.push((stacked.rows(), stacked.rows() + sys.rows()));
            targets.push(sys.d.clone());
            stacked = stacked.stack(&sys);
        }
        let fixed = dirichlet_vertices(mesh, params.exclude_open_boundary);
        let lc = cotan_laplacian(mesh)?;
        let shared = QuadraticSystem::new(&lc, &stacked.b, params.alpha, &fixed).map_err(|e| rename(e, "fat"))?;
        let mut anisotropic = Vec::with_capacity(sorted.len());
        for (pos, c) in sorted.iter().enumerate() {
            let tensor = match tensors {
                Some(t) => t[order[pos]].clone(),
                None if !c.is_isotropic() => Some(build_curve_tensor_field(mesh, c, &collocations[pos])?),
                None => None,
            };
            let sys = match tensor {
                None => None,
                Some(t) => {
                    let l = anisotropic_laplacian(mesh, &t)?;
                    let sys = QuadraticSystem::new(&l, &stacked.b, params.alpha, &fixed)
                        .map_err(|e| rename(e, &format!("muscle {}", c.id)))?;
                    Some(Arc::new(sys))
                }
            };
            anisotropic.push(sys);
        }
        Ok(FieldProblem {
            params: *params,
            curves: sorted,
            collocations,
            row_ranges,
            targets,
            shared: Arc::new(shared),
            anisotropic,
            fixed_count: fixed.len(),
        })
    }

    pub fn params(&self) -> &SolveParams {
        &self.params
    }

    /// Curves in tissue order.
    pub fn curves(&self) -> &[MuscleCurve] {
        &self.curves
    }

    pub fn collocations(&self) -> &[CollocationSet] {
        &self.collocations
    }

    pub fn num_tissues(&self) -> usize {
        self.curves.len() + 1
    }

    pub fn tissue_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.curves.iter().map(|c| c.id).collect();
        ids.push(FAT_ID);
        ids
    }

    /// Stacked target vector for tissue `k` (muscles first, fat last).
    fn targets_for(&self, k: usize) -> Vec<f64> {
        let rows = self.row_ranges.last().map_or(0, |r| r.1);
        let mut d = vec![0.0; rows];
        if k < self.curves.len() {
            let (a, b) = self.row_ranges[k];
            d[a..b].copy_from_slice(&self.targets[k]);
        }
        d
    }

    /// Solve one tissue. Pure, so tissues may be solved in any order or
    /// concurrently with identical results.
    pub fn solve_tissue(&self, k: usize) -> Vec<f64> {
        assert!(k < self.num_tissues());
        let d = self.targets_for(k);
        let skin = if k == self.curves.len() { self.params.d_fat } else { 0.0 };
        let fixed_vals = vec![skin; self.fixed_count];
        let sys = if k < self.curves.len() { self.anisotropic[k].as_deref() } else { None };
        sys.unwrap_or(&self.shared).solve(&d, &fixed_vals)
    }

    pub fn solve_all(&self) -> TissueFieldSet {
        let fields = (0..self.num_tissues()).map(|k| self.solve_tissue(k)).collect();
        TissueFieldSet { tissue_ids: self.tissue_ids(), fields }
    }

    /// Copy with new tissue values on one curve whose geometry is
    /// unchanged. Constraint rows and factorizations are shared, only the
    /// targets are recomputed.
    pub fn with_tissue_values(&self, curve_id: u32, values: &[f64]) -> Result<Self> {
        let pos = self
            .curves
            .iter()
            .position(|c| c.id == curve_id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown curve {curve_id}")))?;
        let mut curve = self.curves[pos].clone();
        curve.tissue_values = values.to_vec();
        curve.validate()?;
        let mut out = self.clone();
        let spline = curve.spline();
        let set = &mut out.collocations[pos];
        for e in &mut set.entries {
            e.tissue_value = spline.scalar(&curve.tissue_values, e.param);
        }
        out.targets[pos] = set.entries.iter().map(|e| e.tissue_value).collect();
        out.curves[pos] = curve;
        Ok(out)
    }

    /// Copy with a different `d_fat`; nothing else changes.
    pub fn with_d_fat(&self, d_fat: f64) -> Result<Self> {
        let mut out = self.clone();
        out.params.d_fat = d_fat;
        out.params.validate()?;
        Ok(out)
    }
}

fn rename(e: Error, what: &str) -> Error {
    match e {
        Error::Singular(s) => Error::Singular(String::from(what) + ": " + &s),
        other => other,
    }
}

/// Solve every tissue field for the given curves.
pub fn solve_tissue_fields(
    mesh: &TetMesh,
    curves: &[MuscleCurve],
    tensors: &[Option<TensorField>],
    params: &SolveParams,
) -> Result<TissueFieldSet> {
    let problem = if tensors.is_empty() {
        FieldProblem::new(mesh, curves, params)?
    } else {
        FieldProblem::with_tensors(mesh, curves, tensors, params)?
    };
    Ok(problem.solve_all())
}
