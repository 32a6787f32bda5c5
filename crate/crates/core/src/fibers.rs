//! Fiber directions as the normalized gradient of a potential that runs
//! from 0 at one end of the muscle to 1 at the other, with its gradient
//! pulled toward the curve tangent in the tets the curve crosses.

use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{trace_collocation_with, CollocationSet, MuscleCurve, TraceMode, TraceOptions};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::solver::QuadraticSystem;
use crate::sparse::{dot, SparseOperator};
use crate::tetmesh::{cotan_laplacian, tet_basis_gradients, TetMesh};

pub const DEFAULT_FIBER_ALPHA: f64 = 50.0;
/// Endpoint radius as a fraction of the muscle's bounding-box diagonal.
pub const DEFAULT_ENDPOINT_FRACTION: f64 = 0.025;
/// Gradients at or below this norm carry no direction.
pub const MIN_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberOptions {
    pub alpha: f64,
    /// `None` uses [`DEFAULT_ENDPOINT_FRACTION`] of the bounding-box diagonal,
    /// but never less than the mean edge length.
    pub endpoint_radius: Option<f64>,
    pub samples_per_span: usize,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions {
            alpha: DEFAULT_FIBER_ALPHA,
            endpoint_radius: None,
            samples_per_span: crate::curves::DEFAULT_SAMPLES_PER_SPAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiberField {
    /// Per-vertex potential.
    pub potential: Vec<f64>,
    /// Per-tet unit directions.
    pub directions: Vec<Vec3>,
    pub start_vertices: Vec<usize>,
    pub end_vertices: Vec<usize>,
    /// Tangent-alignment rows: two per collocation entry.
    pub alignment: SparseOperator,
    pub collocation: CollocationSet,
    /// Tets whose direction was copied from a neighbor.
    pub filled: Vec<usize>,
}

impl FiberField {
    /// `|N u|^2`: squared gradient components orthogonal to the curve
    /// tangent, summed over the crossed tets.
    pub fn misalignment_energy(&self) -> f64 {
        let r = self.alignment.mul_vec(&self.potential);
        dot(&r, &r)
    }
}

/// Two rows per entry selecting the gradient components along an
/// orthonormal basis of the tangent's complement.
pub fn alignment_operator(mesh: &TetMesh, colloc: &CollocationSet) -> Result<SparseOperator> {
    let mut trip = Vec::with_capacity(colloc.len() * 8);
    for (e, entry) in colloc.entries.iter().enumerate() {
        let t = entry.tangent.normalized().ok_or(Error::ZeroTangent(e))?;
        let n1 = t.any_orthogonal().normalized().ok_or(Error::ZeroTangent(e))?;
        let n2 = t.cross(n1);
        let (g, _) = tet_basis_gradients(mesh, entry.tet)?;
        let tet = mesh.tet(entry.tet);
        for k in 0..4 {
            trip.push((2 * e, tet[k], n1.dot(g[k])));
            trip.push((2 * e + 1, tet[k], n2.dot(g[k])));
        }
    }
    Ok(SparseOperator::from_triplets(2 * colloc.len(), mesh.num_vertices(), trip))
}

fn within(mesh: &TetMesh, p: Vec3, r: f64) -> Vec<usize> {
    (0..mesh.num_vertices()).filter(|&v| mesh.vertex(v).distance(p) <= r).collect()
}

pub fn solve_fiber_field(muscle: &TetMesh, curve: &MuscleCurve, opts: &FiberOptions) -> Result<FiberField> {
    if !(opts.alpha >= 0.0 && opts.alpha.is_finite()) {
        return Err(Error::InvalidInput(alloc::format!("fiber alpha must be non-negative, got {}", opts.alpha)));
    }
    let radius = opts
        .endpoint_radius
        .unwrap_or_else(|| (DEFAULT_ENDPOINT_FRACTION * muscle.bbox_diagonal()).max(muscle.mean_edge_length()));
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::EndpointRadiusTooSmall);
    }
    let colloc = trace_collocation_with(
        muscle,
        curve,
        &TraceOptions { samples_per_span: opts.samples_per_span, mode: TraceMode::Lenient, snap_tolerance: None },
    )?;
    let start = within(muscle, curve.first_point(), radius);
    let end = within(muscle, curve.last_point(), radius);
    if start.is_empty() || end.is_empty() {
        return Err(Error::EndpointRadiusTooSmall);
    }
    if start.iter().any(|v| end.binary_search(v).is_ok()) {
        return Err(Error::InvalidInput("endpoint regions overlap".into()));
    }
    let n = alignment_operator(muscle, &colloc)?;
    let l = cotan_laplacian(muscle)?;
    let mut fixed: Vec<(usize, f64)> = start.iter().map(|&v| (v, 0.0)).chain(end.iter().map(|&v| (v, 1.0))).collect();
    fixed.sort_by_key(|f| f.0);
    let ids: Vec<usize> = fixed.iter().map(|f| f.0).collect();
    let vals: Vec<f64> = fixed.iter().map(|f| f.1).collect();
    let sys = QuadraticSystem::new(&l, &n, opts.alpha, &ids)?;
    let potential = sys.solve(&vec![0.0; n.rows()], &vals);

    let mut directions = vec![Vec3::ZERO; muscle.num_tets()];
    let mut valid = vec![false; muscle.num_tets()];
    for (t, dir) in directions.iter_mut().enumerate() {
        let (g, _) = tet_basis_gradients(muscle, t)?;
        let tet = muscle.tet(t);
        let grad = (0..4).fold(Vec3::ZERO, |acc, k| acc + g[k] * potential[tet[k]]);
        if grad.norm() > MIN_GRADIENT {
            *dir = grad * (1.0 / grad.norm());
            valid[t] = true;
        }
    }
    let filled = fill_directions(muscle, &mut directions, &valid)?;
    Ok(FiberField { potential, directions, start_vertices: start, end_vertices: end, alignment: n, collocation: colloc, filled })
}

/// Copy each missing direction from the valid tet with the nearest centroid
/// (ties to the lower id).
fn fill_directions(mesh: &TetMesh, dirs: &mut [Vec3], valid: &[bool]) -> Result<Vec<usize>> {
    let missing: Vec<usize> = (0..dirs.len()).filter(|&t| !valid[t]).collect();
    if missing.is_empty() {
        return Ok(missing);
    }
    let sources: Vec<(usize, Vec3)> = (0..dirs.len()).filter(|&t| valid[t]).map(|t| (t, mesh.tet_centroid(t))).collect();
    if sources.is_empty() {
        return Err(Error::Singular("fiber potential is constant".into()));
    }
    for &t in &missing {
        let c = mesh.tet_centroid(t);
        let mut best = (f64::INFINITY, 0);
        for &(s, p) in &sources {
            let d = p.distance(c);
            if d < best.0 {
                best = (d, s);
            }
        }
        dirs[t] = dirs[best.1];
    }
    Ok(missing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Mat3;
    use crate::scenes::box_grid;
    use crate::solver::solve_quadratic;

    /// Box `[0, 10] x [-1, 1]^2` with coarse axial spacing, so a sphere
    /// around each end-face center catches exactly that face.
    fn box_muscle() -> (TetMesh, MuscleCurve, FiberOptions) {
        let grid = box_grid([4, 4, 4], Vec3::new(10.0, 2.0, 2.0));
        let shift = Vec3::new(0.0, -1.0, -1.0);
        let mesh = TetMesh::from_geometry(grid.vertices().iter().map(|&p| p + shift).collect(), grid.tets().to_vec()).unwrap();
        let curve = MuscleCurve::new(
            1,
            (0..4).map(|i| Vec3::new(10.0 * i as f64 / 3.0, 0.0, 0.0)).collect(),
            vec![1.0; 4],
        );
        (mesh, curve, FiberOptions { endpoint_radius: Some(1.5), ..FiberOptions::default() })
    }

    #[test]
    fn box_muscle_gives_axial_field() {
        let (mesh, curve, opts) = box_muscle();
        let f = solve_fiber_field(&mesh, &curve, &opts).unwrap();
        assert_eq!(f.start_vertices.len(), 25);
        assert_eq!(f.end_vertices.len(), 25);
        for (v, &u) in f.potential.iter().enumerate() {
            assert!((u - mesh.vertex(v).x() / 10.0).abs() < 1e-9);
        }
        for d in &f.directions {
            assert!((d.norm() - 1.0).abs() < 1e-9);
            assert!(d.dot(Vec3::X) > 1.0 - 1e-9);
        }
        assert!(f.misalignment_energy() < 1e-18);
    }

    #[test]
    fn zero_alpha_is_plain_laplace() {
        let (mesh, curve, _) = box_muscle();
        let opts = FiberOptions { alpha: 0.0, endpoint_radius: Some(0.8), ..FiberOptions::default() };
        let f = solve_fiber_field(&mesh, &curve, &opts).unwrap();
        let l = cotan_laplacian(&mesh).unwrap();
        let mut ids: Vec<usize> = f.start_vertices.iter().chain(&f.end_vertices).copied().collect();
        ids.sort_unstable();
        let vals: Vec<f64> = ids.iter().map(|v| if f.end_vertices.contains(v) { 1.0 } else { 0.0 }).collect();
        let empty = SparseOperator::zeros(0, mesh.num_vertices());
        let u = solve_quadratic(&l, &empty, &[], 0.0, &ids, &vals).unwrap();
        for (a, b) in u.iter().zip(&f.potential) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn misalignment_decreases_with_alpha() {
        let (mesh, _, _) = box_muscle();
        // Bowed curve with small end patches: the Laplace solution is far
        // from the tangent field.
        let curve = MuscleCurve::new(
            1,
            vec![
                Vec3::new(0.0, -0.5, 0.0),
                Vec3::new(3.3, 0.4, 0.2),
                Vec3::new(6.7, 0.4, -0.2),
                Vec3::new(10.0, -0.5, 0.0),
            ],
            vec![1.0; 4],
        );
        let mut last = f64::INFINITY;
        for alpha in [0.0, 1.0, 10.0, 100.0] {
            let opts = FiberOptions { alpha, endpoint_radius: Some(0.6), ..FiberOptions::default() };
            let e = solve_fiber_field(&mesh, &curve, &opts).unwrap().misalignment_energy();
            assert!(e < last, "alpha {alpha}: {e} >= {last}");
            last = e;
        }
    }

    #[test]
    fn potential_stays_in_unit_range() {
        let (mesh, curve, _) = box_muscle();
        let opts = FiberOptions { endpoint_radius: Some(0.6), ..FiberOptions::default() };
        let f = solve_fiber_field(&mesh, &curve, &opts).unwrap();
        assert!(f.potential.iter().all(|&u| (-1e-6..=1.0 + 1e-6).contains(&u)));
        assert!(f.directions.iter().all(|d| (d.norm() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn directions_rotate_with_the_input() {
        let (mesh, _, _) = box_muscle();
        let curve = MuscleCurve::new(
            1,
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.5, 0.1), Vec3::new(7.0, -0.3, 0.2), Vec3::new(10.0, 0.0, 0.0)],
            vec![1.0; 4],
        );
        let opts = FiberOptions { endpoint_radius: Some(0.7), ..FiberOptions::default() };
        let (s, c) = (0.6f64, 0.8f64);
        let r = Mat3::from_rows(Vec3::new(c, -s * c, s * s), Vec3::new(s, c * c, -c * s), Vec3::new(0.0, s, c));
        let moved = TetMesh::from_geometry(mesh.vertices().iter().map(|&p| r.mul_vec(p)).collect(), mesh.tets().to_vec()).unwrap();
        let mut curve_r = curve.clone();
        curve_r.control_points = curve.control_points.iter().map(|&p| r.mul_vec(p)).collect();
        let a = solve_fiber_field(&mesh, &curve, &opts).unwrap();
        let b = solve_fiber_field(&moved, &curve_r, &opts).unwrap();
        for (da, db) in a.directions.iter().zip(&b.directions) {
            assert!(r.mul_vec(*da).distance(*db) < 1e-8);
        }
    }

    #[test]
    fn tiny_radius_is_rejected() {
        let (mesh, curve, _) = box_muscle();
        let opts = FiberOptions { endpoint_radius: Some(0.1), ..FiberOptions::default() };
        // Curve ends sit on grid vertices, so shift them off the grid.
        let mut c = curve.clone();
        c.control_points[0] = Vec3::new(0.0, 0.25, 0.25);
        assert_eq!(solve_fiber_field(&mesh, &c, &opts).unwrap_err(), Error::EndpointRadiusTooSmall);
    }
}
