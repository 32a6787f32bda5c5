//! Walk a spline through the tet mesh and emit one collocation entry per
//! clipped piece.

use alloc::vec::Vec;

use super::{CollocationEntry, CollocationSet, MuscleCurve, DEFAULT_SAMPLES_PER_SPAN, SNAP_TOLERANCE};
use crate::error::{Error, Result};
use crate::tetmesh::{contains_barycentric, TetMesh};

/// How to treat a curve that leaves the mesh before its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// Leaving the domain farther than the snap tolerance from the end is
    /// an error.
    Strict,
    /// Skip outside stretches and resume where the curve re-enters. Used
    /// when tracing a curve through one extracted muscle.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub samples_per_span: usize,
    pub mode: TraceMode,
    /// Absolute snap tolerance; `None` means `1e-4` of the mesh diagonal.
    pub snap_tolerance: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { samples_per_span: DEFAULT_SAMPLES_PER_SPAN, mode: TraceMode::Strict, snap_tolerance: None }
    }
}

pub fn trace_collocation(mesh: &TetMesh, curve: &MuscleCurve, samples_per_span: usize) -> Result<CollocationSet> {
    trace_collocation_with(mesh, curve, &TraceOptions { samples_per_span, ..TraceOptions::default() })
}

const PARAM_TOL: f64 = 1e-10;

pub fn trace_collocation_with(mesh: &TetMesh, curve: &MuscleCurve, opts: &TraceOptions) -> Result<CollocationSet> {
    curve.validate()?;
    if opts.samples_per_span == 0 {
        return Err(Error::InvalidInput("samples_per_span must be positive".into()));
    }
    let spline = curve.spline();
    let umax = spline.max_param();
    let snap = opts.snap_tolerance.unwrap_or(SNAP_TOLERANCE * mesh.bbox_diagonal());
    let n = opts.samples_per_span * (curve.control_points.len() - 1);
    let u_at = |j: usize| umax * j as f64 / n as f64;
    let inside = |t: usize, u: f64| mesh.barycentric_in(t, spline.point(u)).is_some_and(|b| contains_barycentric(&b));
    let locate = |u: f64| mesh.tet_containing_point(spline.point(u)).map(|(t, _)| t);
    // Smallest parameter in (lo, hi] where `locate` succeeds, given it fails
    // at lo and succeeds at hi.
    let entry_between = |mut lo: f64, mut hi: f64| {
        while hi - lo > PARAM_TOL {
            let mid = 0.5 * (lo + hi);
            if locate(mid).is_some() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let first_located = |from: usize| (from..=n).find(|&j| locate(u_at(j)).is_some());

    let j0 = first_located(0).ok_or(Error::CurveMissesMesh(curve.id))?;
    let mut cur_u = if j0 == 0 { 0.0 } else { entry_between(u_at(j0 - 1), u_at(j0)) };
    if opts.mode == TraceMode::Strict && spline.arc_length(0.0, cur_u) > snap {
        return Err(Error::CurveExitsDomain(cur_u));
    }
    let mut cur_t = locate(cur_u);
    let mut last_in = cur_u;
    let mut pieces: Vec<(usize, f64, f64)> = Vec::new();
    let mut guard = 0usize;
    let guard_max = 8 * mesh.num_tets() + 8 * n + 16;
    let mut j = j0 + 1;
    while j <= n {
        let Some(t) = cur_t else { break };
        let u = u_at(j);
        if inside(t, u) {
            last_in = u;
            j += 1;
            continue;
        }
        guard += 1;
        if guard > guard_max {
            return Err(Error::Internal("curve tracing did not terminate".into()));
        }
        // Bisect the exit from t.
        let (mut lo, mut hi) = (last_in, u);
        while hi - lo > PARAM_TOL {
            let mid = 0.5 * (lo + hi);
            if inside(t, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        pieces.push((t, cur_u, hi));
        let p = spline.point(hi);
        let next = mesh
            .barycentric_in(t, p)
            .and_then(|b| {
                let k = (0..4).min_by(|&a, &c| b[a].total_cmp(&b[c])).unwrap();
                mesh.neighbor(t, k)
            })
            .filter(|&nt| inside(nt, hi))
            .or_else(|| locate(hi));
        match next {
            Some(nt) => {
                cur_t = Some(nt);
                cur_u = hi;
                last_in = hi;
            }
            None => match opts.mode {
                TraceMode::Strict => {
                    if spline.arc_length(hi, umax) <= snap {
                        cur_t = None;
                        break;
                    }
                    return Err(Error::CurveExitsDomain(hi));
                }
                TraceMode::Lenient => {
                    let resume = (j..=n).find(|&jj| locate(u_at(jj)).is_some());
                    match resume {
                        None => {
                            cur_t = None;
                            break;
                        }
                        Some(jj) => {
                            let lo = if jj == 0 { 0.0 } else { u_at(jj - 1).max(hi) };
                            let re = if locate(lo).is_some() { lo } else { entry_between(lo, u_at(jj)) };
                            cur_t = locate(re);
                            cur_u = re;
                            last_in = re;
                            j = jj;
                        }
                    }
                }
            },
        }
    }
    if let Some(t) = cur_t {
        pieces.push((t, cur_u, umax));
    }

    let min_len = 1e-6 * mesh.mean_edge_length();
    let mut entries = Vec::with_capacity(pieces.len());
    for (t, u0, u1) in pieces {
        let length = spline.arc_length(u0, u1);
        if length < min_len {
            continue;
        }
        let param = spline.arc_midpoint(u0, u1);
        let point = spline.point(param);
        let bary = mesh.barycentric_in(t, point).ok_or(Error::DegenerateTet(t))?;
        let tangent = spline.tangent(param).ok_or(Error::ZeroTangent(entries.len()))?;
        entries.push(CollocationEntry {
            tet: t,
            point,
            bary,
            tissue_value: spline.scalar(&curve.tissue_values, param),
            tangent,
            param,
            span: (u0, u1),
            length,
        });
    }
    if entries.is_empty() {
        return Err(Error::CurveMissesMesh(curve.id));
    }
    Ok(CollocationSet { curve_id: curve.id, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scenes::{cube_grid, two_muscle_cube, unit_cube_six_tets};
    use alloc::vec;

    fn line(a: Vec3, b: Vec3, d: f64) -> MuscleCurve {
        let pts = (0..4).map(|i| a.lerp(b, i as f64 / 3.0)).collect();
        MuscleCurve::new(1, pts, vec![d; 4])
    }

    #[test]
    fn curve_inside_one_tet() {
        let m = unit_cube_six_tets();
        let c = m.tet_centroid(2);
        let t = m.tet_points(2);
        let a = c.lerp(t[0], 0.3);
        let b = c.lerp(t[1], 0.3);
        let set = trace_collocation(&m, &line(a, b, 2.0), 64).unwrap();
        assert_eq!(set.len(), 1);
        let e = &set.entries[0];
        assert_eq!(e.tet, 2);
        assert!(e.point.distance(a.lerp(b, 0.5)) < 1e-9);
        assert!((e.tissue_value - 2.0).abs() < 1e-12);
        let bary = m.barycentric_in(2, e.point).unwrap();
        assert!(bary.iter().zip(&e.bary).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn diagonal_matches_dense_sampling() {
        let m = cube_grid(3, 1.0);
        let a = Vec3::new(0.013, 0.021, 0.017);
        let b = Vec3::new(0.981, 0.973, 0.991);
        let set = trace_collocation(&m, &line(a, b, 1.0), 64).unwrap();
        // Oracle: run-length encode dense samples.
        let mut runs: Vec<usize> = Vec::new();
        for i in 0..=200_000 {
            let p = a.lerp(b, i as f64 / 200_000.0);
            let t = m.tet_containing_point_brute_force(p).unwrap().0;
            if runs.last() != Some(&t) {
                runs.push(t);
            }
        }
        let got: Vec<usize> = set.entries.iter().map(|e| e.tet).collect();
        assert_eq!(got, runs);
        assert!((set.total_length() - a.distance(b)).abs() < 1e-3 * a.distance(b));
    }

    #[test]
    fn doubling_samples_is_stable() {
        let scene = two_muscle_cube(8);
        let removal = scene.mesh.remove_bone_tets().unwrap();
        for c in &scene.curves {
            let a = trace_collocation(&removal.mesh, c, 32).unwrap();
            let b = trace_collocation(&removal.mesh, c, 64).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert_eq!(x.tet, y.tet);
                assert!(x.point.distance(y.point) < 1e-9);
            }
            let full = c.spline().arc_length(0.0, c.spline().max_param());
            assert!((a.total_length() - full).abs() < 1e-3 * full);
        }
    }

    #[test]
    fn exiting_curve_is_rejected_unless_lenient() {
        let m = cube_grid(2, 1.0);
        let c = line(Vec3::new(0.5, 0.5, 0.5), Vec3::new(1.5, 0.5, 0.5), 1.0);
        assert!(matches!(trace_collocation(&m, &c, 64), Err(Error::CurveExitsDomain(_))));
        let lenient = TraceOptions { mode: TraceMode::Lenient, ..TraceOptions::default() };
        let set = trace_collocation_with(&m, &c, &lenient).unwrap();
        assert!((set.total_length() - 0.5).abs() < 1e-6);
        let miss = line(Vec3::new(3.0, 3.0, 3.0), Vec3::new(4.0, 3.0, 3.0), 1.0);
        assert_eq!(trace_collocation(&m, &miss, 64), Err(Error::CurveMissesMesh(1)));
    }
}
