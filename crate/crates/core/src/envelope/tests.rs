use super::*;
use crate::scenes::{bone_block_mesh, cube_grid, jittered_cube_grid, random_smooth_fields, SplitMix64};
use alloc::vec::Vec;

fn fields_of(mesh: &TetMesh, f: impl Fn(Vec3) -> Vec<f64>) -> TissueFieldSet {
    let per: Vec<Vec<f64>> = mesh.vertices().iter().map(|&p| f(p)).collect();
    let k = per[0].len();
    TissueFieldSet::from_fields((0..k).map(|a| per.iter().map(|v| v[a]).collect()).collect()).unwrap()
}

fn unit_tet() -> [Vec3; 4] {
    [Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z]
}

fn vol(p: &[Vec3], t: &[usize; 4]) -> f64 {
    signed_volume(p[t[0]], p[t[1]], p[t[2]], p[t[3]])
}

#[test]
fn split_tet_single_positive_corner_matches_cut_volume() {
    let f = [0.7, -0.3, -0.5, -0.9];
    let s = split_tet(unit_tet(), f, 1e-9).unwrap();
    assert_eq!(s.vertices.len(), 7);
    let total: f64 = s.tets.iter().map(|t| vol(&s.vertices, t)).sum();
    assert!((total - 1.0 / 6.0).abs() < 1e-15);
    // Corner tet volume scales with the product of the edge fractions.
    let frac: f64 = f[1..].iter().map(|&q| f[0] / (f[0] - q)).product();
    let positive: f64 = s
        .tets
        .iter()
        .filter(|t| t.iter().map(|&v| s.values[v]).sum::<f64>() > 0.0)
        .map(|t| vol(&s.vertices, t))
        .sum();
    assert!((positive - frac / 6.0).abs() < 1e-15, "{positive} vs {}", frac / 6.0);
    for t in &s.tets {
        assert!(vol(&s.vertices, t) > 0.0);
        let signs: Vec<f64> = t.iter().map(|&v| s.values[v]).filter(|x| x.abs() > 1e-12).collect();
        assert!(signs.iter().all(|&x| x > 0.0) || signs.iter().all(|&x| x < 0.0));
    }
}

#[test]
fn split_tet_two_by_two_conserves_volume_and_sides() {
    let f = [0.4, 0.6, -0.2, -0.5];
    let s = split_tet(unit_tet(), f, 1e-9).unwrap();
    assert_eq!(s.vertices.len(), 8);
    let total: f64 = s.tets.iter().map(|t| vol(&s.vertices, t)).sum();
    assert!((total - 1.0 / 6.0).abs() < 1e-15);
    for t in &s.tets {
        let signs: Vec<f64> = t.iter().map(|&v| s.values[v]).filter(|x| x.abs() > 1e-12).collect();
        assert!(signs.iter().all(|&x| x > 0.0) || signs.iter().all(|&x| x < 0.0));
    }
}

#[test]
fn split_tet_constant_is_degenerate() {
    let s = split_tet(unit_tet(), [1.0; 4], 1e-6).unwrap();
    assert!(s.degenerate);
    assert_eq!(s.tets.len(), 1);
    let s = split_tet(unit_tet(), [1.0, 1.0, 1.0, 1.0 - 1e-12], 1e-3).unwrap();
    assert_eq!(s.tets.len(), 1);
}

#[test]
fn two_linear_fields_split_cube_in_half() {
    let mesh = cube_grid(3, 1.0);
    let fields = fields_of(&mesh, |p| vec![p.x(), 1.0 - p.x()]);
    let d = maximization_diagram(&mesh, &fields, &EnvelopeOptions::default()).unwrap();
    let vols = d.label_volumes();
    assert_eq!(vols.len(), 2);
    for (_, v) in vols {
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }
    assert_eq!(d.t_junctions(&mesh), 0);
    // Every tet lies on one side of the plane.
    for (t, tet) in d.tets.iter().enumerate() {
        let xs: Vec<f64> = tet.iter().map(|&v| d.vertices[v].x()).collect();
        let expect = if xs.iter().sum::<f64>() > 2.0 { 1 } else { 0 };
        assert_eq!(d.labels[t], TissueLabel::Tissue(expect));
        assert!(xs.iter().all(|&x| x >= 0.5 - 1e-12) || xs.iter().all(|&x| x <= 0.5 + 1e-12));
    }
}

fn assert_consistent(d: &LabeledTetMesh, mesh: &TetMesh) {
    assert_eq!(d.non_manifold_faces(), 0);
    assert_eq!(d.t_junctions(mesh), 0);
    let rel = (d.total_volume() - mesh.total_volume()).abs() / mesh.total_volume();
    assert!(rel < 1e-12, "volume drift {rel}");
    let k = d.tissue_ids.len();
    let tol = 8.0 * d.stats.threshold + 1e-12;
    for (t, tet) in d.tets.iter().enumerate() {
        let TissueLabel::Tissue(id) = d.labels[t] else { continue };
        let a = d.tissue_ids.iter().position(|&x| x == id).unwrap();
        for &v in tet {
            let vals = d.vertex_values(v);
            let top = (0..k).map(|b| vals[b]).fold(f64::NEG_INFINITY, f64::max);
            assert!(vals[a] >= top - tol, "tet {t} label {a} not maximal at vertex {v}");
        }
    }
}

#[test]
fn random_fields_give_consistent_diagram() {
    for seed in 0..6 {
        let mesh = jittered_cube_grid(4, 1.0, 0.15, seed);
        let fields = TissueFieldSet::from_fields(random_smooth_fields(&mesh, 2 + seed as usize % 4, seed)).unwrap();
        let d = maximization_diagram(&mesh, &fields, &EnvelopeOptions::default()).unwrap();
        assert_consistent(&d, &mesh);
        assert_eq!(d.stats.original_tets, mesh.num_tets());
    }
}

#[test]
fn result_ignores_tet_order() {
    let mesh = jittered_cube_grid(4, 1.0, 0.1, 9);
    let fields = TissueFieldSet::from_fields(random_smooth_fields(&mesh, 4, 9)).unwrap();
    let mut rev = mesh.tets().to_vec();
    rev.reverse();
    let mesh_rev = TetMesh::from_geometry(mesh.vertices().to_vec(), rev).unwrap();
    let a = maximization_diagram(&mesh, &fields, &EnvelopeOptions::default()).unwrap();
    let b = maximization_diagram(&mesh_rev, &fields, &EnvelopeOptions::default()).unwrap();
    let key = |d: &LabeledTetMesh| {
        let mut vs: Vec<[u64; 3]> = d.vertices.iter().map(|p| [p.x().to_bits(), p.y().to_bits(), p.z().to_bits()]).collect();
        vs.sort_unstable();
        let mut faces: Vec<[[u64; 3]; 3]> = d
            .tets
            .iter()
            .flat_map(|t| {
                TET_FACES.iter().map(move |f| {
                    let mut face = f.map(|i| {
                        let p = d.vertices[t[i]];
                        [p.x().to_bits(), p.y().to_bits(), p.z().to_bits()]
                    });
                    face.sort_unstable();
                    face
                })
            })
            .collect();
        faces.sort_unstable();
        faces.dedup();
        (vs, faces)
    };
    assert!(key(&a) == key(&b));
}

#[test]
fn pruning_does_not_change_result() {
    let mesh = jittered_cube_grid(4, 1.0, 0.1, 3);
    let fields = TissueFieldSet::from_fields(random_smooth_fields(&mesh, 6, 3)).unwrap();
    let a = maximization_diagram(&mesh, &fields, &EnvelopeOptions { prune: true, ..Default::default() }).unwrap();
    let b = maximization_diagram(&mesh, &fields, &EnvelopeOptions { prune: false, ..Default::default() }).unwrap();
    assert_eq!(a.tets, b.tets);
    assert_eq!(a.labels, b.labels);
    assert!(a.vertices.iter().zip(&b.vertices).all(|(p, q)| p.total_cmp(q).is_eq()));
    assert!(a.stats.pairs_processed <= b.stats.pairs_processed);
}

#[test]
fn prune_matrix_drops_distant_pairs() {
    let mesh = cube_grid(4, 1.0);
    // Tissue 2 never comes close to the top.
    let fields = fields_of(&mesh, |p| vec![p.x(), 1.0 - p.x(), -5.0]);
    let w = prune_tissues(&mesh, &fields).unwrap();
    assert!(w.get(0, 1) && w.get(1, 0));
    assert!(!w.get(0, 2) && !w.get(1, 2) && !w.get(2, 2));
    assert_eq!(w.pairs(), vec![(0, 1)]);
}

#[test]
fn labels_agree_with_point_classification() {
    let mesh = jittered_cube_grid(4, 1.0, 0.1, 5);
    let fields = TissueFieldSet::from_fields(random_smooth_fields(&mesh, 3, 5)).unwrap();
    let d = maximization_diagram(&mesh, &fields, &EnvelopeOptions::default()).unwrap();
    let refined = TetMesh::from_geometry(d.vertices.clone(), d.tets.clone()).unwrap();
    let mut rng = SplitMix64::new(1);
    let mut checked = 0;
    for _ in 0..2000 {
        let p = Vec3::new(rng.range(0.0, 1.0), rng.range(0.0, 1.0), rng.range(0.0, 1.0));
        let Some((t, b)) = mesh.tet_containing_point(p) else { continue };
        let vals: Vec<f64> = (0..3).map(|a| mesh.interpolate(t, &b, fields.field(a))).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        if sorted[0] - sorted[1] < 1e-6 {
            continue;
        }
        let a = classify_point(&mesh, &fields, p).unwrap();
        let (rt, _) = refined.tet_containing_point(p).unwrap();
        assert_eq!(d.labels[rt], TissueLabel::Tissue(fields.tissue_ids()[a]));
        checked += 1;
    }
    assert!(checked > 1500);
}

#[test]
fn bone_tets_are_split_to_match() {
    let mesh = bone_block_mesh(8, false);
    let removal = mesh.remove_bone_tets().unwrap();
    let fields = TissueFieldSet::from_fields(random_smooth_fields(&removal.mesh, 3, 11)).unwrap();
    let d = maximization_diagram_with_bone(&mesh, &removal, &fields, &EnvelopeOptions::default()).unwrap();
    assert_eq!(d.t_junctions(&mesh), 0);
    assert_eq!(d.non_manifold_faces(), 0);
    let bone_vol: f64 = mesh.bone_tet_ids().iter().map(|&t| mesh.tet_volume(t)).sum();
    let got = d.label_volumes().into_iter().find(|(l, _)| *l == TissueLabel::Bone).unwrap().1;
    assert!((got - bone_vol).abs() < 1e-12);
    assert!((d.total_volume() - mesh.total_volume()).abs() < 1e-12);
    for (v, p) in d.provenance.iter().enumerate() {
        if let Provenance::Original(o) = *p {
            assert!(d.vertices[v].total_cmp(&mesh.vertex(o)).is_eq());
        }
    }
}

#[test]
fn boundary_surface_is_closed_with_outward_normals() {
    let mesh = jittered_cube_grid(3, 2.0, 0.1, 2);
    let fields = fields_of(&mesh, |p| vec![p.x() + 0.3 * p.y(), 2.0 - p.x(), 0.5 + p.z() * 0.2]);
    let d = maximization_diagram(&mesh, &fields, &EnvelopeOptions::default()).unwrap();
    let mut sum = 0.0;
    for label in d.label_set() {
        let tm = extract_tissue_mesh(&d, label);
        let s = extract_boundary_surface(&tm.vertices, &tm.tets).unwrap();
        assert!(s.is_closed());
        assert!((s.enclosed_volume() - tm.volume()).abs() < 1e-12);
        sum += tm.volume();
    }
    assert!((sum - 8.0).abs() < 1e-12);
    let whole = extract_boundary_surface(mesh.vertices(), mesh.tets()).unwrap();
    assert_eq!(whole.euler_characteristic(), 2);
    assert!((whole.area() - 24.0).abs() < 0.5);
}

#[test]
fn missing_label_gives_empty_mesh() {
    let mesh = cube_grid(2, 1.0);
    let fields = fields_of(&mesh, |p| vec![p.x(), -1.0]);
    let d = maximization_diagram(&mesh, &fields, &EnvelopeOptions::default()).unwrap();
    assert!(extract_tissue_mesh(&d, TissueLabel::Tissue(0)).is_empty());
    assert_eq!(d.stats.unsplit, mesh.num_tets());
    assert_eq!(d.stats.single_tissue_fraction(), 1.0);
}
