use myovox::io::{
    curves_to_json, field_buffer_f32, fields_bin, fields_json, mesh_from_text, parse_curves, parse_ele,
    parse_field_buffer_f32, parse_fields_bin, parse_fields_json, parse_node, write_ele, write_node,
};
use myovox_core::curves::MuscleCurve;
use myovox_core::scenes::jittered_cube_grid;
use myovox_core::solver::TissueFieldSet;
use myovox_core::Vec3;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn field_set() -> impl Strategy<Value = TissueFieldSet> {
    (1usize..5, 1usize..40).prop_flat_map(|(k, n)| {
        (prop::collection::btree_set(1u32..1000, k), prop::collection::vec(prop::collection::vec(finite(), n), k + 1))
            .prop_map(|(ids, fields)| {
                let mut ids: Vec<u32> = ids.into_iter().collect();
                ids.push(0);
                let k = ids.len();
                TissueFieldSet::new(ids, fields.into_iter().take(k).collect()).unwrap()
            })
    })
}

fn bits(f: &TissueFieldSet) -> Vec<u64> {
    f.fields().iter().flatten().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_fields_round_trip(f in field_set()) {
        let back = parse_fields_bin(&fields_bin(&f)).unwrap();
        prop_assert_eq!(back.tissue_ids(), f.tissue_ids());
        prop_assert_eq!(bits(&back), bits(&f));
    }

    #[test]
    fn json_fields_round_trip(f in field_set()) {
        let back = parse_fields_json(&fields_json(&f)).unwrap();
        prop_assert_eq!(back.tissue_ids(), f.tissue_ids());
        prop_assert_eq!(bits(&back), bits(&f));
    }

    #[test]
    fn truncated_binary_is_rejected(f in field_set(), cut in 1usize..8) {
        let bytes = fields_bin(&f);
        prop_assert!(parse_fields_bin(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn session_buffer_holds_rounded_values(f in field_set()) {
        let (ids, values) = parse_field_buffer_f32(&field_buffer_f32(&f)).unwrap();
        prop_assert_eq!(&ids[..], f.tissue_ids());
        for (got, want) in values.iter().zip(f.fields()) {
            prop_assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(want) {
                prop_assert_eq!(g.to_bits(), (*w as f32).to_bits());
            }
        }
    }

    #[test]
    fn tetgen_text_round_trips(seed in 0u64..1000, n in 1usize..4) {
        let mesh = jittered_cube_grid(n, 1.0, 0.3, seed);
        let node = write_node(mesh.vertices());
        let ele = write_ele(mesh.tets());
        let (verts, base) = parse_node(&node).unwrap();
        prop_assert_eq!(base, 0);
        prop_assert_eq!(&verts[..], mesh.vertices());
        prop_assert_eq!(&parse_ele(&ele, verts.len(), base).unwrap()[..], mesh.tets());
        let back = mesh_from_text(&node, &ele, None).unwrap();
        prop_assert_eq!(back.num_tets(), mesh.num_tets());
    }

    #[test]
    fn curves_round_trip_bitwise(
        pts in prop::collection::vec((finite(), finite(), finite()), 4..9),
        value in 0.01..100.0f64,
        twist in -3.0..3.0f64,
        d_fat in prop::option::of(0.01..10.0f64),
    ) {
        let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
        let mut c = MuscleCurve::new(7, pts.clone(), vec![value; pts.len()]);
        c.twist_angle = twist;
        let (back, fat) = parse_curves(&curves_to_json(&[c.clone()], d_fat)).unwrap();
        prop_assert_eq!(fat.map(f64::to_bits), d_fat.map(f64::to_bits));
        prop_assert_eq!(back.len(), 1);
        let b = &back[0];
        prop_assert_eq!(b.id, c.id);
        prop_assert_eq!(b.twist_angle.to_bits(), c.twist_angle.to_bits());
        prop_assert_eq!(&b.control_points, &c.control_points);
        prop_assert_eq!(b.eigenvalues.map(f64::to_bits), c.eigenvalues.map(f64::to_bits));
        prop_assert_eq!(b.tissue_values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), c.tissue_values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn wrong_magic_is_rejected() {
    assert!(parse_fields_bin(b"NOPE\x01\0\0\0\x01\0\0\0\x01\0\0\0").is_err());
    assert!(parse_field_buffer_f32(&[]).is_err());
}
