use myovox_core::envelope::TriangleMesh;

use crate::json::fmt_f64;

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for p in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", fmt_f64(p.x()), fmt_f64(p.y()), fmt_f64(p.z())));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s
}

pub fn write_off(mesh: &TriangleMesh) -> String {
    let mut s = format!("OFF\n{} {} 0\n", mesh.vertices.len(), mesh.triangles.len());
    for p in &mesh.vertices {
        s.push_str(&format!("{} {} {}\n", fmt_f64(p.x()), fmt_f64(p.y()), fmt_f64(p.z())));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    s
}
