use myovox_core::Vec3;
use serde::Serialize;

use crate::json::fmt_f64;

/// One row per tet: id, centroid, unit direction.
pub fn fibers_csv(centroids: &[Vec3], directions: &[Vec3]) -> String {
    let mut s = String::from("tet,cx,cy,cz,dx,dy,dz\n");
    for (t, (c, d)) in centroids.iter().zip(directions).enumerate() {
        let cols = [c.x(), c.y(), c.z(), d.x(), d.y(), d.z()].map(fmt_f64);
        s.push_str(&format!("{t},{}\n", cols.join(",")));
    }
    s
}

#[derive(Serialize)]
struct Row {
    tet: usize,
    centroid: [f64; 3],
    direction: [f64; 3],
}

pub fn fibers_json(centroids: &[Vec3], directions: &[Vec3]) -> String {
    let rows: Vec<Row> = centroids
        .iter()
        .zip(directions)
        .enumerate()
        .map(|(tet, (c, d))| Row { tet, centroid: [c.x(), c.y(), c.z()], direction: [d.x(), d.y(), d.z()] })
        .collect();
    crate::json::to_string(&rows)
}
