use alloc::vec::Vec;

use super::bone_surface;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::render::Camera;
use crate::tetmesh::TetMesh;

/// Lift a screen-space stroke (pixel coordinates, `y` down) into 3D. Both
/// ends must hit the bone surface of `mesh`, which still holds its bone
/// tets. Interior view depths interpolate the end depths linearly in stroke
/// arc length.
pub fn project_sketch(mesh: &TetMesh, stroke: &[(f64, f64)], camera: &Camera) -> Result<Vec<Vec3>> {
    if stroke.len() < 2 {
        return Err(Error::InvalidInput("a stroke needs at least two points".into()));
    }
    camera.validate()?;
    let bone = bone_surface(mesh);
    let forward = camera.forward();
    let end_depth = |px: (f64, f64)| -> Result<f64> {
        let (o, d) = camera.ray(px.0, px.1);
        let hit = bone.first_hit(o, d, 0.0).ok_or(Error::StrokeOffBone)?;
        Ok(hit.t * d.dot(forward))
    };
    let z0 = end_depth(stroke[0])?;
    let z1 = end_depth(stroke[stroke.len() - 1])?;
    let mut cum = Vec::with_capacity(stroke.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in stroke.windows(2) {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        acc += crate::math::sqrt(dx * dx + dy * dy);
        cum.push(acc);
    }
    let total = acc;
    Ok(stroke
        .iter()
        .zip(&cum)
        .enumerate()
        .map(|(i, (&px, &s))| {
            let f = if i + 1 == stroke.len() {
                1.0
            } else if total > 0.0 {
                s / total
            } else {
                0.0
            };
            let z = z0 + (z1 - z0) * f;
            let (o, d) = camera.ray(px.0, px.1);
            o + d * (z / d.dot(forward))
        })
        .collect())
}
