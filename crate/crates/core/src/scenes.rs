//! Synthetic scenes: structured tet grids, bone blocks and muscle curves.
//!
//! These are the fixtures used by the test suites and the `demo` CLI
//! command. Grids use the six-tet Kuhn split of each cube, which conforms
//! across cells and has no obtuse dihedral angles, so isotropic solves obey
//! the discrete maximum principle.

use alloc::vec;
use alloc::vec::Vec;

use crate::curves::MuscleCurve;
use crate::math::Vec3;
use crate::tetmesh::{MeshTags, TetMesh};

/// Deterministic SplitMix64 generator for fixtures.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Local corner bits `(x, y, z)` of the six Kuhn tets, all sharing the main
/// diagonal from corner 0 to corner 7.
const KUHN: [[usize; 4]; 6] = [
    [0b000, 0b001, 0b011, 0b111],
    [0b000, 0b001, 0b101, 0b111],
    [0b000, 0b010, 0b011, 0b111],
    [0b000, 0b010, 0b110, 0b111],
    [0b000, 0b100, 0b101, 0b111],
    [0b000, 0b100, 0b110, 0b111],
];

fn grid_geometry(
    cells: [usize; 3],
    size: Vec3,
    mirror_y: bool,
) -> (Vec<Vec3>, Vec<[usize; 4]>, Vec<[usize; 3]>) {
    let [nx, ny, nz] = cells;
    let vid = |i: usize, j: usize, k: usize| (i * (ny + 1) + j) * (nz + 1) + k;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            for k in 0..=nz {
                vertices.push(Vec3::new(
                    size.x() * i as f64 / nx as f64,
                    size.y() * j as f64 / ny as f64,
                    size.z() * k as f64 / nz as f64,
                ));
            }
        }
    }
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    let mut cell_of = Vec::with_capacity(6 * nx * ny * nz);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let flip = mirror_y && 2 * j >= ny;
                for pattern in KUHN {
                    tets.push(pattern.map(|bits| {
                        let bx = bits & 1;
                        let mut by = (bits >> 1) & 1;
                        let bz = (bits >> 2) & 1;
                        if flip {
                            by = 1 - by;
                        }
                        vid(i + bx, j + by, k + bz)
                    }));
                    cell_of.push([i, j, k]);
                }
            }
        }
    }
    (vertices, tets, cell_of)
}

/// `n^3` cubes of edge `size / n`, six tets each, no tags.
pub fn cube_grid(n: usize, size: f64) -> TetMesh {
    let (v, t, _) = grid_geometry([n, n, n], Vec3::new(size, size, size), false);
    TetMesh::from_geometry(v, t).expect("grid is valid")
}

/// The unit cube split into six tets.
pub fn unit_cube_six_tets() -> TetMesh {
    cube_grid(1, 1.0)
}

/// Box grid with independent cell counts and extents.
pub fn box_grid(cells: [usize; 3], size: Vec3) -> TetMesh {
    let (v, t, _) = grid_geometry(cells, size, false);
    TetMesh::from_geometry(v, t).expect("grid is valid")
}

/// Cube grid whose upper half (in y) is the mirror image of the lower half,
/// making the tessellation symmetric about the plane `y = size / 2`.
/// `n` must be even.
pub fn mirrored_cube_grid(n: usize, size: f64) -> TetMesh {
    assert!(n % 2 == 0, "mirrored grid needs an even cell count");
    let (v, t, _) = grid_geometry([n, n, n], Vec3::new(size, size, size), true);
    TetMesh::from_geometry(v, t).expect("grid is valid")
}

/// Cube grid with interior vertices displaced randomly by up to
/// `jitter * h` along each axis (`h` the cell size).
pub fn jittered_cube_grid(n: usize, size: f64, jitter: f64, seed: u64) -> TetMesh {
    let (mut v, t, _) = grid_geometry([n, n, n], Vec3::new(size, size, size), false);
    let mut rng = SplitMix64::new(seed);
    let h = size / n as f64;
    for p in v.iter_mut() {
        let interior = (0..3).all(|a| p[a] > 1e-12 && p[a] < size - 1e-12);
        if interior {
            for a in 0..3 {
                p[a] += rng.range(-jitter, jitter) * h;
            }
        }
    }
    TetMesh::from_geometry(v, t).expect("jittered grid is valid")
}

/// A full scene: mesh with skin/bone tags plus a curve network.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TetMesh,
    pub curves: Vec<MuscleCurve>,
    pub d_fat: f64,
}

/// Cube of `n^3` cells (`n` even, at least 8) holding two bone blocks near
/// the `x` ends. Outer boundary vertices are skin. When `mirror` is set the
/// grid is symmetric about `y = 0.5`.
pub fn bone_block_mesh(n: usize, mirror: bool) -> TetMesh {
    assert!(n >= 8 && n % 2 == 0);
    let (v, t, cells) = grid_geometry([n, n, n], Vec3::new(1.0, 1.0, 1.0), mirror);
    let lo = n / 2 - n / 8;
    let hi = n / 2 + n / 8;
    let in_block = |c: [usize; 3], xi: usize| c[0] == xi && (lo..hi).contains(&c[1]) && (lo..hi).contains(&c[2]);
    let bone_tets: Vec<usize> = (0..t.len())
        .filter(|&i| in_block(cells[i], n / 8) || in_block(cells[i], n - 1 - n / 8))
        .collect();
    let geometry = TetMesh::from_geometry(v.clone(), t.clone()).expect("grid is valid");
    let skin_vertices = geometry.boundary_vertices();
    let mut in_bone = vec![false; v.len()];
    let mut in_soft = vec![false; v.len()];
    let mut is_bone = vec![false; t.len()];
    for &b in &bone_tets {
        is_bone[b] = true;
    }
    for (i, tet) in t.iter().enumerate() {
        for &x in tet {
            if is_bone[i] {
                in_bone[x] = true;
            } else {
                in_soft[x] = true;
            }
        }
    }
    let bone_surface_vertices = (0..v.len()).filter(|&i| in_bone[i] && in_soft[i]).collect();
    TetMesh::new(
        v,
        t,
        &MeshTags { skin_vertices, bone_surface_vertices, open_boundary_vertices: Vec::new(), bone_tets },
    )
    .expect("scene mesh is valid")
}

/// The `x` coordinates of the inner faces of the two bone blocks.
pub fn bone_block_faces(n: usize) -> (f64, f64) {
    let a = (n / 8 + 1) as f64 / n as f64;
    let b = (n - 1 - n / 8) as f64 / n as f64;
    (a, b)
}

/// A muscle curve from the left bone block to the right one, passing through
/// `(0.5, y_mid, z_mid)` and attached at `(x, y_end, z_end)` on each block.
pub fn bridge_curve(id: u32, n: usize, ends: (f64, f64), mid: (f64, f64), tissue: f64) -> MuscleCurve {
    let (xa, xb) = bone_block_faces(n);
    let w = xb - xa;
    let p0 = Vec3::new(xa, ends.0, ends.1);
    let p3 = Vec3::new(xb, ends.0, ends.1);
    let p1 = Vec3::new(xa + w / 3.0, mid.0, mid.1);
    let p2 = Vec3::new(xa + 2.0 * w / 3.0, mid.0, mid.1);
    MuscleCurve::new(id, vec![p0, p1, p2, p3], vec![tissue; 4])
}

/// Two muscles bridging the bone blocks, bowed apart in `y`.
pub fn two_muscle_cube(n: usize) -> Scene {
    let mesh = bone_block_mesh(n, false);
    let curves = vec![
        bridge_curve(1, n, (0.45, 0.47), (0.3, 0.47), 1.0),
        bridge_curve(2, n, (0.55, 0.53), (0.7, 0.53), 1.0),
    ];
    Scene { mesh, curves, d_fat: 0.3 }
}

/// Mirror-symmetric variant of [`two_muscle_cube`]: the mesh and the two
/// curves are reflections of each other through `y = 0.5`.
pub fn symmetric_two_muscle_cube(n: usize) -> Scene {
    let mesh = bone_block_mesh(n, true);
    let curves = vec![
        bridge_curve(1, n, (0.45, 0.5), (0.3, 0.5), 1.0),
        bridge_curve(2, n, (0.55, 0.5), (0.7, 0.5), 1.0),
    ];
    Scene { mesh, curves, d_fat: 0.3 }
}

/// Three muscles bridging the bone blocks.
pub fn three_muscle_cube(n: usize) -> Scene {
    let mesh = bone_block_mesh(n, false);
    let curves = vec![
        bridge_curve(1, n, (0.44, 0.44), (0.28, 0.4), 1.0),
        bridge_curve(2, n, (0.56, 0.44), (0.72, 0.4), 1.0),
        bridge_curve(3, n, (0.5, 0.56), (0.5, 0.75), 0.9),
    ];
    Scene { mesh, curves, d_fat: 0.3 }
}

/// Smooth random per-vertex fields for `tissues` tissues: each is a
/// downward paraboloid around a random center plus a random linear term.
/// Returned tissue-major.
pub fn random_smooth_fields(mesh: &TetMesh, tissues: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    let (lo, hi) = mesh.bounding_box();
    (0..tissues)
        .map(|_| {
            let c = Vec3::new(rng.range(lo.x(), hi.x()), rng.range(lo.y(), hi.y()), rng.range(lo.z(), hi.z()));
            let s = rng.range(0.5, 2.0);
            let a = rng.range(0.0, 0.5);
            let g = Vec3::new(rng.range(-0.3, 0.3), rng.range(-0.3, 0.3), rng.range(-0.3, 0.3));
            mesh.vertices()
                .iter()
                .map(|&p| a - s * (p - c).norm_squared() + g.dot(p - c))
                .collect()
        })
        .collect()
}
